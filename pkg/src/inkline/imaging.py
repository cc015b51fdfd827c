"""Raster primitives and the low-level image algorithms the pipeline is built from.

Conventions, fixed here and relied on everywhere else:

- Grayscale pixels are 8-bit, 0 = black ink, 255 = white paper.
- Binary foreground means ink: ``intensity <= threshold`` (dark on light).
- Pixels outside the image are background for morphology and replicated
  for smoothing, so page borders never grow phantom structure.
- All operations are pure functions of their inputs; images are immutable
  after construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Union

import numpy as np
from scipy import ndimage


class SEShape(Enum):
    RECT = "rect"
    CROSS = "cross"


class Connectivity(Enum):
    FOUR = 4
    EIGHT = 8


class BBox(NamedTuple):
    """Inclusive pixel bounding box in image coordinates."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    def union(self, other: "BBox") -> "BBox":
        return BBox(
            min(self.x_min, other.x_min),
            min(self.y_min, other.y_min),
            max(self.x_max, other.x_max),
            max(self.y_max, other.y_max),
        )

    def contains_point(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


def _freeze(obj, name: str, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    object.__setattr__(obj, name, arr)


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit grayscale raster, shape (height, width), 0 = black, 255 = white."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"gray image must be 2-D and nonempty, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError(f"gray image needs integer pixels, got {arr.dtype}")
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("gray image intensities must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        _freeze(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class BinaryImage:
    """Boolean raster where True = foreground ink.

    ``otsu_threshold`` records the threshold that produced the image, when
    it came from thresholding.
    """

    pixels: np.ndarray
    otsu_threshold: int | None = None

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"binary image must be 2-D and nonempty, got shape {arr.shape}")
        if arr.dtype != np.bool_:
            arr = arr.astype(np.bool_)
        _freeze(self, "pixels", arr)
        if self.otsu_threshold is not None and not 0 <= self.otsu_threshold <= 255:
            raise ValueError(f"otsu_threshold out of range: {self.otsu_threshold}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def foreground_count(self) -> int:
        return int(np.count_nonzero(self.pixels))


@dataclass(frozen=True)
class StructuringElement:
    """Odd-sized morphology neighborhood anchored at its center."""

    shape: SEShape
    width: int
    height: int

    def __post_init__(self):
        for name, v in (("width", self.width), ("height", self.height)):
            if v < 1 or v % 2 == 0:
                raise ValueError(f"structuring element {name} must be odd and >= 1, got {v}")

    @classmethod
    def rect(cls, width: int, height: int) -> "StructuringElement":
        return cls(SEShape.RECT, width, height)

    @classmethod
    def cross(cls, width: int, height: int) -> "StructuringElement":
        return cls(SEShape.CROSS, width, height)

    def mask(self) -> np.ndarray:
        m = np.zeros((self.height, self.width), dtype=bool)
        if self.shape is SEShape.RECT:
            m[:, :] = True
        else:
            m[self.height // 2, :] = True
            m[:, self.width // 2] = True
        return m

    def offsets(self) -> list[tuple[int, int]]:
        """(dy, dx) offsets of the footprint relative to the anchor."""
        cy, cx = self.height // 2, self.width // 2
        ys, xs = np.nonzero(self.mask())
        return [(int(y - cy), int(x - cx)) for y, x in zip(ys, xs)]


@dataclass(frozen=True)
class Component:
    """One labeled connected region of foreground pixels."""

    label: int
    area: int
    bbox: BBox
    centroid: tuple[float, float]  # (x, y), fractional pixels

    def __post_init__(self):
        if self.label < 1:
            raise ValueError(f"component label must be positive, got {self.label}")
        if self.area < 1:
            raise ValueError(f"component area must be >= 1, got {self.area}")
        if not self.bbox.contains_point(*self.centroid):
            raise ValueError(f"centroid {self.centroid} outside bbox {self.bbox}")


# ---------------------------------------------------------------------------
# Thresholding


def histogram_256(pixels: np.ndarray) -> np.ndarray:
    """256-bin intensity histogram of an 8-bit array."""
    return np.bincount(np.asarray(pixels, dtype=np.uint8).ravel(), minlength=256)


def otsu_from_histogram(hist: np.ndarray) -> int:
    """Threshold maximizing between-class variance over a 256-bin histogram.

    Class 0 is intensities <= t, class 1 is the rest. Ties break toward the
    smallest t. A single-level histogram returns its unique intensity (the
    degenerate case: downstream binarization yields zero foreground).
    """
    hist = np.asarray(hist, dtype=np.float64)
    if hist.shape != (256,):
        raise ValueError(f"expected a 256-bin histogram, got shape {hist.shape}")
    total = hist.sum()
    if total <= 0:
        raise ValueError("histogram is empty")
    nonzero = np.flatnonzero(hist)
    if len(nonzero) == 1:
        return int(nonzero[0])
    p = hist / total
    omega0 = np.cumsum(p)
    mu_cum = np.cumsum(p * np.arange(256))
    mu_total = mu_cum[-1]
    omega1 = 1.0 - omega0
    denom = omega0 * omega1
    numer = (mu_total * omega0 - mu_cum) ** 2
    sigma_b = np.where(denom > 0, numer / np.where(denom > 0, denom, 1.0), 0.0)
    return int(np.argmax(sigma_b))  # argmax takes the first = smallest t


def otsu_threshold(img: GrayImage) -> int:
    """Otsu threshold of a grayscale image (see otsu_from_histogram)."""
    return otsu_from_histogram(histogram_256(img.pixels))


def binarize(img: GrayImage) -> BinaryImage:
    """Threshold dark ink to foreground: out = (intensity <= otsu threshold).

    A uniform image produces zero foreground (a blank page must yield no
    regions, not one page-sized region); the recorded threshold is the
    image's unique intensity.
    """
    t = otsu_threshold(img)
    if img.pixels.min() == img.pixels.max():
        return BinaryImage(np.zeros(img.pixels.shape, dtype=bool), otsu_threshold=t)
    return BinaryImage(img.pixels <= t, otsu_threshold=t)


# ---------------------------------------------------------------------------
# Morphology


def _shifted(a: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """out[y, x] = a[y+dy, x+dx], background (False) outside the image."""
    h, w = a.shape
    out = np.zeros_like(a)
    y0, y1 = max(0, -dy), min(h, h - dy)
    x0, x1 = max(0, -dx), min(w, w - dx)
    if y0 < y1 and x0 < x1:
        out[y0:y1, x0:x1] = a[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
    return out


def _fold_shifts(pixels: np.ndarray, offsets, combine, identity: bool) -> np.ndarray:
    acc = np.full(pixels.shape, identity, dtype=bool)
    for dy, dx in offsets:
        combine(acc, _shifted(pixels, dy, dx), out=acc)
    return acc


def _morph(pixels: np.ndarray, se: StructuringElement, combine, identity: bool) -> np.ndarray:
    if se.shape is SEShape.RECT:
        # a rectangle is separable: one horizontal pass, one vertical pass
        half_w, half_h = se.width // 2, se.height // 2
        row = [(0, dx) for dx in range(-half_w, half_w + 1)]
        col = [(dy, 0) for dy in range(-half_h, half_h + 1)]
        return _fold_shifts(_fold_shifts(pixels, row, combine, identity), col, combine, identity)
    return _fold_shifts(pixels, se.offsets(), combine, identity)


def dilate(img: BinaryImage, se: StructuringElement) -> BinaryImage:
    """out[p] = any foreground under the element anchored at p."""
    acc = _morph(img.pixels, se, np.logical_or, False)
    return BinaryImage(acc, otsu_threshold=img.otsu_threshold)


def erode(img: BinaryImage, se: StructuringElement) -> BinaryImage:
    """out[p] = all pixels under the element anchored at p are foreground.

    Outside pixels count as background, so a full-foreground image erodes
    at its border.
    """
    acc = _morph(img.pixels, se, np.logical_and, True)
    return BinaryImage(acc, otsu_threshold=img.otsu_threshold)


# ---------------------------------------------------------------------------
# Connected components


def _structure(connectivity: Connectivity) -> np.ndarray:
    if connectivity is Connectivity.EIGHT:
        return np.ones((3, 3), dtype=bool)
    return np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def label_components(
    img: BinaryImage, connectivity: Connectivity = Connectivity.EIGHT
) -> list[Component]:
    """Label foreground into connected components.

    Labels are contiguous from 1 and the returned list is sorted by label;
    areas sum to the total foreground count.
    """
    labels, count = ndimage.label(img.pixels, structure=_structure(connectivity))
    if count == 0:
        return []
    flat = labels.ravel()
    areas = np.bincount(flat, minlength=count + 1)[1:]
    yy, xx = np.indices(labels.shape)
    xsum = np.bincount(flat, weights=xx.ravel(), minlength=count + 1)[1:]
    ysum = np.bincount(flat, weights=yy.ravel(), minlength=count + 1)[1:]
    slices = ndimage.find_objects(labels)
    out = []
    for i, sl in enumerate(slices):
        bbox = BBox(sl[1].start, sl[0].start, sl[1].stop - 1, sl[0].stop - 1)
        out.append(
            Component(
                label=i + 1,
                area=int(areas[i]),
                bbox=bbox,
                centroid=(float(xsum[i] / areas[i]), float(ysum[i] / areas[i])),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Edges


def _gaussian_kernel_5x5(sigma: float) -> np.ndarray:
    ax = np.arange(5, dtype=np.float64) - 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.float64)


def canny_edges(img: GrayImage, low: float = 50.0, high: float = 150.0) -> BinaryImage:
    """Four-stage Canny: Gaussian 5x5 (sigma 1.0), Sobel, 4-direction NMS,
    double-threshold hysteresis.

    Gradient magnitude is kept on the 8-bit scale (Sobel responses divided
    by 4). Weak edges (low <= mag < high) survive iff their 8-connected
    weak/strong chain reaches a strong edge (mag >= high). Image borders are
    replicated for smoothing and suppressed in NMS.
    """
    if not 0 <= low <= high:
        raise ValueError(f"need 0 <= low <= high, got low={low} high={high}")
    f = img.pixels.astype(np.float64)
    smoothed = ndimage.correlate(f, _gaussian_kernel_5x5(1.0), mode="nearest")
    gx = ndimage.correlate(smoothed, _SOBEL_X, mode="nearest") / 4.0
    gy = ndimage.correlate(smoothed, _SOBEL_Y, mode="nearest") / 4.0
    mag = np.hypot(gx, gy)

    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    # Quantize to 4 directions; compare each pixel with its two neighbors
    # along the gradient. pad -inf so border pixels are suppressed.
    padded = np.full((mag.shape[0] + 2, mag.shape[1] + 2), -np.inf)
    padded[1:-1, 1:-1] = mag

    def neighbor(dy: int, dx: int) -> np.ndarray:
        return padded[1 + dy : padded.shape[0] - 1 + dy, 1 + dx : padded.shape[1] - 1 + dx]

    d0 = (angle < 22.5) | (angle >= 157.5)   # gradient ~horizontal
    d45 = (angle >= 22.5) & (angle < 67.5)   # down-right
    d90 = (angle >= 67.5) & (angle < 112.5)  # ~vertical
    d135 = (angle >= 112.5) & (angle < 157.5)

    fwd = np.where(d0, neighbor(0, 1), 0.0)
    bwd = np.where(d0, neighbor(0, -1), 0.0)
    fwd = np.where(d45, neighbor(1, 1), fwd)
    bwd = np.where(d45, neighbor(-1, -1), bwd)
    fwd = np.where(d90, neighbor(1, 0), fwd)
    bwd = np.where(d90, neighbor(-1, 0), bwd)
    fwd = np.where(d135, neighbor(1, -1), fwd)
    bwd = np.where(d135, neighbor(-1, 1), bwd)

    keep = (mag >= fwd) & (mag >= bwd) & (mag > 0)
    keep[0, :] = keep[-1, :] = False
    keep[:, 0] = keep[:, -1] = False

    strong = keep & (mag >= high)
    weak = keep & (mag >= low)
    if not strong.any():
        return BinaryImage(np.zeros_like(keep))
    labels, count = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    strong_labels = np.unique(labels[strong])
    lut = np.zeros(count + 1, dtype=bool)
    lut[strong_labels] = True
    return BinaryImage(lut[labels])


# ---------------------------------------------------------------------------
# Geometry


def resize_bilinear(img: GrayImage, out_w: int, out_h: int) -> GrayImage:
    """Bilinear resample with pixel-center alignment.

    Resizing to the same size is the identity; output intensities stay
    within the input's [min, max] range.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output size must be >= 1, got {out_w}x{out_h}")
    in_h, in_w = img.pixels.shape
    xs = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0.0, in_w - 1.0)
    ys = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0.0, in_h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    fx = xs - x0
    fy = ys - y0
    f = img.pixels.astype(np.float64)
    top = f[np.ix_(y0, x0)] * (1 - fx) + f[np.ix_(y0, x1)] * fx
    bot = f[np.ix_(y1, x0)] * (1 - fx) + f[np.ix_(y1, x1)] * fx
    out = top * (1 - fy)[:, None] + bot * fy[:, None]
    return GrayImage(np.rint(out).astype(np.uint8))


RasterImage = Union[GrayImage, BinaryImage]


def crop(img: RasterImage, bbox: BBox) -> RasterImage:
    """Exact sub-rectangle copy; rejects out-of-bounds boxes."""
    h, w = img.pixels.shape
    if not (0 <= bbox.x_min <= bbox.x_max < w and 0 <= bbox.y_min <= bbox.y_max < h):
        raise ValueError(f"bbox {bbox} out of bounds for {w}x{h} image")
    window = img.pixels[bbox.y_min : bbox.y_max + 1, bbox.x_min : bbox.x_max + 1].copy()
    if isinstance(img, BinaryImage):
        return BinaryImage(window, otsu_threshold=img.otsu_threshold)
    return GrayImage(window)


def pad(img: GrayImage, top: int, bottom: int, left: int, right: int, fill: int = 255) -> GrayImage:
    """Pad with a constant intensity (default: white paper)."""
    if min(top, bottom, left, right) < 0:
        raise ValueError("pad amounts must be >= 0")
    out = np.pad(img.pixels, ((top, bottom), (left, right)), constant_values=fill)
    return GrayImage(out)
