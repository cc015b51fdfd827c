"""Page-to-line segmentation: binarize, dilate, group regions into text
lines, drop specks, extract normalized line ROIs.

The ROI content is cropped from the original grayscale page. Dilation only
aids detection; feeding thickened strokes downstream would destroy the
stroke-thickness cue the augmentation stage manipulates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Union

import numpy as np

from inkline import config as cfgmod
from inkline.errors import ConfigError
from inkline.imaging import (
    BBox,
    Component,
    GrayImage,
    StructuringElement,
    binarize,
    canny_edges,
    crop,
    dilate,
    label_components,
    pad,
    resize_bilinear,
)


class RegionSource(Enum):
    """Which binary map gets labeled into candidate regions."""

    COMPONENTS = "components"  # thresholded ink, dilated
    CANNY_REGIONS = "canny"  # edge map, dilated to close regions


class AreaMode(Enum):
    ABSOLUTE = "absolute"
    RELATIVE = "relative"  # fraction of the median component area


@dataclass(frozen=True)
class AreaThreshold:
    """Speck filter: keep components with area >= the effective threshold."""

    mode: AreaMode
    value: float

    def __post_init__(self):
        if self.value < 0:
            raise ConfigError(f"area threshold must be >= 0, got {self.value}")

    def token(self) -> str:
        return f"{self.mode.value}:{cfgmod.format_value(float(self.value))}"

    @classmethod
    def from_token(cls, token: str, line_no: int = 0) -> "AreaThreshold":
        mode_token, _, value_token = token.partition(":")
        try:
            mode = AreaMode(mode_token)
            value = float(value_token)
        except ValueError:
            raise ConfigError(
                f"line {line_no}: min_component_area expects 'absolute:N' or "
                f"'relative:F', got {token!r}"
            ) from None
        return cls(mode, value)


@dataclass(frozen=True)
class PipelineConfig:
    """All tunables of the page-to-ROI pipeline."""

    dilation_se: StructuringElement = field(
        default_factory=lambda: StructuringElement.rect(15, 5)  # wide: bridges intra-line gaps
    )
    min_component_area: AreaThreshold = AreaThreshold(AreaMode.RELATIVE, 0.05)
    line_overlap_threshold: float = 0.4
    target_size: int = 224
    pad_to_square: bool = True
    region_source: RegionSource = RegionSource.COMPONENTS
    canny_low: float = 50.0
    canny_high: float = 150.0

    def __post_init__(self):
        if self.target_size < 8:
            raise ConfigError(f"target_size must be >= 8, got {self.target_size}")
        if not 0.0 <= self.line_overlap_threshold <= 1.0:
            raise ConfigError(
                f"line_overlap_threshold must be in [0,1], got {self.line_overlap_threshold}"
            )
        if not 0.0 <= self.canny_low <= self.canny_high:
            raise ConfigError(
                f"canny thresholds must satisfy 0 <= low <= high, got "
                f"{self.canny_low}/{self.canny_high}"
            )

    # -- config file codec --

    _KEYS = (
        "dilation_se",
        "min_component_area",
        "line_overlap_threshold",
        "target_size",
        "pad_to_square",
        "region_source",
        "canny_low",
        "canny_high",
    )

    def to_section(self) -> dict:
        return {
            "dilation_se": self.dilation_se,
            "min_component_area": self.min_component_area.token(),
            "line_overlap_threshold": self.line_overlap_threshold,
            "target_size": self.target_size,
            "pad_to_square": self.pad_to_square,
            "region_source": self.region_source.value,
            "canny_low": self.canny_low,
            "canny_high": self.canny_high,
        }

    @classmethod
    def from_raw(cls, raw: cfgmod.RawConfig) -> "PipelineConfig":
        section = raw.get(cfgmod.SECTION_PIPELINE, {})
        cfgmod.reject_unknown(section, cls._KEYS, cfgmod.SECTION_PIPELINE)
        out = cls()
        for key, (value, line_no) in section.items():
            if key == "dilation_se":
                out = replace(out, dilation_se=cfgmod.parse_se(value, line_no, key))
            elif key == "min_component_area":
                out = replace(out, min_component_area=AreaThreshold.from_token(value, line_no))
            elif key == "line_overlap_threshold":
                out = replace(out, line_overlap_threshold=cfgmod.parse_float(value, line_no, key))
            elif key == "target_size":
                out = replace(out, target_size=cfgmod.parse_int(value, line_no, key))
            elif key == "pad_to_square":
                out = replace(out, pad_to_square=cfgmod.parse_bool(value, line_no, key))
            elif key == "region_source":
                try:
                    out = replace(out, region_source=RegionSource(value))
                except ValueError:
                    raise ConfigError(
                        f"line {line_no}: region_source must be one of "
                        f"{[m.value for m in RegionSource]}, got {value!r}"
                    ) from None
            elif key == "canny_low":
                out = replace(out, canny_low=cfgmod.parse_float(value, line_no, key))
            elif key == "canny_high":
                out = replace(out, canny_high=cfgmod.parse_float(value, line_no, key))
        return out


@dataclass(frozen=True)
class LineBand:
    """A cluster of components forming one text line.

    members holds component labels, right-to-left by x_max descending.
    """

    y_top: int
    y_bottom: int
    members: tuple[int, ...]
    bbox: BBox

    def __post_init__(self):
        if self.y_top > self.y_bottom:
            raise ValueError(f"band y_top {self.y_top} > y_bottom {self.y_bottom}")
        if not self.members:
            raise ValueError("band must have at least one member")


@dataclass(frozen=True)
class LineRoi:
    """One extracted text line, normalized to target_size squared."""

    image: GrayImage
    source_page: str
    line_index: int
    source_bbox: BBox


def _y_overlap_joins(a: Component, b: Component, threshold: float) -> bool:
    # join iff the ranges share >= threshold of the smaller y-extent
    # (and at least one row; adjacency alone never joins)
    top = max(a.bbox.y_min, b.bbox.y_min)
    bottom = min(a.bbox.y_max, b.bbox.y_max)
    overlap = bottom - top + 1
    smaller = min(a.bbox.height, b.bbox.height)
    return overlap >= 1 and overlap >= threshold * smaller


def cluster_lines(components: list[Component], cfg: PipelineConfig) -> list[LineBand]:
    """Group components into line bands by transitive y-range overlap.

    Two components join the same band iff their y-ranges overlap by at least
    cfg.line_overlap_threshold of the smaller extent, closed transitively.
    Bands come back ordered by ascending y_top; members right-to-left.
    """
    n = len(components)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if _y_overlap_joins(components[i], components[j], cfg.line_overlap_threshold):
                parent[find(i)] = find(j)

    groups: dict[int, list[Component]] = {}
    for i, comp in enumerate(components):
        groups.setdefault(find(i), []).append(comp)

    bands = []
    for group in groups.values():
        group.sort(key=lambda c: -c.bbox.x_max)
        bbox = group[0].bbox
        for comp in group[1:]:
            bbox = bbox.union(comp.bbox)
        bands.append(
            LineBand(
                y_top=bbox.y_min,
                y_bottom=bbox.y_max,
                members=tuple(c.label for c in group),
                bbox=bbox,
            )
        )
    bands.sort(key=lambda b: (b.y_top, b.bbox.x_min))
    return bands


def filter_small(components: list[Component], cfg: PipelineConfig) -> list[Component]:
    """Keep components with area >= threshold; the relative mode takes the
    threshold as a fraction of the median area of the input."""
    if not components:
        return []
    threshold = cfg.min_component_area.value
    if cfg.min_component_area.mode is AreaMode.RELATIVE:
        threshold *= float(np.median([c.area for c in components]))
    return [c for c in components if c.area >= threshold]


def normalize_roi(page: GrayImage, bbox: BBox, cfg: PipelineConfig) -> GrayImage:
    """Crop bbox from the page, optionally pad to square with white, resize."""
    roi = crop(page, bbox)
    if cfg.pad_to_square and roi.width != roi.height:
        side = max(roi.width, roi.height)
        extra_w, extra_h = side - roi.width, side - roi.height
        roi = pad(
            roi,
            top=extra_h // 2,
            bottom=extra_h - extra_h // 2,
            left=extra_w // 2,
            right=extra_w - extra_w // 2,
            fill=255,
        )
    return resize_bilinear(roi, cfg.target_size, cfg.target_size)


def segment_page(
    page: GrayImage,
    cfg: Union[PipelineConfig, None] = None,
    page_id: str = "",
) -> list[LineRoi]:
    """Extract normalized line ROIs from a page scan.

    Stages, in order: binarize; dilate; label regions (thresholded ink or
    canny edges per cfg.region_source) and cluster into bands; drop
    components failing the area filter; crop each surviving band's bbox from
    the ORIGINAL grayscale page, pad to square, resize. ROIs come back
    top-to-bottom; bands emptied by the filter are dropped. A blank page
    yields an empty list.
    """
    cfg = cfg or PipelineConfig()
    if cfg.region_source is RegionSource.CANNY_REGIONS:
        base = canny_edges(page, cfg.canny_low, cfg.canny_high)
    else:
        base = binarize(page)
    if base.foreground_count == 0:
        return []
    components = label_components(dilate(base, cfg.dilation_se))
    bands = cluster_lines(components, cfg)
    surviving = {c.label for c in filter_small(components, cfg)}
    by_label = {c.label: c for c in components}

    rois = []
    for band in bands:
        kept = [by_label[m] for m in band.members if m in surviving]
        if not kept:
            continue
        bbox = kept[0].bbox
        for comp in kept[1:]:
            bbox = bbox.union(comp.bbox)
        rois.append(
            LineRoi(
                image=normalize_roi(page, bbox, cfg),
                source_page=page_id,
                line_index=len(rois),
                source_bbox=bbox,
            )
        )
    return rois
