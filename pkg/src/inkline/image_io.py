"""Image decode/encode: PNG and binary PGM (P5) in, PNG out."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageReadError
from .imaging import BinaryImage, GrayImage

_READABLE = {"PNG", "PPM"}  # Pillow reports P5 PGM as format "PPM"


def read_gray(path: str | Path) -> GrayImage:
    """Read a PNG or binary PGM file as 8-bit grayscale.

    Non-gray PNGs are converted to 8-bit gray on load; 16-bit inputs are
    rejected. Anything Pillow cannot decode raises ImageReadError.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.format not in _READABLE:
                raise ImageReadError(f"{path}: unsupported format {im.format!r} (PNG/PGM only)")
            if im.mode in ("I", "I;16", "I;16B", "F"):
                raise ImageReadError(f"{path}: only 8-bit images are supported (mode {im.mode})")
            if im.mode != "L":
                im = im.convert("L")
            arr = np.asarray(im, dtype=np.uint8)
    except ImageReadError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise ImageReadError(f"{path}: cannot decode image ({exc})") from exc
    if arr.ndim != 2 or arr.size == 0:
        raise ImageReadError(f"{path}: empty or non-2D image")
    return GrayImage(arr)


def write_png(img: GrayImage | BinaryImage, path: str | Path) -> None:
    """Write an image as 8-bit grayscale PNG; binary foreground becomes black ink."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(img, BinaryImage):
        arr = np.where(img.pixels, 0, 255).astype(np.uint8)
    else:
        arr = img.pixels
    Image.fromarray(arr, mode="L").save(path, format="PNG")
