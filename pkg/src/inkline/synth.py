"""Synthetic handwriting-page generator.

Desk-scale stand-in for licensed handwriting corpora: renders pseudo-text
lines as connected polyline "glyphs" with per-writer style (stroke
thickness, slant, baseline wobble, glyph spacing, private glyph alphabet)
and returns exact ground truth, so segmentation and identification tests
have an oracle. Pages are byte-deterministic for a fixed style.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from inkline.imaging import BBox, BinaryImage, GrayImage, StructuringElement, dilate

_MARGIN = 40
_MIN_PITCH = 24.0
_GLYPHS_PER_WRITER = 12

# dilation by Rect 15x5 grows a blob 7 px horizontally and 2 px vertically;
# specks must stay clear of twice that so they never merge with ink
_SPECK_CLEAR_X = 16
_SPECK_CLEAR_Y = 6


@dataclass(frozen=True)
class SynthStyle:
    """Per-writer rendering parameters."""

    writer_id: str
    stroke_thickness: int  # stroke diameter, px
    slant: float  # degrees, positive = leaning right
    baseline_wobble: float  # px amplitude
    glyph_spacing: int  # px between glyphs
    seed: int

    def __post_init__(self):
        if self.stroke_thickness < 1:
            raise ValueError(f"stroke_thickness must be >= 1, got {self.stroke_thickness}")
        if self.baseline_wobble < 0 or self.glyph_spacing < 0:
            raise ValueError("baseline_wobble and glyph_spacing must be >= 0")


class PageTruth(NamedTuple):
    """Exact ground truth for one synthesized page."""

    line_bboxes: tuple[BBox, ...]
    ink_mask: np.ndarray  # bool (h, w), True where line ink was stamped
    specks: tuple[tuple[int, int], ...]  # (x, y) of injected specks


def make_style(writer_index: int, seed: int = 0) -> SynthStyle:
    """Deterministic, pairwise-distinct style for the given writer index."""
    if writer_index < 0:
        raise ValueError(f"writer_index must be >= 0, got {writer_index}")
    slant_slot = (writer_index * 3) % 10  # permutation of 0..9
    return SynthStyle(
        writer_id=f"w{writer_index:02d}",
        stroke_thickness=2 + writer_index % 5,
        slant=(slant_slot - 4.5) * 4.4 + (writer_index // 10) * 1.3,
        baseline_wobble=1.0 + (writer_index % 4) * 2.0,
        glyph_spacing=5 + ((writer_index * 7) % 5) * 3,
        seed=seed,
    )


def _glyph_alphabet(writer_id: str) -> list[np.ndarray]:
    """The writer's private glyph shapes, stable across pages and seeds.

    Each glyph is a polyline of unit-box points ordered right-to-left.
    """
    digest = hashlib.sha256(writer_id.encode("utf-8")).digest()
    rng = np.random.default_rng(np.frombuffer(digest[:16], dtype=np.uint64))
    glyphs = []
    for _ in range(_GLYPHS_PER_WRITER):
        n = int(rng.integers(4, 9))
        xs = np.sort(rng.random(n))[::-1]
        ys = rng.random(n) * rng.uniform(0.55, 1.0)
        glyphs.append(np.stack([xs, ys], axis=1))
    return glyphs


def _sample_polyline(points: np.ndarray, step: float = 0.4) -> np.ndarray:
    """Densify a polyline to points at most `step` apart."""
    pieces = []
    for a, b in zip(points[:-1], points[1:]):
        dist = float(np.hypot(*(b - a)))
        n = max(2, int(math.ceil(dist / step)) + 1)
        t = np.linspace(0.0, 1.0, n)[:, None]
        pieces.append(a + t * (b - a))
    return np.concatenate(pieces) if pieces else points


def _disk_offsets(diameter: int) -> np.ndarray:
    r = max(1, diameter) / 2.0
    span = int(math.ceil(r))
    dy, dx = np.mgrid[-span : span + 1, -span : span + 1]
    keep = dy * dy + dx * dx <= r * r
    return np.stack([dy[keep], dx[keep]], axis=1)


def synthesize_page(
    style: SynthStyle,
    lines: int,
    width: int = 704,
    height: int = 640,
    specks: int = 0,
) -> tuple[GrayImage, PageTruth]:
    """Render one page of pseudo-text and return it with its ground truth.

    Lines run right-to-left. Specks (1 to 2 px dark dots) are placed far
    enough from ink and from each other that they stay separate connected
    components even after the segmentation stage's default dilation.
    """
    if lines < 0 or specks < 0:
        raise ValueError("lines and specks must be >= 0")
    if lines > 0:
        pitch = (height - 2 * _MARGIN) / lines
        if pitch < _MIN_PITCH or width < 2 * _MARGIN + 48:
            raise ValueError(
                f"canvas {width}x{height} too small for {lines} lines"
            )
    canvas = np.full((height, width), 255, dtype=np.uint8)
    ink = np.zeros((height, width), dtype=bool)
    rng = np.random.default_rng(style.seed)
    glyphs = _glyph_alphabet(style.writer_id)
    slant_t = math.tan(math.radians(style.slant))
    offsets = _disk_offsets(style.stroke_thickness)

    line_bboxes = []
    for li in range(lines):
        glyph_h = min(64.0, pitch * 0.55)
        glyph_w = glyph_h * 0.75
        base_y = _MARGIN + pitch * li + pitch * 0.7
        phase = float(rng.uniform(0, 2 * math.pi))
        x_cursor = float(width - _MARGIN)
        paths = []
        prev_end = None
        while x_cursor - glyph_w >= _MARGIN:
            pts = glyphs[int(rng.integers(len(glyphs)))].copy()
            pts[:, 0] = x_cursor - glyph_w + pts[:, 0] * glyph_w
            pts[:, 1] = base_y - pts[:, 1] * glyph_h
            pts[:, 1] += style.baseline_wobble * np.sin(pts[:, 0] / 90.0 + phase)
            pts[:, 1] += rng.normal(0.0, 0.3, len(pts))
            pts[:, 0] += (base_y - pts[:, 1]) * slant_t
            if prev_end is not None:
                paths.append(_sample_polyline(np.stack([prev_end, pts[0]])))
            paths.append(_sample_polyline(pts))
            prev_end = pts[-1]
            x_cursor -= glyph_w + style.glyph_spacing
        if not paths:
            continue
        centers = np.concatenate(paths)
        stamps = np.rint(centers[:, ::-1]).astype(np.int64)  # -> (y, x)
        stamps = (stamps[:, None, :] + offsets[None, :, :]).reshape(-1, 2)
        inside = (
            (stamps[:, 0] >= 0)
            & (stamps[:, 0] < height)
            & (stamps[:, 1] >= 0)
            & (stamps[:, 1] < width)
        )
        stamps = stamps[inside]
        shade = rng.integers(15, 70, len(stamps)).astype(np.uint8)
        canvas[stamps[:, 0], stamps[:, 1]] = shade
        ink[stamps[:, 0], stamps[:, 1]] = True
        line_bboxes.append(
            BBox(
                x_min=int(stamps[:, 1].min()),
                y_min=int(stamps[:, 0].min()),
                x_max=int(stamps[:, 1].max()),
                y_max=int(stamps[:, 0].max()),
            )
        )

    speck_list = []
    if specks > 0:
        clear_se = StructuringElement.rect(2 * _SPECK_CLEAR_X - 1, 2 * _SPECK_CLEAR_Y - 1)
        allowed = ~dilate(BinaryImage(ink), clear_se).pixels
        allowed[:2, :] = allowed[-2:, :] = False
        allowed[:, :2] = allowed[:, -3:] = False
        for _ in range(specks):
            open_slots = np.flatnonzero(allowed)
            if open_slots.size == 0:
                raise ValueError("canvas too crowded to place all specks")
            flat = int(open_slots[rng.integers(open_slots.size)])
            y, x = divmod(flat, width)
            canvas[y, x] = 0
            if rng.integers(2):  # half the specks are 2 px wide
                canvas[y, x + 1] = 0
            speck_list.append((x, y))
            y0, y1 = max(0, y - _SPECK_CLEAR_Y), y + _SPECK_CLEAR_Y + 1
            x0, x1 = max(0, x - _SPECK_CLEAR_X), x + _SPECK_CLEAR_X + 2
            allowed[y0:y1, x0:x1] = False

    ink.setflags(write=False)
    truth = PageTruth(
        line_bboxes=tuple(line_bboxes),
        ink_mask=ink,
        specks=tuple(speck_list),
    )
    return GrayImage(canvas), truth


def page_seed(corpus_seed: int, writer_index: int, page_index: int) -> int:
    """Stable per-page seed, independent of generation order."""
    return int(
        np.random.SeedSequence([corpus_seed, writer_index, page_index]).generate_state(1)[0]
    )


def page_style(base: SynthStyle, corpus_seed: int, writer_index: int, page_index: int) -> SynthStyle:
    return replace(base, seed=page_seed(corpus_seed, writer_index, page_index))
