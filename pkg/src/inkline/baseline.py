"""Classical writer identification: uniform-LBP texture histograms ranked
by cosine similarity against per-writer centroids, plus the evaluation
harness that scores rankings into an EvalReport."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from inkline.dataset import DatasetManifest, Split
from inkline.errors import EvalError
from inkline.imaging import GrayImage, _freeze
from inkline.metrics import CmcCurve, EvalReport, mode_from_tags

N_BINS = 59  # 58 uniform patterns + 1 bin for everything else

# 8 neighbors as (dy, dx), starting east, counter-clockwise; bit i of the
# code is (neighbor_i >= center)
NEIGHBOR_OFFSETS = (
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
)


def _circular_transitions(code: int) -> int:
    bits = [(code >> i) & 1 for i in range(8)]
    return sum(bits[i] != bits[(i + 1) % 8] for i in range(8))


def _build_uniform_lut() -> np.ndarray:
    uniform = sorted(c for c in range(256) if _circular_transitions(c) <= 2)
    lut = np.full(256, N_BINS - 1, dtype=np.int64)
    for bin_index, code in enumerate(uniform):
        lut[code] = bin_index
    return lut


UNIFORM_LUT = _build_uniform_lut()


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """L1-normalized 59-bin histogram (or all-zero, flagged degenerate)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (N_BINS,):
            raise ValueError(f"feature vector must have {N_BINS} bins, got {values.shape}")
        if (values < 0).any():
            raise ValueError("feature vector must be nonnegative")
        total = values.sum()
        if total != 0.0 and abs(total - 1.0) > 1e-9:
            raise ValueError(f"feature vector must sum to 1 (or 0), got {total!r}")
        _freeze(self, "values", values)

    @property
    def is_zero(self) -> bool:
        return not self.values.any()


@dataclass(frozen=True)
class WriterTemplate:
    writer_id: str
    centroid: FeatureVector
    sample_count: int


@dataclass(frozen=True)
class Ranking:
    """All enrolled writers ordered best-first.

    degenerate marks a zero query vector: scores are uniform and the order
    falls back to writer_id.
    """

    entries: tuple[tuple[str, float], ...]
    degenerate: bool = False


def lbp_codes(pixels: np.ndarray) -> np.ndarray:
    """Code map over the interior (h-2, w-2) region."""
    center = pixels[1:-1, 1:-1]
    h, w = pixels.shape
    codes = np.zeros((h - 2, w - 2), dtype=np.uint8)
    for bit, (dy, dx) in enumerate(NEIGHBOR_OFFSETS):
        neighbor = pixels[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx]
        np.bitwise_or(codes, (neighbor >= center).astype(np.uint8) << bit, out=codes)
    return codes


def lbp_features(img: GrayImage) -> FeatureVector:
    """Uniform-LBP histogram of every interior pixel, L1-normalized."""
    if img.width < 3 or img.height < 3:
        raise ValueError(f"image must be at least 3x3 for LBP, got {img.width}x{img.height}")
    codes = lbp_codes(img.pixels)
    hist = np.bincount(UNIFORM_LUT[codes.ravel()], minlength=N_BINS).astype(np.float64)
    return FeatureVector(hist / hist.sum())


def enroll(
    samples: Iterable[tuple[str, FeatureVector]],
    writers: Optional[Sequence[str]] = None,
) -> list[WriterTemplate]:
    """One template per writer: the renormalized mean of its train vectors.

    When `writers` lists the expected gallery, a writer with no samples is
    an error naming the writer.
    """
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    for writer_id, feature in samples:
        if writer_id in sums:
            sums[writer_id] = sums[writer_id] + feature.values
            counts[writer_id] += 1
        else:
            sums[writer_id] = feature.values.copy()
            counts[writer_id] = 1
    if writers is not None:
        missing = sorted(set(writers) - set(sums))
        if missing:
            raise EvalError(f"no training samples for writer {missing[0]!r}")
    templates = []
    for writer_id in sorted(sums):
        mean = sums[writer_id] / counts[writer_id]
        total = mean.sum()
        centroid = FeatureVector(mean / total if total > 0 else mean)
        templates.append(
            WriterTemplate(writer_id=writer_id, centroid=centroid, sample_count=counts[writer_id])
        )
    return templates


def identify(query: FeatureVector, templates: Sequence[WriterTemplate]) -> Ranking:
    """Rank every template by cosine similarity, ties by writer_id."""
    if not templates:
        raise ValueError("cannot identify against an empty gallery")
    if query.is_zero:
        ordered = sorted(t.writer_id for t in templates)
        return Ranking(entries=tuple((w, 0.0) for w in ordered), degenerate=True)
    matrix = np.stack([t.centroid.values for t in templates])
    norms = np.linalg.norm(matrix, axis=1) * np.linalg.norm(query.values)
    scores = np.where(norms > 0, matrix @ query.values / np.where(norms > 0, norms, 1.0), 0.0)
    order = sorted(range(len(templates)), key=lambda i: (-scores[i], templates[i].writer_id))
    return Ranking(entries=tuple((templates[i].writer_id, float(scores[i])) for i in order))


def _top1_accuracy(records, predictions: Mapping[str, Ranking]) -> float:
    if not records:
        return 0.0
    hits = 0
    for record in records:
        ranking = predictions.get(record.sample_id)
        if ranking is None:
            raise EvalError(f"no prediction for sample {record.sample_id!r}")
        hits += ranking.entries[0][0] == record.writer_id
    return hits / len(records)


def evaluate(
    predictions: Mapping[str, Ranking],
    manifest: DatasetManifest,
    model_name: str = "lbp-centroid",
) -> EvalReport:
    """Score rankings: top-1 accuracy per split, CMC over the test split.

    Every sample in the manifest needs a ranking over the full writer
    gallery; a missing sample or short ranking is an error naming it.
    """
    writers = manifest.writers
    if not writers:
        raise EvalError("manifest has no records to evaluate")
    splits = {s: manifest.by_split(s) for s in (Split.TRAIN, Split.VAL, Split.TEST)}
    for records in splits.values():
        for record in records:
            ranking = predictions.get(record.sample_id)
            if ranking is None:
                raise EvalError(f"no prediction for sample {record.sample_id!r}")
            ranked = sorted(w for w, _ in ranking.entries)
            if ranked != list(writers):
                raise EvalError(
                    f"ranking for {record.sample_id!r} does not cover the gallery"
                )

    test_records = splits[Split.TEST]
    if not test_records:
        raise EvalError("test split is empty")
    k = len(writers)
    cumulative = np.zeros(k, dtype=np.float64)
    for record in test_records:
        entries = predictions[record.sample_id].entries
        position = next(i for i, (w, _) in enumerate(entries) if w == record.writer_id)
        cumulative[position:] += 1.0
    cmc = CmcCurve(tuple(cumulative / len(test_records)))

    return EvalReport(
        model_name=model_name,
        augmentation_mode=mode_from_tags({r.augmentation.kind for r in manifest.records}),
        train_acc=_top1_accuracy(splits[Split.TRAIN], predictions),
        val_acc=_top1_accuracy(splits[Split.VAL], predictions),
        test_acc=_top1_accuracy(splits[Split.TEST], predictions),
        writer_count=k,
        sample_counts=(
            len(splits[Split.TRAIN]),
            len(splits[Split.VAL]),
            len(splits[Split.TEST]),
        ),
        cmc=cmc,
    )
