"""Evaluation reports: the versioned metrics JSON and the results-table
renderer. Any tool that writes this schema (the classical baseline or an
external trainer) produces files the renderer can display side by side."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Union

from inkline.augmentation import TagKind
from inkline.errors import MetricsError

METRICS_VERSION = 1

AUG_MODES = ("none", "all", "thickness-only", "noise-only", "stretch-only", "mixed")

_REQUIRED_KEYS = (
    "metrics_version",
    "model_name",
    "augmentation_mode",
    "train_acc",
    "val_acc",
    "test_acc",
    "writer_count",
    "sample_counts",
    "cmc",
)
_OPTIONAL_KEYS = ("lr_trace", "loss_trace", "config", "notes")
_SPLIT_KEYS = ("train", "val", "test")


@dataclass(frozen=True)
class CmcCurve:
    """rates[k-1] = fraction of queries whose truth is in the top k."""

    rates: tuple[float, ...]

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        object.__setattr__(self, "rates", rates)
        if not rates:
            raise ValueError("CMC curve must have at least one rank")
        for r in rates:
            if not 0.0 <= r <= 1.0 + 1e-9:
                raise ValueError(f"CMC rate out of range: {r}")
        for a, b in zip(rates, rates[1:]):
            if b < a - 1e-9:
                raise ValueError("CMC curve must be nondecreasing")
        if abs(rates[-1] - 1.0) > 1e-9:
            raise ValueError(f"CMC must reach 1.0 at the last rank, got {rates[-1]}")

    @property
    def top1(self) -> float:
        return self.rates[0]


@dataclass(frozen=True)
class EvalReport:
    """One results-table row plus the CMC curve behind its test accuracy."""

    model_name: str
    augmentation_mode: str
    train_acc: float
    val_acc: float
    test_acc: float
    writer_count: int
    sample_counts: tuple[int, int, int]  # (train, val, test)
    cmc: CmcCurve

    def __post_init__(self):
        if self.augmentation_mode not in AUG_MODES:
            raise ValueError(
                f"augmentation_mode must be one of {AUG_MODES}, got {self.augmentation_mode!r}"
            )
        for name in ("train_acc", "val_acc", "test_acc"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {value}")
        if self.writer_count < 1:
            raise ValueError(f"writer_count must be >= 1, got {self.writer_count}")
        if len(self.cmc.rates) != self.writer_count:
            raise ValueError(
                f"CMC has {len(self.cmc.rates)} ranks but writer_count is {self.writer_count}"
            )
        if len(self.sample_counts) != 3 or any(c < 0 for c in self.sample_counts):
            raise ValueError(f"sample_counts must be 3 nonnegative counts, got {self.sample_counts}")
        object.__setattr__(self, "sample_counts", tuple(int(c) for c in self.sample_counts))


def mode_from_tags(kinds: set) -> str:
    """Infer the augmentation mode of a dataset from the tag kinds present."""
    augmented = {k for k in kinds if k is not TagKind.ORIGINAL}
    if not augmented:
        return "none"
    if augmented == {TagKind.THINNED, TagKind.NOISED, TagKind.STRETCHED}:
        return "all"
    single = {
        frozenset([TagKind.THINNED]): "thickness-only",
        frozenset([TagKind.NOISED]): "noise-only",
        frozenset([TagKind.STRETCHED]): "stretch-only",
    }
    return single.get(frozenset(augmented), "mixed")


# ---------------------------------------------------------------------------
# File model


def report_to_dict(report: EvalReport) -> dict:
    return {
        "metrics_version": METRICS_VERSION,
        "model_name": report.model_name,
        "augmentation_mode": report.augmentation_mode,
        "train_acc": report.train_acc,
        "val_acc": report.val_acc,
        "test_acc": report.test_acc,
        "writer_count": report.writer_count,
        "sample_counts": {
            "train": report.sample_counts[0],
            "val": report.sample_counts[1],
            "test": report.sample_counts[2],
        },
        "cmc": list(report.cmc.rates),
    }


def report_from_dict(data: Mapping) -> EvalReport:
    validate_metrics(data)
    counts = data["sample_counts"]
    return EvalReport(
        model_name=data["model_name"],
        augmentation_mode=data["augmentation_mode"],
        train_acc=float(data["train_acc"]),
        val_acc=float(data["val_acc"]),
        test_acc=float(data["test_acc"]),
        writer_count=int(data["writer_count"]),
        sample_counts=(counts["train"], counts["val"], counts["test"]),
        cmc=CmcCurve(tuple(data["cmc"])),
    )


def _require_number(data: Mapping, key: str, low: float, high: float):
    value = data.get(key)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise MetricsError(f"{key} must be a number, got {value!r}")
    if not low <= value <= high:
        raise MetricsError(f"{key} must be in [{low},{high}], got {value}")


def validate_metrics(data: Mapping):
    """Check a parsed metrics document against the schema; raise MetricsError."""
    if not isinstance(data, Mapping):
        raise MetricsError("metrics document must be a JSON object")
    missing = [k for k in _REQUIRED_KEYS if k not in data]
    if missing:
        raise MetricsError(f"missing required key {missing[0]!r}")
    unknown = [k for k in data if k not in _REQUIRED_KEYS + _OPTIONAL_KEYS]
    if unknown:
        raise MetricsError(f"unknown key {unknown[0]!r}")
    if data["metrics_version"] != METRICS_VERSION:
        raise MetricsError(
            f"unsupported metrics_version {data['metrics_version']!r} "
            f"(expected {METRICS_VERSION})"
        )
    if not isinstance(data["model_name"], str) or not data["model_name"]:
        raise MetricsError("model_name must be a nonempty string")
    if data["augmentation_mode"] not in AUG_MODES:
        raise MetricsError(
            f"augmentation_mode must be one of {list(AUG_MODES)}, "
            f"got {data['augmentation_mode']!r}"
        )
    for key in ("train_acc", "val_acc", "test_acc"):
        _require_number(data, key, 0.0, 1.0)
    if not isinstance(data["writer_count"], int) or data["writer_count"] < 1:
        raise MetricsError(f"writer_count must be a positive integer, got {data['writer_count']!r}")
    counts = data["sample_counts"]
    if not isinstance(counts, Mapping) or set(counts) != set(_SPLIT_KEYS):
        raise MetricsError(f"sample_counts must have exactly keys {list(_SPLIT_KEYS)}")
    for key in _SPLIT_KEYS:
        if not isinstance(counts[key], int) or counts[key] < 0:
            raise MetricsError(f"sample_counts.{key} must be a nonnegative integer")
    cmc = data["cmc"]
    if not isinstance(cmc, list) or not cmc:
        raise MetricsError("cmc must be a nonempty array")
    try:
        curve = CmcCurve(tuple(float(r) for r in cmc))
    except (TypeError, ValueError) as exc:
        raise MetricsError(f"invalid cmc: {exc}") from None
    if len(curve.rates) != data["writer_count"]:
        raise MetricsError(
            f"cmc has {len(curve.rates)} ranks but writer_count is {data['writer_count']}"
        )
    for key in ("lr_trace", "loss_trace"):
        if key in data:
            trace = data[key]
            if not isinstance(trace, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in trace
            ):
                raise MetricsError(f"{key} must be an array of numbers")
    if "config" in data and not isinstance(data["config"], Mapping):
        raise MetricsError("config must be an object")
    if "notes" in data and not isinstance(data["notes"], str):
        raise MetricsError("notes must be a string")


def write_metrics(report_or_dict: Union[EvalReport, Mapping], path: Union[str, Path]):
    data = (
        report_to_dict(report_or_dict)
        if isinstance(report_or_dict, EvalReport)
        else dict(report_or_dict)
    )
    validate_metrics(data)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def read_metrics(path: Union[str, Path]) -> dict:
    path = Path(path)
    if not path.is_file():
        raise MetricsError(f"metrics file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MetricsError(f"{path}: not valid JSON ({exc})") from None
    validate_metrics(data)
    return data


# ---------------------------------------------------------------------------
# Rendering


_TABLE_HEADER = f"{'Model':<24}{'Train Acc':>11}{'Val Acc':>11}{'Test Acc':>11}"


def _block_title(mode: str) -> str:
    return "Without Augmentation" if mode == "none" else f"With Augmentation ({mode})"


def render_table(data: Mapping) -> str:
    """One block: augmentation-mode title, column header, one model row."""
    row = (
        f"{data['model_name']:<24}"
        f"{data['train_acc']:>11.4f}"
        f"{data['val_acc']:>11.4f}"
        f"{data['test_acc']:>11.4f}"
    )
    return "\n".join([_block_title(data["augmentation_mode"]), _TABLE_HEADER, row])


def render_compare(first: Mapping, second: Mapping) -> str:
    """Two blocks, one per metrics file (the no-aug vs all-aug layout)."""
    return render_table(first) + "\n\n" + render_table(second)
