"""Dataset manifests: ingestion from directory trees, per-writer stratified
splitting, and the line-delimited manifest file format.

The manifest file is the contract between the pipeline and any trainer:
UTF-8, tab-separated, a versioned header line, one record per line.

    #inkline-manifest v1<TAB>seed=<int><TAB>config=<fingerprint>
    sample_id<TAB>writer_id<TAB>image_path<TAB>split<TAB>augmentation<TAB>source_page<TAB>line_index
    p03/page_007#L2<TAB>w03<TAB>p03/page_007_L2.png<TAB>train<TAB>original<TAB>page_007<TAB>2

image_path is relative to the manifest's directory, posix separators.
line_index -1 marks a page-level record (not yet segmented into lines).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np

from inkline.augmentation import ORIGINAL_TAG, AugmentationTag, TagKind
from inkline.errors import (
    DuplicateSampleIdError,
    IngestError,
    ManifestFormatError,
    SplitViolationError,
)
from inkline import image_io

MANIFEST_MAGIC = "#inkline-manifest"
MANIFEST_VERSION = "v1"
COLUMNS = (
    "sample_id",
    "writer_id",
    "image_path",
    "split",
    "augmentation",
    "source_page",
    "line_index",
)
_IMAGE_SUFFIXES = (".png", ".pgm", ".ppm")


class Split(Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"
    UNASSIGNED = "unassigned"


class Layout(Enum):
    """How ingest derives writer labels from a directory tree."""

    WRITER_PER_DIR = "writer-per-dir"  # root/<writer_id>/*.png
    FILENAME_ENCODED = "filename-encoded"  # <writer_id>_<page>_<line>.png


@dataclass(frozen=True)
class SampleRecord:
    """One image with its writer label, split, and provenance."""

    sample_id: str
    writer_id: str
    image_path: str
    split: Split = Split.UNASSIGNED
    augmentation: AugmentationTag = ORIGINAL_TAG
    source_page: str = ""
    line_index: int = -1

    def __post_init__(self):
        for name in ("sample_id", "writer_id", "image_path", "source_page"):
            value = getattr(self, name)
            if "\t" in value or "\n" in value:
                raise ValueError(f"{name} must not contain tabs or newlines: {value!r}")
        if not self.sample_id or not self.writer_id or not self.image_path:
            raise ValueError("sample_id, writer_id and image_path must be nonempty")
        if self.line_index < -1:
            raise ValueError(f"line_index must be >= -1, got {self.line_index}")

    @property
    def is_original(self) -> bool:
        return self.augmentation.kind is TagKind.ORIGINAL

    @property
    def parent_key(self) -> tuple[str, str, int]:
        """Identity linking augmented records to their Original parent."""
        return (self.writer_id, self.source_page, self.line_index)


@dataclass(frozen=True)
class DatasetManifest:
    """Immutable collection of records plus provenance of how they were made.

    Construction validates integrity: unique sample ids, every augmented
    record has an Original parent, and children share their parent's split.
    """

    records: tuple[SampleRecord, ...] = ()
    seed: int = 0
    config_fingerprint: str = "-"

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen: set[str] = set()
        for record in self.records:
            if record.sample_id in seen:
                raise DuplicateSampleIdError(record.sample_id)
            seen.add(record.sample_id)
        parents = {r.parent_key: r for r in self.records if r.is_original}
        for record in self.records:
            if record.is_original:
                continue
            parent = parents.get(record.parent_key)
            if parent is None:
                raise SplitViolationError(
                    f"augmented record {record.sample_id!r} has no Original parent "
                    f"for key {record.parent_key}"
                )
            if parent.split is not record.split:
                raise SplitViolationError(
                    f"augmented record {record.sample_id!r} is in split "
                    f"{record.split.value!r} but its parent {parent.sample_id!r} "
                    f"is in {parent.split.value!r}"
                )

    @property
    def writers(self) -> tuple[str, ...]:
        """Deduplicated writer labels, sorted."""
        return tuple(sorted({r.writer_id for r in self.records}))

    def by_split(self, split: Split) -> tuple[SampleRecord, ...]:
        return tuple(r for r in self.records if r.split is split)

    def require_complete_split(self):
        """Raise unless every record is assigned and every writer appears in
        train, val and test (closed-set identification needs all three)."""
        unassigned = [r.sample_id for r in self.records if r.split is Split.UNASSIGNED]
        if unassigned:
            raise SplitViolationError(
                f"{len(unassigned)} records are unassigned (first: {unassigned[0]!r})"
            )
        presence: dict[str, set[Split]] = {}
        for record in self.records:
            presence.setdefault(record.writer_id, set()).add(record.split)
        for writer in sorted(presence):
            missing = {Split.TRAIN, Split.VAL, Split.TEST} - presence[writer]
            if missing:
                names = ", ".join(sorted(s.value for s in missing))
                raise SplitViolationError(f"writer {writer!r} has no samples in: {names}")


class IngestResult(NamedTuple):
    manifest: DatasetManifest
    skipped: tuple[tuple[str, str], ...]  # (path, reason)


def _parse_encoded_name(stem: str) -> tuple[str, str, int]:
    """Split '<writer>_<page>_<line>' from the right; the writer label may
    itself contain underscores."""
    head, _, line_token = stem.rpartition("_")
    writer, _, page = head.rpartition("_")
    if not writer or not page or not line_token.isdigit():
        raise ValueError(f"filename {stem!r} does not encode <writer>_<page>_<line>")
    return writer, page, int(line_token)


def ingest(root: Union[str, Path], layout: Layout = Layout.WRITER_PER_DIR) -> IngestResult:
    """Build an all-Unassigned manifest of Original records from a tree.

    Files are visited in lexicographic path order; unreadable or misnamed
    files are skipped and reported. Zero ingested images is an error.
    """
    root = Path(root)
    if not root.is_dir():
        raise IngestError(f"ingest root is not a directory: {root}")
    paths = sorted(
        p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in _IMAGE_SUFFIXES
    )
    records = []
    skipped = []
    for path in paths:
        rel = path.relative_to(root).as_posix()
        try:
            image_io.read_gray(path)  # decode check; pixels are re-read downstream
        except Exception as exc:  # noqa: BLE001 - every decode failure is a skip
            skipped.append((rel, str(exc)))
            continue
        if layout is Layout.WRITER_PER_DIR:
            parts = path.relative_to(root).parts
            if len(parts) < 2:
                skipped.append((rel, "file not inside a writer directory"))
                continue
            writer, page, line_index = parts[0], path.stem, -1
        else:
            try:
                writer, page, line_index = _parse_encoded_name(path.stem)
            except ValueError as exc:
                skipped.append((rel, str(exc)))
                continue
        records.append(
            SampleRecord(
                sample_id=rel.rsplit(".", 1)[0],
                writer_id=writer,
                image_path=rel,
                source_page=page,
                line_index=line_index,
            )
        )
    if not records:
        raise IngestError(f"no samples found under {root}")
    return IngestResult(DatasetManifest(records=tuple(records)), tuple(skipped))


# ---------------------------------------------------------------------------
# Splitting


_DONOR_ORDER = (Split.TRAIN, Split.TEST, Split.VAL)  # tie-break for adjustment


def split(
    manifest: DatasetManifest,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> DatasetManifest:
    """Per-writer stratified split of Original records; children inherit.

    Each writer's originals are shuffled with a writer-specific stream and
    dealt floor(n*train) / floor(n*val) / remainder, then adjusted so every
    split holds at least one sample (one moves from the largest bucket).
    """
    if any(r <= 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ValueError(f"ratios must be positive and sum to 1, got {ratios}")
    writers = manifest.writers
    by_writer: dict[str, list[SampleRecord]] = {w: [] for w in writers}
    for record in manifest.records:
        if record.is_original:
            by_writer[record.writer_id].append(record)

    assignment: dict[str, Split] = {}
    for writer_index, writer in enumerate(writers):
        originals = by_writer[writer]
        n = len(originals)
        if n < 3:
            raise SplitViolationError(
                f"writer {writer!r} has {n} original samples; "
                f"need >= 3 for presence in every split"
            )
        rng = np.random.default_rng([seed, writer_index])
        order = [originals[i] for i in rng.permutation(n)]
        # 1e-9 guard so 10 * 0.1 style products floor to their exact value
        n_train = int(math.floor(n * ratios[0] + 1e-9))
        n_val = int(math.floor(n * ratios[1] + 1e-9))
        buckets = {
            Split.TRAIN: order[:n_train],
            Split.VAL: order[n_train : n_train + n_val],
            Split.TEST: order[n_train + n_val :],
        }
        while any(not bucket for bucket in buckets.values()):
            empty = next(s for s in _DONOR_ORDER if not buckets[s])
            donor = max(_DONOR_ORDER, key=lambda s: len(buckets[s]))
            buckets[empty].append(buckets[donor].pop())
        for split_value, bucket in buckets.items():
            for record in bucket:
                assignment[record.sample_id] = split_value

    parents = {r.parent_key: r for r in manifest.records if r.is_original}
    new_records = []
    for record in manifest.records:
        if record.is_original:
            new_records.append(replace(record, split=assignment[record.sample_id]))
        else:
            parent = parents[record.parent_key]
            new_records.append(replace(record, split=assignment[parent.sample_id]))
    return replace(manifest, records=tuple(new_records), seed=seed)


def split_counts(manifest: DatasetManifest) -> dict[str, dict[Split, int]]:
    """Per-writer record counts by split (test helper and CLI summary)."""
    counts: dict[str, dict[Split, int]] = {}
    for record in manifest.records:
        counts.setdefault(record.writer_id, {s: 0 for s in Split})[record.split] += 1
    return counts


# ---------------------------------------------------------------------------
# File format


def write_manifest(manifest: DatasetManifest, path: Union[str, Path]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"{MANIFEST_MAGIC} {MANIFEST_VERSION}\tseed={manifest.seed}"
        f"\tconfig={manifest.config_fingerprint}",
        "\t".join(COLUMNS),
    ]
    for r in manifest.records:
        lines.append(
            "\t".join(
                (
                    r.sample_id,
                    r.writer_id,
                    r.image_path,
                    r.split.value,
                    r.augmentation.encode(),
                    r.source_page,
                    str(r.line_index),
                )
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_header(line: str) -> tuple[int, str]:
    fields = line.rstrip("\n").split("\t")
    magic = fields[0].split(" ")
    if len(magic) != 2 or magic[0] != MANIFEST_MAGIC:
        raise ManifestFormatError(1, f"not a manifest file (expected {MANIFEST_MAGIC!r})")
    if magic[1] != MANIFEST_VERSION:
        raise ManifestFormatError(1, f"unsupported manifest version {magic[1]!r}")
    if len(fields) != 3 or not fields[1].startswith("seed=") or not fields[2].startswith("config="):
        raise ManifestFormatError(1, "header must be '#inkline-manifest v1<TAB>seed=N<TAB>config=F'")
    try:
        seed = int(fields[1][5:])
    except ValueError:
        raise ManifestFormatError(1, f"seed is not an integer: {fields[1]!r}") from None
    return seed, fields[2][7:]


def read_manifest(path: Union[str, Path]) -> DatasetManifest:
    """Parse and validate a manifest file; errors carry 1-based line numbers."""
    path = Path(path)
    if not path.is_file():
        raise ManifestFormatError(0, f"manifest file not found: {path}")
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) < 2:
        raise ManifestFormatError(1, "manifest must have a header and a column line")
    seed, fingerprint = _parse_header(lines[0])
    columns = tuple(lines[1].split("\t"))
    if columns != COLUMNS:
        unknown = [c for c in columns if c not in COLUMNS]
        if unknown:
            raise ManifestFormatError(2, f"unknown column {unknown[0]!r}")
        raise ManifestFormatError(2, f"columns must be exactly {list(COLUMNS)}, got {list(columns)}")

    records = []
    seen: set[str] = set()
    for line_no, line in enumerate(lines[2:], start=3):
        if line == "":
            raise ManifestFormatError(line_no, "blank line inside manifest body")
        fields = line.split("\t")
        if len(fields) != len(COLUMNS):
            raise ManifestFormatError(
                line_no, f"expected {len(COLUMNS)} fields, got {len(fields)}"
            )
        sample_id, writer_id, image_path, split_token, tag_token, source_page, line_token = fields
        if sample_id in seen:
            raise DuplicateSampleIdError(sample_id, line_no)
        seen.add(sample_id)
        try:
            split_value = Split(split_token)
        except ValueError:
            raise ManifestFormatError(line_no, f"unknown split {split_token!r}") from None
        try:
            tag = AugmentationTag.parse(tag_token)
        except ValueError as exc:
            raise ManifestFormatError(line_no, str(exc)) from None
        try:
            line_index = int(line_token)
        except ValueError:
            raise ManifestFormatError(line_no, f"line_index is not an integer: {line_token!r}") from None
        try:
            records.append(
                SampleRecord(
                    sample_id=sample_id,
                    writer_id=writer_id,
                    image_path=image_path,
                    split=split_value,
                    augmentation=tag,
                    source_page=source_page,
                    line_index=line_index,
                )
            )
        except ValueError as exc:
            raise ManifestFormatError(line_no, str(exc)) from None
    return DatasetManifest(records=tuple(records), seed=seed, config_fingerprint=fingerprint)
