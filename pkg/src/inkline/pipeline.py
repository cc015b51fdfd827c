"""Batch stage runners behind the CLI: synthesize a corpus, preprocess
pages to line ROIs, augment, split, train and score the baseline.

Every stage is manifest-in/manifest-out over local files, deterministic
under fixed seeds, and safe to parallelize per item (`jobs` bounds worker
threads; results are collected in submission order so the output never
depends on scheduling).
"""

from __future__ import annotations

import hashlib
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, NamedTuple, Optional, Sequence, Union

from inkline import image_io
from inkline.augmentation import TECHNIQUES, AugmentConfig, augment_all
from inkline.baseline import Ranking, enroll, evaluate, identify, lbp_features
from inkline.config import SECTION_AUGMENT, SECTION_PIPELINE, format_config
from inkline.dataset import (
    DatasetManifest,
    SampleRecord,
    Split,
    read_manifest,
    split as split_manifest,
    write_manifest,
)
from inkline.errors import ImageReadError, UserError
from inkline.imaging import BBox
from inkline.metrics import EvalReport
from inkline.segmentation import LineRoi, PipelineConfig, normalize_roi, segment_page
from inkline.synth import make_style, page_style, synthesize_page

Progress = Callable[[str], None]


def _quiet(_msg: str) -> None:
    pass


def stderr_progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def chain_fingerprint(previous: str, payload: str) -> str:
    """16-hex config fingerprint folding this stage's config into the chain."""
    digest = hashlib.sha256(f"{previous}\n{payload}".encode("utf-8")).hexdigest()
    return digest[:16]


def _ensure_out_dir(out_dir: Path, force: bool):
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise UserError(f"output directory {out_dir} is not empty (use --force to overwrite)")
    out_dir.mkdir(parents=True, exist_ok=True)


def _map_jobs(jobs: int, fn, items):
    """Run fn over items with bounded threads, yielding in submission order."""
    if jobs <= 1:
        for item in items:
            yield fn(item)
        return
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, item) for item in items]
        for future in futures:
            yield future.result()


# ---------------------------------------------------------------------------
# synth


def run_synth(
    out_dir: Union[str, Path],
    writers: int,
    pages_per_writer: int,
    lines_per_page: int,
    seed: int,
    specks: int = 0,
    force: bool = False,
    jobs: int = 1,
    progress: Progress = _quiet,
) -> Path:
    """Write a synthetic corpus tree plus its manifest; returns the manifest path."""
    if writers < 1:
        raise UserError(f"writers must be >= 1, got {writers}")
    if pages_per_writer < 1 or lines_per_page < 0:
        raise UserError("pages-per-writer must be >= 1 and lines-per-page >= 0")
    out_dir = Path(out_dir)
    _ensure_out_dir(out_dir, force)

    tasks = [
        (w, p)
        for w in range(writers)
        for p in range(pages_per_writer)
    ]

    def render(task):
        w, p = task
        style = page_style(make_style(w), seed, w, p)
        page, _truth = synthesize_page(style, lines=lines_per_page, specks=specks)
        rel = f"{style.writer_id}/page_{p:03d}.png"
        image_io.write_png(page, out_dir / rel)
        return SampleRecord(
            sample_id=rel.rsplit(".", 1)[0],
            writer_id=style.writer_id,
            image_path=rel,
            source_page=f"page_{p:03d}",
            line_index=-1,
        )

    records = []
    for i, record in enumerate(_map_jobs(jobs, render, tasks), start=1):
        records.append(record)
        if i % 50 == 0 or i == len(tasks):
            progress(f"synth: {i}/{len(tasks)} pages")
    fingerprint = chain_fingerprint(
        "", f"synth writers={writers} pages={pages_per_writer} "
        f"lines={lines_per_page} specks={specks} seed={seed}"
    )
    manifest = DatasetManifest(
        records=tuple(sorted(records, key=lambda r: r.sample_id)),
        seed=seed,
        config_fingerprint=fingerprint,
    )
    manifest_path = out_dir / "manifest.tsv"
    write_manifest(manifest, manifest_path)
    return manifest_path


# ---------------------------------------------------------------------------
# preprocess


class PreprocessSummary(NamedTuple):
    pages: int
    rois: int
    empty_pages: tuple[str, ...]  # sample_ids that yielded zero lines
    skipped: tuple[tuple[str, str], ...]  # (sample_id, reason)


def run_preprocess(
    manifest_path: Union[str, Path],
    out_dir: Union[str, Path],
    cfg: Optional[PipelineConfig] = None,
    no_segment: bool = False,
    jobs: int = 1,
    force: bool = False,
    progress: Progress = _quiet,
) -> tuple[Path, PreprocessSummary]:
    """Segment every page record into line-ROI records (or, with no_segment,
    normalize whole pages as single samples). Returns the new manifest path."""
    cfg = cfg or PipelineConfig()
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    out_dir = Path(out_dir)
    _ensure_out_dir(out_dir, force)
    src_root = manifest_path.parent

    def process(record: SampleRecord):
        try:
            page = image_io.read_gray(src_root / record.image_path)
        except ImageReadError as exc:
            return record, None, str(exc)
        if no_segment:
            bbox = BBox(0, 0, page.width - 1, page.height - 1)
            rois = [
                LineRoi(
                    image=normalize_roi(page, bbox, cfg),
                    source_page=record.source_page,
                    line_index=0,
                    source_bbox=bbox,
                )
            ]
        else:
            rois = segment_page(page, cfg, page_id=record.source_page)
        return record, rois, None

    new_records = []
    empty_pages = []
    skipped = []
    pages = 0
    for i, (record, rois, error) in enumerate(
        _map_jobs(jobs, process, manifest.records), start=1
    ):
        if error is not None:
            skipped.append((record.sample_id, error))
            continue
        pages += 1
        if not rois:
            empty_pages.append(record.sample_id)
        for roi in rois:
            rel = f"{record.writer_id}/{record.source_page}_L{roi.line_index}.png"
            image_io.write_png(roi.image, out_dir / rel)
            new_records.append(
                SampleRecord(
                    sample_id=f"{record.sample_id}#L{roi.line_index}",
                    writer_id=record.writer_id,
                    image_path=rel,
                    source_page=record.source_page,
                    line_index=roi.line_index,
                )
            )
        if i % 20 == 0 or i == len(manifest.records):
            progress(f"preprocess: {i}/{len(manifest.records)} pages")

    fingerprint = chain_fingerprint(
        manifest.config_fingerprint,
        format_config({SECTION_PIPELINE: cfg.to_section()}) + f"\nno_segment={no_segment}",
    )
    out_manifest = DatasetManifest(
        records=tuple(new_records), seed=manifest.seed, config_fingerprint=fingerprint
    )
    out_path = out_dir / "manifest.tsv"
    write_manifest(out_manifest, out_path)
    summary = PreprocessSummary(
        pages=pages,
        rois=len(new_records),
        empty_pages=tuple(empty_pages),
        skipped=tuple(skipped),
    )
    return out_path, summary


# ---------------------------------------------------------------------------
# augment


_TAG_SUFFIX = {"thinned": "__thinned", "noised": "__noised", "stretched": "__stretched"}


def run_augment(
    manifest_path: Union[str, Path],
    cfg: AugmentConfig,
    techniques: Sequence[str] = TECHNIQUES,
    out_manifest_path: Union[str, Path, None] = None,
    all_splits: bool = False,
    jobs: int = 1,
    force: bool = False,
    progress: Progress = _quiet,
) -> Path:
    """Add augmented variants for train records (or all records) and write
    the enlarged manifest. Variant images land beside their parents with
    tag-suffixed names."""
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    root = manifest_path.parent
    if out_manifest_path is None:
        out_manifest_path = manifest_path.with_name(manifest_path.stem + "-aug.tsv")
    out_manifest_path = Path(out_manifest_path)
    if out_manifest_path.exists() and not force:
        raise UserError(f"{out_manifest_path} exists (use --force to overwrite)")

    def eligible(record: SampleRecord) -> bool:
        if not record.is_original:
            return False
        return all_splits or record.split is Split.TRAIN

    targets = [r for r in manifest.records if eligible(r)]

    def augment_one(record: SampleRecord):
        image = image_io.read_gray(root / record.image_path)
        sample = LineRoi(
            image=image,
            source_page=record.source_page,
            line_index=record.line_index,
            source_bbox=BBox(0, 0, image.width - 1, image.height - 1),
        )
        variants = []
        for variant, tag in augment_all([sample], cfg, techniques=techniques):
            if tag.kind.value == "original":
                continue
            suffix = _TAG_SUFFIX[tag.kind.value]
            stem, _, ext = record.image_path.rpartition(".")
            rel = f"{stem}{suffix}.{ext}"
            image_io.write_png(variant.image, root / rel)
            variants.append(
                SampleRecord(
                    sample_id=f"{record.sample_id}+{tag.kind.value}",
                    writer_id=record.writer_id,
                    image_path=rel,
                    split=record.split,
                    augmentation=tag,
                    source_page=record.source_page,
                    line_index=record.line_index,
                )
            )
        return variants

    new_records = list(manifest.records)
    for i, variants in enumerate(_map_jobs(jobs, augment_one, targets), start=1):
        new_records.extend(variants)
        if i % 100 == 0 or i == len(targets):
            progress(f"augment: {i}/{len(targets)} samples")

    fingerprint = chain_fingerprint(
        manifest.config_fingerprint,
        format_config({SECTION_AUGMENT: cfg.to_section()})
        + f"\ntechniques={','.join(t for t in TECHNIQUES if t in techniques)}"
        + f"\nall_splits={all_splits}",
    )
    out = DatasetManifest(
        records=tuple(new_records), seed=manifest.seed, config_fingerprint=fingerprint
    )
    write_manifest(out, out_manifest_path)
    return out_manifest_path


# ---------------------------------------------------------------------------
# split


def run_split(
    manifest_path: Union[str, Path],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
    out_path: Union[str, Path, None] = None,
) -> Path:
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    try:
        result = split_manifest(manifest, ratios=ratios, seed=seed)
    except ValueError as exc:  # ratios come straight from the command line
        raise UserError(str(exc)) from exc
    out_path = Path(out_path) if out_path is not None else manifest_path
    write_manifest(result, out_path)
    return out_path


# ---------------------------------------------------------------------------
# train + evaluate


def run_train_baseline(
    manifest_path: Union[str, Path],
    model_name: str = "lbp-centroid",
    jobs: int = 1,
    progress: Progress = _quiet,
) -> EvalReport:
    """Enroll per-writer centroids on the train split and score all splits."""
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    manifest.require_complete_split()
    root = manifest_path.parent

    def featurize(record: SampleRecord):
        return lbp_features(image_io.read_gray(root / record.image_path))

    features = {}
    for i, feature in enumerate(_map_jobs(jobs, featurize, manifest.records), start=1):
        features[manifest.records[i - 1].sample_id] = feature
        if i % 200 == 0 or i == len(manifest.records):
            progress(f"features: {i}/{len(manifest.records)} samples")

    templates = enroll(
        (
            (r.writer_id, features[r.sample_id])
            for r in manifest.records
            if r.split is Split.TRAIN
        ),
        writers=manifest.writers,
    )
    predictions: dict[str, Ranking] = {
        sample_id: identify(feature, templates) for sample_id, feature in features.items()
    }
    return evaluate(predictions, manifest, model_name=model_name)
