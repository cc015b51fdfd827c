"""`inkline`: one executable, one subcommand per pipeline stage.

synth -> preprocess -> augment -> split -> train-baseline -> eval, each
manifest-in/manifest-out so any stage can be replayed in isolation.
Exit codes: 0 success, 1 user error (bad input/config/files), 2 internal
error. Progress and summaries go to stderr; machine-readable output only
to files (the rendered results table on stdout is the one human-facing
exception).
"""

from __future__ import annotations

import dataclasses
import os
import sys
from pathlib import Path

import click

from inkline import pipeline
from inkline.augmentation import TECHNIQUES, AugmentConfig
from inkline.config import read_config_file
from inkline.dataset import Split, read_manifest
from inkline.errors import UserError
from inkline.metrics import (
    read_metrics,
    render_compare,
    render_table,
    report_to_dict,
    validate_metrics,
    write_metrics,
)
from inkline.segmentation import AreaThreshold, PipelineConfig, RegionSource


def _jobs_value(jobs: int | None) -> int:
    return jobs if jobs and jobs > 0 else (os.cpu_count() or 1)


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise UserError(f"ratios must be three comma-separated numbers, got {text!r}")
    try:
        r = tuple(float(p) for p in parts)
    except ValueError:
        raise UserError(f"ratios must be numbers, got {text!r}") from None
    return r  # type: ignore[return-value]


def _parse_techniques(text: str) -> tuple[str, ...]:
    if text.strip() == "all":
        return TECHNIQUES
    chosen = tuple(p.strip() for p in text.split(",") if p.strip())
    unknown = [t for t in chosen if t not in TECHNIQUES]
    if unknown:
        raise UserError(
            f"unknown techniques {unknown}; expected 'all' or a comma list of {TECHNIQUES}"
        )
    if not chosen:
        raise UserError("at least one technique is required")
    return chosen


_jobs_option = click.option(
    "--jobs", type=int, default=None,
    help="Worker threads for per-image stages (default: all cores).",
)
_force_option = click.option(
    "--force", is_flag=True, help="Overwrite existing outputs."
)


@click.group()
def cli():
    """Writer-identification pipeline over handwritten page scans."""


@cli.command()
@click.option("--out-dir", required=True, type=click.Path(path_type=Path))
@click.option("--writers", type=int, default=10, show_default=True)
@click.option("--pages-per-writer", type=int, default=20, show_default=True)
@click.option("--lines-per-page", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--specks", type=int, default=0, show_default=True,
              help="Stray dark specks per page, for robustness fixtures.")
@_jobs_option
@_force_option
def synth(out_dir, writers, pages_per_writer, lines_per_page, seed, specks, jobs, force):
    """Generate a deterministic synthetic corpus and its manifest."""
    manifest_path = pipeline.run_synth(
        out_dir,
        writers=writers,
        pages_per_writer=pages_per_writer,
        lines_per_page=lines_per_page,
        seed=seed,
        specks=specks,
        force=force,
        jobs=_jobs_value(jobs),
        progress=pipeline.stderr_progress,
    )
    count = writers * pages_per_writer
    click.echo(f"synth: wrote {count} pages, manifest at {manifest_path}", err=True)


def _load_pipeline_config(config_path, target_size, min_area, region_source) -> PipelineConfig:
    cfg = PipelineConfig.from_raw(read_config_file(config_path)) if config_path else PipelineConfig()
    overrides = {}
    if target_size is not None:
        overrides["target_size"] = target_size
    if min_area is not None:
        overrides["min_component_area"] = AreaThreshold.from_token(min_area)
    if region_source is not None:
        overrides["region_source"] = RegionSource(region_source)
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


@cli.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(path_type=Path))
@click.option("--out-dir", required=True, type=click.Path(path_type=Path))
@click.option("--config", "config_path", type=click.Path(path_type=Path),
              help="Config file; flags below override its [pipeline] values.")
@click.option("--target-size", type=int, default=None)
@click.option("--min-area", type=str, default=None,
              help="Area threshold token, e.g. 'absolute:300' or 'relative:0.05'.")
@click.option("--region-source", type=click.Choice([s.value for s in RegionSource]),
              default=None)
@click.option("--no-segment", is_flag=True,
              help="Skip line segmentation; normalize whole pages as single samples.")
@_jobs_option
@_force_option
def preprocess(manifest_path, out_dir, config_path, target_size, min_area,
               region_source, no_segment, jobs, force):
    """Segment pages into normalized line ROIs and write the ROI manifest."""
    cfg = _load_pipeline_config(config_path, target_size, min_area, region_source)
    out_path, summary = pipeline.run_preprocess(
        manifest_path,
        out_dir,
        cfg=cfg,
        no_segment=no_segment,
        jobs=_jobs_value(jobs),
        force=force,
        progress=pipeline.stderr_progress,
    )
    for sample_id, reason in summary.skipped:
        click.echo(f"preprocess: skipped {sample_id}: {reason}", err=True)
    for sample_id in summary.empty_pages:
        click.echo(f"preprocess: page {sample_id} yielded zero lines", err=True)
    click.echo(
        f"preprocess: {summary.pages} pages -> {summary.rois} ROIs "
        f"({len(summary.skipped)} skipped), manifest at {out_path}",
        err=True,
    )
    if summary.rois == 0:
        click.echo("preprocess: warning: no ROIs extracted", err=True)


@cli.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(path_type=Path))
@click.option("--out-manifest", "out_manifest_path", type=click.Path(path_type=Path),
              help="Defaults to '<manifest stem>-aug.tsv' beside the input.")
@click.option("--config", "config_path", type=click.Path(path_type=Path),
              help="Config file; --seed overrides its [augment] seed.")
@click.option("--techniques", default="all", show_default=True,
              help="'all' or a comma list of thickness,noise,stretch.")
@click.option("--seed", type=int, default=None)
@click.option("--all-splits", is_flag=True,
              help="Augment every split, not just train (ablation only).")
@_jobs_option
@_force_option
def augment(manifest_path, out_manifest_path, config_path, techniques, seed,
            all_splits, jobs, force):
    """Add thinned/noised/stretched variants for train records."""
    cfg = AugmentConfig.from_raw(read_config_file(config_path)) if config_path else AugmentConfig()
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    chosen = _parse_techniques(techniques)
    out_path = pipeline.run_augment(
        manifest_path,
        cfg,
        techniques=chosen,
        out_manifest_path=out_manifest_path,
        all_splits=all_splits,
        jobs=_jobs_value(jobs),
        force=force,
        progress=pipeline.stderr_progress,
    )
    n_in = len(read_manifest(manifest_path).records)
    n_out = len(read_manifest(out_path).records)
    click.echo(f"augment: {n_in} -> {n_out} records, manifest at {out_path}", err=True)


@cli.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(path_type=Path))
@click.option("--ratios", default="0.8,0.1,0.1", show_default=True,
              help="train,val,test fractions; must sum to 1.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path),
              help="Defaults to rewriting the input manifest.")
def split(manifest_path, ratios, seed, out_path):
    """Assign per-writer stratified train/val/test splits."""
    out = pipeline.run_split(
        manifest_path, ratios=_parse_ratios(ratios), seed=seed, out_path=out_path
    )
    result = read_manifest(out)
    click.echo(
        "split: "
        + " ".join(f"{s.value}={len(result.by_split(s))}" for s in (Split.TRAIN, Split.VAL, Split.TEST))
        + f", manifest at {out}",
        err=True,
    )


@cli.command(name="train-baseline")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None,
              help="Metrics file; defaults to 'metrics.json' beside the manifest.")
@click.option("--model-name", default="lbp-centroid", show_default=True)
@_jobs_option
@_force_option
def train_baseline(manifest_path, out_path, model_name, jobs, force):
    """Enroll the texture-centroid baseline and score every split."""
    manifest_path = Path(manifest_path)
    if out_path is None:
        out_path = manifest_path.parent / "metrics.json"
    out_path = Path(out_path)
    if out_path.exists() and not force:
        raise UserError(f"{out_path} exists (use --force to overwrite)")
    report = pipeline.run_train_baseline(
        manifest_path,
        model_name=model_name,
        jobs=_jobs_value(jobs),
        progress=pipeline.stderr_progress,
    )
    write_metrics(report, out_path)
    click.echo(f"train-baseline: metrics at {out_path}", err=True)
    click.echo(render_table(report_to_dict(report)))


@cli.command(name="eval")
@click.argument("metrics_path", type=click.Path(path_type=Path))
@click.option("--compare", "other_path", type=click.Path(path_type=Path),
              help="Second metrics file; renders both blocks side by side.")
def eval_cmd(metrics_path, other_path):
    """Validate metrics file(s) and render the results table."""
    data = read_metrics(metrics_path)
    validate_metrics(data)
    if other_path is None:
        click.echo(render_table(data))
    else:
        other = read_metrics(other_path)
        validate_metrics(other)
        click.echo(render_compare(data, other))


def entry(argv=None) -> int:
    """Console-script entry point mapping exceptions to exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except UserError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except Exception as exc:  # pragma: no cover - defensive catch-all
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(entry())
