"""End-to-end tests for the CLI: exit codes, composition, determinism."""

import hashlib
import json
from pathlib import Path

import pytest

from inkline import pipeline
from inkline.cli import entry
from inkline.dataset import Split, read_manifest
from inkline.image_io import read_gray
from inkline.metrics import read_metrics


def run(*argv: str) -> int:
    return entry(list(argv))


def make_corpus(root: Path, writers=2, pages=3, lines=2, seed=7) -> Path:
    code = run(
        "synth", "--out-dir", str(root),
        "--writers", str(writers), "--pages-per-writer", str(pages),
        "--lines-per-page", str(lines), "--seed", str(seed),
    )
    assert code == 0
    return root / "manifest.tsv"


def tree_hash(root: Path) -> str:
    digest = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            digest.update(str(path.relative_to(root)).encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# synth


def test_synth_writes_count_and_manifest(tmp_path):
    manifest_path = make_corpus(tmp_path / "pages", writers=3, pages=4)
    manifest = read_manifest(manifest_path)
    assert len(manifest.records) == 12
    assert len(manifest.writers) == 3
    assert all(r.line_index == -1 for r in manifest.records)
    # every referenced image decodes
    for record in manifest.records:
        img = read_gray(manifest_path.parent / record.image_path)
        assert img.width > 0


def test_synth_zero_writers_is_user_error(tmp_path, capsys):
    assert run("synth", "--out-dir", str(tmp_path / "x"), "--writers", "0") == 1
    assert "writers" in capsys.readouterr().err


def test_synth_refuses_nonempty_dir_without_force(tmp_path, capsys):
    make_corpus(tmp_path / "pages")
    assert run("synth", "--out-dir", str(tmp_path / "pages")) == 1
    assert "--force" in capsys.readouterr().err


def test_synth_force_rerun_is_byte_identical(tmp_path):
    make_corpus(tmp_path / "pages", seed=5)
    first = tree_hash(tmp_path / "pages")
    code = run(
        "synth", "--out-dir", str(tmp_path / "pages"),
        "--writers", "2", "--pages-per-writer", "3",
        "--lines-per-page", "2", "--seed", "5", "--force",
    )
    assert code == 0
    assert tree_hash(tmp_path / "pages") == first


def test_synth_same_seed_identical_trees_different_seed_differs(tmp_path):
    make_corpus(tmp_path / "a", seed=9)
    make_corpus(tmp_path / "b", seed=9)
    make_corpus(tmp_path / "c", seed=10)
    assert tree_hash(tmp_path / "a") == tree_hash(tmp_path / "b")
    assert tree_hash(tmp_path / "a") != tree_hash(tmp_path / "c")


# ---------------------------------------------------------------------------
# preprocess


def test_preprocess_roi_count_matches_generator(tmp_path):
    manifest_path = make_corpus(tmp_path / "pages", writers=2, pages=3, lines=4)
    assert run("preprocess", "--manifest", str(manifest_path),
               "--out-dir", str(tmp_path / "rois")) == 0
    manifest = read_manifest(tmp_path / "rois" / "manifest.tsv")
    assert len(manifest.records) == 2 * 3 * 4
    for record in manifest.records:
        img = read_gray(tmp_path / "rois" / record.image_path)
        assert (img.width, img.height) == (224, 224)
        assert record.line_index >= 0
        assert "#L" in record.sample_id


def test_preprocess_blank_corpus_warns_and_exits_zero(tmp_path, capsys):
    manifest_path = make_corpus(tmp_path / "pages", lines=0)
    code = run("preprocess", "--manifest", str(manifest_path),
               "--out-dir", str(tmp_path / "rois"))
    assert code == 0
    err = capsys.readouterr().err
    assert "warning" in err and "0 ROIs" in err
    assert read_manifest(tmp_path / "rois" / "manifest.tsv").records == ()


def test_preprocess_skips_and_names_corrupt_png(tmp_path, capsys):
    manifest_path = make_corpus(tmp_path / "pages", writers=2, pages=2, lines=2)
    victim = read_manifest(manifest_path).records[0]
    (tmp_path / "pages" / victim.image_path).write_bytes(b"not a png at all")
    code = run("preprocess", "--manifest", str(manifest_path),
               "--out-dir", str(tmp_path / "rois"))
    assert code == 0
    err = capsys.readouterr().err
    assert f"skipped {victim.sample_id}" in err
    manifest = read_manifest(tmp_path / "rois" / "manifest.tsv")
    assert len(manifest.records) == 3 * 2  # three healthy pages survive
    assert not any(r.source_page == victim.source_page
                   and r.writer_id == victim.writer_id for r in manifest.records)


def test_preprocess_no_segment_gives_one_record_per_page(tmp_path):
    manifest_path = make_corpus(tmp_path / "pages", writers=2, pages=2, lines=3)
    assert run("preprocess", "--manifest", str(manifest_path),
               "--out-dir", str(tmp_path / "rois"), "--no-segment") == 0
    manifest = read_manifest(tmp_path / "rois" / "manifest.tsv")
    assert len(manifest.records) == 4
    assert all(r.line_index == 0 for r in manifest.records)
    img = read_gray(tmp_path / "rois" / manifest.records[0].image_path)
    assert (img.width, img.height) == (224, 224)


def test_preprocess_flag_overrides_config_file(tmp_path):
    manifest_path = make_corpus(tmp_path / "pages")
    (tmp_path / "seg.cfg").write_text("[pipeline]\ntarget_size = 64\n")
    assert run("preprocess", "--manifest", str(manifest_path),
               "--out-dir", str(tmp_path / "r64"),
               "--config", str(tmp_path / "seg.cfg")) == 0
    assert run("preprocess", "--manifest", str(manifest_path),
               "--out-dir", str(tmp_path / "r32"),
               "--config", str(tmp_path / "seg.cfg"), "--target-size", "32") == 0
    r64 = read_manifest(tmp_path / "r64" / "manifest.tsv")
    r32 = read_manifest(tmp_path / "r32" / "manifest.tsv")
    assert read_gray(tmp_path / "r64" / r64.records[0].image_path).width == 64
    assert read_gray(tmp_path / "r32" / r32.records[0].image_path).width == 32


def test_preprocess_output_independent_of_jobs(tmp_path):
    manifest_path = make_corpus(tmp_path / "pages", writers=3, pages=3, lines=3)
    for jobs, out in (("1", "j1"), ("4", "j4")):
        assert run("preprocess", "--manifest", str(manifest_path),
                   "--out-dir", str(tmp_path / out), "--jobs", jobs) == 0
    assert tree_hash(tmp_path / "j1") == tree_hash(tmp_path / "j4")


def test_preprocess_missing_manifest_is_user_error(tmp_path, capsys):
    assert run("preprocess", "--manifest", str(tmp_path / "nope.tsv"),
               "--out-dir", str(tmp_path / "rois")) == 1
    assert "not found" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# split + augment


def split_corpus(tmp_path, writers=2, pages=3, lines=2, seed=7) -> Path:
    manifest_path = make_corpus(tmp_path / "pages", writers, pages, lines, seed)
    assert run("preprocess", "--manifest", str(manifest_path),
               "--out-dir", str(tmp_path / "rois")) == 0
    roi_manifest = tmp_path / "rois" / "manifest.tsv"
    assert run("split", "--manifest", str(roi_manifest), "--seed", "1") == 0
    return roi_manifest


def test_split_assigns_all_and_is_deterministic(tmp_path):
    roi_manifest = split_corpus(tmp_path, writers=3, pages=4, lines=2)
    manifest = read_manifest(roi_manifest)
    assert all(r.split is not Split.UNASSIGNED for r in manifest.records)
    before = roi_manifest.read_bytes()
    assert run("split", "--manifest", str(roi_manifest), "--seed", "1") == 0
    assert roi_manifest.read_bytes() == before


def test_split_bad_ratios_is_user_error(tmp_path, capsys):
    roi_manifest = split_corpus(tmp_path)
    assert run("split", "--manifest", str(roi_manifest), "--ratios", "0.9,0.9,0.9") == 1
    assert run("split", "--manifest", str(roi_manifest), "--ratios", "1,2") == 1
    assert "ratios" in capsys.readouterr().err


@pytest.mark.parametrize(
    "techniques,factor",
    [("thickness", 2), ("thickness,noise", 3), ("all", 4)],
)
def test_augment_multiplies_train_records(tmp_path, techniques, factor):
    roi_manifest = split_corpus(tmp_path, writers=2, pages=4, lines=2)
    before = read_manifest(roi_manifest)
    n_train = len(before.by_split(Split.TRAIN))
    assert run("augment", "--manifest", str(roi_manifest),
               "--techniques", techniques) == 0
    after = read_manifest(roi_manifest.with_name("manifest-aug.tsv"))
    assert len(after.by_split(Split.TRAIN)) == factor * n_train
    # val/test untouched by default
    for split in (Split.VAL, Split.TEST):
        assert after.by_split(split) == before.by_split(split)
    # variant images exist beside their parents
    for record in after.records:
        assert (roi_manifest.parent / record.image_path).is_file()


def test_augment_rerun_needs_force_then_matches(tmp_path, capsys):
    roi_manifest = split_corpus(tmp_path)
    assert run("augment", "--manifest", str(roi_manifest)) == 0
    aug_path = roi_manifest.with_name("manifest-aug.tsv")
    first = aug_path.read_bytes()
    assert run("augment", "--manifest", str(roi_manifest)) == 1
    assert "--force" in capsys.readouterr().err
    assert run("augment", "--manifest", str(roi_manifest), "--force") == 0
    assert aug_path.read_bytes() == first


def test_augment_unknown_technique_is_user_error(tmp_path, capsys):
    roi_manifest = split_corpus(tmp_path)
    assert run("augment", "--manifest", str(roi_manifest),
               "--techniques", "rotation") == 1
    assert "rotation" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# train-baseline + eval


def test_train_baseline_writes_metrics_and_consistent_table(tmp_path, capsys):
    roi_manifest = split_corpus(tmp_path, writers=3, pages=5, lines=3)
    metrics_path = tmp_path / "metrics.json"
    assert run("train-baseline", "--manifest", str(roi_manifest),
               "--out", str(metrics_path)) == 0
    out = capsys.readouterr().out
    data = read_metrics(metrics_path)
    assert data["model_name"] == "lbp-centroid"
    assert data["augmentation_mode"] == "none"
    assert f"{data['test_acc']:>11.4f}" in out
    assert "Without Augmentation" in out


def test_train_baseline_missing_splits_is_user_error(tmp_path, capsys):
    manifest_path = make_corpus(tmp_path / "pages")
    assert run("preprocess", "--manifest", str(manifest_path),
               "--out-dir", str(tmp_path / "rois")) == 0
    code = run("train-baseline", "--manifest", str(tmp_path / "rois" / "manifest.tsv"),
               "--out", str(tmp_path / "m.json"))
    assert code == 1
    assert "unassigned" in capsys.readouterr().err.lower()


def test_eval_renders_and_compares(tmp_path, capsys):
    roi_manifest = split_corpus(tmp_path, writers=3, pages=5, lines=3)
    metrics_path = tmp_path / "metrics.json"
    assert run("train-baseline", "--manifest", str(roi_manifest),
               "--out", str(metrics_path)) == 0
    capsys.readouterr()
    assert run("eval", str(metrics_path)) == 0
    single = capsys.readouterr().out
    assert "Model" in single and "Test Acc" in single
    assert run("eval", str(metrics_path), "--compare", str(metrics_path)) == 0
    double = capsys.readouterr().out
    assert double.count("Model") == 2
    assert "\n\n" in double


def test_eval_missing_file_is_user_error(tmp_path, capsys):
    assert run("eval", str(tmp_path / "absent.json")) == 1
    assert "not found" in capsys.readouterr().err


def test_eval_invalid_metrics_is_user_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"metrics_version": 1, "model_name": "x"}))
    assert run("eval", str(bad)) == 1
    assert "missing" in capsys.readouterr().err.lower()


# ---------------------------------------------------------------------------
# harness behavior


def test_unexpected_exception_maps_to_exit_2(tmp_path, capsys, monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("wires crossed")

    monkeypatch.setattr(pipeline, "run_synth", boom)
    assert run("synth", "--out-dir", str(tmp_path / "x")) == 2
    assert "internal error" in capsys.readouterr().err


def test_usage_error_maps_to_exit_1(capsys):
    assert run("preprocess") == 1  # required option missing
    assert run("no-such-command") == 1
    err = capsys.readouterr().err
    assert "Error" in err or "error" in err


def test_help_exits_zero(capsys):
    assert run("--help") == 0
    assert "synth" in capsys.readouterr().out


def test_fingerprint_chains_across_stages(tmp_path):
    manifest_path = make_corpus(tmp_path / "pages")
    page_fp = read_manifest(manifest_path).config_fingerprint
    assert run("preprocess", "--manifest", str(manifest_path),
               "--out-dir", str(tmp_path / "rois")) == 0
    roi_fp = read_manifest(tmp_path / "rois" / "manifest.tsv").config_fingerprint
    assert len(page_fp) == len(roi_fp) == 16
    assert page_fp != roi_fp
    assert run("preprocess", "--manifest", str(manifest_path),
               "--out-dir", str(tmp_path / "rois32"), "--target-size", "32") == 0
    assert read_manifest(tmp_path / "rois32" / "manifest.tsv").config_fingerprint != roi_fp
