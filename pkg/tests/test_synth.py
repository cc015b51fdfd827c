"""Generator tests: determinism, ground-truth integrity, speck placement."""

import numpy as np
import pytest

from inkline.synth import SynthStyle, make_style, page_style, synthesize_page


def test_same_style_gives_byte_identical_pages():
    style = make_style(4, seed=77)
    a, _ = synthesize_page(style, lines=5)
    b, _ = synthesize_page(style, lines=5)
    assert np.array_equal(a.pixels, b.pixels)


def test_different_seeds_give_different_pages():
    a, _ = synthesize_page(make_style(4, seed=1), lines=5)
    b, _ = synthesize_page(make_style(4, seed=2), lines=5)
    assert not np.array_equal(a.pixels, b.pixels)


def test_zero_lines_is_blank_with_empty_truth():
    page, truth = synthesize_page(make_style(0), lines=0)
    assert (page.pixels == 255).all()
    assert truth.line_bboxes == ()
    assert truth.specks == ()
    assert not truth.ink_mask.any()


def test_truth_has_one_bbox_per_line_ordered_and_disjoint():
    _, truth = synthesize_page(make_style(2, seed=3), lines=5)
    assert len(truth.line_bboxes) == 5
    for above, below in zip(truth.line_bboxes, truth.line_bboxes[1:]):
        assert above.y_max < below.y_min  # vertical gap between lines


def test_ink_mask_matches_dark_pixels():
    page, truth = synthesize_page(make_style(1, seed=8), lines=4)
    assert np.array_equal(truth.ink_mask, page.pixels < 128)
    for bbox in truth.line_bboxes:
        assert truth.ink_mask[bbox.y_min : bbox.y_max + 1, bbox.x_min : bbox.x_max + 1].any()


def test_specks_are_dark_isolated_and_off_the_ink():
    page, truth = synthesize_page(make_style(3, seed=12), lines=5, specks=40)
    assert len(truth.specks) == 40
    for x, y in truth.specks:
        assert page.pixels[y, x] == 0
        assert not truth.ink_mask[y, x]
    # pairwise separation: far enough that default dilation cannot merge them
    for i, (x1, y1) in enumerate(truth.specks):
        for x2, y2 in truth.specks[i + 1 :]:
            assert abs(x1 - x2) > 15 or abs(y1 - y2) > 4


def test_canvas_too_small_raises():
    with pytest.raises(ValueError):
        synthesize_page(make_style(0), lines=5, width=704, height=100)
    with pytest.raises(ValueError):
        synthesize_page(make_style(0), lines=2, width=60, height=640)


def test_style_validation():
    with pytest.raises(ValueError):
        SynthStyle("w", stroke_thickness=0, slant=0, baseline_wobble=0, glyph_spacing=4, seed=1)
    with pytest.raises(ValueError):
        SynthStyle("w", stroke_thickness=2, slant=0, baseline_wobble=-1, glyph_spacing=4, seed=1)


def test_styles_are_pairwise_distinct():
    styles = [make_style(i) for i in range(40)]
    tuples = {
        (s.stroke_thickness, round(s.slant, 6), s.baseline_wobble, s.glyph_spacing)
        for s in styles
    }
    assert len(tuples) == 40
    assert len({s.writer_id for s in styles}) == 40


def test_page_style_derivation_is_stable_and_page_dependent():
    base = make_style(5)
    a = page_style(base, corpus_seed=9, writer_index=5, page_index=0)
    b = page_style(base, corpus_seed=9, writer_index=5, page_index=1)
    again = page_style(base, corpus_seed=9, writer_index=5, page_index=0)
    assert a.seed != b.seed
    assert a.seed == again.seed
    assert a.writer_id == base.writer_id
