import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from marginalia.components import (
    CharacterMetrics,
    Component,
    detect_text_lines,
    estimate_character_metrics,
    label_components,
    write_components_csv,
)
from marginalia.errors import DegenerateInputError, InvalidParameterError
from marginalia.raster import Rect

from .oracles import flood_fill_labels


def _box(label, top, left, height, width=4):
    rows, cols = np.mgrid[top:top + height, left:left + width]
    return Component(label, Rect(left, left + width, top, top + height), rows.ravel(), cols.ravel())


def test_blank_and_single_pixel():
    assert label_components(np.zeros((4, 4), bool)) == []
    img = np.zeros((4, 4), bool)
    img[2, 3] = True
    (c,) = label_components(img)
    assert c.label == 1 and c.pixel_count == 1
    assert c.bbox == Rect(3, 4, 2, 3)


def test_diagonal_pair_depends_on_connectivity():
    img = np.eye(2, dtype=bool)
    assert len(label_components(img, 8)) == 1
    assert len(label_components(img, 4)) == 2
    assert {frozenset(c.pixels) for c in label_components(img, 4)} == set(flood_fill_labels(img, 4))


def test_bad_connectivity():
    with pytest.raises(InvalidParameterError):
        label_components(np.zeros((2, 2), bool), 6)


def test_labels_dense_and_ordered(rng):
    img = rng.random((30, 30)) < 0.3
    comps = label_components(img)
    assert [c.label for c in comps] == list(range(1, len(comps) + 1))
    keys = [(c.bbox.top, c.bbox.left) for c in comps]
    assert keys == sorted(keys)


@settings(max_examples=150)
@given(arrays(bool, st.tuples(st.integers(1, 12), st.integers(1, 12))), st.sampled_from([4, 8]))
def test_matches_flood_fill(image, connectivity):
    comps = label_components(image, connectivity)
    assert {frozenset(c.pixels) for c in comps} == set(flood_fill_labels(image, connectivity))
    for c in comps:
        rows, cols = c.rows, c.cols
        assert c.bbox == Rect(cols.min(), cols.max() + 1, rows.min(), rows.max() + 1)
        assert c.pixel_count == len(c.pixels)


def test_translation_equivariance(rng):
    img = rng.random((20, 20)) < 0.35
    shifted = np.zeros((27, 25), bool)
    shifted[7:, 5:] = img
    a, b = label_components(img), label_components(shifted)
    assert len(a) == len(b)
    for ca, cb in zip(a, b):
        assert {(r + 7, c + 5) for r, c in ca.pixels} == cb.pixels
        assert cb.bbox == Rect(ca.bbox.left + 5, ca.bbox.right + 5, ca.bbox.top + 7, ca.bbox.bottom + 7)


def test_char_size_constant_heights():
    comps = [_box(i + 1, 0, 10 * i, 10) for i in range(3)]
    assert estimate_character_metrics(comps).char_size == 10


def test_char_size_ignores_outlier():
    heights = [8, 10, 10, 10, 60]
    comps = [_box(i + 1, 0, 10 * i, h) for i, h in enumerate(heights)]
    assert estimate_character_metrics(comps).char_size == 10


def test_char_size_with_empty_quartile_band():
    # quartiles 1.5 and 2.5 hold neither height
    m = estimate_character_metrics([_box(1, 0, 0, 1), _box(2, 0, 10, 3)])
    assert m.char_size == 2


@given(st.lists(st.integers(1, 40), min_size=1, max_size=30))
def test_char_size_always_finite(heights):
    comps = [_box(i + 1, 0, 10 * i, h) for i, h in enumerate(heights)]
    m = estimate_character_metrics(comps)
    assert min(heights) <= m.char_size <= max(heights)


def test_single_component_fallback():
    m = estimate_character_metrics([_box(1, 0, 0, 12)])
    assert m == CharacterMetrics(12, 6)


def test_char_space_from_row_neighbours():
    # gaps 3, 3, 5 on one row; a second row far below with gap 3
    comps = [_box(1, 0, 0, 10), _box(2, 0, 7, 10), _box(3, 0, 14, 10), _box(4, 0, 23, 10),
             _box(5, 40, 0, 10), _box(6, 40, 7, 10)]
    assert estimate_character_metrics(comps).char_space == 3


def test_metrics_invariant_under_duplication(rng):
    img = rng.random((40, 40)) < 0.3
    comps = label_components(img)
    assert estimate_character_metrics(comps + comps) == estimate_character_metrics(comps)


def test_metrics_need_components():
    with pytest.raises(DegenerateInputError):
        estimate_character_metrics([])


def test_text_lines_blank_body():
    assert detect_text_lines(np.zeros((20, 20), bool), [], CharacterMetrics(10, 3)) == []


def test_two_bands_two_lines():
    body = np.zeros((70, 60), bool)
    body[10:21, 5:15] = body[10:21, 20:30] = True
    body[40:51, 5:15] = True
    comps = label_components(body)
    lines = detect_text_lines(body, comps, CharacterMetrics(10, 3))
    assert [ln.row_band for ln in lines] == [(10, 21), (40, 51)]
    assert [len(ln.members) for ln in lines] == [2, 1]
    assert lines[0].left_edge == 5 and lines[0].right_edge == 30


def test_short_valleys_do_not_split_a_line():
    body = np.zeros((40, 40), bool)
    body[10:14, 2:8] = True
    body[17:22, 10:16] = True  # 3-row gap <= char_size / 2
    lines = detect_text_lines(body, label_components(body), CharacterMetrics(10, 3))
    assert len(lines) == 1 and len(lines[0].members) == 2


def test_single_band_holds_everything(rng):
    body = np.zeros((30, 80), bool)
    for k in range(8):
        body[10:20, 3 + 9 * k: 9 + 9 * k] = True
    comps = label_components(body)
    (line,) = detect_text_lines(body, comps, CharacterMetrics(10, 3))
    assert sorted(line.members) == [c.label for c in comps]
    for c in comps:
        assert line.contains_row(c.center_row)


def test_components_csv(tmp_path):
    img = np.zeros((5, 5), bool)
    img[1:3, 1:4] = True
    p = tmp_path / "c.csv"
    write_components_csv(label_components(img), p)
    assert p.read_text().splitlines() == ["label,top,left,bottom,right,pixel_count", "1,1,1,3,4,6"]
