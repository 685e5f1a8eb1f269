import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from marginalia import synthgen
from marginalia.errors import DegenerateInputError, InvalidParameterError, MarginNotFoundError
from marginalia.profile import (
    COLUMN,
    ROW,
    MarginBox,
    ProjectionProfile,
    SmoothedProfile,
    detect_horizontal_margins,
    detect_margins,
    detect_vertical_margins,
    find_peaks,
    project,
    smooth,
    smoothing_window,
    strip_margins,
)
from marginalia.raster import ink_count

from .oracles import count_ink, moving_average_clamped

pages = arrays(bool, st.tuples(st.integers(1, 15), st.integers(1, 15)))


def test_project_blank_and_full():
    assert not project(np.zeros((3, 4), bool), ROW).values.any()
    assert project(np.ones((4, 4), bool), COLUMN).values.tolist() == [4, 4, 4, 4]


def test_project_single_row():
    img = np.zeros((3, 5), bool)
    img[1, :] = True
    assert project(img, ROW).values.tolist() == [0, 5, 0]


@given(pages, st.sampled_from([ROW, COLUMN]))
def test_profile_mass_equals_ink(image, axis):
    p = project(image, axis)
    assert int(p.values.sum()) == count_ink(image)
    assert p.values.max(initial=0) <= (image.shape[1] if axis == ROW else image.shape[0])


def test_window_column_profile_rounds_up_to_odd():
    # 2 * 3300 / 110 = 60 -> 61
    p = ProjectionProfile(COLUMN, np.full(2550, 110), (2550, 3300))
    assert smoothing_window(p) == 61


def test_window_row_profile_uses_page_width():
    # 2 * 2550 / 100 = 51
    p = ProjectionProfile(ROW, np.full(3300, 100), (2550, 3300))
    assert smoothing_window(p) == 51


def test_window_floor_and_cap():
    assert smoothing_window(ProjectionProfile(ROW, np.full(50, 1000), (10, 50))) == 3
    assert smoothing_window(ProjectionProfile(COLUMN, np.array([1, 0, 0, 0]), (4, 100))) == 3
    assert smoothing_window(ProjectionProfile(COLUMN, np.array([1, 0, 0, 0, 0, 0]), (6, 100))) == 5


def test_window_nonzero_mean_is_narrower():
    p = ProjectionProfile(COLUMN, np.array([0] * 50 + [10] * 50), (100, 100))
    # mean 5 -> 2 * 100 / 5 = 40 -> 41; nonzero mean 10 -> 20 -> 21
    assert smoothing_window(p, "all") == 41
    assert smoothing_window(p, "nonzero") == 21


def test_window_blank_profile_is_degenerate():
    with pytest.raises(DegenerateInputError):
        smoothing_window(ProjectionProfile(ROW, np.zeros(10, int), (5, 10)))


def test_smooth_identity_and_constant():
    p = ProjectionProfile(COLUMN, np.array([3, 1, 4, 1, 5]), (5, 9))
    np.testing.assert_allclose(smooth(p, 1).values, [3, 1, 4, 1, 5])
    c = ProjectionProfile(COLUMN, np.full(9, 7), (9, 9))
    np.testing.assert_allclose(smooth(c, 5).values, 7)


def test_smooth_hand_example():
    p = ProjectionProfile(COLUMN, np.array([0, 0, 9, 0, 0]), (5, 9))
    np.testing.assert_allclose(smooth(p, 3).values, [0, 3, 3, 3, 0])


@given(st.lists(st.integers(0, 50), min_size=1, max_size=30), st.data())
def test_smooth_matches_clamped_oracle(values, data):
    n = len(values)
    window = data.draw(st.sampled_from([w for w in range(1, n + 1, 2)]))
    s = smooth(ProjectionProfile(COLUMN, np.array(values), (n, 50)), window)
    np.testing.assert_allclose(s.values, moving_average_clamped(values, window), atol=1e-9)
    assert abs(s.values.sum() - sum(values)) <= window * max(values)


@pytest.mark.parametrize("window", [0, 2, 7])
def test_smooth_rejects_bad_window(window):
    with pytest.raises(InvalidParameterError):
        smooth(ProjectionProfile(COLUMN, np.arange(5), (5, 5)), window)


def test_peaks_collapse_plateaus():
    assert find_peaks([0, 8, 0, 6, 0]).tolist() == [8, 6]
    assert find_peaks([0, 5, 5, 5, 0, 2, 0]).tolist() == [5, 2]
    assert find_peaks([4, 4, 4]).size == 0


def _column(values, mean_line):
    base = ProjectionProfile(COLUMN, np.array(values), (len(values), 100))
    return SmoothedProfile(base, 1, np.array(values, dtype=float), mean_line)


def test_vertical_crossings_hand_example():
    assert detect_vertical_margins(_column([0, 0, 10, 10, 10, 0, 0], 30 / 7)) == (2, 5)


def test_vertical_constant_profile_not_found():
    p = ProjectionProfile(COLUMN, np.full(6, 5), (6, 10))
    with pytest.raises(MarginNotFoundError) as err:
        detect_vertical_margins(smooth(p, 3))
    assert err.value.fallback == (0, 6)


def test_vertical_equality_counts_as_above():
    assert detect_vertical_margins(_column([0, 2, 5, 2, 0], 2.0)) == (1, 4)


def test_symmetric_page_gives_symmetric_band(rng):
    half = rng.random((60, 40)) < np.linspace(0.02, 0.5, 40)
    page = np.hstack([half, half[:, ::-1]])
    p = project(page, COLUMN)
    left, right = detect_vertical_margins(smooth(p, smoothing_window(p)))
    assert abs(left - (page.shape[1] - right)) <= 1


@settings(max_examples=80)
@given(st.lists(st.integers(0, 30), min_size=3, max_size=40))
def test_vertical_detection_mirrors(values):
    arr = np.array(values)
    if arr.min() == arr.max():
        return
    n = len(arr)
    fwd = smooth(ProjectionProfile(COLUMN, arr, (n, 40)), 1)
    rev = smooth(ProjectionProfile(COLUMN, arr[::-1].copy(), (n, 40)), 1)
    left, right = detect_vertical_margins(fwd)
    r_left, r_right = detect_vertical_margins(rev)
    assert (r_left, r_right) == (n - right, n - left)


def test_horizontal_mean_of_peaks_example():
    s = smooth(ProjectionProfile(ROW, np.array([0, 8, 0, 6, 0]), (10, 5)), 1)
    assert s.mean_line == 7
    # single-row band [1, 2)
    assert detect_horizontal_margins(s) == (1, 2)


def test_horizontal_no_peaks():
    s = smooth(ProjectionProfile(ROW, np.zeros(8, int), (4, 8)), 3)
    with pytest.raises(MarginNotFoundError):
        detect_horizontal_margins(s)


def test_axis_mismatch_rejected():
    with pytest.raises(InvalidParameterError):
        detect_horizontal_margins(_column([0, 1, 0], 0.5))


def test_text_block_rows_within_window():
    truth = synthgen.generate(synthgen.PageSpec(annotation_profile="none", seed=3))
    det = detect_margins(truth.clean)
    block = truth.text_block
    assert abs(det.box.top - block.top) <= det.rows.window
    assert abs(det.box.bottom - block.bottom) <= det.rows.window
    assert abs(det.box.left - block.left) <= det.columns.window
    assert abs(det.box.right - block.right) <= det.columns.window


def test_blank_page_falls_back_to_full_page():
    det = detect_margins(np.zeros((40, 30), bool))
    assert det.box == MarginBox(0, 30, 0, 40)
    assert any("no margins detected" in w for w in det.warnings)


def test_strip_full_box_is_identity(rng):
    img = rng.random((9, 7)) < 0.4
    body, margin = strip_margins(img, MarginBox(0, 7, 0, 9))
    np.testing.assert_array_equal(body, img)
    assert not margin.any()


def test_strip_hand_example():
    img = np.zeros((10, 10), bool)
    img[0, 0] = img[5, 5] = True
    body, margin = strip_margins(img, MarginBox(2, 9, 2, 9))
    assert np.argwhere(body).tolist() == [[5, 5]]
    assert np.argwhere(margin).tolist() == [[0, 0]]


@given(pages, st.data())
def test_strip_is_a_partition(image, data):
    h, w = image.shape
    top = data.draw(st.integers(0, h - 1))
    left = data.draw(st.integers(0, w - 1))
    box = MarginBox(left, data.draw(st.integers(left + 1, w)), top, data.draw(st.integers(top + 1, h)))
    body, margin = strip_margins(image, box)
    assert not (body & margin).any()
    np.testing.assert_array_equal(body | margin, image)
    assert ink_count(body) + ink_count(margin) == ink_count(image)
