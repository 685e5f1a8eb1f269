"""Stage one: projection profiles and margin boundary detection.

The column-axis profile (ink per column) locates the left/right margins and
the row-axis profile (ink per row) locates the top/bottom margins. Each is
smoothed with a centred moving average whose width scales with the page
extent over the mean profile density, then the margins are read off where
the smoothed curve crosses a reference line.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter1d

from .errors import DegenerateInputError, InvalidParameterError, MarginNotFoundError
from .raster import Rect, as_binary, clear_rect, keep_rect

ROW = "row"
COLUMN = "column"

MIN_BODY_FRACTION = 0.25


class MarginBox(Rect):
    """The detected body rectangle; everything outside it is margin."""

    def body_fraction(self, shape) -> float:
        h, w = shape[:2]
        return self.area / float(h * w)


@dataclass(frozen=True)
class ProjectionProfile:
    axis: str
    values: np.ndarray
    source_dims: tuple  # (width, height)

    def __len__(self):
        return len(self.values)

    @property
    def perpendicular_extent(self) -> int:
        """Page extent the counts run across: height for columns, width for rows."""
        width, height = self.source_dims
        return height if self.axis == COLUMN else width


@dataclass(frozen=True)
class SmoothedProfile:
    base: ProjectionProfile
    window: int
    values: np.ndarray
    mean_line: float

    @property
    def axis(self) -> str:
        return self.base.axis


def project(image, axis: str) -> ProjectionProfile:
    """Count ink per row (``axis="row"``) or per column (``axis="column"``)."""
    image = as_binary(image)
    if axis == ROW:
        values = image.sum(axis=1)
    elif axis == COLUMN:
        values = image.sum(axis=0)
    else:
        raise InvalidParameterError(f"axis must be 'row' or 'column', got {axis!r}")
    h, w = image.shape
    return ProjectionProfile(axis, values.astype(np.int64), (w, h))


def _odd_at_least_3(raw: float) -> int:
    n = int(math.floor(raw + 0.5))
    if n % 2 == 0:
        n += 1  # equidistant odd neighbours: take the wider window
    return max(n, 3)


def smoothing_window(profile: ProjectionProfile, mask_mean: str = "all") -> int:
    """Moving-average width ``2 * extent / mean(profile)``, made odd.

    ``extent`` is the page dimension perpendicular to the profile index
    (height for a column profile, width for a row profile). ``mask_mean``
    selects whether the mean runs over all indices or only nonzero ones.
    """
    values = np.asarray(profile.values, dtype=float)
    if not values.any():
        raise DegenerateInputError("smoothing window undefined for an all-zero profile (blank page)")
    if mask_mean == "all":
        mean = values.mean()
    elif mask_mean == "nonzero":
        mean = values[values > 0].mean()
    else:
        raise InvalidParameterError(f"mask_mean must be 'all' or 'nonzero', got {mask_mean!r}")
    window = _odd_at_least_3(2.0 * profile.perpendicular_extent / mean)
    n = len(values)
    if window > n:
        window = n if n % 2 else n - 1
    return max(window, 1)


def find_peaks(values) -> np.ndarray:
    """Values of strict local maxima, each plateau counted once.

    A plateau at either end only needs to beat its single neighbour; a
    profile with no neighbouring runs at all has no peaks.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return values
    change = np.flatnonzero(np.diff(values) != 0) + 1
    runs = values[np.concatenate(([0], change))]
    if runs.size < 2:
        return runs[:0]
    left = np.concatenate(([-np.inf], runs[:-1]))
    right = np.concatenate((runs[1:], [-np.inf]))
    return runs[(runs > left) & (runs > right)]


def smooth(profile: ProjectionProfile, window: int) -> SmoothedProfile:
    """Centred moving average with replicated edges.

    The reference line is stored with the result: the raw mean for column
    profiles, the mean of the smoothed peaks for row profiles (NaN when the
    smoothed row profile has no peak).
    """
    n = len(profile.values)
    if not isinstance(window, (int, np.integer)) or window < 1 or window % 2 == 0 or window > max(n, 1):
        raise InvalidParameterError(f"window must be odd and in [1, {n}], got {window}")
    raw = np.asarray(profile.values, dtype=float)
    values = uniform_filter1d(raw, size=int(window), mode="nearest") if n else raw
    if profile.axis == COLUMN:
        mean_line = float(raw.mean()) if n else float("nan")
    else:
        peaks = find_peaks(values)
        mean_line = float(peaks.mean()) if peaks.size else float("nan")
    return SmoothedProfile(profile, int(window), values, mean_line)


def _outer_crossings(values: np.ndarray, mean_line: float, what: str):
    n = len(values)
    if not np.isfinite(mean_line):
        raise MarginNotFoundError(f"no reference line for {what} margins", (0, n))
    above = values >= mean_line  # equality counts as above
    if above.all() or not above.any():
        raise MarginNotFoundError(f"smoothed profile never crosses its reference line ({what})", (0, n))
    padded = np.concatenate(([False], above, [False])).astype(np.int8)
    step = np.diff(padded)
    ups = np.flatnonzero(step == 1)
    downs = np.flatnonzero(step == -1)
    return int(ups[0]), int(downs[-1])


def detect_vertical_margins(smoothed: SmoothedProfile):
    """Return ``(left, right)`` columns; ``right`` is exclusive.

    ``left`` is the first index where the smoothed curve rises to the raw
    mean and ``right`` the index just past where it last falls below it.
    """
    if smoothed.axis != COLUMN:
        raise InvalidParameterError("vertical margins need a column-axis profile")
    return _outer_crossings(smoothed.values, smoothed.mean_line, "left/right")


def detect_horizontal_margins(smoothed: SmoothedProfile):
    """Return ``(top, bottom)`` rows, crossing the mean of the smoothed peaks."""
    if smoothed.axis != ROW:
        raise InvalidParameterError("horizontal margins need a row-axis profile")
    return _outer_crossings(smoothed.values, smoothed.mean_line, "top/bottom")


@dataclass
class MarginDetection:
    box: MarginBox
    columns: SmoothedProfile | None
    rows: SmoothedProfile | None
    warnings: list = field(default_factory=list)

    @property
    def windows(self) -> dict:
        return {
            COLUMN: self.columns.window if self.columns is not None else None,
            ROW: self.rows.window if self.rows is not None else None,
        }


def _axis_detection(image, axis, mask_mean, warnings):
    profile = project(image, axis)
    n = len(profile.values)
    try:
        smoothed = smooth(profile, smoothing_window(profile, mask_mean))
    except DegenerateInputError as exc:
        warnings.append(f"no margins detected: {exc}")
        return None, (0, n)
    detect = detect_vertical_margins if axis == COLUMN else detect_horizontal_margins
    try:
        return smoothed, detect(smoothed)
    except MarginNotFoundError as exc:
        warnings.append(f"no margins detected: {exc}")
        return smoothed, exc.fallback


def detect_margins(image, mask_mean: str = "all") -> MarginDetection:
    """Detect the body rectangle of a page.

    Both axes are analysed independently on the full page. An axis without
    a crossing falls back to the full page extent and records a warning, as
    does a body smaller than a quarter of the page.
    """
    image = as_binary(image)
    warnings: list = []
    columns, (left, right) = _axis_detection(image, COLUMN, mask_mean, warnings)
    rows, (top, bottom) = _axis_detection(image, ROW, mask_mean, warnings)
    box = MarginBox(left, right, top, bottom)
    frac = box.body_fraction(image.shape)
    if frac < MIN_BODY_FRACTION:
        warnings.append(f"detected body covers only {frac:.1%} of the page")
    return MarginDetection(box, columns, rows, warnings)


def strip_margins(image, box: Rect):
    """Split a page into ``(body, margin)`` images of the same size."""
    return keep_rect(image, box), clear_rect(image, box)


def write_profile_csv(smoothed: SmoothedProfile, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value", "smoothed", "mean_line"])
        for i, (v, s) in enumerate(zip(smoothed.base.values, smoothed.values)):
            writer.writerow([i, int(v), f"{s:.6f}", f"{smoothed.mean_line:.6f}"])
