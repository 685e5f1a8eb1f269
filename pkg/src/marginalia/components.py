"""Connected components, printed-character statistics and text lines."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DegenerateInputError, InvalidParameterError
from .raster import Rect, as_binary

_STRUCTURE = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


@dataclass(frozen=True, eq=False)
class Component:
    label: int
    bbox: Rect
    rows: np.ndarray
    cols: np.ndarray

    @property
    def pixel_count(self) -> int:
        return int(self.rows.size)

    @property
    def pixels(self) -> set:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    @property
    def height(self) -> int:
        return self.bbox.height

    @property
    def width(self) -> int:
        return self.bbox.width

    @property
    def center_row(self) -> float:
        return (self.bbox.top + self.bbox.bottom - 1) / 2.0

    @property
    def center_col(self) -> float:
        return (self.bbox.left + self.bbox.right - 1) / 2.0

    def fits(self, limit: float) -> bool:
        """True when both bbox sides are at most ``limit``."""
        return self.height <= limit and self.width <= limit


@dataclass(frozen=True)
class CharacterMetrics:
    char_size: float
    char_space: float

    def __post_init__(self):
        if not (np.isfinite(self.char_size) and np.isfinite(self.char_space)):
            raise InvalidParameterError(f"non-finite character metrics {self}")
        if self.char_size < 1 or self.char_space < 0:
            raise InvalidParameterError(f"invalid character metrics {self}")

    @property
    def size_limit(self) -> float:
        return 2.0 * self.char_size


@dataclass(frozen=True)
class TextLine:
    row_band: tuple  # (top, bottom), half-open
    members: tuple  # component labels
    left_edge: int
    right_edge: int  # exclusive

    def contains_row(self, row: float) -> bool:
        return self.row_band[0] <= row <= self.row_band[1] - 1


def label_components(image, connectivity: int = 8) -> list:
    """Label ink regions; components come back ordered by ``(top, left)``
    and are numbered densely from 1 in that order."""
    if connectivity not in _STRUCTURE:
        raise InvalidParameterError(f"connectivity must be 4 or 8, got {connectivity}")
    image = as_binary(image)
    labels, n = ndimage.label(image, structure=_STRUCTURE[connectivity])
    if n == 0:
        return []
    rows, cols = np.nonzero(labels)
    lab = labels[rows, cols]
    order = np.argsort(lab, kind="stable")
    rows, cols, lab = rows[order], cols[order], lab[order]
    bounds = np.searchsorted(lab, np.arange(1, n + 2))
    slices = ndimage.find_objects(labels)
    # scipy numbers components by first pixel in raster order; that breaks
    # ties between components sharing a (top, left) bbox corner
    key = sorted(range(n), key=lambda i: (slices[i][0].start, slices[i][1].start, i))
    out = []
    for new_label, i in enumerate(key, start=1):
        rs, cs = slices[i]
        lo, hi = bounds[i], bounds[i + 1]
        out.append(Component(new_label, Rect(cs.start, cs.stop, rs.start, rs.stop), rows[lo:hi], cols[lo:hi]))
    return out


def _row_clusters(components, tolerance):
    """Group components whose vertical centres chain within ``tolerance``."""
    ordered = sorted(components, key=lambda c: (c.center_row, c.bbox.left))
    clusters, current, last = [], [], None
    for comp in ordered:
        if current and comp.center_row - last > tolerance:
            clusters.append(current)
            current = []
        current.append(comp)
        last = comp.center_row
    if current:
        clusters.append(current)
    return clusters


def estimate_character_metrics(components) -> CharacterMetrics:
    """Robust printed-character height and inter-character gap.

    Height is the median over components inside the inter-quartile band of
    heights; the gap is the median horizontal gap between neighbours on the
    same row, falling back to half the height with fewer than three gaps.
    """
    unique = list({c.label: c for c in components}.values())
    if not unique:
        raise DegenerateInputError("cannot estimate character metrics without components")
    heights = np.array([c.height for c in unique], dtype=float)
    lo, hi = np.percentile(heights, [25, 75])
    inner = heights[(heights >= lo) & (heights <= hi)]
    # interpolated quartiles can fall between two distinct heights
    char_size = float(np.median(inner if inner.size else heights))

    gaps = []
    for cluster in _row_clusters(unique, char_size / 2.0):
        cluster.sort(key=lambda c: (c.bbox.left, c.bbox.top))
        for a, b in zip(cluster, cluster[1:]):
            gap = b.bbox.left - a.bbox.right
            if gap >= 0:
                gaps.append(gap)
    char_space = float(np.median(gaps)) if len(gaps) >= 3 else char_size / 2.0
    return CharacterMetrics(char_size, char_space)


def detect_text_lines(body, components, metrics: CharacterMetrics) -> list:
    """Split the body's row profile into text lines.

    Runs of inked rows are merged across blank gaps of at most half a
    character height; components join the line holding their vertical
    centre. Lines without members are dropped.
    """
    body = as_binary(body)
    inked = body.any(axis=1)
    if not inked.any():
        return []
    padded = np.concatenate(([False], inked, [False])).astype(np.int8)
    step = np.diff(padded)
    starts, stops = np.flatnonzero(step == 1), np.flatnonzero(step == -1)
    bands = [[int(starts[0]), int(stops[0])]]
    for s, e in zip(starts[1:], stops[1:]):
        if s - bands[-1][1] <= metrics.char_size / 2.0:
            bands[-1][1] = int(e)
        else:
            bands.append([int(s), int(e)])

    tops = np.array([b[0] for b in bands])
    lines_members = [[] for _ in bands]
    for comp in components:
        i = int(np.searchsorted(tops, comp.center_row, side="right")) - 1
        if i >= 0 and comp.center_row <= bands[i][1] - 1:
            lines_members[i].append(comp)

    lines = []
    for (top, bottom), members in zip(bands, lines_members):
        if not members:
            continue
        lines.append(
            TextLine(
                (top, bottom),
                tuple(c.label for c in members),
                min(c.bbox.left for c in members),
                max(c.bbox.right for c in members),
            )
        )
    return lines


def write_components_csv(components, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "top", "left", "bottom", "right", "pixel_count"])
        for c in components:
            writer.writerow([c.label, c.bbox.top, c.bbox.left, c.bbox.bottom, c.bbox.right, c.pixel_count])
