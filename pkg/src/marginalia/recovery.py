"""Stage two: bring printed text cut away with the margins back into the body.

Four rules run in order, each seeing the restorations of the previous ones:

* ``broken_line`` -- pieces of characters split by the top/bottom boundary;
* ``missed_line`` -- short printed lines (running heads) left in the
  top/bottom strips;
* ``vertical_fragment`` -- line ends/starts cut off by the left/right
  boundary;
* ``page_number`` -- one small run inside a page-number zone.

Restored components with no printed neighbours are then pruned again.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .components import CharacterMetrics, Component, detect_text_lines, label_components
from .errors import MarginaliaError
from .raster import Rect, as_binary

BROKEN_LINE = "broken_line"
MISSED_LINE = "missed_line"
VERTICAL_FRAGMENT = "vertical_fragment"
PAGE_NUMBER = "page_number"
RULES = (BROKEN_LINE, MISSED_LINE, VERTICAL_FRAGMENT, PAGE_NUMBER)


@dataclass(frozen=True)
class RecoveryConfig:
    size_factor: float = 2.0  # "twice the character size"
    gap_factor: float = 4.0  # horizontal reach, in character spaces
    center_tolerance: float = 0.5  # same-line test, in character sizes
    min_line_run: int = 3
    max_page_number_run: int = 4
    prune_gap_factor: float = 4.0  # in character spaces
    prune_row_factor: float = 1.0  # in character sizes
    connectivity: int = 8


@dataclass
class RecoveryAction:
    rule: str
    component_labels: list
    pixels_restored: int
    bbox: Rect
    pieces: list = field(default_factory=list, repr=False)  # restored Components

    def to_dict(self) -> dict:
        b = self.bbox
        return {
            "rule": self.rule,
            "component_labels": [int(x) for x in self.component_labels],
            "pixels_restored": int(self.pixels_restored),
            "bbox": {"left": b.left, "right": b.right, "top": b.top, "bottom": b.bottom},
        }


@dataclass(frozen=True)
class PageNumberZone:
    axis: str  # "x" = rows (page length), "y" = columns (page width)
    name: str
    band: tuple  # open interval (low, high)

    def contains(self, value: float) -> bool:
        return self.band[0] < value < self.band[1]

    @property
    def center(self) -> float:
        return (self.band[0] + self.band[1]) / 2.0


@dataclass
class RecoveryResult:
    body: np.ndarray
    margin: np.ndarray
    actions: list
    pruned: np.ndarray  # restored ink erased again by pruning
    pruned_labels: list
    warnings: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.body, self.margin, self.actions))


def _action(rule, comps) -> RecoveryAction:
    box = Rect(
        min(c.bbox.left for c in comps),
        max(c.bbox.right for c in comps),
        min(c.bbox.top for c in comps),
        max(c.bbox.bottom for c in comps),
    )
    return RecoveryAction(rule, [c.label for c in comps], sum(c.pixel_count for c in comps), box, list(comps))


def _move(body, margin, comps):
    body, margin = body.copy(), margin.copy()
    for c in comps:
        body[c.rows, c.cols] = True
        margin[c.rows, c.cols] = False
    return body, margin


def _label_map(components, shape) -> np.ndarray:
    lab = np.zeros(shape, dtype=np.int32)
    for c in components:
        lab[c.rows, c.cols] = c.label
    return lab


def _group_runs(comps, metrics: CharacterMetrics, config: RecoveryConfig):
    """Cluster components sitting on one text line with small horizontal gaps."""
    n = len(comps)
    if n == 0:
        return []
    centers = np.array([c.center_row for c in comps])
    lefts = np.array([c.bbox.left for c in comps])
    rights = np.array([c.bbox.right for c in comps])
    gap = np.maximum(lefts[None, :] - rights[:, None], lefts[:, None] - rights[None, :])
    linked = (np.abs(centers[:, None] - centers[None, :]) <= config.center_tolerance * metrics.char_size) & (
        gap <= config.gap_factor * metrics.char_space
    )
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in zip(*np.nonzero(np.triu(linked, k=1))):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(comps[i])
    out = [sorted(g, key=lambda c: (c.bbox.left, c.bbox.top)) for g in groups.values()]
    return sorted(out, key=lambda g: (min(c.bbox.top for c in g), min(c.bbox.left for c in g)))


def recover_broken_lines(body, margin, box: Rect, metrics: CharacterMetrics, config: RecoveryConfig | None = None):
    """Restore margin pieces of characters split by the top or bottom boundary.

    A margin component comes back when it 8-touches a body component across
    the boundary row and neither exceeds twice the character size.
    """
    config = config or RecoveryConfig()
    body, margin = as_binary(body), as_binary(margin)
    h, w = body.shape
    limit = config.size_factor * metrics.char_size
    margin_comps = label_components(margin, config.connectivity)
    if not margin_comps:
        return body.copy(), margin.copy(), []
    body_comps = label_components(body, config.connectivity)
    body_lab = _label_map(body_comps, body.shape)
    margin_lab = _label_map(margin_comps, margin.shape)
    by_label = {c.label: c for c in body_comps}

    actions, restored = [], []
    for margin_row, body_row in ((box.top - 1, box.top), (box.bottom, box.bottom - 1)):
        if not (0 <= margin_row < h and 0 <= body_row < h):
            continue
        touching = {}
        for col in np.flatnonzero(margin_lab[margin_row]):
            lo, hi = max(col - 1, 0), min(col + 2, w)
            for b in np.unique(body_lab[body_row, lo:hi]):
                if b:
                    touching.setdefault(int(margin_lab[margin_row, col]), set()).add(int(b))
        picked = []
        for m_label in sorted(touching):
            comp = margin_comps[m_label - 1]
            if comp in restored or not comp.fits(limit):
                continue
            if any(by_label[b].fits(limit) for b in touching[m_label]):
                picked.append(comp)
        if picked:
            restored.extend(picked)
            actions.append(_action(BROKEN_LINE, picked))
    body, margin = _move(body, margin, restored)
    return body, margin, actions


def recover_missed_lines(margin, box: Rect, metrics: CharacterMetrics, config: RecoveryConfig | None = None):
    """Find short printed lines stranded in the top or bottom strip.

    Character-sized components are grouped into pseudo-lines; groups with at
    least ``min_line_run`` members are returned as restorable. Smaller
    groups are left for the page-number rule.
    """
    config = config or RecoveryConfig()
    limit = config.size_factor * metrics.char_size
    comps = [
        c
        for c in label_components(margin, config.connectivity)
        if c.fits(limit) and (c.bbox.bottom <= box.top or c.bbox.top >= box.bottom)
    ]
    groups = [g for g in _group_runs(comps, metrics, config) if len(g) >= config.min_line_run]
    return groups, [_action(MISSED_LINE, g) for g in groups]


def recover_vertical_fragments(body, margin, box: Rect, lines, metrics: CharacterMetrics,
                               config: RecoveryConfig | None = None):
    """Restore line starts/ends cut off into the left and right strips.

    A candidate must sit on a body text line (vertical centre within its row
    band), be character-sized, and lie within ``gap_factor`` character
    spaces of the line's current edge. Each restoration moves the edge, so
    a cut-off word comes back glyph by glyph.
    """
    config = config or RecoveryConfig()
    body, margin = as_binary(body), as_binary(margin)
    limit = config.size_factor * metrics.char_size
    reach = config.gap_factor * metrics.char_space
    comps = [c for c in label_components(margin, config.connectivity) if c.fits(limit)]
    left_side = [c for c in comps if c.bbox.right <= box.left]
    right_side = [c for c in comps if c.bbox.left >= box.right]
    used, actions = set(), []
    for line in lines:
        for side, pool in (("left", left_side), ("right", right_side)):
            cands = [c for c in pool if c.label not in used and line.contains_row(c.center_row)]
            edge = line.left_edge if side == "left" else line.right_edge
            picked = []
            while cands:
                if side == "left":
                    near = [c for c in cands if edge - c.bbox.right <= reach]
                else:
                    near = [c for c in cands if c.bbox.left - edge <= reach]
                if not near:
                    break
                picked.extend(near)
                cands = [c for c in cands if c not in near]
                if side == "left":
                    edge = min(edge, min(c.bbox.left for c in near))
                else:
                    edge = max(edge, max(c.bbox.right for c in near))
            if picked:
                used.update(c.label for c in picked)
                picked.sort(key=lambda c: (c.bbox.left, c.bbox.top))
                actions.append(_action(VERTICAL_FRAGMENT, picked))
    restored = [c for a in actions for c in a.pieces]
    body, margin = _move(body, margin, restored)
    return body, margin, actions


def page_number_zones(box: Rect, page, metrics: CharacterMetrics) -> list:
    """The five page-number bands; empty bands are left out.

    Column (``y``) bands: left ``(0, left)``, middle ``(mid - size, mid + size)``
    with ``mid`` halfway between the side margins, right ``(right, width)``.
    Row (``x``) bands: top ``(0, top)`` and bottom ``(bottom, height)``.
    """
    width, height = page
    mid = (box.left + box.right) / 2.0
    cs = metrics.char_size
    zones = [
        PageNumberZone("y", "left", (0, box.left)),
        PageNumberZone("y", "middle", (mid - cs, mid + cs)),
        PageNumberZone("y", "right", (box.right, width)),
        PageNumberZone("x", "top", (0, box.top)),
        PageNumberZone("x", "bottom", (box.bottom, height)),
    ]
    return [z for z in zones if z.band[0] < z.band[1]]


def recover_page_number(margin, zones, metrics: CharacterMetrics, config: RecoveryConfig | None = None):
    """Pick at most one small run whose centre lies in a row zone and a column zone.

    Runs hold up to ``max_page_number_run`` character-sized components (for
    multi-digit numbers). Among qualifying runs the one closest to the
    centre of its zone intersection wins; ties go to the smaller row, then
    column.
    """
    config = config or RecoveryConfig()
    limit = config.size_factor * metrics.char_size
    comps = [c for c in label_components(margin, config.connectivity) if c.fits(limit)]
    x_zones = [z for z in zones if z.axis == "x"]
    y_zones = [z for z in zones if z.axis == "y"]
    best = None
    for run in _group_runs(comps, metrics, config):
        if len(run) > config.max_page_number_run:
            continue
        top = min(c.bbox.top for c in run)
        bottom = max(c.bbox.bottom for c in run)
        left = min(c.bbox.left for c in run)
        right = max(c.bbox.right for c in run)
        row, col = (top + bottom - 1) / 2.0, (left + right - 1) / 2.0
        for xz in x_zones:
            if not xz.contains(row):
                continue
            for yz in y_zones:
                if not yz.contains(col):
                    continue
                key = (float(np.hypot(row - xz.center, col - yz.center)), row, col)
                if best is None or key < best[0]:
                    best = (key, run)
    if best is None:
        return [], []
    run = best[1]
    return run, [_action(PAGE_NUMBER, run)]


def prune_unwanted(body, restored_actions, metrics: CharacterMetrics, config: RecoveryConfig | None = None):
    """Erase restored components that have no printed ink around them.

    The neighbourhood is the component's bbox widened by ``prune_gap_factor``
    character spaces left/right and ``prune_row_factor`` character sizes
    up/down. Page-number restorations are exempt. All components are judged
    against the same input body, so the outcome does not depend on order.
    Returns ``(body, pruned)`` with ``pruned`` a list of ``(rule, component)``.
    """
    config = config or RecoveryConfig()
    body = as_binary(body)
    h, w = body.shape
    dx = int(np.ceil(config.prune_gap_factor * metrics.char_space))
    dy = int(np.ceil(config.prune_row_factor * metrics.char_size))
    pruned = []
    for action in restored_actions:
        if action.rule == PAGE_NUMBER:
            continue
        for comp in action.pieces:
            b = comp.bbox
            t, bt = max(0, b.top - dy), min(h, b.bottom + dy)
            l, r = max(0, b.left - dx), min(w, b.right + dx)
            if int(body[t:bt, l:r].sum()) - comp.pixel_count <= 0:
                pruned.append((action.rule, comp))
    out = body.copy()
    for _, comp in pruned:
        out[comp.rows, comp.cols] = False
    return out, pruned


def run_recovery(body, margin, box: Rect, metrics: CharacterMetrics, config: RecoveryConfig | None = None,
                 connectivity: int | None = None) -> RecoveryResult:
    """Apply the four rules in order, then prune.

    Unpacks as ``(final_body, final_margin, actions)``; the result also
    carries the pruned ink, which belongs to neither image.
    """
    config = config or RecoveryConfig()
    if connectivity is not None:
        config = RecoveryConfig(**{**config.__dict__, "connectivity": connectivity})
    body, margin = as_binary(body).copy(), as_binary(margin).copy()
    actions, warnings = [], []

    def guarded(name, fn):
        try:
            return fn()
        except (MarginaliaError, ValueError) as exc:
            warnings.append(f"{name} recovery skipped: {exc}")
            return None

    out = guarded(BROKEN_LINE, lambda: recover_broken_lines(body, margin, box, metrics, config))
    if out:
        body, margin, new = out
        actions += new

    out = guarded(MISSED_LINE, lambda: recover_missed_lines(margin, box, metrics, config))
    if out:
        groups, new = out
        body, margin = _move(body, margin, [c for g in groups for c in g])
        actions += new

    def fragments():
        comps = label_components(body, config.connectivity)
        lines = detect_text_lines(body, comps, metrics)
        return recover_vertical_fragments(body, margin, box, lines, metrics, config)

    out = guarded(VERTICAL_FRAGMENT, fragments)
    if out:
        body, margin, new = out
        actions += new

    zones = page_number_zones(box, (body.shape[1], body.shape[0]), metrics)
    out = guarded(PAGE_NUMBER, lambda: recover_page_number(margin, zones, metrics, config))
    if out:
        run, new = out
        body, margin = _move(body, margin, run)
        actions += new

    body, pruned = prune_unwanted(body, actions, metrics, config)
    pruned_mask = np.zeros_like(body)
    gone = {id(c) for _, c in pruned}
    for _, comp in pruned:
        pruned_mask[comp.rows, comp.cols] = True
    kept_actions = []
    for action in actions:
        pieces = [c for c in action.pieces if id(c) not in gone]
        if not pieces:
            continue
        if len(pieces) != len(action.pieces):
            action = _action(action.rule, pieces)
        kept_actions.append(action)
    pruned_labels = [(rule, comp.label) for rule, comp in pruned]
    return RecoveryResult(body, margin, kept_actions, pruned_mask, pruned_labels, warnings)
