"""Synthetic annotated pages with exact ground truth.

Printed text is drawn as filled character boxes on a baseline grid, which
keeps the character-size truth exact; handwriting is emulated with random
polylines, ellipses and underlines of varying pen width. Every page is a
pure function of its :class:`PageSpec` (including the seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage

from .errors import InvalidParameterError
from .preprocess import rotate
from .profile import MarginBox
from .raster import Rect, save_image

PROFILES = ("none", "light", "heavy")

# standard page-number placements as (x-axis band, y-axis band)
PAGE_NUMBER_POSITIONS = (
    ("bottom", "middle"),
    ("top", "right"),
    ("bottom", "left"),
    ("top", "middle"),
    ("bottom", "right"),
    ("top", "left"),
)

DEFAULT_STROKES = {"none": 0, "light": 22, "heavy": 26}


@dataclass(frozen=True)
class PageSpec:
    width: int = 850
    height: int = 1100
    margins: MarginBox = MarginBox(100, 750, 110, 980)
    char_size: int = 12
    line_pitch: int = 22
    seed: int = 0
    annotation_profile: str = "light"
    header: bool = False
    page_number_position: tuple | None = None
    chopped_words: bool = False
    chopped_lines: int = 3
    char_gap: int = 3
    strokes: int | None = None
    skew: float = 0.0
    border_noise: bool = False

    def validate(self):
        if self.annotation_profile not in PROFILES:
            raise InvalidParameterError(f"annotation_profile must be one of {PROFILES}")
        if not self.margins.is_valid_for((self.height, self.width)):
            raise InvalidParameterError(f"margins {self.margins} do not fit a {self.width}x{self.height} page")
        if not 1 <= self.char_size < self.line_pitch:
            raise InvalidParameterError("need 1 <= char_size < line_pitch")
        if self.margins.height < self.char_size:
            raise InvalidParameterError("body leaves room for less than one text line")
        if self.margins.width < 8 * self.char_size:
            raise InvalidParameterError("body too narrow for a text line")
        if self.page_number_position is not None and tuple(self.page_number_position) not in PAGE_NUMBER_POSITIONS:
            raise InvalidParameterError(f"unknown page-number position {self.page_number_position}")
        if self.strokes is not None and self.strokes < 0:
            raise InvalidParameterError("strokes must be >= 0")

    @property
    def n_strokes(self) -> int:
        return DEFAULT_STROKES[self.annotation_profile] if self.strokes is None else self.strokes


@dataclass
class GroundTruth:
    clean: np.ndarray
    annotated: np.ndarray
    annotation_mask: np.ndarray
    geometry: PageSpec
    extras: dict = field(default_factory=dict)

    @property
    def text_block(self) -> Rect:
        b = self.extras["text_block"]
        return Rect(b["left"], b["right"], b["top"], b["bottom"])

    def truth_dict(self) -> dict:
        g = self.geometry
        m = g.margins
        return {
            "width": g.width,
            "height": g.height,
            "margins": {"left": m.left, "right": m.right, "top": m.top, "bottom": m.bottom},
            "char_size": g.char_size,
            "char_space": g.char_gap,
            "line_pitch": g.line_pitch,
            "seed": g.seed,
            "annotation_profile": g.annotation_profile,
            "header": g.header,
            "chopped_words": g.chopped_words,
            "page_number_position": list(g.page_number_position) if g.page_number_position else None,
            "skew": g.skew,
            **self.extras,
        }


class _Typesetter:
    """Places pseudo-glyph boxes and remembers what it drew."""

    def __init__(self, spec: PageSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self.page = np.zeros((spec.height, spec.width), dtype=bool)
        self.x_height = max(1, int(round(0.7 * spec.char_size)))

    def glyph(self, top, left, width, tall=True):
        cs = self.spec.char_size
        t = top if tall else top + cs - self.x_height
        self.page[t:top + cs, left:left + width] = True

    def word_widths(self, n_chars):
        cs = self.spec.char_size
        return self.rng.integers(max(2, int(0.4 * cs)), max(3, int(0.75 * cs)) + 1, size=n_chars)

    def words_for(self, span):
        """Random words (lists of glyph widths) whose natural length fits ``span``."""
        gap, word_gap = self.spec.char_gap, self.word_gap
        words, used = [], 0
        while True:
            w = self.word_widths(int(self.rng.integers(1, 9)))
            length = int(w.sum()) + gap * (len(w) - 1)
            extra = length + (word_gap if words else 0)
            if used + extra > span:
                return words, used
            words.append(w)
            used += extra

    @property
    def word_gap(self):
        return int(round(2.7 * self.spec.char_gap))

    def set_line(self, top, left, words, justify_to=None):
        """Draw ``words`` from ``left``; with ``justify_to`` the slack is spread
        over the gaps so the last glyph ends exactly there. Returns the right
        edge (exclusive)."""
        gap, word_gap = self.spec.char_gap, self.word_gap
        gaps = []
        for wi, w in enumerate(words):
            gaps.extend([gap] * (len(w) - 1))
            if wi < len(words) - 1:
                gaps.append(word_gap)
        gaps = np.array(gaps, dtype=int)
        if justify_to is not None and gaps.size:
            natural = sum(int(w.sum()) for w in words) + int(gaps.sum())
            slack = justify_to - left - natural
            if slack > 0:
                gaps += slack // gaps.size
                gaps[: slack % gaps.size] += 1
        x, k, end = left, 0, left
        for w in words:
            for glyph_w in w:
                self.glyph(top, x, int(glyph_w), tall=bool(self.rng.random() < 0.6))
                x += int(glyph_w)
                end = x
                if k < gaps.size:
                    x += int(gaps[k])
                    k += 1
        return end


def _text_body(ts: _Typesetter, spec: PageSpec):
    m, cs, pitch = spec.margins, spec.char_size, spec.line_pitch
    rng = ts.rng
    tops = list(range(m.top, m.bottom - cs + 1, pitch))
    span = m.width
    lines = []
    until_break = int(rng.integers(4, 9))
    for i, top in enumerate(tops):
        last = i == len(tops) - 1
        short = (not last) and i > 0 and until_break == 0
        if short:
            words, _ = ts.words_for(int(span * rng.uniform(0.3, 0.8)))
            until_break = int(rng.integers(4, 9))
            right = ts.set_line(top, m.left, words or [ts.word_widths(3)])
        else:
            words, _ = ts.words_for(span)
            right = ts.set_line(top, m.left, words, justify_to=m.right)
            until_break -= 1
        lines.append({"top": top, "right": right, "full": not short})
    return lines


def _chop_words(ts: _Typesetter, spec: PageSpec, lines):
    """Let a few full lines overrun the right margin by one short word."""
    m, cs = spec.margins, spec.char_size
    full = [ln for ln in lines[1:-1] if ln["full"]]
    if not full:
        return []
    room = spec.width - m.right - 2 * cs
    picks = ts.rng.choice(len(full), size=min(spec.chopped_lines, len(full)), replace=False)
    chopped = []
    for p in sorted(picks):
        line = full[int(p)]
        w = ts.word_widths(int(ts.rng.integers(2, 4)))
        length = int(w.sum()) + spec.char_gap * (len(w) - 1)
        if length > room:
            continue
        left = m.right + ts.word_gap
        ts.set_line(line["top"], left, [w])
        chopped.append({"top": line["top"], "left": left, "right": left + length})
    return chopped


def _header(ts: _Typesetter, spec: PageSpec):
    m, cs = spec.margins, spec.char_size
    span = int(m.width * ts.rng.uniform(0.2, 0.35))
    words, used = ts.words_for(span)
    if not words:
        return None
    top = max(cs, (m.top - cs) // 2)
    left = (m.left + m.right - used) // 2
    ts.set_line(top, left, words)
    return {"top": top, "bottom": top + cs, "left": left, "right": left + used}


def _page_number(ts: _Typesetter, spec: PageSpec):
    m, cs = spec.margins, spec.char_size
    xband, yband = spec.page_number_position
    widths = ts.word_widths(int(ts.rng.integers(1, 3)))
    length = int(widths.sum()) + spec.char_gap * (len(widths) - 1)
    if xband == "top":
        top = max(cs, (m.top - cs) // 2)
    else:
        top = (m.bottom + spec.height - cs) // 2
    if yband == "left":
        center = m.left // 2
    elif yband == "middle":
        center = (m.left + m.right) // 2
    else:
        center = (m.right + spec.width) // 2
    left = center - length // 2
    x = left
    for w in widths:
        ts.glyph(top, x, int(w), tall=True)
        x += int(w) + spec.char_gap
    return {"top": top, "bottom": top + cs, "left": left, "right": left + length}


class _Pen:
    """Rasterises handwriting-like strokes with PIL."""

    def __init__(self, shape):
        self.shape = shape

    def canvas(self):
        h, w = self.shape
        img = Image.new("1", (w, h), 0)
        return img, ImageDraw.Draw(img)

    def scribble(self, rng, region, width):
        top, bottom, left, right = region
        img, draw = self.canvas()
        x = float(rng.uniform(left, max(left + 1, right - 40)))
        y = float(rng.uniform(top, bottom))
        pts = [(x, y)]
        for _ in range(int(rng.integers(8, 22))):
            x = float(np.clip(x + rng.uniform(2, 12), left, right))
            y = float(np.clip(y + rng.uniform(-9, 9), top, bottom))
            pts.append((x, y))
        draw.line(pts, fill=1, width=width, joint="curve")
        return np.array(img, dtype=bool)

    def ellipse(self, rng, region, width):
        top, bottom, left, right = region
        img, draw = self.canvas()
        w = float(rng.uniform(20, max(21, min(120, right - left))))
        h = float(rng.uniform(14, max(15, min(60, bottom - top))))
        x0 = float(rng.uniform(left, max(left + 1, right - w)))
        y0 = float(rng.uniform(top, max(top + 1, bottom - h)))
        draw.ellipse([x0, y0, x0 + w, y0 + h], outline=1, width=width)
        return np.array(img, dtype=bool)

    def segment(self, p0, p1, width):
        img, draw = self.canvas()
        draw.line([p0, p1], fill=1, width=width)
        return np.array(img, dtype=bool)


def _margin_regions(spec: PageSpec):
    """Stroke regions (top, bottom, left, right) well clear of the body."""
    m, cs, h, w = spec.margins, spec.char_size, spec.height, spec.width
    regions = [
        (cs, m.top - 2 * cs, cs, w - cs),
        (m.bottom + 2 * cs, h - cs, cs, w - cs),
        (m.top, m.bottom, cs, m.left - 2 * cs),
        (m.top, m.bottom, m.right + 2 * cs, w - cs),
    ]
    return [r for r in regions if r[1] - r[0] >= 2 * cs and r[3] - r[2] >= 2 * cs]


def _annotations(spec: PageSpec, rng, clean):
    h, w, m, cs = spec.height, spec.width, spec.margins, spec.char_size
    mask = np.zeros((h, w), dtype=bool)
    regions = _margin_regions(spec)
    if spec.n_strokes == 0 or not regions:
        return mask
    pen = _Pen((h, w))
    body = np.zeros((h, w), dtype=bool)
    body[m.slices()] = True
    # printed ink outside the body (header, page number, overruns) stays untouched
    outside = clean & ~body
    keep_out = body | ndimage.binary_dilation(outside, iterations=2 * cs)

    drawn = 0
    for _ in range(40 * spec.n_strokes):
        if drawn == spec.n_strokes:
            break
        region = regions[int(rng.integers(len(regions)))]
        width = int(rng.integers(1, 5))
        kind = rng.random()
        stroke = pen.ellipse(rng, region, width) if kind < 0.25 else pen.scribble(rng, region, width)
        if (stroke & keep_out).any() or (stroke & mask).any():
            continue
        mask |= stroke
        drawn += 1

    if spec.annotation_profile == "heavy":
        mask |= _intrusions(spec, rng, pen, clean, outside)
    return mask & ~clean


def _intrusions(spec, rng, pen, clean, outside):
    """Strokes that reach into the printed body: arrows from the side
    margins and underlines between text lines."""
    m, cs, pitch = spec.margins, spec.char_size, spec.line_pitch
    out = np.zeros_like(clean)
    guard = ndimage.binary_dilation(outside, iterations=2 * cs)
    for _ in range(2):
        row = float(rng.uniform(m.top + 2 * pitch, m.bottom - 2 * pitch))
        if rng.random() < 0.5:
            p0 = (float(rng.uniform(cs, m.left - 2 * cs)), row)
            p1 = (float(m.left + rng.uniform(1, 3) * cs), row + float(rng.uniform(-pitch, pitch)))
        else:
            p0 = (float(rng.uniform(m.right + 2 * cs, spec.width - cs)), row)
            p1 = (float(m.right - rng.uniform(1, 3) * cs), row + float(rng.uniform(-pitch, pitch)))
        stroke = pen.segment(p0, p1, int(rng.integers(2, 4)))
        if not (stroke & guard).any():
            out |= stroke
    n_lines = max(1, (m.height - cs) // pitch)
    line = int(rng.integers(1, max(2, n_lines - 1)))
    y = m.top + line * pitch + cs + 3
    x0 = float(rng.uniform(m.left, m.left + m.width * 0.6))
    length = float(rng.uniform(6, 16)) * cs
    out |= pen.segment((x0, y), (min(x0 + length, m.right - 1), y), 2)
    return out


def _border_strip(spec: PageSpec):
    strip = np.zeros((spec.height, spec.width), dtype=bool)
    strip[:, : max(1, min(20, spec.margins.left // 3))] = True
    return strip


def generate(spec: PageSpec) -> GroundTruth:
    """Build the (clean, annotated, mask, geometry) quadruple for ``spec``."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    ts = _Typesetter(spec, rng)
    lines = _text_body(ts, spec)
    m = spec.margins
    block = Rect(m.left, m.right, m.top, lines[-1]["top"] + spec.char_size)
    extras = {
        "text_lines": len(lines),
        "text_block": {"left": block.left, "right": block.right, "top": block.top, "bottom": block.bottom},
    }
    if spec.chopped_words:
        extras["chopped"] = _chop_words(ts, spec, lines)
    header = _header(ts, spec) if spec.header else None
    if header is not None:
        extras["header_bbox"] = header
    if spec.page_number_position is not None:
        extras["page_number_bbox"] = _page_number(ts, spec)
    clean = ts.page

    if spec.annotation_profile == "none":
        mask = np.zeros_like(clean)
    else:
        mask = _annotations(spec, rng, clean)
    if spec.border_noise:
        mask |= _border_strip(spec) & ~clean

    if spec.skew:
        clean, mask = rotate(clean, spec.skew), rotate(mask, spec.skew)
        mask &= ~clean
    return GroundTruth(clean, clean | mask, mask, spec, extras)


def corpus_spec(index: int, base_seed: int = 42, profiles=("light", "heavy")) -> PageSpec:
    """Spec for document ``index`` of a standard corpus.

    Feature flags cycle so that every page-number placement, the header
    case and the overrun-word case recur within any ten consecutive pages.
    """
    seed = base_seed + index
    rng = np.random.default_rng([seed, 7])
    width, height = 850, 1100
    left = int(rng.integers(80, 121))
    right = width - int(rng.integers(80, 121))
    top = int(rng.integers(95, 131))
    char_size, pitch = int(rng.integers(11, 14)), int(rng.integers(21, 24))
    # end the body exactly on the last text line
    n_lines = (height - int(rng.integers(95, 131)) - top - char_size) // pitch + 1
    bottom = top + (n_lines - 1) * pitch + char_size
    position = PAGE_NUMBER_POSITIONS[index % len(PAGE_NUMBER_POSITIONS)]
    return PageSpec(
        width=width,
        height=height,
        margins=MarginBox(left, right, top, bottom),
        char_size=char_size,
        line_pitch=pitch,
        seed=seed,
        annotation_profile=profiles[index % len(profiles)],
        header=position != ("top", "middle") and index % 3 != 1,
        page_number_position=position,
        chopped_words=index % 4 != 3,
    )


def generate_corpus(count: int, base_seed: int = 42, profiles=("light", "heavy")) -> list:
    if count < 1:
        raise InvalidParameterError("count must be >= 1")
    return [generate(corpus_spec(i, base_seed, profiles)) for i in range(count)]


def write_ground_truth(truth: GroundTruth, out_dir, stem: str) -> dict:
    """Write ``<stem>_clean.png``, ``_annotated.png``, ``_mask.png`` and
    ``_truth.json``; returns the paths written."""
    out_dir = Path(out_dir)
    paths = {
        "clean": out_dir / f"{stem}_clean.png",
        "annotated": out_dir / f"{stem}_annotated.png",
        "mask": out_dir / f"{stem}_mask.png",
        "truth": out_dir / f"{stem}_truth.json",
    }
    save_image(truth.clean, paths["clean"])
    save_image(truth.annotated, paths["annotated"])
    save_image(truth.annotation_mask, paths["mask"])
    paths["truth"].write_text(json.dumps(truth.truth_dict(), indent=2, default=int) + "\n")
    return paths


def with_profile(spec: PageSpec, profile: str) -> PageSpec:
    return replace(spec, annotation_profile=profile)


def body_rect(spec: PageSpec) -> Rect:
    return Rect(spec.margins.left, spec.margins.right, spec.margins.top, spec.margins.bottom)
