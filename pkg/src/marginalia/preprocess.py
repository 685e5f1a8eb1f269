"""Scanner border-noise removal and global skew correction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateInputError, InvalidParameterError
from .raster import as_binary

MAX_SKEW = 15.0
COARSE_STEP = 0.1
FINE_TOLERANCE = 0.02

NOISE_WINDOW = 32
NOISE_EDGE_DENSITY = 0.5
NOISE_INK_DENSITY = 0.6

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SkewEstimate:
    angle: float  # degrees, counter-clockwise rotation present in the page
    confidence: float


def border_band_mask(shape, band_fraction: float) -> np.ndarray:
    """True on the four border strips of the given relative thickness."""
    if not 0 < band_fraction <= 0.25:
        raise InvalidParameterError(f"band_fraction must be in (0, 0.25], got {band_fraction}")
    h, w = shape
    bh = max(1, int(round(band_fraction * h)))
    bw = max(1, int(round(band_fraction * w)))
    band = np.zeros(shape, dtype=bool)
    band[:bh] = band[h - bh:] = True
    band[:, :bw] = band[:, w - bw:] = True
    return band


def remove_border_noise(
    image,
    band_fraction: float = 0.08,
    window: int = NOISE_WINDOW,
    edge_density: float = NOISE_EDGE_DENSITY,
    ink_density: float = NOISE_INK_DENSITY,
) -> np.ndarray:
    """Erase dark scanner artefacts (shadows, punch holes) along the page border.

    Inside the border bands, a pixel seeds noise when the surrounding
    ``window`` x ``window`` box is densely inked yet has few Sobel edges,
    which is how solid blobs differ from text strokes. Every band-restricted
    ink region holding a seed is erased; nothing outside the bands changes.
    """
    image = as_binary(image)
    band = border_band_mask(image.shape, band_fraction)
    candidates = image & band
    if not candidates.any():
        return image.copy()
    signal = image.astype(float) * 255.0
    magnitude = np.hypot(ndimage.sobel(signal, axis=0, mode="nearest"), ndimage.sobel(signal, axis=1, mode="nearest"))
    edges = (magnitude > 0).astype(float)
    local_ink = ndimage.uniform_filter(image.astype(float), size=window, mode="nearest")
    local_edges = ndimage.uniform_filter(edges, size=window, mode="nearest")
    seeds = candidates & (local_ink > ink_density) & (local_edges <= edge_density)
    if not seeds.any():
        return image.copy()
    labels, _ = ndimage.label(candidates, structure=np.ones((3, 3), dtype=bool))
    noisy = np.unique(labels[seeds])
    out = image.copy()
    out[np.isin(labels, noisy[noisy > 0])] = False
    return out


def rotate(image, angle: float) -> np.ndarray:
    """Rotate counter-clockwise by ``angle`` degrees about the centre.

    Nearest-neighbour resampling on the same canvas; pixels leaving the
    canvas are dropped and uncovered pixels are background.
    """
    image = as_binary(image)
    if angle == 0:
        return image.copy()
    turned = ndimage.rotate(image.astype(np.uint8), angle, order=0, reshape=False, mode="constant", cval=0, prefilter=False)
    return turned > 0


class _ProfileScorer:
    """Row-profile variance of the ink after undoing a candidate rotation."""

    def __init__(self, image, max_points):
        rows, cols = np.nonzero(image)
        stride = max(1, int(math.ceil(rows.size / max_points)))
        h, w = image.shape
        cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
        self.y = rows[::stride] - cy
        self.x = cols[::stride] - cx
        self.half = int(math.ceil(math.hypot(h, w) / 2.0)) + 1
        self.n_bins = 2 * self.half + 1

    def __call__(self, angle):
        t = math.radians(angle)
        yr = self.x * math.sin(t) + self.y * math.cos(t)
        # floor(+0.5), not rint: half-integer offsets at 0 degrees would
        # round-half-even into paired bins and fake a variance spike
        idx = np.floor(yr + 0.5).astype(np.intp) + self.half
        return float(np.var(np.bincount(idx, minlength=self.n_bins)))


def estimate_skew(image, max_angle: float = MAX_SKEW, step: float = COARSE_STEP,
                  tolerance: float = FINE_TOLERANCE, max_points: int = 60000) -> SkewEstimate:
    """Find the page rotation whose removal maximises row-profile variance.

    The range ``[-max_angle, max_angle]`` is scanned at ``step`` degrees and
    the best angle refined by golden-section search to ``tolerance``.
    Confidence is ``1 - min/max`` of the scanned variances, capped low when
    the optimum sits on the edge of the search range.
    """
    image = as_binary(image)
    if not image.any():
        raise DegenerateInputError("cannot estimate skew of a blank image")
    score = _ProfileScorer(image, max_points)
    n = int(round(max_angle / step))
    angles = np.arange(-n, n + 1) * step
    scores = np.array([score(a) for a in angles])
    top = scores.max()
    # among equal maxima prefer the smallest rotation
    tied = np.flatnonzero(scores >= top)
    i = int(tied[np.argmin(np.abs(angles[tied]))])
    best, best_score = float(angles[i]), float(scores[i])

    lo, hi = max(best - step, -max_angle), min(best + step, max_angle)
    c, d = hi - _INV_PHI * (hi - lo), lo + _INV_PHI * (hi - lo)
    fc, fd = score(c), score(d)
    while hi - lo > tolerance:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = score(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = score(d)
    mid = (lo + hi) / 2.0
    f_mid = score(mid)
    if f_mid > best_score:
        best, best_score = mid, f_mid

    confidence = 0.0 if top <= 0 else float(1.0 - scores.min() / top)
    if abs(best) >= max_angle - step / 2:
        confidence = min(confidence, 0.1)
    return SkewEstimate(round(best, 4), confidence)


def deskew(image, estimate: SkewEstimate) -> np.ndarray:
    """Undo the estimated rotation (rotate by ``-estimate.angle``)."""
    return rotate(image, -estimate.angle)
