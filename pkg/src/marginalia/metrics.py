"""Evaluation scores: annotation-removal accuracy, recovery accuracy and
pixelwise Pearson correlation."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidParameterError, UndefinedMetricError
from .raster import ink_count


def count_accuracy(expected: int, actual: int) -> float:
    """``1 - |actual - expected| / expected``; not clamped, may go negative."""
    if expected <= 0:
        raise UndefinedMetricError("accuracy undefined when the expected amount is zero")
    return 1.0 - abs(actual - expected) / expected


def removal_accuracy(expected_removed: int, actually_removed: int) -> float:
    """Score removed annotation ink against the amount that should go."""
    return count_accuracy(int(expected_removed), int(actually_removed))


def recovery_accuracy(expected_clean, actual_clean) -> float:
    """Score the cleaned page's ink count against the ground-truth page."""
    expected_clean, actual_clean = np.asarray(expected_clean), np.asarray(actual_clean)
    if expected_clean.shape != actual_clean.shape:
        raise InvalidParameterError(f"shape mismatch {expected_clean.shape} vs {actual_clean.shape}")
    return count_accuracy(ink_count(expected_clean), ink_count(actual_clean))


def _as_values(image) -> np.ndarray:
    arr = np.asarray(image)
    # binary pixels enter as 0 = background, 1 = ink
    return arr.astype(float).ravel()


def pearson_correlation(a, b) -> float:
    """Sample Pearson correlation between two same-sized images."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise InvalidParameterError(f"shape mismatch {a.shape} vs {b.shape}")
    x, y = _as_values(a), _as_values(b)
    n = x.size
    if n < 2:
        raise UndefinedMetricError("correlation needs at least two pixels")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt((dx @ dx) / (n - 1)), np.sqrt((dy @ dy) / (n - 1))
    if sx == 0 or sy == 0:
        raise UndefinedMetricError("correlation undefined for a constant image")
    r = float((dx / sx) @ (dy / sy) / (n - 1))
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class DocumentMetrics:
    removal_accuracy: float
    recovery_accuracy: float
    correlation: float
    expected_removed: int
    removed: int
    expected_ink: int
    recovered_ink: int

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("removal_accuracy", "recovery_accuracy", "correlation"):
            out[key] = round(out[key], 6)
        return out


def evaluate_document(clean, annotation_mask, final_body, removed) -> DocumentMetrics:
    """Score one processed page against its ground truth.

    ``removed`` is every ink pixel the pipeline took off the page; all of it
    counts toward the removal amount wherever it lies.
    """
    clean, mask = np.asarray(clean, dtype=bool), np.asarray(annotation_mask, dtype=bool)
    final_body, removed = np.asarray(final_body, dtype=bool), np.asarray(removed, dtype=bool)
    shapes = {clean.shape, mask.shape, final_body.shape, removed.shape}
    if len(shapes) != 1:
        raise InvalidParameterError(f"inconsistent image shapes {sorted(shapes)}")
    a, b = ink_count(mask), ink_count(removed)
    return DocumentMetrics(
        removal_accuracy=removal_accuracy(a, b),
        recovery_accuracy=recovery_accuracy(clean, final_body),
        correlation=pearson_correlation(clean, final_body),
        expected_removed=a,
        removed=b,
        expected_ink=ink_count(clean),
        recovered_ink=ink_count(final_body),
    )
