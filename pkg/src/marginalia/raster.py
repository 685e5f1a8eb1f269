"""Image model, pixel-region helpers and file I/O.

Images are plain numpy arrays indexed ``[row, col]``:

* gray images are ``uint8`` arrays of luminance (0 = black, 255 = white);
* binary images are ``bool`` arrays where ``True`` marks an ink pixel.

Rows run along the page length (height), columns along the page width.
Every function returns a new array and never mutates its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageIOError, InvalidParameterError

# ITU-R BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])

SUPPORTED_SUFFIXES = (".png", ".pgm")


@dataclass(frozen=True)
class Rect:
    """Half-open pixel rectangle: rows ``[top, bottom)``, cols ``[left, right)``."""

    left: int
    right: int
    top: int
    bottom: int

    @property
    def width(self) -> int:
        return self.right - self.left

    @property
    def height(self) -> int:
        return self.bottom - self.top

    @property
    def area(self) -> int:
        return self.width * self.height

    def is_valid_for(self, shape) -> bool:
        h, w = shape[:2]
        return 0 <= self.left < self.right <= w and 0 <= self.top < self.bottom <= h

    def slices(self):
        return slice(self.top, self.bottom), slice(self.left, self.right)

    @classmethod
    def full(cls, shape) -> "Rect":
        h, w = shape[:2]
        return cls(0, w, 0, h)


def as_binary(image) -> np.ndarray:
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise InvalidParameterError(f"expected a 2-D image, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def ink_count(image: np.ndarray) -> int:
    return int(np.count_nonzero(image))


def otsu_threshold(gray: np.ndarray) -> int:
    """Return ``t`` in [1, 255] maximising between-class variance of the
    split ``{v < t} | {v >= t}``.

    When several thresholds tie (e.g. a two-level image), the middle of the
    tied run is returned so the cut sits halfway between the levels.
    """
    hist = np.bincount(np.asarray(gray, dtype=np.uint8).ravel(), minlength=256).astype(float)
    total = hist.sum()
    levels = np.arange(256, dtype=float)
    # class 0 = values < t, for t = 1..255
    w0 = np.cumsum(hist)[:-1]
    m0 = np.cumsum(hist * levels)[:-1]
    w1 = total - w0
    m1 = (hist * levels).sum() - m0
    with np.errstate(divide="ignore", invalid="ignore"):
        between = w0 * w1 * (m0 / w0 - m1 / w1) ** 2
    between = np.nan_to_num(between, nan=0.0)
    best = between.max()
    # relative tolerance absorbs float noise between equivalent cuts
    tied = np.flatnonzero(between >= best - 1e-9 * max(best, 1.0))
    return int(tied[len(tied) // 2] + 1) if best > 0 else 128


def binarize(gray: np.ndarray, method: str = "otsu", threshold: int | None = None) -> np.ndarray:
    """Map luminance to ink: a pixel is ink iff its value is below the threshold.

    ``method`` is ``"otsu"`` or ``"fixed"``; the fixed method needs
    ``threshold`` in [0, 255].
    """
    gray = np.asarray(gray)
    if gray.ndim != 2 or gray.size == 0:
        raise InvalidParameterError("binarize needs a non-empty 2-D gray image")
    if method == "otsu":
        t = otsu_threshold(gray)
    elif method == "fixed":
        if threshold is None or not 0 <= threshold <= 255:
            raise InvalidParameterError(f"fixed threshold must be in [0, 255], got {threshold}")
        t = threshold
    else:
        raise InvalidParameterError(f"unknown binarization method {method!r}")
    return gray < t


def to_gray(image: np.ndarray) -> np.ndarray:
    """Binary images become 0 (ink) / 255 (background); gray passes through."""
    arr = np.asarray(image)
    if arr.dtype == bool:
        return np.where(arr, 0, 255).astype(np.uint8)
    return arr.astype(np.uint8, copy=False)


def rgb_to_luma(rgb: np.ndarray) -> np.ndarray:
    return np.rint(rgb[..., :3].astype(float) @ _LUMA).clip(0, 255).astype(np.uint8)


def load_image(path) -> np.ndarray:
    """Read a PNG or PGM (P2/P5) file as a ``uint8`` gray image."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            mode = im.mode
            if mode == "L":
                arr = np.array(im)
            elif mode == "1":
                arr = np.array(im.convert("L"))
            elif mode in ("RGB", "RGBA", "P", "LA", "PA"):
                if mode == "LA":
                    arr = np.array(im)[..., 0]
                else:
                    arr = rgb_to_luma(np.array(im.convert("RGB")))
            else:
                raise ImageIOError(f"{path}: unsupported pixel mode {mode!r} (need 8-bit gray or RGB)")
    except FileNotFoundError as exc:
        raise ImageIOError(f"{path}: no such file") from exc
    except UnidentifiedImageError as exc:
        raise ImageIOError(f"{path}: not a PNG/PGM image") from exc
    except OSError as exc:
        if isinstance(exc, ImageIOError):
            raise
        raise ImageIOError(f"{path}: unreadable image ({exc})") from exc
    return np.ascontiguousarray(arr, dtype=np.uint8)


def save_image(image: np.ndarray, path) -> None:
    """Write a gray or binary image; binary ink is written as 0."""
    path = Path(path)
    if path.suffix.lower() not in SUPPORTED_SUFFIXES:
        raise ImageIOError(f"{path}: unsupported output format (use .png or .pgm)")
    if not path.parent.is_dir():
        raise ImageIOError(f"{path}: parent directory does not exist")
    try:
        Image.fromarray(to_gray(image), mode="L").save(path)
    except OSError as exc:
        raise ImageIOError(f"{path}: write failed ({exc})") from exc


def clear_rect(image: np.ndarray, r: Rect) -> np.ndarray:
    """Copy of ``image`` with every pixel inside ``r`` set to background."""
    image = as_binary(image)
    if not r.is_valid_for(image.shape):
        raise InvalidParameterError(f"{r} out of bounds for image of shape {image.shape}")
    out = image.copy()
    out[r.slices()] = False
    return out


def keep_rect(image: np.ndarray, r: Rect) -> np.ndarray:
    """Copy of ``image`` with everything outside ``r`` set to background."""
    image = as_binary(image)
    if not r.is_valid_for(image.shape):
        raise InvalidParameterError(f"{r} out of bounds for image of shape {image.shape}")
    out = np.zeros_like(image)
    out[r.slices()] = image[r.slices()]
    return out


def stamp_pixels(image: np.ndarray, rows, cols=None) -> np.ndarray:
    """Copy of ``image`` with the listed pixels set to ink.

    Pixels may be given as parallel ``rows``/``cols`` sequences, or as one
    iterable of ``(row, col)`` pairs.
    """
    image = as_binary(image)
    if cols is None:
        pairs = np.asarray(list(rows), dtype=np.intp).reshape(-1, 2)
        rows, cols = pairs[:, 0], pairs[:, 1]
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    h, w = image.shape
    if rows.size and (rows.min() < 0 or rows.max() >= h or cols.min() < 0 or cols.max() >= w):
        raise InvalidParameterError("stamp coordinate out of bounds")
    out = image.copy()
    out[rows, cols] = True
    return out
