"""Raster conventions and shared sampling helpers.

Frames are 2-d ``uint8`` arrays indexed ``img[y, x]``; y grows downward.
Segmentation masks share the frame's shape and store one class id per
pixel: 0 background, 1 sclera, 2 iris, 3 pupil.  Angles are measured in
radians counterclockwise from the +x image axis of this y-down frame, so
a positive angle turns from +x toward +y.  These conventions hold across
the whole package.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch

# A frame and its segmentation mask are plain numpy rasters.
GrayImage = np.ndarray
SegMask = np.ndarray

BACKGROUND = 0
SCLERA = 1
IRIS = 2
PUPIL = 3

CLASS_NAMES = {BACKGROUND: "background", SCLERA: "sclera", IRIS: "iris", PUPIL: "pupil"}


def validate_image(img: GrayImage) -> None:
    if not isinstance(img, np.ndarray) or img.ndim != 2:
        raise ValueError("image must be a 2-d numpy array")
    if img.dtype != np.uint8:
        raise ValueError(f"image dtype must be uint8, got {img.dtype}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("image must be non-empty")


def validate_mask(mask: SegMask, img: GrayImage | None = None) -> None:
    if not isinstance(mask, np.ndarray) or mask.ndim != 2:
        raise ValueError("mask must be a 2-d numpy array")
    if mask.size and int(mask.max()) > PUPIL:
        raise ValueError("mask labels must lie in {0, 1, 2, 3}")
    if img is not None and mask.shape != img.shape:
        raise DimensionMismatch(f"mask shape {mask.shape} != image shape {img.shape}")


def require_same_shape(*rasters: np.ndarray) -> None:
    shapes = {r.shape for r in rasters}
    if len(shapes) > 1:
        raise DimensionMismatch(f"shape mismatch: {sorted(shapes)}")


def round_half_away(values):
    """Round to integer with halves going away from zero (0.5 -> 1, -0.5 -> -1)."""
    v = np.asarray(values, dtype=np.float64)
    out = np.sign(v) * np.floor(np.abs(v) + 0.5)
    return out.astype(np.int64)


def bilinear_sample(img: GrayImage, xs, ys):
    """Bilinear interpolation of ``img`` at real-valued coordinates.

    Returns ``(values, inside)``.  ``inside`` is False where the point
    leaves the raster; the corresponding value is meaningless.
    """
    h, w = img.shape
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    inside = (xs >= 0.0) & (xs <= w - 1.0) & (ys >= 0.0) & (ys <= h - 1.0)

    x0 = np.clip(np.floor(xs), 0, max(w - 2, 0)).astype(np.intp)
    y0 = np.clip(np.floor(ys), 0, max(h - 2, 0)).astype(np.intp)
    fx = np.clip(xs - x0, 0.0, 1.0)
    fy = np.clip(ys - y0, 0.0, 1.0)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)

    v00 = img[y0, x0].astype(np.float64)
    v01 = img[y0, x1].astype(np.float64)
    v10 = img[y1, x0].astype(np.float64)
    v11 = img[y1, x1].astype(np.float64)
    values = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11)
    return values, inside
