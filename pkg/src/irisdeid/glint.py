"""Corneal glint handling: threshold detection, inpainting removal, and
verbatim restoration so downstream gaze estimators see identical glints."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import AllGlint
from .image import (
    IRIS,
    PUPIL,
    GrayImage,
    SegMask,
    require_same_shape,
    round_half_away,
    validate_image,
    validate_mask,
)

__all__ = ["GlintMask", "detect_glints", "remove_glints", "restore_glints"]

# Per-pixel glint flag, same shape as the image it was computed from.
GlintMask = np.ndarray


def detect_glints(
    img: GrayImage, region: SegMask | None = None, threshold: int = 250, dilate: int = 1
) -> GlintMask:
    """Threshold bright pixels and dilate to cover the glint halo.

    With a segmentation mask the search is restricted to iris and pupil
    labels; otherwise the whole frame is scanned.
    """
    validate_image(img)
    if not 1 <= threshold <= 255:
        raise ValueError(f"threshold must be in [1, 255], got {threshold}")
    if dilate < 0:
        raise ValueError("dilate must be >= 0")
    bits = img >= threshold
    if region is not None:
        validate_mask(region, img)
        bits &= (region == IRIS) | (region == PUPIL)
    if dilate > 0 and bits.any():
        struct = np.ones((2 * dilate + 1, 2 * dilate + 1), dtype=bool)
        bits = ndimage.binary_dilation(bits, structure=struct)
    return bits


def _neighbor_sum_count(values: np.ndarray, filled: np.ndarray):
    """8-neighborhood sum of filled values and count of filled neighbors."""
    vals = np.where(filled, values, 0.0)
    cnt = filled.astype(np.float64)
    pad_v = np.pad(vals, 1)
    pad_c = np.pad(cnt, 1)
    h, w = values.shape
    total = np.zeros((h, w), dtype=np.float64)
    count = np.zeros((h, w), dtype=np.float64)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            total += pad_v[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
            count += pad_c[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    return total, count


def remove_glints(img: GrayImage, glints: GlintMask) -> GrayImage:
    """Replace glint pixels by an inward neighbor-mean fill.

    Each pass assigns every unfilled glint pixel the mean of its already
    filled 8-neighbors (computed from the previous pass, so the result
    does not depend on scan order) until the region is closed.
    """
    validate_image(img)
    require_same_shape(img, glints)
    if not glints.any():
        return img.copy()
    if glints.all():
        raise AllGlint("cannot inpaint: every pixel is glint")

    work = img.astype(np.float64)
    filled = ~glints
    while not filled.all():
        total, count = _neighbor_sum_count(work, filled)
        frontier = ~filled & (count > 0)
        work[frontier] = total[frontier] / count[frontier]
        filled |= frontier

    out = img.copy()
    fillv = round_half_away(np.clip(work[glints], 0.0, 255.0)).astype(np.uint8)
    out[glints] = fillv
    return out


def restore_glints(generated: GrayImage, source: GrayImage, glints: GlintMask) -> GrayImage:
    """Copy the source pixels back over the glint region, byte for byte."""
    validate_image(generated)
    validate_image(source)
    require_same_shape(generated, source, glints)
    out = generated.copy()
    out[glints] = source[glints]
    return out
