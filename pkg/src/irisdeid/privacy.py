"""Privacy variants beyond plain replacement: the blended image (weighted
elliptical gradient plus a pupil-boundary median ring) and the flat
median-iris baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyRegion
from .geometry import Ellipse
from .image import (
    IRIS,
    GrayImage,
    SegMask,
    require_same_shape,
    round_half_away,
    validate_image,
    validate_mask,
)

__all__ = ["BlendParams", "elliptical_weight", "pupil_ring_median", "blend", "median_iris"]


@dataclass(frozen=True)
class BlendParams:
    ring_width: int = 5
    weight_clamp: bool = True

    def __post_init__(self):
        if self.ring_width < 0:
            raise ValueError("ring_width must be >= 0")


def elliptical_weight(x, y, e: Ellipse):
    """Weighted elliptical gradient: 0 at the ellipse center, 1 on its
    boundary, growing quadratically outside.  Vectorized over x/y."""
    return e.weight(x, y)


def _median_count(values: np.ndarray) -> int:
    """Order-statistic median; even counts take the mean of the two middle
    values rounded half away from zero."""
    s = np.sort(np.asarray(values).ravel())
    n = s.size
    if n == 0:
        raise EmptyRegion("median of an empty pixel set")
    if n % 2 == 1:
        return int(s[n // 2])
    mid = (float(s[n // 2 - 1]) + float(s[n // 2])) / 2.0
    return int(round_half_away(mid))


def pupil_ring_median(
    img: GrayImage, pupil: Ellipse, ring_width: int = 5
) -> tuple[int, np.ndarray]:
    """Median digital count of the thin band just outside the pupil.

    The band is approximated by growing both semi-axes by ``ring_width``:
    a pixel belongs to the ring when it is on/outside the pupil ellipse
    but on/inside the grown one.  Returns (median, ring boolean raster).
    """
    validate_image(img)
    if ring_width <= 0:
        raise ValueError("ring_width must be > 0")
    h, w = img.shape
    ys, xs = np.mgrid[0:h, 0:w]
    w_orig = pupil.weight(xs, ys)
    w_grown = pupil.grown(float(ring_width)).weight(xs, ys)
    ring = (w_orig >= 1.0) & (w_grown <= 1.0)
    if not ring.any():
        raise EmptyRegion("pupil ring contains no pixels")
    return _median_count(img[ring]), ring


def blend(
    source: GrayImage,
    generated: GrayImage,
    source_mask: SegMask,
    iris: Ellipse,
    pupil: Ellipse,
    params: BlendParams = BlendParams(),
) -> GrayImage:
    """Mix source and generated iris with an elliptical gradient.

    First the pupil ring of the generated image is flattened to the
    source ring median (clean pupil boundary for pupil detectors), then
    every iris pixel takes w*generated + (1-w)*source with w the
    elliptical weight of the iris ellipse, clamped to 1 so texture at and
    beyond the boundary is fully generated.  All non-iris pixels stay
    source.
    """
    validate_image(source)
    validate_image(generated)
    validate_mask(source_mask, source)
    require_same_shape(source, generated, source_mask)

    median, ring = pupil_ring_median(source, pupil, params.ring_width)
    gen = generated.astype(np.float64)
    gen[ring] = float(median)

    out = source.copy()
    ys, xs = np.nonzero(source_mask == IRIS)
    if ys.size == 0:
        return out
    w = iris.weight(xs, ys)
    if params.weight_clamp:
        w = np.minimum(w, 1.0)
    mixed = w * gen[ys, xs] + (1.0 - w) * source[ys, xs].astype(np.float64)
    out[ys, xs] = round_half_away(np.clip(mixed, 0.0, 255.0)).astype(np.uint8)
    return out


def median_iris(source: GrayImage, source_mask: SegMask) -> GrayImage:
    """Replace every iris pixel with the median iris digital count."""
    validate_image(source)
    validate_mask(source_mask, source)
    sel = source_mask == IRIS
    if not sel.any():
        raise EmptyRegion("mask has no iris pixels")
    out = source.copy()
    out[sel] = np.uint8(_median_count(source[sel]))
    return out
