"""Donor-iris rendering: build the rotated/rescaled donor template, paint
it onto the source eye geometry, match intensities, and composite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyRegion
from .geometry import Ellipse, RadialProfile, fit_eye_ellipses
from .glint import GlintMask, detect_glints, remove_glints
from .image import (
    IRIS,
    GrayImage,
    SegMask,
    require_same_shape,
    round_half_away,
    validate_image,
    validate_mask,
)
from .rubbersheet import UnwrappedIris, radial_resample, rotate_columns, sample, unwrap

__all__ = ["IrisLayer", "build_template", "render_iris", "match_histogram", "composite"]

_TWO_PI = 2.0 * np.pi


@dataclass(eq=False)
class IrisLayer:
    """Frame-sized buffer of synthesized iris values with a coverage bit
    marking which pixels were actually rendered."""

    values: np.ndarray
    coverage: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.coverage = np.asarray(self.coverage, dtype=bool)
        if self.values.shape != self.coverage.shape or self.values.ndim != 2:
            raise ValueError("values and coverage must be 2-d arrays of the same shape")


def build_template(
    target_img: GrayImage,
    target_mask: SegMask,
    source_profile: RadialProfile,
    source_iris: Ellipse,
    target_iris_theta: float,
    n_r: int = 64,
    n_theta: int = 360,
    glint_threshold: int = 250,
    glint_dilate: int = 1,
) -> UnwrappedIris:
    """Prepare the donor iris texture for rendering onto the source eye.

    Pipeline: remove donor glints, unwrap the donor annulus, resample the
    radial axis so one row corresponds to one pixel of the source's
    maximum iris radius, then rotate columns to align the donor's fitted
    rotation with the source's.
    """
    glints = detect_glints(target_img, target_mask, glint_threshold, glint_dilate)
    clean = remove_glints(target_img, glints)
    t_pupil, t_iris = fit_eye_ellipses(target_mask)
    u = unwrap(clean, t_pupil, t_iris, n_r, n_theta)
    rows = max(2, int(np.floor(source_profile.R + 0.5)))
    u = radial_resample(u, rows)
    shift = int(np.floor(n_theta * (source_iris.theta - target_iris_theta) / _TWO_PI + 0.5))
    return rotate_columns(u, shift)


def render_iris(
    template: UnwrappedIris, profile: RadialProfile, source_mask: SegMask, pupil: Ellipse
) -> IrisLayer:
    """Paint the template onto every mask-visible iris pixel of the source.

    Each iris pixel computes its own normalized radius against the
    per-ray pupil/iris extents (linearly interpolated between adjacent
    rays), which absorbs ellipse shape, pupil dilation and non-concentric
    displacement in one inverse lookup.  Pixels whose normalized radius
    leaves [0, 1] or whose template sample is invalid stay uncovered.
    """
    validate_mask(source_mask)
    h, w = source_mask.shape
    values = np.zeros((h, w), dtype=np.float64)
    coverage = np.zeros((h, w), dtype=bool)

    ys, xs = np.nonzero(source_mask == IRIS)
    if ys.size == 0:
        return IrisLayer(values, coverage)
    dx = xs - pupil.h
    dy = ys - pupil.k
    phi = np.arctan2(dy, dx) % _TWO_PI
    dist = np.hypot(dx, dy)

    t = phi / _TWO_PI * profile.n_theta
    j0 = (np.floor(t).astype(np.int64) % profile.n_theta).astype(np.intp)
    j1 = ((j0 + 1) % profile.n_theta).astype(np.intp)
    frac = t - np.floor(t)
    pe = (1.0 - frac) * profile.pupil_extent[j0] + frac * profile.pupil_extent[j1]
    ie = (1.0 - frac) * profile.iris_extent[j0] + frac * profile.iris_extent[j1]
    rho = (dist - pe) / (ie - pe)

    ok = (rho >= 0.0) & (rho <= 1.0)
    if ok.any():
        vals, valid = sample(template, rho[ok], phi[ok])
        yo, xo = ys[ok], xs[ok]
        coverage[yo, xo] = valid
        values[yo[valid], xo[valid]] = vals[valid]
    return IrisLayer(values, coverage)


def match_histogram(
    layer: IrisLayer,
    source_img: GrayImage,
    source_mask: SegMask,
    exclude: GlintMask | None = None,
) -> IrisLayer:
    """Histogram specification of the rendered layer onto the source iris.

    Every covered value v maps to the smallest source-iris digital count
    whose cumulative frequency reaches the cumulative frequency of v in
    the layer; the mapping is monotone by construction.  ``exclude``
    (typically the source glint mask) removes pixels from the reference
    histogram.
    """
    validate_image(source_img)
    validate_mask(source_mask, source_img)
    ref_sel = source_mask == IRIS
    if exclude is not None:
        ref_sel &= ~exclude
    if not layer.coverage.any():
        raise EmptyRegion("layer has no covered pixels")
    if not ref_sel.any():
        raise EmptyRegion("source has no iris pixels")

    hist = np.bincount(source_img[ref_sel], minlength=256)
    cdf_src = np.cumsum(hist) / hist.sum()

    covered = layer.values[layer.coverage]
    order = np.sort(covered)
    # cumulative frequency of each covered value within the layer
    cdf_layer = np.searchsorted(order, covered, side="right") / covered.size
    mapped = np.searchsorted(cdf_src, cdf_layer - 1e-12, side="left")
    mapped = np.minimum(mapped, 255)

    values = layer.values.copy()
    values[layer.coverage] = mapped.astype(np.float64)
    return IrisLayer(values, layer.coverage.copy())


def composite(source_img: GrayImage, layer: IrisLayer) -> GrayImage:
    """Source frame with covered pixels replaced by the rounded layer.

    Every non-covered pixel is bit-identical to the source.
    """
    validate_image(source_img)
    require_same_shape(source_img, layer.values)
    out = source_img.copy()
    vals = round_half_away(np.clip(layer.values[layer.coverage], 0.0, 255.0))
    out[layer.coverage] = vals.astype(np.uint8)
    return out
