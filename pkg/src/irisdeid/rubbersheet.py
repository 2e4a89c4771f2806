"""Rubber-sheet mapping of an iris annulus onto a rectangular grid.

Row i of the rectangle corresponds to normalized radius r = i/(n_r - 1)
(0 on the inner/pupil boundary, 1 on the outer boundary); column j to
angle phi = 2*pi*j/n_theta.  Rays originate at the inner ellipse center,
which keeps the mapping well defined for non-concentric pupils.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryInconsistent
from .geometry import Ellipse, ray_ellipse_distance
from .image import GrayImage, bilinear_sample, validate_image

__all__ = ["UnwrappedIris", "unwrap", "radial_resample", "rotate_columns", "sample"]

_TWO_PI = 2.0 * np.pi


@dataclass(eq=False)
class UnwrappedIris:
    """Rectangular iris texture: values plus a per-sample validity bit.

    A sample is valid when it was taken from inside the image (and, by
    construction of :func:`unwrap`, inside the annulus).  ``xs``/``ys``
    hold the Cartesian source coordinates of each sample when known.
    """

    values: np.ndarray
    valid: np.ndarray
    xs: np.ndarray | None = None
    ys: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.ndim != 2 or self.values.shape != self.valid.shape:
            raise ValueError("values and valid must be 2-d arrays of the same shape")
        if self.n_r < 2 or self.n_theta < 8:
            raise ValueError(f"grid too small: {self.values.shape}")

    @property
    def n_r(self) -> int:
        return self.values.shape[0]

    @property
    def n_theta(self) -> int:
        return self.values.shape[1]


def unwrap(
    img: GrayImage, inner: Ellipse, outer: Ellipse, n_r: int = 64, n_theta: int = 360
) -> UnwrappedIris:
    """Unwrap the annulus between ``inner`` and ``outer`` into n_r x n_theta.

    Sample points interpolate linearly between the ray-ellipse
    intersections with the inner and outer boundary; values come from
    bilinear interpolation of ``img``.  Samples falling outside the
    image are marked invalid (value 0).
    """
    validate_image(img)
    if n_r < 2 or n_theta < 8:
        raise ValueError(f"grid must be at least 2 x 8, got {n_r} x {n_theta}")
    if not outer.contains(inner.h, inner.k):
        raise GeometryInconsistent("inner center lies outside the outer ellipse")
    phis = _TWO_PI * np.arange(n_theta) / n_theta
    p = ray_ellipse_distance(inner, inner.h, inner.k, phis)
    q = ray_ellipse_distance(outer, inner.h, inner.k, phis)
    if np.any(q <= p):
        raise GeometryInconsistent("inner ellipse is not strictly inside the outer ellipse")

    r = (np.arange(n_r, dtype=np.float64) / (n_r - 1))[:, None]
    dist = p[None, :] + r * (q - p)[None, :]
    xs = inner.h + dist * np.cos(phis)[None, :]
    ys = inner.k + dist * np.sin(phis)[None, :]
    values, inside = bilinear_sample(img, xs, ys)
    values[~inside] = 0.0
    return UnwrappedIris(values, inside, xs, ys)


def _catmull_rom_weights(t: float) -> tuple[float, float, float, float]:
    t2 = t * t
    t3 = t2 * t
    return (
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    )


def radial_resample(u: UnwrappedIris, new_n_r: int) -> UnwrappedIris:
    """Resample every column to ``new_n_r`` rows along the radial axis.

    Catmull-Rom cubic when the source has >= 4 rows, linear otherwise.
    End rows use linearly extrapolated virtual neighbors, so linear data
    is reproduced exactly.  An output row is valid only where all source
    rows its kernel draws from are valid; values are clamped to [0, 255].
    """
    n = u.n_r
    if new_n_r < 2:
        raise ValueError(f"new_n_r must be >= 2, got {new_n_r}")
    src = u.values
    ok = u.valid
    pos = np.arange(new_n_r, dtype=np.float64) * (n - 1) / (new_n_r - 1)
    values = np.empty((new_n_r, u.n_theta), dtype=np.float64)
    valid = np.empty((new_n_r, u.n_theta), dtype=bool)
    cubic = n >= 4

    for i in range(new_n_r):
        base = int(np.floor(pos[i]))
        t = pos[i] - base
        if t == 0.0:
            values[i] = src[base]
            valid[i] = ok[base]
            continue
        if not cubic:
            values[i] = (1.0 - t) * src[base] + t * src[base + 1]
            valid[i] = ok[base] & ok[base + 1]
            continue
        w0, w1, w2, w3 = _catmull_rom_weights(t)
        if base - 1 < 0:
            p0 = 2.0 * src[0] - src[1]
            support = ok[0] & ok[1]
        else:
            p0 = src[base - 1]
            support = ok[base - 1]
        if base + 2 > n - 1:
            p3 = 2.0 * src[n - 1] - src[n - 2]
            support = support & ok[n - 2] & ok[n - 1]
        else:
            p3 = src[base + 2]
            support = support & ok[base + 2]
        values[i] = w0 * p0 + w1 * src[base] + w2 * src[base + 1] + w3 * p3
        valid[i] = support & ok[base] & ok[base + 1]

    np.clip(values, 0.0, 255.0, out=values)
    return UnwrappedIris(values, valid)


def rotate_columns(u: UnwrappedIris, shift: int) -> UnwrappedIris:
    """Cyclic column shift: output column j = input column (j - shift) mod
    n_theta, i.e. positive shifts move content toward +phi."""
    s = int(shift)
    return UnwrappedIris(
        np.roll(u.values, s, axis=1),
        np.roll(u.valid, s, axis=1),
        None if u.xs is None else np.roll(u.xs, s, axis=1),
        None if u.ys is None else np.roll(u.ys, s, axis=1),
    )


def sample(u: UnwrappedIris, r, phi):
    """Bilinear lookup at normalized radius r in [0, 1] and angle phi.

    Angular interpolation wraps between the last and first columns; the
    result is valid only if all four neighboring samples are valid.
    Accepts scalars or arrays (returns arrays for array input).
    """
    r_arr = np.asarray(r, dtype=np.float64)
    phi_arr = np.asarray(phi, dtype=np.float64)
    if np.any((r_arr < -1e-9) | (r_arr > 1.0 + 1e-9)):
        raise ValueError("r must lie in [0, 1]")
    scalar = r_arr.ndim == 0 and phi_arr.ndim == 0
    r_arr, phi_arr = np.broadcast_arrays(np.clip(r_arr, 0.0, 1.0), phi_arr)

    i = r_arr * (u.n_r - 1)
    i0 = np.minimum(np.floor(i), u.n_r - 2).astype(np.intp)
    fi = i - i0
    i1 = i0 + 1

    t = phi_arr / _TWO_PI * u.n_theta
    tf = np.floor(t)
    fj = t - tf
    j0 = (tf.astype(np.int64) % u.n_theta).astype(np.intp)
    j1 = ((j0 + 1) % u.n_theta).astype(np.intp)

    v = u.values
    a = u.valid
    values = (1.0 - fi) * ((1.0 - fj) * v[i0, j0] + fj * v[i0, j1]) + fi * (
        (1.0 - fj) * v[i1, j0] + fj * v[i1, j1]
    )
    valid = a[i0, j0] & a[i0, j1] & a[i1, j0] & a[i1, j1]
    if scalar:
        return float(values), bool(valid)
    return values, valid
