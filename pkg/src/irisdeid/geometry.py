"""Ellipse model, boundary extraction, least-squares ellipse fitting, and
per-ray radial geometry of a segmented eye.

Ray angles phi follow the package convention (counterclockwise from +x,
y-down raster) and rays originate at the pupil ellipse center unless a
different origin is given explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFit, GeometryInconsistent, InsufficientPoints
from .image import IRIS, PUPIL, SegMask, validate_mask

__all__ = [
    "Ellipse",
    "RadialProfile",
    "boundary_points",
    "fit_ellipse",
    "fit_eye_ellipses",
    "compute_radial_profile",
    "ray_ellipse_distance",
]

_HALF_PI = 0.5 * np.pi


@dataclass(frozen=True)
class Ellipse:
    """Rotated ellipse: center (h, k), semi-axes (a, b), rotation theta.

    Construction normalizes the parameterization: axes are swapped (and
    theta turned by pi/2) so that a >= b, and theta is wrapped into
    [-pi/2, pi/2).  This removes the (a, b, theta) ambiguity.
    """

    h: float
    k: float
    a: float
    b: float
    theta: float = 0.0

    def __post_init__(self):
        h, k, a, b, theta = (float(v) for v in (self.h, self.k, self.a, self.b, self.theta))
        if not (np.isfinite([h, k, a, b, theta]).all() and a > 0.0 and b > 0.0):
            raise GeometryInconsistent(f"invalid ellipse parameters {(h, k, a, b, theta)}")
        if b > a:
            a, b = b, a
            theta += _HALF_PI
        theta = (theta + _HALF_PI) % np.pi - _HALF_PI
        for name, val in (("h", h), ("k", k), ("a", a), ("b", b), ("theta", theta)):
            object.__setattr__(self, name, val)

    def weight(self, x, y):
        """Quadratic form that is 0 at the center, 1 on the boundary and
        grows quadratically outside; accepts scalars or arrays."""
        ct = np.cos(self.theta)
        st = np.sin(self.theta)
        dx = np.asarray(x, dtype=np.float64) - self.h
        dy = np.asarray(y, dtype=np.float64) - self.k
        w = ((dx * ct + dy * st) / self.a) ** 2 + ((dy * ct - dx * st) / self.b) ** 2
        return w.item() if w.ndim == 0 else w

    def contains(self, x, y):
        """True strictly inside the ellipse."""
        w = self.weight(x, y)
        return w < 1.0

    def grown(self, margin: float) -> "Ellipse":
        """Same center/rotation with both semi-axes enlarged by ``margin``."""
        return Ellipse(self.h, self.k, self.a + margin, self.b + margin, self.theta)


def ray_ellipse_distance(e: Ellipse, ox: float, oy: float, phi):
    """Distance from (ox, oy) along direction phi to the boundary of ``e``.

    The origin must lie strictly inside the ellipse, which guarantees a
    unique positive intersection.  Vectorized over phi.
    """
    ct = np.cos(e.theta)
    st = np.sin(e.theta)
    relx = float(ox) - e.h
    rely = float(oy) - e.k
    # origin and direction in the ellipse-aligned frame
    px = (ct * relx + st * rely) / e.a
    py = (ct * rely - st * relx) / e.b
    phi = np.asarray(phi, dtype=np.float64)
    cp = np.cos(phi)
    sp = np.sin(phi)
    ux = (ct * cp + st * sp) / e.a
    uy = (ct * sp - st * cp) / e.b

    c = px * px + py * py - 1.0
    if c >= 0.0:
        raise GeometryInconsistent(f"ray origin ({ox}, {oy}) is not strictly inside the ellipse")
    aq = ux * ux + uy * uy
    bq = 2.0 * (px * ux + py * uy)
    disc = bq * bq - 4.0 * aq * c
    t = (-bq + np.sqrt(disc)) / (2.0 * aq)
    return t.item() if t.ndim == 0 else t


def _region_boundary_coords(region: np.ndarray) -> np.ndarray:
    """(N, 2) array of (x, y) for region pixels 4-adjacent to a non-region
    pixel, in row-major scan order.  Pixels touching the image border do
    not count as boundary unless an in-image neighbor differs."""
    edge = np.zeros_like(region, dtype=bool)
    edge[1:, :] |= region[1:, :] & ~region[:-1, :]
    edge[:-1, :] |= region[:-1, :] & ~region[1:, :]
    edge[:, 1:] |= region[:, 1:] & ~region[:, :-1]
    edge[:, :-1] |= region[:, :-1] & ~region[:, 1:]
    ys, xs = np.nonzero(edge)
    return np.column_stack([xs, ys])


def boundary_points(mask: SegMask, cls: int) -> list[tuple[int, int]]:
    """Pixels of class ``cls`` that touch a different class (4-adjacency).

    Returned in deterministic row-major scan order as (x, y) tuples; an
    absent class yields an empty list.
    """
    validate_mask(mask)
    coords = _region_boundary_coords(mask == cls)
    return [(int(x), int(y)) for x, y in coords]


def _conic_to_params(A, B, C, D, E, F):
    """Convert conic coefficients to (h, k, semi_major, semi_minor, theta)."""
    den = 4.0 * A * C - B * B
    if not np.isfinite(den) or den <= 0.0:
        raise DegenerateFit("conic is not an ellipse")
    h = (B * E - 2.0 * C * D) / den
    k = (B * D - 2.0 * A * E) / den
    fc = A * h * h + B * h * k + C * k * k + D * h + E * k + F
    if A < 0.0:
        A, B, C, fc = -A, -B, -C, -fc
    if fc >= 0.0:
        raise DegenerateFit("degenerate ellipse (zero or imaginary extent)")
    tr = A + C
    gap = np.hypot(A - C, B)
    l_big = 0.5 * (tr + gap)
    l_small = 0.5 * (tr - gap)
    if l_small <= 0.0:
        raise DegenerateFit("conic is not an ellipse")
    semi_major = np.sqrt(-fc / l_small)
    semi_minor = np.sqrt(-fc / l_big)
    # major-axis direction = eigenvector of the small eigenvalue
    v1 = (0.5 * B, l_small - A)
    v2 = (l_small - C, 0.5 * B)
    vx, vy = v1 if np.hypot(*v1) >= np.hypot(*v2) else v2
    theta = 0.0 if (vx == 0.0 and vy == 0.0) else float(np.arctan2(vy, vx))
    return h, k, semi_major, semi_minor, theta


def fit_ellipse(points) -> Ellipse:
    """Direct least-squares conic fit constrained to ellipses.

    Uses the numerically stable two-block formulation of the constrained
    eigenproblem on centered/scaled coordinates.  Points are sorted
    internally, so the result does not depend on input order.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be array-like of shape (N, 2)")
    if pts.shape[0] < 5:
        raise InsufficientPoints(f"ellipse fit needs >= 5 points, got {pts.shape[0]}")
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    mean = pts.mean(axis=0)
    centered = pts - mean
    scale = np.sqrt((centered**2).sum(axis=1).mean() / 2.0)
    if not scale > 0.0:
        raise DegenerateFit("all points coincide")
    x = centered[:, 0] / scale
    y = centered[:, 1] / scale

    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones_like(x)])
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    try:
        t = -np.linalg.solve(s3, s2.T)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFit("degenerate point configuration") from exc
    m = s1 + s2 @ t
    m = np.vstack([m[2] / 2.0, -m[1], m[0] / 2.0])
    try:
        evals, evecs = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFit("eigen decomposition failed") from exc

    a1 = None
    for i in range(3):
        if abs(evals[i].imag) > 1e-8 * (abs(evals[i].real) + 1.0):
            continue
        v = evecs[:, i].real
        if 4.0 * v[0] * v[2] - v[1] ** 2 > 0.0:
            a1 = v
            break
    if a1 is None:
        raise DegenerateFit("no ellipse solution (points may be collinear)")
    a2 = t @ a1

    h, k, major, minor, theta = _conic_to_params(a1[0], a1[1], a1[2], a2[0], a2[1], a2[2])
    return Ellipse(
        float(mean[0] + scale * h),
        float(mean[1] + scale * k),
        float(scale * major),
        float(scale * minor),
        theta,
    )


def fit_eye_ellipses(mask: SegMask) -> tuple[Ellipse, Ellipse]:
    """Fit the pupil ellipse and the limbus (outer iris) ellipse of a mask.

    The limbus is the outer boundary of the combined iris+pupil region,
    which is robust to the pupil hole in the iris class.
    """
    validate_mask(mask)
    pupil_pts = _region_boundary_coords(mask == PUPIL)
    iris_pts = _region_boundary_coords((mask == IRIS) | (mask == PUPIL))
    if pupil_pts.shape[0] < 5:
        raise InsufficientPoints(f"pupil boundary has {pupil_pts.shape[0]} points, need >= 5")
    if iris_pts.shape[0] < 5:
        raise InsufficientPoints(f"iris boundary has {iris_pts.shape[0]} points, need >= 5")
    pupil = fit_ellipse(pupil_pts)
    iris = fit_ellipse(iris_pts)
    if not iris.contains(pupil.h, pupil.k):
        raise GeometryInconsistent("pupil center lies outside the fitted iris ellipse")
    return pupil, iris


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Per-ray geometry of one eye, anchored at the pupil center.

    ``pupil_extent[j]`` / ``iris_extent[j]`` are the distances from the
    pupil center to the pupil and iris ellipse boundaries along ray j at
    angle 2*pi*j/n_theta.  ``visible_iris_runs[j]`` lists [start, end]
    distance intervals (1 px sampling) where the mask actually labels
    iris — extents follow the ellipse fits, visibility follows the mask,
    so occluders show up as truncated or missing runs.  R is the largest
    iris extent over all rays.
    """

    n_theta: int
    pupil_extent: np.ndarray
    iris_extent: np.ndarray
    visible_iris_runs: tuple
    R: float


def _bool_runs(flags: np.ndarray) -> tuple:
    """Inclusive (start, end) index runs of True values."""
    idx = np.flatnonzero(flags)
    if idx.size == 0:
        return ()
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    ends = np.concatenate([idx[breaks], [idx[-1]]])
    return tuple((int(s), int(e)) for s, e in zip(starts, ends))


def compute_radial_profile(
    mask: SegMask, pupil: Ellipse, iris: Ellipse, n_theta: int = 360
) -> RadialProfile:
    """Sample pupil/iris extents and iris visibility on n_theta rays."""
    validate_mask(mask)
    if n_theta < 8:
        raise ValueError(f"n_theta must be >= 8, got {n_theta}")
    phis = 2.0 * np.pi * np.arange(n_theta) / n_theta
    pupil_extent = ray_ellipse_distance(pupil, pupil.h, pupil.k, phis)
    iris_extent = ray_ellipse_distance(iris, pupil.h, pupil.k, phis)
    if np.any(iris_extent <= pupil_extent):
        raise GeometryInconsistent("iris extent does not exceed pupil extent on every ray")
    r_max = float(iris_extent.max())

    # 1 px steps out to R; nearest-pixel label lookup
    steps = np.arange(int(np.floor(r_max)) + 1, dtype=np.float64)
    xs = pupil.h + np.outer(np.cos(phis), steps)
    ys = pupil.k + np.outer(np.sin(phis), steps)
    xi = np.rint(xs).astype(np.intp)
    yi = np.rint(ys).astype(np.intp)
    h, w = mask.shape
    inb = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    labels_iris = np.zeros_like(inb)
    labels_iris[inb] = mask[yi[inb], xi[inb]] == IRIS
    runs = tuple(_bool_runs(labels_iris[j]) for j in range(n_theta))

    return RadialProfile(
        n_theta=n_theta,
        pupil_extent=pupil_extent,
        iris_extent=iris_extent,
        visible_iris_runs=runs,
        R=r_max,
    )
