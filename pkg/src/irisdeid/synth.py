"""Synthetic eye frames with exact ground-truth masks.

Used for dataset-free verification: frames carry a dark pupil, a
procedurally textured iris, a bright sclera, optional eyelid occlusion
and saturated glints, all deterministic for a given spec.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import InvalidSpec
from .geometry import Ellipse
from .image import BACKGROUND, IRIS, PUPIL, SCLERA

__all__ = ["SynthEyeSpec", "synth_eye", "corpus_specs", "target_spec", "TEXTURE_KINDS"]

TEXTURE_KINDS = ("bands", "noise-blobs", "smooth-gradient")


@dataclass(frozen=True)
class SynthEyeSpec:
    width: int
    height: int
    pupil: Ellipse
    iris: Ellipse
    texture_seed: int = 0
    texture_kind: str = "bands"
    occlusion: float = 0.0
    glints: tuple = ()
    glint_size: int = 1
    pupil_dilation: float = 1.0


def _validate(spec: SynthEyeSpec) -> Ellipse:
    """Check spec invariants; returns the dilated pupil ellipse."""
    if spec.width < 16 or spec.height < 16:
        raise InvalidSpec("frame must be at least 16 x 16")
    if spec.texture_kind not in TEXTURE_KINDS:
        raise InvalidSpec(f"unknown texture kind {spec.texture_kind!r}")
    if not 0.0 <= spec.occlusion <= 0.5:
        raise InvalidSpec("occlusion must lie in [0, 0.5]")
    if spec.pupil_dilation <= 0.0:
        raise InvalidSpec("pupil_dilation must be > 0")
    pupil = Ellipse(
        spec.pupil.h,
        spec.pupil.k,
        spec.pupil.a * spec.pupil_dilation,
        spec.pupil.b * spec.pupil_dilation,
        spec.pupil.theta,
    )
    ts = np.linspace(0.0, 2.0 * np.pi, 128, endpoint=False)
    ct, st = np.cos(pupil.theta), np.sin(pupil.theta)
    bx = pupil.h + pupil.a * np.cos(ts) * ct - pupil.b * np.sin(ts) * st
    by = pupil.k + pupil.a * np.cos(ts) * st + pupil.b * np.sin(ts) * ct
    if np.any(spec.iris.weight(bx, by) >= 1.0):
        raise InvalidSpec("pupil (after dilation) must lie strictly inside the iris")
    ct, st = np.cos(spec.iris.theta), np.sin(spec.iris.theta)
    ix = spec.iris.h + spec.iris.a * np.cos(ts) * ct - spec.iris.b * np.sin(ts) * st
    iy = spec.iris.k + spec.iris.a * np.cos(ts) * st + spec.iris.b * np.sin(ts) * ct
    if ix.min() < 1 or ix.max() > spec.width - 2 or iy.min() < 1 or iy.max() > spec.height - 2:
        raise InvalidSpec("iris must lie inside the frame with a 1 px margin")
    for gx, gy in spec.glints:
        s = spec.glint_size
        if gx - s < 0 or gx + s >= spec.width or gy - s < 0 or gy + s >= spec.height:
            raise InvalidSpec(f"glint at ({gx}, {gy}) leaves the frame")
    return pupil


def _iris_values(spec: SynthEyeSpec, rng, phi, rho, yy, xx):
    """Iris digital counts in [60, 200] at the given iris pixels."""
    if spec.texture_kind == "bands":
        v = np.full(phi.shape, 130.0)
        for _ in range(6):
            f = int(rng.integers(4, 29))
            g = int(rng.integers(2, 9))
            psi = rng.uniform(0.0, 2.0 * np.pi)
            xi = rng.uniform(0.0, 2.0 * np.pi)
            amp = rng.uniform(6.0, 14.0)
            v += amp * np.sin(f * phi + psi) * np.cos(g * np.pi * rho + xi)
        return np.clip(v, 60.0, 200.0)
    if spec.texture_kind == "noise-blobs":
        field = ndimage.gaussian_filter(
            rng.standard_normal((spec.height, spec.width)), sigma=2.5
        )
        # normalize over the iris samples themselves
        z = field[yy, xx]
        z = (z - z.mean()) / max(z.std(), 1e-9)
        return np.clip(130.0 + 35.0 * z, 60.0, 200.0)
    # smooth-gradient: slow radial + angular ramp, no fine structure
    return np.clip(90.0 + 70.0 * rho + 25.0 * rho * np.cos(phi), 60.0, 200.0)


def synth_eye(spec: SynthEyeSpec):
    """Render (image, mask) for a spec; identical bytes for identical specs."""
    pupil = _validate(spec)
    rng = np.random.default_rng(spec.texture_seed)
    h, w = spec.height, spec.width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)

    # eye opening: a large frame-centered ellipse holding the sclera
    opening = Ellipse(w / 2.0, h / 2.0, 0.47 * w, 0.45 * h, 0.0)
    in_open = opening.weight(xs, ys) <= 1.0
    w_iris = spec.iris.weight(xs, ys)
    in_iris = w_iris <= 1.0
    in_pupil = pupil.weight(xs, ys) < 1.0

    mask = np.full((h, w), BACKGROUND, dtype=np.uint8)
    mask[in_open] = SCLERA
    mask[in_iris] = IRIS
    mask[in_pupil] = PUPIL

    img = np.empty((h, w), dtype=np.float64)
    img[:] = 100.0 + 8.0 * np.sin(2.0 * np.pi * xs / w) * np.cos(np.pi * ys / h)
    sclera_field = np.clip(
        200.0
        + 12.0 * np.sin(2.0 * np.pi * xs / w + 1.3) * np.cos(2.0 * np.pi * ys / h)
        + rng.normal(0.0, 3.0, (h, w)),
        180.0,
        220.0,
    )
    img[in_open] = sclera_field[in_open]

    sel = mask == IRIS
    yy, xx = np.nonzero(sel)
    phi = np.arctan2(yy - spec.iris.k, xx - spec.iris.h) % (2.0 * np.pi)
    rho = np.sqrt(w_iris[sel])
    img[sel] = _iris_values(spec, rng, phi, rho, yy, xx)

    psel = mask == PUPIL
    img[psel] = 8.0 + 10.0 * pupil.weight(xs[psel], ys[psel])

    if spec.occlusion > 0.0:
        # eyelid covers the top fraction of the iris's vertical span
        ct, st = np.cos(spec.iris.theta), np.sin(spec.iris.theta)
        half_span = np.hypot(spec.iris.a * st, spec.iris.b * ct)
        y_lid = (spec.iris.k - half_span) + spec.occlusion * 2.0 * half_span
        lid = (ys < y_lid) & (mask == IRIS)
        mask[lid] = SCLERA
        img[lid] = sclera_field[lid]

    out = np.clip(img, 0.0, 255.0).astype(np.uint8)
    s = spec.glint_size
    for gx, gy in spec.glints:
        out[gy - s : gy + s + 1, gx - s : gx + s + 1] = 255
    return out, mask


def corpus_specs(n_frames: int, base_seed: int = 1234, width: int = 160, height: int = 120):
    """Deterministic varied source-eye specs for the verification corpus."""
    if n_frames < 1:
        raise InvalidSpec("corpus needs at least one frame")
    rng = np.random.default_rng(base_seed)
    occ_cycle = (0.0, 0.0, 0.15, 0.0, 0.22)
    specs = []
    for i in range(n_frames):
        cx = width / 2.0 + rng.uniform(-6.0, 6.0)
        cy = height / 2.0 + rng.uniform(-5.0, 5.0)
        iris_a = rng.uniform(30.0, 36.0)
        iris_b = iris_a * rng.uniform(0.88, 1.0)
        iris = Ellipse(cx, cy, iris_a, iris_b, rng.uniform(-0.5, 0.5))
        scale = rng.uniform(0.34, 0.48)
        pupil = Ellipse(
            cx + rng.uniform(-2.5, 2.5),
            cy + rng.uniform(-2.5, 2.5),
            iris_a * scale,
            iris_b * scale * rng.uniform(0.9, 1.05),
            rng.uniform(-0.5, 0.5),
        )
        # two glints in the lower iris half, clear of pupil rim and eyelid
        r_mid = 0.5 * (pupil.a + iris_a)
        glints = tuple(
            (int(round(cx + r_mid * np.cos(ang))), int(round(cy + r_mid * np.sin(ang))))
            for ang in (0.9, 2.2)
        )
        specs.append(
            SynthEyeSpec(
                width=width,
                height=height,
                pupil=pupil,
                iris=iris,
                texture_seed=int(rng.integers(0, 2**31)),
                texture_kind="bands" if i % 2 == 0 else "noise-blobs",
                occlusion=occ_cycle[i % len(occ_cycle)],
                glints=glints,
                pupil_dilation=rng.uniform(0.85, 1.2),
            )
        )
    return specs


def target_spec(base_seed: int = 1234, width: int = 160, height: int = 120) -> SynthEyeSpec:
    """Donor-eye spec: independent texture, mild rotation, its own glints."""
    cx, cy = width / 2.0, height / 2.0
    iris = Ellipse(cx, cy, 34.0, 31.5, 0.25)
    pupil = Ellipse(cx + 1.0, cy - 1.0, 13.0, 12.0, 0.1)
    glints = (
        (int(cx + 20), int(cy + 8)),
        (int(cx - 16), int(cy + 12)),
    )
    return SynthEyeSpec(
        width=width,
        height=height,
        pupil=pupil,
        iris=iris,
        texture_seed=base_seed * 7919 + 13,
        texture_kind="bands",
        glints=glints,
    )
