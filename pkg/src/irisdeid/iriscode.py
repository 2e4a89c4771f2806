"""Phase-quadrant iris codes and masked Hamming-distance matching.

Each normalized iris row is filtered with a 1D log-Gabor kernel
(circularly along the angular axis); the signs of the real and imaginary
responses give two bits per sample.  Matching counts disagreeing bits
over jointly usable samples, minimized over a small rotation search.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyRegion, NoOverlap
from .geometry import Ellipse
from .glint import GlintMask
from .image import IRIS, GrayImage, SegMask, validate_image, validate_mask
from .rubbersheet import UnwrappedIris, unwrap

__all__ = [
    "EncodingParams",
    "IrisCode",
    "encode",
    "encode_template",
    "hamming",
    "rotate_code_columns",
    "format_code",
    "parse_code",
]

# Responses this small carry no phase; the cell is masked out and its
# bits are forced to 0 so output never depends on the sign of noise.
ZERO_RESPONSE = 1e-12


@dataclass(frozen=True)
class EncodingParams:
    """Encoding grid and filter parameters (standard published defaults)."""

    enc_n_r: int = 20
    enc_n_theta: int = 240
    wavelength: float = 18.0
    sigma_over_f: float = 0.5
    shift_range: int = 8

    def __post_init__(self):
        if self.enc_n_r < 1:
            raise ValueError("enc_n_r must be >= 1")
        if self.enc_n_theta < 16:
            raise ValueError("enc_n_theta must be >= 16")
        if not self.wavelength > 2:
            raise ValueError("wavelength must be > 2")
        if not 0.0 < self.sigma_over_f < 1.0:
            raise ValueError("sigma_over_f must lie in (0, 1)")
        if self.shift_range < 0:
            raise ValueError("shift_range must be >= 0")


@dataclass(eq=False)
class IrisCode:
    """bits[r, c, 0/1]: sign bits of the real/imaginary response;
    mask[r, c]: 1 where the sample is usable."""

    bits: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.bits.ndim != 3 or self.bits.shape[2] != 2:
            raise ValueError("bits must have shape (rows, cols, 2)")
        if self.mask.shape != self.bits.shape[:2]:
            raise ValueError("mask shape must match bits")
        if self.rows < 1 or self.cols < 16:
            raise ValueError(f"code grid too small: {self.mask.shape}")

    @property
    def rows(self) -> int:
        return self.bits.shape[0]

    @property
    def cols(self) -> int:
        return self.bits.shape[1]


def _log_gabor_transfer(n: int, wavelength: float, sigma_over_f: float) -> np.ndarray:
    """One-sided log-Gabor transfer function over n frequency bins."""
    filt = np.zeros(n, dtype=np.float64)
    half = n // 2
    radius = np.arange(half + 1, dtype=np.float64) / half / 2.0
    radius[0] = 1.0  # silence the log at DC; the bin is zeroed below
    f0 = 1.0 / wavelength
    g = np.exp(-(np.log(radius / f0) ** 2) / (2.0 * np.log(sigma_over_f) ** 2))
    g[0] = 0.0
    filt[: half + 1] = g
    return filt


def _filter_rows(values: np.ndarray, params: EncodingParams) -> np.ndarray:
    """Complex log-Gabor response of each row, circular along the row."""
    filt = _log_gabor_transfer(values.shape[1], params.wavelength, params.sigma_over_f)
    return np.fft.ifft(np.fft.fft(values, axis=1) * filt[None, :], axis=1)


def encode_template(
    u: UnwrappedIris, sample_ok: np.ndarray | None, params: EncodingParams = EncodingParams()
) -> IrisCode:
    """Encode an already unwrapped texture.

    ``sample_ok`` holds extra per-sample usability (labeling, glints);
    invalid samples are filled with the row mean of the valid ones before
    filtering so they cannot inject edges, and stay masked out.
    """
    if u.n_theta != params.enc_n_theta or u.n_r != params.enc_n_r:
        raise ValueError(
            f"template grid {u.values.shape} does not match encoding grid "
            f"({params.enc_n_r}, {params.enc_n_theta})"
        )
    usable = u.valid if sample_ok is None else (u.valid & np.asarray(sample_ok, dtype=bool))

    values = u.values.copy()
    for r in range(u.n_r):
        good = usable[r]
        if good.all():
            continue
        fill = values[r, good].mean() if good.any() else 0.0
        values[r, ~good] = fill

    resp = _filter_rows(values, params)
    re = resp.real
    im = resp.imag
    bits = np.stack([re > ZERO_RESPONSE, im > ZERO_RESPONSE], axis=2)
    degenerate = (np.abs(re) <= ZERO_RESPONSE) & (np.abs(im) <= ZERO_RESPONSE)
    return IrisCode(bits, usable & ~degenerate)


def encode(
    img: GrayImage,
    mask: SegMask,
    pupil: Ellipse,
    iris: Ellipse,
    params: EncodingParams = EncodingParams(),
    glints: GlintMask | None = None,
) -> IrisCode:
    """Unwrap the iris annulus at the encoding grid and encode it.

    A sample is usable when it was taken inside the image, its nearest
    pixel is labeled iris, and it is not covered by the glint mask.
    """
    validate_image(img)
    validate_mask(mask, img)
    u = unwrap(img, pupil, iris, params.enc_n_r, params.enc_n_theta)

    h, w = mask.shape
    xi = np.rint(u.xs).astype(np.intp)
    yi = np.rint(u.ys).astype(np.intp)
    inb = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    xi = np.clip(xi, 0, w - 1)
    yi = np.clip(yi, 0, h - 1)
    sample_ok = inb & (mask[yi, xi] == IRIS)
    if glints is not None:
        sample_ok &= ~glints[yi, xi]

    code = encode_template(u, sample_ok, params)
    if code.mask.mean() < 0.10:
        raise EmptyRegion(
            f"only {code.mask.mean():.1%} of code samples usable (need >= 10%)"
        )
    return code


def rotate_code_columns(code: IrisCode, shift: int) -> IrisCode:
    """Cyclic angular shift of a code (same direction convention as
    rubber-sheet column rotation)."""
    s = int(shift)
    return IrisCode(np.roll(code.bits, s, axis=1), np.roll(code.mask, s, axis=1))


def hamming(a: IrisCode, b: IrisCode, shift_range: int = 8) -> tuple[float, int]:
    """Masked Hamming distance minimized over column shifts of ``b``.

    Shifts are tried in the order 0, -1, +1, -2, +2, ... and only a
    strictly smaller distance replaces the best, so ties resolve to the
    smallest |shift| and then to the negative one.
    """
    if a.bits.shape != b.bits.shape:
        raise DimensionMismatch(f"code dims differ: {a.bits.shape} vs {b.bits.shape}")
    best_hd = None
    best_shift = 0
    shifts = [0]
    for s in range(1, shift_range + 1):
        shifts.extend([-s, s])
    for s in shifts:
        mask_b = np.roll(b.mask, s, axis=1)
        bits_b = np.roll(b.bits, s, axis=1)
        joint = a.mask & mask_b
        n = int(joint.sum())
        if n == 0:
            continue
        differing = int(((a.bits != bits_b) & joint[:, :, None]).sum())
        hd = differing / (2.0 * n)
        if best_hd is None or hd < best_hd:
            best_hd = hd
            best_shift = s
    if best_hd is None:
        raise NoOverlap("codes share no usable bits at any shift")
    return best_hd, best_shift


def _pack_hex(flags: np.ndarray) -> str:
    return np.packbits(flags.astype(np.uint8)).tobytes().hex()


def _unpack_hex(text: str, n: int) -> np.ndarray:
    raw = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
    return np.unpackbits(raw)[:n].astype(bool)


def format_code(code: IrisCode) -> str:
    """Serialize a code: 'rows cols', then one hex line per bit row
    (real/imaginary interleaved), then one hex line per mask row."""
    lines = [f"{code.rows} {code.cols}"]
    for r in range(code.rows):
        lines.append(_pack_hex(code.bits[r].reshape(-1)))
    for r in range(code.rows):
        lines.append(_pack_hex(code.mask[r]))
    return "\n".join(lines) + "\n"


def parse_code(text: str) -> IrisCode:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    rows, cols = (int(v) for v in lines[0].split())
    if len(lines) != 1 + 2 * rows:
        raise ValueError(f"expected {1 + 2 * rows} lines, got {len(lines)}")
    bits = np.empty((rows, cols, 2), dtype=bool)
    mask = np.empty((rows, cols), dtype=bool)
    for r in range(rows):
        bits[r] = _unpack_hex(lines[1 + r], 2 * cols).reshape(cols, 2)
    for r in range(rows):
        mask[r] = _unpack_hex(lines[1 + rows + r], cols)
    return IrisCode(bits, mask)
