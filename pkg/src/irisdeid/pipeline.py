"""End-to-end frame processing: dataset ingestion, per-frame synthesis of
the requested privacy modes, verification metrics, and report emission.

Frames and masks are 8-bit single-channel PNGs paired by filename stem;
masks store the raw class ids {0, 1, 2, 3}.
"""

from __future__ import annotations

import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import (
    AllGlint,
    ConfigError,
    DegenerateFit,
    EmptyRegion,
    GeometryInconsistent,
    InsufficientPoints,
    IrisDeidError,
    NoOverlap,
)
from .geometry import _region_boundary_coords, fit_ellipse, fit_eye_ellipses, compute_radial_profile
from .glint import detect_glints, restore_glints
from .image import GrayImage, SegMask, validate_image, validate_mask
from .iriscode import EncodingParams, encode, hamming
from .metrics import center_errors, iou, outlier_trimmed_mse
from .privacy import BlendParams, blend, median_iris
from .synth import corpus_specs, synth_eye, target_spec
from .synthesis import build_template, composite, match_histogram, render_iris

__all__ = [
    "MODES",
    "PipelineConfig",
    "FrameResult",
    "process_frame",
    "run_dataset",
    "write_corpus",
    "load_gray",
    "load_mask",
    "save_gray",
    "estimate_pupil_center",
]

MODES = ("generated", "blended", "median")

# Geometry/region failures skip the frame; anything else is a real bug.
_SKIPPABLE = (InsufficientPoints, DegenerateFit, GeometryInconsistent, EmptyRegion, AllGlint)


@dataclass
class PipelineConfig:
    source_dir: str | None = None
    mask_dir: str | None = None
    target_image: str | None = None
    target_mask: str | None = None
    out_dir: str | None = None
    modes: tuple = MODES
    n_r: int = 64
    n_theta: int = 360
    glint_threshold: int = 250
    glint_dilate: int = 1
    ring_width: int = 5
    encoding: EncodingParams = field(default_factory=EncodingParams)
    emit_metrics: bool = True
    trim_fraction: float = 0.05
    eval_mask_dir: str | None = None
    workers: int = 1

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(raw)
        if "modes" in kwargs:
            kwargs["modes"] = tuple(kwargs["modes"])
        if "encoding" in kwargs:
            try:
                kwargs["encoding"] = EncodingParams(**kwargs["encoding"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid encoding parameters: {exc}") from exc
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def validate(self) -> None:
        missing = [
            name
            for name in ("source_dir", "mask_dir", "target_image", "target_mask", "out_dir")
            if getattr(self, name) is None
        ]
        if missing:
            raise ConfigError(f"missing required config values: {missing}")
        if not self.modes:
            raise ConfigError("modes must be non-empty")
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise ConfigError(f"unknown modes {bad}; choose from {list(MODES)}")
        paths = [str(Path(p).resolve()) for p in (self.source_dir, self.mask_dir, self.out_dir)]
        if len(set(paths)) != len(paths):
            raise ConfigError("source_dir, mask_dir and out_dir must be distinct")
        if self.n_r < 2 or self.n_theta < 8:
            raise ConfigError(f"grid must be at least 2 x 8, got {self.n_r} x {self.n_theta}")
        if not 1 <= self.glint_threshold <= 255:
            raise ConfigError("glint_threshold must lie in [1, 255]")
        if self.glint_dilate < 0:
            raise ConfigError("glint_dilate must be >= 0")
        if self.ring_width <= 0:
            raise ConfigError("ring_width must be > 0")
        if not 0.0 <= self.trim_fraction < 0.5:
            raise ConfigError("trim_fraction must lie in [0, 0.5)")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


@dataclass
class FrameResult:
    frame_id: str
    status: str  # "ok" or "skipped(<Reason>)"
    outputs: dict = field(default_factory=dict)  # mode -> written path
    hd: dict = field(default_factory=dict)  # mode -> float or None
    pupil_center: dict = field(default_factory=dict)  # mode -> (x, y) or None
    gt_center: tuple | None = None  # mask-derived pupil center

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def load_gray(path) -> GrayImage:
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        return np.asarray(im, dtype=np.uint8)


def load_mask(path) -> SegMask:
    arr = load_gray(path)
    validate_mask(arr)
    return arr


def save_gray(path, img: GrayImage) -> None:
    validate_image(img)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(img, mode="L").save(path, format="PNG")


def estimate_pupil_center(img: GrayImage, dark_threshold: int = 40):
    """Pupil center re-detected from image intensities alone.

    Takes the largest dark connected component, fills interior holes
    (glints), and fits an ellipse to its boundary.  Returns (x, y) or
    None when no usable pupil is found.
    """
    dark = img <= dark_threshold
    if not dark.any():
        return None
    labels, count = ndimage.label(dark)
    if count < 1:
        return None
    sizes = ndimage.sum_labels(np.ones_like(labels), labels, index=np.arange(1, count + 1))
    blob = labels == (int(np.argmax(sizes)) + 1)
    blob = ndimage.binary_fill_holes(blob)
    pts = _region_boundary_coords(blob)
    try:
        e = fit_ellipse(pts)
    except IrisDeidError:
        return None
    return (e.h, e.k)


def _synthesize_modes(source, mask, target, target_mask, cfg: PipelineConfig) -> dict:
    """All requested output images for one frame, keyed by mode."""
    pupil, iris = fit_eye_ellipses(mask)
    profile = compute_radial_profile(mask, pupil, iris, cfg.n_theta)
    src_glints = detect_glints(source, mask, cfg.glint_threshold, cfg.glint_dilate)

    generated = None
    if "generated" in cfg.modes or "blended" in cfg.modes:
        t_pupil, t_iris = fit_eye_ellipses(target_mask)
        template = build_template(
            target,
            target_mask,
            profile,
            iris,
            t_iris.theta,
            cfg.n_r,
            cfg.n_theta,
            cfg.glint_threshold,
            cfg.glint_dilate,
        )
        layer = render_iris(template, profile, mask, pupil)
        layer = match_histogram(layer, source, mask, exclude=src_glints)
        generated = restore_glints(composite(source, layer), source, src_glints)

    outputs = {}
    for mode in cfg.modes:
        if mode == "generated":
            outputs[mode] = generated
        elif mode == "blended":
            out = blend(source, generated, mask, iris, pupil, BlendParams(cfg.ring_width))
            outputs[mode] = restore_glints(out, source, src_glints)
        elif mode == "median":
            out = median_iris(source, mask)
            outputs[mode] = restore_glints(out, source, src_glints)
    return outputs


def process_frame(
    source: GrayImage,
    mask: SegMask,
    target: GrayImage,
    target_mask: SegMask,
    cfg: PipelineConfig,
    frame_id: str = "frame",
) -> FrameResult:
    """Run the full de-identification chain on one frame.

    Writes one PNG per requested mode under ``out_dir/<mode>/`` and
    returns per-mode Hamming distances to the source plus re-detected
    pupil centers.  Geometry failures mark the frame skipped instead of
    raising.
    """
    validate_image(source)
    validate_mask(mask, source)
    validate_image(target)
    validate_mask(target_mask, target)

    result = FrameResult(frame_id=frame_id, status="ok")
    try:
        outputs = _synthesize_modes(source, mask, target, target_mask, cfg)
    except _SKIPPABLE as exc:
        result.status = f"skipped({type(exc).__name__})"
        return result

    out_root = Path(cfg.out_dir) if cfg.out_dir else None
    for mode, img in outputs.items():
        if out_root is not None:
            path = out_root / mode / f"{frame_id}.png"
            save_gray(path, img)
            result.outputs[mode] = str(path)

    if cfg.emit_metrics:
        pupil, iris = fit_eye_ellipses(mask)
        src_glints = detect_glints(source, mask, cfg.glint_threshold, cfg.glint_dilate)
        try:
            src_code = encode(source, mask, pupil, iris, cfg.encoding, src_glints)
        except (EmptyRegion, GeometryInconsistent):
            src_code = None
        for mode, img in outputs.items():
            hd_val = None
            if src_code is not None:
                try:
                    out_code = encode(img, mask, pupil, iris, cfg.encoding, src_glints)
                    hd_val, _ = hamming(src_code, out_code, cfg.encoding.shift_range)
                except (EmptyRegion, GeometryInconsistent, NoOverlap):
                    hd_val = None
            result.hd[mode] = hd_val
            result.pupil_center[mode] = estimate_pupil_center(img)
    return result


def _discover_frames(cfg: PipelineConfig) -> list[tuple[str, Path, Path]]:
    source_dir = Path(cfg.source_dir)
    mask_dir = Path(cfg.mask_dir)
    if not source_dir.is_dir():
        raise ConfigError(f"source_dir {source_dir} is not a directory")
    if not mask_dir.is_dir():
        raise ConfigError(f"mask_dir {mask_dir} is not a directory")
    frames = []
    for img_path in sorted(source_dir.glob("*.png")):
        stem = img_path.stem
        mask_path = mask_dir / img_path.name
        frames.append((stem, img_path, mask_path))
    return frames


def _fmt(value) -> str:
    return "" if value is None else f"{value:.6f}"


def _run_one(args):
    stem, img_path, mask_path, target, target_mask, cfg = args
    if not mask_path.is_file():
        return FrameResult(frame_id=stem, status="skipped(MissingMask)")
    source = load_gray(img_path)
    try:
        mask = load_mask(mask_path)
        validate_mask(mask, source)
    except (ValueError, IrisDeidError):
        return FrameResult(frame_id=stem, status="skipped(InvalidMask)")
    return process_frame(source, mask, target, target_mask, cfg, frame_id=stem)


def _mode_summary(cfg: PipelineConfig, results: list[FrameResult], mode: str) -> dict:
    ok = [r for r in results if r.ok]
    skipped = len(results) - len(ok)
    hds = [r.hd.get(mode) for r in ok if r.hd.get(mode) is not None]
    block = {
        "n": len(ok),
        "skipped": skipped,
        "hd_mean": float(np.mean(hds)) if hds else None,
        "hd_std": float(np.std(hds)) if hds else None,
        "mse_x": None,
        "mse_y": None,
        "r2_x": None,
        "r2_y": None,
    }
    pairs = [
        (r.pupil_center.get(mode), r.gt_center)
        for r in ok
        if r.gt_center is not None and r.pupil_center.get(mode) is not None
    ]
    if len(pairs) >= 2:
        pred = [p for p, _ in pairs]
        gt = [g for _, g in pairs]
        rep = center_errors(pred, gt)
        errs = np.asarray(pred, dtype=np.float64) - np.asarray(gt, dtype=np.float64)
        block["mse_x"] = outlier_trimmed_mse(errs[:, 0], cfg.trim_fraction)
        block["mse_y"] = outlier_trimmed_mse(errs[:, 1], cfg.trim_fraction)
        block["r2_x"] = rep.r2_x
        block["r2_y"] = rep.r2_y
    return block


def _sanitize(value):
    if isinstance(value, float):
        return round(value, 6) if np.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    return value


def run_dataset(cfg: PipelineConfig) -> dict:
    """Process every paired frame, write per-mode images, report.csv and
    summary.json, and return the summary dict.

    A bad frame is skipped with a reason; the batch never aborts for one.
    """
    cfg.validate()
    frames = _discover_frames(cfg)
    target = load_gray(cfg.target_image)
    target_mask = load_mask(cfg.target_mask)
    validate_mask(target_mask, target)
    try:
        fit_eye_ellipses(target_mask)
    except IrisDeidError as exc:
        raise ConfigError(f"target mask unusable: {exc}") from exc

    out_root = Path(cfg.out_dir)
    out_root.mkdir(parents=True, exist_ok=True)

    jobs = [(stem, ip, mp, target, target_mask, cfg) for stem, ip, mp in frames]
    if cfg.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    results.sort(key=lambda r: r.frame_id)

    # ground-truth pupil centers from the input masks
    mask_by_stem = {stem: mp for stem, _, mp in frames}
    for r in results:
        if r.ok and cfg.emit_metrics:
            try:
                gt_pupil, _ = fit_eye_ellipses(load_mask(mask_by_stem[r.frame_id]))
                r.gt_center = (gt_pupil.h, gt_pupil.k)
            except (ValueError, IrisDeidError):
                pass

    csv_path = out_root / "report.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame_id", "mode", "hd", "pupil_center_x", "pupil_center_y", "status"])
        for r in results:
            for mode in cfg.modes:
                center = r.pupil_center.get(mode)
                writer.writerow(
                    [
                        r.frame_id,
                        mode,
                        _fmt(r.hd.get(mode)),
                        _fmt(center[0] if center else None),
                        _fmt(center[1] if center else None),
                        r.status,
                    ]
                )

    summary = {mode: _mode_summary(cfg, results, mode) for mode in cfg.modes}
    if cfg.eval_mask_dir:
        summary_iou = _eval_mask_iou(cfg, results)
        for mode, block in summary.items():
            if mode in summary_iou:
                block["iou"] = summary_iou[mode]

    summary = _sanitize(summary)
    with open(out_root / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if not frames:
        print("warning: no frames found in source_dir", file=sys.stderr)
    return summary


def _eval_mask_iou(cfg: PipelineConfig, results: list[FrameResult]) -> dict:
    """Mean per-class IoU of supplied evaluation masks (one subdirectory
    per mode, paired by stem) against the input masks; per-image means."""
    root = Path(cfg.eval_mask_dir)
    mask_dir = Path(cfg.mask_dir)
    out = {}
    for mode in cfg.modes:
        mode_dir = root / mode
        if not mode_dir.is_dir():
            continue
        per_class_acc: dict = {}
        mious = []
        for r in results:
            pred_path = mode_dir / f"{r.frame_id}.png"
            gt_path = mask_dir / f"{r.frame_id}.png"
            if not (pred_path.is_file() and gt_path.is_file()):
                continue
            rep = iou(load_mask(pred_path), load_mask(gt_path))
            mious.append(rep.miou)
            for c, v in rep.per_class.items():
                per_class_acc.setdefault(c, []).append(v)
        if mious:
            out[mode] = {
                "miou": float(np.mean(mious)),
                "per_class": {str(c): float(np.mean(v)) for c, v in per_class_acc.items()},
                "n": len(mious),
            }
    return out


def write_corpus(out_dir, n_frames: int = 20, base_seed: int = 1234) -> PipelineConfig:
    """Generate the synthetic corpus and a config pointing at it."""
    root = Path(out_dir)
    frames_dir = root / "frames"
    masks_dir = root / "masks"
    frames_dir.mkdir(parents=True, exist_ok=True)
    masks_dir.mkdir(parents=True, exist_ok=True)
    for i, spec in enumerate(corpus_specs(n_frames, base_seed)):
        img, mask = synth_eye(spec)
        save_gray(frames_dir / f"{i:04d}.png", img)
        save_gray(masks_dir / f"{i:04d}.png", mask)
    t_img, t_mask = synth_eye(target_spec(base_seed))
    save_gray(root / "target.png", t_img)
    save_gray(root / "target_mask.png", t_mask)
    return PipelineConfig(
        source_dir=str(frames_dir),
        mask_dir=str(masks_dir),
        target_image=str(root / "target.png"),
        target_mask=str(root / "target_mask.png"),
        out_dir=None,
    )
