"""Foreground segmentation pipeline: motion masking, background generation,
residual thresholding, depth denoising and RGB-D fusion."""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol, Sequence as Seq

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, ParameterError, ShapeError
from .flow import FlowEstimator, FlowField, MotionMask, complement, estimate_flow, motion_mask, resize_mask
from .gan import Checkpoint
from .inversion import InversionConfig, InversionResult, invert_batch

log = logging.getLogger(__name__)

_STRUCT = np.ones((3, 3), dtype=bool)


@dataclass
class ForegroundMap:
    residual: np.ndarray  # (H, W) float, >= 0


@dataclass
class SegmentationMask:
    mask: np.ndarray  # (H, W) uint8 in {0, 1}
    modality: str = "rgb"

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=np.uint8)
        if not np.isin(self.mask, (0, 1)).all():
            raise ParameterError("segmentation mask must be binary")
        if self.modality not in ("rgb", "depth", "fused"):
            raise ParameterError(f"unknown modality {self.modality!r}")


@dataclass
class ThresholdRule:
    """``kind`` is one of ``fixed`` (residual > tau), ``mean_std`` (> mean + k*std) or ``otsu``.

    The adaptive rules never go below ``floor``, which keeps sensor noise on an
    empty frame from being split in two.
    """

    kind: str = "mean_std"
    tau: float = 0.5
    k: float = 2.0
    floor: float = 0.05

    def __post_init__(self):
        if self.kind not in ("fixed", "mean_std", "otsu"):
            raise ParameterError(f"unknown threshold rule {self.kind!r}")
        if self.floor < 0 or self.tau < 0:
            raise ParameterError("threshold floor and tau must be non-negative")

    def threshold(self, residual: np.ndarray) -> float:
        if self.kind == "fixed":
            return self.tau
        return max(self._adaptive(residual), self.floor)

    def _adaptive(self, residual: np.ndarray) -> float:
        if self.kind == "mean_std":
            sd = float(residual.std())
            if sd == 0.0:
                warnings.warn("residual has zero spread; falling back to the fixed threshold", RuntimeWarning,
                              stacklevel=4)
                return self.tau
            return float(residual.mean()) + self.k * sd
        if residual.max() == residual.min():
            return float(residual.max())
        from skimage.filters import threshold_otsu

        return float(threshold_otsu(residual))


@dataclass
class PipelineConfig:
    rule: ThresholdRule = field(default_factory=ThresholdRule)
    reduction: str = "max"  # channel reduction: max | sum | mean
    morphology: bool = False
    inversion: InversionConfig = field(default_factory=InversionConfig)
    flow: str = "horn_schunck"
    batch_size: int = 32

    def __post_init__(self):
        if self.reduction not in ("max", "sum", "mean"):
            raise ParameterError(f"unknown channel reduction {self.reduction!r}")


# ---------------------------------------------------------------------------
# background models


class BackgroundModel(Protocol):
    modality: str

    def generate(self, xs: Seq[np.ndarray], indices: Seq[int]) -> list[tuple[np.ndarray, InversionResult | None]]:
        ...


class GanBackground:
    """Background synthesis by inverting a trained generator."""

    def __init__(self, checkpoint: Checkpoint, config: InversionConfig | None = None, batch_size: int = 32):
        self.checkpoint = checkpoint
        self.modality = checkpoint.modality
        self.config = config or InversionConfig()
        self.batch_size = batch_size
        self.g = checkpoint.build_generator()
        self.d = checkpoint.build_discriminator()

    def generate(self, xs, indices):
        if self.config.warm_start:
            out = []
            z_prev = None
            for x, i in zip(xs, indices):
                r = invert_batch(self.g, self.d, [x], self.config, None if z_prev is None else z_prev[None], [i])[0]
                z_prev = r.z
                out.append((r.generated, r))
            return out
        out = []
        for s in range(0, len(xs), self.batch_size):
            chunk = invert_batch(self.g, self.d, xs[s:s + self.batch_size], self.config,
                                 indices=indices[s:s + self.batch_size])
            out.extend((r.generated, r) for r in chunk)
        return out


class OracleBackground:
    """Returns the known true background; isolates the pipeline from GAN variance."""

    def __init__(self, modality: str, backgrounds: Seq[np.ndarray]):
        self.modality = modality
        self.backgrounds = backgrounds

    def generate(self, xs, indices):
        return [(np.asarray(self.backgrounds[i], dtype=np.float32), None) for i in indices]


def _require_modality(model: BackgroundModel, modality: str) -> None:
    if model.modality != modality:
        raise ConfigurationError(f"expected a {modality} model, got {model.modality}")


# ---------------------------------------------------------------------------
# per-frame steps


def suppress_foreground(x: np.ndarray, m: MotionMask) -> np.ndarray:
    """Zero the moving pixels of ``x`` (``m`` is 1 on static pixels)."""
    if m.mask.shape != x.shape[:2]:
        raise ShapeError(f"mask shape {m.mask.shape} does not match frame {x.shape[:2]}")
    return (x * m.mask[..., None]).astype(x.dtype)


def reduce_channels(diff: np.ndarray, how: str = "max") -> np.ndarray:
    if diff.ndim == 2:
        return diff
    if how == "max":
        return diff.max(axis=-1)
    if how == "sum":
        return diff.sum(axis=-1)
    if how == "mean":
        return diff.mean(axis=-1)
    raise ParameterError(f"unknown channel reduction {how!r}")


def cleanup(mask: np.ndarray) -> np.ndarray:
    """3x3 morphological opening followed by closing."""
    m = ndimage.binary_opening(mask.astype(bool), _STRUCT)
    m = ndimage.binary_closing(m, _STRUCT)
    return m.astype(np.uint8)


def extract_foreground(
    x: np.ndarray,
    background: np.ndarray,
    rule: ThresholdRule | None = None,
    reduction: str = "max",
    morphology: bool = False,
    modality: str = "rgb",
) -> tuple[ForegroundMap, SegmentationMask]:
    if np.shape(x) != np.shape(background):
        raise ShapeError(f"frame {np.shape(x)} and background {np.shape(background)} differ")
    rule = rule or ThresholdRule()
    diff = np.abs(np.asarray(x, dtype=np.float64) - np.asarray(background, dtype=np.float64))
    residual = reduce_channels(diff, reduction)
    mask = (residual > rule.threshold(residual)).astype(np.uint8)
    if morphology:
        mask = cleanup(mask)
    return ForegroundMap(residual), SegmentationMask(mask, modality)


def fuse(rgb: SegmentationMask, depth: SegmentationMask) -> SegmentationMask:
    """Pixel-wise addition of two binary masks, clamped to 1 (logical OR)."""
    if rgb.mask.shape != depth.mask.shape:
        raise ShapeError(f"mask shapes differ: {rgb.mask.shape} vs {depth.mask.shape}")
    return SegmentationMask(np.minimum(rgb.mask.astype(np.int16) + depth.mask, 1).astype(np.uint8), "fused")


def _flow_mask(prev, curr, estimator) -> tuple[FlowField, MotionMask]:
    f = estimate_flow(prev, curr, estimator)
    return f, motion_mask(f)


def segment_rgb(
    x: np.ndarray,
    prev: np.ndarray,
    model: BackgroundModel,
    cfg: PipelineConfig | None = None,
    index: int = 0,
    estimator: FlowEstimator | None = None,
) -> SegmentationMask:
    cfg = cfg or PipelineConfig()
    _require_modality(model, "rgb")
    _, m = _flow_mask(prev, x, estimator)
    m = resize_mask(m, x.shape[:2])
    bg, _ = model.generate([suppress_foreground(x, m)], [index])[0]
    return extract_foreground(x, bg, cfg.rule, cfg.reduction, cfg.morphology, "rgb")[1]


def segment_depth(
    x_d: np.ndarray,
    m: MotionMask,
    model: BackgroundModel,
    cfg: PipelineConfig | None = None,
    index: int = 0,
) -> SegmentationMask:
    cfg = cfg or PipelineConfig()
    _require_modality(model, "depth")
    bg, _ = model.generate([x_d], [index])[0]
    _, raw = extract_foreground(x_d, bg, cfg.rule, cfg.reduction, cfg.morphology, "depth")
    moving = resize_mask(complement(m), x_d.shape[:2])
    return SegmentationMask(raw.mask * moving.mask, "depth")


# ---------------------------------------------------------------------------
# sequence pipeline


@dataclass
class FrameOutput:
    """Everything computed for one frame, kept for inspection and figures."""

    index: int
    prev_index: int
    motion: MotionMask
    flow: FlowField
    masked_input: np.ndarray
    rgb_background: np.ndarray
    rgb_residual: np.ndarray
    rgb: SegmentationMask
    fused: SegmentationMask
    depth_background: np.ndarray | None = None
    depth_residual: np.ndarray | None = None
    depth_raw: SegmentationMask | None = None
    depth: SegmentationMask | None = None
    rgb_inversion: InversionResult | None = None
    depth_inversion: InversionResult | None = None


def previous_index(i: int, n: int) -> int:
    """Frame paired with ``i`` for flow; frame 0 pairs with frame 1."""
    if i > 0:
        return i - 1
    return 1 if n > 1 else 0


def run_pipeline(
    frames: Seq[np.ndarray],
    depth_frames: Seq[np.ndarray] | None,
    indices: Seq[int],
    rgb_model: BackgroundModel,
    depth_model: BackgroundModel | None = None,
    cfg: PipelineConfig | None = None,
    estimator: FlowEstimator | None = None,
    workers: int = 1,
) -> list[FrameOutput]:
    """Segment ``frames[i]`` for every ``i`` in ``indices``.

    Flow runs on a bounded thread pool; results come back in index order.
    """
    cfg = cfg or PipelineConfig()
    _require_modality(rgb_model, "rgb")
    if depth_model is not None:
        _require_modality(depth_model, "depth")
        if depth_frames is None:
            raise ConfigurationError("depth model given but the sequence has no depth frames")
    if estimator is None:
        from .flow import get_estimator

        estimator = get_estimator(cfg.flow)
    indices = list(indices)
    n = len(frames)
    pairs = [(previous_index(i, n), i) for i in indices]

    def job(pair):
        p, i = pair
        return _flow_mask(frames[p], frames[i], estimator)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            flows = list(pool.map(job, pairs))
    else:
        flows = [job(pair) for pair in pairs]

    masks = [resize_mask(m, frames[i].shape[:2]) for (_, m), i in zip(flows, indices)]
    masked = [suppress_foreground(frames[i], m) for i, m in zip(indices, masks)]
    rgb_bgs = rgb_model.generate(masked, indices)
    depth_bgs = depth_model.generate([depth_frames[i] for i in indices], indices) if depth_model else None

    outputs = []
    for k, i in enumerate(indices):
        fmap, rgb_mask = extract_foreground(frames[i], rgb_bgs[k][0], cfg.rule, cfg.reduction, cfg.morphology, "rgb")
        out = FrameOutput(
            index=i,
            prev_index=pairs[k][0],
            motion=masks[k],
            flow=flows[k][0],
            masked_input=masked[k],
            rgb_background=rgb_bgs[k][0],
            rgb_residual=fmap.residual,
            rgb=rgb_mask,
            fused=SegmentationMask(rgb_mask.mask.copy(), "fused"),
            rgb_inversion=rgb_bgs[k][1],
        )
        if depth_bgs is not None:
            dmap, draw = extract_foreground(depth_frames[i], depth_bgs[k][0], cfg.rule, cfg.reduction,
                                            cfg.morphology, "depth")
            moving = complement(masks[k])
            out.depth_background = depth_bgs[k][0]
            out.depth_residual = dmap.residual
            out.depth_raw = draw
            out.depth = SegmentationMask(draw.mask * moving.mask, "depth")
            out.depth_inversion = depth_bgs[k][1]
            out.fused = fuse(rgb_mask, out.depth)
        outputs.append(out)
    return outputs
