"""Dense optical flow and the mean-magnitude motion mask.

Flow is anchored at the current frame: ``curr(p) ~= prev(p - (u, v))``, so a
frame whose content moved right by one pixel has ``u = +1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import cv2
import numpy as np
from scipy.ndimage import convolve, correlate1d, gaussian_filter, map_coordinates

from .errors import DataError, ParameterError, ShapeError

STATIC_EPS = 1e-3

_HS_KERNEL = np.array([[1 / 12, 1 / 6, 1 / 12],
                       [1 / 6, 0.0, 1 / 6],
                       [1 / 12, 1 / 6, 1 / 12]])


@dataclass
class FlowField:
    u: np.ndarray  # horizontal, pixels/frame
    v: np.ndarray  # vertical, pixels/frame

    def __post_init__(self):
        if self.u.shape != self.v.shape:
            raise ShapeError("u and v must share one shape")

    @property
    def magnitude(self) -> np.ndarray:
        return np.sqrt(self.u.astype(np.float64) ** 2 + self.v.astype(np.float64) ** 2)


@dataclass
class MotionMask:
    mask: np.ndarray  # (H, W) uint8, 1 = static
    threshold_used: float

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=np.uint8)
        if not np.isin(self.mask, (0, 1)).all():
            raise ParameterError("motion mask must be binary")
        if self.threshold_used < 0:
            raise ParameterError("threshold must be non-negative")


class FlowEstimator(Protocol):
    def __call__(self, prev: np.ndarray, curr: np.ndarray) -> FlowField: ...


def to_gray(x: np.ndarray) -> np.ndarray:
    """Luma of a ``[-1, 1]`` frame, rescaled to 0..255."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        if x.shape[-1] == 3:
            x = x @ np.array([0.299, 0.587, 0.114])
        else:
            x = x.mean(axis=-1)
    return (x + 1.0) * 127.5


class PyramidalHornSchunck:
    """Coarse-to-fine Horn-Schunck with iterative warping at each level."""

    def __init__(self, levels: int = 3, alpha: float = 8.0, warps: int = 4,
                 iterations: int = 60, sigma: float = 1.0):
        if levels < 1 or warps < 1 or iterations < 1:
            raise ParameterError("levels, warps and iterations must be >= 1")
        self.levels = levels
        self.alpha = alpha
        self.warps = warps
        self.iterations = iterations
        self.sigma = sigma

    def __call__(self, prev: np.ndarray, curr: np.ndarray) -> FlowField:
        # solve prev(p + w) ~= curr(p), then report u = -w
        ref = gaussian_filter(to_gray(curr), self.sigma)
        tgt = gaussian_filter(to_gray(prev), self.sigma)
        pyr_ref, pyr_tgt = [ref], [tgt]
        for _ in range(self.levels - 1):
            if min(pyr_ref[-1].shape) < 8:
                break
            pyr_ref.append(cv2.pyrDown(pyr_ref[-1]))
            pyr_tgt.append(cv2.pyrDown(pyr_tgt[-1]))

        wu = np.zeros_like(pyr_ref[-1])
        wv = np.zeros_like(pyr_ref[-1])
        for level in range(len(pyr_ref) - 1, -1, -1):
            r, t = pyr_ref[level], pyr_tgt[level]
            if wu.shape != r.shape:
                wu = 2.0 * cv2.resize(wu, (r.shape[1], r.shape[0]), interpolation=cv2.INTER_LINEAR)
                wv = 2.0 * cv2.resize(wv, (r.shape[1], r.shape[0]), interpolation=cv2.INTER_LINEAR)
            for _ in range(self.warps):
                wu, wv = self._refine(r, t, wu, wv)
        return FlowField(u=(-wu).astype(np.float32), v=(-wv).astype(np.float32))

    def _refine(self, ref, tgt, wu, wv):
        h, w = ref.shape
        rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
        warped = map_coordinates(tgt, [rows + wv, cols + wu], order=1, mode="nearest")
        ix = 0.5 * (_grad(warped, 1) + _grad(ref, 1))
        iy = 0.5 * (_grad(warped, 0) + _grad(ref, 0))
        it = warped - ref
        denom = self.alpha ** 2 + ix ** 2 + iy ** 2
        u0, v0 = wu, wv
        u, v = wu.copy(), wv.copy()
        for _ in range(self.iterations):
            ub = convolve(u, _HS_KERNEL, mode="nearest")
            vb = convolve(v, _HS_KERNEL, mode="nearest")
            common = (ix * (ub - u0) + iy * (vb - v0) + it) / denom
            u = ub - ix * common
            v = vb - iy * common
        return u, v


def _grad(img: np.ndarray, axis: int) -> np.ndarray:
    return correlate1d(img, [-0.5, 0.0, 0.5], axis=axis, mode="nearest")


class FarnebackFlow:
    """OpenCV Farneback estimator behind the same interface."""

    def __init__(self, levels: int = 3, winsize: int = 9, iterations: int = 5):
        self.levels = levels
        self.winsize = winsize
        self.iterations = iterations

    def __call__(self, prev: np.ndarray, curr: np.ndarray) -> FlowField:
        a = np.clip(to_gray(curr), 0, 255).astype(np.uint8)
        b = np.clip(to_gray(prev), 0, 255).astype(np.uint8)
        f = cv2.calcOpticalFlowFarneback(a, b, None, 0.5, self.levels, self.winsize,
                                         self.iterations, 5, 1.1, 0)
        return FlowField(u=(-f[..., 0]).astype(np.float32), v=(-f[..., 1]).astype(np.float32))


ESTIMATORS: dict[str, Callable[[], FlowEstimator]] = {
    "horn_schunck": PyramidalHornSchunck,
    "farneback": FarnebackFlow,
}


def get_estimator(name: str) -> FlowEstimator:
    try:
        return ESTIMATORS[name]()
    except KeyError:
        raise ParameterError(f"unknown flow estimator {name!r}; choose from {sorted(ESTIMATORS)}") from None


def estimate_flow(prev: np.ndarray, curr: np.ndarray, estimator: FlowEstimator | None = None) -> FlowField:
    if np.shape(prev) != np.shape(curr):
        raise ShapeError(f"frame shapes differ: {np.shape(prev)} vs {np.shape(curr)}")
    estimator = estimator or PyramidalHornSchunck()
    return estimator(prev, curr)


def motion_mask(flow: FlowField, eps: float = STATIC_EPS) -> MotionMask:
    """Mark pixels whose flow magnitude is below the mean magnitude as static (1).

    When the mean magnitude is under ``eps`` the scene is treated as entirely
    static and every pixel is 1.
    """
    if not (np.isfinite(flow.u).all() and np.isfinite(flow.v).all()):
        raise DataError("flow field contains non-finite values")
    mag = flow.magnitude
    threshold = float(mag.mean())
    if threshold < eps:
        return MotionMask(np.ones(mag.shape, dtype=np.uint8), threshold)
    return MotionMask((mag < threshold).astype(np.uint8), threshold)


def apply_threshold(flow: FlowField, threshold: float, eps: float = STATIC_EPS) -> np.ndarray:
    """Re-apply the static/moving rule with a stored threshold."""
    mag = flow.magnitude
    if threshold < eps:
        return np.ones(mag.shape, dtype=np.uint8)
    return (mag < threshold).astype(np.uint8)


def complement(mask: MotionMask) -> MotionMask:
    return MotionMask(1 - mask.mask, mask.threshold_used)


def resize_mask(mask: MotionMask, size: tuple[int, int]) -> MotionMask:
    """Nearest-neighbour resize to ``(H, W)``."""
    if mask.mask.shape == tuple(size):
        return mask
    out = cv2.resize(mask.mask, (size[1], size[0]), interpolation=cv2.INTER_NEAREST)
    return MotionMask(out, mask.threshold_used)


def flow_to_color(flow: FlowField) -> np.ndarray:
    """HSV flow coding (hue = direction, value = magnitude) as an RGB uint8 image."""
    mag, ang = cv2.cartToPolar(flow.u.astype(np.float32), flow.v.astype(np.float32))
    hsv = np.zeros(flow.u.shape + (3,), dtype=np.uint8)
    hsv[..., 0] = (ang * 90 / np.pi).astype(np.uint8)
    hsv[..., 1] = 255
    peak = float(mag.max())
    hsv[..., 2] = np.clip(mag / peak * 255 if peak > 0 else 0 * mag, 0, 255).astype(np.uint8)
    return cv2.cvtColor(hsv, cv2.COLOR_HSV2RGB)
