"""Latent-vector recovery by gradient steps on z with frozen networks."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence as Seq

import numpy as np
import torch

from .errors import InversionError, ParameterError, ShapeError
from .gan import Discriminator, Generator, _eval_mode, frames_to_tensor, generator_forward


@dataclass
class InversionConfig:
    steps: int = 2000
    step_size: float = 0.01
    eta: float = 0.1
    seed: int = 0
    restarts: int = 1
    optimizer: str = "adam"  # or "sgd"
    clamp: bool = True
    warm_start: bool = False
    converge_tol: float = 1e-3

    def validate(self) -> None:
        if self.steps < 1:
            raise ParameterError("steps must be >= 1")
        if not 0.0 <= self.eta <= 1.0:
            raise ParameterError(f"eta must lie in [0, 1], got {self.eta}")
        if not self.step_size > 0:
            raise ParameterError("step_size must be > 0")
        if self.restarts < 1:
            raise ParameterError("restarts must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ParameterError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class InversionResult:
    z: np.ndarray
    generated: np.ndarray
    trajectory: list[tuple[int, float, float, float]] = field(default_factory=list)
    converged: bool = False

    @property
    def loss(self) -> float:
        return min(t[3] for t in self.trajectory)


def residual_loss(x, gz):
    """Sum of absolute pixel differences between a frame and a generated frame."""
    if np.shape(x) != np.shape(gz):
        raise ShapeError(f"shape mismatch {np.shape(x)} vs {np.shape(gz)}")
    if isinstance(x, torch.Tensor) or isinstance(gz, torch.Tensor):
        return torch.sum(torch.abs(torch.as_tensor(x) - torch.as_tensor(gz)))
    return float(np.sum(np.abs(np.asarray(x, dtype=np.float64) - np.asarray(gz, dtype=np.float64))))


def feature_matching_loss(d: Discriminator, x, gz):
    """Sum of absolute differences of the discriminator's intermediate features."""
    if np.shape(x) != np.shape(gz):
        raise ShapeError(f"shape mismatch {np.shape(x)} vs {np.shape(gz)}")
    if isinstance(x, torch.Tensor):
        return torch.sum(torch.abs(d.features(x) - d.features(gz)))
    dtype = next(d.parameters()).dtype
    with torch.no_grad(), _eval_mode(d):
        fx = d.features(frames_to_tensor(x, dtype))
        fg = d.features(frames_to_tensor(gz, dtype))
    return float(torch.sum(torch.abs(fx - fg)))


def combined_loss(residual, feature, eta: float):
    if not 0.0 <= eta <= 1.0:
        raise ParameterError(f"eta must lie in [0, 1], got {eta}")
    if eta == 0.0:
        return residual
    if eta == 1.0:
        return feature
    return (1.0 - eta) * residual + eta * feature


def initial_latent(dim: int, seed: int, index: int = 0, restart: int = 0) -> np.ndarray:
    """Uniform ``[-1, 1]`` starting point, keyed by (seed, frame index, restart)."""
    rng = np.random.default_rng([seed, index, restart])
    return rng.uniform(-1.0, 1.0, size=dim)


def _per_sample_losses(g, d, x, z, eta):
    gz = g(z)
    res = torch.abs(x - gz).flatten(1).sum(1)
    if eta > 0.0:
        feat = torch.abs(d.features(x) - d.features(gz)).flatten(1).sum(1)
    else:
        feat = torch.zeros_like(res)
    return res, feat, combined_loss(res, feat, eta), gz


def invert_batch(
    g: Generator,
    d: Discriminator,
    xs: Seq[np.ndarray],
    config: InversionConfig,
    z0: np.ndarray | None = None,
    indices: Seq[int] | None = None,
) -> list[InversionResult]:
    """Invert several frames at once.

    Every frame owns its latent vector and Adam state (Adam is element-wise,
    and both networks run in eval mode), so a batched run gives each frame the
    same trajectory as inverting it alone.
    """
    config.validate()
    arch = g.arch
    expected = (arch.image_size, arch.image_size, arch.channels)
    for x in xs:
        if tuple(np.shape(x)) != expected:
            raise ShapeError(f"frame shape {tuple(np.shape(x))} does not match generator output {expected}")
    n = len(xs)
    indices = list(indices) if indices is not None else list(range(n))
    dtype = next(g.parameters()).dtype
    x_t = frames_to_tensor(xs, dtype)

    best: list[InversionResult | None] = [None] * n
    for restart in range(config.restarts):
        if z0 is not None and restart == 0:
            start = np.asarray(z0, dtype=np.float64).reshape(n, arch.latent_dim)
        else:
            start = np.stack([initial_latent(arch.latent_dim, config.seed, i, restart) for i in indices])
        results = _run(g, d, x_t, torch.as_tensor(start, dtype=dtype), config)
        for i, r in enumerate(results):
            if best[i] is None or r.loss < best[i].loss:
                best[i] = r
    return best  # type: ignore[return-value]


def _run(g, d, x_t, z_start, config) -> list[InversionResult]:
    n = x_t.shape[0]
    z = z_start.clone().requires_grad_(True)
    if config.optimizer == "adam":
        opt = torch.optim.Adam([z], lr=config.step_size)
    else:
        opt = torch.optim.SGD([z], lr=config.step_size)
    params = list(g.parameters()) + list(d.parameters())
    saved_flags = [p.requires_grad for p in params]
    for p in params:
        p.requires_grad_(False)

    trajectories: list[list[tuple[int, float, float, float]]] = [[] for _ in range(n)]
    best_loss = torch.full((n,), math.inf, dtype=torch.float64)
    best_z = z_start.clone()
    try:
        with _eval_mode(g, d):
            for step in range(config.steps):
                opt.zero_grad(set_to_none=True)
                res, feat, total, _ = _per_sample_losses(g, d, x_t, z, config.eta)
                if not torch.isfinite(total).all():
                    raise InversionError("non-finite inversion loss", step)
                r_np = res.detach().double().numpy()
                f_np = feat.detach().double().numpy()
                t_np = combined_loss(r_np, f_np, config.eta)
                for i in range(n):
                    trajectories[i].append((step, float(r_np[i]), float(f_np[i]), float(t_np[i])))
                improved = torch.from_numpy(t_np) < best_loss
                if improved.any():
                    best_loss = torch.where(improved, torch.from_numpy(t_np), best_loss)
                    best_z[improved] = z.detach()[improved]
                if step == config.steps - 1:
                    break
                total.sum().backward()
                opt.step()
                if config.clamp:
                    with torch.no_grad():
                        z.clamp_(-1.0, 1.0)
    finally:
        for p, flag in zip(params, saved_flags):
            p.requires_grad_(flag)

    out = []
    for i in range(n):
        traj = trajectories[i]
        z_i = best_z[i].double().numpy().copy()
        out.append(InversionResult(
            z=z_i,
            generated=generator_forward(g, best_z[i]),
            trajectory=traj,
            converged=_converged(traj, config.converge_tol),
        ))
    return out


def _converged(traj, tol: float) -> bool:
    """True when the final 5% of steps improved the best loss by less than ``tol`` (relative)."""
    totals = np.array([t[3] for t in traj])
    if totals.size < 2:
        return bool(totals.size and totals[0] == 0.0)
    tail = max(1, totals.size // 20)
    before = totals[:-tail].min()
    after = totals.min()
    return bool(before - after <= tol * max(abs(before), 1e-12))


def invert(
    g: Generator,
    d: Discriminator,
    x: np.ndarray,
    config: InversionConfig | None = None,
    z0: np.ndarray | None = None,
    index: int = 0,
) -> InversionResult:
    """Find the latent vector whose generated frame best matches ``x``.

    Only ``z`` is updated; the returned iterate is the lowest-loss one seen.
    """
    config = config or InversionConfig()
    return invert_batch(g, d, [x], config, None if z0 is None else np.asarray(z0)[None], [index])[0]


def write_trajectory_csv(path: str | Path, result: InversionResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "residual", "feature", "total"])
        for step, r, f, t in result.trajectory:
            w.writerow([step, repr(r), repr(f), repr(t)])
