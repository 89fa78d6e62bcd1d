"""Generator/discriminator networks and per-scene adversarial training."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import zipfile
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable, Sequence as Seq

import numpy as np
import torch
from torch import nn

from ._io import npy_bytes, zip_write
from .errors import ParameterError, ShapeError, TrainingError

log = logging.getLogger(__name__)

PROB_EPS = 1e-7
FORMAT_VERSION = 1


@dataclass(frozen=True)
class GanArch:
    """Network geometry. ``feature_layer`` is the 1-based conv index used as l(.)."""

    image_size: int = 64
    channels: int = 3
    latent_dim: int = 100
    base_width: int = 64
    n_layers: int = 5
    feature_layer: int = 4
    batchnorm: bool = True

    def __post_init__(self):
        if self.n_layers < 2:
            raise ParameterError("n_layers must be at least 2")
        if self.image_size % (2 ** self.n_layers):
            raise ParameterError(f"image_size {self.image_size} not divisible by 2**{self.n_layers}")
        if not 1 <= self.feature_layer <= self.n_layers:
            raise ParameterError("feature_layer must index one of the conv layers")
        if self.latent_dim < 1 or self.base_width < 1 or self.channels < 1:
            raise ParameterError("latent_dim, base_width and channels must be positive")


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    latent_dim: int = 100
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 1:
            raise ParameterError("epochs must be >= 1")
        if not self.lr > 0:
            raise ParameterError("learning rate must be > 0")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ParameterError("Adam moment coefficients must lie in [0, 1)")


def _init_weights(m: nn.Module) -> None:
    if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
        nn.init.normal_(m.weight, 0.0, 0.02)
        if m.bias is not None:
            nn.init.zeros_(m.bias)
    elif isinstance(m, nn.BatchNorm2d):
        nn.init.normal_(m.weight, 1.0, 0.02)
        nn.init.zeros_(m.bias)


class Generator(nn.Module):
    def __init__(self, arch: GanArch):
        super().__init__()
        self.arch = arch
        n = arch.n_layers
        self.start_size = arch.image_size // 2 ** (n - 1)
        self.start_channels = arch.base_width * 2 ** (n - 2)
        self.project = nn.Linear(arch.latent_dim, self.start_channels * self.start_size ** 2)
        layers: list[nn.Module] = []
        if arch.batchnorm:
            layers.append(nn.BatchNorm2d(self.start_channels))
        layers.append(nn.ReLU(inplace=False))
        ch = self.start_channels
        for i in range(n - 1):
            last = i == n - 2
            out = arch.channels if last else ch // 2
            layers.append(nn.ConvTranspose2d(ch, out, 4, 2, 1, bias=last or not arch.batchnorm))
            if last:
                layers.append(nn.Tanh())
            else:
                if arch.batchnorm:
                    layers.append(nn.BatchNorm2d(out))
                layers.append(nn.ReLU(inplace=False))
            ch = out
        self.body = nn.Sequential(*layers)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        h = self.project(z).view(-1, self.start_channels, self.start_size, self.start_size)
        return self.body(h)


class Discriminator(nn.Module):
    """Strided conv stack with channel doubling and a two-class softmax head."""

    def __init__(self, arch: GanArch):
        super().__init__()
        self.arch = arch
        blocks = []
        ch_in = arch.channels
        for i in range(arch.n_layers):
            ch_out = arch.base_width * 2 ** i
            layers: list[nn.Module] = [nn.Conv2d(ch_in, ch_out, 4, 2, 1, bias=i == 0 or not arch.batchnorm)]
            if i > 0 and arch.batchnorm:
                layers.append(nn.BatchNorm2d(ch_out))
            layers.append(nn.LeakyReLU(0.2, inplace=False))
            blocks.append(nn.Sequential(*layers))
            ch_in = ch_out
        self.blocks = nn.ModuleList(blocks)
        final = arch.image_size // 2 ** arch.n_layers
        self.head = nn.Linear(ch_in * final * final, 2)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Return ``(logits, features)``; logits column 1 is the "real" class."""
        feats = None
        h = x
        for i, block in enumerate(self.blocks, start=1):
            h = block(h)
            if i == self.arch.feature_layer:
                feats = h
        return self.head(h.flatten(1)), feats

    def features(self, x: torch.Tensor) -> torch.Tensor:
        h = x
        for i, block in enumerate(self.blocks, start=1):
            h = block(h)
            if i == self.arch.feature_layer:
                return h
        raise AssertionError("unreachable")


def real_probability(logits: torch.Tensor) -> torch.Tensor:
    return torch.softmax(logits, dim=1)[:, 1]


# ---------------------------------------------------------------------------
# losses


def _as_tensor(p):
    if isinstance(p, torch.Tensor):
        return p, True
    return torch.as_tensor(p, dtype=torch.float64), False


def discriminator_loss(d_real, d_fake):
    """Negated discriminator objective ``-[log D(x) + log(1 - D(G(z)))]``, batch-averaged."""
    dr, is_t = _as_tensor(d_real)
    df, _ = _as_tensor(d_fake)
    dr = dr.clamp(PROB_EPS, 1 - PROB_EPS)
    df = df.clamp(PROB_EPS, 1 - PROB_EPS)
    loss = -(torch.log(dr) + torch.log1p(-df)).mean()
    return loss if is_t else float(loss)


def generator_loss(d_fake):
    """Non-saturating generator loss ``-log D(G(z))``, batch-averaged."""
    df, is_t = _as_tensor(d_fake)
    loss = -torch.log(df.clamp(PROB_EPS, 1 - PROB_EPS)).mean()
    return loss if is_t else float(loss)


# ---------------------------------------------------------------------------
# frame <-> tensor


def frames_to_tensor(frames, dtype=torch.float32) -> torch.Tensor:
    arr = np.asarray(frames, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[None]
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(0, 3, 1, 2))).to(dtype)


def tensor_to_frames(t: torch.Tensor) -> np.ndarray:
    return t.detach().cpu().numpy().transpose(0, 2, 3, 1).astype(np.float32)


def _check_frame(x: np.ndarray, arch: GanArch) -> None:
    expected = (arch.image_size, arch.image_size, arch.channels)
    if tuple(np.shape(x)) != expected:
        raise ShapeError(f"frame shape {tuple(np.shape(x))} does not match model input {expected}")


def generator_forward(g: Generator, z) -> np.ndarray:
    """Map one latent vector to an ``(H, W, C)`` frame in ``[-1, 1]``."""
    z = torch.as_tensor(np.asarray(z), dtype=next(g.parameters()).dtype)
    if z.ndim != 1 or z.shape[0] != g.arch.latent_dim:
        raise ShapeError(f"latent vector of shape {tuple(z.shape)}, expected ({g.arch.latent_dim},)")
    with torch.no_grad(), _eval_mode(g):
        out = g(z[None])
    return tensor_to_frames(out)[0]


def discriminator_forward(d: Discriminator, x: np.ndarray) -> tuple[float, np.ndarray]:
    """Return ``(real_probability, features)`` for one frame."""
    _check_frame(x, d.arch)
    with torch.no_grad(), _eval_mode(d):
        logits, feats = d(frames_to_tensor(x, next(d.parameters()).dtype))
    return float(real_probability(logits)[0]), feats[0].numpy()


class _eval_mode:
    """Temporarily switch modules to eval mode."""

    def __init__(self, *modules: nn.Module):
        self.modules = modules

    def __enter__(self):
        self.prev = [m.training for m in self.modules]
        for m in self.modules:
            m.eval()

    def __exit__(self, *exc):
        for m, was in zip(self.modules, self.prev):
            m.train(was)


def sample_latent(n: int, dim: int, generator: torch.Generator | None = None) -> torch.Tensor:
    """Uniform samples in ``[-1, 1]``."""
    return torch.rand(n, dim, generator=generator) * 2.0 - 1.0


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class Checkpoint:
    arch: GanArch
    config: TrainConfig
    generator_state: dict[str, np.ndarray]
    discriminator_state: dict[str, np.ndarray]
    modality: str = "rgb"
    scene: str = "default"
    epoch: int = 0
    loss_history: list[tuple[int, float, float]] = field(default_factory=list)

    def build_generator(self, dtype=torch.float32) -> Generator:
        g = Generator(self.arch)
        g.load_state_dict({k: torch.from_numpy(v.copy()) for k, v in self.generator_state.items()})
        return g.to(dtype).eval()

    def build_discriminator(self, dtype=torch.float32) -> Discriminator:
        d = Discriminator(self.arch)
        d.load_state_dict({k: torch.from_numpy(v.copy()) for k, v in self.discriminator_state.items()})
        return d.to(dtype).eval()

    @classmethod
    def from_networks(cls, g: Generator, d: Discriminator, config: TrainConfig, **kw) -> "Checkpoint":
        return cls(
            arch=g.arch,
            config=config,
            generator_state={k: v.detach().cpu().numpy().copy() for k, v in g.state_dict().items()},
            discriminator_state={k: v.detach().cpu().numpy().copy() for k, v in d.state_dict().items()},
            **kw,
        )

    def save(self, path: str | Path) -> None:
        """Write a self-describing zip archive; byte-identical for identical content."""
        meta = {
            "format_version": FORMAT_VERSION,
            "arch": asdict(self.arch),
            "config": asdict(self.config),
            "modality": self.modality,
            "scene": self.scene,
            "epoch": self.epoch,
            "loss_history": [list(r) for r in self.loss_history],
            "shapes": {
                f"{net}/{k}": list(v.shape)
                for net, state in (("generator", self.generator_state), ("discriminator", self.discriminator_state))
                for k, v in state.items()
            },
        }
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            zip_write(zf, "meta.json", json.dumps(meta, indent=2, sort_keys=True).encode())
            for net, state in (("generator", self.generator_state), ("discriminator", self.discriminator_state)):
                for k in sorted(state):
                    zip_write(zf, f"{net}/{k}.npy", npy_bytes(state[k]))

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read("meta.json"))
            if meta.get("format_version") != FORMAT_VERSION:
                raise ParameterError(f"unsupported checkpoint format {meta.get('format_version')}")
            states: dict[str, dict[str, np.ndarray]] = {"generator": {}, "discriminator": {}}
            for name in zf.namelist():
                if not name.endswith(".npy"):
                    continue
                net, key = name[:-4].split("/", 1)
                states[net][key] = np.lib.format.read_array(io.BytesIO(zf.read(name)), allow_pickle=False)
        return cls(
            arch=GanArch(**meta["arch"]),
            config=TrainConfig(**meta["config"]),
            generator_state=states["generator"],
            discriminator_state=states["discriminator"],
            modality=meta["modality"],
            scene=meta["scene"],
            epoch=meta["epoch"],
            loss_history=[tuple(r) for r in meta["loss_history"]],
        )


def write_loss_csv(path: str | Path, history: Seq[tuple[int, float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "d_loss", "g_loss"])
        for epoch, d_loss, g_loss in history:
            w.writerow([epoch, repr(float(d_loss)), repr(float(g_loss))])


# ---------------------------------------------------------------------------
# training


def build_networks(arch: GanArch, seed: int) -> tuple[Generator, Discriminator]:
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        g = Generator(arch)
        d = Discriminator(arch)
        g.apply(_init_weights)
        d.apply(_init_weights)
    return g, d


def train(
    data: Seq[np.ndarray],
    config: TrainConfig | None = None,
    arch: GanArch | None = None,
    modality: str = "rgb",
    scene: str = "default",
    on_epoch: Callable[[int, float, float], None] | None = None,
) -> Checkpoint:
    """Train G and D adversarially: one D update then one G update per batch."""
    config = config or TrainConfig()
    config.validate()
    if len(data) == 0:
        raise ParameterError("training data is empty")
    shape = np.shape(data[0])
    if any(np.shape(f) != shape for f in data):
        raise ShapeError("all training frames must share one shape")
    if len(shape) != 3 or shape[0] != shape[1]:
        raise ShapeError(f"training frames must be square (H, W, C), got {shape}")
    if arch is None:
        arch = GanArch(image_size=shape[0], channels=shape[2], latent_dim=config.latent_dim)
    elif arch.latent_dim != config.latent_dim:
        raise ParameterError("arch.latent_dim and config.latent_dim disagree")
    _check_frame(data[0], arch)

    x_all = frames_to_tensor(data)
    n = x_all.shape[0]
    g, d = build_networks(arch, config.seed)
    g.train()
    d.train()
    opt_g = torch.optim.Adam(g.parameters(), lr=config.lr, betas=(config.beta1, config.beta2))
    opt_d = torch.optim.Adam(d.parameters(), lr=config.lr, betas=(config.beta1, config.beta2))
    rng = torch.Generator().manual_seed(config.seed)

    history: list[tuple[int, float, float]] = []
    for epoch in range(1, config.epochs + 1):
        perm = torch.randperm(n, generator=rng)
        d_total = g_total = 0.0
        batches = 0
        for start in range(0, n, config.batch_size):
            real = x_all[perm[start:start + config.batch_size]]
            b = real.shape[0]
            z = sample_latent(b, arch.latent_dim, rng)

            opt_d.zero_grad(set_to_none=True)
            fake = g(z)
            p_real = real_probability(d(real)[0])
            p_fake = real_probability(d(fake.detach())[0])
            d_loss = discriminator_loss(p_real, p_fake)
            d_loss.backward()
            opt_d.step()

            opt_g.zero_grad(set_to_none=True)
            g_loss = generator_loss(real_probability(d(fake)[0]))
            g_loss.backward()
            opt_g.step()

            d_total += d_loss.item()
            g_total += g_loss.item()
            batches += 1
        d_mean, g_mean = d_total / batches, g_total / batches
        if not (math.isfinite(d_mean) and math.isfinite(g_mean)):
            raise TrainingError("training diverged: non-finite loss", epoch)
        history.append((epoch, d_mean, g_mean))
        log.debug("epoch %d d_loss %.4f g_loss %.4f", epoch, d_mean, g_mean)
        if on_epoch is not None:
            on_epoch(epoch, d_mean, g_mean)

    g.eval()
    d.eval()
    return Checkpoint.from_networks(
        g, d, config, modality=modality, scene=scene, epoch=config.epochs, loss_history=history
    )
