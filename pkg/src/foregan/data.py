"""RGB-D sequence loading, augmentation and synthetic scene generation.

Frames are ``float32`` arrays of shape ``(H, W, C)`` with values in ``[-1, 1]``.
Depth frames are replicated to three channels so that one network
architecture serves both modalities.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Sequence as Seq

import cv2
import numpy as np

from .errors import LoadError, ParameterError, StructuralError

BACKGROUND = 0
FOREGROUND = 1
IGNORE = 2
LABEL_NAMES = {"background": BACKGROUND, "foreground": FOREGROUND, "ignore": IGNORE}

FRAME_PATTERN = re.compile(r"^frame_(\d{6})\.png$")


def frame_filename(index: int) -> str:
    return f"frame_{index:06d}.png"


# ---------------------------------------------------------------------------
# value conversions


def normalize(img: np.ndarray) -> np.ndarray:
    """Map 8-bit pixel values to ``[-1, 1]``."""
    return (img.astype(np.float32) / np.float32(127.5) - np.float32(1.0)).astype(np.float32)


def denormalize(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`normalize`, rounding to the nearest 8-bit value."""
    return np.clip(np.rint((np.asarray(x, dtype=np.float64) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def normalize_depth16(raw: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Min-max normalize 16-bit depth; the invalid sentinel 0 maps to -1."""
    raw = raw.astype(np.float64)
    span = max(hi - lo, 1.0)
    out = 2.0 * (raw - lo) / span - 1.0
    out = np.clip(out, -1.0, 1.0)
    out[raw == 0] = -1.0
    return out.astype(np.float32)


def depth_range(raws: Iterable[np.ndarray]) -> tuple[float, float]:
    """Sequence-wide (min, max) over valid (non-zero) depth readings."""
    lo, hi = np.inf, -np.inf
    for r in raws:
        valid = r[r > 0]
        if valid.size:
            lo = min(lo, float(valid.min()))
            hi = max(hi, float(valid.max()))
    if not np.isfinite(lo):
        return 0.0, 1.0
    return lo, hi


def to_three_channels(x: np.ndarray) -> np.ndarray:
    if x.ndim == 2:
        x = x[..., None]
    if x.shape[-1] == 1:
        x = np.repeat(x, 3, axis=-1)
    return x


def resize_image(x: np.ndarray, size: int) -> np.ndarray:
    """Area-average resize to ``size x size``; no-op when already that size."""
    if x.shape[0] == size and x.shape[1] == size:
        return x
    out = cv2.resize(x, (size, size), interpolation=cv2.INTER_AREA)
    if out.ndim == 2 and x.ndim == 3:
        out = out[..., None]
    return out


def resize_labels(x: np.ndarray, size: int) -> np.ndarray:
    if x.shape[0] == size and x.shape[1] == size:
        return x
    return cv2.resize(x, (size, size), interpolation=cv2.INTER_NEAREST)


# ---------------------------------------------------------------------------
# domain types


@dataclass
class GroundTruthFrame:
    labels: np.ndarray  # (H, W) uint8 in {BACKGROUND, FOREGROUND, IGNORE}

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.labels.ndim != 2:
            raise ParameterError("ground truth labels must be a 2-D array")
        if not np.isin(self.labels, (BACKGROUND, FOREGROUND, IGNORE)).all():
            raise ParameterError("ground truth contains values outside the label set")

    @property
    def foreground(self) -> np.ndarray:
        return self.labels == FOREGROUND

    @property
    def ignore(self) -> np.ndarray:
        return self.labels == IGNORE


@dataclass
class Sequence:
    """An RGB-D video with optional ground truth.

    ``gt[i]`` is ``None`` for frames that carry no ground truth (these are the
    frames usable for training). ``background_rgb``/``background_depth`` hold
    the true background for synthetic scenes and are what the oracle
    generator returns.
    """

    frames: list[np.ndarray]
    depth_frames: list[np.ndarray] | None = None
    gt: list[GroundTruthFrame | None] | None = None
    background_only_indices: set[int] = field(default_factory=set)
    name: str = "sequence"
    category: str = "default"
    depth_bit_depth: int = 16
    background_rgb: list[np.ndarray] | None = None
    background_depth: list[np.ndarray] | None = None
    raw: dict | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.frames)
        for label, lst in (("depth_frames", self.depth_frames), ("gt", self.gt),
                           ("background_rgb", self.background_rgb),
                           ("background_depth", self.background_depth)):
            if lst is not None and len(lst) != n:
                raise StructuralError(f"{label} has {len(lst)} entries, expected {n}")
        bad = [i for i in self.background_only_indices if not 0 <= i < n]
        if bad:
            raise StructuralError(f"background_only_indices out of range: {sorted(bad)}")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def gt_indices(self) -> list[int]:
        if self.gt is None:
            return []
        return [i for i, g in enumerate(self.gt) if g is not None]


@dataclass
class DatasetSpec:
    root: str
    rgb_dir: str = "rgb"
    depth_dir: str = "depth"
    gt_dir: str = "gt"
    label_map: dict[int, str] = field(default_factory=lambda: {0: "background", 255: "foreground"})
    default_label: str = "ignore"
    image_size: int = 64
    meta_file: str = "meta.json"
    sequences: dict[str, str] = field(default_factory=dict)  # name -> category

    def __post_init__(self):
        self.label_map = {int(k): v for k, v in self.label_map.items()}
        for v in list(self.label_map.values()) + [self.default_label]:
            if v not in LABEL_NAMES:
                raise ParameterError(f"unknown label name {v!r}")

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "DatasetSpec":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise LoadError(f"cannot read dataset spec {path}: {exc}") from exc
        spec = cls(**doc)
        if not os.path.isabs(spec.root):
            spec.root = str((path.parent / spec.root).resolve())
        return spec

    def to_json(self, path: str | os.PathLike) -> None:
        doc = asdict(self)
        doc["label_map"] = {str(k): v for k, v in sorted(self.label_map.items())}
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def decode_labels(self, raw: np.ndarray) -> GroundTruthFrame:
        labels = np.full(raw.shape, LABEL_NAMES[self.default_label], dtype=np.uint8)
        for value, name in self.label_map.items():
            labels[raw == value] = LABEL_NAMES[name]
        return GroundTruthFrame(labels)

    def category_of(self, name: str) -> str:
        return self.sequences.get(name, "default")


# ---------------------------------------------------------------------------
# loading


def _list_frames(directory: Path) -> dict[int, Path]:
    out = {}
    for p in sorted(directory.iterdir()):
        m = FRAME_PATTERN.match(p.name)
        if m:
            out[int(m.group(1))] = p
    return out


def _imread(path: Path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise LoadError(f"cannot decode image {path}")
    return img


def read_rgb(path: Path) -> np.ndarray:
    img = _imread(path)
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=-1)
    elif img.shape[-1] == 4:
        img = img[..., :3]
    return img[..., ::-1].copy()


def write_rgb(path: Path, img: np.ndarray) -> None:
    cv2.imwrite(str(path), np.ascontiguousarray(img[..., ::-1]))


def write_mask(path: Path, mask: np.ndarray) -> None:
    """Write a binary mask as an 8-bit PNG with values {0, 255}."""
    cv2.imwrite(str(path), (np.asarray(mask) > 0).astype(np.uint8) * 255)


def read_mask(path: Path) -> np.ndarray:
    return (_imread(path) > 127).astype(np.uint8)


def load_sequence(spec: DatasetSpec, sequence_name: str) -> Sequence:
    base = Path(spec.root) / sequence_name
    rgb_dir = base / spec.rgb_dir
    if not rgb_dir.is_dir():
        raise LoadError(f"missing RGB directory {rgb_dir}")
    rgb_files = _list_frames(rgb_dir)
    if not rgb_files:
        raise LoadError(f"no RGB frames in {rgb_dir}")
    indices = sorted(rgb_files)
    if indices != list(range(len(indices))):
        missing = sorted(set(range(indices[-1] + 1)) - set(indices))
        raise StructuralError(f"RGB frames are not contiguous; missing {frame_filename(missing[0])}")
    size = spec.image_size

    frames = [resize_image(normalize(read_rgb(rgb_files[i])), size) for i in indices]

    depth_frames = None
    bit_depth = 16
    depth_lo_hi = None
    depth_dir = base / spec.depth_dir
    if depth_dir.is_dir():
        depth_files = _list_frames(depth_dir)
        _check_parallel(depth_files, rgb_files, depth_dir)
        raws = [_imread(depth_files[i]) for i in indices]
        raws = [r[..., 0] if r.ndim == 3 else r for r in raws]
        bit_depth = 16 if raws[0].dtype == np.uint16 else 8
        if bit_depth == 16:
            depth_lo_hi = depth_range(raws)
            depth_frames = [_depth_to_frame(normalize_depth16(r, *depth_lo_hi), size) for r in raws]
        else:
            depth_frames = [_depth_to_frame(normalize(r), size) for r in raws]

    gt = None
    gt_dir = base / spec.gt_dir
    if gt_dir.is_dir():
        gt_files = _list_frames(gt_dir)
        orphans = sorted(set(gt_files) - set(rgb_files))
        if orphans:
            raise StructuralError(f"ground truth {gt_files[orphans[0]]} has no matching RGB frame")
        gt = [None] * len(indices)
        for i, p in gt_files.items():
            raw = _imread(p)
            if raw.ndim == 3:
                raw = raw[..., 0]
            gt[i] = spec.decode_labels(resize_labels(raw, size))

    meta = _read_meta(base / spec.meta_file)
    bg_only = {int(i) for i in meta.get("background_only_indices", [])}
    category = meta.get("category", spec.category_of(sequence_name))

    background_rgb = background_depth = None
    bg_rgb_dir = base / "background_rgb"
    if bg_rgb_dir.is_dir():
        files = _list_frames(bg_rgb_dir)
        _check_parallel(files, rgb_files, bg_rgb_dir)
        background_rgb = [resize_image(normalize(read_rgb(files[i])), size) for i in indices]
    bg_depth_dir = base / "background_depth"
    if bg_depth_dir.is_dir() and depth_frames is not None:
        files = _list_frames(bg_depth_dir)
        _check_parallel(files, rgb_files, bg_depth_dir)
        background_depth = []
        for i in indices:
            r = _imread(files[i])
            r = r[..., 0] if r.ndim == 3 else r
            norm = normalize_depth16(r, *depth_lo_hi) if bit_depth == 16 else normalize(r)
            background_depth.append(_depth_to_frame(norm, size))

    return Sequence(
        frames=frames,
        depth_frames=depth_frames,
        gt=gt,
        background_only_indices=bg_only,
        name=sequence_name,
        category=category,
        depth_bit_depth=bit_depth,
        background_rgb=background_rgb,
        background_depth=background_depth,
    )


def _depth_to_frame(x: np.ndarray, size: int) -> np.ndarray:
    return to_three_channels(resize_image(x, size)).astype(np.float32)


def _check_parallel(files: dict[int, Path], rgb_files: dict[int, Path], directory: Path) -> None:
    extra = sorted(set(files) - set(rgb_files))
    if extra:
        raise StructuralError(f"{files[extra[0]]} has no matching RGB frame")
    missing = sorted(set(rgb_files) - set(files))
    if missing:
        raise StructuralError(
            f"{directory / frame_filename(missing[0])} is missing "
            f"({len(files)} files for {len(rgb_files)} RGB frames)"
        )


def _read_meta(path: Path) -> dict:
    if not path.is_file():
        return {}
    return json.loads(path.read_text())


# ---------------------------------------------------------------------------
# augmentation


@dataclass
class AugmentConfig:
    """Each translation ``(dx, dy)`` and each rotation angle is one transform."""

    translations: list[tuple[int, int]] = field(default_factory=lambda: [(2, 0), (-2, 0), (0, 2), (0, -2)])
    rotations: list[float] = field(default_factory=lambda: [-5.0, 5.0])

    @property
    def n_transforms(self) -> int:
        return len(self.translations) + len(self.rotations)


def translate(x: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Shift content by ``dx`` columns and ``dy`` rows, replicating edges."""
    h, w = x.shape[:2]
    if abs(dx) >= w or abs(dy) >= h:
        raise ParameterError(f"translation ({dx}, {dy}) exceeds image extent {w}x{h}")
    rows = np.clip(np.arange(h) - dy, 0, h - 1)
    cols = np.clip(np.arange(w) - dx, 0, w - 1)
    return x[rows][:, cols].copy()


def rotate(x: np.ndarray, degrees: float) -> np.ndarray:
    if degrees == 0:
        return x.copy()
    h, w = x.shape[:2]
    mat = cv2.getRotationMatrix2D(((w - 1) / 2.0, (h - 1) / 2.0), degrees, 1.0)
    out = cv2.warpAffine(x, mat, (w, h), flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_REFLECT_101)
    if out.ndim == 2 and x.ndim == 3:
        out = out[..., None]
    return np.clip(out, -1.0, 1.0).astype(x.dtype)


def augment(frames: Seq[np.ndarray], config: AugmentConfig | None = None) -> list[np.ndarray]:
    """Return the originals followed by one translated/rotated copy per transform."""
    if not frames:
        raise ParameterError("augment needs at least one frame")
    config = config or AugmentConfig()
    h, w = frames[0].shape[:2]
    for dx, dy in config.translations:
        if abs(dx) >= w or abs(dy) >= h:
            raise ParameterError(f"translation ({dx}, {dy}) exceeds image extent {w}x{h}")
    out = [f.copy() for f in frames]
    for dx, dy in config.translations:
        out.extend(translate(f, dx, dy) for f in frames)
    for angle in config.rotations:
        out.extend(rotate(f, angle) for f in frames)
    return out


# ---------------------------------------------------------------------------
# synthetic scenes


@dataclass
class SceneParams:
    """Parameters of a synthetic static-camera RGB-D scene with one moving box.

    Positions are ``(row, col)`` of the box's top-left corner at frame
    ``enter_frame``; the box is absent before that frame and from
    ``exit_frame`` on. With ``bounce`` the box reflects off the frame borders,
    otherwise it may leave the frame. Depth values are in sensor units
    (millimetres) and written as 16-bit.
    """

    size: int = 64
    n_frames: int = 100
    object_size: tuple[int, int] = (10, 10)
    enter_frame: int = 5
    exit_frame: int | None = None
    start: tuple[float, float] = (20.0, 4.0)
    velocity: tuple[float, float] = (0.5, 1.5)
    bounce: bool = True
    object_color: tuple[int, int, int] = (220, 40, 40)
    object_texture: float = 12.0
    object_depth: int = 1500
    wall_depth: tuple[int, int] = (3000, 3600)  # top row, bottom row
    texture_contrast: float = 40.0
    shadow: bool = False
    shadow_offset: tuple[int, int] = (3, 3)
    shadow_strength: float = 0.8
    color_camouflage: bool = False
    depth_camouflage: bool = False
    out_of_range: tuple[int, int, int, int] | None = None  # row0, row1, col0, col1
    rgb_noise: float = 1.5
    depth_noise: float = 4.0
    gt_on_background_frames: bool = False
    name: str = "synthetic"
    category: str = "synthetic"

    def validate(self) -> None:
        if self.size < 8:
            raise ParameterError("size must be at least 8")
        if self.n_frames < 1:
            raise ParameterError("n_frames must be positive")
        oh, ow = self.object_size
        if not (1 <= oh <= self.size and 1 <= ow <= self.size):
            raise ParameterError("object_size must fit inside the frame")
        if not 0 <= self.enter_frame:
            raise ParameterError("enter_frame must be non-negative")
        if self.exit_frame is not None and self.exit_frame <= self.enter_frame:
            raise ParameterError("exit_frame must come after enter_frame")
        if not 0.0 < self.shadow_strength <= 1.0:
            raise ParameterError("shadow_strength must be in (0, 1]")
        if self.wall_depth[0] <= 0 or self.wall_depth[1] <= 0 or self.object_depth <= 0:
            raise ParameterError("depths must be positive (0 is the invalid sentinel)")
        if any(c < 0 or c > 255 for c in self.object_color):
            raise ParameterError("object_color must be 8-bit")

    @classmethod
    def from_dict(cls, doc: dict) -> "SceneParams":
        doc = dict(doc)
        for key in ("object_size", "start", "velocity", "object_color", "wall_depth",
                    "shadow_offset", "out_of_range"):
            if doc.get(key) is not None:
                doc[key] = tuple(doc[key])
        return cls(**doc)


def _reflect(pos: float, span: float) -> float:
    if span <= 0:
        return 0.0
    p = pos % (2 * span)
    return p if p <= span else 2 * span - p


def object_origin(params: SceneParams, t: int) -> tuple[int, int]:
    """Unclipped top-left corner of the object at frame ``t``."""
    dt = t - params.enter_frame
    r = params.start[0] + params.velocity[0] * dt
    c = params.start[1] + params.velocity[1] * dt
    if params.bounce:
        r = _reflect(r, params.size - params.object_size[0])
        c = _reflect(c, params.size - params.object_size[1])
    return int(np.floor(r)), int(np.floor(c))


def object_box(params: SceneParams, t: int) -> tuple[int, int, int, int] | None:
    """Clipped ``(row0, row1, col0, col1)`` of the object at frame ``t``, or None if absent."""
    if t < params.enter_frame or (params.exit_frame is not None and t >= params.exit_frame):
        return None
    r0, c0 = object_origin(params, t)
    r1, c1 = r0 + params.object_size[0], c0 + params.object_size[1]
    r0c, r1c = max(r0, 0), min(r1, params.size)
    c0c, c1c = max(c0, 0), min(c1, params.size)
    if r0c >= r1c or c0c >= c1c:
        return None
    return r0c, r1c, c0c, c1c


def object_footprint(params: SceneParams, t: int) -> np.ndarray:
    mask = np.zeros((params.size, params.size), dtype=bool)
    box = object_box(params, t)
    if box is not None:
        r0, r1, c0, c1 = box
        mask[r0:r1, c0:c1] = True
    return mask


def _smooth_noise(rng: np.random.Generator, shape: tuple[int, ...], sigma: float) -> np.ndarray:
    from scipy.ndimage import gaussian_filter

    n = rng.standard_normal(shape)
    sig = (sigma, sigma) + (0,) * (len(shape) - 2)
    n = gaussian_filter(n, sig, mode="wrap")
    return n / (n.std() + 1e-12)


def _render_background(params: SceneParams, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    s = params.size
    base = np.array([110.0, 125.0, 105.0])
    coarse = _smooth_noise(rng, (s, s, 3), s / 12.0)
    fine = _smooth_noise(rng, (s, s, 1), 1.0)
    rgb = base + params.texture_contrast * coarse + 0.5 * params.texture_contrast * fine
    rgb_bg = np.clip(rgb, 0, 255)

    rows = np.linspace(params.wall_depth[0], params.wall_depth[1], s)[:, None]
    depth = np.repeat(rows, s, axis=1)
    depth = depth + 20.0 * _smooth_noise(rng, (s, s), s / 8.0)
    return rgb_bg, depth


def synth_generate(seed: int, params: SceneParams | None = None) -> Sequence:
    """Render a deterministic synthetic RGB-D sequence with exact ground truth."""
    params = params or SceneParams()
    params.validate()
    rng = np.random.default_rng(seed)
    s = params.size
    rgb_bg, depth_bg = _render_background(params, rng)

    oh, ow = params.object_size
    obj_tex = params.object_texture * _smooth_noise(rng, (oh, ow, 1), 1.0)
    if params.color_camouflage:
        obj_color = rgb_bg.reshape(-1, 3).mean(axis=0) + 6.0
    else:
        obj_color = np.asarray(params.object_color, dtype=np.float64)
    obj_rgb = obj_color + obj_tex

    frames_rgb8, frames_depth16, gts, bg_only = [], [], [], set()
    for t in range(params.n_frames):
        rgb = rgb_bg.copy()
        depth = depth_bg.copy()
        box = object_box(params, t)
        if params.shadow and box is not None:
            r0, r1, c0, c1 = box
            dr, dc = params.shadow_offset
            sr0, sr1 = np.clip([r0 + dr, r1 + dr], 0, s)
            sc0, sc1 = np.clip([c0 + dc, c1 + dc], 0, s)
            rgb[sr0:sr1, sc0:sc1] *= params.shadow_strength
        if box is not None:
            r0, r1, c0, c1 = box
            full_r0, full_c0 = object_origin(params, t)
            tex = obj_rgb[r0 - full_r0:r1 - full_r0, c0 - full_c0:c1 - full_c0]
            rgb[r0:r1, c0:c1] = tex
            if params.depth_camouflage:
                depth[r0:r1, c0:c1] = depth_bg[r0:r1, c0:c1] - 15.0
            else:
                depth[r0:r1, c0:c1] = params.object_depth
        else:
            bg_only.add(t)
        rgb = rgb + params.rgb_noise * rng.standard_normal(rgb.shape)
        depth = depth + params.depth_noise * rng.standard_normal(depth.shape)
        depth = np.clip(depth, 1, 65535)
        if params.out_of_range is not None:
            r0, r1, c0, c1 = params.out_of_range
            depth[r0:r1, c0:c1] = 0
        frames_rgb8.append(np.clip(np.rint(rgb), 0, 255).astype(np.uint8))
        frames_depth16.append(np.rint(depth).astype(np.uint16))
        fg = object_footprint(params, t)
        if box is None and not params.gt_on_background_frames:
            gts.append(None)
        else:
            gts.append(GroundTruthFrame(np.where(fg, FOREGROUND, BACKGROUND).astype(np.uint8)))

    bg_rgb8 = np.clip(np.rint(rgb_bg), 0, 255).astype(np.uint8)
    bg_depth16 = np.rint(np.clip(depth_bg, 1, 65535)).astype(np.uint16)
    if params.out_of_range is not None:
        r0, r1, c0, c1 = params.out_of_range
        bg_depth16[r0:r1, c0:c1] = 0

    lo, hi = depth_range(frames_depth16)
    seq = Sequence(
        frames=[normalize(f) for f in frames_rgb8],
        depth_frames=[to_three_channels(normalize_depth16(d, lo, hi)) for d in frames_depth16],
        gt=gts,
        background_only_indices=bg_only,
        name=params.name,
        category=params.category,
        depth_bit_depth=16,
        background_rgb=[normalize(bg_rgb8)] * params.n_frames,
        background_depth=[to_three_channels(normalize_depth16(bg_depth16, lo, hi))] * params.n_frames,
        raw={"rgb": frames_rgb8, "depth": frames_depth16, "background": (bg_rgb8, bg_depth16)},
    )
    return seq


def write_synthetic(seq: Sequence, root: str | os.PathLike, spec: DatasetSpec | None = None) -> DatasetSpec:
    """Write a sequence from :func:`synth_generate` in the on-disk dataset layout."""
    root = Path(root)
    spec = spec or DatasetSpec(root=str(root.resolve()), image_size=seq.frames[0].shape[0])
    base = root / seq.name
    dirs = {k: base / v for k, v in (("rgb", spec.rgb_dir), ("depth", spec.depth_dir), ("gt", spec.gt_dir),
                                      ("brgb", "background_rgb"), ("bdepth", "background_depth"))}
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    if seq.raw is None:
        raise ParameterError("sequence has no raw sensor data to write")
    bg_rgb8, bg_depth16 = seq.raw["background"]
    fg_value = next(k for k, v in spec.label_map.items() if v == "foreground")
    bg_value = next(k for k, v in spec.label_map.items() if v == "background")
    for i, (rgb, depth) in enumerate(zip(seq.raw["rgb"], seq.raw["depth"])):
        name = frame_filename(i)
        write_rgb(dirs["rgb"] / name, rgb)
        cv2.imwrite(str(dirs["depth"] / name), depth)
        write_rgb(dirs["brgb"] / name, bg_rgb8)
        cv2.imwrite(str(dirs["bdepth"] / name), bg_depth16)
        g = seq.gt[i] if seq.gt is not None else None
        if g is not None:
            raw = np.where(g.labels == FOREGROUND, fg_value, bg_value).astype(np.uint8)
            cv2.imwrite(str(dirs["gt"] / name), raw)
    meta = {"background_only_indices": sorted(seq.background_only_indices), "category": seq.category}
    (base / spec.meta_file).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    spec.sequences[seq.name] = seq.category
    return spec
