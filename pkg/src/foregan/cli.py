"""Command-line entry point: ``foregan {synth,train,segment,eval,visualize}``.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime or
numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from ._io import sha256_file, write_npz
from .data import (
    AugmentConfig,
    DatasetSpec,
    SceneParams,
    augment,
    frame_filename,
    load_sequence,
    read_mask,
    synth_generate,
    write_mask,
    write_synthetic,
    denormalize,
    write_rgb,
)
from .errors import ForeganError, InversionError, TrainingError
from .evaluation import MODES, MEAN_OF_FRAMES, build_report, confusion, write_reports, format_table
from .gan import Checkpoint, GanArch, TrainConfig, train, write_loss_csv
from .inversion import InversionConfig
from .segment import GanBackground, OracleBackground, PipelineConfig, ThresholdRule, run_pipeline

log = logging.getLogger("foregan")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3
METHOD_NAMES = {"rgb": "ForeGAN_RGB", "depth": "ForeGAN_D", "fused": "ForeGAN_RGBD"}


class UsageError(ForeganError):
    pass


@dataclass
class RunConfig:
    dataset: str = "dataset.json"
    output: str = "run"
    sequences: list[str] = field(default_factory=list)
    modality: str = "rgbd"
    seed: int = 0
    workers: int = 1
    augment: bool = True
    arch: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    inversion: dict = field(default_factory=dict)
    pipeline: dict = field(default_factory=dict)
    checkpoints: dict = field(default_factory=dict)
    base_dir: str = field(default=".", repr=False)

    @classmethod
    def load(cls, path: str | None) -> "RunConfig":
        if path is None:
            cfg = cls()
        else:
            p = Path(path)
            if not p.is_file():
                raise UsageError(f"config file {p} not found")
            try:
                doc = json.loads(p.read_text())
            except json.JSONDecodeError as exc:
                raise UsageError(f"config file {p} is not valid JSON: {exc}") from exc
            known = {f.name for f in fields(cls)} - {"base_dir"}
            unknown = set(doc) - known
            if unknown:
                raise UsageError(f"unknown config keys: {sorted(unknown)}")
            cfg = cls(**doc)
            cfg.base_dir = str(p.resolve().parent)
        env_seed = os.environ.get("FOREGAN_SEED")
        if env_seed is not None:
            try:
                cfg.seed = int(env_seed)
            except ValueError:
                raise UsageError(f"FOREGAN_SEED must be an integer, got {env_seed!r}") from None
        return cfg

    def path(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else Path(self.base_dir) / q

    @property
    def output_dir(self) -> Path:
        return self.path(self.output)

    def dataset_spec(self) -> DatasetSpec:
        p = self.path(self.dataset)
        if not p.is_file():
            raise UsageError(f"dataset spec {p} not found")
        return DatasetSpec.from_json(p)

    def sequence_names(self, spec: DatasetSpec) -> list[str]:
        if self.sequences:
            return list(self.sequences)
        if spec.sequences:
            return sorted(spec.sequences)
        root = Path(spec.root)
        return sorted(d.name for d in root.iterdir() if (d / spec.rgb_dir).is_dir()) if root.is_dir() else []

    def train_config(self) -> TrainConfig:
        return _build(TrainConfig, {**self.train, "seed": self.seed}, "train")

    def gan_arch(self, image_size: int) -> GanArch:
        tc = self.train_config()
        return _build(GanArch, {"image_size": image_size, "latent_dim": tc.latent_dim, **self.arch}, "arch")

    def inversion_config(self) -> InversionConfig:
        return _build(InversionConfig, {**self.inversion, "seed": self.seed}, "inversion")

    def pipeline_config(self) -> PipelineConfig:
        doc = dict(self.pipeline)
        doc.setdefault("morphology", True)
        rule = _build(ThresholdRule, doc.pop("rule", {}), "pipeline.rule")
        return _build(PipelineConfig, {"rule": rule, "inversion": self.inversion_config(), **doc}, "pipeline")

    def checkpoint_path(self, modality: str) -> Path:
        if modality in self.checkpoints:
            return self.path(self.checkpoints[modality])
        return self.output_dir / "checkpoints" / f"{modality}.npz"


def _build(cls, doc: dict, section: str):
    try:
        return cls(**doc)
    except TypeError as exc:
        raise UsageError(f"bad '{section}' config section: {exc}") from None


def _wrap(fn):
    def run(args) -> int:
        try:
            return fn(args)
        except (TrainingError, InversionError) as exc:
            log.error("%s", exc)
            return EXIT_RUNTIME
        except (ForeganError, FileNotFoundError) as exc:
            log.error("%s", exc)
            return EXIT_USAGE
    return run


def _config(args) -> RunConfig:
    cfg = RunConfig.load(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None and "FOREGAN_SEED" not in os.environ:
        cfg.seed = args.seed
    if getattr(args, "output", None):
        cfg.output = str(Path(args.output).resolve())
    if getattr(args, "dataset", None):
        cfg.dataset = str(Path(args.dataset).resolve())
    if getattr(args, "workers", None):
        cfg.workers = args.workers
    if getattr(args, "sequence", None):
        cfg.sequences = list(args.sequence)
    return cfg


# ---------------------------------------------------------------------------
# synth


@_wrap
def cmd_synth(args) -> int:
    params = SceneParams.from_dict(json.loads(Path(args.scene).read_text())) if args.scene else SceneParams()
    overrides = {
        "n_frames": args.frames, "size": args.size, "name": args.name, "category": args.category,
    }
    for k, v in overrides.items():
        if v is not None:
            setattr(params, k, v)
    for flag in ("shadow", "color_camouflage", "depth_camouflage"):
        if getattr(args, flag):
            setattr(params, flag, True)
    seed = int(os.environ.get("FOREGAN_SEED", args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec_path = out / "dataset.json"
    spec = DatasetSpec.from_json(spec_path) if spec_path.is_file() else DatasetSpec(root=".", image_size=params.size)
    spec.root = str(out.resolve())
    seq = synth_generate(seed, params)
    write_synthetic(seq, out, spec)
    spec.root = "."
    spec.to_json(spec_path)
    print(f"wrote {len(seq)} frames of {seq.name!r} to {out} (background-only: {len(seq.background_only_indices)})")
    if args.run_config:
        rc = {"dataset": os.path.relpath(spec_path.resolve(), Path(args.run_config).resolve().parent),
              "output": "run", "seed": seed}
        Path(args.run_config).write_text(json.dumps(rc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train


@_wrap
def cmd_train(args) -> int:
    cfg = _config(args)
    for k in ("epochs", "batch_size"):
        if getattr(args, k) is not None:
            cfg.train[k] = getattr(args, k)
    spec = cfg.dataset_spec()
    names = cfg.sequence_names(spec)
    if not names:
        raise UsageError("no sequences to train on")
    data = []
    for name in names:
        seq = load_sequence(spec, name)
        if args.modality == "rgb":
            data.extend(seq.frames)
        else:
            if seq.depth_frames is None:
                raise UsageError(f"sequence {name} has no depth frames")
            data.extend(seq.depth_frames[i] for i in sorted(seq.background_only_indices))
    if not data:
        raise UsageError(f"no training frames for modality {args.modality} "
                         "(the depth model needs background-only frames)")
    if cfg.augment:
        data = augment(data, AugmentConfig())
    tc = cfg.train_config()
    arch = cfg.gan_arch(data[0].shape[0])
    scene = "+".join(sorted({spec.category_of(n) for n in names}))
    log.info("training %s model on %d frames for %d epochs", args.modality, len(data), tc.epochs)
    ckpt = train(data, tc, arch, modality=args.modality, scene=scene,
                 on_epoch=lambda e, dl, gl: log.info("epoch %d  d_loss %.4f  g_loss %.4f", e, dl, gl))
    path = cfg.checkpoint_path(args.modality)
    path.parent.mkdir(parents=True, exist_ok=True)
    ckpt.save(path)
    write_loss_csv(path.with_name(f"{args.modality}_loss.csv"), ckpt.loss_history)
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# segment


def _background_model(cfg: RunConfig, modality: str, seq, oracle: bool, pc: PipelineConfig):
    if oracle:
        bgs = seq.background_rgb if modality == "rgb" else seq.background_depth
        if bgs is None:
            raise UsageError(f"--oracle needs true {modality} backgrounds in sequence {seq.name}")
        return OracleBackground(modality, bgs), {"oracle": True}
    path = cfg.checkpoint_path(modality)
    if not path.is_file():
        raise UsageError(f"missing {modality} checkpoint {path} (train first or pass --oracle)")
    ckpt = Checkpoint.load(path)
    if ckpt.modality != modality:
        raise UsageError(f"checkpoint {path} is a {ckpt.modality} model, expected {modality}")
    return GanBackground(ckpt, pc.inversion, pc.batch_size), {
        "path": os.path.relpath(path, cfg.output_dir), "sha256": sha256_file(path)}


@_wrap
def cmd_segment(args) -> int:
    cfg = _config(args)
    if args.modality:
        cfg.modality = args.modality
    if cfg.modality not in ("rgbd", "rgb-only"):
        raise UsageError(f"modality must be rgbd or rgb-only, got {cfg.modality!r}")
    if args.steps is not None:
        cfg.inversion["steps"] = args.steps
    pc = cfg.pipeline_config()
    spec = cfg.dataset_spec()
    names = cfg.sequence_names(spec)
    if not names:
        raise UsageError("no sequences to segment")
    use_depth = cfg.modality == "rgbd"
    out_root = cfg.output_dir
    for name in names:
        seq = load_sequence(spec, name)
        if use_depth and seq.depth_frames is None:
            raise UsageError(f"sequence {name} has no depth frames; use --modality rgb-only")
        rgb_model, rgb_info = _background_model(cfg, "rgb", seq, args.oracle, pc)
        depth_model, depth_info = (None, None)
        if use_depth:
            depth_model, depth_info = _background_model(cfg, "depth", seq, args.oracle, pc)
        indices = seq.gt_indices or list(range(len(seq)))
        if args.frames is not None:
            indices = indices[:args.frames]
        outputs = run_pipeline(seq.frames, seq.depth_frames, indices, rgb_model, depth_model, pc,
                               workers=cfg.workers)

        mask_dir = out_root / "masks" / name
        inter_dir = out_root / "intermediates" / name
        kinds = ["rgb", "fused"] + (["depth"] if use_depth else [])
        for k in kinds:
            (mask_dir / k).mkdir(parents=True, exist_ok=True)
        inter_dir.mkdir(parents=True, exist_ok=True)
        for o in outputs:
            fname = frame_filename(o.index)
            for k in kinds:
                write_mask(mask_dir / k / fname, getattr(o, k).mask)
            arrays = {
                "frame": seq.frames[o.index], "prev": seq.frames[o.prev_index],
                "masked_input": o.masked_input, "rgb_background": o.rgb_background,
                "rgb_residual": o.rgb_residual.astype(np.float32), "rgb_mask": o.rgb.mask,
                "fused_mask": o.fused.mask, "motion_mask": o.motion.mask,
                "flow_u": o.flow.u, "flow_v": o.flow.v,
                "motion_threshold": np.float64(o.motion.threshold_used),
            }
            if use_depth:
                arrays.update({
                    "depth": seq.depth_frames[o.index], "depth_background": o.depth_background,
                    "depth_residual": o.depth_residual.astype(np.float32), "depth_mask": o.depth.mask,
                })
            write_npz(inter_dir / f"{fname[:-4]}.npz", arrays)
        manifest = {
            "version": __version__,
            "sequence": name,
            "category": seq.category,
            "modality": cfg.modality,
            "oracle": bool(args.oracle),
            "seed": cfg.seed,
            "frames": [o.index for o in outputs],
            "prev_frames": [o.prev_index for o in outputs],
            "checkpoints": {"rgb": rgb_info, **({"depth": depth_info} if use_depth else {})},
            "pipeline": _jsonable(asdict(pc)),
        }
        (mask_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        print(f"{name}: wrote masks for {len(outputs)} frames to {mask_dir}")
    return EXIT_OK


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


# ---------------------------------------------------------------------------
# eval


@_wrap
def cmd_eval(args) -> int:
    cfg = _config(args)
    spec = cfg.dataset_spec()
    pred_root = Path(args.pred).resolve() if args.pred else cfg.output_dir / "masks"
    if not pred_root.is_dir() or not any(pred_root.iterdir()):
        raise UsageError(f"prediction directory {pred_root} is empty or missing")
    names = cfg.sequence_names(spec)
    per_method: dict[str, dict[str, dict]] = {}
    categories = {}
    for name in names:
        seq_dir = pred_root / name
        if not seq_dir.is_dir():
            continue
        seq = load_sequence(spec, name)
        categories[name] = seq.category
        for kind, method in METHOD_NAMES.items():
            kdir = seq_dir / kind
            if not kdir.is_dir():
                continue
            counts = {}
            for i in seq.gt_indices:
                p = kdir / frame_filename(i)
                if p.is_file():
                    counts[i] = confusion(read_mask(p), seq.gt[i])
            if counts:
                per_method.setdefault(method, {})[name] = counts
    if not per_method:
        raise UsageError(f"no predicted masks in {pred_root} overlap ground-truth frames")
    reports = {m: build_report(frames, categories, args.mode) for m, frames in per_method.items()}
    external = json.loads(Path(args.external).read_text()) if args.external else None
    out_dir = cfg.output_dir / "eval"
    out_dir.mkdir(parents=True, exist_ok=True)
    write_reports(out_dir / "report.json", out_dir / "report.txt", reports, external)
    print(format_table(reports, external), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# visualize


def _panel(x: np.ndarray) -> np.ndarray:
    """Render a frame, mask or residual as an 8-bit RGB panel."""
    x = np.asarray(x)
    if x.dtype == np.uint8 and x.ndim == 2:
        img = (x > 0).astype(np.uint8) * 255
    elif x.ndim == 2:
        peak = float(x.max())
        img = np.clip(x / peak * 255.0 if peak > 0 else x * 0, 0, 255).astype(np.uint8)
    else:
        return denormalize(x)
    return np.repeat(img[..., None], 3, axis=-1)


@_wrap
def cmd_visualize(args) -> int:
    cfg = _config(args)
    spec = cfg.dataset_spec()
    names = cfg.sequence_names(spec)
    written = 0
    for name in names:
        inter_dir = cfg.output_dir / "intermediates" / name
        files = sorted(inter_dir.glob("frame_*.npz")) if inter_dir.is_dir() else []
        if not files:
            raise UsageError(f"no pipeline intermediates for {name} in {inter_dir}; run segment first")
        if args.frames is not None:
            files = files[:args.frames]
        seq = load_sequence(spec, name)
        fig_dir = cfg.output_dir / "figures" / name
        fig_dir.mkdir(parents=True, exist_ok=True)
        for f in files:
            idx = int(f.stem.split("_")[1])
            z = np.load(f)
            gt = seq.gt[idx] if seq.gt is not None and seq.gt[idx] is not None else None
            gt_panel = (gt.foreground.astype(np.uint8) if gt is not None
                        else np.zeros(z["rgb_mask"].shape, np.uint8))
            panels = [z["frame"], z["prev"], z["masked_input"], z["rgb_background"], z["rgb_residual"],
                      z["fused_mask"], gt_panel]
            if "depth" in z:
                panels += [z["depth"], z["depth_background"]]
            strip = np.concatenate([_panel(p) for p in panels], axis=1)
            write_rgb(fig_dir / f"strip_{idx:06d}.png", strip)
            written += 1
    print(f"wrote {written} strips")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="foregan", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="run configuration JSON")
        p.add_argument("--dataset", help="dataset spec JSON (overrides config)")
        p.add_argument("--output", help="output directory (overrides config)")
        p.add_argument("--sequence", action="append", help="restrict to this sequence (repeatable)")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)

    p = sub.add_parser("synth", help="generate a synthetic RGB-D sequence")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scene", help="scene parameter JSON")
    p.add_argument("--frames", type=int)
    p.add_argument("--size", type=int)
    p.add_argument("--name")
    p.add_argument("--category")
    p.add_argument("--shadow", action="store_true")
    p.add_argument("--color-camouflage", action="store_true")
    p.add_argument("--depth-camouflage", action="store_true")
    p.add_argument("--run-config", help="also write a starter run config here")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one modality's GAN")
    common(p)
    p.add_argument("--modality", choices=("rgb", "depth"), required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("segment", help="segment GT-bearing frames")
    common(p)
    p.add_argument("--oracle", action="store_true", help="use the true synthetic backgrounds")
    p.add_argument("--modality", choices=("rgbd", "rgb-only"))
    p.add_argument("--frames", type=int, help="only the first N frames")
    p.add_argument("--steps", type=int, help="inversion steps")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", help="score masks against ground truth")
    common(p)
    p.add_argument("--pred", help="mask root (default: <output>/masks)")
    p.add_argument("--mode", choices=MODES, default=MEAN_OF_FRAMES)
    p.add_argument("--external", help="JSON {method: {category: F}} shown as extra columns")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("visualize", help="write per-frame comparison strips")
    common(p)
    p.add_argument("--frames", type=int, help="only the first N frames")
    p.set_defaults(func=cmd_visualize)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
