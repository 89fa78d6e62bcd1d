"""Confusion counts, precision/recall/F-measure and report aggregation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Sequence as Seq

import numpy as np

from .data import FOREGROUND, IGNORE, GroundTruthFrame
from .errors import ParameterError, ShapeError

MEAN_OF_FRAMES = "mean-of-frames"
POOLED = "pooled-counts"
MODES = (MEAN_OF_FRAMES, POOLED)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f_measure: float


def confusion(pred, gt: GroundTruthFrame) -> ConfusionCounts:
    """Count outcomes over non-ignored pixels. ``pred`` is a mask array or SegmentationMask."""
    pred = np.asarray(getattr(pred, "mask", pred)).astype(bool)
    if pred.shape != gt.labels.shape:
        raise ShapeError(f"prediction {pred.shape} and ground truth {gt.labels.shape} differ")
    valid = gt.labels != IGNORE
    fg = gt.labels == FOREGROUND
    p = pred & valid
    return ConfusionCounts(
        tp=int(np.count_nonzero(p & fg)),
        fp=int(np.count_nonzero(p & ~fg)),
        fn=int(np.count_nonzero(~pred & fg)),
        tn=int(np.count_nonzero(~pred & valid & ~fg)),
    )


def metrics(c: ConfusionCounts) -> Scores:
    """Precision, recall and F-measure; any zero denominator scores 0."""
    p = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    r = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    # 2PR/(P+R) written over counts: same value, one rounding
    f = 2 * c.tp / (2 * c.tp + c.fp + c.fn) if c.tp else 0.0
    return Scores(p, r, f)


def aggregate(counts: Seq[ConfusionCounts], mode: str = MEAN_OF_FRAMES) -> Scores:
    if not counts:
        raise ParameterError("cannot aggregate an empty list")
    if mode == POOLED:
        total = ConfusionCounts()
        for c in counts:
            total = total + c
        return metrics(total)
    if mode == MEAN_OF_FRAMES:
        return mean_scores(metrics(c) for c in counts)
    raise ParameterError(f"unknown aggregation mode {mode!r}")


def mean_scores(scores: Iterable[Scores]) -> Scores:
    scores = list(scores)
    if not scores:
        raise ParameterError("cannot average an empty list")
    return Scores(
        float(np.mean([s.precision for s in scores])),
        float(np.mean([s.recall for s in scores])),
        float(np.mean([s.f_measure for s in scores])),
    )


@dataclass
class EvalReport:
    """Scores for one method at frame, sequence and category level."""

    mode: str
    frames: dict[str, dict[int, ConfusionCounts]] = field(default_factory=dict)
    sequences: dict[str, Scores] = field(default_factory=dict)
    categories: dict[str, Scores] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "frames": {
                seq: {str(i): {**asdict(c), **asdict(metrics(c))} for i, c in sorted(fr.items())}
                for seq, fr in sorted(self.frames.items())
            },
            "sequences": {k: asdict(v) for k, v in sorted(self.sequences.items())},
            "categories": {k: asdict(v) for k, v in sorted(self.categories.items())},
        }


def build_report(
    per_frame: dict[str, dict[int, ConfusionCounts]],
    categories: dict[str, str],
    mode: str = MEAN_OF_FRAMES,
) -> EvalReport:
    """Aggregate frames per sequence, then average sequences per category."""
    if mode not in MODES:
        raise ParameterError(f"unknown aggregation mode {mode!r}")
    report = EvalReport(mode=mode, frames=per_frame)
    by_cat: dict[str, list[Scores]] = {}
    for seq, frames in sorted(per_frame.items()):
        if not frames:
            continue
        s = aggregate([frames[i] for i in sorted(frames)], mode)
        report.sequences[seq] = s
        by_cat.setdefault(categories.get(seq, "default"), []).append(s)
    report.categories = {cat: mean_scores(v) for cat, v in sorted(by_cat.items())}
    return report


def format_table(reports: dict[str, EvalReport], external: dict[str, dict[str, float]] | None = None) -> str:
    """Categories as rows, methods as columns, average F-measure in each cell."""
    columns: dict[str, dict[str, float]] = {}
    for name, extra in (external or {}).items():
        columns[name] = dict(extra)
    for name, rep in reports.items():
        columns[name] = {cat: s.f_measure for cat, s in rep.categories.items()}
    cats = sorted({c for col in columns.values() for c in col})
    names = list(columns)
    rows = [["Category"] + names]
    for cat in cats:
        rows.append([cat] + [_fmt(columns[n].get(cat)) for n in names])
    avg_row = ["Average"]
    for n in names:
        vals = [columns[n][c] for c in cats if c in columns[n]]
        avg_row.append(_fmt(float(np.mean(vals)) if vals else None))
    rows.append(avg_row)
    widths = [max(len(r[j]) for r in rows) for j in range(len(rows[0]))]
    lines = []
    for k, r in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[j]) if j == 0 else cell.rjust(widths[j]) for j, cell in enumerate(r)))
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _fmt(v: float | None) -> str:
    return "-" if v is None else f"{v:.4f}"


def write_reports(path_json: str | Path, path_txt: str | Path, reports: dict[str, EvalReport],
                  external: dict[str, dict[str, float]] | None = None) -> None:
    doc = {name: rep.to_dict() for name, rep in sorted(reports.items())}
    Path(path_json).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    Path(path_txt).write_text(format_table(reports, external))
