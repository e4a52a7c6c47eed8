"""Acc@IoU evaluation with a unique / multiple split."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..geometry import pairwise_iou
from ..numerics import no_grad
from .losses import alignment_logits
from .model import GroundingParams, ModelConfig, PreparedSample, forward


@dataclass
class Prediction:
    box: np.ndarray
    query: int
    iou: float
    matched_object: int
    target_object: int
    has_distractor: bool

    @property
    def correct_selection(self) -> bool:
        return self.matched_object == self.target_object


@dataclass
class SplitStats:
    n: int
    acc_at_25: float
    acc_at_50: float
    top1_selection: float


@dataclass
class EvalReport:
    acc_at_25: float
    acc_at_50: float
    top1_selection: float
    n: int
    unique: SplitStats
    multiple: SplitStats

    def to_dict(self) -> dict:
        return asdict(self)

    def format(self) -> str:
        rows = [("overall", SplitStats(self.n, self.acc_at_25, self.acc_at_50, self.top1_selection)),
                ("unique", self.unique), ("multiple", self.multiple)]
        lines = [f"{'split':<10}{'n':>6}{'acc@0.25':>10}{'acc@0.5':>10}{'top1':>8}"]
        for name, s in rows:
            lines.append(f"{name:<10}{s.n:>6}{s.acc_at_25:>10.4f}{s.acc_at_50:>10.4f}{s.top1_selection:>8.4f}")
        return "\n".join(lines)


def match_object(box: np.ndarray, object_boxes: np.ndarray) -> int:
    """Scene object best explained by ``box``: highest IoU, else nearest center."""
    ious = pairwise_iou(box, object_boxes)[0]
    if ious.max() > 0:
        return int(np.argmax(ious))
    return int(np.argmin(((object_boxes[:, :3] - box[:3]) ** 2).sum(axis=1)))


def predict(params: GroundingParams, cfg: ModelConfig, ps: PreparedSample) -> Prediction:
    with no_grad():
        res = forward(params, cfg, ps)
        last = res.heads[-1]
        scores = alignment_logits(last.V_o, res.text_o, cfg.tau).data
    k = int(np.argmax(scores))
    box = last.boxes.data[k].copy()
    iou = float(pairwise_iou(box, ps.gt_box)[0, 0])
    return Prediction(box, k, iou, match_object(box, ps.object_boxes), ps.target_object, ps.has_distractor)


def _stats(preds) -> SplitStats:
    n = len(preds)
    if n == 0:
        return SplitStats(0, 0.0, 0.0, 0.0)
    return SplitStats(
        n,
        sum(p.iou > 0.25 for p in preds) / n,
        sum(p.iou > 0.5 for p in preds) / n,
        sum(p.correct_selection for p in preds) / n,
    )


def summarize(preds) -> EvalReport:
    preds = list(preds)
    overall = _stats(preds)
    return EvalReport(
        overall.acc_at_25,
        overall.acc_at_50,
        overall.top1_selection,
        overall.n,
        _stats([p for p in preds if not p.has_distractor]),
        _stats([p for p in preds if p.has_distractor]),
    )


def evaluate(prepared, params: GroundingParams, cfg: ModelConfig) -> EvalReport:
    return summarize(predict(params, cfg, ps) for ps in prepared)
