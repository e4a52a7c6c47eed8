"""Box IoU, query-to-target assignment and the two-term training loss."""

from __future__ import annotations

import numpy as np

from ..geometry import pairwise_iou
from ..numerics import Tensor, log_softmax_rows, maximum, minimum, relu


def iou_tensor(pred: Tensor, gt: np.ndarray) -> Tensor:
    """Differentiable axis-aligned IoU of one predicted 6-vector against a fixed box."""
    gt = np.asarray(gt, dtype=pred.dtype)
    c, s = pred[:3], pred[3:]
    lo = maximum(c - s * 0.5, Tensor(gt[:3] - gt[3:] / 2, dtype=pred.dtype))
    hi = minimum(c + s * 0.5, Tensor(gt[:3] + gt[3:] / 2, dtype=pred.dtype))
    ov = relu(hi - lo)
    inter = ov[0] * ov[1] * ov[2]
    vol_p = s[0] * s[1] * s[2]
    union = vol_p + float(np.prod(gt[3:])) - inter
    return inter / union


def assign_query(boxes: np.ndarray, gt: np.ndarray) -> int:
    """Query whose box overlaps the target most (lowest index on ties); nearest center if none overlaps."""
    ious = pairwise_iou(boxes, gt)[:, 0]
    if ious.max() > 0:
        return int(np.argmax(ious))
    d = ((boxes[:, :3] - np.asarray(gt)[:3]) ** 2).sum(axis=1)
    return int(np.argmin(d))


def _unit_rows(x: Tensor) -> Tensor:
    return x / ((x * x).sum(axis=-1, keepdims=True) + 1e-12).sqrt()


def alignment_logits(V_o: Tensor, text_o: Tensor, tau: float) -> Tensor:
    """Cosine similarity of every query with the mean target-token feature, over ``tau``."""
    t = _unit_rows(text_o.mean(axis=0, keepdims=True))
    return (_unit_rows(V_o) @ t.T).reshape(V_o.shape[0]) * (1.0 / tau)


def compute_loss(heads, gt_box, text_o: Tensor, tau: float = 0.07, lam: float = 1.0, assignments=None):
    """Mean over layers of box regression plus query/text alignment.

    Per layer, with ``k`` the assigned query:
    ``L_pos = |c_k - c*|_1 + |s_k - s*|_1 + (1 - IoU_k)`` and
    ``L_sem = -log softmax(alignment_logits)[k]``.

    Returns ``(total, l_pos, l_sem, assignments)``; pass ``assignments`` to
    hold the discrete matching fixed.
    """
    gt = np.asarray(gt_box, dtype=np.float64)
    if assignments is None:
        assignments = [assign_query(h.boxes.data, gt) for h in heads]
    gt_c = Tensor(gt[:3], dtype=text_o.dtype)
    gt_s = Tensor(gt[3:], dtype=text_o.dtype)
    pos_terms, sem_terms = [], []
    for h, k in zip(heads, assignments):
        b = h.boxes[k]
        l1 = (b[:3] - gt_c).abs().sum() + (b[3:] - gt_s).abs().sum()
        pos_terms.append(l1 + (1.0 - iou_tensor(b, gt)))
        sem_terms.append(-log_softmax_rows(alignment_logits(h.V_o, text_o, tau))[k])
    n = float(len(heads))
    l_pos = sum(pos_terms[1:], pos_terms[0]) * (1.0 / n)
    l_sem = sum(sem_terms[1:], sem_terms[0]) * (1.0 / n)
    return l_pos + lam * l_sem, l_pos, l_sem, assignments
