"""Mini-batch Adam training with deterministic sample order."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..numerics import NonFiniteError, named_parameters
from .losses import compute_loss
from .model import GroundingParams, ModelConfig, Vocab, forward, init_model, prepare_sample

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


class Adam:
    def __init__(self, named, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.named = list(named)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for _, p in self.named]
        self.v = [np.zeros_like(p.data) for _, p in self.named]

    def step(self) -> None:
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for (_, p), m, v in zip(self.named, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainResult:
    params: GroundingParams
    vocab: Vocab
    losses: list = field(default_factory=list)
    metrics: list = field(default_factory=list)


def learning_rate(cfg: ModelConfig, step: int) -> float:
    """Step size for 1-based ``step``; cosine decays to zero at ``cfg.steps``."""
    if cfg.lr_schedule == "cosine":
        return cfg.lr * 0.5 * (1.0 + math.cos(math.pi * (step - 1) / cfg.steps))
    return cfg.lr


def _clip(named, max_norm: float) -> float:
    total = float(np.sqrt(sum(float((p.grad**2).sum()) for _, p in named if p.grad is not None)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for _, p in named:
            if p.grad is not None:
                p.grad *= scale
    return total


def train(
    samples,
    cfg: ModelConfig,
    params: GroundingParams | None = None,
    vocab: Vocab | None = None,
    on_metrics: Callable[[dict], None] | None = None,
    on_checkpoint: Callable[[int, GroundingParams], None] | None = None,
    checkpoint_every: int = 0,
    prepared=None,
) -> TrainResult:
    """Optimise the full model on ``samples`` for ``cfg.steps`` Adam steps.

    ``on_metrics`` receives ``{step, loss, l_pos, l_sem}`` after each step;
    ``on_checkpoint`` is called every ``checkpoint_every`` steps.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("training needs at least one sample")
    vocab = vocab or Vocab.default()
    params = params or init_model(cfg, vocab)
    if prepared is None:
        prepared = [prepare_sample(s, cfg, vocab) for s in samples]
    named = named_parameters(params)
    opt = Adam(named, cfg.lr)
    rng = np.random.default_rng([cfg.seed, 7])
    result = TrainResult(params, vocab)
    queue: list = []
    B = min(cfg.batch_size, len(prepared))
    for step in range(1, cfg.steps + 1):
        batch = []
        while len(batch) < B:
            if not queue:
                queue = list(rng.permutation(len(prepared)))
            batch.append(queue.pop())
        for _, p in named:
            p.grad = None
        tot = pos = sem = 0.0
        try:
            for i in batch:
                ps = prepared[i]
                res = forward(params, cfg, ps)
                loss, l_pos, l_sem, _ = compute_loss(res.heads, ps.gt_box, res.text_o, cfg.tau, cfg.lam)
                (loss * (1.0 / B)).backward()
                tot += loss.item() / B
                pos += l_pos.item() / B
                sem += l_sem.item() / B
        except NonFiniteError as exc:
            raise TrainingError(f"step {step}: {exc}") from exc
        for name, p in named:
            if p.grad is not None and not np.isfinite(p.grad).all():
                raise TrainingError(f"step {step}: non-finite gradient in parameter {name}")
        _clip(named, cfg.clip)
        opt.lr = learning_rate(cfg, step)
        opt.step()
        result.losses.append(tot)
        rec = {"step": step, "loss": tot, "l_pos": pos, "l_sem": sem}
        result.metrics.append(rec)
        if on_metrics is not None:
            on_metrics(rec)
        if checkpoint_every and on_checkpoint is not None and step % checkpoint_every == 0:
            on_checkpoint(step, params)
    return result
