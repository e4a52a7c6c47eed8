"""Bias-modulated multi-head cross-attention with an optional text-confidence gate."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .numerics import Tensor, matmul, mh_combine, mh_scores, param, sigmoid, softmax_rows


class GateWiring(str, enum.Enum):
    NONE = "none"
    ADDITIVE_BIAS = "additive_bias"  # softmax(S + E + conf)
    GATE_ON_PE = "gate_on_pe"  # softmax(S + g * E)
    GATE_ON_ALL = "gate_on_all"  # softmax(g * (S + E))


class EmptySurroundingError(ValueError):
    pass


@dataclass
class GateVector:
    """Per-seed gate values in (0, 1) and the max-confidence logits behind them."""

    g: Tensor
    logits: Tensor


@dataclass
class AttnParams:
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor

    def parameters(self) -> list:
        return [self.wq, self.wk, self.wv, self.wo]

    @property
    def dim(self) -> int:
        return self.wq.shape[0]


def init_attn(dim: int, seed) -> AttnParams:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    bound = 1.0 / math.sqrt(dim)
    mats = [param(rng.uniform(-bound, bound, size=(dim, dim))) for _ in range(4)]
    return AttnParams(*mats)


def token_confidence(V: Tensor, T_s: Tensor) -> Tensor:
    """Raw inner products between seed features and surrounding-token features."""
    if T_s.shape[0] == 0:
        raise EmptySurroundingError("no surrounding tokens; use wiring 'none'")
    if V.shape[-1] != T_s.shape[-1]:
        raise ValueError(f"feature dims differ: {V.shape} vs {T_s.shape}")
    return matmul(V, T_s.T)


def confidence_gate(conf: Tensor) -> GateVector:
    if conf.shape[-1] < 1:
        raise EmptySurroundingError("confidence has no token columns")
    logits = conf.max(axis=-1)
    return GateVector(g=sigmoid(logits), logits=logits)


def text_gate(V: Tensor, T: Tensor) -> GateVector:
    return confidence_gate(token_confidence(V, T))


def gated_cross_attention(
    Q: Tensor,
    Kv: Tensor,
    Vv: Tensor,
    p: AttnParams,
    H: int,
    E: Tensor | None = None,
    gate: GateVector | None = None,
    wiring: GateWiring | str = GateWiring.NONE,
) -> tuple[Tensor, Tensor]:
    """Multi-head attention of ``Q`` (K x D) over keys/values (N x D).

    Logits per head are ``Q_h K_h^T / sqrt(D/H) + E_h``; the gate is shared
    across heads and broadcast over the query axis. Returns ``(out, attn)``
    with ``attn`` of shape ``H x K x N``.
    """
    wiring = GateWiring(wiring)
    D = Q.shape[-1]
    if D % H:
        raise ValueError(f"feature dim {D} not divisible by {H} heads")
    if Kv.shape != Vv.shape or Kv.shape[-1] != D:
        raise ValueError(f"key/value shapes {Kv.shape}, {Vv.shape} incompatible with queries {Q.shape}")
    K, N = Q.shape[0], Kv.shape[0]
    if E is not None and E.shape != (H, K, N):
        raise ValueError(f"bias must be {(H, K, N)}, got {E.shape}")
    if wiring is not GateWiring.NONE:
        if gate is None:
            raise ValueError(f"wiring {wiring.value} needs a gate")
        if gate.g.shape != (N,):
            raise ValueError(f"gate length {gate.g.shape} != {N} keys")

    scores = mh_scores(matmul(Q, p.wq), matmul(Kv, p.wk), H)
    v = matmul(Vv, p.wv)

    if wiring is GateWiring.GATE_ON_PE:
        logits = scores if E is None else scores + gate.g * E
    else:
        logits = scores if E is None else scores + E
        if wiring is GateWiring.ADDITIVE_BIAS:
            logits = logits + gate.logits
        elif wiring is GateWiring.GATE_ON_ALL:
            logits = gate.g * logits
    attn = softmax_rows(logits)
    out = matmul(mh_combine(attn, v), p.wo)
    return out, attn
