"""Relative position encodings turned into per-head attention biases."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import SCHEMES, offset_field
from .numerics import MlpParams, Tensor, init_mlp, mlp_apply

F_KINDS = ("signed_log", "identity")


@dataclass
class PosEncConfig:
    scheme: str = "box_surface"
    f_kind: str = "signed_log"
    f_scale: float = 0.1
    num_heads: int = 1
    hidden_dim: int = 32
    mlps: list = field(default_factory=list)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.f_kind not in F_KINDS:
            raise ValueError(f"unknown f_kind {self.f_kind!r}")
        if self.num_heads < 1:
            raise ValueError("num_heads must be >= 1")
        if not self.f_scale > 0:
            raise ValueError("f_scale must be positive")
        want = 8 if self.scheme == "vertex" else 1
        if len(self.mlps) != want:
            raise ValueError(f"{self.scheme} scheme needs {want} MLP(s), got {len(self.mlps)}")
        for m in self.mlps:
            if m.in_dim != 3 or m.out_dim != self.num_heads:
                raise ValueError("position MLPs must map 3 -> num_heads")

    def parameters(self) -> list:
        return [t for m in self.mlps for t in m.parameters()]


def make_posenc(
    scheme: str = "box_surface",
    num_heads: int = 1,
    hidden_dim: int = 32,
    seed=0,
    f_kind: str = "signed_log",
    f_scale: float = 0.1,
) -> PosEncConfig:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = 8 if scheme == "vertex" else 1
    mlps = [init_mlp(3, hidden_dim, num_heads, rng) for _ in range(n)]
    return PosEncConfig(scheme, f_kind, f_scale, num_heads, hidden_dim, mlps)


def f_nonlinear(delta, cfg: PosEncConfig) -> np.ndarray:
    """Componentwise ``sign(d) * log(1 + |d| / f_scale)``, or passthrough."""
    d = delta.data if isinstance(delta, Tensor) else np.asarray(delta, dtype=np.float64)
    if cfg.f_kind == "identity":
        return d.copy()
    return np.sign(d) * np.log1p(np.abs(d) / cfg.f_scale)


def pe_bias(delta, cfg: PosEncConfig) -> Tensor:
    """Map an offset field to an ``H x K x N`` attention bias."""
    d = delta.data if isinstance(delta, Tensor) else np.asarray(delta)
    if cfg.scheme == "vertex":
        if d.ndim != 4 or d.shape[2:] != (8, 3):
            raise ValueError(f"vertex scheme expects K x N x 8 x 3 offsets, got {d.shape}")
    elif d.ndim != 3 or d.shape[2] != 3:
        raise ValueError(f"{cfg.scheme} scheme expects K x N x 3 offsets, got {d.shape}")
    dtype = cfg.mlps[0].w1.dtype
    feats = f_nonlinear(d, cfg).astype(dtype, copy=False)
    if cfg.scheme == "vertex":
        total = None
        for c, mlp in enumerate(cfg.mlps):
            e = mlp_apply(mlp, Tensor(np.ascontiguousarray(feats[:, :, c, :]), dtype=dtype))
            total = e if total is None else total + e
    else:
        total = mlp_apply(cfg.mlps[0], Tensor(feats, dtype=dtype))
    return total.transpose(2, 0, 1)


def attention_bias(points, boxes, cfg: PosEncConfig) -> Tensor:
    """Offsets from ``boxes`` to ``points`` under ``cfg.scheme``, encoded as a bias."""
    return pe_bias(offset_field(points, boxes, cfg.scheme, dtype=cfg.mlps[0].w1.dtype), cfg)


@dataclass(frozen=True)
class PeCost:
    mlp_applications: int
    offset_scalars: int
    bias_scalars: int
    hidden_scalars: int

    @property
    def bias_buffer_scalars(self) -> int:
        return self.offset_scalars + self.bias_scalars


def pe_cost_model(scheme: str, K: int, N: int, D_hidden: int, H: int) -> PeCost:
    """Analytic per-layer work and buffer counts for one encoding pass."""
    if min(K, N, D_hidden, H) < 1:
        raise ValueError("shapes must be positive")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    n = 8 if scheme == "vertex" else 1
    return PeCost(
        mlp_applications=n,
        offset_scalars=n * K * N * 3,
        bias_scalars=H * K * N,
        hidden_scalars=n * K * N * D_hidden,
    )
