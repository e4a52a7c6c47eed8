"""Parallel dual-branch decoder layer, its serial baseline, and the box head.

One parallel layer:

1. pre-norm self-attention over the K queries (residual);
2. target branch: text attention to the target tokens and visual attention
   to the seeds with a box-relative position bias;
3. surrounding branch: the same over the surrounding tokens, with the
   visual logits optionally gated by seed/text confidence;
4. within each branch the text and visual outputs are summed and normalised;
5. the two branch outputs are added to the residual stream, passed through a
   feed-forward block and normalised;
6. the box head re-predicts every query's box from the new features.

Boxes used for the position bias are the incoming (detached) predictions, so
each layer encodes positions against the previous layer's boxes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attention import AttnParams, GateWiring, gated_cross_attention, init_attn, text_gate
from .numerics import (
    MlpParams,
    Tensor,
    concat,
    init_mlp,
    layer_norm,
    mlp_apply,
    param,
    softplus,
)
from .posenc import PosEncConfig, attention_bias, make_posenc

MIN_EXTENT = 1e-6  # meters; keeps predicted sizes strictly positive


@dataclass
class NormParams:
    gamma: Tensor
    beta: Tensor


def init_norm(dim: int) -> NormParams:
    return NormParams(param(np.ones(dim)), param(np.zeros(dim)))


def norm(x: Tensor, p: NormParams) -> Tensor:
    return layer_norm(x, p.gamma, p.beta)


@dataclass
class QuerySet:
    features: Tensor  # K x D
    boxes: Tensor  # K x 6, (cx, cy, cz, l, w, h)
    layer_index: int = 0

    @property
    def box_array(self) -> np.ndarray:
        return self.boxes.data


@dataclass
class BranchParams:
    text_attn: AttnParams
    vis_attn: AttnParams
    fuse_norm: NormParams
    posenc: PosEncConfig | None = None
    wiring: GateWiring = GateWiring.NONE


@dataclass
class DecoderLayerParams:
    num_heads: int
    self_norm: NormParams
    self_attn: AttnParams
    cross_norm: NormParams
    target: BranchParams
    surround: BranchParams | None  # None for the serial baseline
    ffn: MlpParams
    out_norm: NormParams
    box_head: MlpParams

    @property
    def serial(self) -> bool:
        return self.surround is None


@dataclass
class DecoderTrace:
    """Per-layer attention maps, branch outputs, boxes and features (numpy copies)."""

    layers: list = field(default_factory=list)


def init_box_head(dim: int, seed) -> MlpParams:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    head = init_mlp(dim, dim, 6, rng)
    head.w2.data *= 0.1
    head.b2.data[:3] = 0.0
    head.b2.data[3:] = np.log(np.expm1(0.5))  # start near 0.5 m extents
    return head


def init_branch(
    dim: int,
    num_heads: int,
    rng: np.random.Generator,
    scheme: str | None = "box_surface",
    wiring: GateWiring | str = GateWiring.NONE,
    f_kind: str = "signed_log",
    f_scale: float = 0.1,
    pe_hidden: int | None = None,
) -> BranchParams:
    text_attn = init_attn(dim, rng)
    vis_attn = init_attn(dim, rng)
    pe = None
    if scheme is not None:
        pe = make_posenc(scheme, num_heads, pe_hidden or dim, rng, f_kind, f_scale)
    return BranchParams(text_attn, vis_attn, init_norm(dim), pe, GateWiring(wiring))


def init_decoder_layer(
    dim: int,
    num_heads: int,
    seed,
    serial: bool = False,
    target_scheme: str | None = "box_surface",
    surround_scheme: str | None = "box_surface",
    target_wiring: GateWiring | str = GateWiring.NONE,
    surround_wiring: GateWiring | str = GateWiring.GATE_ON_ALL,
    f_kind: str = "signed_log",
    f_scale: float = 0.1,
    pe_hidden: int | None = None,
) -> DecoderLayerParams:
    if dim % num_heads:
        raise ValueError(f"dim {dim} not divisible by {num_heads} heads")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    self_attn = init_attn(dim, rng)
    target = init_branch(dim, num_heads, rng, target_scheme, target_wiring, f_kind, f_scale, pe_hidden)
    surround = None
    if not serial:
        surround = init_branch(dim, num_heads, rng, surround_scheme, surround_wiring, f_kind, f_scale, pe_hidden)
    ffn = init_mlp(dim, 2 * dim, dim, rng)
    box_head = init_box_head(dim, rng)
    return DecoderLayerParams(
        num_heads=num_heads,
        self_norm=init_norm(dim),
        self_attn=self_attn,
        cross_norm=init_norm(dim),
        target=target,
        surround=surround,
        ffn=ffn,
        out_norm=init_norm(dim),
        box_head=box_head,
    )


def predict_boxes(features: Tensor, head: MlpParams, ref_centers) -> Tensor:
    """Six numbers per query: center = reference + offset, size = softplus(raw) + floor."""
    raw = mlp_apply(head, features)
    ref = Tensor(np.asarray(ref_centers, dtype=features.dtype).reshape(-1, 3), dtype=features.dtype)
    centers = raw[:, :3] + ref
    sizes = softplus(raw[:, 3:]) + MIN_EXTENT
    return concat([centers, sizes], axis=1)


def _run_branch(qn, seeds_V, seed_xyz, boxes, text, bp: BranchParams, H, record=None, tag=""):
    text_out = None
    if text.shape[0] > 0:
        text_out, a_text = gated_cross_attention(qn, text, text, bp.text_attn, H)
        if record is not None:
            record[f"{tag}_text_attn"] = a_text.data.copy()
            record[f"{tag}_text_out"] = text_out.data.copy()
    E = attention_bias(seed_xyz, boxes, bp.posenc) if bp.posenc is not None else None
    wiring = bp.wiring if text.shape[0] > 0 else GateWiring.NONE
    gate = text_gate(seeds_V, text) if wiring is not GateWiring.NONE else None
    vis_out, a_vis = gated_cross_attention(qn, seeds_V, seeds_V, bp.vis_attn, H, E, gate, wiring)
    if record is not None:
        record[f"{tag}_visual_attn"] = a_vis.data.copy()
        record[f"{tag}_visual_out"] = vis_out.data.copy()
        if E is not None:
            record[f"{tag}_bias"] = E.data.copy()
        if gate is not None:
            record[f"{tag}_gate"] = gate.g.data.copy()
    s = vis_out if text_out is None else text_out + vis_out
    fused = norm(s, bp.fuse_norm)
    if record is not None:
        record[f"{tag}_fused"] = fused.data.copy()
    return fused


def _finish(q: QuerySet, q1: Tensor, branch_sum: Tensor, p: DecoderLayerParams, record) -> QuerySet:
    z = q1 + branch_sum
    if record is not None:
        record["pre_ffn"] = z.data.copy()
    out = norm(z + mlp_apply(p.ffn, z), p.out_norm)
    boxes = predict_boxes(out, p.box_head, q.box_array[:, :3])
    if record is not None:
        record["features"] = out.data.copy()
        record["boxes"] = boxes.data.copy()
    return QuerySet(out, boxes, q.layer_index + 1)


def _self_attend(q: QuerySet, p: DecoderLayerParams) -> Tensor:
    qs = norm(q.features, p.self_norm)
    sa, _ = gated_cross_attention(qs, qs, qs, p.self_attn, p.num_heads)
    return q.features + sa


def decoder_layer(
    q: QuerySet,
    seeds_V: Tensor,
    seed_xyz,
    T_m: Tensor,
    T_s: Tensor,
    p: DecoderLayerParams,
    trace: DecoderTrace | None = None,
) -> QuerySet:
    if p.serial:
        raise ValueError("decoder_layer needs parallel params; use serial_layer")
    if T_m.shape[0] == 0:
        raise ValueError("no target tokens: an utterance must name a main object")
    record = {} if trace is not None else None
    H = p.num_heads
    q1 = _self_attend(q, p)
    qn = norm(q1, p.cross_norm)
    boxes = q.box_array
    ft = _run_branch(qn, seeds_V, seed_xyz, boxes, T_m, p.target, H, record, "target")
    fs = _run_branch(qn, seeds_V, seed_xyz, boxes, T_s, p.surround, H, record, "surround")
    out = _finish(q, q1, ft + fs, p, record)
    if trace is not None:
        trace.layers.append(record)
    return out


def serial_layer(
    q: QuerySet,
    seeds_V: Tensor,
    seed_xyz,
    T_all: Tensor,
    p: DecoderLayerParams,
    trace: DecoderTrace | None = None,
) -> QuerySet:
    """Single-branch baseline: one text attention over all tokens, one visual attention."""
    if not p.serial:
        raise ValueError("serial_layer needs single-branch params")
    if T_all.shape[0] == 0:
        raise ValueError("no text tokens")
    record = {} if trace is not None else None
    q1 = _self_attend(q, p)
    qn = norm(q1, p.cross_norm)
    f = _run_branch(qn, seeds_V, seed_xyz, q.box_array, T_all, p.target, p.num_heads, record, "serial")
    out = _finish(q, q1, f, p, record)
    if trace is not None:
        trace.layers.append(record)
    return out


def decode_stack(
    q0: QuerySet,
    seeds_V: Tensor,
    seed_xyz,
    T_m: Tensor,
    T_s: Tensor,
    layers: list,
    trace: bool = False,
    T_all: Tensor | None = None,
) -> tuple:
    """Apply the layers in order.

    Returns ``(final, per_layer, trace)`` where ``per_layer`` holds every
    layer's output ``QuerySet`` and ``trace`` is ``None`` unless requested.
    Serial layers read ``T_all`` (defaults to ``T_m`` followed by ``T_s``).
    """
    if not layers:
        raise ValueError("decode_stack needs at least one layer")
    tr = DecoderTrace() if trace else None
    q = q0
    outs = []
    for p in layers:
        if p.serial:
            if T_all is None:
                T_all = concat([T_m, T_s], axis=0) if T_s.shape[0] else T_m
            q = serial_layer(q, seeds_V, seed_xyz, T_all, p, tr)
        else:
            q = decoder_layer(q, seeds_V, seed_xyz, T_m, T_s, p, tr)
        outs.append(q)
    return q, outs, tr
