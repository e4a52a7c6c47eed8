"""Model configuration, parameters, and the end-to-end forward pass."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from ..attention import AttnParams, GateWiring, init_attn
from ..decoder import (
    DecoderTrace,
    NormParams,
    QuerySet,
    decode_stack,
    init_box_head,
    init_decoder_layer,
    init_norm,
    predict_boxes,
)
from ..geometry import SCHEMES
from ..numerics import MlpParams, Tensor, init_mlp, param, sigmoid
from ..scenegen import GroundingSample
from ..textsplit import DEFAULT_LEXICON, partition_tokens, tokenize
from .encoders import DESCRIPTOR_DIM, cross_encode, embed_descriptors, encode_text, farthest_point_sample, local_descriptors

PE_MODES = ("none", "naive", "gated")
DECODERS = ("parallel", "serial")
LR_SCHEDULES = ("constant", "cosine")

FUNCTION_WORDS = ("the", "there", "is", "a", "an", "of", "from", "placed", "and", ".", ",")


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    dim: int = 32
    heads: int = 4
    num_queries: int = 32
    num_seeds: int = 64
    layers: int = 3
    decoder: str = "parallel"
    scheme: str = "box_surface"
    pe_target: str = "naive"
    pe_surround: str = "gated"
    wiring: str = "gate_on_all"
    f_kind: str = "signed_log"
    f_scale: float = 0.1
    dim_l: int = 64
    dim_o: int = 64
    tau: float = 0.07
    lam: float = 1.0
    lr: float = 2e-3
    lr_schedule: str = "cosine"
    steps: int = 2000
    batch_size: int = 4
    clip: float = 1.0
    ball_radius: float = 0.4
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.dim % self.heads:
            raise ConfigError(f"dim {self.dim} not divisible by heads {self.heads}")
        if self.num_queries > self.num_seeds:
            raise ConfigError("num_queries must not exceed num_seeds")
        if self.decoder not in DECODERS:
            raise ConfigError(f"decoder must be one of {DECODERS}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        for k in ("pe_target", "pe_surround"):
            if getattr(self, k) not in PE_MODES:
                raise ConfigError(f"{k} must be one of {PE_MODES}")
        GateWiring(self.wiring)
        if self.lr_schedule not in LR_SCHEDULES:
            raise ConfigError(f"lr_schedule must be one of {LR_SCHEDULES}")
        if self.layers < 1 or self.batch_size < 1:
            raise ConfigError("layers and batch_size must be >= 1")

    @classmethod
    def keys(cls) -> list:
        return [f.name for f in dataclasses.fields(cls)]

    def with_overrides(self, overrides: dict) -> "ModelConfig":
        """Apply ``key -> value`` overrides; values may be strings from the command line."""
        valid = {f.name: f for f in dataclasses.fields(self)}
        unknown = sorted(set(overrides) - set(valid))
        if unknown:
            raise ConfigError(f"unknown config key(s) {unknown}; valid keys: {sorted(valid)}")
        kw = {}
        for k, v in overrides.items():
            cur = getattr(self, k)
            if isinstance(v, str) and not isinstance(cur, str):
                try:
                    v = type(cur)(float(v)) if isinstance(cur, int) and "." in v else type(cur)(v)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {k}: {v!r}") from exc
            kw[k] = v
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def ablation_configs() -> dict:
    """Every ablation row expressed as config overrides."""
    rows = {
        "decoder/serial": {"decoder": "serial", "pe_target": "naive"},
        "decoder/parallel": {"pe_target": "none", "pe_surround": "none"},
        "pe/none": {"pe_target": "none", "pe_surround": "none"},
        "pe/naive+naive": {"pe_target": "naive", "pe_surround": "naive"},
        "pe/naive+gated": {"pe_target": "naive", "pe_surround": "gated"},
        "pe/gated+gated": {"pe_target": "gated", "pe_surround": "gated"},
        "gate/none": {"pe_surround": "naive"},
        "gate/additive_bias": {"wiring": "additive_bias"},
        "gate/gate_on_pe": {"wiring": "gate_on_pe"},
        "gate/gate_on_all": {"wiring": "gate_on_all"},
    }
    for s in SCHEMES:
        rows[f"scheme/{s}"] = {"scheme": s}
    return rows


class Vocab:
    def __init__(self, words):
        self.words = list(dict.fromkeys(words))
        self.index = {w: i for i, w in enumerate(self.words)}

    @classmethod
    def default(cls) -> "Vocab":
        lx = DEFAULT_LEXICON
        words = sorted(lx.categories) + sorted(lx.adjectives) + sorted(lx.relations) + sorted(lx.pronouns)
        return cls(words + list(FUNCTION_WORDS))

    def encode(self, tokens) -> np.ndarray:
        missing = [t for t in tokens if t not in self.index]
        if missing:
            raise KeyError(f"out-of-vocabulary token(s): {missing}")
        return np.array([self.index[t] for t in tokens], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.words)


@dataclass
class GroundingParams:
    visual: MlpParams
    embedding: Tensor
    text_mix: AttnParams
    text_norm: NormParams
    v_from_t: AttnParams
    t_from_v: AttnParams
    v_norm: NormParams
    t_norm: NormParams
    score_w: Tensor
    score_b: Tensor
    proposal_head: MlpParams
    layers: list
    proj_l: Tensor
    proj_o: Tensor
    proj_t: Tensor


def _branch_mode(mode: str, wiring: str):
    if mode == "none":
        return None, GateWiring.NONE
    if mode == "naive":
        return True, GateWiring.NONE
    return True, GateWiring(wiring)


def init_model(cfg: ModelConfig, vocab: Vocab | None = None) -> GroundingParams:
    vocab = vocab or Vocab.default()
    rng = np.random.default_rng(cfg.seed)
    D = cfg.dim
    tgt_pe, tgt_w = _branch_mode(cfg.pe_target, cfg.wiring)
    sur_pe, sur_w = _branch_mode(cfg.pe_surround, cfg.wiring)
    layers = [
        init_decoder_layer(
            D,
            cfg.heads,
            rng,
            serial=cfg.decoder == "serial",
            target_scheme=cfg.scheme if tgt_pe else None,
            surround_scheme=cfg.scheme if sur_pe else None,
            target_wiring=tgt_w,
            surround_wiring=sur_w,
            f_kind=cfg.f_kind,
            f_scale=cfg.f_scale,
        )
        for _ in range(cfg.layers)
    ]
    lin = lambda i, o: param(rng.uniform(-1, 1, size=(i, o)) / np.sqrt(i))  # noqa: E731
    return GroundingParams(
        visual=init_mlp(DESCRIPTOR_DIM, D, D, rng),
        embedding=param(rng.normal(0.0, 1.0, size=(len(vocab), D))),
        text_mix=init_attn(D, rng),
        text_norm=init_norm(D),
        v_from_t=init_attn(D, rng),
        t_from_v=init_attn(D, rng),
        v_norm=init_norm(D),
        t_norm=init_norm(D),
        score_w=lin(D, 1),
        score_b=param(np.zeros(1)),
        proposal_head=init_box_head(D, rng),
        layers=layers,
        proj_l=lin(D, cfg.dim_l),
        proj_o=lin(D, cfg.dim_o),
        proj_t=lin(D, cfg.dim_o),
    )


@dataclass
class PreparedSample:
    """Geometry and token data that do not depend on learned parameters."""

    descriptors: np.ndarray
    seed_xyz: np.ndarray
    token_ids: np.ndarray
    target_idx: list
    surround_idx: list
    gt_box: np.ndarray
    object_boxes: np.ndarray
    target_object: int
    has_distractor: bool


def prepare_sample(sample: GroundingSample, cfg: ModelConfig, vocab: Vocab) -> PreparedSample:
    pts = sample.points
    idx = farthest_point_sample(pts[:, :3], cfg.num_seeds)
    desc = local_descriptors(pts, idx, sample.scene.room, cfg.ball_radius)
    tokens = tokenize(sample.utterance)
    split = partition_tokens(tokens, sample.token_labels)
    boxes = sample.scene.box_array()
    tobj = [o.object_id for o in sample.scene.objects].index(sample.target_id)
    return PreparedSample(
        descriptors=desc,
        seed_xyz=pts[idx, :3].copy(),
        token_ids=vocab.encode(tokens),
        target_idx=split.target_indices,
        surround_idx=split.surrounding_indices,
        gt_box=boxes[tobj].copy(),
        object_boxes=boxes,
        target_object=tobj,
        has_distractor=sample.has_distractor,
    )


@dataclass
class HeadOutputs:
    V_l: Tensor
    V_o: Tensor
    boxes: Tensor


@dataclass
class ForwardResult:
    heads: list  # HeadOutputs for the proposals and then every decoder layer
    text_o: Tensor  # projected target-token features, L_m x D_o
    query_idx: np.ndarray
    trace: DecoderTrace | None = None


def select_topk(V: Tensor, seed_xyz, score_w: Tensor, score_b: Tensor, head: MlpParams, K: int):
    """Pick the K best-scoring seeds as queries; ties go to the lower index.

    Selected features are scaled by ``sigmoid(score)`` so the score head
    receives gradient from the downstream losses; the selection itself is
    not differentiated. Returns ``(QuerySet, indices)``.
    """
    N = V.shape[0]
    if K > N:
        raise ValueError(f"cannot select {K} queries from {N} seeds")
    scores = (V @ score_w + score_b).reshape(N)
    idx = np.argsort(-scores.data, kind="stable")[:K]
    feats = V[idx] * sigmoid(scores[idx]).reshape(K, 1)
    boxes = predict_boxes(feats, head, np.asarray(seed_xyz)[idx])
    return QuerySet(feats, boxes, 0), idx


def project_head(q: QuerySet, params: GroundingParams) -> HeadOutputs:
    return HeadOutputs(q.features @ params.proj_l, q.features @ params.proj_o, q.boxes)


def forward(params: GroundingParams, cfg: ModelConfig, ps: PreparedSample, trace: bool = False) -> ForwardResult:
    V0 = embed_descriptors(ps.descriptors, params.visual)
    T0 = encode_text(ps.token_ids, params.embedding, params.text_mix, params.text_norm, cfg.heads)
    V, T = cross_encode(V0, T0, params.v_from_t, params.t_from_v, params.v_norm, params.t_norm, cfg.heads)
    q0, idx = select_topk(V, ps.seed_xyz, params.score_w, params.score_b, params.proposal_head, cfg.num_queries)
    T_m = T[np.asarray(ps.target_idx, dtype=np.int64)]
    s_idx = np.asarray(ps.surround_idx, dtype=np.int64)
    T_s = T[s_idx] if len(s_idx) else Tensor(np.zeros((0, cfg.dim)), dtype=T.dtype)
    T_all = T[np.asarray(sorted(ps.target_idx + ps.surround_idx), dtype=np.int64)]
    _, outs, tr = decode_stack(q0, V, ps.seed_xyz, T_m, T_s, params.layers, trace=trace, T_all=T_all)
    heads = [project_head(q, params) for q in [q0] + outs]
    return ForwardResult(heads, T_m @ params.proj_t, idx, tr)
