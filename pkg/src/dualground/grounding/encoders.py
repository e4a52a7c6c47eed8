"""Toy visual and text encoders plus the one-round visual/text cross encoder."""

from __future__ import annotations

import numpy as np

from ..attention import AttnParams, gated_cross_attention
from ..decoder import NormParams, norm
from ..numerics import MlpParams, Tensor, mlp_apply

DESCRIPTOR_DIM = 14


def farthest_point_sample(xyz: np.ndarray, n: int) -> np.ndarray:
    """Greedy farthest-point sampling starting from index 0; ties pick the lower index."""
    xyz = np.asarray(xyz, dtype=np.float64)
    if len(xyz) < n:
        raise ValueError(f"cannot sample {n} seeds from {len(xyz)} points")
    idx = np.zeros(n, dtype=np.int64)
    dist = np.full(len(xyz), np.inf)
    cur = 0
    for i in range(n):
        idx[i] = cur
        d = ((xyz - xyz[cur]) ** 2).sum(axis=1)
        np.minimum(dist, d, out=dist)
        cur = int(np.argmax(dist))
    return idx


def local_descriptors(points: np.ndarray, seed_idx: np.ndarray, room, radius: float = 0.4) -> np.ndarray:
    """Ball-pooled statistics around each seed.

    Columns: mean rgb (3), point density (1), seed xyz relative to the room
    center (3), neighbourhood centroid offset (3), neighbourhood extent (3),
    and the highest point in the vertical column over the seed (1).
    """
    pts = np.asarray(points, dtype=np.float64)
    xyz, rgb = pts[:, :3], pts[:, 3:6]
    seeds = xyz[seed_idx]
    room = np.asarray(room, dtype=np.float64)
    half_room = room / 2
    diff = xyz[None, :, :] - seeds[:, None, :]
    in_ball = (diff**2).sum(axis=-1) <= radius**2
    in_col = (diff[..., :2] ** 2).sum(axis=-1) <= radius**2
    cnt = in_ball.sum(axis=1).astype(np.float64)  # >= 1, each seed is its own neighbour
    w = in_ball / cnt[:, None]
    mean_rgb = w @ rgb
    centroid = w @ xyz
    big = np.where(in_ball[..., None], xyz[None], -np.inf).max(axis=1)
    small = np.where(in_ball[..., None], xyz[None], np.inf).min(axis=1)
    col_top = np.where(in_col, xyz[None, :, 2], -np.inf).max(axis=1)
    density = np.log1p(cnt) / np.log1p(len(xyz))
    return np.column_stack(
        [
            mean_rgb,
            density,
            (seeds - half_room) / half_room,
            (centroid - seeds) / radius,
            (big - small) / radius,
            col_top / room[2],
        ]
    )


def encode_visual(points, num_seeds: int, mlp: MlpParams, room=(8.0, 8.0, 3.0), radius: float = 0.4):
    """Sample seeds and embed their local descriptors.

    Returns ``(seed_xyz, V0)`` where ``V0`` is an ``N x D`` tensor.
    """
    pts = np.asarray(points)
    if len(pts) < num_seeds:
        raise ValueError(f"need at least {num_seeds} points, got {len(pts)}")
    idx = farthest_point_sample(pts[:, :3], num_seeds)
    desc = local_descriptors(pts, idx, room, radius)
    return pts[idx, :3].copy(), embed_descriptors(desc, mlp)


def embed_descriptors(desc: np.ndarray, mlp: MlpParams) -> Tensor:
    return mlp_apply(mlp, Tensor(desc, dtype=mlp.w1.dtype))


def encode_text(token_ids, embedding: Tensor, mix: AttnParams, mix_norm: NormParams, heads: int) -> Tensor:
    """Embedding lookup followed by one residual self-attention mixing layer."""
    ids = np.asarray(token_ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= embedding.shape[0]):
        raise ValueError("token id outside the embedding table")
    x = embedding[ids]
    mixed, _ = gated_cross_attention(x, x, x, mix, heads)
    return norm(x + mixed, mix_norm)


def cross_encode(V: Tensor, T: Tensor, v_from_t: AttnParams, t_from_v: AttnParams,
                 v_norm: NormParams, t_norm: NormParams, heads: int):
    """One round: seeds attend to text and text attends to seeds, residual + norm."""
    dv, _ = gated_cross_attention(V, T, T, v_from_t, heads)
    dt, _ = gated_cross_attention(T, V, V, t_from_v, heads)
    return norm(V + dv, v_norm), norm(T + dt, t_norm)
