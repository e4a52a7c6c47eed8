"""Axis-aligned boxes and point-to-box relative positioning.

Three ways to express where a seed point sits relative to a box:

* ``box_surface``: offset to the closest point on the box surface. Outside
  points get the per-axis gap ``max(|d| - half, 0)`` (all components >= 0);
  strictly interior points get the negated distance to the nearest face on
  that face's axis and zeros elsewhere.
* ``center``: raw offset from the box center.
* ``vertex``: offsets from each of the eight corners.

Offsets are in meters and unnormalised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

SCHEMES = ("box_surface", "center", "vertex")

Point3 = tuple  # (x, y, z) in meters


class DegenerateBoxError(ValueError):
    pass


@dataclass(frozen=True)
class Box3:
    """Axis-aligned box given by its center and (l, w, h) extents."""

    center: tuple
    size: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        s = tuple(float(v) for v in self.size)
        if len(c) != 3 or len(s) != 3:
            raise DegenerateBoxError("center and size need three components")
        if not all(math.isfinite(v) for v in c + s):
            raise DegenerateBoxError(f"non-finite box {c} {s}")
        if not all(v > 0 for v in s):
            raise DegenerateBoxError(f"box extents must be positive, got {s}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "size", s)

    @classmethod
    def from_array(cls, a: Sequence[float]) -> "Box3":
        return cls(tuple(a[:3]), tuple(a[3:6]))

    def as_array(self) -> np.ndarray:
        return np.array(self.center + self.size, dtype=np.float64)

    @property
    def min_corner(self) -> tuple:
        return tuple(c - s / 2 for c, s in zip(self.center, self.size))

    @property
    def max_corner(self) -> tuple:
        return tuple(c + s / 2 for c, s in zip(self.center, self.size))

    @property
    def volume(self) -> float:
        l, w, h = self.size
        return l * w * h

    def translated(self, t: Sequence[float]) -> "Box3":
        return Box3(tuple(c + d for c, d in zip(self.center, t)), self.size)


def _check(b: Box3) -> None:
    if not all(s > 0 for s in b.size):
        raise DegenerateBoxError(f"box extents must be positive, got {b.size}")


def box_surface_offset(a: Point3, b: Box3) -> tuple:
    _check(b)
    d = [a[i] - b.center[i] for i in range(3)]
    half = [b.size[i] / 2 for i in range(3)]
    inside = all(abs(d[i]) < half[i] for i in range(3))
    if not inside:
        return tuple(max(abs(d[i]) - half[i], 0.0) for i in range(3))
    gaps = [half[i] - abs(d[i]) for i in range(3)]
    # strict comparisons keep the x, then y, then z priority on ties
    axis = 0
    for i in (1, 2):
        if gaps[i] < gaps[axis]:
            axis = i
    out = [0.0, 0.0, 0.0]
    out[axis] = -gaps[axis]
    return tuple(out)


def center_offset(a: Point3, b: Box3) -> tuple:
    return tuple(a[i] - b.center[i] for i in range(3))


def _corner_signs() -> np.ndarray:
    # binary enumeration, x fastest; bit 0 -> minus, bit 1 -> plus
    return np.array([[1 if (k >> ax) & 1 else -1 for ax in range(3)] for k in range(8)], dtype=np.float64)


CORNER_SIGNS = _corner_signs()


def box_corners(b: Box3) -> list:
    return [
        tuple(b.center[ax] + CORNER_SIGNS[k, ax] * b.size[ax] / 2 for ax in range(3))
        for k in range(8)
    ]


def vertex_offsets(a: Point3, b: Box3) -> list:
    """Offsets ``a - corner`` for the eight corners in fixed binary order."""
    return [tuple(a[ax] - c[ax] for ax in range(3)) for c in box_corners(b)]


def boxes_to_array(boxes: Iterable) -> np.ndarray:
    rows = [b.as_array() if isinstance(b, Box3) else np.asarray(b, dtype=np.float64) for b in boxes]
    arr = np.asarray(rows, dtype=np.float64).reshape(-1, 6)
    if np.any(arr[:, 3:] <= 0) or not np.isfinite(arr).all():
        raise DegenerateBoxError("box extents must be positive and finite")
    return arr


def offset_field(points, boxes, scheme: str = "box_surface", dtype=np.float64) -> np.ndarray:
    """Offsets for every (box, point) pair, box-major.

    Returns ``K x N x 3``, or ``K x N x 8 x 3`` for the vertex scheme.
    """
    pts = np.asarray(points, dtype=dtype).reshape(-1, 3)
    bx = boxes_to_array(boxes).astype(dtype, copy=False)
    if len(pts) == 0 or len(bx) == 0:
        raise ValueError("offset_field needs at least one point and one box")
    if scheme == "center":
        return pts[None, :, :] - bx[:, None, :3]
    if scheme == "vertex":
        corners = bx[:, None, :3] + CORNER_SIGNS.astype(dtype)[None, :, :] * (bx[:, None, 3:] / 2)
        return pts[None, :, None, :] - corners[:, None, :, :]
    if scheme != "box_surface":
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    # per-axis K x N planes keep every pass contiguous
    gaps = [bx[:, None, 3 + i] / 2 - np.abs(pts[None, :, i] - bx[:, None, i]) for i in range(3)]
    m = np.minimum(np.minimum(gaps[0], gaps[1]), gaps[2])
    inside = m > 0
    out = np.empty((len(bx), len(pts), 3), dtype=dtype)
    claimed = ~inside
    for i, g in enumerate(gaps):
        # strictly inside: only the first axis attaining the smallest gap moves
        pick = ~claimed & (g == m)
        claimed |= pick
        out[..., i] = np.where(pick, -m, np.maximum(-g, 0))
    return out


def closest_point_oracle(a: Point3, b: Box3) -> tuple:
    """Closest surface point and its distance, written independently of the offset code.

    Returns ``(m, d)``.
    """
    lo = b.min_corner
    hi = b.max_corner
    x, y, z = (float(v) for v in a)
    strictly_in = lo[0] < x < hi[0] and lo[1] < y < hi[1] and lo[2] < z < hi[2]
    if not strictly_in:
        m = (min(max(x, lo[0]), hi[0]), min(max(y, lo[1]), hi[1]), min(max(z, lo[2]), hi[2]))
    else:
        best = None
        for ax, v in enumerate((x, y, z)):
            for face in (lo[ax], hi[ax]):
                dist = abs(v - face)
                if best is None or dist < best[0]:
                    best = (dist, ax, face)
        _, ax, face = best
        m = [x, y, z]
        m[ax] = face
        m = tuple(m)
    d = math.sqrt((x - m[0]) ** 2 + (y - m[1]) ** 2 + (z - m[2]) ** 2)
    return m, d


def box_iou(a, b) -> float:
    """Axis-aligned IoU between two boxes (``Box3`` or 6-vectors)."""
    a = a.as_array() if isinstance(a, Box3) else np.asarray(a, dtype=np.float64)
    b = b.as_array() if isinstance(b, Box3) else np.asarray(b, dtype=np.float64)
    lo = np.maximum(a[:3] - a[3:] / 2, b[:3] - b[3:] / 2)
    hi = np.minimum(a[:3] + a[3:] / 2, b[:3] + b[3:] / 2)
    inter = float(np.prod(np.clip(hi - lo, 0.0, None)))
    union = float(np.prod(a[3:]) + np.prod(b[3:]) - inter)
    return inter / union


def pairwise_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """IoU matrix between ``A x 6`` and ``B x 6`` box arrays."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 6)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 6)
    lo = np.maximum(a[:, None, :3] - a[:, None, 3:] / 2, b[None, :, :3] - b[None, :, 3:] / 2)
    hi = np.minimum(a[:, None, :3] + a[:, None, 3:] / 2, b[None, :, :3] + b[None, :, 3:] / 2)
    inter = np.prod(np.clip(hi - lo, 0.0, None), axis=-1)
    union = np.prod(a[:, 3:], axis=-1)[:, None] + np.prod(b[:, 3:], axis=-1)[None, :] - inter
    return inter / union
