"""Synthetic rooms, referring utterances with ground-truth labels, and point clouds.

Scenes are rooms with axis-aligned furniture standing on the floor. Every
category has a characteristic size, so category is recoverable from geometry;
colors are independent. Utterances come from two templates::

    the <color> <category> <relation> the <anchor> .
    there is a <color> <category> . it is <relation> the <anchor> .

Relations are view-independent and evaluated on box centers in the room
frame (+x is right, +y is away from the viewer).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import Box3
from .textsplit import COLORS, SCENE_CATEGORIES, Label

# canonical (l, w, h) in meters; heights are all distinct
CATEGORY_SIZES = {
    "bin": (0.35, 0.35, 0.30),
    "bed": (2.00, 1.60, 0.45),
    "sofa": (1.80, 0.80, 0.60),
    "table": (1.40, 0.90, 0.75),
    "chair": (0.50, 0.50, 0.90),
    "plant": (0.40, 0.40, 1.05),
    "shelf": (1.00, 0.35, 1.20),
    "lamp": (0.30, 0.30, 1.50),
    "cabinet": (0.80, 0.50, 1.80),
    "door": (0.90, 0.10, 2.00),
}

COLOR_RGB = {
    "red": (0.85, 0.15, 0.15),
    "green": (0.15, 0.70, 0.20),
    "blue": (0.15, 0.25, 0.85),
    "yellow": (0.90, 0.85, 0.15),
    "black": (0.08, 0.08, 0.08),
    "white": (0.95, 0.95, 0.95),
}
FLOOR_RGB = (0.5, 0.5, 0.5)

RELATION_MARGIN = 0.3  # meters
NEAR_DIST = 2.0
FAR_DIST = 4.0


def _rel_left(t, a):
    return t.center[0] < a.center[0] - RELATION_MARGIN


def _rel_right(t, a):
    return t.center[0] > a.center[0] + RELATION_MARGIN


def _rel_front(t, a):
    return t.center[1] < a.center[1] - RELATION_MARGIN


def _rel_behind(t, a):
    return t.center[1] > a.center[1] + RELATION_MARGIN


def _planar_dist(t, a):
    return math.hypot(t.center[0] - a.center[0], t.center[1] - a.center[1])


RELATIONS = {
    "left of": _rel_left,
    "right of": _rel_right,
    "in front of": _rel_front,
    "behind": _rel_behind,
    "near": lambda t, a: _planar_dist(t, a) < NEAR_DIST,
    "far from": lambda t, a: _planar_dist(t, a) > FAR_DIST,
}
_RELATION_FILLERS = {"of", "from"}  # part of the phrase but labelled Other


class SceneGenerationError(RuntimeError):
    pass


class RenderError(RuntimeError):
    pass


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class SceneObject:
    object_id: int
    category: str
    color: str
    box: Box3

    @property
    def center(self):
        return self.box.center


@dataclass
class SceneConfig:
    num_objects: int = 8
    categories: tuple = SCENE_CATEGORIES
    colors: tuple = COLORS
    room: tuple = (8.0, 8.0, 3.0)
    gap: float = 0.1
    size_jitter: float = 0.05
    max_tries: int = 500


@dataclass
class SceneSpec:
    scene_id: str
    objects: list
    room: tuple = (8.0, 8.0, 3.0)

    def get(self, object_id: int) -> SceneObject:
        for o in self.objects:
            if o.object_id == object_id:
                return o
        raise KeyError(object_id)

    @property
    def room_center(self) -> np.ndarray:
        return np.asarray(self.room, dtype=np.float64) / 2

    def box_array(self) -> np.ndarray:
        return np.stack([o.box.as_array() for o in self.objects])


def _footprints_clash(a: Box3, b: Box3, gap: float) -> bool:
    return all(
        abs(a.center[i] - b.center[i]) < (a.size[i] + b.size[i]) / 2 + gap for i in range(2)
    )


def gen_scene(seed, cfg: SceneConfig | None = None, scene_id: str | None = None) -> SceneSpec:
    """Rejection-sample non-overlapping furniture; objects 0 and 1 share a category before shuffling."""
    cfg = cfg or SceneConfig()
    if cfg.num_objects < 2:
        raise ValueError("a scene needs at least two objects")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cats = list(cfg.categories)
    dup = cats[rng.integers(len(cats))]
    chosen = [dup, dup] + [cats[i] for i in rng.integers(len(cats), size=cfg.num_objects - 2)]
    chosen = [chosen[i] for i in rng.permutation(len(chosen))]
    Lx, Ly, _ = cfg.room
    placed: list = []
    for idx, cat in enumerate(chosen):
        base = np.asarray(CATEGORY_SIZES[cat])
        size = base * rng.uniform(1 - cfg.size_jitter, 1 + cfg.size_jitter, size=3)
        if rng.random() < 0.5:  # random 90 degree turn of the footprint
            size = size[[1, 0, 2]]
        color = cfg.colors[rng.integers(len(cfg.colors))]
        for _ in range(cfg.max_tries):
            cx = rng.uniform(size[0] / 2, Lx - size[0] / 2)
            cy = rng.uniform(size[1] / 2, Ly - size[1] / 2)
            box = Box3((cx, cy, size[2] / 2), tuple(size))
            if not any(_footprints_clash(box, o.box, cfg.gap) for o in placed):
                placed.append(SceneObject(idx, cat, color, box))
                break
        else:
            raise SceneGenerationError(f"could not place object {idx} ({cat}) after {cfg.max_tries} tries")
    return SceneSpec(scene_id or "scene", placed, tuple(cfg.room))


def _relation_tokens(rel: str) -> list:
    words = rel.split()
    return [(w, Label.OTHER if w in _RELATION_FILLERS else Label.RELATIONSHIP) for w in words]


def render_utterance(scene: SceneSpec, target_id: int, rng=None, require_relation: bool = True):
    """Describe ``target_id`` so that it is the only object matching the description.

    Returns ``(utterance, labels)`` with one label per token.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    target = scene.get(target_id)
    others = [o for o in scene.objects if o.object_id != target_id]
    distractors = [o for o in others if o.category == target.category and o.color == target.color]
    same_cat = any(o.category == target.category for o in others)
    head = [("the", Label.OTHER), (target.color, Label.ATTRIBUTE), (target.category, Label.MAIN_OBJECT)]
    alt_head = [("there", Label.OTHER), ("is", Label.OTHER), ("a", Label.OTHER)] + head[1:]

    if not (require_relation or same_cat or distractors):
        parts = head if rng.random() < 0.5 else alt_head
        parts = parts + [(".", Label.OTHER)]
    else:
        counts: dict = {}
        for o in scene.objects:
            counts[o.category] = counts.get(o.category, 0) + 1
        options = []
        for anchor in others:
            if counts[anchor.category] != 1 or anchor.category == target.category:
                continue
            for rel, pred in RELATIONS.items():
                if pred(target.box, anchor.box) and not any(pred(d.box, anchor.box) for d in distractors):
                    options.append((anchor, rel))
        if not options:
            raise RenderError(f"no disambiguating relation for object {target_id}")
        anchor, rel = options[rng.integers(len(options))]
        tail = _relation_tokens(rel) + [("the", Label.OTHER), (anchor.category, Label.AUXILIARY_OBJECT)]
        if rng.random() < 0.5:
            parts = head + tail + [(".", Label.OTHER)]
        else:
            parts = alt_head + [(".", Label.OTHER), ("it", Label.PRONOUN), ("is", Label.OTHER)]
            parts = parts + tail + [(".", Label.OTHER)]
    utterance = " ".join(w for w, _ in parts)
    labels = [l.value for _, l in parts]
    if interpret(utterance, scene) != {target_id}:
        raise RenderError(f"utterance {utterance!r} does not single out object {target_id}")
    return utterance, labels


_RELATION_PHRASES = sorted(((tuple(r.split()), r) for r in RELATIONS), key=lambda x: -len(x[0]))


def interpret(utterance: str, scene: SceneSpec) -> set:
    """Resolve an utterance against a scene; returns the ids of all matching objects."""
    words = re.findall(r"[a-z]+", utterance.lower())
    cats = {o.category for o in scene.objects} | set(CATEGORY_SIZES)
    main_i = next((i for i, w in enumerate(words) if w in cats), None)
    if main_i is None:
        return set()
    category = words[main_i]
    color = words[main_i - 1] if main_i > 0 and words[main_i - 1] in COLOR_RGB else None
    relation = anchor_cat = None
    i = main_i + 1
    while i < len(words) and relation is None:
        for phrase, name in _RELATION_PHRASES:
            if tuple(words[i : i + len(phrase)]) == phrase:
                relation = name
                rest = words[i + len(phrase) :]
                anchor_cat = next((w for w in rest if w in cats), None)
                break
        i += 1
    hits = {
        o.object_id
        for o in scene.objects
        if o.category == category and (color is None or o.color == color)
    }
    if relation is None:
        return hits
    if anchor_cat is None:
        return set()
    pred = RELATIONS[relation]
    anchors = [o for o in scene.objects if o.category == anchor_cat]
    return {
        oid
        for oid in hits
        if any(pred(scene.get(oid).box, a.box) for a in anchors if a.object_id != oid)
    }


def sample_points(
    scene: SceneSpec,
    n: int = 1024,
    noise: float = 0.01,
    seed=0,
    clutter_frac: float = 0.1,
    color_jitter: float = 0.03,
) -> np.ndarray:
    """Area-weighted samples on every object's box surface plus floor clutter.

    Returns ``n x 6`` rows of (x, y, z, r, g, b).
    """
    k = len(scene.objects)
    if n < 8 * k:
        raise ValueError(f"need at least {8 * k} points for {k} objects")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n_clutter = min(int(round(n * clutter_frac)), n - 8 * k)
    n_obj = n - n_clutter
    areas = []
    for o in scene.objects:
        l, w, h = o.box.size
        areas.append(2 * (l * w + l * h + w * h))
    areas = np.asarray(areas)
    counts = 8 + rng.multinomial(n_obj - 8 * k, areas / areas.sum())
    chunks = []
    for o, c in zip(scene.objects, counts):
        ctr = np.asarray(o.box.center)
        half = np.asarray(o.box.size) / 2
        l, w, h = o.box.size
        face_area = np.array([w * h, w * h, l * h, l * h, l * w, l * w])
        faces = rng.choice(6, size=c, p=face_area / face_area.sum())
        uv = rng.uniform(-1.0, 1.0, size=(c, 3)) * half
        axis = faces // 2
        sign = np.where(faces % 2 == 0, -1.0, 1.0)
        uv[np.arange(c), axis] = sign * half[axis]
        xyz = ctr + uv
        rgb = np.asarray(COLOR_RGB[o.color]) + rng.normal(0.0, color_jitter, size=(c, 3))
        chunks.append(np.hstack([xyz, rgb]))
    Lx, Ly, _ = scene.room
    fl = np.column_stack([rng.uniform(0, Lx, n_clutter), rng.uniform(0, Ly, n_clutter), np.zeros(n_clutter)])
    frgb = np.asarray(FLOOR_RGB) + rng.normal(0.0, color_jitter, size=(n_clutter, 3))
    chunks.append(np.hstack([fl, frgb]))
    pts = np.vstack(chunks)
    if noise > 0:
        pts[:, :3] += rng.normal(0.0, noise, size=(n, 3))
    pts[:, 3:] = np.clip(pts[:, 3:], 0.0, 1.0)
    return pts


@dataclass
class GroundingSample:
    scene: SceneSpec
    utterance: str
    token_labels: list
    target_id: int
    pointcloud_seed: int
    n_points: int = 1024
    noise: float = 0.01

    @cached_property
    def points(self) -> np.ndarray:
        return sample_points(self.scene, self.n_points, self.noise, self.pointcloud_seed)

    @property
    def target_box(self) -> Box3:
        return self.scene.get(self.target_id).box

    @property
    def has_distractor(self) -> bool:
        """True when another object shares the target's category (the "multiple" split)."""
        t = self.scene.get(self.target_id)
        return any(o.category == t.category for o in self.scene.objects if o.object_id != t.object_id)

    def to_record(self) -> dict:
        return {
            "scene_id": self.scene.scene_id,
            "objects": [
                {
                    "id": o.object_id,
                    "category": o.category,
                    "color": o.color,
                    "center": list(o.box.center),
                    "size": list(o.box.size),
                }
                for o in self.scene.objects
            ],
            "utterance": self.utterance,
            "token_labels": list(self.token_labels),
            "target_id": self.target_id,
            "pointcloud_seed": self.pointcloud_seed,
        }

    @classmethod
    def from_record(cls, rec: dict, n_points: int = 1024, noise: float = 0.01) -> "GroundingSample":
        objs = [
            SceneObject(int(o["id"]), str(o["category"]), str(o["color"]), Box3(tuple(o["center"]), tuple(o["size"])))
            for o in rec["objects"]
        ]
        scene = SceneSpec(str(rec["scene_id"]), objs)
        sample = cls(scene, str(rec["utterance"]), list(rec["token_labels"]), int(rec["target_id"]),
                     int(rec["pointcloud_seed"]), n_points, noise)
        scene.get(sample.target_id)
        return sample


def make_sample(seed: int, index: int, cfg: SceneConfig | None = None, max_attempts: int = 50) -> GroundingSample:
    """Scene ``index`` of the dataset generated from ``seed``."""
    cfg = cfg or SceneConfig()
    for attempt in range(max_attempts):
        rng = np.random.default_rng([seed, index, attempt])
        try:
            scene = gen_scene(rng, cfg, scene_id=f"s{seed}_{index:05d}")
        except SceneGenerationError:
            continue
        for tid in rng.permutation(len(scene.objects)):
            try:
                utt, labels = render_utterance(scene, int(scene.objects[tid].object_id), rng)
            except RenderError:
                continue
            pc_seed = int(rng.integers(2**31 - 1))
            return GroundingSample(scene, utt, labels, int(scene.objects[tid].object_id), pc_seed)
    raise SceneGenerationError(f"could not build sample {index} for seed {seed}")


def generate_dataset(seed: int, num_scenes: int, objects_per_scene: int = 8, start: int = 0) -> list:
    cfg = SceneConfig(num_objects=objects_per_scene)
    return [make_sample(seed, i, cfg) for i in range(start, start + num_scenes)]


def save_dataset(path, samples) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_record(), sort_keys=True) + "\n")


def load_dataset(path, n_points: int = 1024, noise: float = 0.01) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(GroundingSample.from_record(json.loads(line), n_points, noise))
            except (ValueError, KeyError, TypeError) as exc:
                raise DatasetError(f"{path}:{lineno}: malformed record ({exc})") from exc
    return out


def dataset_summary(samples) -> dict:
    n = len(samples)
    multi = sum(s.has_distractor for s in samples)
    rels = {}
    for s in samples:
        for r in RELATIONS:
            if f" {r} " in f" {s.utterance} ":
                rels[r] = rels.get(r, 0) + 1
                break
    return {"samples": n, "multiple": multi, "unique": n - multi, "relations": dict(sorted(rels.items()))}
