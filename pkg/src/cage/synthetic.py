"""Procedural corpus of articulated objects.

One template per object category builds a base box plus children (doors,
drawers, trays, shelves, knobs, wheels, handles) with plausible joints:
doors hinge about a vertical front edge, drawers and trays slide outward,
knobs and wheels spin in place. Sibling boxes are laid out in disjoint
front-panel cells so resting overlap is zero by construction. Output objects
are normalized to the canonical frame and deterministic per seed.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .corpus import Corpus, CorpusEntry
from .kinematics import write_obj
from .schema import (
    ArticulationGraph,
    CATEGORIES,
    JointType,
    PartAbstraction,
    SemanticLabel,
    canonical_frame,
    fixed_joint_part,
)

# axes: x width, +y out the front, z up


def _box(cx, cy, cz, w, d, h) -> tuple[np.ndarray, np.ndarray]:
    half = np.array([w / 2, d / 2, h / 2])
    c = np.array([cx, cy, cz])
    return c - half, c + half


def _part(bmin, bmax, joint_type, axis_dir, axis_origin, joint_range, label) -> PartAbstraction:
    return PartAbstraction(
        np.asarray(bmin, float),
        np.asarray(bmax, float),
        joint_type,
        np.asarray(axis_dir, float),
        np.asarray(axis_origin, float),
        joint_range,
        label,
    )


class _Builder:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.parts: list[PartAbstraction] = []
        self.parents: list[int] = []

    def add(self, part: PartAbstraction, parent: int) -> int:
        self.parts.append(part)
        self.parents.append(parent)
        return len(self.parts) - 1

    def add_base(self, w, d, h) -> int:
        bmin, bmax = _box(0, 0, h / 2, w, d, h)
        return self.add(fixed_joint_part(bmin, bmax, SemanticLabel.BASE), -1)

    def add_door(self, cell, y_front, parent: int, rng_side=None) -> int:
        """Thin slab at the front of its cell, hinged on a vertical edge."""
        x0, x1, z0, z1 = cell
        t = 0.06
        gap = 0.012
        bmin = np.array([x0 + gap, y_front - t, z0 + gap])
        bmax = np.array([x1 - gap, y_front, z1 - gap])
        left_hinge = bool(self.rng.random() < 0.5) if rng_side is None else rng_side
        if left_hinge:
            origin = np.array([bmin[0], bmax[1], 0.5 * (bmin[2] + bmax[2])])
            axis = np.array([0.0, 0.0, 1.0])
        else:
            origin = np.array([bmax[0], bmax[1], 0.5 * (bmin[2] + bmax[2])])
            axis = np.array([0.0, 0.0, -1.0])
        swing = float(self.rng.uniform(85.0, 140.0))
        part = _part(bmin, bmax, JointType.REVOLUTE, axis, origin, (0.0, swing), SemanticLabel.DOOR)
        door = self.add(part, parent)
        self._door_hinge_left = left_hinge
        return door

    def add_drawer(self, cell, y_front, depth, parent: int,
                   label: SemanticLabel = SemanticLabel.DRAWER) -> int:
        x0, x1, z0, z1 = cell
        gap = 0.012
        body = float(self.rng.uniform(0.6, 0.85)) * depth
        bmin = np.array([x0 + gap, y_front - body, z0 + gap])
        bmax = np.array([x1 - gap, y_front, z1 - gap])
        travel = float(self.rng.uniform(0.5, 0.8)) * body
        center = 0.5 * (bmin + bmax)
        part = _part(bmin, bmax, JointType.PRISMATIC, (0.0, 1.0, 0.0), center,
                     (0.0, travel), label)
        return self.add(part, parent)

    def add_shelf(self, cell, y_front, depth, parent: int) -> int:
        x0, x1, z0, z1 = cell
        gap = 0.012
        t = 0.07
        zs = 0.5 * (z0 + z1)
        bmin = np.array([x0 + gap, y_front - 0.8 * depth, zs - t / 2])
        bmax = np.array([x1 - gap, y_front - 0.1 * depth, zs + t / 2])
        return self.add(fixed_joint_part(bmin, bmax, SemanticLabel.SHELF), parent)

    def add_door_handle(self, door: int) -> int:
        d = self.parts[door]
        w = d.bbox_max[0] - d.bbox_min[0]
        h = d.bbox_max[2] - d.bbox_min[2]
        bar_w, bar_d, bar_h = 0.05 * w + 0.02, 0.07, 0.35 * h
        # opposite the hinge
        x = d.bbox_max[0] - 0.12 * w if self._door_hinge_left else d.bbox_min[0] + 0.12 * w
        z = 0.5 * (d.bbox_min[2] + d.bbox_max[2])
        bmin, bmax = _box(x, d.bbox_max[1] + bar_d / 2, z, bar_w, bar_d, bar_h)
        return self.add(fixed_joint_part(bmin, bmax, SemanticLabel.HANDLE), door)

    def add_drawer_handle(self, drawer: int) -> int:
        d = self.parts[drawer]
        w = d.bbox_max[0] - d.bbox_min[0]
        bar_w, bar_d, bar_h = 0.55 * w, 0.07, 0.06
        x = 0.5 * (d.bbox_min[0] + d.bbox_max[0])
        z = 0.5 * (d.bbox_min[2] + d.bbox_max[2])
        bmin, bmax = _box(x, d.bbox_max[1] + bar_d / 2, z, bar_w, bar_d, bar_h)
        return self.add(fixed_joint_part(bmin, bmax, SemanticLabel.HANDLE), drawer)

    def add_knob(self, x, z, y_front, parent: int, size=0.06) -> int:
        bmin, bmax = _box(x, y_front + 0.035, z, size, 0.07, size)
        center = 0.5 * (bmin + bmax)
        if self.rng.random() < 0.2:
            # pull-out timer knob: slight outward travel coupled to the spin
            part = _part(bmin, bmax, JointType.SCREW, (0.0, 1.0, 0.0), center,
                         (0.0, 0.015), SemanticLabel.KNOB)
        else:
            part = _part(bmin, bmax, JointType.CONTINUOUS, (0.0, 1.0, 0.0), center,
                         (0.0, 0.0), SemanticLabel.KNOB)
        return self.add(part, parent)

    def add_knob_strip(self, x0, x1, z, y_front, parent: int, count: int) -> None:
        xs = np.linspace(x0, x1, count + 2)[1:-1]
        for x in xs:
            self.add_knob(float(x), z, y_front, parent)

    def add_wheel(self, x, y, parent: int, radius=0.07) -> int:
        bmin, bmax = _box(x, y, radius, 0.06, 2 * radius, 2 * radius)
        center = 0.5 * (bmin + bmax)
        part = _part(bmin, bmax, JointType.CONTINUOUS, (1.0, 0.0, 0.0), center,
                     (0.0, 0.0), SemanticLabel.WHEEL)
        return self.add(part, parent)


def _front_cells(x0, x1, z0, z1, rows, cols):
    xs = np.linspace(x0, x1, cols + 1)
    zs = np.linspace(z0, z1, rows + 1)
    return [
        (float(xs[c]), float(xs[c + 1]), float(zs[r]), float(zs[r + 1]))
        for r in range(rows)
        for c in range(cols)
    ]


def _storage(b: _Builder):
    rng = b.rng
    w, d, h = rng.uniform(0.9, 1.6), rng.uniform(0.4, 0.6), rng.uniform(0.9, 1.9)
    base = b.add_base(w, d, h)
    yf = d / 2
    k = int(rng.integers(1, 5))
    if k <= 2:
        rows, cols = (k, 1) if rng.random() < 0.5 or k == 1 else (1, 2)
    elif k == 3:
        rows, cols = 3, 1
    else:
        rows, cols = (2, 2) if rng.random() < 0.6 else (4, 1)
    cells = _front_cells(-w / 2, w / 2, 0.05 * h, 0.95 * h, rows, cols)
    for cell in cells:
        kind = rng.random()
        if kind < 0.45:
            drawer = b.add_drawer(cell, yf, d, base)
            b.add_drawer_handle(drawer)
        elif kind < 0.8:
            door = b.add_door(cell, yf, base)
            b.add_door_handle(door)
        else:
            b.add_shelf(cell, yf, d, base)


def _table(b: _Builder):
    rng = b.rng
    w, d, h = rng.uniform(1.2, 2.0), rng.uniform(0.6, 1.0), rng.uniform(0.7, 0.9)
    slab = 0.12 * h
    bmin, bmax = _box(0, 0, h - slab / 2, w, d, slab)
    base = b.add(fixed_joint_part(bmin, bmax, SemanticLabel.BASE), -1)
    yf = d / 2
    n_drawers = int(rng.integers(1, 4))
    cells = _front_cells(-0.45 * w, 0.45 * w, h - slab - 0.22 * h, h - slab - 0.02 * h, 1, n_drawers)
    for cell in cells:
        drawer = b.add_drawer(cell, yf, 0.8 * d, base)
        b.add_drawer_handle(drawer)
    if rng.random() < 0.5:
        for sx in (-1, 1):
            for sy in (-1, 1):
                b.add_wheel(sx * 0.45 * w, sy * 0.4 * d, base)


def _refrigerator(b: _Builder):
    rng = b.rng
    w, d, h = rng.uniform(0.6, 1.0), rng.uniform(0.6, 0.8), rng.uniform(1.4, 2.0)
    base = b.add_base(w, d, h)
    yf = d / 2
    style = rng.random()
    if style < 0.35:  # single door
        cells = _front_cells(-w / 2, w / 2, 0.03 * h, 0.97 * h, 1, 1)
    elif style < 0.7:  # top freezer
        split = float(rng.uniform(0.6, 0.75)) * h
        cells = [(-w / 2, w / 2, 0.03 * h, split), (-w / 2, w / 2, split, 0.97 * h)]
    else:  # side-by-side
        cells = _front_cells(-w / 2, w / 2, 0.03 * h, 0.97 * h, 1, 2)
    for i, cell in enumerate(cells):
        door = b.add_door(cell, yf, base, rng_side=(i % 2 == 1))
        b.add_door_handle(door)


def _dishwasher(b: _Builder):
    rng = b.rng
    w, d, h = rng.uniform(0.55, 0.7), rng.uniform(0.55, 0.7), rng.uniform(0.75, 0.9)
    base = b.add_base(w, d, h)
    yf = d / 2
    if rng.random() < 0.6:
        door = b.add_door((-w / 2, w / 2, 0.04 * h, 0.86 * h), yf, base)
        b.add_door_handle(door)
        if rng.random() < 0.5:
            b.add_knob_strip(-0.3 * w, 0.3 * w, 0.93 * h, yf, base, int(rng.integers(1, 3)))
    else:
        for cell in _front_cells(-w / 2, w / 2, 0.08 * h, 0.9 * h, 2, 1):
            b.add_drawer(cell, yf, d, base, label=SemanticLabel.TRAY)


def _safe(b: _Builder):
    rng = b.rng
    w, d, h = rng.uniform(0.4, 0.8), rng.uniform(0.4, 0.6), rng.uniform(0.45, 0.9)
    base = b.add_base(w, d, h)
    yf = d / 2
    door = b.add_door((-w / 2, w / 2, 0.05 * h, 0.95 * h), yf, base)
    b.add_door_handle(door)
    dp = b.parts[door]
    b.add_knob(
        float(0.5 * (dp.bbox_min[0] + dp.bbox_max[0])),
        float(0.5 * (dp.bbox_min[2] + dp.bbox_max[2]) + 0.12 * (dp.bbox_max[2] - dp.bbox_min[2])),
        float(dp.bbox_max[1]),
        door,
        size=0.05,
    )


def _oven(b: _Builder):
    rng = b.rng
    w, d, h = rng.uniform(0.6, 0.9), rng.uniform(0.55, 0.7), rng.uniform(0.7, 0.9)
    base = b.add_base(w, d, h)
    yf = d / 2
    strip_z = 0.92 * h
    if rng.random() < 0.6:
        door = b.add_door((-w / 2, w / 2, 0.06 * h, 0.82 * h), yf, base)
        b.add_door_handle(door)
    else:
        for cell in _front_cells(-w / 2, w / 2, 0.08 * h, 0.8 * h, int(rng.integers(1, 3)), 1):
            b.add_drawer(cell, yf, d, base, label=SemanticLabel.TRAY)
    b.add_knob_strip(-0.35 * w, 0.35 * w, strip_z, yf, base, int(rng.integers(2, 5)))


def _washer(b: _Builder):
    rng = b.rng
    w, d, h = rng.uniform(0.55, 0.7), rng.uniform(0.55, 0.7), rng.uniform(0.8, 0.95)
    base = b.add_base(w, d, h)
    yf = d / 2
    door = b.add_door((-0.35 * w, 0.35 * w, 0.2 * h, 0.75 * h), yf, base)
    b.add_door_handle(door)
    b.add_knob_strip(-0.3 * w, 0.3 * w, 0.9 * h, yf, base, int(rng.integers(1, 3)))


def _microwave(b: _Builder):
    rng = b.rng
    w, d, h = rng.uniform(0.5, 0.8), rng.uniform(0.35, 0.5), rng.uniform(0.3, 0.5)
    base = b.add_base(w, d, h)
    yf = d / 2
    split = float(rng.uniform(0.62, 0.75))
    door = b.add_door((-w / 2, -w / 2 + split * w, 0.08 * h, 0.92 * h), yf, base,
                      rng_side=True)
    b.add_door_handle(door)
    strip_x0, strip_x1 = -w / 2 + split * w, w / 2
    xs = 0.5 * (strip_x0 + strip_x1)
    for i in range(int(rng.integers(1, 3))):
        b.add_knob(xs, (0.35 + 0.3 * i) * h, yf, base)


_TEMPLATES = {
    "Storage": _storage,
    "Table": _table,
    "Refrigerator": _refrigerator,
    "Dishwasher": _dishwasher,
    "Safe": _safe,
    "Oven": _oven,
    "Washer": _washer,
    "Microwave": _microwave,
}


def normalize_object(parts: list[PartAbstraction]) -> list[PartAbstraction]:
    """Map parts into the canonical frame (centered, fits [-1, 1]^3)."""
    center, scale = canonical_frame(parts)
    out = []
    for p in parts:
        q = p.copy()
        q.bbox_min = (p.bbox_min - center) * scale
        q.bbox_max = (p.bbox_max - center) * scale
        if p.joint_type == JointType.FIXED:
            q.axis_direction = np.array([0.0, 0.0, 1.0])
            q.axis_origin = np.zeros(3)
        else:
            q.axis_origin = (p.axis_origin - center) * scale
        if p.joint_type.is_translational:
            q.joint_range = (p.joint_range[0] * scale, p.joint_range[1] * scale)
        out.append(q)
    return out


def generate_object(
    category: str, rng: np.random.Generator
) -> tuple[list[PartAbstraction], ArticulationGraph]:
    if category not in _TEMPLATES:
        raise ValueError(f"unknown category {category!r}")
    b = _Builder(rng)
    _TEMPLATES[category](b)
    parts = normalize_object(b.parts)
    graph = ArticulationGraph(len(parts), np.asarray(b.parents), category)
    for i, p in enumerate(parts):
        p.validate(i)
    return parts, graph


def _resolve_mix(category_mix) -> tuple[list[str], np.ndarray]:
    if category_mix is None:
        category_mix = {c: 1.0 for c in CATEGORIES}
    cats = list(category_mix.keys())
    weights = np.asarray([category_mix[c] for c in cats], dtype=np.float64)
    if np.any(weights < 0) or weights.sum() <= 0:
        raise ValueError("category mix weights must be nonnegative and sum > 0")
    return cats, weights / weights.sum()


def generate_synthetic_corpus(
    n_objects: int, category_mix: dict[str, float] | None = None, seed: int = 0
) -> list[tuple[list[PartAbstraction], ArticulationGraph]]:
    if n_objects < 1:
        raise ValueError("n_objects must be >= 1")
    rng = np.random.default_rng(seed)
    cats, probs = _resolve_mix(category_mix)
    picks = rng.choice(len(cats), size=n_objects, p=probs)
    return [generate_object(cats[int(c)], rng) for c in picks]


def _subdivided_box_mesh(bmin, bmax, res: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Box surface as a per-face grid; vertex AABB equals the box exactly."""
    bmin = np.asarray(bmin, float)
    bmax = np.asarray(bmax, float)
    verts, faces = [], []
    u = np.linspace(0.0, 1.0, res + 1)
    for axis in range(3):
        for side in (0, 1):
            a1, a2 = [a for a in range(3) if a != axis]
            base_count = len(verts)
            for i in u:
                for j in u:
                    p = np.empty(3)
                    p[axis] = bmax[axis] if side else bmin[axis]
                    p[a1] = bmin[a1] + i * (bmax[a1] - bmin[a1])
                    p[a2] = bmin[a2] + j * (bmax[a2] - bmin[a2])
                    verts.append(p)
            n = res + 1
            for i in range(res):
                for j in range(res):
                    v00 = base_count + i * n + j
                    v01, v10, v11 = v00 + 1, v00 + n, v00 + n + 1
                    faces.append([v00, v10, v11])
                    faces.append([v00, v11, v01])
    return np.asarray(verts), np.asarray(faces, dtype=np.int64)


def write_corpus(
    out_dir: str | Path,
    n_objects: int,
    category_mix: dict[str, float] | None = None,
    seed: int = 0,
    with_meshes: bool = True,
    train_frac: float = 0.8,
) -> Corpus:
    """Generate, write object documents (+ per-part meshes), and a manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mesh_dir = out_dir / "meshes"
    if with_meshes:
        mesh_dir.mkdir(exist_ok=True)

    objects = generate_synthetic_corpus(n_objects, category_mix, seed)
    entries = []
    for idx, (parts, graph) in enumerate(objects):
        oid = f"{graph.category.lower()}_{idx:04d}"
        mesh_refs: list[str | None] = [None] * len(parts)
        if with_meshes:
            for i, p in enumerate(parts):
                ref = f"meshes/{oid}_p{i}.obj"
                v, f = _subdivided_box_mesh(p.bbox_min, p.bbox_max)
                write_obj(out_dir / ref, v, f)
                mesh_refs[i] = ref
        entries.append(CorpusEntry(oid, parts, graph, mesh_refs))

    n_train = max(1, int(round(train_frac * len(entries)))) if len(entries) > 1 else 1
    ids = [e.object_id for e in entries]
    corpus = Corpus(out_dir, entries, train_ids=ids[:n_train], test_ids=ids[n_train:])
    corpus.save()
    return corpus
