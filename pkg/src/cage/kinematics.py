"""Rigid-body posing of part abstractions.

Each joint maps an articulation parameter tau in [0, 1] to a rigid transform
of the part relative to its parent; world transforms compose down the tree.
Posed boxes feed the surface sampler used by the point-cloud metrics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schema import ArticulationGraph, JointType, PartAbstraction, SchemaError

# translation per full turn of a screw joint, in normalized object units
SCREW_PITCH = 0.1

# articulation states swept by the evaluation metrics
EVAL_TAUS = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass
class RigidTransform:
    rotation: np.ndarray   # 3x3, orthonormal, det +1
    translation: np.ndarray  # 3

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def inverse_apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return (pts - self.translation) @ self.rotation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: (self o other)(p) = self(other(p))."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def validate(self) -> None:
        err = np.abs(self.rotation @ self.rotation.T - np.eye(3)).max()
        det = np.linalg.det(self.rotation)
        if err > 1e-6 or abs(det - 1.0) > 1e-6:
            raise ValueError(f"rotation not orthonormal (err {err:.2e}, det {det:.8f})")


def rotation_about_axis(direction: np.ndarray, degrees: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis through the origin."""
    d = np.asarray(direction, dtype=np.float64)
    theta = np.deg2rad(degrees)
    kx, ky, kz = d
    cross = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    return np.eye(3) + np.sin(theta) * cross + (1.0 - np.cos(theta)) * (cross @ cross)


def _rotation_about_line(direction, origin, degrees) -> RigidTransform:
    rot = rotation_about_axis(direction, degrees)
    origin = np.asarray(origin, dtype=np.float64)
    return RigidTransform(rot, origin - rot @ origin)


def joint_transform(part: PartAbstraction, tau: float) -> RigidTransform:
    """Rigid motion of `part` relative to its parent at articulation tau."""
    lo, hi = part.joint_range
    value = lo + (hi - lo) * tau
    jt = part.joint_type
    if jt is JointType.FIXED:
        return RigidTransform.identity()

    nrm = float(np.linalg.norm(part.axis_direction))
    if abs(nrm - 1.0) > 1e-6:
        raise SchemaError(f"axis_direction norm {nrm:.8f} != 1 for moving joint",
                          attribute="joint_axis")
    d = part.axis_direction

    if jt is JointType.REVOLUTE:
        return _rotation_about_line(d, part.axis_origin, value)
    if jt is JointType.PRISMATIC:
        return RigidTransform(np.eye(3), value * d)
    if jt is JointType.CONTINUOUS:
        # no stored limits: one full turn over tau in [0, 1]
        return _rotation_about_line(d, part.axis_origin, tau * 360.0)
    if jt is JointType.SCREW:
        turn = _rotation_about_line(d, part.axis_origin, value / SCREW_PITCH * 360.0)
        return RigidTransform(turn.rotation, turn.translation + value * d)
    raise SchemaError(f"unhandled joint type {jt}")


_CORNER_BITS = np.array(
    [[(i >> 0) & 1, (i >> 1) & 1, (i >> 2) & 1] for i in range(8)], dtype=np.float64
)


def box_corners(bbox_min: np.ndarray, bbox_max: np.ndarray) -> np.ndarray:
    """8 corners, bit order (x, y, z): corner i uses max where bit set."""
    bbox_min = np.asarray(bbox_min, dtype=np.float64)
    bbox_max = np.asarray(bbox_max, dtype=np.float64)
    return bbox_min + _CORNER_BITS * (bbox_max - bbox_min)


@dataclass
class PosedBox:
    """A part's resting box carried by a world rigid transform."""

    part_index: int
    bbox_min: np.ndarray
    bbox_max: np.ndarray
    transform: RigidTransform

    @property
    def corners(self) -> np.ndarray:
        return self.transform.apply(box_corners(self.bbox_min, self.bbox_max))

    @property
    def volume(self) -> float:
        return float(np.prod(self.bbox_max - self.bbox_min))

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        local = self.transform.inverse_apply(points)
        return np.all(
            (local >= self.bbox_min - tol) & (local <= self.bbox_max + tol), axis=1
        )


def world_transforms(
    parts: list[PartAbstraction], graph: ArticulationGraph, tau: float
) -> list[RigidTransform]:
    """World transform per part: parent world composed with the local joint."""
    transforms: list[RigidTransform | None] = [None] * graph.num_parts
    for i in graph.topological_order():
        local = joint_transform(parts[i], tau)
        p = int(graph.parent[i])
        transforms[i] = local if p < 0 else transforms[p].compose(local)
    return transforms  # type: ignore[return-value]


def instantiate(
    parts: list[PartAbstraction], graph: ArticulationGraph, tau: float
) -> list[PosedBox]:
    transforms = world_transforms(parts, graph, tau)
    return [
        PosedBox(i, parts[i].bbox_min.copy(), parts[i].bbox_max.copy(), transforms[i])
        for i in range(graph.num_parts)
    ]


# face id -> (fixed axis, 0 for min side / 1 for max side)
_FACES = [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]


def _face_areas(ext: np.ndarray) -> np.ndarray:
    # yz, yz, xz, xz, xy, xy
    return np.array(
        [ext[1] * ext[2], ext[1] * ext[2], ext[0] * ext[2], ext[0] * ext[2],
         ext[0] * ext[1], ext[0] * ext[1]]
    )


def _allocate_counts(areas: np.ndarray, n: int) -> np.ndarray:
    """Proportional allocation with largest-remainder rounding."""
    total = areas.sum()
    if total <= 0:
        return np.zeros(len(areas), dtype=np.int64)
    quota = areas / total * n
    counts = np.floor(quota).astype(np.int64)
    remainder = n - counts.sum()
    if remainder > 0:
        order = np.argsort(-(quota - counts))
        counts[order[:remainder]] += 1
    return counts


def sample_box_surface(
    bbox_min: np.ndarray, bbox_max: np.ndarray, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform area-weighted samples on the 6 faces of an axis-aligned box."""
    bbox_min = np.asarray(bbox_min, dtype=np.float64)
    bbox_max = np.asarray(bbox_max, dtype=np.float64)
    ext = bbox_max - bbox_min
    areas = _face_areas(ext)
    if areas.sum() <= 0.0:
        return np.tile(0.5 * (bbox_min + bbox_max), (n, 1))
    counts = _allocate_counts(areas, n)
    chunks = []
    for (axis, side), cnt in zip(_FACES, counts):
        if cnt == 0:
            continue
        pts = bbox_min + rng.random((cnt, 3)) * ext
        pts[:, axis] = bbox_max[axis] if side else bbox_min[axis]
        chunks.append(pts)
    return np.concatenate(chunks, axis=0)


def sample_surface_points(
    posed_boxes: list[PosedBox], n_per_part: int, seed: int = 0
) -> np.ndarray:
    """Point cloud over all posed boxes, n_per_part samples on each."""
    if n_per_part < 1:
        raise ValueError("n_per_part must be >= 1")
    rng = np.random.default_rng(seed)
    clouds = [
        box.transform.apply(sample_box_surface(box.bbox_min, box.bbox_max, n_per_part, rng))
        for box in posed_boxes
    ]
    return np.concatenate(clouds, axis=0)


# --- mesh export ----------------------------------------------------------

_BOX_FACES = np.array(
    [
        [0, 2, 3], [0, 3, 1],  # z min
        [4, 5, 7], [4, 7, 6],  # z max
        [0, 1, 5], [0, 5, 4],  # y min
        [2, 6, 7], [2, 7, 3],  # y max
        [0, 4, 6], [0, 6, 2],  # x min
        [1, 3, 7], [1, 7, 5],  # x max
    ],
    dtype=np.int64,
)


def box_mesh(bbox_min, bbox_max) -> tuple[np.ndarray, np.ndarray]:
    return box_corners(bbox_min, bbox_max), _BOX_FACES.copy()


def write_obj(path, vertices: np.ndarray, faces: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for v in vertices:
            f.write(f"v {v[0]:.8f} {v[1]:.8f} {v[2]:.8f}\n")
        for tri in faces:
            f.write(f"f {tri[0] + 1} {tri[1] + 1} {tri[2] + 1}\n")


def read_obj(path) -> tuple[np.ndarray, np.ndarray]:
    verts, faces = [], []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            tok = line.split()
            if not tok:
                continue
            if tok[0] == "v":
                verts.append([float(tok[1]), float(tok[2]), float(tok[3])])
            elif tok[0] == "f":
                idx = [int(t.split("/")[0]) - 1 for t in tok[1:]]
                for k in range(1, len(idx) - 1):  # fan-triangulate
                    faces.append([idx[0], idx[k], idx[k + 1]])
    return np.asarray(verts, dtype=np.float64), np.asarray(faces, dtype=np.int64)


def export_posed_boxes(posed_boxes: list[PosedBox], path) -> None:
    """All posed boxes of one articulation state as a single OBJ mesh."""
    verts, faces = [], []
    offset = 0
    for box in posed_boxes:
        verts.append(box.corners)
        faces.append(_BOX_FACES + offset)
        offset += 8
    write_obj(path, np.concatenate(verts, axis=0), np.concatenate(faces, axis=0))
