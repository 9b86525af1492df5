"""Part/graph data model and the normalized attribute tensor.

An articulated object is a kinematic tree of up to K parts. Each part is an
axis-aligned box in the canonical resting frame plus a joint connecting it to
its parent (type, axis, range) and a semantic label. The whole object is
packed into a dense 5 x K x M tensor with every entry normalized to [-1, 1];
that tensor is the state the diffusion model operates on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

K = 32  # maximum number of graph nodes (padded)
M = 6   # slots per attribute row
NUM_ATTRIBUTES = 5

# attribute row indices in the 5 x K x M tensor
ATTR_BBOX = 0
ATTR_JOINT_TYPE = 1
ATTR_JOINT_AXIS = 2
ATTR_JOINT_RANGE = 3
ATTR_LABEL = 4

ATTR_NAMES = ("bbox", "joint_type", "joint_axis", "joint_range", "semantic_label")

CATEGORIES = (
    "Storage",
    "Table",
    "Refrigerator",
    "Dishwasher",
    "Safe",
    "Oven",
    "Washer",
    "Microwave",
)

UNIT_TOL = 1e-6
# neutral axis convention for fixed joints so every part encodes the same way
FIXED_AXIS_DIR = (0.0, 0.0, 1.0)


class JointType(IntEnum):
    FIXED = 0
    REVOLUTE = 1
    PRISMATIC = 2
    CONTINUOUS = 3
    SCREW = 4

    @property
    def is_moving(self) -> bool:
        return self is not JointType.FIXED

    @property
    def is_translational(self) -> bool:
        return self in (JointType.PRISMATIC, JointType.SCREW)

    @property
    def stores_zero_range(self) -> bool:
        return self in (JointType.FIXED, JointType.CONTINUOUS)


class SemanticLabel(IntEnum):
    BASE = 0
    DRAWER = 1
    DOOR = 2
    TRAY = 3
    SHELF = 4
    KNOB = 5
    WHEEL = 6
    HANDLE = 7


class SchemaError(ValueError):
    """Invalid object data; carries the offending node index when known."""

    def __init__(self, message: str, node: int | None = None, attribute: str | None = None):
        self.node = node
        self.attribute = attribute
        prefix = ""
        if node is not None:
            prefix += f"node {node}: "
        if attribute is not None:
            prefix += f"[{attribute}] "
        super().__init__(prefix + message)


def _as_vec3(v, name: str, node: int | None = None) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise SchemaError(f"{name} must be a 3-vector, got shape {arr.shape}", node)
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"{name} contains non-finite values", node)
    return arr


@dataclass
class PartAbstraction:
    """One part: resting box, joint w.r.t. parent, and semantic label."""

    bbox_min: np.ndarray
    bbox_max: np.ndarray
    joint_type: JointType
    axis_direction: np.ndarray
    axis_origin: np.ndarray
    joint_range: tuple[float, float]
    semantic_label: SemanticLabel

    def __post_init__(self):
        self.bbox_min = np.asarray(self.bbox_min, dtype=np.float64)
        self.bbox_max = np.asarray(self.bbox_max, dtype=np.float64)
        self.axis_direction = np.asarray(self.axis_direction, dtype=np.float64)
        self.axis_origin = np.asarray(self.axis_origin, dtype=np.float64)
        self.joint_type = JointType(self.joint_type)
        self.semantic_label = SemanticLabel(self.semantic_label)
        lo, hi = self.joint_range
        self.joint_range = (float(lo), float(hi))

    def validate(self, node: int | None = None) -> None:
        _as_vec3(self.bbox_min, "bbox_min", node)
        _as_vec3(self.bbox_max, "bbox_max", node)
        _as_vec3(self.axis_direction, "axis_direction", node)
        _as_vec3(self.axis_origin, "axis_origin", node)
        if np.any(self.bbox_min > self.bbox_max + 1e-12):
            raise SchemaError("bbox_min exceeds bbox_max", node, "bbox")
        lo, hi = self.joint_range
        if lo > hi:
            raise SchemaError(f"joint range lo {lo} > hi {hi}", node, "joint_range")
        if self.joint_type.is_moving:
            nrm = float(np.linalg.norm(self.axis_direction))
            if abs(nrm - 1.0) > UNIT_TOL:
                raise SchemaError(
                    f"axis_direction norm {nrm:.8f} != 1 for moving joint",
                    node,
                    "joint_axis",
                )
        if self.joint_type.stores_zero_range and self.joint_range != (0.0, 0.0):
            raise SchemaError(
                f"{self.joint_type.name.lower()} joint must store range (0, 0)",
                node,
                "joint_range",
            )

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.bbox_min + self.bbox_max)

    @property
    def extents(self) -> np.ndarray:
        return self.bbox_max - self.bbox_min

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    def copy(self) -> "PartAbstraction":
        return PartAbstraction(
            self.bbox_min.copy(),
            self.bbox_max.copy(),
            self.joint_type,
            self.axis_direction.copy(),
            self.axis_origin.copy(),
            self.joint_range,
            self.semantic_label,
        )


def fixed_joint_part(bbox_min, bbox_max, label: SemanticLabel) -> PartAbstraction:
    return PartAbstraction(
        bbox_min,
        bbox_max,
        JointType.FIXED,
        np.array(FIXED_AXIS_DIR),
        np.zeros(3),
        (0.0, 0.0),
        label,
    )


@dataclass
class ArticulationGraph:
    """Kinematic tree over the valid node prefix, padded to K nodes.

    `parent[i]` is the parent index of node i, -1 at the single root. The
    attention adjacency is the symmetric parent/child matrix with a self-loop
    only at the root; padded rows and columns stay zero.
    """

    num_parts: int
    parent: np.ndarray
    category: str
    max_nodes: int = K

    def __post_init__(self):
        self.parent = np.asarray(self.parent, dtype=np.int64).reshape(-1)
        self.validate()

    def validate(self) -> None:
        n = self.num_parts
        if not 1 <= n <= self.max_nodes:
            raise SchemaError(f"num_parts {n} exceeds K={self.max_nodes}" if n > self.max_nodes
                              else f"num_parts {n} must be >= 1")
        if self.parent.shape != (n,):
            raise SchemaError(f"parent must have length {n}, got {self.parent.shape}")
        if self.category not in CATEGORIES:
            raise SchemaError(f"unknown category {self.category!r}")
        roots = np.flatnonzero(self.parent < 0)
        if len(roots) == 0:
            raise SchemaError("no root (every node has a parent)")
        if len(roots) > 1:
            raise SchemaError(f"multiple roots: nodes {roots.tolist()}")
        for i in range(n):
            p = int(self.parent[i])
            if p >= n:
                raise SchemaError(f"parent index {p} out of range", i)
            if p == i:
                raise SchemaError("node is its own parent", i)
        # walking up from every node must reach the root without revisits
        for i in range(n):
            seen = set()
            j = i
            while self.parent[j] >= 0:
                if j in seen:
                    raise SchemaError("cycle in parent pointers", i)
                seen.add(j)
                j = int(self.parent[j])

    @property
    def root(self) -> int:
        return int(np.flatnonzero(self.parent < 0)[0])

    @property
    def valid_mask(self) -> np.ndarray:
        mask = np.zeros(self.max_nodes, dtype=np.int8)
        mask[: self.num_parts] = 1
        return mask

    @property
    def attn_adjacency(self) -> np.ndarray:
        adj = np.zeros((self.max_nodes, self.max_nodes), dtype=np.int8)
        for i in range(self.num_parts):
            p = int(self.parent[i])
            if p >= 0:
                adj[i, p] = 1
                adj[p, i] = 1
        r = self.root
        adj[r, r] = 1
        return adj

    def children(self, i: int) -> list[int]:
        return [int(c) for c in np.flatnonzero(self.parent == i)]

    def depth(self) -> int:
        """Longest root-to-leaf edge count."""
        depths = np.zeros(self.num_parts, dtype=np.int64)
        order = self.topological_order()
        for i in order:
            p = int(self.parent[i])
            if p >= 0:
                depths[i] = depths[p] + 1
        return int(depths.max())

    def topological_order(self) -> list[int]:
        """Node order in which every parent precedes its children."""
        order, stack = [], [self.root]
        kids = {i: self.children(i) for i in range(self.num_parts)}
        while stack:
            i = stack.pop()
            order.append(i)
            stack.extend(kids[i])
        return order

    def copy(self) -> "ArticulationGraph":
        return ArticulationGraph(self.num_parts, self.parent.copy(), self.category, self.max_nodes)


# --- enum <-> [-1, 1] code mapping ---------------------------------------

def encode_code(code: int, num_codes: int) -> float:
    return 2.0 * code / (num_codes - 1) - 1.0


def snap_code(value: float, num_codes: int) -> int:
    """Nearest valid code; ties break toward the lower code."""
    code_f = (value + 1.0) * (num_codes - 1) / 2.0
    code = int(np.ceil(code_f - 0.5))
    return min(max(code, 0), num_codes - 1)


def _mean_slots(values: np.ndarray) -> float:
    # identical repeats return the stored value bit-exactly
    if np.all(values == values.flat[0]):
        return float(values.flat[0])
    return float(values.mean())


def canonical_frame(parts: list[PartAbstraction]) -> tuple[np.ndarray, float]:
    """Translation center and uniform scale mapping the object into [-1,1]^3."""
    mins = np.min([p.bbox_min for p in parts], axis=0)
    maxs = np.max([p.bbox_max for p in parts], axis=0)
    center = 0.5 * (mins + maxs)
    max_extent = float(np.max(maxs - mins))
    scale = 2.0 / max_extent if max_extent > 0 else 1.0
    return center, scale


def encode_bbox_row(bbox_min, bbox_max) -> np.ndarray:
    return np.concatenate([np.asarray(bbox_min, float), np.asarray(bbox_max, float)])


def encode_joint_type_row(joint_type: JointType) -> np.ndarray:
    return np.full(M, encode_code(int(joint_type), len(JointType)))


def encode_joint_axis_row(direction, origin) -> np.ndarray:
    return np.concatenate([np.asarray(direction, float), np.asarray(origin, float)])


def encode_joint_range_row(joint_type: JointType, lo: float, hi: float) -> np.ndarray:
    if joint_type.stores_zero_range:
        lo, hi = 0.0, 0.0
    elif joint_type is JointType.REVOLUTE:
        lo, hi = lo / 360.0, hi / 360.0
    return np.tile([lo, hi], 3).astype(np.float64)


def encode_label_row(label: SemanticLabel) -> np.ndarray:
    return np.full(M, encode_code(int(label), len(SemanticLabel)))


def encode(parts: list[PartAbstraction], graph: ArticulationGraph) -> np.ndarray:
    """Pack an object into the normalized 5 x K x M tensor.

    The object is first mapped to the canonical frame (centered, uniformly
    scaled into [-1,1]^3); axis origins share the frame and translational
    joint ranges pick up the same scale. Padded nodes are zero-filled.
    """
    if len(parts) != graph.num_parts:
        raise SchemaError(f"{len(parts)} parts but graph has {graph.num_parts} nodes")
    for i, p in enumerate(parts):
        p.validate(i)

    center, scale = canonical_frame(parts)
    x = np.zeros((NUM_ATTRIBUTES, graph.max_nodes, M), dtype=np.float64)
    for i, p in enumerate(parts):
        bmin = (p.bbox_min - center) * scale
        bmax = (p.bbox_max - center) * scale
        if p.joint_type is JointType.FIXED:
            # the axis of a fixed joint is meaningless; store the convention
            direction, origin = np.array(FIXED_AXIS_DIR), np.zeros(3)
        else:
            direction = p.axis_direction
            origin = (p.axis_origin - center) * scale
        lo, hi = p.joint_range
        if p.joint_type.is_translational:
            lo, hi = lo * scale, hi * scale
        x[ATTR_BBOX, i] = encode_bbox_row(bmin, bmax)
        x[ATTR_JOINT_TYPE, i] = encode_joint_type_row(p.joint_type)
        x[ATTR_JOINT_AXIS, i] = encode_joint_axis_row(direction, origin)
        x[ATTR_JOINT_RANGE, i] = encode_joint_range_row(p.joint_type, lo, hi)
        x[ATTR_LABEL, i] = encode_label_row(p.semantic_label)

    # tolerate float dust from the scaling, reject real overshoot
    over = np.abs(x) > 1.0
    if np.any(np.abs(x) > 1.0 + 1e-9):
        attr, node, slot = np.unravel_index(int(np.argmax(np.abs(x))), x.shape)
        raise SchemaError(
            f"encoded value {x[attr, node, slot]:.6f} outside [-1, 1]",
            int(node),
            ATTR_NAMES[int(attr)],
        )
    x[over] = np.sign(x[over])
    return x


def decode(x: np.ndarray, graph: ArticulationGraph) -> list[PartAbstraction]:
    """Invert `encode` on the valid node prefix.

    Repeated scalar slots are averaged before nearest-code snapping, box
    corners are reordered to min <= max, and axis directions renormalized.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (NUM_ATTRIBUTES, graph.max_nodes, M):
        raise SchemaError(f"tensor shape {x.shape} != {(NUM_ATTRIBUTES, graph.max_nodes, M)}")
    if not np.all(np.isfinite(x[:, : graph.num_parts])):
        raise SchemaError("tensor contains non-finite values on valid nodes")

    parts = []
    for i in range(graph.num_parts):
        joint_type = JointType(snap_code(_mean_slots(x[ATTR_JOINT_TYPE, i]), len(JointType)))
        label = SemanticLabel(snap_code(_mean_slots(x[ATTR_LABEL, i]), len(SemanticLabel)))

        corners = x[ATTR_BBOX, i]
        bmin = np.minimum(corners[:3], corners[3:])
        bmax = np.maximum(corners[:3], corners[3:])

        direction = x[ATTR_JOINT_AXIS, i, :3].copy()
        origin = x[ATTR_JOINT_AXIS, i, 3:].copy()
        nrm = float(np.linalg.norm(direction))
        if nrm < 1e-8:
            if joint_type.is_moving:
                raise SchemaError("zero-length axis direction for a moving joint", i, "joint_axis")
            direction = np.array(FIXED_AXIS_DIR)
        elif abs(nrm - 1.0) > 1e-9:
            direction = direction / nrm

        if joint_type.stores_zero_range:
            joint_range = (0.0, 0.0)
        else:
            pairs = x[ATTR_JOINT_RANGE, i].reshape(3, 2)
            lo = _mean_slots(pairs[:, 0])
            hi = _mean_slots(pairs[:, 1])
            if joint_type is JointType.REVOLUTE:
                lo, hi = lo * 360.0, hi * 360.0
            if lo > hi:
                lo, hi = hi, lo
            joint_range = (lo, hi)

        parts.append(
            PartAbstraction(bmin, bmax, joint_type, direction, origin, joint_range, label)
        )
    return parts
