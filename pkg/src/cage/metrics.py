"""Evaluation metrics over articulated objects and object sets.

Object-level distances sweep five synchronized articulation states:
instantiation distance (symmetric Chamfer-L1 over surface point clouds) and
abstract instantiation distance (1 - mean sampled volumetric IoU over matched
part boxes). Set-level scores (MMD, COV, 1-NNA) and the sibling-overlap
realism score (AOR) build on those.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .kinematics import EVAL_TAUS, PosedBox, instantiate, sample_surface_points
from .schema import ArticulationGraph, PartAbstraction

ID_POINTS_PER_PART = 2048
VIOU_SAMPLES = 10_000
# worst observed self-distance of the sampled estimators (frozen tolerance)
AID_SAMPLING_FLOOR = 0.03

Object = tuple[list[PartAbstraction], ArticulationGraph]


# --- sampled volumetric IoU -------------------------------------------------


def _points_inside(box: PosedBox, n: int, rng: np.random.Generator) -> np.ndarray:
    ext = box.bbox_max - box.bbox_min
    local = box.bbox_min + rng.random((n, 3)) * ext
    return box.transform.apply(local)


def sampled_viou(
    box_a: PosedBox, box_b: PosedBox, n_samples: int = VIOU_SAMPLES, seed: int = 0
) -> float:
    """Volumetric IoU of two posed boxes by membership counting.

    Draws n_samples inside each box and averages the two one-sided
    intersection-volume estimates; coincident identical boxes score exactly 1.
    """
    va, vb = box_a.volume, box_b.volume
    if va <= 0.0 or vb <= 0.0:
        return 0.0
    rng = np.random.default_rng(seed)
    pa = float(np.mean(box_b.contains(_points_inside(box_a, n_samples, rng))))
    pb = float(np.mean(box_a.contains(_points_inside(box_b, n_samples, rng))))
    inter = 0.5 * (va * pa + vb * pb)
    union = va + vb - inter
    return inter / union if union > 0 else 0.0


# --- object-level distances --------------------------------------------------


def canonical_part_order(parts: list[PartAbstraction]) -> list[int]:
    """Node order independent of storage order, so metric values do not move
    under node permutations (identical parts may swap; their samples match)."""
    def key(i: int):
        p = parts[i]
        return (
            tuple(p.bbox_min), tuple(p.bbox_max), int(p.joint_type),
            tuple(p.axis_direction), tuple(p.axis_origin),
            p.joint_range, int(p.semantic_label),
        )
    return sorted(range(len(parts)), key=key)


def object_clouds(
    obj: Object,
    n_per_part: int = ID_POINTS_PER_PART,
    taus: tuple[float, ...] = EVAL_TAUS,
    seed: int = 0,
) -> list[np.ndarray]:
    """Whole-object surface clouds, one per articulation state."""
    parts, graph = obj
    if not parts:
        raise ValueError("empty object")
    order = canonical_part_order(parts)
    clouds = []
    for k, tau in enumerate(taus):
        boxes = instantiate(parts, graph, tau)
        clouds.append(
            sample_surface_points([boxes[i] for i in order], n_per_part, seed=seed + k)
        )
    return clouds


def chamfer_l1(cloud_a: np.ndarray, cloud_b: np.ndarray) -> float:
    """Symmetric Chamfer with L1 point distances (mean of both directions)."""
    d_ab = cKDTree(cloud_b).query(cloud_a, p=1)[0].mean()
    d_ba = cKDTree(cloud_a).query(cloud_b, p=1)[0].mean()
    return 0.5 * float(d_ab + d_ba)


def instantiation_distance(
    a: Object,
    b: Object,
    n_per_part: int = ID_POINTS_PER_PART,
    taus: tuple[float, ...] = EVAL_TAUS,
    seed: int = 0,
) -> float:
    """Mean Chamfer-L1 between the two objects over synchronized states."""
    clouds_a = object_clouds(a, n_per_part, taus, seed)
    clouds_b = object_clouds(b, n_per_part, taus, seed)
    return float(np.mean([chamfer_l1(ca, cb) for ca, cb in zip(clouds_a, clouds_b)]))


def _rescaled(obj: Object, target_diag: float = 2.0) -> Object:
    """Uniformly scale (about the world origin) so the overall bounding-box
    diagonal hits the target; positions are otherwise preserved."""
    parts, graph = obj
    mins = np.min([p.bbox_min for p in parts], axis=0)
    maxs = np.max([p.bbox_max for p in parts], axis=0)
    diag = float(np.linalg.norm(maxs - mins))
    s = target_diag / diag if diag > 0 else 1.0
    out = []
    for p in parts:
        q = p.copy()
        q.bbox_min = p.bbox_min * s
        q.bbox_max = p.bbox_max * s
        q.axis_origin = p.axis_origin * s
        if p.joint_type.is_translational:
            q.joint_range = (p.joint_range[0] * s, p.joint_range[1] * s)
        out.append(q)
    return out, graph


def match_parts(a: Object, b: Object) -> list[tuple[int, int]]:
    """Optimal part correspondence by resting box-center distance.

    Pairs come back in canonical part order so downstream sampling seeds do
    not depend on node storage order.
    """
    parts_a, parts_b = a[0], b[0]
    order_a = canonical_part_order(parts_a)
    order_b = canonical_part_order(parts_b)
    centers_a = np.stack([parts_a[i].center for i in order_a])
    centers_b = np.stack([parts_b[j].center for j in order_b])
    cost = np.linalg.norm(centers_a[:, None, :] - centers_b[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    return [(order_a[r], order_b[c]) for r, c in zip(rows.tolist(), cols.tolist())]


def abstract_instantiation_distance(
    a: Object,
    b: Object,
    n_samples: int = VIOU_SAMPLES,
    taus: tuple[float, ...] = EVAL_TAUS,
    seed: int = 0,
) -> float:
    """1 - mean part-box vIoU over matched parts and synchronized states.

    Both objects are first rescaled so their overall bounding-box diagonals
    match; unmatched parts contribute zero overlap.
    """
    a = _rescaled(a)
    b = _rescaled(b)
    pairs = match_parts(a, b)
    n_slots = max(len(a[0]), len(b[0]))
    boxes_a = [instantiate(a[0], a[1], tau) for tau in taus]
    boxes_b = [instantiate(b[0], b[1], tau) for tau in taus]
    total = 0.0
    for n_pair, (i, j) in enumerate(pairs):
        per_state = [
            sampled_viou(boxes_a[k][i], boxes_b[k][j], n_samples, seed=seed + 31 * n_pair + k)
            for k in range(len(taus))
        ]
        total += float(np.mean(per_state))
    return 1.0 - total / n_slots


def aor(
    obj: Object,
    taus: tuple[float, ...] = EVAL_TAUS,
    n_samples: int = VIOU_SAMPLES,
    seed: int = 0,
) -> float:
    """Mean sibling-pair box overlap (vIoU) across articulation states."""
    return aor_stats(obj, taus, n_samples, seed)[0]


def aor_stats(
    obj: Object,
    taus: tuple[float, ...] = EVAL_TAUS,
    n_samples: int = VIOU_SAMPLES,
    seed: int = 0,
) -> tuple[float, float]:
    """(mean, max) sibling-pair overlap; objects without siblings score 0."""
    parts, graph = obj
    order = canonical_part_order(parts)
    sib_pairs = [
        (order[a], order[b])
        for a in range(len(order))
        for b in range(a + 1, len(order))
        if graph.parent[order[a]] == graph.parent[order[b]]
    ]
    if not sib_pairs:
        return 0.0, 0.0
    posed = [instantiate(parts, graph, tau) for tau in taus]
    values = []
    for n_pair, (i, j) in enumerate(sib_pairs):
        for k in range(len(taus)):
            values.append(
                sampled_viou(posed[k][i], posed[k][j], n_samples, seed=seed + 31 * n_pair + k)
            )
    return float(np.mean(values)), float(np.max(values))


# --- set-level metrics --------------------------------------------------------


def distance_matrix(gen_set: list[Object], gt_set: list[Object], distance) -> np.ndarray:
    """Rows are generated objects, columns ground truth."""
    mat = np.empty((len(gen_set), len(gt_set)), dtype=np.float64)
    for i, g in enumerate(gen_set):
        for j, r in enumerate(gt_set):
            mat[i, j] = distance(g, r)
    if np.any(mat < 0) or not np.all(np.isfinite(mat)):
        raise ValueError("distances must be finite and nonnegative")
    return mat


def mmd(gen_set: list[Object], gt_set: list[Object], distance) -> float:
    return mmd_from_matrix(distance_matrix(gen_set, gt_set, distance))


def cov(gen_set: list[Object], gt_set: list[Object], distance) -> float:
    return cov_from_matrix(distance_matrix(gen_set, gt_set, distance))


def mmd_from_matrix(mat: np.ndarray) -> float:
    """Mean over ground truth of the closest generated sample."""
    if mat.size == 0:
        raise ValueError("empty distance matrix")
    return float(mat.min(axis=0).mean())


def cov_from_matrix(mat: np.ndarray) -> float:
    """Fraction of ground truth objects that are someone's nearest neighbor."""
    if mat.size == 0:
        raise ValueError("empty distance matrix")
    nearest = mat.argmin(axis=1)
    return float(len(np.unique(nearest)) / mat.shape[1])


def one_nna(gen_set: list[Object], gt_set: list[Object], distance) -> float:
    """Leave-one-out 1-NN accuracy classifying gen vs gt over the union.

    0.5 means the sets are indistinguishable to a nearest-neighbor test.
    """
    union = list(gen_set) + list(gt_set)
    labels = np.array([0] * len(gen_set) + [1] * len(gt_set))
    n = len(union)
    mat = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            mat[i, j] = mat[j, i] = distance(union[i], union[j])
    return one_nna_from_matrix(mat, labels)


def one_nna_from_matrix(mat: np.ndarray, labels: np.ndarray) -> float:
    n = len(labels)
    mat = mat + np.diag(np.full(n, np.inf))
    pred = labels[mat.argmin(axis=1)]
    return float(np.mean(pred == labels))


# --- reports -------------------------------------------------------------------


@dataclass
class MetricReport:
    mmd_id: float
    mmd_aid: float
    cov_id: float
    cov_aid: float
    one_nna_aid: float
    mean_aor: float
    max_aor: float = 0.0

    def __post_init__(self):
        for name in ("cov_id", "cov_aid", "one_nna_aid", "mean_aor"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def rows(self) -> list[tuple[str, float]]:
        return [
            ("mmd_id", self.mmd_id),
            ("mmd_aid", self.mmd_aid),
            ("cov_id", self.cov_id),
            ("cov_aid", self.cov_aid),
            ("one_nna_aid", self.one_nna_aid),
            ("mean_aor", self.mean_aor),
            ("max_aor", self.max_aor),
        ]


def evaluate_sets(
    gen_set: list[Object],
    gt_set: list[Object],
    n_per_part: int = ID_POINTS_PER_PART,
    viou_samples: int = VIOU_SAMPLES,
    seed: int = 0,
) -> MetricReport:
    """All set metrics; ID clouds are sampled once per object and reused."""
    if not gen_set or not gt_set:
        raise ValueError("both sets must be nonempty")

    clouds = {}
    for tag, objs in (("g", gen_set), ("r", gt_set)):
        for i, obj in enumerate(objs):
            clouds[(tag, i)] = object_clouds(obj, n_per_part, seed=seed)

    def id_dist(key_a, key_b):
        return float(
            np.mean([chamfer_l1(ca, cb) for ca, cb in zip(clouds[key_a], clouds[key_b])])
        )

    id_mat = np.array(
        [[id_dist(("g", i), ("r", j)) for j in range(len(gt_set))] for i in range(len(gen_set))]
    )
    aid = lambda a, b: abstract_instantiation_distance(a, b, viou_samples, seed=seed)
    aid_mat = distance_matrix(gen_set, gt_set, aid)

    aors = [aor_stats(obj, n_samples=viou_samples, seed=seed) for obj in gen_set]
    return MetricReport(
        mmd_id=mmd_from_matrix(id_mat),
        mmd_aid=mmd_from_matrix(aid_mat),
        cov_id=cov_from_matrix(id_mat),
        cov_aid=cov_from_matrix(aid_mat),
        one_nna_aid=one_nna(gen_set, gt_set, aid),
        mean_aor=float(np.mean([m for m, _ in aors])),
        max_aor=float(np.max([x for _, x in aors])),
    )


def write_report(report: MetricReport, csv_path: str | Path, summary_path: str | Path | None = None) -> None:
    csv_path = Path(csv_path)
    lines = ["metric,value"] + [f"{name},{value:.6f}" for name, value in report.rows()]
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if summary_path is not None:
        text = "\n".join(f"{name:>12s}: {value:.4f}" for name, value in report.rows())
        Path(summary_path).write_text(text + "\n", encoding="utf-8")
