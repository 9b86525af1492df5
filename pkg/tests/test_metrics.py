import numpy as np
import pytest

from cage.kinematics import PosedBox, RigidTransform, rotation_about_axis
from cage.metrics import (
    abstract_instantiation_distance,
    aor,
    aor_stats,
    cov,
    cov_from_matrix,
    distance_matrix,
    evaluate_sets,
    instantiation_distance,
    match_parts,
    mmd,
    mmd_from_matrix,
    one_nna,
    one_nna_from_matrix,
    sampled_viou,
    AID_SAMPLING_FLOOR,
)
from cage.schema import (
    ArticulationGraph,
    JointType,
    PartAbstraction,
    SemanticLabel,
    fixed_joint_part,
)
from cage.synthetic import generate_object


def static_box(bmin, bmax, idx=0):
    return PosedBox(idx, np.asarray(bmin, float), np.asarray(bmax, float),
                    RigidTransform.identity())


def aabb_viou_analytic(amin, amax, bmin, bmax):
    lo = np.maximum(amin, bmin)
    hi = np.minimum(amax, bmax)
    inter = float(np.prod(np.maximum(hi - lo, 0.0)))
    va = float(np.prod(np.asarray(amax) - amin))
    vb = float(np.prod(np.asarray(bmax) - bmin))
    union = va + vb - inter
    return inter / union if union > 0 else 0.0


def box_object(bmin, bmax, category="Storage"):
    part = fixed_joint_part(bmin, bmax, SemanticLabel.BASE)
    return [part], ArticulationGraph(1, np.array([-1]), category)


class TestSampledViou:
    def test_matches_analytic_on_random_pairs(self):
        rng = np.random.default_rng(0)
        for k in range(20):
            amin = rng.uniform(-1, 0.2, 3)
            amax = amin + rng.uniform(0.2, 1.2, 3)
            # partially offset second box so overlap varies from 0 to large
            shift = rng.uniform(-0.4, 0.4, 3)
            bmin, bmax = amin + shift, amax + shift * 0.5
            bmin, bmax = np.minimum(bmin, bmax), np.maximum(bmin, bmax) + 1e-3
            expected = aabb_viou_analytic(amin, amax, bmin, bmax)
            got = sampled_viou(static_box(amin, amax), static_box(bmin, bmax),
                               n_samples=10000, seed=k)
            assert abs(got - expected) < 0.02

    def test_identical_boxes_score_exactly_one(self):
        box = static_box([0, 0, 0], [1, 2, 3])
        assert sampled_viou(box, static_box([0, 0, 0], [1, 2, 3])) == 1.0

    def test_disjoint_boxes_score_zero(self):
        assert sampled_viou(static_box([0, 0, 0], [1, 1, 1]),
                            static_box([5, 5, 5], [6, 6, 6])) == 0.0

    def test_half_shifted_unit_boxes(self):
        got = sampled_viou(static_box([0, 0, 0], [1, 1, 1]),
                           static_box([0.5, 0, 0], [1.5, 1, 1]), seed=3)
        assert got == pytest.approx(1 / 3, abs=0.01)

    def test_rotated_box_membership(self):
        # box rotated 45 deg about z vs itself unrotated: analytic via geometry
        rot = rotation_about_axis(np.array([0, 0, 1.0]), 45.0)
        posed = PosedBox(0, np.array([-1, -1, -0.5]), np.array([1, 1, 0.5]),
                         RigidTransform(rot, np.zeros(3)))
        same = PosedBox(0, np.array([-1, -1, -0.5]), np.array([1, 1, 0.5]),
                        RigidTransform.identity())
        # intersection of a square and its 45-deg rotation: regular octagon,
        # area 8(sqrt(2)-1); union 2*4 - inter
        inter = 8 * (np.sqrt(2) - 1)
        expected = inter / (8 - inter)
        got = sampled_viou(posed, same, n_samples=20000, seed=5)
        assert got == pytest.approx(expected, abs=0.02)

    def test_degenerate_box_scores_zero(self):
        flat = static_box([0, 0, 0], [1, 1, 0])
        assert sampled_viou(flat, static_box([0, 0, 0], [1, 1, 1])) == 0.0


def grid_surface_cloud(bmin, bmax, res=12):
    """Deterministic dense grid on all 6 faces (brute-force oracle input)."""
    bmin, bmax = np.asarray(bmin, float), np.asarray(bmax, float)
    u = np.linspace(0, 1, res)
    pts = []
    for axis in range(3):
        a1, a2 = [a for a in range(3) if a != axis]
        for side in (0, 1):
            for i in u:
                for j in u:
                    p = np.empty(3)
                    p[axis] = bmax[axis] if side else bmin[axis]
                    p[a1] = bmin[a1] + i * (bmax[a1] - bmin[a1])
                    p[a2] = bmin[a2] + j * (bmax[a2] - bmin[a2])
                    pts.append(p)
    return np.asarray(pts)


def brute_chamfer_l1(a, b):
    d = np.abs(a[:, None, :] - b[None, :, :]).sum(axis=2)
    return 0.5 * (d.min(axis=1).mean() + d.min(axis=0).mean())


class TestInstantiationDistance:
    def test_self_distance_zero_same_seed(self):
        obj = generate_object("Safe", np.random.default_rng(1))
        assert instantiation_distance(obj, obj, n_per_part=512, seed=4) == 0.0

    def test_self_distance_different_seeds_below_floor(self):
        parts, graph = generate_object("Storage", np.random.default_rng(2))
        from cage.metrics import chamfer_l1, object_clouds

        ca = object_clouds((parts, graph), seed=0)
        cb = object_clouds((parts, graph), seed=100)
        d = float(np.mean([chamfer_l1(x, y) for x, y in zip(ca, cb)]))
        assert d < 0.05

    def test_offset_growth_matches_brute_force_oracle(self):
        base = box_object([0, 0, 0], [1, 1, 1])
        sampled, oracle = [], []
        for d in (0.1, 0.2, 0.4):
            other = box_object([d, 0, 0], [1 + d, 1, 1])
            sampled.append(instantiation_distance(base, other, n_per_part=2048, seed=0))
            oracle.append(
                brute_chamfer_l1(
                    grid_surface_cloud([0, 0, 0], [1, 1, 1]),
                    grid_surface_cloud([d, 0, 0], [1 + d, 1, 1]),
                )
            )
        assert sampled[0] < sampled[1] < sampled[2]
        assert oracle[0] < oracle[1] < oracle[2]
        for s, o in zip(sampled, oracle):
            assert abs(s - o) < 0.03

    def test_symmetry_within_tolerance(self):
        a = generate_object("Oven", np.random.default_rng(3))
        b = generate_object("Oven", np.random.default_rng(4))
        d_ab = instantiation_distance(a, b, n_per_part=1024, seed=0)
        d_ba = instantiation_distance(b, a, n_per_part=1024, seed=0)
        assert abs(d_ab - d_ba) < 0.02

    def test_empty_object_rejected(self):
        with pytest.raises(ValueError):
            instantiation_distance(([], None), ([], None))


class TestAbstractInstantiationDistance:
    def test_self_distance_below_floor(self):
        obj = generate_object("Refrigerator", np.random.default_rng(5))
        assert abstract_instantiation_distance(obj, obj, n_samples=4000) <= AID_SAMPLING_FLOOR

    def test_half_shifted_unit_boxes_is_two_thirds(self):
        a = box_object([0, 0, 0], [1, 1, 1])
        b = box_object([0.5, 0, 0], [1.5, 1, 1])
        got = abstract_instantiation_distance(a, b, n_samples=10000, seed=1)
        assert got == pytest.approx(2 / 3, abs=0.02)

    def test_disjoint_boxes_distance_one(self):
        a = box_object([0, 0, 0], [1, 1, 1])
        b = box_object([10, 10, 10], [11, 11, 11])
        assert abstract_instantiation_distance(a, b) == 1.0

    def test_unmatched_parts_penalized(self):
        a = box_object([0, 0, 0], [1, 1, 1])
        two = [
            fixed_joint_part([0, 0, 0], [1, 1, 1], SemanticLabel.BASE),
            fixed_joint_part([2, 0, 0], [3, 1, 1], SemanticLabel.SHELF),
        ]
        b = (two, ArticulationGraph(2, np.array([-1, 0]), "Storage"))
        got = abstract_instantiation_distance(a, b, n_samples=4000, seed=0)
        # best match is imperfect (scales differ); the extra part adds 0 overlap
        assert 0.5 < got <= 1.0

    def test_symmetry(self):
        a = generate_object("Table", np.random.default_rng(6))
        b = generate_object("Table", np.random.default_rng(7))
        d_ab = abstract_instantiation_distance(a, b, n_samples=4000, seed=0)
        d_ba = abstract_instantiation_distance(b, a, n_samples=4000, seed=0)
        assert abs(d_ab - d_ba) < 0.02

    def test_metrics_invariant_to_node_permutation(self):
        from cage.training import augment_permute

        rng = np.random.default_rng(20)
        obj = generate_object("Storage", rng)
        ref = generate_object("Storage", rng)
        id_0 = instantiation_distance(obj, ref, n_per_part=512, seed=3)
        aid_0 = abstract_instantiation_distance(obj, ref, n_samples=2000, seed=3)
        aor_0 = aor(obj, n_samples=2000, seed=3)
        for _ in range(5):
            perm = augment_permute(obj[0], obj[1], rng)
            assert instantiation_distance(perm, ref, n_per_part=512, seed=3) == id_0
            assert abstract_instantiation_distance(perm, ref, n_samples=2000, seed=3) == aid_0
            assert aor(perm, n_samples=2000, seed=3) == aor_0

    def test_matching_invariant_to_uniform_scaling(self):
        a = generate_object("Storage", np.random.default_rng(8))
        b = generate_object("Storage", np.random.default_rng(9))
        scaled_parts = []
        for p in b[0]:
            q = p.copy()
            q.bbox_min, q.bbox_max = p.bbox_min * 3, p.bbox_max * 3
            q.axis_origin = p.axis_origin * 3
            if p.joint_type.is_translational:
                q.joint_range = (p.joint_range[0] * 3, p.joint_range[1] * 3)
            scaled_parts.append(q)
        b_scaled = (scaled_parts, b[1])
        from cage.metrics import _rescaled

        assert match_parts(_rescaled(a), _rescaled(b)) == match_parts(_rescaled(a), _rescaled(b_scaled))
        d1 = abstract_instantiation_distance(a, b, n_samples=4000, seed=0)
        d2 = abstract_instantiation_distance(a, b_scaled, n_samples=4000, seed=0)
        assert d1 == pytest.approx(d2, abs=1e-9)


class TestAor:
    def sibling_object(self, second_min, second_max):
        parts = [
            fixed_joint_part([-2, -2, -2], [2, 2, 2], SemanticLabel.BASE),
            fixed_joint_part([0, 0, 0], [1, 1, 1], SemanticLabel.DRAWER),
            fixed_joint_part(second_min, second_max, SemanticLabel.DRAWER),
        ]
        graph = ArticulationGraph(3, np.array([-1, 0, 0]), "Storage")
        return parts, graph

    def test_coincident_siblings_score_one(self):
        obj = self.sibling_object([0, 0, 0], [1, 1, 1])
        # pairs: (1,2) overlap fully; (0,*) are parent/child, not siblings
        assert aor(obj, taus=(0.0,), n_samples=2000) == pytest.approx(1.0, abs=0.02)

    def test_disjoint_static_siblings_score_zero(self):
        obj = self.sibling_object([5, 5, 5], [6, 6, 6])
        assert aor(obj, n_samples=2000) == 0.0

    def test_half_overlap_is_one_third(self):
        obj = self.sibling_object([0.5, 0, 0], [1.5, 1, 1])
        got = aor(obj, taus=(0.0,), n_samples=10000, seed=2)
        assert got == pytest.approx(1 / 3, abs=0.02)

    def test_no_siblings_scores_zero(self):
        obj = generate_object("Safe", np.random.default_rng(10))
        # safe: base -> door -> (handle, knob): handle/knob are siblings

        single = box_object([0, 0, 0], [1, 1, 1])
        assert aor(single) == 0.0

    def test_synthetic_resting_aor_zero(self):
        rng = np.random.default_rng(11)
        for cat in ("Storage", "Oven", "Microwave"):
            obj = generate_object(cat, rng)
            assert aor(obj, taus=(0.0,), n_samples=2000) == 0.0

    def test_stats_max_at_least_mean(self):
        obj = self.sibling_object([0.5, 0, 0], [1.5, 1, 1])
        mean, mx = aor_stats(obj, n_samples=2000)
        assert mx >= mean


def jittered_cluster(center, n, rng):
    objs = []
    for _ in range(n):
        lo = np.asarray(center) + rng.uniform(-0.05, 0.05, 3)
        objs.append(box_object(lo, lo + 1.0))
    return objs


class TestSetMetrics:
    def test_identical_sets_mmd_zero_cov_one(self):
        rng = np.random.default_rng(12)
        objs = [generate_object("Storage", rng) for _ in range(4)]
        dist = lambda a, b: abstract_instantiation_distance(a, b, n_samples=2000, seed=0)
        assert mmd(objs, objs, dist) <= AID_SAMPLING_FLOOR
        assert cov(objs, objs, dist) == 1.0

    def test_single_generated_covers_one_slot(self):
        rng = np.random.default_rng(13)
        gt = [generate_object("Oven", rng) for _ in range(5)]
        gen = [gt[2]]
        dist = lambda a, b: abstract_instantiation_distance(a, b, n_samples=1500, seed=0)
        assert cov(gen, gt, dist) == pytest.approx(1 / 5)

    def test_matrix_helpers(self):
        mat = np.array([[0.1, 0.9], [0.8, 0.2], [0.7, 0.3]])
        assert mmd_from_matrix(mat) == pytest.approx(0.5 * (0.1 + 0.2))
        assert cov_from_matrix(mat) == 1.0
        mat2 = np.array([[0.1, 0.9], [0.2, 0.8]])
        assert cov_from_matrix(mat2) == 0.5

    def test_two_cluster_one_nna_is_one(self):
        rng = np.random.default_rng(14)
        gen = jittered_cluster([0, 0, 0], 6, rng)
        gt = jittered_cluster([50, 0, 0], 6, rng)
        dist = lambda a, b: abstract_instantiation_distance(a, b, n_samples=1000, seed=0)
        assert one_nna(gen, gt, dist) == 1.0

    def test_one_nna_against_exhaustive_oracle(self):
        rng = np.random.default_rng(15)
        pts = rng.normal(size=(10, 2))
        labels = np.array([0] * 5 + [1] * 5)
        mat = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        got = one_nna_from_matrix(mat, labels)
        correct = 0
        for i in range(10):
            best, best_d = None, np.inf
            for j in range(10):
                if j != i and mat[i, j] < best_d:
                    best, best_d = j, mat[i, j]
            correct += labels[best] == labels[i]
        assert got == pytest.approx(correct / 10)

    def test_identical_sets_one_nna_low(self):
        # every element's nearest neighbor is its twin in the other set
        rng = np.random.default_rng(16)
        objs = [generate_object("Microwave", rng) for _ in range(3)]
        dist = lambda a, b: abstract_instantiation_distance(a, b, n_samples=1000, seed=0)
        assert one_nna(objs, objs, dist) == 0.0

    def test_evaluate_sets_report(self, tmp_path):
        rng = np.random.default_rng(17)
        objs = [generate_object("Safe", rng) for _ in range(3)]
        report = evaluate_sets(objs, objs, n_per_part=256, viou_samples=1000)
        assert report.cov_id == 1.0 and report.cov_aid == 1.0
        assert report.mmd_aid <= AID_SAMPLING_FLOOR
        assert report.mean_aor >= 0.0
        from cage.metrics import write_report

        write_report(report, tmp_path / "r.csv", tmp_path / "r.txt")
        text = (tmp_path / "r.csv").read_text()
        assert "mmd_id" in text and "max_aor" in text
