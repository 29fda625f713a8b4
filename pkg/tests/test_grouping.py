"""Dual-branch clustering, compactness scoring, and point-set NMS."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hida.cloudio import (
    ClassTable,
    GroundTruthInstances,
    LabeledCloud,
    OracleConfig,
    oracle_predict,
    random_scene_spec,
    synth_scene,
)
from hida.grouping import (
    ClusterConfig,
    ClusterProposal,
    GroupingError,
    cluster_branch,
    nms,
    score_proposal,
    score_proposals,
    segment_instances,
)
from oracles import bfs_components

CHAIR = ClassTable.default().id_of("chair")


def fg_cloud(points, labels=None, offsets=None) -> LabeledCloud:
    pts = np.asarray(points, dtype=np.float32)
    n = len(pts)
    if labels is None:
        labels = np.full(n, CHAIR, np.uint16)
    return LabeledCloud(
        points=pts,
        semantic_labels=np.asarray(labels, np.uint16),
        offsets=(
            np.zeros((n, 3), np.float32)
            if offsets is None
            else np.asarray(offsets, np.float32)
        ),
    )


def prediction_sets(predictions):
    return {frozenset(p.point_indices.tolist()) for p in predictions}


class TestConfig:
    def test_defaults(self):
        cfg = ClusterConfig()
        assert (cfg.radius, cfg.min_points, cfg.nms_iou) == (0.03, 50, 0.3)

    @pytest.mark.parametrize(
        "kw",
        [
            {"radius": 0.0},
            {"min_points": 0},
            {"nms_iou": 0.0},
            {"nms_iou": 1.5},
            {"score_mode": "himalaya"},
        ],
    )
    def test_validation(self, kw):
        with pytest.raises(GroupingError):
            ClusterConfig(**kw)


class TestClusterBranch:
    def test_close_pair_joins(self):
        c = fg_cloud([[0, 0, 0], [0.02, 0, 0]])
        out = cluster_branch(c, "original", ClusterConfig(min_points=1))
        assert len(out) == 1
        assert out[0].point_indices.tolist() == [0, 1]
        assert out[0].class_id == CHAIR

    def test_chain_of_49_below_minimum(self):
        pts = [[0.02 * i, 0, 0] for i in range(49)]
        out = cluster_branch(fg_cloud(pts), "original", ClusterConfig(min_points=50))
        assert out == []
        # one more link crosses the minimum
        pts.append([0.02 * 49, 0, 0])
        out = cluster_branch(fg_cloud(pts), "original", ClusterConfig(min_points=50))
        assert len(out) == 1 and out[0].size == 50

    def test_radius_is_inclusive(self):
        c = fg_cloud([[0, 0, 0], [0.03, 0, 0]])
        out = cluster_branch(c, "original", ClusterConfig(min_points=1))
        assert len(out) == 1

    def test_labels_split_clusters(self):
        table = ClassTable.default()
        c = fg_cloud(
            [[0, 0, 0], [0.01, 0, 0]],
            labels=[table.id_of("chair"), table.id_of("desk")],
        )
        out = cluster_branch(c, "original", ClusterConfig(min_points=1))
        assert len(out) == 2

    def test_background_excluded(self):
        table = ClassTable.default()
        c = fg_cloud([[0, 0, 0], [0.01, 0, 0]], labels=[table.id_of("floor")] * 2)
        assert cluster_branch(c, "original", ClusterConfig(min_points=1)) == []

    def test_two_chairs_shifted_branch_recovers_gt(self, two_chair_spec):
        cloud, gt = synth_scene(two_chair_spec, seed=2)
        out = cluster_branch(cloud, "shifted", ClusterConfig())
        assert prediction_sets(out) == {
            frozenset(gt.point_indices(0).tolist()),
            frozenset(gt.point_indices(1).tolist()),
        }

    def test_unlabeled_cloud_rejected(self):
        c = LabeledCloud(points=np.zeros((3, 3), np.float32))
        with pytest.raises(GroupingError, match="semantic labels"):
            cluster_branch(c, "original")

    def test_shifted_requires_offsets(self):
        c = LabeledCloud(
            points=np.zeros((3, 3), np.float32),
            semantic_labels=np.full(3, CHAIR, np.uint16),
        )
        with pytest.raises(GroupingError, match="offsets"):
            cluster_branch(c, "shifted")

    def test_bad_branch_name(self):
        with pytest.raises(GroupingError, match="coordinates"):
            cluster_branch(fg_cloud([[0, 0, 0]]), "sideways")

    @settings(max_examples=30, deadline=None)
    @given(
        n=st.integers(5, 300),
        radius=st.floats(0.02, 0.3),
        seed=st.integers(0, 2**31),
    )
    def test_matches_bfs_oracle(self, n, radius, seed):
        rng = np.random.default_rng(seed)
        table = ClassTable.default()
        pts = rng.uniform(0, 1.2, (n, 3)).astype(np.float32)
        labels = rng.integers(0, len(table), n).astype(np.uint16)
        cloud = LabeledCloud(points=pts, semantic_labels=labels,
                             offsets=np.zeros((n, 3), np.float32))
        cfg = ClusterConfig(radius=radius, min_points=1)
        got = prediction_sets(cluster_branch(cloud, "original", cfg))
        fg_idx = np.flatnonzero(~table.background_mask(labels))
        comps = bfs_components(
            pts[fg_idx].astype(np.float64), labels[fg_idx], radius
        )
        want = {frozenset(int(fg_idx[i]) for i in comp) for comp in comps}
        assert got == want

    def test_order_invariance(self, two_chair_spec):
        cloud, _ = synth_scene(two_chair_spec, seed=3)
        base = prediction_sets(segment_instances(cloud))
        perm = np.random.default_rng(0).permutation(cloud.n_points)
        permuted = cloud.subset(perm)
        out = segment_instances(permuted)
        mapped = {
            frozenset(int(perm[i]) for i in p.point_indices) for p in out
        }
        assert mapped == base

    def test_rigid_transform_equivariance(self):
        spec = random_scene_spec(31, n_instances=3, instance_density=2000.0,
                                 background_density=40.0)
        cloud, _ = synth_scene(spec, seed=31)
        base = prediction_sets(segment_instances(cloud))

        theta = 0.7
        R = np.array(
            [
                [np.cos(theta), -np.sin(theta), 0.0],
                [np.sin(theta), np.cos(theta), 0.0],
                [0.0, 0.0, 1.0],
            ]
        )
        t = np.array([4.0, -2.0, 0.5])
        moved = LabeledCloud(
            points=(cloud.points.astype(np.float64) @ R.T + t).astype(np.float32),
            class_table=cloud.class_table,
            semantic_labels=cloud.semantic_labels,
            offsets=(cloud.offsets.astype(np.float64) @ R.T).astype(np.float32),
        )
        assert prediction_sets(segment_instances(moved)) == base


class TestScoring:
    def test_perfect_offsets_score_one(self, two_chair_spec):
        cloud, _ = synth_scene(two_chair_spec, seed=4)
        out = segment_instances(cloud)
        assert all(p.score == 1.0 for p in out)

    def test_split_blob_scores_point_fraction(self):
        # 60 shifted points at the centroid, 20 at +0.5 and 20 at -0.5 so the
        # mean stays at the big blob; only the 60 fall within the radius
        pts = np.zeros((100, 3), np.float32)
        pts[60:80, 0] = 0.5
        pts[80:, 0] = -0.5
        c = fg_cloud(pts)
        prop = ClusterProposal(np.arange(100), CHAIR, "original")
        assert score_proposal(c, prop, ClusterConfig(min_points=1)) == 0.6

    def test_single_point_scores_one(self):
        c = fg_cloud([[1, 2, 3]])
        prop = ClusterProposal(np.array([0]), CHAIR, "original")
        assert score_proposal(c, prop, ClusterConfig(min_points=1)) == 1.0

    def test_size_normalized_mode(self):
        c = fg_cloud(np.zeros((30, 3)))
        cfg = ClusterConfig(min_points=1, score_mode="size-normalized")
        props = [
            ClusterProposal(np.arange(10), CHAIR, "original"),
            ClusterProposal(np.arange(10, 30), CHAIR, "original"),
        ]
        scored = score_proposals(c, props, cfg)
        # median size 15: min(1, 10/15) then min(1, 20/15) capped
        assert scored[0].score == pytest.approx(10 / 15)
        assert scored[1].score == 1.0

    def test_compactness_requires_offsets(self):
        c = LabeledCloud(
            points=np.zeros((2, 3), np.float32),
            semantic_labels=np.full(2, CHAIR, np.uint16),
        )
        prop = ClusterProposal(np.arange(2), CHAIR, "original")
        with pytest.raises(GroupingError, match="offsets"):
            score_proposal(c, prop)


class TestNms:
    def prop(self, idx, score, size=None):
        arr = np.asarray(idx)
        return ClusterProposal(arr, CHAIR, "original", score=score)

    def test_identical_pair_keeps_higher_score(self):
        a = self.prop(np.arange(60), 0.9)
        b = self.prop(np.arange(60), 0.8)
        out = nms([b, a], 0.3)
        assert len(out) == 1 and out[0].score == 0.9

    def test_disjoint_all_survive(self):
        a = self.prop(np.arange(0, 60), 0.9)
        b = self.prop(np.arange(60, 120), 0.1)
        assert len(nms([a, b], 0.3)) == 2

    def test_subset_size_tiebreak(self):
        big = self.prop(np.arange(100), 0.7)
        small = self.prop(np.arange(50), 0.7)
        out = nms([small, big], 0.3)
        assert len(out) == 1 and out[0].size == 100
        # IoU 0.5 below a 0.6 threshold: both survive, big still first
        out = nms([small, big], 0.6)
        assert [p.size for p in out] == [100, 50]

    def test_survivors_pairwise_below_threshold(self):
        rng = np.random.default_rng(5)
        props = []
        for _ in range(40):
            start = rng.integers(0, 200)
            size = rng.integers(10, 120)
            props.append(self.prop(np.arange(start, start + size),
                                   float(rng.random())))
        out = nms(props, 0.3)
        sets = [set(p.point_indices.tolist()) for p in out]
        for i in range(len(sets)):
            for j in range(i + 1, len(sets)):
                inter = len(sets[i] & sets[j])
                union = len(sets[i] | sets[j])
                assert inter / union < 0.3


class TestSegmentInstances:
    def test_empty_room(self):
        from hida.cloudio import SceneSpec

        cloud, _ = synth_scene(SceneSpec(room=(2, 2, 2), background_density=60.0))
        assert segment_instances(cloud) == []

    def test_noiseless_three_objects_exact(self):
        spec = random_scene_spec(17, n_instances=3, background_density=60.0)
        cloud, gt = synth_scene(spec, seed=17)
        out = segment_instances(cloud)
        assert len(out) == 3
        assert prediction_sets(out) == {
            frozenset(gt.point_indices(k).tolist()) for k in range(3)
        }
        assert all(p.score == 1.0 for p in out)
        classes = {p.class_id for p in out}
        assert classes == set(gt.instance_classes.tolist())

    def test_flip_noise_keeps_high_overlap(self):
        spec = random_scene_spec(18, n_instances=3, background_density=60.0)
        cloud, gt = synth_scene(spec, seed=18)
        noisy = oracle_predict(cloud, gt, OracleConfig(0.05, 0.0, 18))
        out = segment_instances(noisy)
        assert len(out) >= 3
        pred = [set(p.point_indices.tolist()) for p in out]
        for k in range(gt.n_instances):
            g = set(gt.point_indices(k).tolist())
            best = max(len(g & s) / len(g | s) for s in pred)
            assert best >= 0.9

    def test_no_background_points_in_predictions(self):
        spec = random_scene_spec(19, n_instances=4, background_density=60.0)
        cloud, gt = synth_scene(spec, seed=19)
        noisy = oracle_predict(cloud, gt, OracleConfig(0.1, 0.02, 19))
        bg = noisy.class_table.background_mask(noisy.semantic_labels)
        for p in segment_instances(noisy):
            assert not bg[p.point_indices].any()
