"""Greedy instance matching and interpolated average precision."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hida.cloudio import (
    ClassTable,
    GroundTruthInstances,
    OracleConfig,
    oracle_predict,
    random_scene_spec,
    synth_scene,
)
from hida.evalmetrics import (
    MAP_IOU_THRESHOLDS,
    EmptyGroundTruthError,
    evaluate,
    match_and_ap,
)
from hida.grouping import InstancePrediction, segment_instances
from oracles import exhaustive_ap

CHAIR = ClassTable.default().id_of("chair")
DESK = ClassTable.default().id_of("desk")


def gt_of(sets_and_classes):
    """Ground truth from [(point index list, class id), ...]."""
    n = 1 + max(max(s) for s, _ in sets_and_classes)
    ids = np.full(n, -1, np.int32)
    classes = []
    for k, (members, class_id) in enumerate(sets_and_classes):
        ids[list(members)] = k
        classes.append(class_id)
    return GroundTruthInstances(ids, np.array(classes, np.uint16))


def pred(members, class_id=CHAIR, score=1.0):
    return InstancePrediction(np.array(sorted(members)), class_id, score)


class TestThresholds:
    def test_map_grid(self):
        assert MAP_IOU_THRESHOLDS == tuple(
            pytest.approx(v) for v in np.arange(0.50, 1.00, 0.05)
        )
        assert len(MAP_IOU_THRESHOLDS) == 10


class TestMatchAndAp:
    def test_perfect_match_every_threshold(self):
        gt = gt_of([(range(100), CHAIR)])
        p = [pred(range(100))]
        for thr in MAP_IOU_THRESHOLDS:
            assert match_and_ap(p, gt, thr, CHAIR) == 1.0

    def test_iou_060_crosses_at_half(self):
        gt = gt_of([(range(100), CHAIR)])
        # 60 shared + 20 extra: IoU = 60 / 120 = 0.5... use 75/100: 75/125=0.6
        p = [pred(list(range(75)) + list(range(100, 150)))]
        assert match_and_ap(p, gt, 0.50, CHAIR) == 1.0
        assert match_and_ap(p, gt, 0.75, CHAIR) == 0.0

    def test_false_positive_ahead_of_true(self):
        gt = gt_of([(range(50), CHAIR)])
        p = [
            pred(range(100, 150), score=0.9),  # misses the GT entirely
            pred(range(50), score=0.8),
        ]
        assert match_and_ap(p, gt, 0.5, CHAIR) == 0.5

    def test_no_predictions_zero(self):
        gt = gt_of([(range(10), CHAIR)])
        assert match_and_ap([], gt, 0.5, CHAIR) == 0.0

    def test_absent_class_skipped(self):
        gt = gt_of([(range(10), CHAIR)])
        assert match_and_ap([], gt, 0.5, DESK) is None

    def test_threshold_monotone(self):
        rng = np.random.default_rng(0)
        gt = gt_of([(range(0, 40), CHAIR), (range(40, 80), CHAIR)])
        preds = [
            pred(rng.choice(100, 30, replace=False), score=float(rng.random()))
            for _ in range(5)
        ]
        aps = [match_and_ap(preds, gt, t, CHAIR) for t in MAP_IOU_THRESHOLDS]
        assert all(a >= b for a, b in zip(aps, aps[1:]))

    def test_trailing_extras_keep_ap_one(self):
        # extras ranked below every true cluster never dent all-points AP
        gt = gt_of([(range(0, 60), CHAIR), (range(60, 120), CHAIR)])
        p = [
            pred(range(0, 60), score=1.0),
            pred(range(60, 120), score=1.0),
            pred(range(200, 260), score=0.4),
        ]
        assert match_and_ap(p, gt, 0.5, CHAIR) == 1.0

    @settings(max_examples=60, deadline=None)
    @given(
        n_pred=st.integers(0, 6),
        n_gt=st.integers(1, 6),
        thr_i=st.integers(0, 9),
        seed=st.integers(0, 2**31),
    )
    def test_matches_exhaustive_oracle(self, n_pred, n_gt, thr_i, seed):
        rng = np.random.default_rng(seed)
        universe = 40
        gt_sets = []
        ids = np.full(universe, -1, np.int32)
        for k in range(n_gt):
            size = int(rng.integers(2, 9))
            free = np.flatnonzero(ids < 0)
            members = rng.choice(free, min(size, len(free)), replace=False)
            ids[members] = k
            gt_sets.append(frozenset(int(i) for i in members))
        gt = GroundTruthInstances(ids, np.full(n_gt, CHAIR, np.uint16))

        preds, pred_sets, pred_scores = [], [], []
        for _ in range(n_pred):
            size = int(rng.integers(1, 12))
            members = rng.choice(universe, size, replace=False)
            score = float(rng.integers(0, 4)) / 4.0  # coarse scores force ties
            preds.append(pred(members, score=score))
            pred_sets.append(frozenset(int(i) for i in members))
            pred_scores.append(score)

        thr = MAP_IOU_THRESHOLDS[thr_i]
        got = match_and_ap(preds, gt, thr, CHAIR)
        want = exhaustive_ap(pred_sets, pred_scores, gt_sets, thr)
        assert got == pytest.approx(want, abs=1e-12)


class TestEvaluate:
    def test_empty_gt_raises(self):
        gt = GroundTruthInstances(np.full(5, -1, np.int32), np.zeros(0, np.uint16))
        with pytest.raises(EmptyGroundTruthError, match="empty ground truth"):
            evaluate([], gt, ClassTable.default())

    def test_empty_predictions_zero_metrics(self):
        gt = gt_of([(range(10), CHAIR)])
        r = evaluate([], gt, ClassTable.default())
        assert r.map == 0.0 and r.ap50 == 0.0 and r.ap25 == 0.0

    def test_two_of_three_equal_instances(self):
        gt = gt_of([(range(0, 10), CHAIR), (range(10, 20), CHAIR), (range(20, 30), CHAIR)])
        p = [pred(range(0, 10)), pred(range(10, 20))]
        r = evaluate(p, gt, ClassTable.default())
        assert r.map == pytest.approx(2 / 3)
        assert r.ap50 == pytest.approx(2 / 3)
        assert r.ap25 == pytest.approx(2 / 3)

    def test_noiseless_pipeline_scores_one(self):
        spec = random_scene_spec(23, n_instances=4, background_density=60.0)
        cloud, gt = synth_scene(spec, seed=23)
        out = segment_instances(cloud)
        r = evaluate(out, gt, cloud.class_table)
        assert r.map == 1.0 and r.ap50 == 1.0 and r.ap25 == 1.0

    def test_noisy_pipeline_stays_bounded(self):
        spec = random_scene_spec(24, n_instances=4, background_density=60.0)
        cloud, gt = synth_scene(spec, seed=24)
        noisy = oracle_predict(cloud, gt, OracleConfig(0.05, 0.005, 24))
        r = evaluate(segment_instances(noisy), gt, cloud.class_table)
        assert 0.0 <= r.map <= 1.0
        assert r.ap25 >= r.ap50

    def test_mean_is_over_gt_classes_only(self):
        gt = gt_of([(range(0, 10), CHAIR)])
        p = [pred(range(0, 10)), pred(range(20, 30), class_id=DESK, score=0.5)]
        r = evaluate(p, gt, ClassTable.default())
        # desk has no GT: skipped entirely, chair alone defines the mean
        assert r.map == 1.0
        assert DESK not in r.per_class

    def test_tie_order_invariance(self):
        gt = gt_of([(range(0, 30), CHAIR), (range(30, 60), CHAIR)])
        a = pred(range(0, 30), score=0.7)
        b = pred(range(30, 60), score=0.7)
        r1 = evaluate([a, b], gt, ClassTable.default())
        r2 = evaluate([b, a], gt, ClassTable.default())
        assert r1.map == r2.map == 1.0

    def test_json_shape(self):
        gt = gt_of([(range(0, 10), CHAIR)])
        r = evaluate([pred(range(0, 10))], gt, ClassTable.default())
        obj = r.to_json(ClassTable.default())
        assert set(obj) == {"map", "ap50", "ap25", "classes"}
        chair = obj["classes"]["chair"]
        assert chair["ap"] == 1.0
        assert set(chair["ap_per_threshold"]) == {f"{t:.2f}" for t in MAP_IOU_THRESHOLDS}
