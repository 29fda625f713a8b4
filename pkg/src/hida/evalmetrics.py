"""Instance-segmentation metrics: greedy matching and interpolated AP.

Predictions are visited in descending score order (ties: larger prediction
first, then lower smallest member index) and each takes the unmatched
ground-truth instance of its class with the highest point-set IoU; the match
counts when that IoU reaches the threshold. The precision-recall curve is
integrated with all-points interpolation: precision at a recall level is the
maximum precision at any recall at or above it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from hida.cloudio import ClassTable, GroundTruthInstances
from hida.grouping import InstancePrediction

MAP_IOU_THRESHOLDS = tuple(i / 100 for i in range(50, 100, 5))
AP50_THRESHOLD = 0.50
AP25_THRESHOLD = 0.25


class EmptyGroundTruthError(ValueError):
    """Raised when evaluation is attempted against zero instances."""


@dataclass(frozen=True)
class ApResult:
    """Per-class APs plus the three headline aggregates."""

    per_class: dict[int, dict[float, float]]
    map: float
    ap50: float
    ap25: float

    def to_json(self, class_table: ClassTable) -> dict:
        classes = {}
        for class_id, table in sorted(self.per_class.items()):
            aps = {f"{thr:.2f}": table[thr] for thr in MAP_IOU_THRESHOLDS}
            classes[class_table.names[class_id]] = {
                "ap_per_threshold": aps,
                "ap": float(np.mean([table[t] for t in MAP_IOU_THRESHOLDS])),
                "ap50": table[AP50_THRESHOLD],
                "ap25": table[AP25_THRESHOLD],
            }
        return {
            "map": self.map,
            "ap50": self.ap50,
            "ap25": self.ap25,
            "classes": classes,
        }


def _iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = np.intersect1d(a, b, assume_unique=True).size
    if inter == 0:
        return 0.0
    return inter / (len(a) + len(b) - inter)


def _protocol_order(predictions: Sequence[InstancePrediction]) -> list[InstancePrediction]:
    return sorted(
        predictions,
        key=lambda p: (-p.score, -p.size, int(p.point_indices[0])),
    )


def match_and_ap(
    predictions: Sequence[InstancePrediction],
    gt: GroundTruthInstances,
    iou_threshold: float,
    class_id: int,
) -> float | None:
    """AP for one class at one IoU threshold; None when the class has no GT."""
    gt_sets = [
        gt.point_indices(k)
        for k in range(gt.n_instances)
        if int(gt.instance_classes[k]) == class_id
    ]
    n_gt = len(gt_sets)
    if n_gt == 0:
        return None
    preds = _protocol_order([p for p in predictions if p.class_id == class_id])
    if not preds:
        return 0.0

    matched = np.zeros(n_gt, dtype=bool)
    tp = np.zeros(len(preds), dtype=np.float64)
    for i, p in enumerate(preds):
        best_iou, best_g = 0.0, -1
        for g, gset in enumerate(gt_sets):
            if matched[g]:
                continue
            iou = _iou(p.point_indices, gset)
            if iou > best_iou:
                best_iou, best_g = iou, g
        if best_g >= 0 and best_iou >= iou_threshold:
            matched[best_g] = True
            tp[i] = 1.0

    cum_tp = np.cumsum(tp)
    precision = cum_tp / np.arange(1, len(preds) + 1)
    recall = cum_tp / n_gt
    interp = np.maximum.accumulate(precision[::-1])[::-1]
    steps = tp > 0  # recall rises by 1/n_gt exactly at true positives
    return float(interp[steps].sum() / n_gt)


def evaluate(
    predictions: Sequence[InstancePrediction],
    gt: GroundTruthInstances,
    class_table: ClassTable,
) -> ApResult:
    """Per-class AP sweep plus mAP/AP50/AP25 aggregates.

    mAP averages over classes that have ground truth, each averaged over
    IoU thresholds 0.50 to 0.95 in steps of 0.05. Raises
    EmptyGroundTruthError when no class has any instance.
    """
    if gt.n_instances == 0:
        raise EmptyGroundTruthError("empty ground truth: no instances to evaluate")
    class_ids = sorted({int(c) for c in gt.instance_classes})
    thresholds = MAP_IOU_THRESHOLDS + (AP25_THRESHOLD,)
    per_class: dict[int, dict[float, float]] = {}
    for class_id in class_ids:
        table = {}
        for thr in thresholds:
            ap = match_and_ap(predictions, gt, thr, class_id)
            table[thr] = float(ap)
        per_class[class_id] = table
    map_value = float(
        np.mean([
            np.mean([per_class[c][t] for t in MAP_IOU_THRESHOLDS]) for c in class_ids
        ])
    )
    ap50 = float(np.mean([per_class[c][AP50_THRESHOLD] for c in class_ids]))
    ap25 = float(np.mean([per_class[c][AP25_THRESHOLD] for c in class_ids]))
    return ApResult(per_class=per_class, map=map_value, ap50=ap50, ap25=ap25)
