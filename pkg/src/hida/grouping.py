"""Instance grouping: dual-branch radius clustering, scoring, and NMS.

Two clustering branches run over the same semantic labels: one on the
original coordinates and one on coordinates shifted by the predicted
centroid offsets. Points connect when they share a label and sit within
``radius`` of each other; background classes never participate. Proposals
from both branches are scored and merged by greedy NMS over point-set IoU.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from hida.cloudio import LabeledCloud
from hida.preprocess import GridIndex, voxel_coords


class GroupingError(ValueError):
    """Invalid grouping input or configuration."""


SCORE_MODES = ("centroid-compactness", "size-normalized")
BRANCHES = ("original", "shifted")


@dataclass(frozen=True)
class ClusterConfig:
    radius: float = 0.03
    min_points: int = 50
    nms_iou: float = 0.3
    score_mode: str = "centroid-compactness"

    def __post_init__(self):
        if self.radius <= 0:
            raise GroupingError("radius must be > 0")
        if self.min_points < 1:
            raise GroupingError("min_points must be >= 1")
        if not (0.0 < self.nms_iou <= 1.0):
            raise GroupingError("nms_iou must be in (0, 1]")
        if self.score_mode not in SCORE_MODES:
            raise GroupingError(f"score_mode must be one of {SCORE_MODES}")


@dataclass(frozen=True)
class ClusterProposal:
    """A connected same-label component from one branch."""

    point_indices: np.ndarray  # sorted, unique, into the clustered cloud
    class_id: int
    branch: str
    score: float = 0.0

    @property
    def size(self) -> int:
        return len(self.point_indices)


@dataclass(frozen=True)
class InstancePrediction:
    """A scored instance surviving NMS."""

    point_indices: np.ndarray
    class_id: int
    score: float

    @property
    def size(self) -> int:
        return len(self.point_indices)


def _within_segment_pairs(starts: np.ndarray, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All i<j position pairs inside each [start, start+count) segment."""
    sq = counts * counts
    total = int(sq.sum())
    if total == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    seg = np.repeat(np.arange(len(starts)), sq)
    ends = np.cumsum(sq)
    t = np.arange(total) - np.repeat(ends - sq, sq)
    c = counts[seg]
    a = t // c
    b = t % c
    keep = a < b
    return (starts[seg] + a)[keep], (starts[seg] + b)[keep]


def _cross_pairs(
    index: GridIndex, src_buckets: np.ndarray, dst_buckets: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Cartesian products of member lists for matched bucket pairs."""
    ca = index.counts[src_buckets]
    cb = index.counts[dst_buckets]
    tot = ca * cb
    total = int(tot.sum())
    if total == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    pair = np.repeat(np.arange(len(src_buckets)), tot)
    ends = np.cumsum(tot)
    t = np.arange(total) - np.repeat(ends - tot, tot)
    ai = t // cb[pair]
    bi = t % cb[pair]
    I = index.order[index.starts[src_buckets][pair] + ai]
    J = index.order[index.starts[dst_buckets][pair] + bi]
    return I, J


def _same_label_radius_pairs(
    coords: np.ndarray, labels: np.ndarray, radius: float, voxel_size: float
) -> tuple[np.ndarray, np.ndarray]:
    """Edges (i, j) with equal labels and distance <= radius.

    Candidates come from the voxel hash: voxel pairs within Chebyshev shell
    radius ceil(radius / voxel_size), pruned by each offset's minimum
    possible distance. Inside a voxel, same-label runs whose bounding box
    diagonal fits the radius are connected as a star (they form a clique);
    other runs fall back to exact pairwise checks.
    """
    n = len(coords)
    if n == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    shell = math.ceil(radius / voxel_size)
    grid = voxel_coords(coords, voxel_size)
    index = GridIndex(grid, pad=shell + 1, sort_secondary=labels)
    order = index.order
    sorted_keys = index.keys[order]
    sorted_labels = labels[order]
    x, y, z = coords[:, 0], coords[:, 1], coords[:, 2]
    r2 = float(radius) * float(radius)

    out_i: list[np.ndarray] = []
    out_j: list[np.ndarray] = []

    # Same-voxel edges, one (voxel, label) run at a time.
    if n:
        change = np.flatnonzero(
            (np.diff(sorted_keys) != 0) | (np.diff(sorted_labels.astype(np.int64)) != 0)
        ) + 1
        run_starts = np.concatenate([[0], change])
        run_counts = np.diff(np.concatenate([run_starts, [n]]))
        multi = run_counts > 1
        if multi.any():
            ms, mc = run_starts[multi], run_counts[multi]
            pts_sorted = coords[order]
            mins = np.minimum.reduceat(pts_sorted, run_starts, axis=0)[multi]
            maxs = np.maximum.reduceat(pts_sorted, run_starts, axis=0)[multi]
            diag2 = ((maxs - mins) ** 2).sum(axis=1)
            tight = diag2 <= r2
            if tight.any():
                ts, tc = ms[tight], mc[tight]
                firsts = np.repeat(ts, tc - 1)
                rest_end = np.cumsum(tc - 1)
                inner = np.arange(int((tc - 1).sum())) - np.repeat(rest_end - (tc - 1), tc - 1)
                others = np.repeat(ts, tc - 1) + 1 + inner
                out_i.append(order[firsts])
                out_j.append(order[others])
            loose = ~tight
            if loose.any():
                a, b = _within_segment_pairs(ms[loose], mc[loose])
                I, J = order[a], order[b]
                d2 = (x[I] - x[J]) ** 2 + (y[I] - y[J]) ** 2 + (z[I] - z[J]) ** 2
                keep = d2 <= r2
                out_i.append(I[keep])
                out_j.append(J[keep])

    # Cross-voxel edges: one direction per unordered offset pair.
    vs = float(voxel_size)
    for dx in range(-shell, shell + 1):
        for dy in range(-shell, shell + 1):
            for dz in range(-shell, shell + 1):
                d = (dx, dy, dz)
                if d <= (0, 0, 0):
                    continue  # lexicographic halving; (0,0,0) handled above
                min_d2 = sum((max(abs(v) - 1, 0) * vs) ** 2 for v in d)
                if min_d2 > r2:
                    continue
                key2 = index.unique_keys + index.pack_offset(d)
                dst = index.bucket_of_keys(key2)
                rows = np.flatnonzero(dst >= 0)
                if rows.size == 0:
                    continue
                I, J = _cross_pairs(index, rows, dst[rows])
                same = labels[I] == labels[J]
                I, J = I[same], J[same]
                if I.size == 0:
                    continue
                d2 = (x[I] - x[J]) ** 2 + (y[I] - y[J]) ** 2 + (z[I] - z[J]) ** 2
                keep = d2 <= r2
                out_i.append(I[keep])
                out_j.append(J[keep])

    if out_i:
        return np.concatenate(out_i), np.concatenate(out_j)
    return np.zeros(0, np.int64), np.zeros(0, np.int64)


def cluster_branch(
    cloud: LabeledCloud,
    coordinates: str,
    cfg: ClusterConfig = ClusterConfig(),
    voxel_size: float = 0.02,
) -> list[ClusterProposal]:
    """Connected same-label components in the chosen coordinate space.

    ``coordinates`` selects "original" points or points "shifted" by their
    predicted offsets. Background-class points are excluded entirely, and
    components below ``cfg.min_points`` are discarded. Proposals come back
    ordered by their smallest member index.
    """
    if coordinates not in BRANCHES:
        raise GroupingError(f"coordinates must be one of {BRANCHES}")
    if cloud.semantic_labels is None:
        raise GroupingError("clustering requires semantic labels")
    if coordinates == "shifted" and cloud.offsets is None:
        raise GroupingError("shifted branch requires offsets")

    fg = ~cloud.class_table.background_mask(cloud.semantic_labels)
    fg_idx = np.flatnonzero(fg)
    if fg_idx.size == 0:
        return []
    pts = cloud.points[fg_idx].astype(np.float64)
    if coordinates == "shifted":
        pts = pts + cloud.offsets[fg_idx].astype(np.float64)
    labels = cloud.semantic_labels[fg_idx]

    I, J = _same_label_radius_pairs(pts, labels, cfg.radius, voxel_size)
    m = fg_idx.size
    graph = sparse.coo_matrix(
        (np.ones(len(I), dtype=np.int8), (I, J)), shape=(m, m)
    )
    _, comp = csgraph.connected_components(graph, directed=False)

    sizes = np.bincount(comp)
    keep_comp = np.flatnonzero(sizes >= cfg.min_points)
    proposals = []
    for c in keep_comp:
        local = np.flatnonzero(comp == c)
        proposals.append(
            ClusterProposal(
                point_indices=fg_idx[local],
                class_id=int(labels[local[0]]),
                branch=coordinates,
            )
        )
    proposals.sort(key=lambda p: int(p.point_indices[0]))
    return proposals


def _shifted_coords(cloud: LabeledCloud, idx: np.ndarray) -> np.ndarray:
    return cloud.points[idx].astype(np.float64) + cloud.offsets[idx].astype(np.float64)


def score_proposals(
    cloud: LabeledCloud,
    proposals: Sequence[ClusterProposal],
    cfg: ClusterConfig = ClusterConfig(),
) -> list[ClusterProposal]:
    """Attach scores in [0, 1] to proposals.

    centroid-compactness: fraction of the proposal's shifted points within
    ``cfg.radius`` of the proposal's shifted centroid. size-normalized:
    min(1, size / median size of same-class proposals in this collection).
    """
    if cfg.score_mode == "centroid-compactness":
        if cloud.offsets is None:
            raise GroupingError("centroid-compactness scoring requires offsets")
        scored = []
        for p in proposals:
            shifted = _shifted_coords(cloud, p.point_indices)
            centroid = shifted.mean(axis=0)
            d2 = ((shifted - centroid) ** 2).sum(axis=1)
            frac = float((d2 <= cfg.radius * cfg.radius).mean())
            scored.append(replace(p, score=frac))
        return scored

    medians: dict[int, float] = {}
    for class_id in {p.class_id for p in proposals}:
        sizes = [p.size for p in proposals if p.class_id == class_id]
        medians[class_id] = float(np.median(sizes))
    return [
        replace(p, score=min(1.0, p.size / medians[p.class_id])) for p in proposals
    ]


def score_proposal(
    cloud: LabeledCloud, proposal: ClusterProposal, cfg: ClusterConfig = ClusterConfig()
) -> float:
    """Score a single proposal (size-normalized scores use it as its own cohort)."""
    return score_proposals(cloud, [proposal], cfg)[0].score


def _acceptance_order(proposals: Sequence[ClusterProposal]) -> list[int]:
    return sorted(
        range(len(proposals)),
        key=lambda i: (
            -proposals[i].score,
            -proposals[i].size,
            int(proposals[i].point_indices[0]),
        ),
    )


def nms(
    proposals: Sequence[ClusterProposal], nms_iou: float = 0.3
) -> list[InstancePrediction]:
    """Greedy point-set-IoU suppression.

    Proposals are visited by descending score (ties: larger size, then lower
    smallest member index); each survivor suppresses later proposals with
    IoU >= ``nms_iou`` against it.
    """
    accepted: list[InstancePrediction] = []
    accepted_sets: list[set] = []
    for i in _acceptance_order(proposals):
        p = proposals[i]
        s = set(p.point_indices.tolist())
        suppressed = False
        for other in accepted_sets:
            inter = len(s & other)
            if inter and inter / (len(s) + len(other) - inter) >= nms_iou:
                suppressed = True
                break
        if not suppressed:
            accepted.append(
                InstancePrediction(
                    point_indices=p.point_indices, class_id=p.class_id, score=p.score
                )
            )
            accepted_sets.append(s)
    return accepted


def segment_instances(
    cloud: LabeledCloud,
    cfg: ClusterConfig = ClusterConfig(),
    voxel_size: float = 0.02,
) -> list[InstancePrediction]:
    """Full grouping stage: both branches, scoring, then NMS."""
    proposals = cluster_branch(cloud, "original", cfg, voxel_size) + cluster_branch(
        cloud, "shifted", cfg, voxel_size
    )
    scored = score_proposals(cloud, proposals, cfg)
    return nms(scored, cfg.nms_iou)
