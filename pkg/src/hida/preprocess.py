"""Point-budget enforcement, statistical outlier removal, and voxel indexing.

The pipeline order is fixed: even downsampling to the point budget first,
then the statistical outlier filter, so the filter cost is bounded by the
budget. The voxel hash built here backs the fixed-radius search of the
grouping stage; the outlier filter's k-nearest-neighbor distances come from
an exact KD-tree query.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.spatial import cKDTree

from hida.cloudio import LabeledCloud


class PreprocessError(ValueError):
    """Invalid preprocessing input or configuration."""


@dataclass(frozen=True)
class PreprocessConfig:
    max_points: int = 200_000
    outlier_k: int = 16
    outlier_sigma: float = 2.0
    voxel_size: float = 0.02

    def __post_init__(self):
        if self.max_points < 1:
            raise PreprocessError("max_points must be >= 1")
        if self.outlier_k < 1:
            raise PreprocessError("outlier_k must be >= 1")
        if self.voxel_size <= 0:
            raise PreprocessError("voxel_size must be > 0")


def voxel_coords(points, voxel_size: float) -> np.ndarray:
    """Integer voxel coordinate floor(p / voxel_size) per point, int64."""
    p = np.asarray(points, dtype=np.float64)
    return np.floor(p / float(voxel_size)).astype(np.int64)


class GridIndex:
    """Packed voxel hash over integer grid coordinates.

    Buckets are exposed as slices into ``order`` (point indices sorted by
    packed voxel key). ``pad`` reserves headroom so neighbor offsets up to
    that Chebyshev radius can be added to any occupied key without leaving
    the packing range.
    """

    def __init__(self, grid: np.ndarray, pad: int, sort_secondary: np.ndarray | None = None):
        self.grid = grid
        self.pad = int(pad)
        n = len(grid)
        if n == 0:
            self.mins = np.zeros(3, np.int64)
            self.dims = np.ones(3, np.int64)
        else:
            self.mins = grid.min(axis=0) - self.pad
            self.dims = grid.max(axis=0) - self.mins + 1 + self.pad
        if int(self.dims[0]) * int(self.dims[1]) * int(self.dims[2]) > 2**62:
            raise PreprocessError("voxel grid spans too many cells to pack")
        self.keys = self.pack(grid)
        if sort_secondary is None:
            self.order = np.argsort(self.keys, kind="stable")
        else:
            self.order = np.lexsort((sort_secondary, self.keys))
        sorted_keys = self.keys[self.order]
        self.unique_keys, self.starts, self.counts = np.unique(
            sorted_keys, return_index=True, return_counts=True
        )

    def pack(self, grid: np.ndarray) -> np.ndarray:
        g = grid - self.mins
        return (g[:, 0] * self.dims[1] + g[:, 1]) * self.dims[2] + g[:, 2]

    def pack_offset(self, d) -> int:
        dx, dy, dz = (int(v) for v in d)
        return (dx * int(self.dims[1]) + dy) * int(self.dims[2]) + dz

    def bucket_of_keys(self, keys: np.ndarray) -> np.ndarray:
        """Bucket index per query key, or -1 when the voxel is empty."""
        if len(self.unique_keys) == 0:
            return np.full(len(keys), -1, dtype=np.int64)
        pos = np.searchsorted(self.unique_keys, keys)
        pos_c = np.clip(pos, 0, len(self.unique_keys) - 1)
        hit = self.unique_keys[pos_c] == keys
        return np.where(hit, pos_c, -1)


def knn_distances(points: np.ndarray, k: int) -> np.ndarray:
    """Sorted distances to each point's k nearest neighbors, shape (N, k).

    Exact KD-tree query for k+1 neighbors with the leading self column
    dropped. Coincident points make the self column an arbitrary zero among
    the tied zeros, which leaves the remaining distance values unchanged.
    Distances are float64 and match a direct O(N^2) computation
    bit-for-bit.
    """
    P = np.asarray(points, dtype=np.float64)
    n = len(P)
    if k < 1:
        raise PreprocessError("k must be >= 1")
    if n <= k:
        raise PreprocessError("cloud too small for outlier filter")
    dist, _ = cKDTree(P).query(P, k=k + 1)
    return dist[:, 1:]


def downsample_even(cloud: LabeledCloud, max_points: int = 200_000) -> LabeledCloud:
    """Deterministically thin a cloud to at most ``max_points``.

    Keeps indices round(i * N / M) for i in [0, M), which preserves the
    original ordering and spreads removals evenly; a cloud at or under the
    budget is returned unchanged.
    """
    n = cloud.n_points
    if max_points < 1:
        raise PreprocessError("max_points must be >= 1")
    if n <= max_points:
        return cloud
    m = max_points
    i = np.arange(m, dtype=np.int64)
    kept = (2 * i * n + m) // (2 * m)  # round(i*n/m) in exact integer math
    return cloud.subset(kept)


def remove_outliers(
    cloud: LabeledCloud, outlier_k: int = 16, outlier_sigma: float = 2.0
) -> tuple[LabeledCloud, np.ndarray]:
    """Drop points whose mean distance to their k nearest neighbors is high.

    A point is removed when its mean kNN distance exceeds
    mean(d) + outlier_sigma * std(d) computed over the whole cloud
    (population std). Returns the filtered cloud and the removed original
    indices (ascending).

    Raises
    ------
    PreprocessError
        If the cloud has no more points than ``outlier_k``.
    """
    n = cloud.n_points
    if n <= outlier_k:
        raise PreprocessError("cloud too small for outlier filter")
    dists = knn_distances(cloud.points.astype(np.float64), outlier_k)
    mean_d = dists.mean(axis=1)
    threshold = mean_d.mean() + outlier_sigma * mean_d.std()
    removed = np.flatnonzero(mean_d > threshold)
    kept = np.flatnonzero(mean_d <= threshold)
    return cloud.subset(kept), removed


@dataclass
class VoxelIndexCloud:
    """A cloud with its voxel decomposition at a fixed voxel size."""

    cloud: LabeledCloud
    voxel_size: float
    voxel_coordinates: np.ndarray               # (N, 3) int64
    buckets: dict[tuple[int, int, int], np.ndarray]

    def bucket(self, vox) -> np.ndarray:
        return self.buckets.get(tuple(int(v) for v in vox), _EMPTY_BUCKET)


_EMPTY_BUCKET = np.zeros(0, dtype=np.int64)


def voxelize(cloud: LabeledCloud, voxel_size: float = 0.02) -> VoxelIndexCloud:
    """Partition points into voxels of ``voxel_size`` (floor semantics)."""
    if voxel_size <= 0:
        raise PreprocessError("voxel_size must be > 0")
    grid = voxel_coords(cloud.points, voxel_size)
    index = GridIndex(grid, pad=1)
    buckets: dict[tuple[int, int, int], np.ndarray] = {}
    for b in range(len(index.unique_keys)):
        members = index.order[index.starts[b] : index.starts[b] + index.counts[b]]
        vox = tuple(int(v) for v in grid[members[0]])
        buckets[vox] = members
    return VoxelIndexCloud(cloud, float(voxel_size), grid, buckets)


def preprocess(
    cloud: LabeledCloud, cfg: PreprocessConfig = PreprocessConfig()
) -> tuple[LabeledCloud, dict]:
    """Run downsample -> outlier filter and report stage statistics.

    The report carries input_points, kept_points, removed_outliers, and
    wall-clock seconds.
    """
    t0 = time.perf_counter()
    n_in = cloud.n_points
    capped = downsample_even(cloud, cfg.max_points)
    filtered, removed = remove_outliers(capped, cfg.outlier_k, cfg.outlier_sigma)
    report = {
        "input_points": n_in,
        "kept_points": filtered.n_points,
        "removed_outliers": int(removed.size),
        "seconds": time.perf_counter() - t0,
    }
    return filtered, report
