"""Top-view projection: ego frame, 30-degree sectors, and instance extraction.

The top view drops z and works in an ego frame where +x points forward and
+y points left. Bearings split into 12 sectors of 30 degrees; sector 0 is
centered on forward and spans [-15, +15) degrees, counting counterclockwise.
``build_topview`` walks the cloud once: the coordinate block is fetched a
single time and every derived quantity comes from that one pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from hida.cloudio import ClassTable, LabeledCloud
from hida.grouping import InstancePrediction

SECTOR_COUNT = 12
SECTOR_WIDTH_DEG = 360.0 / SECTOR_COUNT
DEFAULT_HEADROOM = 2.2  # meters; points above are overhead, not obstacles


class TopViewError(ValueError):
    """Invalid top-view input."""


def normalize_heading(heading: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = math.remainder(float(heading), math.tau)
    if r <= -math.pi:
        r += math.tau
    return r


@dataclass(frozen=True)
class Pose2D:
    """Planar pose: position plus heading (radians, ccw from +x, (-pi, pi])."""

    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_heading(self.heading))

    def to_json(self) -> dict:
        return {"x": self.x, "y": self.y, "heading": self.heading}

    @classmethod
    def from_json(cls, obj: dict) -> "Pose2D":
        return cls(float(obj["x"]), float(obj["y"]), float(obj["heading"]))


@dataclass(frozen=True)
class EgoPoint:
    """A point in the ego frame: x_fwd forward, y_left to the left."""

    x_fwd: float
    y_left: float

    @property
    def range(self) -> float:
        return math.hypot(self.x_fwd, self.y_left)

    @property
    def bearing(self) -> float:
        return math.atan2(self.y_left, self.x_fwd)

    def to_json(self) -> dict:
        return {"x_fwd": self.x_fwd, "y_left": self.y_left}

    @classmethod
    def from_json(cls, obj: dict) -> "EgoPoint":
        return cls(float(obj["x_fwd"]), float(obj["y_left"]))


@dataclass(frozen=True)
class FeaturePoints:
    """The five per-instance feature points, in the ego frame."""

    closest: EgoPoint
    x_min: EgoPoint
    x_max: EgoPoint
    y_min: EgoPoint
    y_max: EgoPoint

    def all(self) -> tuple[EgoPoint, ...]:
        return (self.closest, self.x_min, self.x_max, self.y_min, self.y_max)

    def to_json(self) -> dict:
        return {
            "closest": self.closest.to_json(),
            "x_min": self.x_min.to_json(),
            "x_max": self.x_max.to_json(),
            "y_min": self.y_min.to_json(),
            "y_max": self.y_max.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FeaturePoints":
        return cls(**{k: EgoPoint.from_json(obj[k]) for k in
                      ("closest", "x_min", "x_max", "y_min", "y_max")})


@dataclass(frozen=True)
class TopViewInstance:
    class_id: int
    class_name: str
    score: float
    range_m: float
    sector: int
    occupied_sectors: tuple[int, ...]
    feature_points: FeaturePoints

    def to_json(self) -> dict:
        return {
            "class": self.class_name,
            "class_id": self.class_id,
            "score": self.score,
            "range_m": self.range_m,
            "sector": self.sector,
            "occupied_sectors": list(self.occupied_sectors),
            "feature_points": self.feature_points.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TopViewInstance":
        return cls(
            class_id=int(obj["class_id"]),
            class_name=str(obj["class"]),
            score=float(obj["score"]),
            range_m=float(obj["range_m"]),
            sector=int(obj["sector"]),
            occupied_sectors=tuple(int(s) for s in obj["occupied_sectors"]),
            feature_points=FeaturePoints.from_json(obj["feature_points"]),
        )


@dataclass(frozen=True)
class TopViewScene:
    pose: Pose2D
    instances: tuple[TopViewInstance, ...]
    scanned_sectors: tuple[int, ...]
    headroom: float = DEFAULT_HEADROOM

    def to_json(self) -> dict:
        return {
            "pose": self.pose.to_json(),
            "headroom": self.headroom,
            "scanned_sectors": list(self.scanned_sectors),
            "instances": [inst.to_json() for inst in self.instances],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TopViewScene":
        return cls(
            pose=Pose2D.from_json(obj["pose"]),
            instances=tuple(TopViewInstance.from_json(o) for o in obj["instances"]),
            scanned_sectors=tuple(int(s) for s in obj["scanned_sectors"]),
            headroom=float(obj.get("headroom", DEFAULT_HEADROOM)),
        )


def to_ego(point, pose: Pose2D) -> EgoPoint:
    """Project a world point (x, y[, z]) into the pose's ego frame."""
    p = np.asarray(point, dtype=np.float64)
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    dx, dy = float(p[0]) - pose.x, float(p[1]) - pose.y
    return EgoPoint(dx * c + dy * s, -dx * s + dy * c)


def bearing_sector(point: "EgoPoint | tuple") -> int:
    """Sector of an ego point: round(atan2 bearing / 30 deg) mod 12.

    Sector 0 spans [-15, +15) degrees; indices grow counterclockwise.
    The zero vector has no bearing and is rejected.
    """
    if isinstance(point, EgoPoint):
        x_fwd, y_left = point.x_fwd, point.y_left
    else:
        x_fwd, y_left = float(point[0]), float(point[1])
    if x_fwd == 0.0 and y_left == 0.0:
        raise TopViewError("bearing undefined at origin")
    deg = math.degrees(math.atan2(y_left, x_fwd))
    return int(math.floor(deg / SECTOR_WIDTH_DEG + 0.5)) % SECTOR_COUNT


def _sectors_of(deg: np.ndarray) -> np.ndarray:
    return np.floor(deg / SECTOR_WIDTH_DEG + 0.5).astype(np.int64) % SECTOR_COUNT


def _walk_sectors(start: int, end: int) -> list[int]:
    """Sectors from start to end inclusive, counterclockwise."""
    span = (end - start) % SECTOR_COUNT
    return [(start + i) % SECTOR_COUNT for i in range(span + 1)]


def _span_sectors(bearings_deg: Sequence[float], closest_deg: float) -> list[int]:
    """Sectors covered by the shortest arc containing all bearings.

    When two arcs tie (a spread of exactly 180 degrees), the arc whose
    midpoint is nearer the closest point's bearing wins; a residual tie
    falls to the lower start sector.
    """
    b = np.asarray(sorted(bearings_deg), dtype=np.float64)
    if b.size == 1:
        s = _sectors_of(b)[0]
        return [int(s)]
    gaps = np.diff(np.concatenate([b, [b[0] + 360.0]]))
    best = gaps.max()
    candidates = np.flatnonzero(gaps >= best - 1e-9)

    def arc_key(i: int):
        # The arc runs ccw from the bearing after the gap to the one before it.
        start = b[(i + 1) % b.size]
        end = b[i]
        width = (end - start) % 360.0
        mid = (start + width / 2.0) % 360.0
        dist_to_closest = abs(math.remainder(mid - closest_deg, 360.0))
        start_sector = int(_sectors_of(np.array([start]))[0])
        return (dist_to_closest, start_sector)

    i = min(candidates, key=arc_key)
    start = b[(int(i) + 1) % b.size]
    end = b[int(i)]
    s0 = int(_sectors_of(np.array([start]))[0])
    s1 = int(_sectors_of(np.array([end]))[0])
    return _walk_sectors(s0, s1)


def build_topview(
    cloud: LabeledCloud,
    predictions: Sequence[InstancePrediction],
    pose: Pose2D,
    headroom: float = DEFAULT_HEADROOM,
) -> TopViewScene:
    """Project the scene into the pose's top view.

    One pass: the coordinate block is read once, every point contributes to
    scanned sectors (headroom points included), and per-instance feature
    points (closest + four world-axis extremes) are reduced from the same
    derived arrays. Instances whose points all sit above ``headroom`` are
    dropped. Each instance occupies the union of its feature-point sectors
    and the shortest angular span covering all five.
    """
    pts = np.asarray(cloud.points, dtype=np.float64)  # single coordinate fetch
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    dx, dy = x - pose.x, y - pose.y
    x_fwd = dx * c + dy * s
    y_left = -dx * s + dy * c
    ranges = np.hypot(x_fwd, y_left)
    deg = np.degrees(np.arctan2(y_left, x_fwd))
    sectors = _sectors_of(deg)

    at_origin = ranges <= 0.0
    scanned = tuple(int(v) for v in np.unique(sectors[~at_origin]))

    instances = []
    for pred in predictions:
        idx = np.asarray(pred.point_indices)
        below = idx[z[idx] <= headroom]
        if below.size == 0:
            continue
        rr = ranges[below]
        i_close = below[int(np.argmin(rr))]
        i_xmin = below[int(np.argmin(x[below]))]
        i_xmax = below[int(np.argmax(x[below]))]
        i_ymin = below[int(np.argmin(y[below]))]
        i_ymax = below[int(np.argmax(y[below]))]
        feature_idx = (i_close, i_xmin, i_xmax, i_ymin, i_ymax)
        fp = FeaturePoints(
            *(EgoPoint(float(x_fwd[i]), float(y_left[i])) for i in feature_idx)
        )
        range_m = float(ranges[i_close])
        if range_m <= 0.0:
            # An object on top of the observer blocks every direction.
            occupied = tuple(range(SECTOR_COUNT))
            sector = 0
        else:
            sector = int(sectors[i_close])
            fp_ok = [i for i in feature_idx if ranges[i] > 0.0]
            occ = {int(sectors[i]) for i in fp_ok}
            occ.update(
                _span_sectors([float(deg[i]) for i in fp_ok], float(deg[i_close]))
            )
            occupied = tuple(sorted(occ))
        instances.append(
            TopViewInstance(
                class_id=pred.class_id,
                class_name=cloud.class_table.names[pred.class_id],
                score=pred.score,
                range_m=range_m,
                sector=sector,
                occupied_sectors=occupied,
                feature_points=fp,
            )
        )
    return TopViewScene(
        pose=pose,
        instances=tuple(instances),
        scanned_sectors=scanned,
        headroom=float(headroom),
    )
