"""Navigation-assist queries over a top-view scene, with spoken-style output.

Sector names follow the 12-sector wheel counterclockwise from dead ahead.
Distances in narration are rounded to 0.1 m. The narration templates are
fixed; given equal answers the emitted lines are byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from hida.topview import SECTOR_COUNT, TopViewInstance, TopViewScene

SECTOR_NAMES = (
    "directly forward",
    "forward-left",
    "left-forward",
    "directly left",
    "left-backward",
    "backward-left",
    "directly backward",
    "backward-right",
    "right-backward",
    "directly right",
    "right-forward",
    "forward-right",
)

NARRATION_STYLES = ("full", "brief")
_BRIEF_OBSTACLE_CAP = 3


class AssistError(ValueError):
    """Invalid assist query."""


@dataclass(frozen=True)
class AvoidanceQuery:
    range_m: float

    def __post_init__(self):
        if self.range_m <= 0:
            raise AssistError("query range must be > 0")


@dataclass(frozen=True)
class ObstacleNote:
    """One in-range obstacle as reported in an avoidance answer."""

    class_name: str
    range_m: float
    sector: int
    occupied_sectors: tuple[int, ...]

    def to_json(self) -> dict:
        return {
            "class": self.class_name,
            "range_m": self.range_m,
            "sector": self.sector,
            "occupied_sectors": list(self.occupied_sectors),
        }


@dataclass(frozen=True)
class AvoidanceAnswer:
    free_sectors: tuple[int, ...]
    suggested: tuple[int, ...]
    fallback_unscanned: tuple[int, ...]
    obstacles_in_range: tuple[ObstacleNote, ...]
    narration: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "free_sectors": list(self.free_sectors),
            "suggested": list(self.suggested),
            "fallback_unscanned": list(self.fallback_unscanned),
            "obstacles_in_range": [o.to_json() for o in self.obstacles_in_range],
            "narration": list(self.narration),
        }


@dataclass(frozen=True)
class FindQuery:
    class_name: str
    corridor_halfwidth: int = 1

    def __post_init__(self):
        if self.corridor_halfwidth < 0:
            raise AssistError("corridor_halfwidth must be >= 0")


@dataclass(frozen=True)
class FindTarget:
    class_name: str
    range_m: float
    sector: int
    score: float

    def to_json(self) -> dict:
        return {
            "class": self.class_name,
            "range_m": self.range_m,
            "sector": self.sector,
            "score": self.score,
        }


@dataclass(frozen=True)
class FindAnswer:
    found: bool
    class_name: str
    target: FindTarget | None
    alerts: tuple[FindTarget, ...]
    narration: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "found": self.found,
            "class": self.class_name,
            "target": None if self.target is None else self.target.to_json(),
            "alerts": [a.to_json() for a in self.alerts],
            "narration": list(self.narration),
        }


def _sector_distance_to_forward(sector: int) -> int:
    return min(sector % SECTOR_COUNT, SECTOR_COUNT - sector % SECTOR_COUNT)


def _circular_runs(members: set[int]) -> list[tuple[int, int]]:
    """Maximal circular runs of the member set as (start, length)."""
    if not members:
        return []
    if len(members) == SECTOR_COUNT:
        return [(0, SECTOR_COUNT)]
    runs = []
    for s in sorted(members):
        if (s - 1) % SECTOR_COUNT not in members:
            length = 1
            while (s + length) % SECTOR_COUNT in members:
                length += 1
            runs.append((s, length))
    return runs


def _run_center(start: int, length: int) -> int:
    if length == SECTOR_COUNT:
        return 0
    mids = [(start + (length - 1) // 2) % SECTOR_COUNT]
    if length % 2 == 0:
        mids.append((start + length // 2) % SECTOR_COUNT)
    return min(mids, key=lambda m: (_sector_distance_to_forward(m), m))


def _ranked_run_centers(members: set[int]) -> list[int]:
    runs = _circular_runs(members)
    ranked = sorted(
        runs,
        key=lambda r: (
            -r[1],
            _sector_distance_to_forward(_run_center(*r)),
            _run_center(*r),
        ),
    )
    return [_run_center(*r) for r in ranked]


def avoid(scene: TopViewScene, query: AvoidanceQuery) -> AvoidanceAnswer:
    """Free sectors and suggested headings within the queried range.

    Free sectors are scanned sectors not occupied by any instance whose
    closest point lies within range. Suggestions are the centers of maximal
    free runs, longest first, then nearest to forward. With no free sector,
    up to two unscanned-run centers are offered instead.
    """
    in_range = [i for i in scene.instances if i.range_m <= query.range_m]
    occupied: set[int] = set()
    for inst in in_range:
        occupied.update(inst.occupied_sectors)
    scanned = set(scene.scanned_sectors)
    free = scanned - occupied

    suggested = _ranked_run_centers(free)
    fallback: tuple[int, ...] = ()
    if not free:
        unscanned = set(range(SECTOR_COUNT)) - scanned
        fallback = tuple(_ranked_run_centers(unscanned)[:2])
        suggested = list(fallback)

    obstacles = tuple(
        ObstacleNote(
            class_name=i.class_name,
            range_m=i.range_m,
            sector=i.sector,
            occupied_sectors=i.occupied_sectors,
        )
        for i in sorted(in_range, key=lambda i: (i.range_m, i.class_name, i.sector))
    )
    answer = AvoidanceAnswer(
        free_sectors=tuple(sorted(free)),
        suggested=tuple(suggested),
        fallback_unscanned=fallback,
        obstacles_in_range=obstacles,
        narration=(),
    )
    return replace(answer, narration=tuple(narrate(answer)))


def find_object(scene: TopViewScene, query: FindQuery) -> FindAnswer:
    """Locate the nearest instance of a class, with corridor alerts.

    The target is the minimum-range instance of the class (ties: higher
    score, then lower sector index). Alerts list every other instance whose
    closest-point sector lies within ``corridor_halfwidth`` sectors of the
    target's and whose range is strictly smaller, nearest first.
    """
    candidates = [i for i in scene.instances if i.class_name == query.class_name]
    if not candidates:
        answer = FindAnswer(
            found=False, class_name=query.class_name, target=None, alerts=(), narration=()
        )
        return replace(answer, narration=tuple(narrate(answer)))
    best = min(candidates, key=lambda i: (i.range_m, -i.score, i.sector))
    target = FindTarget(
        class_name=best.class_name,
        range_m=best.range_m,
        sector=best.sector,
        score=best.score,
    )

    def sector_gap(a: int, b: int) -> int:
        d = abs(a - b) % SECTOR_COUNT
        return min(d, SECTOR_COUNT - d)

    alerts = tuple(
        FindTarget(
            class_name=i.class_name, range_m=i.range_m, sector=i.sector, score=i.score
        )
        for i in sorted(
            (
                i
                for i in scene.instances
                if i is not best
                and sector_gap(i.sector, best.sector) <= query.corridor_halfwidth
                and i.range_m < best.range_m
            ),
            key=lambda i: (i.range_m, i.class_name, i.sector),
        )
    )
    answer = FindAnswer(
        found=True, class_name=query.class_name, target=target, alerts=alerts, narration=()
    )
    return replace(answer, narration=tuple(narrate(answer)))


def _dist(value: float) -> str:
    return f"{value:.1f}"


def _obstacle_lines(rows: Sequence[str], style: str) -> list[str]:
    if style == "brief" and len(rows) > _BRIEF_OBSTACLE_CAP:
        extra = len(rows) - _BRIEF_OBSTACLE_CAP
        return list(rows[:_BRIEF_OBSTACLE_CAP]) + [f"and {extra} more obstacles"]
    return list(rows)


def narrate(answer: "AvoidanceAnswer | FindAnswer", style: str = "full") -> list[str]:
    """Deterministic narration lines for an answer."""
    if style not in NARRATION_STYLES:
        raise AssistError(f"style must be one of {NARRATION_STYLES}")
    if isinstance(answer, AvoidanceAnswer):
        lines: list[str] = []
        if answer.free_sectors:
            for s in answer.suggested:
                lines.append(f"Passable direction: {SECTOR_NAMES[s]}")
        elif answer.fallback_unscanned:
            lines.append("No passable direction in the scanned area")
            for s in answer.fallback_unscanned:
                lines.append(f"Unscanned direction suggested: {SECTOR_NAMES[s]}")
        else:
            lines.append("No passable direction found")
        obstacle_rows = [
            f"A {o.class_name}, distance {_dist(o.range_m)} meters, "
            f"direction in {SECTOR_NAMES[o.sector]}"
            for o in answer.obstacles_in_range
        ]
        return lines + _obstacle_lines(obstacle_rows, style)
    if isinstance(answer, FindAnswer):
        if not answer.found:
            return [f"No {answer.class_name} found in the scanned area"]
        t = answer.target
        lines = [
            f"Found a {t.class_name}, distance {_dist(t.range_m)} meters, "
            f"direction in {SECTOR_NAMES[t.sector]}"
        ]
        alert_rows = [
            f"Attention, a {a.class_name} in this direction, "
            f"distance {_dist(a.range_m)} meters"
            for a in answer.alerts
        ]
        return lines + _obstacle_lines(alert_rows, style)
    raise AssistError(f"cannot narrate {type(answer).__name__}")
