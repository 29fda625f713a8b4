"""Report rendering: delimited tables and figure files for CLI report paths."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

from hida.topview import SECTOR_COUNT, TopViewScene

_BENCH_COLUMNS = ("scene", "points_in", "points_after_pre", "total_s", "pre_s", "cl_s", "det_s")


def bench_to_csv(report: dict) -> str:
    """Flatten a bench report into CSV with one row per scene plus averages."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_BENCH_COLUMNS)
    for row in report["scenes"]:
        sec = row["seconds"]
        w.writerow(
            [
                row["scene"],
                row["points_in"],
                row["points_after_pre"],
                f"{sec['total']:.6f}",
                f"{sec['pre']:.6f}",
                f"{sec['cl']:.6f}",
                f"{sec['det']:.6f}",
            ]
        )
    avg = report["averages"]
    sec = avg["seconds"]
    w.writerow(
        [
            "average",
            f"{avg['points_in']:.1f}",
            f"{avg['points_after_pre']:.1f}",
            f"{sec['total']:.6f}",
            f"{sec['pre']:.6f}",
            f"{sec['cl']:.6f}",
            f"{sec['det']:.6f}",
        ]
    )
    return buf.getvalue()


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_bench_figure(report: dict, path) -> None:
    """Stacked per-scene stage timings with the average alongside."""
    plt = _pyplot()
    rows = report["scenes"]
    labels = [str(r["scene"]) for r in rows] + ["avg"]
    stages = ("pre", "cl", "det")
    series = {
        st: [r["seconds"][st] for r in rows] + [report["averages"]["seconds"][st]]
        for st in stages
    }
    fig, ax = plt.subplots(figsize=(7, 4))
    bottom = [0.0] * len(labels)
    for st in stages:
        ax.bar(labels, series[st], bottom=bottom, label=st)
        bottom = [b + v for b, v in zip(bottom, series[st])]
    ax.set_xlabel("scene")
    ax.set_ylabel("seconds")
    ax.set_title("pipeline stage timings")
    ax.legend()
    fig.tight_layout()
    fig.savefig(Path(path), dpi=110)
    plt.close(fig)


def render_topview_figure(scene: TopViewScene, path, max_range: float | None = None) -> None:
    """Draw the sector wheel with instance markers and occupied shading.

    Forward is up. Scanned sectors get a light fill, unscanned sectors a
    hatch, occupied sectors of each instance a stronger tint, and the five
    feature points of every instance are drawn with the closest one marked.
    """
    plt = _pyplot()
    from matplotlib.patches import Wedge

    if max_range is None:
        reach = [fp.range for inst in scene.instances for fp in inst.feature_points.all()]
        max_range = max(reach, default=2.0) * 1.2 + 0.5

    fig, ax = plt.subplots(figsize=(6, 6))
    scanned = set(scene.scanned_sectors)
    occupied: set[int] = set()
    for inst in scene.instances:
        occupied.update(inst.occupied_sectors)

    def wedge(sector: int, color: str, alpha: float, hatch: str | None = None):
        # Sector s spans [30*s - 15, 30*s + 15) degrees of bearing; with
        # forward plotted up, bearing b maps to canvas angle b + 90.
        theta1 = sector * 30.0 - 15.0 + 90.0
        ax.add_patch(
            Wedge(
                (0, 0),
                max_range,
                theta1,
                theta1 + 30.0,
                facecolor=color,
                alpha=alpha,
                hatch=hatch,
                edgecolor="gray",
                linewidth=0.4,
            )
        )

    for s in range(SECTOR_COUNT):
        if s in scanned:
            wedge(s, "#9ecae1" if s in occupied else "#e5f5e0", 0.5)
        else:
            wedge(s, "#f0f0f0", 0.6, hatch="//")

    for inst in scene.instances:
        pts = inst.feature_points.all()
        xs = [-p.y_left for p in pts]
        ys = [p.x_fwd for p in pts]
        ax.plot(xs, ys, "o", markersize=4)
        ax.plot(xs[0], ys[0], "r*", markersize=10)
        ax.annotate(
            f"{inst.class_name} {inst.range_m:.1f}m",
            (xs[0], ys[0]),
            fontsize=8,
            xytext=(3, 3),
            textcoords="offset points",
        )
    ax.plot(0, 0, "k^", markersize=12)
    ax.set_xlim(-max_range, max_range)
    ax.set_ylim(-max_range, max_range)
    ax.set_aspect("equal")
    ax.set_title("top view (forward is up)")
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(Path(path), dpi=110)
    plt.close(fig)
