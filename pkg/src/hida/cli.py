"""Command-line interface.

Exit codes: 0 success, 1 usage errors, 2 data errors. All randomized
commands take --seed; identical inputs and seeds reproduce identical output
files (stage reports additionally carry wall-clock fields).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from hida.assist import (
    AssistError,
    AvoidanceQuery,
    FindQuery,
    avoid,
    find_object,
    narrate,
)
from hida.cloudio import (
    CloudError,
    GroundTruthInstances,
    LabeledCloud,
    OracleConfig,
    SceneSpec,
    load_cloud,
    oracle_predict,
    random_scene_spec,
    save_cloud,
    synth_scene,
)
from hida.evalmetrics import EmptyGroundTruthError, evaluate
from hida.grouping import (
    ClusterConfig,
    GroupingError,
    InstancePrediction,
    segment_instances,
)
from hida.preprocess import PreprocessConfig, PreprocessError, preprocess
from hida.topview import Pose2D, TopViewError, TopViewScene, build_topview

_DATA_ERRORS = (
    CloudError,
    PreprocessError,
    GroupingError,
    EmptyGroundTruthError,
    TopViewError,
    AssistError,
    OSError,
    json.JSONDecodeError,
    KeyError,
    ValueError,
)

_DEFAULT_BENCH_SIZES = (800_000, 270_000, 170_000, 260_000)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _write_json(obj, path) -> None:
    Path(path).write_text(_dump_json(obj))


def _print_json(obj) -> None:
    sys.stdout.write(_dump_json(obj))


def predictions_to_json(predictions, class_table) -> list[dict]:
    return [
        {
            "class": class_table.names[p.class_id],
            "class_id": p.class_id,
            "score": p.score,
            "point_indices": [int(i) for i in p.point_indices],
        }
        for p in predictions
    ]


def predictions_from_json(rows, class_table) -> list[InstancePrediction]:
    out = []
    for row in rows:
        class_id = (
            int(row["class_id"])
            if "class_id" in row
            else class_table.id_of(str(row["class"]))
        )
        out.append(
            InstancePrediction(
                point_indices=np.asarray(row["point_indices"], dtype=np.int64),
                class_id=class_id,
                score=float(row["score"]),
            )
        )
    return out


def _parse_pose(text: str) -> Pose2D:
    parts = text.split(",")
    if len(parts) != 3:
        raise CloudError(f"pose must be x,y,heading (radians), got {text!r}")
    return Pose2D(float(parts[0]), float(parts[1]), float(parts[2]))


# ---------------------------------------------------------------------------
# subcommands


def _cmd_convert(args) -> int:
    cloud = load_cloud(args.input)
    out = Path(args.output)
    if out.suffix.lower() == ".ply" and (
        cloud.offsets is not None or cloud.instance_ids is not None
    ):
        print("note: PLY keeps geometry/colors/labels only", file=sys.stderr)
    save_cloud(cloud, out)
    return 0


def _cmd_synth(args) -> int:
    spec = SceneSpec.from_json(json.loads(Path(args.spec).read_text()))
    cloud, gt = synth_scene(spec, seed=args.seed)
    if args.flip_rate > 0 or args.offset_sigma > 0:
        cloud = oracle_predict(
            cloud,
            gt,
            OracleConfig(
                label_flip_rate=args.flip_rate,
                offset_noise_sigma=args.offset_sigma,
                rng_seed=args.noise_seed,
            ),
        )
    save_cloud(cloud, args.out)
    _print_json({"points": cloud.n_points, "instances": gt.n_instances})
    return 0


def _cmd_preprocess(args) -> int:
    cloud = load_cloud(args.input)
    cfg = PreprocessConfig(
        max_points=args.max_points,
        outlier_k=args.outlier_k,
        outlier_sigma=args.outlier_sigma,
    )
    filtered, report = preprocess(cloud, cfg)
    save_cloud(filtered, args.output)
    _print_json(report)
    return 0


def _cmd_segment(args) -> int:
    cloud = load_cloud(args.input)
    cfg = ClusterConfig(
        radius=args.radius,
        min_points=args.min_points,
        nms_iou=args.nms_iou,
        score_mode=args.score_mode,
    )
    t0 = time.perf_counter()
    pre_seconds = 0.0
    if args.preprocess:
        cloud, pre_report = preprocess(cloud, PreprocessConfig())
        pre_seconds = pre_report["seconds"]
    t1 = time.perf_counter()
    predictions = segment_instances(cloud, cfg, voxel_size=args.voxel_size)
    t2 = time.perf_counter()
    _write_json(predictions_to_json(predictions, cloud.class_table), args.out)
    _print_json({"pre": pre_seconds, "cl": t2 - t1, "total": t2 - t0})
    return 0


def _cmd_eval(args) -> int:
    gt_cloud = load_cloud(args.gt)
    gt = GroundTruthInstances.from_cloud(gt_cloud)
    predictions = predictions_from_json(
        json.loads(Path(args.pred).read_text()), gt_cloud.class_table
    )
    for p in predictions:
        if p.size and int(p.point_indices.max()) >= gt_cloud.n_points:
            raise CloudError("prediction indices exceed ground-truth cloud size")
    result = evaluate(predictions, gt, gt_cloud.class_table)
    payload = result.to_json(gt_cloud.class_table)
    _write_json(payload, args.out)
    _print_json({"map": result.map, "ap50": result.ap50, "ap25": result.ap25})
    return 0


def _cmd_topview(args) -> int:
    cloud = load_cloud(args.cloud)
    predictions = predictions_from_json(
        json.loads(Path(args.pred).read_text()), cloud.class_table
    )
    scene = build_topview(
        cloud, predictions, _parse_pose(args.pose), headroom=args.headroom
    )
    _write_json(scene.to_json(), args.out)
    if args.render:
        from hida.report import render_topview_figure

        render_topview_figure(scene, args.render)
    return 0


def _cmd_query_avoid(args) -> int:
    scene = TopViewScene.from_json(json.loads(Path(args.topview).read_text()))
    answer = avoid(scene, AvoidanceQuery(range_m=args.range))
    lines = narrate(answer, args.style)
    if args.out:
        payload = answer.to_json()
        payload["narration"] = lines
        _write_json(payload, args.out)
    for line in lines:
        print(line)
    return 0


def _cmd_query_find(args) -> int:
    scene = TopViewScene.from_json(json.loads(Path(args.topview).read_text()))
    answer = find_object(
        scene,
        FindQuery(class_name=args.class_name, corridor_halfwidth=args.corridor_halfwidth),
    )
    lines = narrate(answer, args.style)
    if args.out:
        payload = answer.to_json()
        payload["narration"] = lines
        _write_json(payload, args.out)
    for line in lines:
        print(line)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from hida.service import create_app

    app = create_app(ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def run_bench(
    scenes: int = 4,
    seed: int = 0,
    sizes=_DEFAULT_BENCH_SIZES,
    preprocess_cfg: PreprocessConfig = PreprocessConfig(),
    cluster_cfg: ClusterConfig = ClusterConfig(),
) -> dict:
    """Time the pipeline over synthetic scenes and build the bench report."""
    rows = []
    for i in range(scenes):
        target = int(sizes[i % len(sizes)])
        # keep instances at least as locally dense as the background after
        # the point budget, or the outlier filter strips them
        density = 40_000.0 * max(1.0, target / 200_000.0)
        spec = random_scene_spec(
            seed + i, target_points=target, instance_density=density
        )
        cloud, _gt = synth_scene(spec, seed=seed + i)
        t0 = time.perf_counter()
        filtered, pre_report = preprocess(cloud, preprocess_cfg)
        t1 = time.perf_counter()
        predictions = segment_instances(
            filtered, cluster_cfg, voxel_size=preprocess_cfg.voxel_size
        )
        t2 = time.perf_counter()
        build_topview(filtered, predictions, Pose2D(0.0, 0.0, 0.0))
        t3 = time.perf_counter()
        rows.append(
            {
                "scene": i,
                "points_in": cloud.n_points,
                "points_after_pre": filtered.n_points,
                "seconds": {
                    "total": t3 - t0,
                    "pre": t1 - t0,
                    "cl": t2 - t1,
                    "det": t3 - t2,
                },
            }
        )
    stage_avg = {
        st: float(np.mean([r["seconds"][st] for r in rows]))
        for st in ("total", "pre", "cl", "det")
    }
    return {
        "scenes": rows,
        "averages": {
            "points_in": float(np.mean([r["points_in"] for r in rows])),
            "points_after_pre": float(np.mean([r["points_after_pre"] for r in rows])),
            "seconds": stage_avg,
        },
    }


def _cmd_bench(args) -> int:
    sizes = (
        tuple(int(s) for s in args.sizes.split(","))
        if args.sizes
        else _DEFAULT_BENCH_SIZES
    )
    report = run_bench(scenes=args.scenes, seed=args.seed, sizes=sizes)
    _print_json(report)
    if args.out_dir:
        from hida.report import bench_to_csv, render_bench_figure

        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(report, out / "bench.json")
        (out / "bench.csv").write_text(bench_to_csv(report))
        render_bench_figure(report, out / "bench_times.png")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hida", description=__doc__)
    sub = p.add_subparsers(dest="command")

    c = sub.add_parser("convert", help="convert between PLY and the internal binary")
    c.add_argument("input")
    c.add_argument("output")
    c.set_defaults(func=_cmd_convert)

    c = sub.add_parser("synth", help="sample a synthetic scene from a JSON spec")
    c.add_argument("--spec", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--flip-rate", type=float, default=0.0)
    c.add_argument("--offset-sigma", type=float, default=0.0)
    c.add_argument("--noise-seed", type=int, default=0)
    c.set_defaults(func=_cmd_synth)

    c = sub.add_parser("preprocess", help="downsample and drop statistical outliers")
    c.add_argument("input")
    c.add_argument("output")
    c.add_argument("--max-points", type=int, default=200_000)
    c.add_argument("--outlier-k", type=int, default=16)
    c.add_argument("--outlier-sigma", type=float, default=2.0)
    c.set_defaults(func=_cmd_preprocess)

    c = sub.add_parser("segment", help="group labeled points into instances")
    c.add_argument("input")
    c.add_argument("--out", required=True)
    c.add_argument("--radius", type=float, default=0.03)
    c.add_argument("--min-points", type=int, default=50)
    c.add_argument("--nms-iou", type=float, default=0.3)
    c.add_argument("--score-mode", default="centroid-compactness",
                   choices=("centroid-compactness", "size-normalized"))
    c.add_argument("--voxel-size", type=float, default=0.02)
    c.add_argument("--preprocess", action="store_true",
                   help="run the preprocessing stage first (indices then refer "
                        "to the preprocessed cloud)")
    c.set_defaults(func=_cmd_segment)

    c = sub.add_parser("eval", help="score predictions against ground truth")
    c.add_argument("--pred", required=True)
    c.add_argument("--gt", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=_cmd_eval)

    c = sub.add_parser("topview", help="project instances into a pose's top view")
    c.add_argument("--cloud", required=True)
    c.add_argument("--pred", required=True)
    c.add_argument("--pose", required=True, help="x,y,heading (radians)")
    c.add_argument("--headroom", type=float, default=2.2)
    c.add_argument("--out", required=True)
    c.add_argument("--render", help="also draw the sector map to this PNG")
    c.set_defaults(func=_cmd_topview)

    c = sub.add_parser("query", help="navigation-assist queries on a top view")
    qsub = c.add_subparsers(dest="query_command")
    qa = qsub.add_parser("avoid", help="free and suggested sectors within range")
    qa.add_argument("--topview", required=True)
    qa.add_argument("--range", type=float, required=True)
    qa.add_argument("--style", choices=("full", "brief"), default="full")
    qa.add_argument("--out")
    qa.set_defaults(func=_cmd_query_avoid)
    qf = qsub.add_parser("find", help="locate the nearest instance of a class")
    qf.add_argument("--topview", required=True)
    qf.add_argument("--class", dest="class_name", required=True)
    qf.add_argument("--corridor-halfwidth", type=int, default=1)
    qf.add_argument("--style", choices=("full", "brief"), default="full")
    qf.add_argument("--out")
    qf.set_defaults(func=_cmd_query_find)

    c = sub.add_parser("serve", help="run the HTTP service")
    c.add_argument("--port", type=int, default=8000)
    c.add_argument("--host", default="127.0.0.1")
    c.add_argument("--ui-dir", default="frontend/dist")
    c.set_defaults(func=_cmd_serve)

    c = sub.add_parser("bench", help="time the pipeline over synthetic scenes")
    c.add_argument("--scenes", type=int, default=4)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--sizes", help="comma-separated input point counts")
    c.add_argument("--out-dir", help="write bench.json, bench.csv, and figures here")
    c.set_defaults(func=_cmd_bench)

    return p


def run(argv=None) -> int:
    """Entry point returning an exit code (0 ok, 1 usage, 2 data error)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except _DATA_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def console_main() -> None:
    raise SystemExit(run())
