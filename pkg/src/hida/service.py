"""HTTP service exposing the scene pipeline to clients.

One session holds one preprocessed cloud plus its instance predictions.
Pose updates and queries run against that state under a per-session lock,
and everything that happens is appended to an event log that clients can
replay or follow over SSE.
"""

from __future__ import annotations

import asyncio
import json
import math
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import StreamingResponse

from hida.assist import AvoidanceQuery, FindQuery, avoid, find_object, narrate
from hida.cloudio import (
    CloudError,
    GroundTruthInstances,
    OracleConfig,
    SceneSpec,
    load_cloud,
    oracle_predict,
    synth_scene,
)
from hida.grouping import ClusterConfig, segment_instances
from hida.preprocess import PreprocessConfig, preprocess
from hida.topview import Pose2D, TopViewScene, build_topview

COLLISION_RANGE_M = 0.15

EVENT_KINDS = ("pose_update", "query", "answer", "collision")


def save_events(events: list[dict], path) -> None:
    """Write an event log as one JSON object per line."""
    text = "".join(json.dumps(e, separators=(",", ":")) + "\n" for e in events)
    Path(path).write_text(text)


def load_events(path) -> list[dict]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(json.loads(line))
    return out


def _pose_cache_key(pose: Pose2D) -> tuple[int, int, int]:
    # centimeter / whole-degree resolution; finer moves rebuild the view
    return (
        round(pose.x * 100.0),
        round(pose.y * 100.0),
        round(math.degrees(pose.heading)),
    )


@dataclass
class Session:
    id: str
    cloud: object
    predictions: list
    pose: Pose2D
    topview_cache: dict = field(default_factory=dict)
    events: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)
    _seq: int = 0

    def log(self, kind: str, payload: dict) -> dict:
        self._seq += 1
        event = {"seq": self._seq, "t": time.time(), "kind": kind, "payload": payload}
        self.events.append(event)
        return event

    def topview_at(self, pose: Pose2D) -> tuple[TopViewScene, bool, float]:
        """Return (scene, cache_hit, seconds)."""
        key = _pose_cache_key(pose)
        hit = key in self.topview_cache
        t0 = time.perf_counter()
        if not hit:
            self.topview_cache[key] = build_topview(self.cloud, self.predictions, pose)
        return self.topview_cache[key], hit, time.perf_counter() - t0


def _predictions_payload(predictions, class_table) -> list[dict]:
    return [
        {
            "class": class_table.names[p.class_id],
            "class_id": p.class_id,
            "score": p.score,
            "point_indices": [int(i) for i in p.point_indices],
        }
        for p in predictions
    ]


def create_app(ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="hida")
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()
    counter = {"n": 0}

    def get_session(sid: str) -> Session:
        session = sessions.get(sid)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session: {sid}")
        return session

    async def read_body(request: Request) -> dict:
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise HTTPException(status_code=400,
                                detail="request body is not valid JSON")
        if not isinstance(body, dict):
            raise HTTPException(status_code=400,
                                detail="request body must be a JSON object")
        return body

    def parse_stage(stage: str, fn):
        try:
            return fn()
        except (CloudError, KeyError, TypeError, ValueError, OSError) as e:
            raise HTTPException(status_code=400, detail=f"{stage}: {e}")

    @app.get("/")
    def root():
        from hida import __version__

        return {"service": "hida", "version": __version__}

    @app.post("/sessions")
    async def create_session(request: Request):
        body = await read_body(request)
        if ("scene" in body) == ("cloud_path" in body):
            raise HTTPException(
                status_code=400,
                detail="session needs exactly one of 'scene' or 'cloud_path'",
            )

        t0 = time.perf_counter()
        if "scene" in body:
            spec = parse_stage("scene", lambda: SceneSpec.from_json(body["scene"]))
            seed = int(body.get("synth_seed", 0))
            cloud, gt = parse_stage("scene", lambda: synth_scene(spec, seed=seed))
        else:
            cloud = parse_stage("cloud load", lambda: load_cloud(body["cloud_path"]))
            gt = None

        if body.get("oracle"):
            def apply_oracle():
                nonlocal gt
                cfg = OracleConfig(**body["oracle"])
                if gt is None:
                    gt = GroundTruthInstances.from_cloud(cloud)
                return oracle_predict(cloud, gt, cfg)

            cloud = parse_stage("oracle", apply_oracle)

        pre_cfg = body.get("preprocess")
        pre_seconds = 0.0
        if pre_cfg is not False:
            cfg = parse_stage(
                "preprocess", lambda: PreprocessConfig(**(pre_cfg or {}))
            )
            cloud, pre_report = parse_stage("preprocess",
                                            lambda: preprocess(cloud, cfg))
            pre_seconds = pre_report["seconds"]

        cl_cfg = parse_stage(
            "cluster", lambda: ClusterConfig(**(body.get("cluster") or {}))
        )
        t1 = time.perf_counter()
        predictions = parse_stage(
            "cluster", lambda: segment_instances(cloud, cl_cfg)
        )
        t2 = time.perf_counter()

        with registry_lock:
            counter["n"] += 1
            sid = f"s{counter['n']}"
        session = Session(id=sid, cloud=cloud, predictions=predictions,
                          pose=Pose2D(0.0, 0.0, 0.0))
        session.topview_at(session.pose)
        t3 = time.perf_counter()
        with registry_lock:
            sessions[sid] = session
        return {
            "id": sid,
            "n_points": cloud.n_points,
            "n_instances": len(predictions),
            "timing": {
                "pre": pre_seconds,
                "cl": t2 - t1,
                "det": t3 - t2,
                "total": t3 - t0,
            },
        }

    @app.get("/sessions/{sid}/instances")
    def instances(sid: str):
        session = get_session(sid)
        with session.lock:
            return {
                "classes": session.cloud.class_table.to_json(),
                "instances": _predictions_payload(
                    session.predictions, session.cloud.class_table
                ),
            }

    @app.post("/sessions/{sid}/pose")
    async def set_pose(sid: str, request: Request):
        session = get_session(sid)
        body = await read_body(request)
        pose = parse_stage(
            "pose",
            lambda: Pose2D(
                float(body["x"]), float(body["y"]), float(body["heading"])
            ),
        )
        with session.lock:
            session.pose = pose
            scene, cache_hit, seconds = session.topview_at(pose)
            session.log(
                "pose_update",
                {"x": pose.x, "y": pose.y, "heading": pose.heading,
                 "cache_hit": cache_hit},
            )
            collisions = []
            for inst in scene.instances:
                if inst.range_m <= COLLISION_RANGE_M:
                    payload = {
                        "class": inst.class_name,
                        "range": inst.range_m,
                        "sector": inst.sector,
                    }
                    session.log("collision", payload)
                    collisions.append(payload)
        return {
            "topview": scene.to_json(),
            "cache_hit": cache_hit,
            "seconds": seconds,
            "collisions": collisions,
        }

    @app.get("/sessions/{sid}/topview")
    def topview(sid: str):
        session = get_session(sid)
        with session.lock:
            scene, cache_hit, _ = session.topview_at(session.pose)
            return {"topview": scene.to_json(), "cache_hit": cache_hit}

    @app.post("/sessions/{sid}/query/avoid")
    async def query_avoid(sid: str, request: Request):
        session = get_session(sid)
        body = await read_body(request)
        query = parse_stage(
            "query", lambda: AvoidanceQuery(range_m=float(body["range"]))
        )
        style = str(body.get("style", "full"))
        with session.lock:
            scene, _, _ = session.topview_at(session.pose)
            answer = avoid(scene, query)
            lines = parse_stage("query", lambda: narrate(answer, style))
            payload = answer.to_json()
            payload["narration"] = lines
            session.log("query", {"type": "avoid", "range": query.range_m,
                                  "style": style})
            session.log("answer", payload)
        return payload

    @app.post("/sessions/{sid}/query/find")
    async def query_find(sid: str, request: Request):
        session = get_session(sid)
        body = await read_body(request)
        query = parse_stage(
            "query",
            lambda: FindQuery(
                class_name=str(body["class"]),
                corridor_halfwidth=int(body.get("corridor_halfwidth", 1)),
            ),
        )
        style = str(body.get("style", "full"))
        with session.lock:
            scene, _, _ = session.topview_at(session.pose)
            answer = find_object(scene, query)
            lines = parse_stage("query", lambda: narrate(answer, style))
            payload = answer.to_json()
            payload["narration"] = lines
            session.log("query", {"type": "find", "class": query.class_name,
                                  "corridor_halfwidth": query.corridor_halfwidth,
                                  "style": style})
            session.log("answer", payload)
        return payload

    @app.get("/sessions/{sid}/events")
    async def events(sid: str, follow: bool = False, after: int = 0):
        session = get_session(sid)

        def snapshot(since: int) -> list[dict]:
            with session.lock:
                return [e for e in session.events if e["seq"] > since]

        async def stream():
            last = after
            for event in snapshot(last):
                last = event["seq"]
                yield f"id: {event['seq']}\ndata: {json.dumps(event)}\n\n"
            while follow:
                fresh = snapshot(last)
                if not fresh:
                    await asyncio.sleep(0.05)
                    continue
                for event in fresh:
                    last = event["seq"]
                    yield f"id: {event['seq']}\ndata: {json.dumps(event)}\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
