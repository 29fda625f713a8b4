"""HTTP service: sessions, pose updates, queries, events, persistence."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from hida.assist import AvoidanceQuery, FindQuery, avoid, find_object, narrate
from hida.cloudio import random_scene_spec, save_cloud, synth_scene
from hida.grouping import segment_instances
from hida.preprocess import PreprocessConfig, preprocess
from hida.service import create_app, load_events, save_events
from hida.topview import TopViewScene


@pytest.fixture()
def client():
    with TestClient(create_app()) as c:
        yield c


def scene_body(seed=7, **extra):
    spec = random_scene_spec(seed, n_instances=4, background_density=80.0)
    return {"scene": spec.to_json(), "synth_seed": seed, **extra}


def create(client, **extra):
    r = client.post("/sessions", json=scene_body(**extra))
    assert r.status_code == 200, r.text
    return r.json()


class TestRoot:
    def test_identity(self, client):
        r = client.get("/")
        assert r.status_code == 200
        body = r.json()
        assert body["service"] == "hida"
        assert "version" in body


class TestCreateSession:
    def test_synth_scene_session(self, client):
        body = create(client)
        assert body["id"] == "s1"
        assert set(body["timing"]) == {"pre", "cl", "det", "total"}
        assert body["n_instances"] >= 1
        assert body["timing"]["total"] > 0

    def test_instances_match_library(self, client):
        body = create(client)
        spec = random_scene_spec(7, n_instances=4, background_density=80.0)
        cloud, _ = synth_scene(spec, seed=7)
        filtered, _ = preprocess(cloud, PreprocessConfig())
        preds = segment_instances(filtered)
        assert body["n_points"] == filtered.n_points
        assert body["n_instances"] == len(preds)

        r = client.get(f"/sessions/{body['id']}/instances")
        got = r.json()["instances"]
        assert [p["point_indices"] for p in got] == [
            [int(i) for i in p.point_indices] for p in preds
        ]
        assert [p["score"] for p in got] == [p.score for p in preds]

    def test_cloud_path_session(self, client, tmp_path):
        spec = random_scene_spec(9, n_instances=3, background_density=80.0)
        cloud, _ = synth_scene(spec, seed=9)
        path = tmp_path / "scene.hlc1"
        save_cloud(cloud, path)
        r = client.post("/sessions", json={"cloud_path": str(path)})
        assert r.status_code == 200
        assert r.json()["n_instances"] >= 1

    def test_requires_exactly_one_source(self, client):
        r = client.post("/sessions", json={})
        assert r.status_code == 400
        assert "exactly one of" in r.json()["detail"]
        r = client.post(
            "/sessions", json={"cloud_path": "x.hlc1", **scene_body()}
        )
        assert r.status_code == 400

    def test_malformed_cloud_names_stage(self, client, tmp_path):
        bad = tmp_path / "bad.hlc1"
        bad.write_bytes(b"NOPE" + b"\x00" * 16)
        r = client.post("/sessions", json={"cloud_path": str(bad)})
        assert r.status_code == 400
        assert r.json()["detail"].startswith("cloud load:")

    def test_bad_oracle_config_names_stage(self, client):
        r = client.post(
            "/sessions", json=scene_body(oracle={"label_flip_rate": 2.0})
        )
        assert r.status_code == 400
        assert r.json()["detail"].startswith("oracle:")

    def test_oracle_noise_applies(self, client):
        body = create(client, oracle={"label_flip_rate": 0.05, "rng_seed": 3})
        assert body["n_instances"] >= 1

    def test_skip_preprocess(self, client):
        body = create(client, preprocess=False)
        spec = random_scene_spec(7, n_instances=4, background_density=80.0)
        cloud, _ = synth_scene(spec, seed=7)
        assert body["n_points"] == cloud.n_points
        assert body["timing"]["pre"] == 0.0

    def test_non_json_body(self, client):
        r = client.post("/sessions", content=b"not json{",
                        headers={"content-type": "application/json"})
        assert r.status_code == 400
        assert r.json()["detail"] == "request body is not valid JSON"
        r = client.post("/sessions", json=[1, 2])
        assert r.status_code == 400
        assert r.json()["detail"] == "request body must be a JSON object"

    def test_unknown_session_404(self, client):
        for path in (
            "/sessions/zz/instances",
            "/sessions/zz/topview",
            "/sessions/zz/events",
        ):
            r = client.get(path)
            assert r.status_code == 404
            assert r.json()["detail"] == "unknown session: zz"


class TestPoseAndTopview:
    def test_pose_cache_miss_then_hit(self, client):
        sid = create(client)["id"]
        r1 = client.post(f"/sessions/{sid}/pose",
                         json={"x": 3.0, "y": 2.0, "heading": 0.5})
        assert r1.status_code == 200
        assert r1.json()["cache_hit"] is False
        r2 = client.post(f"/sessions/{sid}/pose",
                         json={"x": 3.0, "y": 2.0, "heading": 0.5})
        assert r2.json()["cache_hit"] is True
        assert r2.json()["topview"] == r1.json()["topview"]

    def test_centimeter_quantization_hits_cache(self, client):
        sid = create(client)["id"]
        client.post(f"/sessions/{sid}/pose", json={"x": 1.0, "y": 1.0, "heading": 0.0})
        r = client.post(f"/sessions/{sid}/pose",
                        json={"x": 1.004, "y": 0.996, "heading": 0.0})
        assert r.json()["cache_hit"] is True
        r = client.post(f"/sessions/{sid}/pose",
                        json={"x": 1.02, "y": 1.0, "heading": 0.0})
        assert r.json()["cache_hit"] is False

    def test_far_pose_no_collision(self, client):
        sid = create(client)["id"]
        # default pose (0,0) sits at the room corner, margin keeps boxes away
        r = client.post(f"/sessions/{sid}/pose",
                        json={"x": 0.0, "y": 0.0, "heading": 0.0})
        assert r.json()["collisions"] == []

    def test_collision_when_on_top_of_instance(self, client):
        sid = create(client)["id"]
        tv = client.get(f"/sessions/{sid}/topview").json()["topview"]
        # pose (0,0,0): ego coordinates ARE world coordinates
        inst = tv["instances"][0]
        cp = inst["feature_points"]["closest"]
        r = client.post(
            f"/sessions/{sid}/pose",
            json={"x": cp["x_fwd"], "y": cp["y_left"], "heading": 0.0},
        )
        collisions = r.json()["collisions"]
        assert any(c["class"] == inst["class"] for c in collisions)
        assert all(c["range"] <= 0.15 for c in collisions)

    def test_missing_pose_field(self, client):
        sid = create(client)["id"]
        r = client.post(f"/sessions/{sid}/pose", json={"x": 1.0, "y": 2.0})
        assert r.status_code == 400
        assert r.json()["detail"].startswith("pose:")


class TestQueries:
    def test_avoid_matches_library(self, client):
        sid = create(client)["id"]
        client.post(f"/sessions/{sid}/pose", json={"x": 3.0, "y": 3.0, "heading": 0.2})
        got = client.post(f"/sessions/{sid}/query/avoid", json={"range": 2.5}).json()
        tv = client.get(f"/sessions/{sid}/topview").json()["topview"]
        scene = TopViewScene.from_json(tv)
        want = avoid(scene, AvoidanceQuery(2.5)).to_json()
        want["narration"] = narrate(avoid(scene, AvoidanceQuery(2.5)), "full")
        assert json.dumps(got, sort_keys=True) == json.dumps(want, sort_keys=True)

    def test_find_matches_library(self, client):
        sid = create(client)["id"]
        client.post(f"/sessions/{sid}/pose", json={"x": 3.0, "y": 3.0, "heading": 0.0})
        tv = client.get(f"/sessions/{sid}/topview").json()["topview"]
        scene = TopViewScene.from_json(tv)
        present = scene.instances[0].class_name
        got = client.post(
            f"/sessions/{sid}/query/find", json={"class": present}
        ).json()
        answer = find_object(scene, FindQuery(present))
        want = answer.to_json()
        want["narration"] = narrate(answer, "full")
        assert json.dumps(got, sort_keys=True) == json.dumps(want, sort_keys=True)

    def test_find_absent_class_is_not_an_error(self, client):
        sid = create(client)["id"]
        r = client.post(f"/sessions/{sid}/query/find", json={"class": "door"})
        assert r.status_code == 200
        body = r.json()
        assert body["found"] is False
        assert body["narration"] == ["No door found in the scanned area"]

    def test_brief_style(self, client):
        sid = create(client)["id"]
        r = client.post(f"/sessions/{sid}/query/avoid",
                        json={"range": 10.0, "style": "brief"})
        assert r.status_code == 200

    def test_invalid_range(self, client):
        sid = create(client)["id"]
        r = client.post(f"/sessions/{sid}/query/avoid", json={"range": 0.0})
        assert r.status_code == 400
        assert r.json()["detail"] == "query: query range must be > 0"

    def test_invalid_style(self, client):
        sid = create(client)["id"]
        r = client.post(f"/sessions/{sid}/query/avoid",
                        json={"range": 1.0, "style": "operatic"})
        assert r.status_code == 400
        assert r.json()["detail"].startswith("query:")


class TestEvents:
    def parse_sse(self, text):
        events = []
        for block in text.strip().split("\n\n"):
            lines = block.splitlines()
            assert lines[0].startswith("id: ")
            assert lines[1].startswith("data: ")
            events.append(json.loads(lines[1][len("data: "):]))
        return events

    def test_event_stream_replay(self, client):
        sid = create(client)["id"]
        client.post(f"/sessions/{sid}/pose", json={"x": 1.0, "y": 1.0, "heading": 0.0})
        client.post(f"/sessions/{sid}/query/avoid", json={"range": 2.0})
        client.post(f"/sessions/{sid}/query/find", json={"class": "chair"})
        r = client.get(f"/sessions/{sid}/events")
        assert r.headers["content-type"].startswith("text/event-stream")
        events = self.parse_sse(r.text)
        kinds = [e["kind"] for e in events]
        assert kinds == ["pose_update", "query", "answer", "query", "answer"]
        seqs = [e["seq"] for e in events]
        assert seqs == sorted(seqs)
        times = [e["t"] for e in events]
        assert all(a <= b for a, b in zip(times, times[1:]))

    def test_after_filter(self, client):
        sid = create(client)["id"]
        client.post(f"/sessions/{sid}/pose", json={"x": 1.0, "y": 1.0, "heading": 0.0})
        client.post(f"/sessions/{sid}/query/avoid", json={"range": 2.0})
        all_events = self.parse_sse(client.get(f"/sessions/{sid}/events").text)
        later = self.parse_sse(
            client.get(f"/sessions/{sid}/events", params={"after": 1}).text
        )
        assert [e["seq"] for e in later] == [e["seq"] for e in all_events if e["seq"] > 1]

    def test_save_and_load_round_trip(self, client, tmp_path):
        events = [
            {"seq": 1, "t": 123.5, "kind": "pose_update", "payload": {"x": 1}},
            {"seq": 2, "t": 124.0, "kind": "collision", "payload": {"class": "chair"}},
        ]
        path = tmp_path / "events.jsonl"
        save_events(events, path)
        assert load_events(path) == events
        assert len(path.read_text().splitlines()) == 2


class TestIsolation:
    def test_two_sessions_do_not_share_state(self, client):
        a = create(client, synth_seed=7)
        b = client.post("/sessions", json=scene_body(seed=13)).json()
        assert a["id"] != b["id"]

        client.post(f"/sessions/{a['id']}/pose",
                    json={"x": 2.0, "y": 2.0, "heading": 0.0})
        ra = client.get(f"/sessions/{a['id']}/instances").json()
        rb = client.get(f"/sessions/{b['id']}/instances").json()
        assert ra["instances"] != rb["instances"] or a["n_points"] != b["n_points"]

        ev_b = client.get(f"/sessions/{b['id']}/events").text.strip()
        assert ev_b == ""  # pose update on A never leaks into B

    def test_interleaved_queries_stay_consistent(self, client):
        a = create(client, synth_seed=7)["id"]
        b = create(client, synth_seed=7)["id"]
        client.post(f"/sessions/{a}/pose", json={"x": 1.0, "y": 1.0, "heading": 0.0})
        client.post(f"/sessions/{b}/pose", json={"x": 4.0, "y": 4.0, "heading": 1.0})
        qa = client.post(f"/sessions/{a}/query/avoid", json={"range": 2.0}).json()
        qb = client.post(f"/sessions/{b}/query/avoid", json={"range": 2.0}).json()
        # same scene, different poses: answers are computed per session
        ta = client.get(f"/sessions/{a}/topview").json()["topview"]
        sa = TopViewScene.from_json(ta)
        want = avoid(sa, AvoidanceQuery(2.0)).to_json()
        want["narration"] = narrate(avoid(sa, AvoidanceQuery(2.0)), "full")
        assert json.dumps(qa, sort_keys=True) == json.dumps(want, sort_keys=True)
        assert qa != qb
