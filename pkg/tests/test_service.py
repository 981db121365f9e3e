import struct

import numpy as np
import pytest
from fastapi.testclient import TestClient

from trusim.probe import ProbePose, ProbeRig, clamp_pose, image_plane, needle_ray
from trusim.reslice import project_to_plane
from trusim.service import FRAME_HEADER, create_app
from trusim.store import params_to_record
from trusim.volume import PhantomParams

SMALL_PARAMS = PhantomParams(
    volume_extent=(40.0, 40.0, 40.0),
    spacing=0.5,
    gland_semi_axes=(10.0, 9.0, 11.0),
    gland_center=(20.0, 20.0, 20.0),
)

# rig scaled down to the small phantom: pivot on the entry face aiming at the gland
SMALL_RIG = ProbeRig(pivot=(20.0, 5.0, 0.0), rest_axis=(0.0, 0.6, 0.8), image_extent=(30.0, 35.0))

RES = (48, 48)


@pytest.fixture()
def client(tmp_path):
    app = create_app(tmp_path / "store", rig=SMALL_RIG)
    with TestClient(app) as c:
        yield c


@pytest.fixture()
def session(client):
    op = client.post("/operators", json={"name": "ada", "level": "novice"}).json()["id"]
    ph = client.post("/phantoms", json={"seed": 5, "params": params_to_record(SMALL_PARAMS)}).json()["id"]
    sid = client.post("/sessions", json={"operator_id": op, "phantom_id": ph}).json()["id"]
    return {"operator": op, "phantom": ph, "session": sid}


def recv_frame(ws):
    meta = ws.receive_json()
    payload = ws.receive_bytes()
    seq, code, w, h = FRAME_HEADER.unpack(payload[: FRAME_HEADER.size])
    assert (meta["frame_seq"], meta["w"], meta["h"]) == (seq, w, h)
    return meta, payload[FRAME_HEADER.size :]


def subscribe(ws, views=("probe",), resolution=RES):
    ws.send_json({"type": "subscribe", "views": list(views), "resolution": list(resolution)})
    return [recv_frame(ws) for _ in views]


class TestLifecycle:
    def test_create_operator(self, client):
        r = client.post("/operators", json={"name": "bob", "level": "expert"})
        assert r.status_code == 201
        op = client.get(f"/operators/{r.json()['id']}")
        assert op.status_code == 200 and op.json()["name"] == "bob"

    def test_malformed_body_is_400(self, client):
        assert client.post("/operators", json={"level": "novice"}).status_code == 400

    def test_unknown_ids_are_404(self, client):
        assert client.get("/operators/77").status_code == 404
        assert client.get("/sessions/77").status_code == 404
        assert client.post("/sessions", json={"operator_id": 1, "phantom_id": 1}).status_code == 404

    def test_list_phantoms(self, client):
        client.post("/phantoms", json={"seed": 1, "params": params_to_record(SMALL_PARAMS)})
        client.post("/phantoms", json={"seed": 2, "params": params_to_record(SMALL_PARAMS)})
        listing = client.get("/phantoms").json()
        assert len(listing) == 2
        assert {p["seed"] for p in listing} == {1, 2}


class TestStream:
    def test_identical_poses_same_payload_increasing_seq(self, client, session):
        sid = session["session"]
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            subscribe(ws)
            pose = {"type": "set_pose", "pitch": 0.1, "yaw": -0.05, "roll": 0.2, "insertion": 20.0}
            ws.send_json(pose)
            m1, p1 = recv_frame(ws)
            ws.send_json(pose)
            m2, p2 = recv_frame(ws)
        assert p1 == p2
        assert m2["frame_seq"] == m1["frame_seq"] + 1

    def test_clamped_pose_reported(self, client, session):
        sid = session["session"]
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            subscribe(ws)
            ws.send_json({"type": "set_pose", "pitch": 5.0, "insertion": 20.0})
            meta, _ = recv_frame(ws)
        assert meta["pose"]["pitch"] == SMALL_RIG.pitch_max

    def test_burst_coalesces_to_final_pose(self, client, tmp_path, session):
        sid = session["session"]
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            subscribe(ws)
            for i in range(100):
                ws.send_json({"type": "set_pose", "pitch": 0.005 * i, "insertion": 0.3 * i})
            frames = [recv_frame(ws) for _ in range(100)]
        final_meta, final_pixels = frames[-1]
        # isolated render of the 100th pose on a fresh service over the same store
        app2 = create_app(tmp_path / "store", rig=SMALL_RIG)
        with TestClient(app2) as c2:
            with c2.websocket_connect(f"/sessions/{sid}/stream") as ws2:
                ws2.send_json({"type": "subscribe", "views": ["probe"], "resolution": list(RES)})
                recv_frame(ws2)
                ws2.send_json({"type": "set_pose", "pitch": 0.005 * 99, "insertion": 0.3 * 99})
                iso_meta, iso_pixels = recv_frame(ws2)
        assert final_pixels == iso_pixels
        assert final_meta["pose"] == iso_meta["pose"]

    def test_unknown_session_terminal_error(self, client):
        with client.websocket_connect("/sessions/999/stream") as ws:
            msg = ws.receive_json()
        assert msg["type"] == "error"

    def test_view_codes_and_payload_size(self, client, session):
        sid = session["session"]
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            frames = subscribe(ws, views=("probe", "axial", "sagittal", "coronal"))
        for (meta, pixels), expected_view in zip(frames, ("probe", "axial", "sagittal", "coronal")):
            assert meta["view"] == expected_view
            assert len(pixels) == RES[0] * RES[1]


class TestFire:
    def test_fire_appends_and_stats(self, client, session):
        sid = session["session"]
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            subscribe(ws)
            ws.send_json({"type": "set_pose", "insertion": 10.0})
            recv_frame(ws)
        before = client.get(f"/sessions/{sid}/stats").json()["n_cores"]
        r = client.post(f"/sessions/{sid}/fire", json={"needle_depth": 15.0})
        assert r.status_code == 200
        assert r.json()["id"] == 1
        after = client.get(f"/sessions/{sid}/stats").json()["n_cores"]
        assert after == before + 1

    def test_fire_closed_session_409(self, client, session):
        sid = session["session"]
        client.post(f"/sessions/{sid}/close")
        assert client.post(f"/sessions/{sid}/fire", json={"needle_depth": 5.0}).status_code == 409

    def test_fire_depth_422(self, client, session):
        sid = session["session"]
        assert client.post(f"/sessions/{sid}/fire", json={"needle_depth": 1e5}).status_code == 422

    def test_marker_persists_through_reconnect(self, client, session):
        sid = session["session"]
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            subscribe(ws)
            ws.send_json({"type": "set_pose", "insertion": 12.0})
            recv_frame(ws)
        client.post(f"/sessions/{sid}/fire", json={"needle_depth": 15.0})
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            (meta, _), = subscribe(ws)
        styles = [o["style"] for o in meta["overlays"]]
        assert "recorded" in styles


class TestOverlays:
    def test_needle_line_matches_geometry(self, client, session):
        sid = session["session"]
        pose = ProbePose(pitch=0.1, yaw=0.0, roll=0.3, insertion=14.0)
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            subscribe(ws)
            ws.send_json({"type": "set_pose", "pitch": pose.pitch, "roll": pose.roll, "insertion": pose.insertion})
            meta, _ = recv_frame(ws)
        needle = [o for o in meta["overlays"] if o["style"] == "needle"]
        assert needle and needle[0]["kind"] == "line"
        plane = image_plane(SMALL_RIG, pose)
        ray = needle_ray(SMALL_RIG, pose)
        for (s, t) in needle[0]["points"]:
            p_world = plane.point_at(s, t)
            # the drawn endpoints lie on the needle line within a pixel
            d = np.linalg.norm(np.cross(p_world - ray.origin, ray.direction))
            assert d < max(plane.extent) / RES[0]

    def test_hint_levels(self, client, session):
        sid = session["session"]
        target = [20.0, 20.0, 20.0]
        client.post(f"/sessions/{sid}/exercise", json={"kind": "target_hit", "hint_level": 0, "target_center": target})
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            (meta0, _), = subscribe(ws)
        assert all(o["style"] != "target" for o in meta0["overlays"])

        client.post(f"/sessions/{sid}/exercise", json={"kind": "target_hit", "hint_level": 1, "target_center": target})
        with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
            ws.send_json({"type": "subscribe", "views": ["axial"], "resolution": list(RES)})
            meta1, _ = recv_frame(ws)
        targets = [o for o in meta1["overlays"] if o["style"] == "target"]
        assert len(targets) == 1
        from trusim.reslice import View, canonical_plane
        from trusim.anatomy import ProstateModel

        model = ProstateModel(center=SMALL_PARAMS.gland_center, semi_axes=SMALL_PARAMS.gland_semi_axes)
        plane = canonical_plane(View.AXIAL, model, SMALL_RIG.image_extent)
        s, t, dist = project_to_plane(plane, target)
        assert targets[0]["s"] == pytest.approx(s, abs=1e-9)
        assert targets[0]["t"] == pytest.approx(t, abs=1e-9)
        assert abs(dist) < 10.0

    def test_scene_state(self, client, session):
        sid = session["session"]
        client.post(f"/sessions/{sid}/exercise", json={"kind": "target_hit", "hint_level": 2, "target_center": [20, 20, 20]})
        scene = client.get(f"/sessions/{sid}/scene").json()
        assert "exercise_target" in scene
        assert np.array(scene["probe_frame"]).shape == (4, 4)
        assert scene["gland"]["semi_axes"] == list(SMALL_PARAMS.gland_semi_axes)


class TestExerciseFlow:
    def test_submit_without_exercise_422(self, client, session):
        assert client.post(f"/sessions/{session['session']}/exercise/submit").status_code == 422

    def test_submit_empty_target_hit_fails(self, client, session):
        sid = session["session"]
        client.post(f"/sessions/{sid}/exercise", json={"kind": "target_hit", "target_center": [20, 20, 20]})
        result = client.post(f"/sessions/{sid}/exercise/submit").json()
        assert result["passed"] is False and result["score"] == 0.0

    def test_hint_defaults_to_operator_level(self, client, session):
        sid = session["session"]
        desc = client.post(f"/sessions/{sid}/exercise", json={"kind": "scheme_completion"}).json()
        assert desc["hint_level"] == 2  # novice

    def test_recommendations_endpoint(self, client, session):
        recs = client.get(f"/operators/{session['operator']}/recommendations").json()["recommendations"]
        assert recs and all("kind" in r and "reason" in r for r in recs)


class TestDeterminism:
    def test_replayed_pose_log_reproduces_payloads(self, client, tmp_path, session):
        sid = session["session"]
        log = [
            {"type": "set_pose", "pitch": 0.05, "roll": 0.1, "insertion": 8.0},
            {"type": "set_pose", "pitch": -0.2, "yaw": 0.3, "roll": -0.4, "insertion": 22.0},
            {"type": "set_pose", "insertion": 30.0},
        ]
        def run(app):
            payloads = []
            with TestClient(app) as c:
                with c.websocket_connect(f"/sessions/{sid}/stream") as ws:
                    ws.send_json({"type": "subscribe", "views": ["probe"], "resolution": list(RES)})
                    recv_frame(ws)
                    for entry in log:
                        ws.send_json(entry)
                        payloads.append(recv_frame(ws)[1])
            return payloads

        first = run(create_app(tmp_path / "store", rig=SMALL_RIG))
        second = run(create_app(tmp_path / "store", rig=SMALL_RIG))
        assert first == second
