"""Capture protocol fixtures from the real server for the frontend tests.

Writes test/fixtures/session.json: a scripted perfect session (connect,
steer, fire 12 solved cores, submit the scheme drill) with frame payloads
base64-encoded, plus a 512x512 probe frame meta and the matching scene for
the needle overlay alignment check.

Run from the repo root: python frontend/scripts/make_fixtures.py
"""
import base64
import json
import sys
import tempfile
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from trusim import ALL_SECTORS, ProstateModel, SectorScheme12, sector_midpoint_target, solve_pose_for_target
from trusim.biopsy import GunParams
from trusim.probe import ProbeRig
from trusim.service import create_app
from trusim.volume import PhantomParams

OUT = Path(__file__).resolve().parent.parent / "test" / "fixtures" / "session.json"
RES = (64, 64)


def pose_msg(pose, depth=None):
    msg = {"type": "set_pose", "pitch": pose.pitch, "yaw": pose.yaw, "roll": pose.roll, "insertion": pose.insertion}
    if depth is not None:
        msg["needle_depth"] = depth
    return msg


def main() -> int:
    params = PhantomParams()
    model = ProstateModel(center=np.array(params.gland_center), semi_axes=np.array(params.gland_semi_axes))
    rig, gun, scheme = ProbeRig(), GunParams(), SectorScheme12()
    plan = []
    for sector in ALL_SECTORS:
        pose, depth = solve_pose_for_target(rig, gun, sector_midpoint_target(model, scheme, sector))
        plan.append((pose, depth))

    fixture = {"resolution": list(RES), "views": ["probe", "axial", "sagittal", "coronal"]}
    with tempfile.TemporaryDirectory() as tmp:
        app = create_app(tmp)
        with TestClient(app) as client:
            fixture["operator"] = client.post("/operators", json={"name": "trainee", "level": "novice"}).json()
            fixture["phantom"] = client.post("/phantoms", json={"seed": 0}).json()
            fixture["session"] = client.post(
                "/sessions", json={"operator_id": fixture["operator"]["id"], "phantom_id": fixture["phantom"]["id"]}
            ).json()
            sid = fixture["session"]["id"]

            client.post(f"/sessions/{sid}/exercise", json={"kind": "scheme_completion", "hint_level": 0})

            with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
                ws.send_json({"type": "subscribe", "views": fixture["views"], "resolution": list(RES)})
                frames = []
                for _ in fixture["views"]:
                    meta = ws.receive_json()
                    payload = ws.receive_bytes()
                    frames.append({"meta": meta, "payload_b64": base64.b64encode(payload).decode()})
                fixture["subscribe_frames"] = frames

                steps = []
                for pose, depth in plan:
                    ws.send_json(pose_msg(pose))
                    meta = ws.receive_json()  # exactly one probe frame per pose
                    payload = ws.receive_bytes()
                    fired = client.post(f"/sessions/{sid}/fire", json={"needle_depth": depth}).json()
                    steps.append(
                        {
                            "pose": pose_msg(pose, depth),
                            "frame": {"meta": meta, "payload_b64": base64.b64encode(payload).decode()},
                            "fire_response": fired,
                        }
                    )
                fixture["steps"] = steps

                # refresh after firing: every subscribed view re-renders and
                # carries the recorded markers
                ws.send_json({"type": "refresh"})
                refreshed = []
                for _ in fixture["views"]:
                    meta = ws.receive_json()
                    payload = ws.receive_bytes()
                    refreshed.append({"meta": meta, "payload_b64": base64.b64encode(payload).decode()})
                fixture["post_fire_frames"] = refreshed

            fixture["stats"] = client.get(f"/sessions/{sid}/stats").json()
            fixture["submit_result"] = client.post(f"/sessions/{sid}/exercise/submit").json()
            client.post(f"/sessions/{sid}/close")
            fixture["recommendations"] = client.get(
                f"/operators/{fixture['operator']['id']}/recommendations"
            ).json()

        # second service: a 512x512 probe frame for the overlay alignment
        # check (meta only) plus the matching scene state
        app2 = create_app(tempfile.mkdtemp())
        with TestClient(app2) as client:
            op = client.post("/operators", json={"name": "align", "level": "expert"}).json()["id"]
            ph = client.post("/phantoms", json={"seed": 0}).json()["id"]
            sid = client.post("/sessions", json={"operator_id": op, "phantom_id": ph}).json()["id"]
            pose, _ = plan[0]
            with client.websocket_connect(f"/sessions/{sid}/stream") as ws:
                ws.send_json({"type": "subscribe", "views": ["probe"], "resolution": [512, 512]})
                ws.receive_json()
                ws.receive_bytes()
                ws.send_json(pose_msg(pose))
                meta = ws.receive_json()
                ws.receive_bytes()
            fixture["needle_frame_meta"] = meta
            fixture["needle_scene"] = client.get(f"/sessions/{sid}/scene").json()

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(fixture, indent=1, sort_keys=True))
    print(f"wrote {OUT} ({OUT.stat().st_size / 1024:.0f} KiB)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
