"""HTTP + WebSocket boundary between the engine and UI clients.

Lifecycle endpoints are request/response JSON; per-session interaction runs
over a bidirectional stream at ``/sessions/{id}/stream``: JSON control
messages in, JSON frame metadata followed by a binary payload out. Payload
layout (little-endian): u32 frame_seq, u8 view code, u16 w, u16 h, then
w*h grayscale bytes, row-major.

Unlike the library layer, the stream clamps out-of-range poses and reports
the clamped pose in the frame: an interactive user dragging past a limit
expects resistance, not an error. Overlays ship as geometry plus style tags
(``needle`` drawn green, ``recorded`` red by clients), never burned into the
pixels, so payloads stay cacheable and clients can restyle.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .analytics import (
    Exercise,
    ExerciseKind,
    SessionEvidence,
    evaluate_exercise,
    recommend_exercises,
    session_stats,
)
from .anatomy import SectorId, SectorScheme12
from .biopsy import GunParams, fire, sector_midpoint_target
from .errors import DepthOutOfRange, EvidenceMismatch, InvalidParams, NotFound, SessionClosed
from .probe import ProbePose, ProbeRig, clamp_pose, image_plane, needle_ray, pose_to_frame
from .reslice import ImagePlane, View, apply_fan_mask, canonical_plane, extract_slice, project_to_plane
from .store import (
    SessionStore,
    core_to_record,
    params_from_record,
    params_to_record,
    pose_to_record,
    stats_to_record,
)
from .volume import PhantomParams, Volume3D, generate_phantom, quantize_u8

VIEW_CODES = {View.PROBE: 0, View.AXIAL: 1, View.SAGITTAL: 2, View.CORONAL: 3}
CANONICAL_VIEWS = (View.AXIAL, View.SAGITTAL, View.CORONAL)

# hint level 1 shows the target on a slice only when it is near the plane
HINT_PROXIMITY_MM = 10.0

FRAME_HEADER = struct.Struct("<IBHH")


@dataclass
class SessionRuntime:
    """Per-session interactive state (not persisted)."""

    pose: ProbePose = field(default_factory=ProbePose)
    seq: dict = field(default_factory=dict)
    views: list = field(default_factory=lambda: [View.PROBE])
    resolution: tuple[int, int] = (512, 512)
    exercise: Optional[Exercise] = None


class ServiceState:
    def __init__(self, store: SessionStore, rig: ProbeRig, gun: GunParams, scheme: SectorScheme12):
        self.store = store
        self.rig = rig
        self.gun = gun
        self.scheme = scheme
        self._volumes: dict[int, Volume3D] = {}
        self._runtimes: dict[int, SessionRuntime] = {}

    def volume(self, phantom_id: int) -> Volume3D:
        if phantom_id not in self._volumes:
            meta = self.store.get_phantom(phantom_id)
            vol, _ = generate_phantom(meta.params, meta.seed)
            self._volumes[phantom_id] = vol
        return self._volumes[phantom_id]

    def runtime(self, session_id: int) -> SessionRuntime:
        if session_id not in self._runtimes:
            self._runtimes[session_id] = SessionRuntime()
        return self._runtimes[session_id]


def _clip_unit_box(p0: tuple[float, float], p1: tuple[float, float]):
    """Liang-Barsky clip of a 2D segment to [0,1]^2; None when invisible."""
    x0, y0 = p0
    dx, dy = p1[0] - x0, p1[1] - y0
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, x0), (dx, 1.0 - x0), (-dy, y0), (dy, 1.0 - y0)):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        r = q / p
        if p < 0.0:
            t0 = max(t0, r)
        else:
            t1 = min(t1, r)
    if t0 > t1:
        return None
    return (x0 + t0 * dx, y0 + t0 * dy), (x0 + t1 * dx, y0 + t1 * dy)


def _needle_overlay(state: ServiceState, plane: ImagePlane, pose: ProbePose) -> Optional[dict]:
    ray = needle_ray(state.rig, pose)
    n = plane.normal
    denom = float(np.dot(ray.direction, n))
    rel = float(np.dot(plane.origin - ray.origin, n))
    if abs(denom) < 1e-9:
        if abs(rel) > 1e-6:
            return None
        s0, t0, _ = project_to_plane(plane, ray.origin)
        s1, t1, _ = project_to_plane(plane, ray.at(state.gun.max_reach))
        seg = _clip_unit_box((s0, t0), (s1, t1))
        if seg is None:
            return None
        return {"kind": "line", "style": "needle", "points": [list(seg[0]), list(seg[1])]}
    t_star = rel / denom
    if t_star < 0.0:
        return None
    s, t, _ = project_to_plane(plane, ray.at(t_star))
    return {
        "kind": "marker",
        "style": "needle",
        "s": s,
        "t": t,
        "clipped": not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0),
    }


def _overlays(state: ServiceState, session_id: int, plane: ImagePlane, pose: ProbePose) -> list[dict]:
    out = []
    needle = _needle_overlay(state, plane, pose)
    if needle is not None:
        out.append(needle)
    session = state.store.get_session(session_id)
    for core in session.cores:
        s, t, dist = project_to_plane(plane, core.midpoint)
        out.append(
            {
                "kind": "marker",
                "style": "recorded",
                "core_id": core.id,
                "s": s,
                "t": t,
                "out_of_plane": dist,
                "clipped": not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0),
            }
        )
    ex = state.runtime(session_id).exercise
    if ex is not None and ex.hint_level >= 1:
        target = None
        if ex.kind is ExerciseKind.TARGET_HIT:
            target = ex.target_center
        elif ex.kind is ExerciseKind.PLANE_LOCALIZATION:
            target = ex.target_plane.origin
        if target is not None:
            s, t, dist = project_to_plane(plane, target)
            if abs(dist) < HINT_PROXIMITY_MM:
                out.append(
                    {
                        "kind": "marker",
                        "style": "target",
                        "s": s,
                        "t": t,
                        "out_of_plane": dist,
                        "clipped": not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0),
                    }
                )
    return out


def render_frame(state: ServiceState, session_id: int, view: View, pose: ProbePose) -> tuple[dict, bytes]:
    """Pure function of (volume, clamped pose, view, resolution, fan) plus
    the per-(session, view) frame counter."""
    session = state.store.get_session(session_id)
    vol = state.volume(session.phantom_id)
    model = state.store.phantom_model(session.phantom_id)
    rt = state.runtime(session_id)
    if view is View.PROBE:
        plane = image_plane(state.rig, pose)
    else:
        plane = canonical_plane(view, model, state.rig.image_extent)
    w, h = rt.resolution
    img = extract_slice(vol, plane, (w, h))
    if view is View.PROBE:
        img = apply_fan_mask(img, state.rig.fan)
    rt.seq[view] = rt.seq.get(view, 0) + 1
    seq = rt.seq[view]
    payload = FRAME_HEADER.pack(seq, VIEW_CODES[view], w, h) + quantize_u8(img.pixels).tobytes()
    meta = {
        "type": "frame",
        "session_id": session_id,
        "frame_seq": seq,
        "view": view.value,
        "w": w,
        "h": h,
        "pose": pose_to_record(pose),
        "overlays": _overlays(state, session_id, plane, pose),
    }
    return meta, payload


# ------------------------------------------------------------ request DTOs

class OperatorIn(BaseModel):
    name: str
    level: str = "novice"


class PhantomIn(BaseModel):
    seed: int = 0
    params: Optional[dict] = None


class SessionIn(BaseModel):
    operator_id: int
    phantom_id: int


class FireIn(BaseModel):
    needle_depth: float


class ExerciseIn(BaseModel):
    kind: str
    hint_level: Optional[int] = None
    target_sector: Optional[str] = None
    target_center: Optional[list[float]] = None
    target_radius: float = 5.0
    view: Optional[str] = None
    coverage_threshold: float = 10.0 / 12.0


def _exercise_descriptor(ex: Exercise) -> dict:
    desc: dict = {"kind": ex.kind.value, "hint_level": ex.hint_level}
    if ex.kind is ExerciseKind.TARGET_HIT:
        desc["target_center"] = list(ex.target_center)
        desc["target_radius"] = ex.target_radius
    elif ex.kind is ExerciseKind.PLANE_LOCALIZATION:
        desc["target_plane"] = {
            "origin": list(ex.target_plane.origin),
            "u_axis": list(ex.target_plane.u_axis),
            "v_axis": list(ex.target_plane.v_axis),
            "extent": list(ex.target_plane.extent),
        }
    else:
        desc["coverage_threshold"] = ex.coverage_threshold
    return desc


def create_app(
    store_dir,
    rig: Optional[ProbeRig] = None,
    gun: Optional[GunParams] = None,
    scheme: Optional[SectorScheme12] = None,
) -> FastAPI:
    state = ServiceState(
        store=SessionStore(store_dir),
        rig=rig or ProbeRig(),
        gun=gun or GunParams(),
        scheme=scheme or SectorScheme12(),
    )
    app = FastAPI(title="trusim")
    app.state.service = state

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(NotFound)
    async def not_found(request: Request, exc: NotFound):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(SessionClosed)
    async def closed(request: Request, exc: SessionClosed):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(DepthOutOfRange)
    async def bad_depth(request: Request, exc: DepthOutOfRange):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(EvidenceMismatch)
    async def bad_evidence(request: Request, exc: EvidenceMismatch):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(InvalidParams)
    async def bad_params(request: Request, exc: InvalidParams):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    # -- operators

    @app.post("/operators", status_code=201)
    def create_operator(body: OperatorIn):
        op_id = state.store.create_operator(body.name, body.level)
        return {"id": op_id}

    @app.get("/operators/{operator_id}")
    def get_operator(operator_id: int):
        op = state.store.get_operator(operator_id)
        return {"id": op.id, "name": op.name, "level": op.level, "created_at": op.created_at}

    @app.get("/operators/{operator_id}/stats")
    def operator_stats(operator_id: int):
        hist = state.store.operator_history_stats(operator_id)
        return {
            "operator_id": hist.operator_id,
            "sessions": [{"session_id": sid, "stats": stats_to_record(st)} for sid, st in hist.per_session],
            "mean_sector_coverage": hist.mean_sector_coverage,
            "mean_apex_coverage": hist.mean_apex_coverage,
            "mean_in_gland_length": hist.mean_in_gland_length,
            "total_cores": hist.total_cores,
        }

    @app.get("/operators/{operator_id}/recommendations")
    def recommendations(operator_id: int):
        hist = state.store.operator_history_stats(operator_id)
        stats = hist.per_session[-1][1] if hist.per_session else session_stats([])
        recs = recommend_exercises(stats, core_length=state.gun.core_length)
        return {"operator_id": operator_id, "recommendations": [{"kind": r.kind.value, "reason": r.reason} for r in recs]}

    # -- phantoms

    @app.get("/phantoms")
    def list_phantoms():
        return [
            {
                "id": m.id,
                "seed": m.seed,
                "params": params_to_record(m.params),
                "gland_volume_cc": m.gland_volume_cc,
                "pseudo_age": m.pseudo_age,
                "pseudo_psa": m.pseudo_psa,
            }
            for m in state.store.list_phantoms()
        ]

    @app.post("/phantoms", status_code=201)
    def create_phantom(body: PhantomIn):
        params = params_from_record(body.params) if body.params else PhantomParams()
        params.validate()
        meta = state.store.register_phantom(params, body.seed)
        return {"id": meta.id, "gland_volume_cc": meta.gland_volume_cc, "seed": meta.seed}

    # -- sessions

    @app.post("/sessions", status_code=201)
    def open_session(body: SessionIn):
        sid = state.store.open_session(body.operator_id, body.phantom_id)
        return {"id": sid}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: int):
        s = state.store.get_session(session_id)
        return {
            "id": s.id,
            "operator_id": s.operator_id,
            "phantom_id": s.phantom_id,
            "started_at": s.started_at,
            "closed": s.closed,
            "cores": [core_to_record(c) for c in s.cores],
            "exercise_results": s.exercise_results,
        }

    @app.post("/sessions/{session_id}/close")
    def close_session(session_id: int):
        state.store.get_session(session_id)
        state.store.close_session(session_id)
        return {"id": session_id, "closed": True}

    @app.post("/sessions/{session_id}/fire")
    def fire_endpoint(session_id: int, body: FireIn):
        session = state.store.get_session(session_id)
        if session.closed:
            raise SessionClosed(f"session {session_id} is closed")
        rt = state.runtime(session_id)
        model = state.store.phantom_model(session.phantom_id)
        core = fire(state.rig, rt.pose, body.needle_depth, state.gun, model, state.scheme)
        core_id = state.store.append_core(session_id, core)
        return core_to_record(core.with_id(core_id))

    @app.get("/sessions/{session_id}/stats")
    def get_stats(session_id: int):
        return stats_to_record(state.store.session_statistics(session_id))

    @app.get("/sessions/{session_id}/scene")
    def scene(session_id: int):
        session = state.store.get_session(session_id)
        rt = state.runtime(session_id)
        model = state.store.phantom_model(session.phantom_id)
        frame = pose_to_frame(state.rig, rt.pose)
        ray = needle_ray(state.rig, rt.pose)
        plane = image_plane(state.rig, rt.pose)
        out = {
            "probe_frame": frame.matrix4().tolist(),
            "needle": {"origin": list(ray.origin), "direction": list(ray.direction)},
            "gland": {
                "center": list(model.center),
                "semi_axes": list(model.semi_axes),
                "orientation": model.orientation.tolist(),
            },
            "cores": [
                {"id": c.id, "p0": list(c.p0), "p1": list(c.p1), "sector": c.sector.key if c.sector else None}
                for c in session.cores
            ],
            "image_plane": {
                "origin": list(plane.origin),
                "u_axis": list(plane.u_axis),
                "v_axis": list(plane.v_axis),
                "extent": list(plane.extent),
            },
            "pose": pose_to_record(rt.pose),
        }
        if rt.exercise is not None and rt.exercise.hint_level >= 2:
            out["exercise_target"] = _exercise_descriptor(rt.exercise)
        return out

    # -- exercises

    @app.post("/sessions/{session_id}/exercise", status_code=201)
    def start_exercise(session_id: int, body: ExerciseIn):
        session = state.store.get_session(session_id)
        model = state.store.phantom_model(session.phantom_id)
        operator = state.store.get_operator(session.operator_id)
        hint = operator.default_hint_level if body.hint_level is None else body.hint_level
        kind = ExerciseKind(body.kind)
        if kind is ExerciseKind.TARGET_HIT:
            if body.target_center is not None:
                center = np.array(body.target_center, dtype=np.float64)
            elif body.target_sector is not None:
                center = sector_midpoint_target(model, state.scheme, SectorId.from_key(body.target_sector))
            else:
                center = model.center.copy()
            ex = Exercise(kind=kind, hint_level=hint, target_center=center, target_radius=body.target_radius)
        elif kind is ExerciseKind.PLANE_LOCALIZATION:
            view = View(body.view or "axial")
            plane = canonical_plane(view, model, state.rig.image_extent)
            ex = Exercise(kind=kind, hint_level=hint, target_plane=plane)
        else:
            ex = Exercise(kind=kind, hint_level=hint, scheme=state.scheme, coverage_threshold=body.coverage_threshold)
        state.runtime(session_id).exercise = ex
        return _exercise_descriptor(ex)

    @app.post("/sessions/{session_id}/exercise/submit")
    def submit_exercise(session_id: int):
        session = state.store.get_session(session_id)
        rt = state.runtime(session_id)
        if rt.exercise is None:
            raise EvidenceMismatch("no exercise in progress")
        ex = rt.exercise
        if ex.kind is ExerciseKind.PLANE_LOCALIZATION:
            evidence = image_plane(state.rig, rt.pose)
        elif ex.kind is ExerciseKind.TARGET_HIT:
            evidence = tuple(session.cores)
        else:
            evidence = SessionEvidence(tuple(session.cores), state.store.phantom_model(session.phantom_id))
        result = evaluate_exercise(ex, evidence)
        detail = dict(result.detail)
        if "stats" in detail:
            detail["stats"] = stats_to_record(detail["stats"])
        record = {"kind": ex.kind.value, "passed": result.passed, "score": result.score, "detail": detail}
        state.store.append_exercise_result(session_id, record)
        return record

    # -- stream

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(ws: WebSocket, session_id: int):
        await ws.accept()
        try:
            state.store.get_session(session_id)
        except NotFound as exc:
            await ws.send_json({"type": "error", "message": str(exc)})
            await ws.close(code=4404)
            return
        rt = state.runtime(session_id)

        async def send(view: View, pose: ProbePose):
            meta, payload = render_frame(state, session_id, view, pose)
            await ws.send_json(meta)
            await ws.send_bytes(payload)

        try:
            while True:
                msg = await ws.receive_json()
                mtype = msg.get("type")
                if mtype == "subscribe":
                    views = [View(v) for v in msg.get("views", ["probe"])]
                    rt.views = views
                    if "resolution" in msg:
                        w, h = msg["resolution"]
                        rt.resolution = (int(w), int(h))
                    for view in rt.views:
                        await send(view, rt.pose)
                elif mtype == "set_pose":
                    requested = ProbePose(
                        pitch=float(msg.get("pitch", 0.0)),
                        yaw=float(msg.get("yaw", 0.0)),
                        roll=float(msg.get("roll", 0.0)),
                        insertion=float(msg.get("insertion", 0.0)),
                    )
                    rt.pose = clamp_pose(state.rig, requested)
                    # exactly one probe frame per accepted pose; canonical
                    # views re-render on subscribe/refresh (clients send a
                    # refresh after a successful fire)
                    for view in rt.views:
                        if view is View.PROBE:
                            await send(view, rt.pose)
                elif mtype == "refresh":
                    for view in rt.views:
                        await send(view, rt.pose)
                else:
                    await ws.send_json({"type": "error", "message": f"unknown message type {mtype!r}"})
        except WebSocketDisconnect:
            return

    return app
