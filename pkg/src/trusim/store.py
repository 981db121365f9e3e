"""File-backed persistence: operators, phantoms, sessions, biopsy records.

Layout under the store directory: ``operators.log``, ``phantoms.log``,
``sessions/<id>.log``. Each line is one self-describing JSON record with a
``type`` field and schema version ``v``; replaying the logs reconstructs the
in-memory state exactly. Single writer per store instance; close_session
fsyncs the session log.
"""
from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .analytics import SessionStats, session_stats
from .anatomy import ProstateModel, SectorId, SectorScheme12
from .biopsy import BiopsyCore
from .errors import FormatError, InvalidParams, NotFound, SessionClosed
from .probe import ProbePose
from .volume import PhantomParams

SCHEMA_V = 1

LEVELS = ("novice", "intermediate", "expert")
HINT_BY_LEVEL = {"novice": 2, "intermediate": 1, "expert": 0}


@dataclass(frozen=True)
class OperatorProfile:
    id: int
    name: str
    level: str
    created_at: float

    def __post_init__(self):
        if self.level not in LEVELS:
            raise InvalidParams(f"level must be one of {LEVELS}")

    @property
    def default_hint_level(self) -> int:
        return HINT_BY_LEVEL[self.level]


@dataclass(frozen=True)
class PhantomMeta:
    id: int
    params: PhantomParams
    seed: int
    gland_volume_cc: float
    pseudo_age: int
    pseudo_psa: float

    def __post_init__(self):
        a, b, c = self.params.gland_semi_axes
        expect = 4.0 * math.pi * a * b * c / 3000.0
        if abs(self.gland_volume_cc - expect) > 1e-6:
            raise InvalidParams("gland_volume_cc inconsistent with semi-axes")


def phantom_meta(phantom_id: int, params: PhantomParams, seed: int) -> PhantomMeta:
    """Synthetic patient metadata, derived deterministically from the seed."""
    a, b, c = params.gland_semi_axes
    rng = np.random.default_rng(seed)
    return PhantomMeta(
        id=phantom_id,
        params=params,
        seed=seed,
        gland_volume_cc=4.0 * math.pi * a * b * c / 3000.0,
        pseudo_age=int(50 + rng.integers(0, 31)),
        pseudo_psa=round(float(rng.uniform(1.0, 15.0)), 1),
    )


@dataclass
class SessionRecord:
    id: int
    operator_id: int
    phantom_id: int
    started_at: float
    cores: list[BiopsyCore] = field(default_factory=list)
    exercise_results: list[dict] = field(default_factory=list)
    closed: bool = False


# ---------------------------------------------------------------- codecs

def pose_to_record(pose: ProbePose) -> dict:
    return {"pitch": pose.pitch, "yaw": pose.yaw, "roll": pose.roll, "insertion": pose.insertion}


def pose_from_record(rec: dict) -> ProbePose:
    return ProbePose(rec["pitch"], rec["yaw"], rec["roll"], rec["insertion"])


def core_to_record(core: BiopsyCore) -> dict:
    return {
        "id": core.id,
        "fired_at": core.fired_at,
        "pose": pose_to_record(core.pose),
        "p0": list(core.p0),
        "p1": list(core.p1),
        "in_gland_length": core.in_gland_length,
        "gland_segment": None
        if core.gland_segment is None
        else [list(core.gland_segment[0]), list(core.gland_segment[1])],
        "sector": None if core.sector is None else core.sector.key,
        "needle_depth": core.needle_depth,
    }


def core_from_record(rec: dict) -> BiopsyCore:
    seg = rec["gland_segment"]
    return BiopsyCore(
        id=rec["id"],
        fired_at=rec["fired_at"],
        pose=pose_from_record(rec["pose"]),
        p0=np.array(rec["p0"]),
        p1=np.array(rec["p1"]),
        in_gland_length=rec["in_gland_length"],
        gland_segment=None if seg is None else (np.array(seg[0]), np.array(seg[1])),
        sector=None if rec["sector"] is None else SectorId.from_key(rec["sector"]),
        needle_depth=rec["needle_depth"],
    )


def params_to_record(p: PhantomParams) -> dict:
    return {
        "volume_extent": list(p.volume_extent),
        "spacing": p.spacing,
        "gland_semi_axes": list(p.gland_semi_axes),
        "gland_center": list(p.gland_center),
        "gland_level": p.gland_level,
        "tissue_level": p.tissue_level,
        "capsule_rim_width": p.capsule_rim_width,
        "capsule_gain": p.capsule_gain,
        "speckle_amplitude": p.speckle_amplitude,
        "speckle_correlation_length": p.speckle_correlation_length,
        "rectal_wall_depth": p.rectal_wall_depth,
    }


def params_from_record(rec: dict) -> PhantomParams:
    return PhantomParams(
        volume_extent=tuple(rec["volume_extent"]),
        spacing=rec["spacing"],
        gland_semi_axes=tuple(rec["gland_semi_axes"]),
        gland_center=tuple(rec["gland_center"]),
        gland_level=rec["gland_level"],
        tissue_level=rec["tissue_level"],
        capsule_rim_width=rec["capsule_rim_width"],
        capsule_gain=rec["capsule_gain"],
        speckle_amplitude=rec["speckle_amplitude"],
        speckle_correlation_length=rec["speckle_correlation_length"],
        rectal_wall_depth=rec["rectal_wall_depth"],
    )


def stats_to_record(stats: SessionStats) -> dict:
    return {
        "n_cores": stats.n_cores,
        "n_in_gland": stats.n_in_gland,
        "sector_coverage": stats.sector_coverage,
        "apex_coverage": stats.apex_coverage,
        "boundary_miss_count": stats.boundary_miss_count,
        "mean_in_gland_length": stats.mean_in_gland_length,
        "min_pair_distance": stats.min_pair_distance,
        "spread_cv": stats.spread_cv,
    }


# ------------------------------------------------------------------ store

@dataclass(frozen=True)
class OperatorHistory:
    """Cross-session aggregate for one operator (closed sessions only)."""

    operator_id: int
    per_session: tuple[tuple[int, SessionStats], ...]
    mean_sector_coverage: Optional[float]
    mean_apex_coverage: Optional[float]
    mean_in_gland_length: Optional[float]
    total_cores: int


class SessionStore:
    """Append-only event-log store. Reopening a directory replays the logs."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "sessions").mkdir(exist_ok=True)
        self._operators: dict[int, OperatorProfile] = {}
        self._phantoms: dict[int, PhantomMeta] = {}
        self._sessions: dict[int, SessionRecord] = {}
        self._replay()

    # -- replay

    def _replay(self) -> None:
        for rec in self._read_log(self.root / "operators.log"):
            if rec["type"] == "operator":
                self._operators[rec["id"]] = OperatorProfile(
                    id=rec["id"], name=rec["name"], level=rec["level"], created_at=rec["created_at"]
                )
        for rec in self._read_log(self.root / "phantoms.log"):
            if rec["type"] == "phantom":
                self._phantoms[rec["id"]] = PhantomMeta(
                    id=rec["id"],
                    params=params_from_record(rec["params"]),
                    seed=rec["seed"],
                    gland_volume_cc=rec["gland_volume_cc"],
                    pseudo_age=rec["pseudo_age"],
                    pseudo_psa=rec["pseudo_psa"],
                )
        for path in sorted((self.root / "sessions").glob("*.log"), key=lambda p: int(p.stem)):
            session = None
            for rec in self._read_log(path):
                if rec["type"] == "session_open":
                    session = SessionRecord(
                        id=rec["id"],
                        operator_id=rec["operator_id"],
                        phantom_id=rec["phantom_id"],
                        started_at=rec["started_at"],
                    )
                elif rec["type"] == "core":
                    session.cores.append(core_from_record(rec["core"]))
                elif rec["type"] == "exercise_result":
                    session.exercise_results.append(rec["result"])
                elif rec["type"] == "session_close":
                    session.closed = True
            if session is not None:
                self._sessions[session.id] = session

    @staticmethod
    def _read_log(path: Path):
        if not path.exists():
            return
        with path.open("r", encoding="utf-8") as fh:
            for i, line in enumerate(fh):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"{path}:{i + 1}: bad record: {exc}") from exc
                if rec.get("v") != SCHEMA_V:
                    raise FormatError(f"{path}:{i + 1}: unsupported schema version {rec.get('v')}")
                yield rec

    def _append(self, path: Path, record: dict, sync: bool = False) -> None:
        record = {"v": SCHEMA_V, **record}
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")
            if sync:
                fh.flush()
                os.fsync(fh.fileno())

    # -- operators

    def create_operator(self, name: str, level: str, created_at: Optional[float] = None) -> int:
        op_id = max(self._operators, default=0) + 1
        profile = OperatorProfile(
            id=op_id, name=name, level=level, created_at=time.time() if created_at is None else created_at
        )
        self._append(
            self.root / "operators.log",
            {"type": "operator", "id": op_id, "name": name, "level": level, "created_at": profile.created_at},
        )
        self._operators[op_id] = profile
        return op_id

    def get_operator(self, operator_id: int) -> OperatorProfile:
        try:
            return self._operators[operator_id]
        except KeyError:
            raise NotFound(f"operator {operator_id}") from None

    def list_operators(self) -> list[OperatorProfile]:
        return [self._operators[k] for k in sorted(self._operators)]

    # -- phantoms

    def register_phantom(self, params: PhantomParams, seed: int) -> PhantomMeta:
        phantom_id = max(self._phantoms, default=0) + 1
        meta = phantom_meta(phantom_id, params, seed)
        self._append(
            self.root / "phantoms.log",
            {
                "type": "phantom",
                "id": meta.id,
                "params": params_to_record(params),
                "seed": seed,
                "gland_volume_cc": meta.gland_volume_cc,
                "pseudo_age": meta.pseudo_age,
                "pseudo_psa": meta.pseudo_psa,
            },
        )
        self._phantoms[phantom_id] = meta
        return meta

    def get_phantom(self, phantom_id: int) -> PhantomMeta:
        try:
            return self._phantoms[phantom_id]
        except KeyError:
            raise NotFound(f"phantom {phantom_id}") from None

    def list_phantoms(self) -> list[PhantomMeta]:
        return [self._phantoms[k] for k in sorted(self._phantoms)]

    def phantom_model(self, phantom_id: int) -> ProstateModel:
        params = self.get_phantom(phantom_id).params
        return ProstateModel(center=np.array(params.gland_center), semi_axes=np.array(params.gland_semi_axes))

    # -- sessions

    def _session_path(self, session_id: int) -> Path:
        return self.root / "sessions" / f"{session_id}.log"

    def open_session(self, operator_id: int, phantom_id: int, started_at: Optional[float] = None) -> int:
        self.get_operator(operator_id)
        self.get_phantom(phantom_id)
        session_id = max(self._sessions, default=0) + 1
        record = SessionRecord(
            id=session_id,
            operator_id=operator_id,
            phantom_id=phantom_id,
            started_at=time.time() if started_at is None else started_at,
        )
        self._append(
            self._session_path(session_id),
            {
                "type": "session_open",
                "id": session_id,
                "operator_id": operator_id,
                "phantom_id": phantom_id,
                "started_at": record.started_at,
            },
        )
        self._sessions[session_id] = record
        return session_id

    def get_session(self, session_id: int) -> SessionRecord:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise NotFound(f"session {session_id}") from None

    def append_core(self, session_id: int, core: BiopsyCore) -> int:
        session = self.get_session(session_id)
        if session.closed:
            raise SessionClosed(f"session {session_id} is closed")
        core_id = len(session.cores) + 1
        stored = core.with_id(core_id)
        self._append(self._session_path(session_id), {"type": "core", "core": core_to_record(stored)})
        session.cores.append(stored)
        return core_id

    def append_exercise_result(self, session_id: int, result: dict) -> None:
        session = self.get_session(session_id)
        if session.closed:
            raise SessionClosed(f"session {session_id} is closed")
        self._append(self._session_path(session_id), {"type": "exercise_result", "result": result})
        session.exercise_results.append(result)

    def close_session(self, session_id: int) -> None:
        session = self.get_session(session_id)
        if session.closed:
            return
        self._append(self._session_path(session_id), {"type": "session_close", "id": session_id}, sync=True)
        session.closed = True

    # -- statistics

    def session_statistics(self, session_id: int) -> SessionStats:
        session = self.get_session(session_id)
        model = self.phantom_model(session.phantom_id)
        return session_stats(session.cores, model, SectorScheme12())

    def operator_history_stats(self, operator_id: int) -> OperatorHistory:
        """Per-session stats plus cross-session arithmetic means (closed only)."""
        self.get_operator(operator_id)
        per = []
        for sid in sorted(self._sessions):
            s = self._sessions[sid]
            if s.operator_id == operator_id and s.closed:
                per.append((sid, self.session_statistics(sid)))
        def mean_of(vals):
            vals = [v for v in vals if v is not None]
            return float(np.mean(vals)) if vals else None
        return OperatorHistory(
            operator_id=operator_id,
            per_session=tuple(per),
            mean_sector_coverage=mean_of([st.sector_coverage for _, st in per]),
            mean_apex_coverage=mean_of([st.apex_coverage for _, st in per]),
            mean_in_gland_length=mean_of([st.mean_in_gland_length for _, st in per]),
            total_cores=sum(st.n_cores for _, st in per),
        )
