"""Session statistics, exercises, recommendations, and protocol Monte-Carlo.

The quantities mirror the clinical difficulty signals: apex and boundary
sampling, core length in the gland, and the regular spreading of samples.
Protocol comparison is purely geometric: a trial detects the tumor when any
core segment passes within the tumor radius of its center.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .anatomy import (
    ALL_SECTORS,
    APEX_SECTORS,
    ProstateModel,
    SectorScheme12,
    distance_to_surface,
)
from .biopsy import BiopsyCore, GunParams, solve_pose_for_target
from .errors import EvidenceMismatch, InfeasibleTarget, InvalidParams
from .geometry import point_segment_distance, vec3
from .probe import ProbePose, ProbeRig, clamp_pose
from .reslice import ImagePlane
from . import biopsy

PLANE_PASS_SCORE = 0.25
HINT_LEVELS = (0, 1, 2)


@dataclass(frozen=True)
class SessionStats:
    n_cores: int
    n_in_gland: int
    sector_coverage: float
    apex_coverage: float
    boundary_miss_count: int
    mean_in_gland_length: Optional[float] = None
    min_pair_distance: Optional[float] = None
    spread_cv: Optional[float] = None


def session_stats(
    cores: Sequence[BiopsyCore],
    model: Optional[ProstateModel] = None,
    scheme: Optional[SectorScheme12] = None,
) -> SessionStats:
    """Aggregate a core list. Sector attributions and clipped segments are
    read from the records (snapshotted at fire time); model/scheme define the
    sector universe only."""
    del model, scheme  # sector universe is the fixed 12-sector layout
    in_gland = [c for c in cores if c.in_gland_length > 0.0]
    sectors = {c.sector for c in in_gland if c.sector is not None}
    apex = sectors & set(APEX_SECTORS)
    mids = [c.midpoint for c in in_gland]

    # fsum reductions keep the stats exactly permutation-invariant
    mean_len = math.fsum(c.in_gland_length for c in in_gland) / len(in_gland) if in_gland else None

    min_pair = None
    spread_cv = None
    if len(mids) >= 2:
        pts = np.array(mids)
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        min_pair = float(dist.min())
        if len(mids) >= 3:
            nearest = dist.min(axis=1)
            mean_nn = math.fsum(nearest) / len(nearest)
            if mean_nn > 0.0:
                var = math.fsum((d - mean_nn) ** 2 for d in nearest) / len(nearest)
                spread_cv = math.sqrt(var) / mean_nn
            else:
                spread_cv = 0.0

    return SessionStats(
        n_cores=len(cores),
        n_in_gland=len(in_gland),
        sector_coverage=len(sectors) / len(ALL_SECTORS),
        apex_coverage=len(apex) / len(APEX_SECTORS),
        boundary_miss_count=sum(1 for c in cores if c.in_gland_length == 0.0),
        mean_in_gland_length=mean_len,
        min_pair_distance=min_pair,
        spread_cv=spread_cv,
    )


class ExerciseKind(enum.Enum):
    PLANE_LOCALIZATION = "plane_localization"
    TARGET_HIT = "target_hit"
    SCHEME_COMPLETION = "scheme_completion"


@dataclass(frozen=True)
class Exercise:
    """Training task bound to a phantom; payload depends on the kind."""

    kind: ExerciseKind
    hint_level: int = 0
    target_plane: Optional[ImagePlane] = None
    angle_tol: float = math.radians(10.0)
    offset_tol: float = 8.0
    target_center: Optional[np.ndarray] = None
    target_radius: float = 5.0
    scheme: SectorScheme12 = field(default_factory=SectorScheme12)
    coverage_threshold: float = 10.0 / 12.0

    def __post_init__(self):
        if self.hint_level not in HINT_LEVELS:
            raise InvalidParams(f"hint_level must be one of {HINT_LEVELS}")
        if self.kind is ExerciseKind.PLANE_LOCALIZATION:
            if self.target_plane is None:
                raise InvalidParams("PlaneLocalization needs target_plane")
            if self.angle_tol <= 0 or self.offset_tol <= 0:
                raise InvalidParams("tolerances must be positive")
        elif self.kind is ExerciseKind.TARGET_HIT:
            if self.target_center is None:
                raise InvalidParams("TargetHit needs target_center")
            if self.target_radius <= 0:
                raise InvalidParams("target_radius must be positive")
            object.__setattr__(self, "target_center", vec3(self.target_center))
        elif self.kind is ExerciseKind.SCHEME_COMPLETION:
            if not 0.0 < self.coverage_threshold <= 1.0:
                raise InvalidParams("coverage_threshold must be in (0, 1]")


@dataclass(frozen=True)
class SessionEvidence:
    """Full-session evidence for SchemeCompletion."""

    cores: tuple[BiopsyCore, ...]
    model: ProstateModel


@dataclass(frozen=True)
class ExerciseResult:
    passed: bool
    score: float
    detail: dict


def _falloff(x: float, tol: float) -> float:
    """1 at exact, 0.5 at tolerance, 0 at twice the tolerance."""
    return min(1.0, max(0.0, 1.0 - x / (2.0 * tol)))


def evaluate_exercise(ex: Exercise, evidence) -> ExerciseResult:
    """Score evidence against the exercise; EvidenceMismatch on wrong type.

    PlaneLocalization takes the final ImagePlane, TargetHit the fired cores,
    SchemeCompletion the full session (SessionEvidence).
    """
    if ex.kind is ExerciseKind.PLANE_LOCALIZATION:
        if not isinstance(evidence, ImagePlane):
            raise EvidenceMismatch("PlaneLocalization expects an ImagePlane")
        target = ex.target_plane
        cosang = abs(float(np.dot(evidence.normal, target.normal)))
        angle = math.acos(min(1.0, cosang))
        rel = evidence.origin - target.origin
        offset = float(np.linalg.norm(rel - float(np.dot(rel, target.normal)) * target.normal))
        passed = angle <= ex.angle_tol and offset <= ex.offset_tol
        score = _falloff(angle, ex.angle_tol) * _falloff(offset, ex.offset_tol)
        return ExerciseResult(passed, score, {"angle": angle, "offset": offset})

    if ex.kind is ExerciseKind.TARGET_HIT:
        if isinstance(evidence, (ImagePlane, SessionEvidence)) or not isinstance(evidence, (list, tuple)):
            raise EvidenceMismatch("TargetHit expects the fired cores")
        center = ex.target_center
        dists = [point_segment_distance(center, c.p0, c.p1) for c in evidence]
        if not dists:
            return ExerciseResult(False, 0.0, {"hit": False, "miss_distance": None})
        d = min(dists)
        hit = d <= ex.target_radius
        score = min(1.0, max(0.0, 2.0 - d / ex.target_radius))
        return ExerciseResult(hit, score, {"hit": hit, "miss_distance": d})

    if ex.kind is ExerciseKind.SCHEME_COMPLETION:
        if not isinstance(evidence, SessionEvidence):
            raise EvidenceMismatch("SchemeCompletion expects SessionEvidence")
        stats = session_stats(evidence.cores, evidence.model, ex.scheme)
        passed = stats.sector_coverage >= ex.coverage_threshold and stats.boundary_miss_count == 0
        return ExerciseResult(passed, stats.sector_coverage, {"stats": stats})

    raise EvidenceMismatch(f"unknown exercise kind {ex.kind}")


@dataclass(frozen=True)
class Recommendation:
    kind: ExerciseKind
    reason: str


# rule table, in priority order (reason tags are stable API)
APEX_COVERAGE_MIN = 0.5
BOUNDARY_MISS_MAX = 2
SHORT_CORE_FRACTION = 0.6
SPREAD_CV_MAX = 0.6


def recommend_exercises(stats: SessionStats, core_length: float = 17.0) -> list[Recommendation]:
    """Deterministic rule table mapping weak statistics to drill kinds."""
    recs: list[Recommendation] = []
    if stats.apex_coverage < APEX_COVERAGE_MIN:
        recs.append(Recommendation(ExerciseKind.TARGET_HIT, "apex-coverage-low"))
    if stats.boundary_miss_count > BOUNDARY_MISS_MAX:
        recs.append(Recommendation(ExerciseKind.PLANE_LOCALIZATION, "boundary-misses"))
    if stats.mean_in_gland_length is not None and stats.mean_in_gland_length < SHORT_CORE_FRACTION * core_length:
        recs.append(Recommendation(ExerciseKind.TARGET_HIT, "short-cores"))
    if stats.spread_cv is not None and stats.spread_cv > SPREAD_CV_MAX:
        recs.append(Recommendation(ExerciseKind.SCHEME_COMPLETION, "irregular-spread"))
    if not recs:
        recs.append(Recommendation(ExerciseKind.SCHEME_COMPLETION, "maintain-proficiency"))
    return recs


@dataclass(frozen=True)
class NoiseModel:
    """Operator error: independent Gaussian pitch/yaw and depth perturbation."""

    angular_sigma: float = 0.0
    depth_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.angular_sigma < 0 or self.depth_sigma < 0:
            raise InvalidParams("noise sigmas must be >= 0")


@dataclass(frozen=True)
class ProtocolDefinition:
    """Named core-target list in normalized gland coordinates (u, v, w)."""

    name: str
    targets: tuple[tuple[float, float, float], ...]


@dataclass(frozen=True)
class GlandSizeDistribution:
    """Per-trial gland: base semi-axes scaled by 1 + sigma * N(0,1) per axis."""

    base: ProstateModel
    semi_axis_sigma: float = 0.0


@dataclass(frozen=True)
class SchemeOutcome:
    name: str
    mean_sector_coverage: float
    mean_apex_coverage: float
    detection_probability: float
    trials: int
    ci_half_width: float
    skipped: bool = False
    infeasible_target: Optional[int] = None


@dataclass(frozen=True)
class ProtocolReport:
    tumor_radius: float
    trials: int
    seed: int
    schemes: tuple[SchemeOutcome, ...]


def _perturbed_model(dist: GlandSizeDistribution, rng: np.random.Generator) -> ProstateModel:
    base = dist.base
    if dist.semi_axis_sigma == 0.0:
        return base
    factors = np.clip(1.0 + dist.semi_axis_sigma * rng.standard_normal(3), 0.2, None)
    return ProstateModel(
        center=base.center,
        semi_axes=base.semi_axes * factors,
        orientation=base.orientation,
        apex_direction=base.apex_direction,
    )


def _draw_tumor_center(model: ProstateModel, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform over centers whose sphere fits in the gland (rejection).

    When no interior point has the required clearance (radius >= min
    semi-axis) the tumor sits at the gland center.
    """
    if radius >= float(np.min(model.semi_axes)):
        return model.center.copy()
    for _ in range(10000):
        q = rng.uniform(-1.0, 1.0, 3)
        if float(np.dot(q, q)) > 1.0:
            continue
        p = model.from_normalized(q)
        if distance_to_surface(model, p) >= radius:
            return p
    return model.center.copy()


def compare_protocols(
    schemes: Sequence[ProtocolDefinition],
    rig: ProbeRig,
    gun: GunParams,
    model_dist: GlandSizeDistribution,
    noise: NoiseModel,
    tumor_radius: float,
    trials: int,
    scheme12: Optional[SectorScheme12] = None,
) -> ProtocolReport:
    """Monte-Carlo comparison of biopsy protocols.

    Per trial: draw the gland size perturbation and a contained tumor, then
    per scheme solve the nominal pose for each target, perturb it with the
    noise model, fire, and accumulate coverage and detection. Deterministic
    for a fixed seed: trial t uses the substream seeded by (seed, t), so the
    estimates are independent of any execution order.
    """
    if trials < 1:
        raise InvalidParams("trials must be >= 1")
    if not schemes:
        raise InvalidParams("at least one scheme required")
    if tumor_radius <= 0:
        raise InvalidParams("tumor_radius must be positive")
    scheme12 = scheme12 or SectorScheme12()

    # feasibility pre-check against the base model
    feasible: list[bool] = []
    infeasible_idx: list[Optional[int]] = []
    for sch in schemes:
        bad = None
        for i, q in enumerate(sch.targets):
            try:
                solve_pose_for_target(rig, gun, model_dist.base.from_normalized(q))
            except InfeasibleTarget:
                bad = i
                break
        feasible.append(bad is None)
        infeasible_idx.append(bad)

    n_s = len(schemes)
    cov_sum = np.zeros(n_s)
    apex_sum = np.zeros(n_s)
    detect = np.zeros(n_s, dtype=np.int64)

    for t in range(trials):
        rng = np.random.default_rng([noise.seed, t])
        model_t = _perturbed_model(model_dist, rng)
        tumor = _draw_tumor_center(model_t, tumor_radius, rng)
        for s_idx, sch in enumerate(schemes):
            if not feasible[s_idx]:
                continue
            sectors = set()
            hit = False
            for q in sch.targets:
                try:
                    pose, depth = solve_pose_for_target(rig, gun, model_t.from_normalized(q))
                except InfeasibleTarget:
                    continue  # transiently unreachable under this trial's gland
                if noise.angular_sigma > 0.0 or noise.depth_sigma > 0.0:
                    pose = clamp_pose(
                        rig,
                        ProbePose(
                            pitch=pose.pitch + noise.angular_sigma * rng.standard_normal(),
                            yaw=pose.yaw + noise.angular_sigma * rng.standard_normal(),
                            roll=pose.roll,
                            insertion=pose.insertion,
                        ),
                    )
                    depth = min(gun.max_depth, max(0.0, depth + noise.depth_sigma * rng.standard_normal()))
                core = biopsy.fire(rig, pose, depth, gun, model_t, scheme12, fired_at=0.0)
                if core.sector is not None:
                    sectors.add(core.sector)
                if point_segment_distance(tumor, core.p0, core.p1) <= tumor_radius:
                    hit = True
            cov_sum[s_idx] += len(sectors) / len(ALL_SECTORS)
            apex_sum[s_idx] += len(sectors & set(APEX_SECTORS)) / len(APEX_SECTORS)
            if hit:
                detect[s_idx] += 1

    outcomes = []
    for i, sch in enumerate(schemes):
        if not feasible[i]:
            outcomes.append(
                SchemeOutcome(sch.name, 0.0, 0.0, 0.0, 0, 0.0, skipped=True, infeasible_target=infeasible_idx[i])
            )
            continue
        p = detect[i] / trials
        ci = 1.96 * math.sqrt(p * (1.0 - p) / trials)
        outcomes.append(
            SchemeOutcome(
                name=sch.name,
                mean_sector_coverage=float(cov_sum[i] / trials),
                mean_apex_coverage=float(apex_sum[i] / trials),
                detection_probability=float(p),
                trials=trials,
                ci_half_width=float(ci),
            )
        )
    return ProtocolReport(tumor_radius=tumor_radius, trials=trials, seed=noise.seed, schemes=tuple(outcomes))


def twelve_core_protocol(scheme: Optional[SectorScheme12] = None) -> ProtocolDefinition:
    """All 12 sector-centroid targets (normalized coordinates)."""
    scheme = scheme or SectorScheme12()
    ref = ProstateModel(center=np.zeros(3), semi_axes=np.ones(3))
    targets = tuple(
        tuple(ref.normalized(biopsy.sector_midpoint_target(ref, scheme, s))) for s in ALL_SECTORS
    )
    return ProtocolDefinition(name="twelve-core", targets=targets)


def sextant_protocol(scheme: Optional[SectorScheme12] = None) -> ProtocolDefinition:
    """Classic 6-core layout: medial tracks only, both sides, three zones."""
    scheme = scheme or SectorScheme12()
    ref = ProstateModel(center=np.zeros(3), semi_axes=np.ones(3))
    targets = tuple(
        tuple(ref.normalized(biopsy.sector_midpoint_target(ref, scheme, s)))
        for s in ALL_SECTORS
        if s.track.value == "medial"
    )
    return ProtocolDefinition(name="sextant", targets=targets)
