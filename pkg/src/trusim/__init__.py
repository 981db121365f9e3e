"""trusim: a transrectal-ultrasound prostate biopsy trainer.

Synthesizes 2D ultrasound images by slicing a 3D phantom volume under a
pivot-constrained virtual probe, records and scores biopsy series against a
12-sector scheme, and compares sampling protocols by Monte-Carlo simulation.
"""

from .anatomy import (
    ALL_SECTORS,
    APEX_SECTORS,
    ProstateModel,
    SectorId,
    SectorScheme12,
    Side,
    Track,
    Zone,
    classify_sector,
    contains,
    distance_to_surface,
    segment_gland_intersection,
)
from .analytics import (
    Exercise,
    ExerciseKind,
    ExerciseResult,
    GlandSizeDistribution,
    NoiseModel,
    ProtocolDefinition,
    ProtocolReport,
    Recommendation,
    SessionEvidence,
    SessionStats,
    compare_protocols,
    evaluate_exercise,
    recommend_exercises,
    session_stats,
    sextant_protocol,
    twelve_core_protocol,
)
from .biopsy import BiopsyCore, GunParams, fire, sector_midpoint_target, solve_pose_for_target
from .probe import FanGeometry, ProbePose, ProbeRig, clamp_pose, image_plane, needle_ray, pose_to_frame
from .reslice import (
    Image2D,
    ImagePlane,
    View,
    apply_fan_mask,
    canonical_plane,
    extract_slice,
    project_to_plane,
)
from .store import OperatorProfile, PhantomMeta, SessionRecord, SessionStore
from .volume import (
    PhantomParams,
    Volume3D,
    generate_phantom,
    load_volume,
    sample_trilinear,
    save_volume,
)

__version__ = "0.1.0"
