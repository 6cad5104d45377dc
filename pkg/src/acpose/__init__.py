"""Relative pose from a single affine correspondence with monocular depth."""
from .errors import (
    CheiralityFailure,
    DegenerateConfiguration,
    DegenerateFrame,
    DegenerateRays,
    DegenerateTranslation,
    GenerationFailure,
    InsufficientData,
    InvalidDepth,
    InvalidNormal,
    NoModelFound,
    NumericalFailure,
    OutOfBounds,
    ParseError,
    PoseError,
    SchemaError,
)
from .essential import decompose_essential, eight_point, triangulate_linear
from .geometry import (
    AffineCorrespondence,
    CameraModel,
    DepthAffineMatch,
    DepthObservation,
    LiftedCorrespondence,
    LocalAffineFrame,
    PinholeCamera,
    PoseWithScale,
    essential_from_pose,
    lift,
    rotation_error_deg,
    sampson_error_px,
    translation_error_deg,
)
from .ransac import RansacConfig, RobustResult, classify_inliers, ransac_1ac_d, required_iterations
from .solvers import SolverVariant, orthonorm, solve, solve_proposed, solve_umeyama
from .synthetic import NoiseConfig, SceneConfig, add_noise, contaminate, generate_correspondences, generate_scene

__version__ = "0.1.0"
