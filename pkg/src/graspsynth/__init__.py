"""Fingertip contact-map annotation and directional-consistency grasp
optimization for a procedural differentiable hand, with penetration and
displacement metrics for evaluating the resulting grasps."""

from .contact import ContactLabel, ObjectCloud, annotate, load_contact_map, save_contact_map
from .energy import (
    ContactIndex,
    DropConfig,
    EnergyReport,
    EnergyWeights,
    FingerWeights,
    GraspScorer,
    NullScorer,
)
from .errors import GraspSynthError
from .estimators import ContactAnnotator, GraspSynthesizer
from .hand import (
    FingerCategory,
    HandPose,
    HandSurface,
    fk_jacobian,
    forward_kinematics,
    rest_pose,
)
from .metrics import (
    MetricBundle,
    SimConfig,
    displacement,
    evaluate_grasp,
    penetration_depth,
    penetration_volume,
    success,
)
from .objects import (
    SHAPE_SUITE,
    ObjectSpec,
    SolidObject,
    make_object,
    scripted_reference_grasp,
)
from .optimizer import GraspResult, OptimConfig, StepSizes, optimize

__version__ = "0.1.0"

__all__ = [
    "ContactAnnotator",
    "ContactIndex",
    "ContactLabel",
    "DropConfig",
    "EnergyReport",
    "EnergyWeights",
    "FingerCategory",
    "FingerWeights",
    "GraspResult",
    "GraspScorer",
    "GraspSynthError",
    "GraspSynthesizer",
    "HandPose",
    "HandSurface",
    "MetricBundle",
    "NullScorer",
    "ObjectCloud",
    "ObjectSpec",
    "OptimConfig",
    "SHAPE_SUITE",
    "SimConfig",
    "SolidObject",
    "StepSizes",
    "annotate",
    "displacement",
    "evaluate_grasp",
    "fk_jacobian",
    "forward_kinematics",
    "load_contact_map",
    "make_object",
    "optimize",
    "penetration_depth",
    "penetration_volume",
    "rest_pose",
    "save_contact_map",
    "scripted_reference_grasp",
    "success",
]
