"""Grasp optimization loop: multi-direction initialization, first-order
descent of the scheduled energy, and candidate selection.

Each of d restarts aims the hand at the contact-map centroid along the
outward ray, rolled about the approach axis by 2*pi*j/d, then runs the same
seeded descent.  When d > 1 the winner is the candidate with the smallest
strictly positive penetration energy (a grasp that never touched the object
scores 0 and tells us nothing); if no candidate touched, the one with the
smallest contact distance wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .contact import ObjectCloud
from .energy import (
    ContactIndex,
    DropConfig,
    EnergyReport,
    EnergyWeights,
    FingerWeights,
    GraspScorer,
    NullScorer,
    evaluate_total,
)
from .errors import (
    DivergedError,
    EmptyContactMapError,
    InitializationFailureError,
    InvalidArgumentError,
    OptimizationFailureError,
)
from .geometry import (
    axis_angle_from_rotation,
    rotation_about_axis,
    rotation_from_axis_angle,
    unit,
)
from .hand import (
    FingerCategory,
    HandPose,
    N_PARAMS,
    approach_direction,
    clamp_joints,
    fk_state,
    middle_fingertip,
    pose_gradient,
    rest_pose,
)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
MAX_INIT_RETRIES = 5


@dataclass(frozen=True)
class StepSizes:
    """Per-group learning rates (the parameter vector mixes metres/radians)."""

    translation: float = 1e-3
    rotation: float = 5e-3
    joints: float = 5e-3

    def __post_init__(self):
        for name in ("translation", "rotation", "joints"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise InvalidArgumentError(f"step size {name} must be >= 0, got {v}")
            object.__setattr__(self, name, v)

    def as_vector(self) -> np.ndarray:
        lr = np.empty(N_PARAMS)
        lr[0:3] = self.translation
        lr[3:6] = self.rotation
        lr[6:] = self.joints
        return lr

    def to_dict(self) -> dict:
        return {
            "translation": self.translation,
            "rotation": self.rotation,
            "joints": self.joints,
        }


@dataclass(frozen=True)
class OptimConfig:
    iterations: int = 300
    directions: int = 8
    step_sizes: StepSizes = field(default_factory=StepSizes)
    weights: EnergyWeights = field(default_factory=EnergyWeights)
    drop: DropConfig = field(default_factory=DropConfig)
    finger_weights: FingerWeights = field(default_factory=FingerWeights)
    seed: int = 0
    init_distance: tuple = (0.05, 0.12)
    trajectory_every: int = 25  # 0 disables snapshots

    def __post_init__(self):
        if int(self.iterations) < 1:
            raise InvalidArgumentError(f"iterations must be >= 1, got {self.iterations}")
        if int(self.directions) < 1:
            raise InvalidArgumentError(f"directions must be >= 1, got {self.directions}")
        object.__setattr__(self, "iterations", int(self.iterations))
        object.__setattr__(self, "directions", int(self.directions))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "trajectory_every", int(self.trajectory_every))
        d_min, d_max = (float(x) for x in self.init_distance)
        if not (0.0 < d_min < d_max):
            raise InvalidArgumentError(
                f"init_distance must satisfy 0 < d_min < d_max, got {self.init_distance}"
            )
        object.__setattr__(self, "init_distance", (d_min, d_max))

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "directions": self.directions,
            "step_sizes": self.step_sizes.to_dict(),
            "weights": self.weights.to_dict(),
            "drop": {"probability": self.drop.probability, "seed": self.drop.seed},
            "finger_weights": self.finger_weights.to_list(),
            "seed": self.seed,
            "init_distance": list(self.init_distance),
            "trajectory_every": self.trajectory_every,
        }

    @staticmethod
    def from_dict(data: dict) -> "OptimConfig":
        kwargs = dict(data)
        if "step_sizes" in kwargs:
            kwargs["step_sizes"] = StepSizes(**kwargs["step_sizes"])
        if "weights" in kwargs:
            kwargs["weights"] = EnergyWeights(**kwargs["weights"])
        if "drop" in kwargs:
            kwargs["drop"] = DropConfig(**kwargs["drop"])
        if "finger_weights" in kwargs:
            kwargs["finger_weights"] = FingerWeights(tuple(kwargs["finger_weights"]))
        if "init_distance" in kwargs:
            kwargs["init_distance"] = tuple(kwargs["init_distance"])
        return OptimConfig(**kwargs)


@dataclass
class Candidate:
    direction: int
    pose: HandPose
    report: EnergyReport
    trajectory: list  # [(iteration, HandPose), ...]


@dataclass
class GraspResult:
    pose: HandPose
    candidates: list
    selected_index: int

    @property
    def selected(self) -> Candidate:
        return self.candidates[self.selected_index]

    @property
    def trajectory(self) -> list:
        return self.selected.trajectory

    def to_dict(self) -> dict:
        return {
            "pose": self.pose.to_dict(),
            "selected_index": self.selected_index,
            "candidates": [
                {
                    "direction": c.direction,
                    "pose": c.pose.to_dict(),
                    "energy": c.report.to_dict(),
                }
                for c in self.candidates
            ],
        }


def direction_rng(cfg: OptimConfig, direction: int):
    """Independent, reproducible stream for one restart."""
    return np.random.default_rng((cfg.seed, cfg.drop.seed, direction))


def _penetration_value(pose: HandPose, index: ContactIndex, cfg: OptimConfig) -> float:
    surface = fk_state(pose).surface
    total = evaluate_total(
        surface,
        index,
        cfg.weights,
        cfg.finger_weights,
        NullScorer(),
        iteration=0,
        total_iterations=cfg.iterations,
    )
    return total.report.pen


def _contact_pca_axis(contacted: np.ndarray, preferred: np.ndarray) -> np.ndarray:
    """Smallest principal axis of the contacted points, signed toward the
    preferred direction (lexicographic tie-break when orthogonal)."""
    rel = contacted - contacted.mean(axis=0)
    cov = rel.T @ rel / max(len(rel), 1)
    _, evecs = np.linalg.eigh(cov)
    axis = evecs[:, 0]
    s = float(axis @ preferred)
    if abs(s) > 1e-12:
        return axis * np.sign(s)
    k = int(np.argmax(np.abs(axis)))
    return axis * np.sign(axis[k])


def _approach_outward(cloud: ObjectCloud) -> np.ndarray:
    """Outward ray direction for placement, read off the contact map.

    Preference order:
      1. palm-side estimate: with thumb and finger patches both present,
         remove their opposition axis from each category centroid; what
         remains is the direction every patch presses against, i.e. where
         the palm must sit;
      2. pooled contact centroid relative to the object centre;
    either is overridden by the contacts' smallest principal axis when it
    disagrees strongly (straddling patches leave no palm information along
    their own span, e.g. a pinch across a long body).
    """
    contacted = cloud.points[cloud.contacted_indices()]
    center = cloud.points.mean(axis=0)
    scale = float(np.abs(cloud.points - center).max())

    candidate = None
    per_cat = {}
    for cat in FingerCategory:
        rows = cloud.category_indices(cat)
        if len(rows):
            per_cat[cat] = cloud.points[rows].mean(axis=0) - center
    others = [v for c, v in per_cat.items() if c != FingerCategory.THUMB]
    if FingerCategory.THUMB in per_cat and others:
        opposition = np.mean(others, axis=0) - per_cat[FingerCategory.THUMB]
        norm_o = np.linalg.norm(opposition)
        if norm_o > 1e-9:
            opposition /= norm_o
            residuals = [
                v - (v @ opposition) * opposition for v in per_cat.values()
            ]
            palm = np.mean(residuals, axis=0)
            if np.linalg.norm(palm) > 0.08 * scale:
                candidate = palm / np.linalg.norm(palm)
    if candidate is None:
        v = contacted.mean(axis=0) - center
        nv = float(np.linalg.norm(v))
        if nv > 1e-9:
            candidate = v / nv

    axis = _contact_pca_axis(
        contacted, candidate if candidate is not None else np.zeros(3)
    )
    if candidate is not None and abs(candidate @ axis) >= 0.5:
        return candidate
    return axis


def _roll_reference(cloud: ObjectCloud, centroid, approach) -> np.ndarray:
    """Object-anchored tangent direction fixing the zero-roll convention.

    Using the contacted point with the largest component perpendicular to
    the approach axis keeps the whole placement equivariant under rigid
    motions of the scene (a world-fixed convention would not be).
    """
    for pool in (cloud.contacted_indices(), np.arange(len(cloud.points))):
        rel = cloud.points[pool] - centroid
        perp = rel - np.outer(rel @ approach, approach)
        norms = np.linalg.norm(perp, axis=1)
        best = int(np.argmax(norms))  # first maximum: lowest index on ties
        if norms[best] > 1e-9:
            return perp[best] / norms[best]
    helper = np.array([1.0, 0.0, 0.0])
    if abs(approach[0]) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    return unit(np.cross(approach, helper))


APPROACH_PITCH = 0.9  # rad, tilts the palm toward the object at placement
# hand-frame centre of the curl volume (between palm and closing fingertips);
# the placement puts this point on the outward ray so the object ends up in
# front of the palm where the fingers actually close
GRASP_CENTER = np.array([0.005, 0.065, 0.040])


def _aim_vector() -> np.ndarray:
    """Hand-frame direction pointed down the approach ray at placement.

    Zero pitch aims the middle fingertip straight at the contact centroid;
    larger pitch rotates the palm toward the object while the fingertip
    stays on the ray.
    """
    forward = unit(np.asarray(approach_direction()))
    palmar = np.array([0.0, 0.0, 1.0])
    palmar = unit(palmar - forward * (palmar @ forward))
    return unit(np.cos(APPROACH_PITCH) * forward + np.sin(APPROACH_PITCH) * palmar)


def _approach_rotation(cloud, centroid, approach, direction, n_directions):
    """Rotation mapping the hand's aim direction onto the approach axis,
    rolled about it by 2*pi*direction/n_directions."""
    aim = _aim_vector()
    palmar = np.array([0.0, 0.0, 1.0])
    hand_ref = unit(palmar - aim * (palmar @ aim)) if abs(aim @ palmar) < 0.999 else unit(
        np.array([0.0, 1.0, 0.0]) - aim * (aim @ np.array([0.0, 1.0, 0.0]))
    )
    hand_frame = np.stack([aim, hand_ref, np.cross(aim, hand_ref)], axis=1)

    ref0 = _roll_reference(cloud, centroid, approach)
    roll = rotation_about_axis(approach, 2.0 * np.pi * direction / n_directions)
    ref = roll @ ref0
    world_frame = np.stack([approach, ref, np.cross(approach, ref)], axis=1)
    return world_frame @ hand_frame.T


def init_placement(
    cloud: ObjectCloud,
    direction: int,
    cfg: OptimConfig,
    rng,
    index: ContactIndex | None = None,
) -> HandPose:
    """Rest-pose hand aimed at the contact centroid from a random distance.

    The middle fingertip sits on the outward ray through the contacted-point
    centroid; the palm is rolled about the approach axis by 2*pi*j/d.  If the
    placement starts in penetration the distance is pushed out and retried.
    """
    if not 0 <= direction < cfg.directions:
        raise InvalidArgumentError(
            f"direction {direction} outside [0, {cfg.directions})"
        )
    contacted = cloud.contacted_indices()
    if contacted.size == 0:
        raise EmptyContactMapError("cannot place hand: contact map is empty")
    if index is None:
        index = ContactIndex(cloud)
    centroid = cloud.points[contacted].mean(axis=0)
    outward = _approach_outward(cloud)

    approach = -outward  # the hand aims down the ray toward the centroid
    rotation = _approach_rotation(cloud, centroid, approach, direction, cfg.directions)
    rot_vec = axis_angle_from_rotation(rotation)

    d_min, d_max = cfg.init_distance
    distance = float(rng.uniform(d_min, d_max))
    for attempt in range(MAX_INIT_RETRIES + 1):
        dist = distance + attempt * d_max
        pose = rest_pose()
        pose.rotation = rot_vec.copy()
        pose.translation = centroid + dist * outward - rotation @ GRASP_CENTER
        if _penetration_value(pose, index, cfg) == 0.0:
            return pose
    raise InitializationFailureError(
        f"no penetration-free placement after {MAX_INIT_RETRIES} retries"
    )


def optimize_single(
    cloud: ObjectCloud,
    cfg: OptimConfig,
    init_pose: HandPose,
    rng,
    index: ContactIndex | None = None,
    scorer: GraspScorer | None = None,
    direction: int = 0,
) -> Candidate:
    """One descent trajectory from a fixed initial pose.

    Runs cfg.iterations steps; every step recomputes correspondences,
    evaluates the scheduled total at the current iteration index, takes one
    adaptive-moment step, clamps joints, and keeps the rotation vector in
    its canonical range.  The returned report is a deterministic (drop-free)
    evaluation of the final pose.
    """
    if index is None:
        index = ContactIndex(cloud)
    scorer = scorer or NullScorer()
    lr = cfg.step_sizes.as_vector()
    # adaptive moments; the rotation block lives in body-frame increments and
    # the translation block uses one shared second moment, which keeps every
    # update equivariant under rigid motions of the scene
    m = np.zeros(N_PARAMS)
    v = np.zeros(N_PARAMS)
    pose = init_pose.copy()
    trajectory = []
    for i in range(cfg.iterations):
        if cfg.trajectory_every > 0 and i % cfg.trajectory_every == 0:
            trajectory.append((i, pose.copy()))
        state = fk_state(pose)
        total = evaluate_total(
            state.surface,
            index,
            cfg.weights,
            cfg.finger_weights,
            scorer,
            iteration=i,
            total_iterations=cfg.iterations,
            drop_cfg=cfg.drop,
            rng=rng,
            steer_direction_terms=True,
        )
        if not np.isfinite(total.report.total):
            raise DivergedError("energy is not finite", iteration=i)
        grad = pose_gradient(
            state, total.grad_points, total.grad_normals, rotation_frame="body"
        )
        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * grad
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * grad * grad
        v[0:3] = v[0:3].mean()
        m_hat = m / (1.0 - ADAM_BETA1 ** (i + 1))
        v_hat = v / (1.0 - ADAM_BETA2 ** (i + 1))
        step = lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        if not np.all(np.isfinite(step)):
            raise DivergedError("step is not finite", iteration=i)
        if not np.any(step):
            continue
        pose = pose.copy()
        pose.translation = pose.translation - step[0:3]
        rot = state.global_rotation @ rotation_from_axis_angle(-step[3:6])
        pose.rotation = axis_angle_from_rotation(rot)
        pose.joints = clamp_joints(pose.joints - step[6:])

    state = fk_state(pose)
    final = evaluate_total(
        state.surface,
        index,
        cfg.weights,
        cfg.finger_weights,
        scorer,
        iteration=cfg.iterations,
        total_iterations=cfg.iterations,
    )
    if not np.isfinite(final.report.total):
        raise DivergedError("final energy is not finite", iteration=cfg.iterations)
    if cfg.trajectory_every > 0:
        trajectory.append((cfg.iterations, pose.copy()))
    return Candidate(direction=direction, pose=pose, report=final.report, trajectory=trajectory)


def select_candidate(candidates: list) -> int:
    """Winner index: minimal positive penetration (ties -> lower direction);
    if every candidate has zero penetration, minimal contact distance."""
    if len(candidates) == 1:
        return 0
    order = sorted(range(len(candidates)), key=lambda i: candidates[i].direction)
    positive = [i for i in order if candidates[i].report.pen > 0.0]
    if positive:
        return min(positive, key=lambda i: candidates[i].report.pen)
    return min(order, key=lambda i: candidates[i].report.dis)


def optimize(
    cloud: ObjectCloud,
    cfg: OptimConfig,
    scorer: GraspScorer | None = None,
) -> GraspResult:
    """Full multi-direction optimization; deterministic given cfg.seed."""
    index = ContactIndex(cloud)
    candidates = []
    failures = []
    for j in range(cfg.directions):
        rng = direction_rng(cfg, j)
        try:
            init = init_placement(cloud, j, cfg, rng, index)
            candidates.append(
                optimize_single(cloud, cfg, init, rng, index, scorer, direction=j)
            )
        except DivergedError as exc:
            failures.append((j, exc))
    if not candidates:
        raise OptimizationFailureError(
            f"all {cfg.directions} candidates diverged: {failures}"
        )
    selected = select_candidate(candidates)
    return GraspResult(
        pose=candidates[selected].pose, candidates=candidates, selected_index=selected
    )
