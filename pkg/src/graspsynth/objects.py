"""Synthetic graspable objects and scripted reference grasps.

Objects are primitive solids (desk scale, max extent 15 cm) sampled into
surface point clouds; scripted grasps close chosen fingers onto the solid
until each participating fingertip is within 2 mm of the surface, providing
ground-truth hand poses from which contact maps can be annotated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contact import ObjectCloud
from .errors import InvalidArgumentError, ScriptingFailureError
from .geometry import PrimitiveSolid, RigidTransform, SolidUnion
from .hand import (
    FingerCategory,
    HandPose,
    fk_state,
    rest_pose,
)
from .validation import check_points

DEFAULT_DENSITY = 500.0  # kg/m^3 when the spec gives no mass
MAX_EXTENT = 0.15
MIN_SAMPLES = 500
REACH_TOLERANCE = 0.002   # m, required fingertip-to-surface distance
CLOSE_TARGET_DEPTH = -0.0005  # m, aim slightly past contact so grasps grip

GRASP_STYLES = ("pinch", "tripod", "power")

_STYLE_FINGERS = {
    "pinch": (FingerCategory.THUMB, FingerCategory.INDEX),
    "tripod": (FingerCategory.THUMB, FingerCategory.INDEX, FingerCategory.MIDDLE),
    "power": tuple(FingerCategory),
}

# per finger fully-closed target angles (mcp, pip, dip) for the closure sweep;
# the longer fingers close deeper so thin objects stay reachable
_CLOSE_TARGET = {
    FingerCategory.THUMB: (1.4, 1.2, 1.05),
    FingerCategory.INDEX: (1.7, 1.5, 1.3),
    FingerCategory.MIDDLE: (1.8, 1.7, 1.5),
    FingerCategory.RING: (1.7, 1.5, 1.3),
    FingerCategory.PINKY: (1.65, 1.45, 1.25),
}
# fingers not taking part curl out of the way without touching the object
_AWAY_CURL = (1.7, 1.7, 1.3)


@dataclass(frozen=True)
class SolidObject:
    """A solid with its sampled surface cloud, mass and centre of mass."""

    cloud: ObjectCloud
    solid: object  # PrimitiveSolid or SolidUnion
    mass: float
    center_of_mass: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.mass) or self.mass <= 0:
            raise InvalidArgumentError(f"mass must be > 0, got {self.mass}")
        object.__setattr__(
            self, "center_of_mass", check_points(self.center_of_mass)[0]
        )
        worst = float(np.abs(self.solid.sdf(self.cloud.points)).max())
        if worst > 0.002:
            raise InvalidArgumentError(
                f"cloud strays {worst * 1000:.2f} mm from the solid surface"
            )

    def with_cloud(self, cloud: ObjectCloud) -> "SolidObject":
        return SolidObject(cloud, self.solid, self.mass, self.center_of_mass)


@dataclass(frozen=True)
class ObjectSpec:
    kind: str
    dimensions: tuple
    count: int = 3000
    seed: int = 0

    def __post_init__(self):
        probe = PrimitiveSolid(self.kind, self.dimensions)  # validates kind/dims
        lo, hi = probe.aabb()
        if float(np.max(hi - lo)) > MAX_EXTENT:
            raise InvalidArgumentError(
                f"object extent {float(np.max(hi - lo)):.3f} m exceeds {MAX_EXTENT} m"
            )
        if int(self.count) < MIN_SAMPLES:
            raise InvalidArgumentError(f"count must be >= {MIN_SAMPLES}")
        object.__setattr__(self, "dimensions", tuple(float(d) for d in self.dimensions))
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "seed", int(self.seed))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dimensions": list(self.dimensions),
            "count": self.count,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(data: dict) -> "ObjectSpec":
        return ObjectSpec(
            data["kind"], tuple(data["dimensions"]), data.get("count", 3000),
            data.get("seed", 0),
        )


def _sample_sphere(rng, radius, n):
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * radius


def _sample_box(rng, size, n):
    half = np.asarray(size) / 2.0
    areas = []
    faces = []
    for axis in range(3):
        u, v = [a for a in range(3) if a != axis]
        for sign in (1.0, -1.0):
            faces.append((axis, u, v, sign))
            areas.append(4.0 * half[u] * half[v])
    areas = np.asarray(areas) / sum(areas)
    pick = rng.choice(len(faces), size=n, p=areas)
    uv = rng.uniform(-1.0, 1.0, size=(n, 2))
    pts = np.empty((n, 3))
    for f, (axis, u, v, sign) in enumerate(faces):
        rows = pick == f
        pts[rows, axis] = sign * half[axis]
        pts[rows, u] = uv[rows, 0] * half[u]
        pts[rows, v] = uv[rows, 1] * half[v]
    return pts


def _sample_cylinder(rng, radius, height, n):
    side = 2.0 * np.pi * radius * height
    cap = np.pi * radius * radius
    pick = rng.choice(3, size=n, p=np.array([side, cap, cap]) / (side + 2 * cap))
    ang = rng.uniform(0.0, 2.0 * np.pi, size=n)
    pts = np.empty((n, 3))
    side_rows = pick == 0
    pts[side_rows, 0] = radius * np.cos(ang[side_rows])
    pts[side_rows, 1] = radius * np.sin(ang[side_rows])
    pts[side_rows, 2] = rng.uniform(-height / 2.0, height / 2.0, size=side_rows.sum())
    for which, sign in ((1, 1.0), (2, -1.0)):
        rows = pick == which
        rr = radius * np.sqrt(rng.uniform(0.0, 1.0, size=rows.sum()))
        pts[rows, 0] = rr * np.cos(ang[rows])
        pts[rows, 1] = rr * np.sin(ang[rows])
        pts[rows, 2] = sign * height / 2.0
    return pts


def _sample_capsule(rng, radius, length, n):
    side = 2.0 * np.pi * radius * length
    cap = 2.0 * np.pi * radius * radius
    pick = rng.choice(3, size=n, p=np.array([side, cap, cap]) / (side + 2 * cap))
    ang = rng.uniform(0.0, 2.0 * np.pi, size=n)
    pts = np.empty((n, 3))
    rows = pick == 0
    pts[rows, 0] = radius * np.cos(ang[rows])
    pts[rows, 1] = radius * np.sin(ang[rows])
    pts[rows, 2] = rng.uniform(-length / 2.0, length / 2.0, size=rows.sum())
    for which, sign in ((1, 1.0), (2, -1.0)):
        rows = pick == which
        c = rng.uniform(0.0, 1.0, size=rows.sum())  # cos of polar angle
        s = np.sqrt(1.0 - c * c)
        pts[rows, 0] = radius * s * np.cos(ang[rows])
        pts[rows, 1] = radius * s * np.sin(ang[rows])
        pts[rows, 2] = sign * (length / 2.0 + radius * c)
    return pts


def make_object(spec: ObjectSpec) -> SolidObject:
    """Area-weighted deterministic surface sampling of a primitive solid."""
    rng = np.random.default_rng(spec.seed)
    solid = PrimitiveSolid(spec.kind, spec.dimensions)
    if spec.kind == "sphere":
        pts = _sample_sphere(rng, spec.dimensions[0], spec.count)
    elif spec.kind == "box":
        pts = _sample_box(rng, spec.dimensions, spec.count)
    elif spec.kind == "cylinder":
        pts = _sample_cylinder(rng, *spec.dimensions, spec.count)
    else:
        pts = _sample_capsule(rng, *spec.dimensions, spec.count)
    mass = DEFAULT_DENSITY * solid.volume()
    return SolidObject(
        cloud=ObjectCloud(pts),
        solid=solid,
        mass=mass,
        center_of_mass=solid.pose.translation.copy(),
    )


# the benchmark's six shapes with their reference grasp styles
SHAPE_SUITE = (
    ("sphere_s", ObjectSpec("sphere", (0.03,)), "pinch"),
    ("sphere_m", ObjectSpec("sphere", (0.04,)), "tripod"),
    ("sphere_l", ObjectSpec("sphere", (0.05,)), "power"),
    ("box", ObjectSpec("box", (0.06, 0.06, 0.06)), "power"),
    ("cylinder", ObjectSpec("cylinder", (0.025, 0.10)), "power"),
    ("capsule", ObjectSpec("capsule", (0.02, 0.08)), "pinch"),
)


def suite_object(name: str, seed: int = 0) -> tuple:
    for label, spec, style in SHAPE_SUITE:
        if label == name:
            return make_object(ObjectSpec(spec.kind, spec.dimensions, spec.count, seed)), style
    raise InvalidArgumentError(f"unknown suite shape {name!r}")


# ---------------------------------------------------------------------------
# Scripted reference grasps
# ---------------------------------------------------------------------------

def _object_half_extent(solid, direction: np.ndarray) -> float:
    """Support distance of the solid from its centre along a direction."""
    lo, hi = solid.aabb()
    center = (lo + hi) / 2.0
    corners = np.array(
        [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
    )
    return float(((corners - center) @ direction).max())


def _placement(obj: SolidObject, style: str) -> HandPose:
    """Hand placed so the object sits in front of the palm, ready to close.

    The hand is oriented with its knuckle line along the object's longest
    axis (so power grasps wrap cylinders and capsules across the fingers)
    and the palm offset palmar-ward by the object's half extent.
    """
    lo, hi = obj.solid.aabb()
    extents = hi - lo
    long_axis = int(np.argmax(extents))

    # columns are the world directions of the hand's x (knuckles), y
    # (fingers), z (palmar) axes
    if extents[long_axis] - extents.min() > 1e-9:
        world_x = np.zeros(3)
        world_x[long_axis] = 1.0
        remaining = [a for a in range(3) if a != long_axis]
        world_y = np.zeros(3)
        world_y[remaining[0]] = 1.0
        world_z = np.cross(world_x, world_y)
        R = np.stack([world_x, world_y, world_z], axis=1)
    else:
        R = np.eye(3)

    palmar_world = R @ np.array([0.0, 0.0, 1.0])
    half = _object_half_extent(obj.solid, -palmar_world)
    center = (lo + hi) / 2.0

    if style == "power":
        q = np.array([0.005, 0.075, 0.016 + half])
    elif style == "tripod":
        q = np.array([0.030, 0.095, 0.020 + half])
    else:  # pinch
        q = np.array([0.042, 0.085, 0.023 + half])
    pose = rest_pose()
    pose.rotation = np.zeros(3)
    pose.translation = center - R @ q
    from .geometry import axis_angle_from_rotation

    pose.rotation = axis_angle_from_rotation(R)
    return pose


def _with_finger_joints(pose: HandPose, cat: FingerCategory, mcp, pip, dip) -> HandPose:
    out = pose.copy()
    f = int(cat)
    out.joints[4 * f + 0] = mcp
    out.joints[4 * f + 2] = pip
    out.joints[4 * f + 3] = dip
    return out


def _tip_surface_distance(obj: SolidObject, pose: HandPose, cat: FingerCategory) -> float:
    state = fk_state(pose)
    tips = state.surface.points[state.surface.tip_indices(cat)]
    return float(obj.solid.sdf(tips).min())


def _close_finger(obj: SolidObject, pose: HandPose, cat: FingerCategory):
    """Smallest closure scale bringing the fingertip within reach tolerance."""
    rest = rest_pose().joints
    f = int(cat)
    start = np.array([rest[4 * f], rest[4 * f + 2], rest[4 * f + 3]])
    target = np.asarray(_CLOSE_TARGET[cat])

    def at(scale: float) -> HandPose:
        angles = start + scale * (target - start)
        return _with_finger_joints(pose, cat, *angles)

    def dist(scale: float) -> float:
        return _tip_surface_distance(obj, at(scale), cat)

    # close until the tip sits a hair past the surface (a zero-force kiss
    # cannot resist gravity); if the sweep never gets that deep, settle for
    # the first crossing of the reach tolerance
    def first_crossing(threshold: float):
        lo_s, hi_s = 0.0, None
        previous = 0.0
        for step in range(41):
            s = step / 40.0
            if dist(s) <= threshold:
                hi_s = s
                lo_s = previous
                break
            previous = s
        if hi_s is None:
            return None
        for _ in range(30):
            mid = (lo_s + hi_s) / 2.0
            if dist(mid) <= threshold:
                hi_s = mid
            else:
                lo_s = mid
        return hi_s

    s_hit = first_crossing(CLOSE_TARGET_DEPTH)
    if s_hit is None:
        s_hit = first_crossing(REACH_TOLERANCE)
    if s_hit is None:
        return None
    return at(s_hit)


def save_object(obj: SolidObject, directory) -> None:
    """cloud.ply (points plus any contact labels) and solid.json."""
    from pathlib import Path

    from .contact import save_contact_map
    from .io import dump_json

    directory = Path(directory)
    save_contact_map(obj.cloud, directory / "cloud.ply")
    dump_json(
        {
            "solid": obj.solid.to_dict(),
            "mass": obj.mass,
            "center_of_mass": obj.center_of_mass.tolist(),
        },
        directory / "solid.json",
    )


def load_object(directory) -> SolidObject:
    from pathlib import Path

    from .contact import load_contact_map
    from .geometry import solid_from_dict
    from .io import load_json

    directory = Path(directory)
    cloud = load_contact_map(directory / "cloud.ply")
    meta = load_json(directory / "solid.json")
    return SolidObject(
        cloud=cloud,
        solid=solid_from_dict(meta["solid"]),
        mass=float(meta["mass"]),
        center_of_mass=np.asarray(meta["center_of_mass"], dtype=np.float64),
    )


def scripted_reference_grasp(obj: SolidObject, style: str) -> HandPose:
    """Kinematic closure grasp giving ground-truth contact for annotation.

    The palm parks at a canonical offset for the style, uninvolved fingers
    curl away, and each participating finger flexes along a fixed synergy
    until its tip is within 2 mm of the surface.
    """
    if style not in GRASP_STYLES:
        raise InvalidArgumentError(f"unknown grasp style {style!r}")
    participating = _STYLE_FINGERS[style]
    pose = _placement(obj, style)
    for cat in FingerCategory:
        if cat not in participating:
            pose = _with_finger_joints(pose, cat, *_AWAY_CURL)
    for cat in participating:
        closed = _close_finger(obj, pose, cat)
        if closed is None:
            raise ScriptingFailureError(
                f"{cat.name} fingertip cannot reach within "
                f"{REACH_TOLERANCE * 1000:.0f} mm for style {style!r}"
            )
        pose = closed
    return pose
