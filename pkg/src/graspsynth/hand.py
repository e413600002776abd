"""Procedural differentiable hand: five 3-capsule fingers on a rounded-box
palm, posed by 26 parameters (translation 3, axis-angle rotation 3, joints 20).

Frames and conventions:
  * hand root frame: palm box centred at the origin, fingers extend +y,
    palmar surface faces +z, thumb on the +x side
  * each finger chain: MCP abduction (about local z), MCP flexion (about
    local x), PIP flexion, DIP flexion; positive flexion curls palmar
  * joint vector layout, finger-major (thumb, index, middle, ring, pinky):
    [mcp_flex, mcp_abd, pip_flex, dip_flex] * 5
  * surface template: fixed set of S=800 points with outward unit normals
    and a per-point region label (palm / per-finger tip / per-finger shaft)

The pose->surface map is smooth in all 26 parameters; `fk_jacobian` returns
its exact derivative and `pose_gradient` the matching adjoint product used
by the optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache

import numpy as np

from .errors import InvalidArgumentError
from .geometry import (
    PrimitiveSolid,
    RigidTransform,
    axis_angle_from_rotation,
    rotation_from_axis_angle,
    rotation_jacobian_axis_angle,
    unit,
)
from .validation import check_vector

N_JOINTS = 20
N_PARAMS = 26  # translation 3 + rotation 3 + joints 20

FLEXION_LIMITS = (0.0, 1.8)        # rad
ABDUCTION_LIMITS = (-0.35, 0.35)   # rad
REST_FLEXION = 0.2                 # slight curl of every flexion joint

REGION_PALM = 0
_TIP_BASE = 1      # labels 1..5 = fingertip regions
_SHAFT_BASE = 6    # labels 6..10 = finger shaft regions
TIP_FRACTION = 0.30  # distal fraction of the distal capsule that counts as tip
PAD_FRACTION = 0.72  # share of shaft samples on the palmar half


class FingerCategory(IntEnum):
    THUMB = 0
    INDEX = 1
    MIDDLE = 2
    RING = 3
    PINKY = 4


FINGER_NAMES = tuple(c.name.lower() for c in FingerCategory)

# per finger: base position (m), base yaw about z (rad), base roll about the
# finger axis (rad), segment lengths (m), capsule radius (m), point budget
# (proximal, middle, distal)
_FINGER_LAYOUT = {
    FingerCategory.THUMB: {
        "base": (0.038, -0.018, 0.002),
        "yaw": -1.0,
        "roll": -np.pi / 4,  # base frame tilted toward the palm
        "lengths": (0.040, 0.030, 0.026),
        "radius": 0.0095,
        "budget": (34, 24, 72),
    },
    FingerCategory.INDEX: {
        "base": (0.030, 0.0425, 0.0),
        "yaw": 0.0,
        "roll": 0.0,
        "lengths": (0.038, 0.024, 0.020),
        "radius": 0.008,
        "budget": (34, 24, 72),
    },
    FingerCategory.MIDDLE: {
        "base": (0.010, 0.0425, 0.0),
        "yaw": 0.0,
        "roll": 0.0,
        "lengths": (0.042, 0.026, 0.022),
        "radius": 0.008,
        "budget": (34, 24, 72),
    },
    FingerCategory.RING: {
        "base": (-0.010, 0.0425, 0.0),
        "yaw": 0.0,
        "roll": 0.0,
        "lengths": (0.038, 0.024, 0.020),
        "radius": 0.0075,
        "budget": (34, 24, 72),
    },
    FingerCategory.PINKY: {
        "base": (-0.030, 0.0425, 0.0),
        "yaw": 0.0,
        "roll": 0.0,
        "lengths": (0.030, 0.019, 0.016),
        "radius": 0.007,
        "budget": (34, 24, 72),
    },
}

_PALM_SIZE = (0.080, 0.085, 0.026)  # full extents
_PALM_ROUNDING = 0.006
_PALM_POINTS = 150

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def joint_limits():
    """(lower, upper) arrays of shape (20,)."""
    lower = np.empty(N_JOINTS)
    upper = np.empty(N_JOINTS)
    for f in range(5):
        lower[4 * f + 0], upper[4 * f + 0] = FLEXION_LIMITS
        lower[4 * f + 1], upper[4 * f + 1] = ABDUCTION_LIMITS
        lower[4 * f + 2], upper[4 * f + 2] = FLEXION_LIMITS
        lower[4 * f + 3], upper[4 * f + 3] = FLEXION_LIMITS
    return lower, upper


def clamp_joints(joints) -> np.ndarray:
    lower, upper = joint_limits()
    return np.clip(np.asarray(joints, dtype=np.float64), lower, upper)


@dataclass
class HandPose:
    """Global translation (m), axis-angle rotation (rad), joint angles (rad)."""

    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    joints: np.ndarray = field(default_factory=lambda: np.zeros(N_JOINTS))

    def __post_init__(self):
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3)
        self.joints = np.asarray(self.joints, dtype=np.float64).reshape(N_JOINTS)

    def copy(self) -> "HandPose":
        return HandPose(self.translation.copy(), self.rotation.copy(), self.joints.copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.translation, self.rotation, self.joints])

    @staticmethod
    def from_vector(vec) -> "HandPose":
        vec = check_vector(vec, N_PARAMS, "pose vector")
        return HandPose(vec[0:3], vec[3:6], vec[6:])

    def to_dict(self) -> dict:
        return {
            "translation": self.translation.tolist(),
            "rotation": self.rotation.tolist(),
            "joints": self.joints.tolist(),
        }

    @staticmethod
    def from_dict(data: dict) -> "HandPose":
        return HandPose(
            np.asarray(data["translation"], dtype=np.float64),
            np.asarray(data["rotation"], dtype=np.float64),
            np.asarray(data["joints"], dtype=np.float64),
        )


def rest_pose() -> HandPose:
    """Zero global pose, slight flexion at every flexion joint."""
    joints = np.zeros(N_JOINTS)
    for f in range(5):
        joints[4 * f + 0] = REST_FLEXION
        joints[4 * f + 2] = REST_FLEXION
        joints[4 * f + 3] = REST_FLEXION
    return HandPose(joints=joints)


@dataclass
class HandSurface:
    """Posed surface samples with outward unit normals and region labels.

    region codes: 0 palm, 1..5 fingertip of category c-1, 6..10 shaft of
    category c-6.  The tip region is geometrically part of the finger, so
    finger_indices(c) includes tip_indices(c).
    """

    points: np.ndarray
    normals: np.ndarray
    region: np.ndarray

    def region_tables(self):
        """Per-category (tip_indices, finger_indices), memoized; region
        labels never change for a given surface."""
        tables = getattr(self, "_region_tables", None)
        if tables is None:
            tips = []
            fingers = []
            for c in range(5):
                tips.append(np.flatnonzero(self.region == _TIP_BASE + c))
                mask = (self.region == _TIP_BASE + c) | (self.region == _SHAFT_BASE + c)
                fingers.append(np.flatnonzero(mask))
            tables = (tuple(tips), tuple(fingers))
            self._region_tables = tables
        return tables

    def tip_indices(self, category: FingerCategory) -> np.ndarray:
        return self.region_tables()[0][int(category)]

    def finger_indices(self, category: FingerCategory) -> np.ndarray:
        return self.region_tables()[1][int(category)]

    def palm_indices(self) -> np.ndarray:
        return np.flatnonzero(self.region == REGION_PALM)


# ---------------------------------------------------------------------------
# Template construction (deterministic low-discrepancy sampling)
# ---------------------------------------------------------------------------

def _split_by_area(total: int, areas) -> list:
    areas = np.asarray(areas, dtype=np.float64)
    raw = areas / areas.sum() * total
    counts = np.floor(raw).astype(int)
    remainder = raw - counts
    for i in np.argsort(-remainder)[: total - counts.sum()]:
        counts[i] += 1
    return counts.tolist()


def _capsule_points(length: float, radius: float, n: int):
    """Sample a capsule whose axis runs from (0,0,0) to (0,L,0).

    Side points form stratified rings with evenly spaced azimuths (per-ring
    phase offsets avoid seams) so the side's net normal cancels exactly;
    cap points are rings of equal-area latitude bands with the same balance,
    leaving each cap's net normal along the axis as for the true surface.
    """
    side_area = 2.0 * np.pi * radius * length
    cap_area = 2.0 * np.pi * radius * radius
    n_side, n_prox, n_dist = _split_by_area(n, [side_area, cap_area, cap_area])
    pts, nrm = [], []

    def ring(center, axis_u, axis_v, ring_radius, count, phase):
        for k in range(count):
            ang = 2.0 * np.pi * (k / count + phase)
            d = np.cos(ang) * axis_u + np.sin(ang) * axis_v
            yield center + d * ring_radius, d

    ex = np.array([1.0, 0.0, 0.0])
    ey = np.array([0.0, 1.0, 0.0])
    ez = np.array([0.0, 0.0, 1.0])

    # shaft rings are denser on the palmar (+z) half: fingers interact with
    # objects through their pads, and the imbalance gives the finger regions
    # an outward-palmar net normal that makes normal-alignment energies
    # informative about hand orientation
    per_ring = 8
    n_rings = max(1, round(n_side / per_ring))
    counts = _split_by_area(n_side, [1.0] * n_rings)
    for r_i, count in enumerate(counts):
        if count == 0:
            continue
        y = (r_i + 0.5) / n_rings * length
        n_palmar = int(round(PAD_FRACTION * count))
        n_dorsal = count - n_palmar
        for half_count, base_ang in ((n_palmar, 0.0), (n_dorsal, np.pi)):
            for k in range(half_count):
                ang = base_ang + np.pi * (k + 0.5) / half_count if half_count else 0.0
                d = np.cos(ang) * ex + np.sin(ang) * ez
                pts.append(ey * y + d * radius)
                nrm.append(d)

    for n_cap, center_y, sign in ((n_dist, length, 1.0), (n_prox, 0.0, -1.0)):
        if n_cap == 0:
            continue
        cap_center = ey * center_y
        cap_rings = max(1, round(np.sqrt(n_cap / 3.0)))
        # equal-area latitude bands: cos(elev) uniform in (0, 1)
        cosines = [(r_i + 0.5) / cap_rings for r_i in range(cap_rings)]
        band_counts = _split_by_area(n_cap, [np.sqrt(1.0 - c * c) + 1e-9 for c in cosines])
        for r_i, (c, count) in enumerate(zip(cosines, band_counts)):
            if count == 0:
                continue
            s = np.sqrt(max(1.0 - c * c, 0.0))
            n_palmar = int(round(PAD_FRACTION * count)) if sign > 0 else count // 2
            n_dorsal = count - n_palmar
            for half_count, base_ang in ((n_palmar, 0.0), (n_dorsal, np.pi)):
                for k in range(half_count):
                    ang = base_ang + np.pi * (k + 0.5) / half_count
                    d = np.cos(ang) * ex + np.sin(ang) * ez
                    d_full = d * s + ey * (sign * c)
                    pts.append(cap_center + d_full * radius)
                    nrm.append(d_full)
    return np.array(pts), np.array(nrm)


def _palm_points(size, rounding: float, n: int):
    """Flat-face samples of a rounded box (core box offset by the rounding)."""
    half = np.asarray(size) / 2.0
    inner = half - rounding
    faces = []
    for axis in range(3):
        u, v = [a for a in range(3) if a != axis]
        area = 4.0 * inner[u] * inner[v]
        for sign in (1.0, -1.0):
            faces.append((axis, u, v, sign, area))
    counts = _split_by_area(n, [f[4] for f in faces])
    pts, nrm = [], []
    for (axis, u, v, sign, _), count in zip(faces, counts):
        for i in range(count):
            a = ((i + 0.5) / count * 2.0 - 1.0) * inner[u]
            b = (((i * _GOLDEN) % 1.0) * 2.0 - 1.0) * inner[v]
            p = np.zeros(3)
            p[axis] = sign * half[axis]
            p[u], p[v] = a, b
            d = np.zeros(3)
            d[axis] = sign
            pts.append(p)
            nrm.append(d)
    return np.array(pts), np.array(nrm)


@dataclass(frozen=True)
class _Bone:
    finger: int       # -1 for palm
    segment: int      # 0 proximal, 1 middle, 2 distal; -1 palm
    length: float
    radius: float
    point_slice: slice


@dataclass(frozen=True)
class HandTemplate:
    points_local: np.ndarray   # (S, 3) in bone frames
    normals_local: np.ndarray  # (S, 3)
    bone_of_point: np.ndarray  # (S,)
    region: np.ndarray         # (S,) uint8
    bones: tuple
    size: int


def _build_template() -> HandTemplate:
    pts, nrm, bone_ids, region, bones = [], [], [], [], []

    palm_pts, palm_nrm = _palm_points(_PALM_SIZE, _PALM_ROUNDING, _PALM_POINTS)
    start = 0
    bones.append(_Bone(-1, -1, 0.0, 0.0, slice(start, start + len(palm_pts))))
    start += len(palm_pts)
    pts.append(palm_pts)
    nrm.append(palm_nrm)
    bone_ids.append(np.zeros(len(palm_pts), dtype=np.int64))
    region.append(np.full(len(palm_pts), REGION_PALM, dtype=np.uint8))

    for cat in FingerCategory:
        layout = _FINGER_LAYOUT[cat]
        radius = layout["radius"]
        for seg in range(3):
            length = layout["lengths"][seg]
            count = layout["budget"][seg]
            p, d = _capsule_points(length, radius, count)
            bone_index = len(bones)
            bones.append(_Bone(int(cat), seg, length, radius, slice(start, start + count)))
            start += count
            pts.append(p)
            nrm.append(d)
            bone_ids.append(np.full(count, bone_index, dtype=np.int64))
            if seg == 2:
                # tip = distal TIP_FRACTION of the whole distal capsule
                total_len = length + 2.0 * radius
                threshold = (length + radius) - TIP_FRACTION * total_len
                lab = np.where(
                    p[:, 1] >= threshold, _TIP_BASE + int(cat), _SHAFT_BASE + int(cat)
                ).astype(np.uint8)
            else:
                lab = np.full(count, _SHAFT_BASE + int(cat), dtype=np.uint8)
            region.append(lab)

    return HandTemplate(
        points_local=np.concatenate(pts),
        normals_local=np.concatenate(nrm),
        bone_of_point=np.concatenate(bone_ids),
        region=np.concatenate(region),
        bones=tuple(bones),
        size=start,
    )


@lru_cache(maxsize=1)
def get_template() -> HandTemplate:
    return _build_template()


@lru_cache(maxsize=1)
def region_index_tables():
    """(tip_indices, finger_indices) per category, template order; the
    region labels are pose-invariant so these never change."""
    tpl = get_template()
    tips = []
    fingers = []
    for cat in FingerCategory:
        tips.append(np.flatnonzero(tpl.region == _TIP_BASE + int(cat)))
        mask = (tpl.region == _TIP_BASE + int(cat)) | (
            tpl.region == _SHAFT_BASE + int(cat)
        )
        fingers.append(np.flatnonzero(mask))
    return tuple(tips), tuple(fingers)


def _finger_base_rotation(cat: FingerCategory) -> np.ndarray:
    layout = _FINGER_LAYOUT[cat]
    Rz = rotation_from_axis_angle(np.array([0.0, 0.0, layout["yaw"]]))
    Ry = rotation_from_axis_angle(np.array([0.0, layout["roll"], 0.0]))
    return Rz @ Ry


@lru_cache(maxsize=1)
def _finger_bases():
    return {
        cat: (np.asarray(_FINGER_LAYOUT[cat]["base"]), _finger_base_rotation(cat))
        for cat in FingerCategory
    }


# ---------------------------------------------------------------------------
# Forward kinematics
# ---------------------------------------------------------------------------

_RX_AXIS = np.array([1.0, 0.0, 0.0])
_RZ_AXIS = np.array([0.0, 0.0, 1.0])


def _rx(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rz(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass
class FkState:
    """Everything the optimizer needs for one pose evaluation."""

    pose: HandPose
    surface: HandSurface
    points_root: np.ndarray    # (S, 3) pre-global-pose
    normals_root: np.ndarray
    global_rotation: np.ndarray        # (3, 3)
    bone_frames: list                  # (R, t) per bone, root coords
    joint_axes: np.ndarray             # (20, 3) root coords
    joint_origins: np.ndarray          # (20, 3) root coords

    @property
    def global_rotation_jac(self) -> np.ndarray:
        # d(Rg)/dr_i, only needed for world-frame gradients and fk_jacobian
        return rotation_jacobian_axis_angle(self.pose.rotation)


def _validate_pose(pose: HandPose) -> HandPose:
    vec = pose.as_vector()
    if not np.all(np.isfinite(vec)):
        raise InvalidArgumentError("pose contains non-finite entries")
    clamped = pose.copy()
    clamped.joints = clamp_joints(pose.joints)
    return clamped


def fk_state(pose: HandPose) -> FkState:
    pose = _validate_pose(pose)
    tpl = get_template()
    bases = _finger_bases()

    frames = [(np.eye(3), np.zeros(3))]  # palm
    joint_axes = np.zeros((N_JOINTS, 3))
    joint_origins = np.zeros((N_JOINTS, 3))
    for cat in FingerCategory:
        f = int(cat)
        mcp_flex, mcp_abd, pip_flex, dip_flex = pose.joints[4 * f : 4 * f + 4]
        base_pos, base_rot = bases[cat]
        lengths = _FINGER_LAYOUT[cat]["lengths"]

        A1 = base_rot @ _rz(mcp_abd)
        A2 = A1 @ _rx(mcp_flex)
        joint_axes[4 * f + 1] = base_rot @ _RZ_AXIS
        joint_origins[4 * f + 1] = base_pos
        joint_axes[4 * f + 0] = A1 @ _RX_AXIS
        joint_origins[4 * f + 0] = base_pos
        o1 = base_pos + A2 @ np.array([0.0, lengths[0], 0.0])
        A3 = A2 @ _rx(pip_flex)
        joint_axes[4 * f + 2] = A2 @ _RX_AXIS
        joint_origins[4 * f + 2] = o1
        o2 = o1 + A3 @ np.array([0.0, lengths[1], 0.0])
        A4 = A3 @ _rx(dip_flex)
        joint_axes[4 * f + 3] = A3 @ _RX_AXIS
        joint_origins[4 * f + 3] = o2
        frames.extend([(A2, base_pos), (A3, o1), (A4, o2)])

    points_root = np.empty((tpl.size, 3))
    normals_root = np.empty((tpl.size, 3))
    for bidx, bone in enumerate(tpl.bones):
        R, t = frames[bidx]
        sl = bone.point_slice
        points_root[sl] = tpl.points_local[sl] @ R.T + t
        normals_root[sl] = tpl.normals_local[sl] @ R.T

    Rg = rotation_from_axis_angle(pose.rotation)
    points = points_root @ Rg.T + pose.translation
    normals = normals_root @ Rg.T
    surface = HandSurface(points=points, normals=normals, region=tpl.region)
    return FkState(
        pose=pose,
        surface=surface,
        points_root=points_root,
        normals_root=normals_root,
        global_rotation=Rg,
        bone_frames=frames,
        joint_axes=joint_axes,
        joint_origins=joint_origins,
    )


def forward_kinematics(pose: HandPose) -> HandSurface:
    return fk_state(pose).surface


def _finger_descendants(tpl: HandTemplate):
    """Point index ranges affected by each joint column."""
    spans = {}
    for f in range(5):
        bone0 = 1 + 3 * f
        prox, mid, dist = tpl.bones[bone0 : bone0 + 3]
        whole = slice(prox.point_slice.start, dist.point_slice.stop)
        mid_down = slice(mid.point_slice.start, dist.point_slice.stop)
        spans[4 * f + 0] = whole        # mcp flexion
        spans[4 * f + 1] = whole        # mcp abduction
        spans[4 * f + 2] = mid_down     # pip
        spans[4 * f + 3] = dist.point_slice  # dip
    return spans


def fk_jacobian(pose: HandPose):
    """Exact derivative of the surface w.r.t. the 26 pose parameters.

    Returns (points_jac, normals_jac), each of shape (S, 3, 26) with
    parameter columns ordered [t_x, t_y, t_z, r_x, r_y, r_z, joints...].
    """
    state = fk_state(pose)
    tpl = get_template()
    S = tpl.size
    Jp = np.zeros((S, 3, N_PARAMS))
    Jn = np.zeros((S, 3, N_PARAMS))

    Jp[:, 0, 0] = Jp[:, 1, 1] = Jp[:, 2, 2] = 1.0
    for i in range(3):
        Jp[:, :, 3 + i] = state.points_root @ state.global_rotation_jac[i].T
        Jn[:, :, 3 + i] = state.normals_root @ state.global_rotation_jac[i].T

    spans = _finger_descendants(tpl)
    Rg = state.global_rotation
    for col, span in spans.items():
        axis = state.joint_axes[col]
        origin = state.joint_origins[col]
        dp_root = np.cross(axis, state.points_root[span] - origin)
        dn_root = np.cross(axis, state.normals_root[span])
        Jp[span, :, 6 + col] = dp_root @ Rg.T
        Jn[span, :, 6 + col] = dn_root @ Rg.T
    return Jp, Jn


def _cross_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cross product without np.cross's axis plumbing overhead."""
    out = np.empty_like(a)
    out[:, 0] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    out[:, 1] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
    out[:, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return out


@lru_cache(maxsize=1)
def _bone_starts() -> np.ndarray:
    return np.array([b.point_slice.start for b in get_template().bones])


def pose_gradient(
    state: FkState, grad_points, grad_normals=None, rotation_frame: str = "world"
) -> np.ndarray:
    """Adjoint product J^T g without materializing the full Jacobian.

    rotation_frame selects the rotation block's coordinates: "world" is the
    derivative w.r.t. the pose's axis-angle vector (matches fk_jacobian and
    finite differences); "body" is the derivative w.r.t. a right-multiplied
    rotation increment, which the optimizer uses because body increments are
    equivariant under rigid motions of the scene.
    """
    tpl = get_template()
    gp = np.asarray(grad_points, dtype=np.float64)
    g = np.zeros(N_PARAMS)
    g[0:3] = gp.sum(axis=0)
    gn = None if grad_normals is None else np.asarray(grad_normals, dtype=np.float64)
    Rg = state.global_rotation
    gp_root = gp @ Rg            # rows become Rg^T gp
    gn_root = None if gn is None else gn @ Rg
    # moment for joint k over its descendant points:
    #   sum (p - o) x g  =  sum p x g  -  o x sum g
    # accumulated from per-bone partial sums
    starts = _bone_starts()
    cross_p = _cross_rows(state.points_root, gp_root)
    cross_pg = np.add.reduceat(cross_p, starts)
    sum_g = np.add.reduceat(gp_root, starts)
    cross_n = None
    if gn_root is not None:
        cross_n = _cross_rows(state.normals_root, gn_root)
        cross_pg += np.add.reduceat(cross_n, starts)

    if rotation_frame == "world":
        M = gp.T @ state.points_root
        if gn is not None:
            M += gn.T @ state.normals_root
        g[3:6] = (state.global_rotation_jac * M).sum(axis=(1, 2))
    elif rotation_frame == "body":
        g[3:6] = cross_p.sum(axis=0)
        if cross_n is not None:
            g[3:6] += cross_n.sum(axis=0)
    else:
        raise InvalidArgumentError(f"unknown rotation_frame {rotation_frame!r}")
    c_cols = np.empty((N_JOINTS, 3))
    g_cols = np.empty((N_JOINTS, 3))
    for f in range(5):
        b0 = 1 + 3 * f
        c_whole = cross_pg[b0] + cross_pg[b0 + 1] + cross_pg[b0 + 2]
        g_whole = sum_g[b0] + sum_g[b0 + 1] + sum_g[b0 + 2]
        c_cols[4 * f + 0] = c_cols[4 * f + 1] = c_whole
        g_cols[4 * f + 0] = g_cols[4 * f + 1] = g_whole
        c_cols[4 * f + 2] = cross_pg[b0 + 1] + cross_pg[b0 + 2]
        g_cols[4 * f + 2] = sum_g[b0 + 1] + sum_g[b0 + 2]
        c_cols[4 * f + 3] = cross_pg[b0 + 2]
        g_cols[4 * f + 3] = sum_g[b0 + 2]
    moments = c_cols - _cross_rows(state.joint_origins, g_cols)
    g[6:] = (state.joint_axes * moments).sum(axis=1)
    return g


# ---------------------------------------------------------------------------
# Derived geometry
# ---------------------------------------------------------------------------

def posed_solids(state_or_pose) -> list:
    """Hand volume as primitives: one capsule per phalanx plus the palm box.

    The palm's sampled surface lies on the flat faces of its rounded box,
    which coincide with the faces of the plain box used here; the box only
    overshoots on the (unsampled) rounded edges.
    """
    state = state_or_pose if isinstance(state_or_pose, FkState) else fk_state(state_or_pose)
    tpl = get_template()
    Rg = state.global_rotation
    t = state.pose.translation
    solids = [
        PrimitiveSolid(
            "box",
            _PALM_SIZE,
            RigidTransform(Rg @ np.eye(3), Rg @ np.zeros(3) + t),
        )
    ]
    cap_align = _rx(-np.pi / 2.0)  # capsule local z -> bone local y
    for bidx, bone in enumerate(tpl.bones):
        if bone.finger < 0:
            continue
        R, o = state.bone_frames[bidx]
        center = o + R @ np.array([0.0, bone.length / 2.0, 0.0])
        solids.append(
            PrimitiveSolid(
                "capsule",
                (bone.radius, bone.length),
                RigidTransform(Rg @ R @ cap_align, Rg @ center + t),
            )
        )
    return solids


def middle_fingertip(state_or_pose) -> np.ndarray:
    """World position of the middle fingertip (distal capsule apex)."""
    state = state_or_pose if isinstance(state_or_pose, FkState) else fk_state(state_or_pose)
    tpl = get_template()
    bone_index = 1 + 3 * int(FingerCategory.MIDDLE) + 2
    bone = tpl.bones[bone_index]
    R, o = state.bone_frames[bone_index]
    tip_root = o + R @ np.array([0.0, bone.length + bone.radius, 0.0])
    return state.global_rotation @ tip_root + state.pose.translation


def fingertip_position(state_or_pose, category: FingerCategory) -> np.ndarray:
    state = state_or_pose if isinstance(state_or_pose, FkState) else fk_state(state_or_pose)
    tpl = get_template()
    bone_index = 1 + 3 * int(category) + 2
    bone = tpl.bones[bone_index]
    R, o = state.bone_frames[bone_index]
    tip_root = o + R @ np.array([0.0, bone.length + bone.radius, 0.0])
    return state.global_rotation @ tip_root + state.pose.translation


@lru_cache(maxsize=1)
def approach_direction() -> tuple:
    """Unit direction from the palm centre to the middle fingertip at rest,
    in the hand root frame; used to aim the hand during initialization."""
    tip = middle_fingertip(rest_pose())
    return tuple(unit(tip))


def compose_global(rotation: np.ndarray, translation, pose: HandPose) -> HandPose:
    """Apply a rigid motion G on top of a pose's global placement."""
    translation = np.asarray(translation, dtype=np.float64)
    Rg = rotation_from_axis_angle(pose.rotation)
    new_rot = axis_angle_from_rotation(rotation @ Rg)
    new_t = rotation @ pose.translation + translation
    return HandPose(new_t, new_rot, pose.joints.copy())
