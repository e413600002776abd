"""Core spatial primitives: nearest-neighbour search, unit vectors, axis-angle
rotations, rigid transforms, and signed distance fields for simple solids.

Conventions:
  * positions are metres, float64, shape (3,) or (n, 3)
  * signed distances are negative strictly inside a solid, zero on its surface
  * rotations are right-handed 3x3 matrices acting on column vectors
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateDirectionError, InvalidArgumentError
from .validation import check_points, check_vector

UNIT_EPS = 1e-9        # below this norm a direction is meaningless
BRUTE_FORCE_MAX = 64   # exhaustive scan beats a tree for tiny targets

SOLID_KINDS = ("sphere", "box", "cylinder", "capsule")


# ---------------------------------------------------------------------------
# Nearest neighbours
# ---------------------------------------------------------------------------

def _knn_brute(query: np.ndarray, target: np.ndarray, k: int):
    d2 = ((query[:, None, :] - target[None, :, :]) ** 2).sum(axis=2)
    # stable argsort keeps the lower target index first on exact ties
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return order, np.take_along_axis(d2, order, axis=1)


def knn(query, target, k: int):
    """k nearest target points for each query point.

    Returns (indices, sq_dists), both (n_query, k), sorted by ascending
    squared distance with exact ties broken by the lower target index.
    """
    q = check_points(query, "query")
    t = check_points(target, "target")
    k = int(k)
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    m = t.shape[0]
    if k > m:
        raise InvalidArgumentError(f"k={k} exceeds target size {m}")
    if m <= BRUTE_FORCE_MAX or k == m:
        return _knn_brute(q, t, k)

    tree = cKDTree(t)
    _, idx = tree.query(q, k=k + 1)
    # recompute squared distances from coordinates so tie detection and
    # ordering use the same arithmetic as the brute-force path
    d2 = ((q[:, None, :] - t[idx]) ** 2).sum(axis=2)
    order = np.argsort(idx, axis=1, kind="stable")
    d2 = np.take_along_axis(d2, order, axis=1)
    idx = np.take_along_axis(idx, order, axis=1)
    order = np.argsort(d2, axis=1, kind="stable")
    d2 = np.take_along_axis(d2, order, axis=1)
    idx = np.take_along_axis(idx, order, axis=1)
    # a tie straddling the k boundary makes the tree's candidate set
    # ambiguous; redo those rows exhaustively
    bad = d2[:, k - 1] == d2[:, k]
    idx, d2 = idx[:, :k], d2[:, :k]
    if np.any(bad):
        bidx, bd2 = _knn_brute(q[bad], t, k)
        idx[bad], d2[bad] = bidx, bd2
    return idx, d2


def nearest(query, target):
    """Single nearest neighbour; returns (indices, sq_dists) of shape (n,)."""
    idx, d2 = knn(query, target, 1)
    return idx[:, 0], d2[:, 0]


# ---------------------------------------------------------------------------
# Directions
# ---------------------------------------------------------------------------

def unit(v):
    """v / ||v||; raises DegenerateDirectionError when ||v|| <= UNIT_EPS."""
    v = np.asarray(v, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if not np.isfinite(n) or n <= UNIT_EPS:
        raise DegenerateDirectionError(f"cannot normalize vector of norm {n}")
    return v / n


def unit_rows(arr, eps: float = UNIT_EPS):
    """Row-wise normalization. Returns (units, valid) where invalid rows
    (norm <= eps) are zeroed and flagged False so callers can drop them."""
    arr = np.asarray(arr, dtype=np.float64)
    norms = np.linalg.norm(arr, axis=1)
    valid = norms > eps
    out = np.zeros_like(arr)
    out[valid] = arr[valid] / norms[valid, None]
    return out, valid


# ---------------------------------------------------------------------------
# Rotations (axis-angle / Rodrigues)
# ---------------------------------------------------------------------------

def skew(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_from_axis_angle(r) -> np.ndarray:
    """Rodrigues map: axis-angle vector (3,) -> rotation matrix (3, 3)."""
    r = np.asarray(r, dtype=np.float64)
    phi = float(np.linalg.norm(r))
    K = skew(r)
    if phi < 1e-12:
        return np.eye(3) + K
    a = np.sin(phi) / phi
    b = (1.0 - np.cos(phi)) / (phi * phi)
    return np.eye(3) + a * K + b * (K @ K)


def rotation_jacobian_axis_angle(r) -> np.ndarray:
    """dR/dr_i for the Rodrigues map, shape (3, 3, 3) indexed [i, :, :]."""
    r = np.asarray(r, dtype=np.float64)
    phi2 = float(r @ r)
    if phi2 < 1e-14:
        return np.stack([skew(e) for e in np.eye(3)])
    R = rotation_from_axis_angle(r)
    I = np.eye(3)
    out = np.empty((3, 3, 3))
    rx = skew(r)
    for i in range(3):
        v = np.cross(r, (I - R) @ I[:, i])
        out[i] = ((r[i] * rx + skew(v)) / phi2) @ R
    return out


def rotation_about_axis(axis, angle: float) -> np.ndarray:
    return rotation_from_axis_angle(unit(axis) * float(angle))


def wrap_axis_angle(r) -> np.ndarray:
    """Remap so the returned vector has norm <= pi (same rotation)."""
    r = np.asarray(r, dtype=np.float64)
    phi = float(np.linalg.norm(r))
    if phi <= np.pi:
        return r.copy()
    # reduce the angle modulo 2*pi into (-pi, pi], keep the axis
    wrapped = np.remainder(phi + np.pi, 2.0 * np.pi) - np.pi
    return r * (wrapped / phi)


def axis_angle_from_rotation(R: np.ndarray) -> np.ndarray:
    """Log map; returns the axis-angle vector with norm in [0, pi].

    Goes through a quaternion (Shepperd's method) so it is stable for
    angles near 0 and near pi alike.
    """
    R = np.asarray(R, dtype=np.float64)
    t = np.trace(R)
    if t > 0.0:
        s = np.sqrt(t + 1.0) * 2.0
        w = 0.25 * s
        v = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / s
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(R[i, i] - R[j, j] - R[k, k] + 1.0, 0.0)) * 2.0
        w = (R[k, j] - R[j, k]) / s
        v = np.zeros(3)
        v[i] = 0.25 * s
        v[j] = (R[j, i] + R[i, j]) / s
        v[k] = (R[k, i] + R[i, k]) / s
    if w < 0.0:
        w, v = -w, -v
    norm_v = float(np.linalg.norm(v))
    if norm_v < 1e-12:
        return np.zeros(3)
    angle = 2.0 * float(np.arctan2(norm_v, w))
    return v / norm_v * angle


def minimal_rotation_between(a, b) -> np.ndarray:
    """Smallest rotation mapping unit direction a onto unit direction b."""
    a = unit(a)
    b = unit(b)
    c = np.cross(a, b)
    d = float(a @ b)
    s = float(np.linalg.norm(c))
    if s <= UNIT_EPS:
        if d > 0:
            return np.eye(3)
        # antiparallel: rotate pi about a deterministic perpendicular axis
        helper = np.array([1.0, 0.0, 0.0])
        if abs(a[0]) > 0.9:
            helper = np.array([0.0, 1.0, 0.0])
        axis = unit(np.cross(a, helper))
        return rotation_about_axis(axis, np.pi)
    axis = c / s
    angle = float(np.arctan2(s, d))
    return rotation_about_axis(axis, angle)


# ---------------------------------------------------------------------------
# Rigid transforms
# ---------------------------------------------------------------------------

def _check_rotation(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise InvalidArgumentError(f"rotation must be (3, 3), got {R.shape}")
    if not np.allclose(R.T @ R, np.eye(3), atol=1e-8):
        raise InvalidArgumentError("rotation matrix is not orthonormal")
    return R


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", _check_rotation(self.rotation))
        object.__setattr__(
            self, "translation", check_vector(self.translation, 3, "translation")
        )

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform()

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def apply_direction(self, dirs) -> np.ndarray:
        return np.asarray(dirs, dtype=np.float64) @ self.rotation.T

    def inverse_apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return (pts - self.translation) @ self.rotation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: (self o other)(x) = self(other(x))."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )


# ---------------------------------------------------------------------------
# Signed distance fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrimitiveSolid:
    """One of sphere/box/cylinder/capsule with a rigid pose.

    dimensions:
      sphere   (radius,)
      box      (size_x, size_y, size_z)  full extents
      cylinder (radius, height)          axis along local z, full height
      capsule  (radius, length)          axial segment length, along local z
    """

    kind: str
    dimensions: tuple
    pose: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        if self.kind not in SOLID_KINDS:
            raise InvalidArgumentError(f"unknown solid kind {self.kind!r}")
        dims = tuple(float(d) for d in self.dimensions)
        expected = {"sphere": 1, "box": 3, "cylinder": 2, "capsule": 2}[self.kind]
        if len(dims) != expected:
            raise InvalidArgumentError(
                f"{self.kind} takes {expected} dimensions, got {len(dims)}"
            )
        if any(not np.isfinite(d) or d <= 0 for d in dims):
            raise InvalidArgumentError(f"{self.kind} dimensions must be > 0: {dims}")
        object.__setattr__(self, "dimensions", dims)

    # -- local-frame helpers -------------------------------------------------

    def _local_sdf(self, p: np.ndarray) -> np.ndarray:
        if self.kind == "sphere":
            (r,) = self.dimensions
            return np.linalg.norm(p, axis=1) - r
        if self.kind == "box":
            half = np.asarray(self.dimensions) / 2.0
            q = np.abs(p) - half
            outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
            inside = np.minimum(q.max(axis=1), 0.0)
            return outside + inside
        if self.kind == "cylinder":
            r, h = self.dimensions
            dr = np.linalg.norm(p[:, :2], axis=1) - r
            dz = np.abs(p[:, 2]) - h / 2.0
            q = np.stack([dr, dz], axis=1)
            outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
            inside = np.minimum(q.max(axis=1), 0.0)
            return outside + inside
        # capsule: distance to the axial segment minus the radius
        r, length = self.dimensions
        z = np.clip(p[:, 2], -length / 2.0, length / 2.0)
        closest = np.stack([np.zeros_like(z), np.zeros_like(z), z], axis=1)
        return np.linalg.norm(p - closest, axis=1) - r

    def _local_gradient(self, p: np.ndarray) -> np.ndarray:
        eps = 1e-12
        if self.kind == "sphere":
            n = np.linalg.norm(p, axis=1, keepdims=True)
            return np.where(n > eps, p / np.maximum(n, eps), [[1.0, 0.0, 0.0]])
        if self.kind == "capsule":
            r, length = self.dimensions
            z = np.clip(p[:, 2], -length / 2.0, length / 2.0)
            d = p - np.stack([np.zeros_like(z), np.zeros_like(z), z], axis=1)
            n = np.linalg.norm(d, axis=1, keepdims=True)
            return np.where(n > eps, d / np.maximum(n, eps), [[1.0, 0.0, 0.0]])
        if self.kind == "box":
            half = np.asarray(self.dimensions) / 2.0
            q = np.abs(p) - half
            sign = np.where(p >= 0.0, 1.0, -1.0)
            outside = np.maximum(q, 0.0)
            norm = np.linalg.norm(outside, axis=1, keepdims=True)
            grad_out = sign * outside / np.maximum(norm, eps)
            # inside: gradient points along the axis of least clearance
            axis = np.argmax(q, axis=1)
            grad_in = np.zeros_like(p)
            grad_in[np.arange(len(p)), axis] = sign[np.arange(len(p)), axis]
            return np.where(norm > eps, grad_out, grad_in)
        # cylinder
        r, h = self.dimensions
        rad = np.linalg.norm(p[:, :2], axis=1)
        dr = rad - r
        dz = np.abs(p[:, 2]) - h / 2.0
        radial_dir = np.zeros_like(p)
        ok = rad > eps
        radial_dir[ok, :2] = p[ok, :2] / rad[ok, None]
        radial_dir[~ok, 0] = 1.0
        axial_dir = np.zeros_like(p)
        axial_dir[:, 2] = np.where(p[:, 2] >= 0.0, 1.0, -1.0)
        q = np.stack([np.maximum(dr, 0.0), np.maximum(dz, 0.0)], axis=1)
        norm = np.linalg.norm(q, axis=1)
        grad = np.zeros_like(p)
        out = norm > eps
        grad[out] = (
            radial_dir[out] * (q[out, 0] / norm[out])[:, None]
            + axial_dir[out] * (q[out, 1] / norm[out])[:, None]
        )
        inside = ~out
        pick_radial = dr >= dz
        grad[inside & pick_radial] = radial_dir[inside & pick_radial]
        grad[inside & ~pick_radial] = axial_dir[inside & ~pick_radial]
        return grad

    def _local_aabb(self):
        if self.kind == "sphere":
            (r,) = self.dimensions
            ext = np.array([r, r, r])
        elif self.kind == "box":
            ext = np.asarray(self.dimensions) / 2.0
        elif self.kind == "cylinder":
            r, h = self.dimensions
            ext = np.array([r, r, h / 2.0])
        else:
            r, length = self.dimensions
            ext = np.array([r, r, length / 2.0 + r])
        return -ext, ext

    # -- public surface --------------------------------------------------------

    def sdf(self, points) -> np.ndarray:
        pts = check_points(points, "points")
        return self._local_sdf(self.pose.inverse_apply(pts))

    def sdf_gradient(self, points) -> np.ndarray:
        pts = check_points(points, "points")
        local = self._local_gradient(self.pose.inverse_apply(pts))
        return local @ self.pose.rotation.T

    def aabb(self):
        lo, hi = self._local_aabb()
        corners = np.array(
            [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
        )
        world = self.pose.apply(corners)
        return world.min(axis=0), world.max(axis=0)

    def volume(self) -> float:
        if self.kind == "sphere":
            (r,) = self.dimensions
            return 4.0 / 3.0 * np.pi * r**3
        if self.kind == "box":
            x, y, z = self.dimensions
            return x * y * z
        if self.kind == "cylinder":
            r, h = self.dimensions
            return np.pi * r * r * h
        r, length = self.dimensions
        return np.pi * r * r * length + 4.0 / 3.0 * np.pi * r**3

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dimensions": list(self.dimensions),
            "rotation": self.pose.rotation.tolist(),
            "translation": self.pose.translation.tolist(),
        }

    @staticmethod
    def from_dict(data: dict) -> "PrimitiveSolid":
        pose = RigidTransform(
            np.asarray(data.get("rotation", np.eye(3).tolist())),
            np.asarray(data.get("translation", [0.0, 0.0, 0.0])),
        )
        return PrimitiveSolid(data["kind"], tuple(data["dimensions"]), pose)


class SolidUnion:
    """Union of primitives; sdf is the min over parts (exact outside,
    lower-bound-tight inside overlaps)."""

    def __init__(self, parts):
        parts = list(parts)
        if not parts:
            raise InvalidArgumentError("SolidUnion needs at least one part")
        self.parts = parts

    def sdf(self, points) -> np.ndarray:
        values = np.stack([p.sdf(points) for p in self.parts], axis=0)
        return values.min(axis=0)

    def sdf_gradient(self, points) -> np.ndarray:
        values = np.stack([p.sdf(points) for p in self.parts], axis=0)
        grads = np.stack([p.sdf_gradient(points) for p in self.parts], axis=0)
        pick = values.argmin(axis=0)
        return grads[pick, np.arange(values.shape[1])]

    def aabb(self):
        boxes = [p.aabb() for p in self.parts]
        lo = np.min([b[0] for b in boxes], axis=0)
        hi = np.max([b[1] for b in boxes], axis=0)
        return lo, hi

    def volume(self, voxel: float = 0.002) -> float:
        """Voxel estimate of the union volume (parts may overlap)."""
        lo, hi = self.aabb()
        return _voxel_volume([self], lo, hi, voxel)

    def to_dict(self) -> dict:
        return {"union": [p.to_dict() for p in self.parts]}

    @staticmethod
    def from_dict(data: dict) -> "SolidUnion":
        return SolidUnion([PrimitiveSolid.from_dict(d) for d in data["union"]])


def solid_from_dict(data: dict):
    if "union" in data:
        return SolidUnion.from_dict(data)
    return PrimitiveSolid.from_dict(data)


def _voxel_volume(solids, lo, hi, voxel: float) -> float:
    axes = [np.arange(lo[i] + voxel / 2.0, hi[i], voxel) for i in range(3)]
    if any(len(a) == 0 for a in axes):
        return 0.0
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    inside = np.zeros(len(pts), dtype=bool)
    for solid in solids:
        inside |= solid.sdf(pts) < 0.0
    return float(inside.sum()) * voxel**3
