"""Grasp quality metrics: penetration volume and depth, a quasi-static
displacement simulation, and the success rule (volume < 5 cm^3 and
displacement < 2 cm, both strict).

The displacement proxy treats the object as a free rigid body under gravity
with the hand frozen: hand surface points that penetrate the solid act as
one-sided penalty springs with regularized Coulomb friction, and contact
damping drains energy while any contact is active (free flight stays
undamped so an unsupported object truly falls).  Only the centre-of-mass
translation is tracked; the returned displacement is its norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hand import HandSurface
from .objects import SolidObject
from .validation import check_positive

SUCCESS_VOLUME_CM3 = 5.0
SUCCESS_DISPLACEMENT_CM = 2.0

DEFAULT_VOXEL = 0.002  # m


@dataclass(frozen=True)
class SimConfig:
    # dt must keep sqrt(k * n_contacts / m) * dt below 2 for the
    # semi-implicit integrator (the implicit contact damping adds margin);
    # 0.2 ms is stable for desk-scale masses and realistic contact counts
    contact_stiffness: float = 5000.0   # N/m per penetrating hand point
    friction: float = 0.5               # Coulomb coefficient
    contact_damping: float = 5.0        # 1/s, velocity decay in contact
    normal_damping_ratio: float = 1.0   # critical-damping units per contact
    dt: float = 2e-4                    # s
    steps: int = 5_000                  # 1 simulated second
    gravity: tuple = (0.0, 0.0, -9.81)  # m/s^2
    blowup_speed: float = 10.0          # m/s, beyond this the run is invalid
    creep_speed: float = 1e-3           # m/s, friction regularization knee

    def __post_init__(self):
        check_positive(self.contact_stiffness, "contact_stiffness")
        check_positive(self.dt, "dt")
        if int(self.steps) < 1:
            raise ValueError("steps must be >= 1")
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "gravity", tuple(float(g) for g in self.gravity))

    def to_dict(self) -> dict:
        return {
            "contact_stiffness": self.contact_stiffness,
            "friction": self.friction,
            "contact_damping": self.contact_damping,
            "dt": self.dt,
            "steps": self.steps,
            "gravity": list(self.gravity),
            "blowup_speed": self.blowup_speed,
            "creep_speed": self.creep_speed,
        }

    @staticmethod
    def from_dict(data: dict) -> "SimConfig":
        kwargs = dict(data)
        if "gravity" in kwargs:
            kwargs["gravity"] = tuple(kwargs["gravity"])
        return SimConfig(**kwargs)


@dataclass
class MetricBundle:
    volume_cm3: float
    depth_cm: float
    displacement_cm: float
    success: bool

    def to_dict(self) -> dict:
        return {
            "volume_cm3": self.volume_cm3,
            "depth_cm": self.depth_cm,
            "displacement_cm": self.displacement_cm,
            "success": self.success,
        }


def _hand_aabb(hand_solids):
    boxes = [s.aabb() for s in hand_solids]
    lo = np.min([b[0] for b in boxes], axis=0)
    hi = np.max([b[1] for b in boxes], axis=0)
    return lo, hi


def penetration_volume(hand_solids, obj: SolidObject, voxel: float = DEFAULT_VOXEL) -> float:
    """Volume (cm^3) of the intersection between the hand solid union and
    the object solid, on a voxel grid over the intersection bounding box."""
    hand_lo, hand_hi = _hand_aabb(hand_solids)
    obj_lo, obj_hi = obj.solid.aabb()
    lo = np.maximum(hand_lo, obj_lo)
    hi = np.minimum(hand_hi, obj_hi)
    if np.any(hi <= lo):
        return 0.0
    axes = [np.arange(lo[i] + voxel / 2.0, hi[i], voxel) for i in range(3)]
    if any(len(a) == 0 for a in axes):
        return 0.0
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    inside_obj = obj.solid.sdf(pts) < 0.0
    if not inside_obj.any():
        return 0.0
    pts = pts[inside_obj]
    inside_hand = np.zeros(len(pts), dtype=bool)
    for solid in hand_solids:
        pending = ~inside_hand
        if not pending.any():
            break
        inside_hand[pending] = solid.sdf(pts[pending]) < 0.0
    return float(inside_hand.sum()) * voxel**3 * 1e6


def penetration_depth(surface: HandSurface, obj: SolidObject) -> float:
    """Maximum depth (cm) of any hand surface point inside the object."""
    d = obj.solid.sdf(surface.points)
    return float(max(0.0, -d.min()) * 100.0)


def displacement(surface: HandSurface, obj: SolidObject, sim: SimConfig | None = None) -> float:
    """Centre-of-mass displacement (cm) after 1 s of quasi-static contact
    simulation; +inf when the integration blows up."""
    sim = sim or SimConfig()
    gravity = np.asarray(sim.gravity)
    hand_pts = surface.points
    mass = obj.mass
    eye = np.eye(3)
    shift = np.zeros(3)
    vel = np.zeros(3)
    # the grasp is assumed statically held as posed: whatever net contact
    # force exists before gravity acts is balanced by the hand structure,
    # so it is subtracted, fading out as contacts release (otherwise any
    # asymmetric pre-load fires the object out of rigid one-sided springs)
    depth0 = obj.solid.sdf(hand_pts)
    pre_contact = depth0 < 0.0
    preload_force = np.zeros(3)
    preload_total = 0.0
    if pre_contact.any():
        pre_normals = obj.solid.sdf_gradient(hand_pts[pre_contact])
        pre_f = sim.contact_stiffness * (-depth0[pre_contact])
        preload_force = (-pre_normals * pre_f[:, None]).sum(axis=0)
        preload_total = float(pre_f.sum())
    for _ in range(sim.steps):
        local = hand_pts - shift
        depth = obj.solid.sdf(local)
        contact = depth < 0.0
        force = mass * gravity
        drag = None
        if contact.any():
            pen = -depth[contact]
            normals = obj.solid.sdf_gradient(local[contact])
            f_normal = sim.contact_stiffness * pen
            force += (-normals * f_normal[:, None]).sum(axis=0)
            if preload_total > 0.0:
                fade = min(1.0, float(f_normal.sum()) / preload_total)
                force -= fade * preload_force
            force += -sim.contact_damping * mass * vel
            # contacts are inelastic: each carries a critically-damped
            # normal damper (prevents the stored spring energy of an
            # initially penetrating grasp from catapulting the object) and
            # regularized Coulomb friction mu*f_n/max(|v_t|, creep) in the
            # tangent plane; both integrate implicitly via a 3x3 solve,
            # unconditionally stable however stiff they get
            c_n = 2.0 * sim.normal_damping_ratio * np.sqrt(sim.contact_stiffness * mass)
            v_t = vel[None, :] - normals * (normals @ vel)[:, None]
            v_t_norm = np.linalg.norm(v_t, axis=1)
            gamma = sim.friction * f_normal / np.maximum(v_t_norm, sim.creep_speed)
            nnt = np.einsum("ia,ib->ab", normals, normals)
            g_nnt = np.einsum("i,ia,ib->ab", gamma, normals, normals)
            drag = gamma.sum() * eye - g_nnt + c_n * nnt
        v_pred = vel + sim.dt * force / mass
        if drag is not None:
            vel = np.linalg.solve(eye + (sim.dt / mass) * drag, v_pred)
        else:
            vel = v_pred
        if np.linalg.norm(vel) > sim.blowup_speed:
            return math.inf
        shift = shift + sim.dt * vel
    return float(np.linalg.norm(shift) * 100.0)


def success(volume_cm3: float, displacement_cm: float) -> bool:
    """Strictly less than 5 cm^3 penetration and 2 cm displacement."""
    return bool(volume_cm3 < SUCCESS_VOLUME_CM3 and displacement_cm < SUCCESS_DISPLACEMENT_CM)


def evaluate_grasp(pose, obj: SolidObject, sim: SimConfig | None = None) -> MetricBundle:
    from .hand import fk_state, posed_solids

    state = fk_state(pose)
    solids = posed_solids(state)
    vol = penetration_volume(solids, obj)
    depth = penetration_depth(state.surface, obj)
    disp = displacement(state.surface, obj, sim)
    return MetricBundle(
        volume_cm3=vol,
        depth_cm=depth,
        displacement_cm=disp,
        success=success(vol, disp),
    )
