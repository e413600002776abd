"""Energy terms driving grasp optimization.

Five terms combine into the scheduled total
    E = i * w_dis * E_dis + (n - i) * w_dc * E_dc + w_net * E_net + w_pen * E_pen
with E_dc = w_dct * E_dct + w_dcf * E_dcf, where i is the current iteration
and n the total iteration count: early iterations are dominated by
directional consistency (orienting the hand), late ones by contact distance
(closing onto the contact map).

  E_dis   squared distance from fingertip-region points to the nearest
          object point of the same contact category, per-finger weighted
  E_dct   squared difference between a fingertip point's outward normal and
          the unit direction to its nearest same-category object point
  E_dcf   the same alignment measure over whole-finger points against the
          nearest object point of any category
  E_net   -log p from a pluggable grasp scorer (NullScorer scores 1 -> 0)
  E_pen   sum of distances from object points lying behind their nearest
          hand point's surface normal (a point-cloud penetration proxy)

Nearest-neighbour indices are recomputed every evaluation but treated as
constants inside gradients (frozen correspondences), so each term returns
exact derivatives with respect to the hand surface points and normals.
Individual summands of E_dis/E_dct/E_dcf can be randomly zeroed ("dropped")
to escape local optima; a dropped summand vanishes from value and gradient
alike.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .contact import ObjectCloud
from .errors import (
    ContractViolationError,
    EmptyContactMapError,
    InvalidArgumentError,
)
from .geometry import UNIT_EPS
from .hand import FingerCategory, HandSurface
from .validation import check_probability

DEFAULT_DROP_PROBABILITY = 0.2


@dataclass(frozen=True)
class EnergyWeights:
    """Scale factors for the energy terms (all >= 0)."""

    dis: float = 0.5
    dct: float = 0.8
    dcf: float = 0.6
    dc: float = 1.0
    net: float = 0.6
    pen: float = 10.0

    def __post_init__(self):
        for name in ("dis", "dct", "dcf", "dc", "net", "pen"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise InvalidArgumentError(f"weight {name} must be >= 0, got {v}")
            object.__setattr__(self, name, v)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("dis", "dct", "dcf", "dc", "net", "pen")}

    @staticmethod
    def from_dict(data: dict) -> "EnergyWeights":
        return EnergyWeights(**data)


@dataclass(frozen=True)
class FingerWeights:
    """Per-category contribution to E_dis; zeroing a finger removes its pull."""

    values: tuple = (1.0, 1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) != 5:
            raise InvalidArgumentError("finger weights need exactly 5 entries")
        if any(not np.isfinite(v) or v < 0 for v in vals):
            raise InvalidArgumentError(f"finger weights must be >= 0: {vals}")
        if not any(v > 0 for v in vals):
            raise InvalidArgumentError("at least one finger weight must be > 0")
        object.__setattr__(self, "values", vals)

    def __getitem__(self, category: FingerCategory) -> float:
        return self.values[int(category)]

    def with_zeroed(self, category: FingerCategory) -> "FingerWeights":
        vals = list(self.values)
        vals[int(category)] = 0.0
        return FingerWeights(tuple(vals))

    def to_list(self) -> list:
        return list(self.values)


@dataclass(frozen=True)
class DropConfig:
    probability: float = DEFAULT_DROP_PROBABILITY
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "probability", check_probability(self.probability, "drop probability")
        )
        object.__setattr__(self, "seed", int(self.seed))


def drop_mask(n: int, probability: float, rng) -> np.ndarray:
    """Boolean keep-mask; each entry survives with probability 1 - p."""
    if probability == 0.0:
        return np.ones(n, dtype=bool)
    return rng.random(n) >= probability


def drop(values, cfg: DropConfig, rng) -> np.ndarray:
    """Zero each entry independently with probability cfg.probability."""
    values = np.asarray(values, dtype=np.float64)
    return values * drop_mask(values.size, cfg.probability, rng).reshape(values.shape)


# ---------------------------------------------------------------------------
# Static per-object search structures
# ---------------------------------------------------------------------------

class ContactIndex:
    """Prebuilt nearest-neighbour indices for one labelled object cloud."""

    def __init__(self, cloud: ObjectCloud):
        cloud.require_labels()
        self.cloud = cloud
        self.category_index = {}   # category -> indices into the full cloud
        self._category_tree = {}
        for cat in FingerCategory:
            idx = cloud.category_indices(cat)
            self.category_index[cat] = idx
            if len(idx) > 0:
                self._category_tree[cat] = cKDTree(cloud.points[idx])
        self.full_tree = cKDTree(cloud.points)
        self.has_contacts = any(len(v) for v in self.category_index.values())

    def category_size(self, cat: FingerCategory) -> int:
        return len(self.category_index[cat])

    def nearest_in_category(self, cat: FingerCategory, query: np.ndarray):
        """Nearest same-category object point; returns full-cloud indices."""
        tree = self._category_tree.get(cat)
        if tree is None:
            return None
        _, local = tree.query(query, k=1)
        return self.category_index[cat][local]

    def nearest_in_cloud(self, query: np.ndarray) -> np.ndarray:
        _, idx = self.full_tree.query(query, k=1)
        return idx


@dataclass
class Correspondences:
    """Per-evaluation frozen nearest-neighbour assignments.

    The penetration indicator (which object points lie behind their nearest
    hand point) is piecewise-constant like the argmin indices, so it is
    frozen here as well and treated as a constant inside gradients.
    """

    tip_nn: list          # per category: full-cloud indices per tip point, or None
    finger_nn: list       # per category: full-cloud indices per finger point
    hand_nn: np.ndarray   # per object point: index of nearest hand point
    penetrating: np.ndarray  # per object point: behind-the-surface indicator


PEN_PREFILTER_MARGIN = 0.03  # m; object points farther than this from the
# hand's bounding box cannot sit behind their nearest surface sample


def _nearest_hand(hand_points: np.ndarray, query: np.ndarray) -> np.ndarray:
    if len(query) * len(hand_points) <= 150_000:
        d2 = -2.0 * query @ hand_points.T
        d2 += (hand_points * hand_points).sum(axis=1)[None, :]
        return d2.argmin(axis=1)
    tree = cKDTree(hand_points, balanced_tree=False, compact_nodes=False)
    _, nn = tree.query(query, k=1)
    return nn


def compute_correspondences(surface: HandSurface, index: ContactIndex) -> Correspondences:
    tips_tbl, fingers_tbl = surface.region_tables()
    tip_nn = []
    for cat in FingerCategory:
        tips = surface.points[tips_tbl[int(cat)]]
        tip_nn.append(index.nearest_in_category(cat, tips))
    counts = [len(rows) for rows in fingers_tbl]
    nn_all = index.nearest_in_cloud(surface.points[np.concatenate(fingers_tbl)])
    finger_nn = []
    start = 0
    for count in counts:
        finger_nn.append(nn_all[start : start + count])
        start += count

    obj = index.cloud.points
    lo = surface.points.min(axis=0) - PEN_PREFILTER_MARGIN
    hi = surface.points.max(axis=0) + PEN_PREFILTER_MARGIN
    near = np.flatnonzero(np.all((obj >= lo) & (obj <= hi), axis=1))
    hand_nn = np.zeros(len(obj), dtype=np.intp)
    penetrating = np.zeros(len(obj), dtype=bool)
    if len(near):
        nn = _nearest_hand(surface.points, obj[near])
        hand_nn[near] = nn
        diff = obj[near] - surface.points[nn]
        inward = (diff * surface.normals[nn]).sum(axis=1) < 0.0
        penetrating[near] = inward & (np.linalg.norm(diff, axis=1) > UNIT_EPS)
    return Correspondences(
        tip_nn=tip_nn, finger_nn=finger_nn, hand_nn=hand_nn, penetrating=penetrating
    )


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

@dataclass
class TermValue:
    value: float
    grad_points: np.ndarray           # (S, 3) d(value)/d(hand points)
    grad_normals: np.ndarray | None = None


def _require_contacts(index: ContactIndex):
    if not index.has_contacts:
        raise EmptyContactMapError("contact map has no contacted points")


def distance_energy(
    surface: HandSurface,
    index: ContactIndex,
    corr: Correspondences,
    finger_weights: FingerWeights | None = None,
    keep: np.ndarray | None = None,
) -> TermValue:
    """Weighted squared distance from tip points to same-category contacts."""
    _require_contacts(index)
    fw = finger_weights or FingerWeights()
    grad = np.zeros_like(surface.points)
    value = 0.0
    offset = 0
    for cat in FingerCategory:
        tip_idx = surface.tip_indices(cat)
        nn = corr.tip_nn[int(cat)]
        block = slice(offset, offset + len(tip_idx))
        offset += len(tip_idx)
        w = fw[cat]
        if nn is None or w == 0.0:
            continue
        diff = surface.points[tip_idx] - index.cloud.points[nn]
        terms = (diff * diff).sum(axis=1)
        kept = np.ones(len(tip_idx), dtype=bool) if keep is None else keep[block]
        value += w * terms[kept].sum()
        grad[tip_idx[kept]] += 2.0 * w * diff[kept]
    return TermValue(value=value, grad_points=grad)


def _direction_terms(points, normals, targets):
    """Per-point ||n - u||^2 with u the unit vector toward the target,
    plus gradients; degenerate directions get zero term and gradients."""
    diff = targets - points
    dist = np.linalg.norm(diff, axis=1)
    valid = dist > UNIT_EPS
    u = np.zeros_like(diff)
    u[valid] = diff[valid] / dist[valid, None]
    w = normals - u
    terms = np.where(valid, (w * w).sum(axis=1), 0.0)
    grad_n = np.where(valid[:, None], 2.0 * w, 0.0)
    # d/dp ||n - u||^2 = (2 / dist) * (I - u u^T) (n - u)
    proj = w - u * (u * w).sum(axis=1, keepdims=True)
    grad_p = np.zeros_like(diff)
    grad_p[valid] = 2.0 / dist[valid, None] * proj[valid]
    return terms, grad_p, grad_n, valid


def tip_direction_energy(
    surface: HandSurface,
    index: ContactIndex,
    corr: Correspondences,
    keep: np.ndarray | None = None,
) -> TermValue:
    """Alignment of tip normals with directions to same-category contacts."""
    _require_contacts(index)
    grad_p = np.zeros_like(surface.points)
    grad_n = np.zeros_like(surface.points)
    value = 0.0
    offset = 0
    for cat in FingerCategory:
        tip_idx = surface.tip_indices(cat)
        nn = corr.tip_nn[int(cat)]
        block = slice(offset, offset + len(tip_idx))
        offset += len(tip_idx)
        if nn is None:
            continue
        terms, gp, gn, valid = _direction_terms(
            surface.points[tip_idx], surface.normals[tip_idx], index.cloud.points[nn]
        )
        kept = valid if keep is None else (valid & keep[block])
        value += terms[kept].sum()
        grad_p[tip_idx[kept]] += gp[kept]
        grad_n[tip_idx[kept]] += gn[kept]
    return TermValue(value=value, grad_points=grad_p, grad_normals=grad_n)


def finger_direction_energy(
    surface: HandSurface,
    index: ContactIndex,
    corr: Correspondences,
    keep: np.ndarray | None = None,
) -> TermValue:
    """Alignment of finger-region normals with directions to the nearest
    object points (any category)."""
    grad_p = np.zeros_like(surface.points)
    grad_n = np.zeros_like(surface.points)
    value = 0.0
    offset = 0
    for cat in FingerCategory:
        fin_idx = surface.finger_indices(cat)
        nn = corr.finger_nn[int(cat)]
        block = slice(offset, offset + len(fin_idx))
        offset += len(fin_idx)
        terms, gp, gn, valid = _direction_terms(
            surface.points[fin_idx], surface.normals[fin_idx], index.cloud.points[nn]
        )
        kept = valid if keep is None else (valid & keep[block])
        value += terms[kept].sum()
        grad_p[fin_idx[kept]] += gp[kept]
        grad_n[fin_idx[kept]] += gn[kept]
    return TermValue(value=value, grad_points=grad_p, grad_normals=grad_n)


def direction_energy(dct_value: float, dcf_value: float, weights: EnergyWeights) -> float:
    """Combined directional consistency: w_dct * E_dct + w_dcf * E_dcf."""
    return weights.dct * dct_value + weights.dcf * dcf_value


def penetration_energy(
    surface: HandSurface,
    cloud: ObjectCloud,
    corr: Correspondences,
) -> TermValue:
    """Sum of distances of object points lying behind their nearest hand
    point's normal; zero when the hand is entirely outside the object."""
    penetrating = corr.penetrating
    if not np.any(penetrating):
        return TermValue(value=0.0, grad_points=np.zeros_like(surface.points))
    h_idx = corr.hand_nn[penetrating]
    diff = cloud.points[penetrating] - surface.points[h_idx]
    dist = np.linalg.norm(diff, axis=1)
    ok = dist > UNIT_EPS
    value = float(dist[ok].sum())
    grad = np.zeros_like(surface.points)
    # d/dh ||o - h|| = (h - o) / ||o - h||, accumulated per hand point
    np.add.at(grad, h_idx[ok], -diff[ok] / dist[ok, None])
    return TermValue(value=value, grad_points=grad)


class GraspScorer(ABC):
    """Pluggable grasp-success scorer; must return a probability in (0, 1]."""

    @abstractmethod
    def score(self, surface: HandSurface, cloud: ObjectCloud) -> float:
        ...

    def score_gradient(self, surface: HandSurface, cloud: ObjectCloud) -> np.ndarray:
        """d(score)/d(hand points); default: no gradient information."""
        return np.zeros_like(surface.points)


class NullScorer(GraspScorer):
    """Neutral scorer: probability 1, so the scorer term vanishes."""

    def score(self, surface, cloud) -> float:
        return 1.0


def scorer_energy(
    scorer: GraspScorer, surface: HandSurface, cloud: ObjectCloud
) -> TermValue:
    """-log p with p from the scorer; exact zero for the NullScorer."""
    p = float(scorer.score(surface, cloud))
    if not np.isfinite(p) or p <= 0.0 or p > 1.0:
        raise ContractViolationError(f"scorer returned {p}, expected (0, 1]")
    if p == 1.0 and isinstance(scorer, NullScorer):
        return TermValue(value=0.0, grad_points=np.zeros_like(surface.points))
    grad = -scorer.score_gradient(surface, cloud) / p
    return TermValue(value=-float(np.log(p)), grad_points=grad)


# ---------------------------------------------------------------------------
# Scheduled total
# ---------------------------------------------------------------------------

@dataclass
class EnergyReport:
    """Per-term values and the scheduled total at one iteration."""

    dis: float
    dct: float
    dcf: float
    dc: float
    net: float
    pen: float
    total: float
    iteration: int
    total_iterations: int

    def to_dict(self) -> dict:
        return {
            "dis": self.dis,
            "dct": self.dct,
            "dcf": self.dcf,
            "dc": self.dc,
            "net": self.net,
            "pen": self.pen,
            "total": self.total,
            "iteration": self.iteration,
            "total_iterations": self.total_iterations,
        }


def schedule_coefficients(weights: EnergyWeights, iteration: int, total_iterations: int):
    """(distance coefficient, direction coefficient) at one iteration."""
    total_iterations = int(total_iterations)
    iteration = int(iteration)
    if total_iterations < 1:
        raise InvalidArgumentError(f"total_iterations must be >= 1, got {total_iterations}")
    if not 0 <= iteration <= total_iterations:
        raise InvalidArgumentError(
            f"iteration {iteration} outside [0, {total_iterations}]"
        )
    return iteration * weights.dis, (total_iterations - iteration) * weights.dc


def total_energy(
    dis: float,
    dct: float,
    dcf: float,
    net: float,
    pen: float,
    weights: EnergyWeights,
    iteration: int,
    total_iterations: int,
) -> EnergyReport:
    """Assemble the scheduled total from raw term values."""
    c_dis, c_dc = schedule_coefficients(weights, iteration, total_iterations)
    dc = direction_energy(dct, dcf, weights)
    total = c_dis * dis + c_dc * dc + weights.net * net + weights.pen * pen
    return EnergyReport(
        dis=float(dis),
        dct=float(dct),
        dcf=float(dcf),
        dc=float(dc),
        net=float(net),
        pen=float(pen),
        total=float(total),
        iteration=int(iteration),
        total_iterations=int(total_iterations),
    )


@dataclass
class TotalEnergy:
    report: EnergyReport
    grad_points: np.ndarray
    grad_normals: np.ndarray


def evaluate_total(
    surface: HandSurface,
    index: ContactIndex,
    weights: EnergyWeights,
    finger_weights: FingerWeights,
    scorer: GraspScorer,
    iteration: int,
    total_iterations: int,
    drop_cfg: DropConfig | None = None,
    rng=None,
    corr: Correspondences | None = None,
    steer_direction_terms: bool = False,
) -> TotalEnergy:
    """Evaluate every term and the scheduled total with its gradient.

    When drop_cfg has a nonzero probability, an rng must be supplied; three
    independent keep-masks are drawn in a fixed order (distance, tip
    direction, finger direction) so a given rng state fully determines the
    evaluation.

    With steer_direction_terms the returned gradient drops the directional
    terms' point-position components, keeping only their normal-alignment
    part: those position components scale like 1/distance (singular at
    contact) and push the hand sideways/outward long before orientation is
    settled, while the distance and penetration terms already own the
    position degrees of freedom.  Reported values are unaffected.
    """
    if corr is None:
        corr = compute_correspondences(surface, index)
    n_tips = sum(len(surface.tip_indices(c)) for c in FingerCategory)
    n_fingers = sum(len(surface.finger_indices(c)) for c in FingerCategory)
    p = 0.0 if drop_cfg is None else drop_cfg.probability
    if p > 0.0:
        if rng is None:
            raise InvalidArgumentError("drop probability > 0 requires an rng")
        keep_dis = drop_mask(n_tips, p, rng)
        keep_dct = drop_mask(n_tips, p, rng)
        keep_dcf = drop_mask(n_fingers, p, rng)
    else:
        keep_dis = keep_dct = keep_dcf = None

    t_dis = distance_energy(surface, index, corr, finger_weights, keep_dis)
    t_dct = tip_direction_energy(surface, index, corr, keep_dct)
    t_dcf = finger_direction_energy(surface, index, corr, keep_dcf)
    t_net = scorer_energy(scorer, surface, index.cloud)
    t_pen = penetration_energy(surface, index.cloud, corr)

    report = total_energy(
        t_dis.value, t_dct.value, t_dcf.value, t_net.value, t_pen.value,
        weights, iteration, total_iterations,
    )
    c_dis, c_dc = schedule_coefficients(weights, iteration, total_iterations)
    grad_points = (
        c_dis * t_dis.grad_points
        + weights.net * t_net.grad_points
        + weights.pen * t_pen.grad_points
    )
    if not steer_direction_terms:
        grad_points = grad_points + c_dc * (
            weights.dct * t_dct.grad_points + weights.dcf * t_dcf.grad_points
        )
    grad_normals = c_dc * (
        weights.dct * t_dct.grad_normals + weights.dcf * t_dcf.grad_normals
    )
    return TotalEnergy(report=report, grad_points=grad_points, grad_normals=grad_normals)
