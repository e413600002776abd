"""Per-fingertip contact maps on object point clouds.

An annotated cloud carries one label per point: 0 for uncontacted, 1..5 for
contact with the thumb/index/middle/ring/pinky fingertip.  Annotation labels
the k nearest object points of every fingertip-region point, discards
candidate pairs farther than the contact radius (pure k-NN has no radius and
mislabels thin or distant geometry), and resolves multi-finger claims in
favour of the closest fingertip, lower category winning exact ties.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import InvalidArgumentError, ParseError
from .geometry import knn
from .hand import FingerCategory, HandSurface
from .io import points_from_columns, read_ply, require_columns, write_ply
from .validation import check_labels, check_points

MIN_CLOUD_POINTS = 100
DEFAULT_CONTACT_RADIUS = 0.01       # m; candidate pairs beyond this are dropped
KNN_PER_3000 = 50                   # default k for a 3000-point cloud, scaled


class ContactLabel(IntEnum):
    UNCONTACTED = 0
    THUMB = 1
    INDEX = 2
    MIDDLE = 3
    RING = 4
    PINKY = 5

    @staticmethod
    def from_category(category: FingerCategory) -> "ContactLabel":
        return ContactLabel(int(category) + 1)

    def category(self) -> FingerCategory:
        if self is ContactLabel.UNCONTACTED:
            raise InvalidArgumentError("uncontacted label has no finger category")
        return FingerCategory(int(self) - 1)


@dataclass
class ObjectCloud:
    """Object surface points (m) with optional per-point contact labels."""

    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.points = check_points(self.points, "object points", MIN_CLOUD_POINTS)
        if self.labels is not None:
            self.labels = check_labels(
                self.labels, len(self.points), len(ContactLabel), "contact labels"
            )

    def __len__(self) -> int:
        return len(self.points)

    @property
    def labeled(self) -> bool:
        return self.labels is not None

    def require_labels(self) -> np.ndarray:
        if self.labels is None:
            raise InvalidArgumentError("object cloud has no contact labels")
        return self.labels

    def category_indices(self, category: FingerCategory) -> np.ndarray:
        labels = self.require_labels()
        return np.flatnonzero(labels == int(ContactLabel.from_category(category)))

    def contacted_indices(self) -> np.ndarray:
        return np.flatnonzero(self.require_labels() != int(ContactLabel.UNCONTACTED))

    def transformed(self, rotation, translation) -> "ObjectCloud":
        pts = self.points @ np.asarray(rotation).T + np.asarray(translation)
        labels = None if self.labels is None else self.labels.copy()
        return ObjectCloud(pts, labels)


def default_k(n_points: int) -> int:
    return max(1, round(KNN_PER_3000 * n_points / 3000))


def annotate(
    hand: HandSurface,
    cloud: ObjectCloud,
    k_neighbors: int | None = None,
    contact_radius: float = DEFAULT_CONTACT_RADIUS,
) -> ObjectCloud:
    """Label each object point with the fingertip category touching it.

    For every point in each fingertip region, its k nearest object points
    (within the contact radius) become candidates for that category; a point
    claimed by several categories goes to the one whose claiming fingertip
    point is nearest.  Unclaimed points stay uncontacted.
    """
    n = len(cloud.points)
    if k_neighbors is None:
        k_neighbors = default_k(n)
    k_neighbors = int(k_neighbors)
    if k_neighbors < 1:
        raise InvalidArgumentError(f"k_neighbors must be >= 1, got {k_neighbors}")
    if k_neighbors > n:
        raise InvalidArgumentError(f"k_neighbors={k_neighbors} exceeds cloud size {n}")
    radius_sq = float(contact_radius) ** 2

    best = np.full((n, 5), np.inf)
    for cat in FingerCategory:
        tips = hand.points[hand.tip_indices(cat)]
        if len(tips) == 0:
            raise InvalidArgumentError(f"hand surface has no {cat.name} tip region")
        idx, d2 = knn(tips, cloud.points, k_neighbors)
        keep = d2 <= radius_sq
        np.minimum.at(best[:, int(cat)], idx[keep], d2[keep])

    claimed = np.isfinite(best).any(axis=1)
    winner = best.argmin(axis=1)  # first minimum: lower category wins ties
    labels = np.where(claimed, winner + 1, int(ContactLabel.UNCONTACTED)).astype(np.uint8)
    return ObjectCloud(cloud.points.copy(), labels)


def category_subset(cloud: ObjectCloud, category: FingerCategory) -> np.ndarray:
    """Points labelled with the given category, original order preserved."""
    return cloud.points[cloud.category_indices(category)]


# ---------------------------------------------------------------------------
# Contact-map files (ascii PLY with a contact_label property)
# ---------------------------------------------------------------------------

def save_contact_map(cloud: ObjectCloud, path) -> None:
    columns = [
        ("x", "float", cloud.points[:, 0]),
        ("y", "float", cloud.points[:, 1]),
        ("z", "float", cloud.points[:, 2]),
    ]
    if cloud.labels is not None:
        columns.append(("contact_label", "uchar", cloud.labels))
    write_ply(path, columns)


def load_contact_map(path) -> ObjectCloud:
    columns, _ = read_ply(path)
    require_columns(columns, ["x", "y", "z"], path)
    points = points_from_columns(columns)
    labels = None
    if "contact_label" in columns:
        raw = columns["contact_label"][1]
        bad = np.flatnonzero(raw > int(ContactLabel.PINKY))
        if bad.size:
            raise ParseError(
                f"contact_label {int(raw[bad[0]])} out of range 0..5 "
                f"(element {int(bad[0])})",
                path=path,
            )
        labels = raw.astype(np.uint8)
    try:
        return ObjectCloud(points, labels)
    except InvalidArgumentError as exc:
        raise ParseError(str(exc), path=path) from exc
