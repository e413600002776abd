"""Scikit-learn style wrappers around the two algorithmic entry points.

ContactAnnotator is transform-shaped: fit() takes the posed hand surface
whose fingertip regions define the labelling, transform() labels any object
point cloud.  GraspSynthesizer is fit-shaped: fit(X, y) runs the
multi-direction grasp optimization on a labelled cloud and exposes the
result through fitted attributes.  Both inherit get_params/set_params so
they compose with sklearn tooling (grid search over k_neighbors or energy
weights, pipelines, clone).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .contact import DEFAULT_CONTACT_RADIUS, ObjectCloud, annotate
from .energy import (
    DEFAULT_DROP_PROBABILITY,
    DropConfig,
    EnergyWeights,
    FingerWeights,
)
from .errors import InvalidArgumentError
from .hand import HandSurface, fk_state
from .optimizer import OptimConfig, StepSizes, optimize
from .validation import check_labels, check_points


class ContactAnnotator(BaseEstimator):
    """Label object points with the fingertip (if any) touching them.

    Parameters
    ----------
    k_neighbors : int or None
        Candidates per fingertip point; None scales the default with the
        cloud size (50 per 3000 points).
    contact_radius : float
        Candidate pairs farther than this (metres) are discarded.
    """

    def __init__(self, k_neighbors=None, contact_radius=DEFAULT_CONTACT_RADIUS):
        self.k_neighbors = k_neighbors
        self.contact_radius = contact_radius

    def fit(self, hand_surface: HandSurface, y=None):
        if not isinstance(hand_surface, HandSurface):
            raise InvalidArgumentError("fit expects a HandSurface")
        self.hand_surface_ = hand_surface
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "hand_surface_"):
            raise InvalidArgumentError("ContactAnnotator is not fitted")
        points = check_points(X, "X")
        labeled = annotate(
            self.hand_surface_,
            ObjectCloud(points),
            k_neighbors=self.k_neighbors,
            contact_radius=self.contact_radius,
        )
        return labeled.labels

    def fit_transform(self, hand_surface, X) -> np.ndarray:
        return self.fit(hand_surface).transform(X)


class GraspSynthesizer(BaseEstimator):
    """Fit a hand pose to a labelled object point cloud.

    fit(X, y) takes object points (n, 3) and per-point contact labels (n,)
    in 0..5 and runs the full multi-direction energy optimization.  Fitted
    attributes: ``result_`` (all candidates and the selection), ``pose_``
    (winning hand pose) and ``report_`` (its drop-free energy report).
    """

    def __init__(
        self,
        iterations=300,
        directions=8,
        seed=0,
        drop_probability=DEFAULT_DROP_PROBABILITY,
        drop_seed=0,
        step_translation=1e-3,
        step_rotation=5e-3,
        step_joints=5e-3,
        init_distance=(0.05, 0.12),
        finger_weights=(1.0, 1.0, 1.0, 1.0, 1.0),
        weights=None,
        scorer=None,
        trajectory_every=0,
    ):
        self.iterations = iterations
        self.directions = directions
        self.seed = seed
        self.drop_probability = drop_probability
        self.drop_seed = drop_seed
        self.step_translation = step_translation
        self.step_rotation = step_rotation
        self.step_joints = step_joints
        self.init_distance = init_distance
        self.finger_weights = finger_weights
        self.weights = weights
        self.scorer = scorer
        self.trajectory_every = trajectory_every

    def _config(self) -> OptimConfig:
        weights = self.weights
        if weights is None:
            weights = EnergyWeights()
        elif isinstance(weights, dict):
            weights = EnergyWeights(**weights)
        return OptimConfig(
            iterations=self.iterations,
            directions=self.directions,
            step_sizes=StepSizes(
                self.step_translation, self.step_rotation, self.step_joints
            ),
            weights=weights,
            drop=DropConfig(self.drop_probability, self.drop_seed),
            finger_weights=FingerWeights(tuple(self.finger_weights)),
            seed=self.seed,
            init_distance=tuple(self.init_distance),
            trajectory_every=self.trajectory_every,
        )

    def fit(self, X, y):
        points = check_points(X, "X", min_points=100)
        labels = check_labels(y, len(points), 6, "y")
        cloud = ObjectCloud(points, labels)
        self.result_ = optimize(cloud, self._config(), scorer=self.scorer)
        self.pose_ = self.result_.pose
        self.report_ = self.result_.selected.report
        return self

    def hand_surface(self) -> HandSurface:
        """Posed surface of the fitted grasp."""
        if not hasattr(self, "pose_"):
            raise InvalidArgumentError("GraspSynthesizer is not fitted")
        return fk_state(self.pose_).surface

    def score(self, X=None, y=None) -> float:
        """Negative final scheduled energy of the selected candidate."""
        if not hasattr(self, "report_"):
            raise InvalidArgumentError("GraspSynthesizer is not fitted")
        return -self.report_.total
