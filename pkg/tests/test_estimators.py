import numpy as np
import pytest
from sklearn.base import clone

from graspsynth.contact import ObjectCloud, annotate
from graspsynth.errors import InvalidArgumentError
from graspsynth.estimators import ContactAnnotator, GraspSynthesizer
from graspsynth.hand import fk_state, forward_kinematics
from graspsynth.objects import ObjectSpec, make_object, scripted_reference_grasp


@pytest.fixture(scope="module")
def scene():
    obj = make_object(ObjectSpec("sphere", (0.04,), seed=5))
    pose = scripted_reference_grasp(obj, "tripod")
    surface = forward_kinematics(pose)
    return obj, surface


class TestContactAnnotator:
    def test_matches_function_api(self, scene):
        obj, surface = scene
        est = ContactAnnotator(k_neighbors=40)
        labels = est.fit(surface).transform(obj.cloud.points)
        expected = annotate(surface, obj.cloud, k_neighbors=40).labels
        np.testing.assert_array_equal(labels, expected)

    def test_get_set_params(self):
        est = ContactAnnotator(k_neighbors=25, contact_radius=0.02)
        params = est.get_params()
        assert params == {"k_neighbors": 25, "contact_radius": 0.02}
        cloned = clone(est)
        assert cloned.get_params() == params

    def test_unfitted_transform_rejected(self, scene):
        obj, _ = scene
        with pytest.raises(InvalidArgumentError):
            ContactAnnotator().transform(obj.cloud.points)

    def test_fit_rejects_non_surface(self):
        with pytest.raises(InvalidArgumentError):
            ContactAnnotator().fit(np.zeros((10, 3)))


class TestGraspSynthesizer:
    def test_fit_produces_result(self, scene):
        obj, surface = scene
        labels = annotate(surface, obj.cloud).labels
        est = GraspSynthesizer(iterations=20, directions=1, seed=3)
        est.fit(obj.cloud.points, labels)
        assert hasattr(est, "result_")
        assert est.pose_ is est.result_.pose
        assert est.report_.pen >= 0.0
        assert est.hand_surface().points.shape == (800, 3)
        assert np.isfinite(est.score())

    def test_matches_function_api(self, scene):
        obj, surface = scene
        labels = annotate(surface, obj.cloud).labels
        from graspsynth.optimizer import OptimConfig, optimize

        est = GraspSynthesizer(iterations=15, directions=2, seed=9)
        est.fit(obj.cloud.points, labels)
        direct = optimize(
            ObjectCloud(obj.cloud.points, labels),
            OptimConfig(iterations=15, directions=2, seed=9),
        )
        np.testing.assert_array_equal(est.pose_.as_vector(), direct.pose.as_vector())

    def test_sklearn_param_round_trip(self):
        est = GraspSynthesizer(iterations=50, drop_probability=0.1)
        cloned = clone(est)
        assert cloned.get_params()["iterations"] == 50
        assert cloned.get_params()["drop_probability"] == 0.1

    def test_unfitted_accessors_rejected(self):
        est = GraspSynthesizer()
        with pytest.raises(InvalidArgumentError):
            est.hand_surface()
        with pytest.raises(InvalidArgumentError):
            est.score()

    def test_label_validation(self, scene):
        obj, _ = scene
        bad = np.full(len(obj.cloud.points), 9, dtype=np.uint8)
        with pytest.raises(InvalidArgumentError):
            GraspSynthesizer(iterations=5, directions=1).fit(obj.cloud.points, bad)
