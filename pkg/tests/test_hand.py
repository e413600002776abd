import numpy as np
import pytest

from graspsynth.errors import InvalidArgumentError
from graspsynth.geometry import rotation_from_axis_angle
from graspsynth.hand import (
    FingerCategory,
    HandPose,
    N_PARAMS,
    clamp_joints,
    compose_global,
    fk_jacobian,
    fk_state,
    forward_kinematics,
    get_template,
    joint_limits,
    middle_fingertip,
    pose_gradient,
    posed_solids,
    rest_pose,
)


def random_pose(rng, margin=0.05):
    lower, upper = joint_limits()
    joints = rng.uniform(lower + margin, upper - margin)
    rot = rng.normal(size=3)
    rot = rot / np.linalg.norm(rot) * rng.uniform(0.1, 2.5)
    return HandPose(rng.uniform(-0.2, 0.2, 3), rot, joints)


class TestTemplate:
    def test_size(self):
        assert get_template().size == 800

    def test_region_budgets(self):
        surf = forward_kinematics(rest_pose())
        for cat in FingerCategory:
            assert len(surf.tip_indices(cat)) >= 20
            assert len(surf.finger_indices(cat)) >= 60

    def test_tip_points_on_distal_segment(self):
        tpl = get_template()
        surf = forward_kinematics(rest_pose())
        for cat in FingerCategory:
            distal_bone = 1 + 3 * int(cat) + 2
            for idx in surf.tip_indices(cat):
                assert tpl.bone_of_point[idx] == distal_bone


class TestRestPose:
    def test_zero_global(self):
        p = rest_pose()
        np.testing.assert_array_equal(p.translation, 0)
        np.testing.assert_array_equal(p.rotation, 0)

    def test_index_pip_flexion(self):
        p = rest_pose()
        assert p.joints[4 * int(FingerCategory.INDEX) + 2] == pytest.approx(0.2)

    def test_within_limits(self):
        p = rest_pose()
        np.testing.assert_array_equal(clamp_joints(p.joints), p.joints)


class TestForwardKinematics:
    def test_identity_palm_near_origin(self):
        surf = forward_kinematics(rest_pose())
        centroid = surf.points[surf.palm_indices()].mean(axis=0)
        assert np.linalg.norm(centroid) < 0.01

    def test_pure_translation(self):
        base = forward_kinematics(rest_pose())
        moved_pose = rest_pose()
        moved_pose.translation = np.array([0.1, 0.0, 0.0])
        moved = forward_kinematics(moved_pose)
        np.testing.assert_allclose(moved.points - base.points, [[0.1, 0.0, 0.0]] * 800)
        np.testing.assert_allclose(moved.normals, base.normals)

    def test_dip_perturbation_moves_only_distal_points(self):
        # oracle: per-point displacement mask between the two poses
        tpl = get_template()
        pose_a = rest_pose()
        pose_b = rest_pose()
        col = 4 * int(FingerCategory.INDEX) + 3  # index DIP
        pose_b.joints[col] += 0.3
        pa = forward_kinematics(pose_a).points
        pb = forward_kinematics(pose_b).points
        moved = np.linalg.norm(pb - pa, axis=1) > 1e-12
        distal_bone = 1 + 3 * int(FingerCategory.INDEX) + 2
        np.testing.assert_array_equal(moved, tpl.bone_of_point == distal_bone)

    def test_normals_unit_and_outward(self):
        rng = np.random.default_rng(0)
        tpl = get_template()
        for _ in range(5):
            state = fk_state(random_pose(rng))
            norms = np.linalg.norm(state.surface.normals, axis=1)
            assert np.abs(norms - 1.0).max() < 1e-9
            # outward: positive component along the offset from the bone axis
            for bidx, bone in enumerate(tpl.bones):
                if bone.finger < 0:
                    continue
                sl = bone.point_slice
                R, o = state.bone_frames[bidx]
                local = (state.points_root[sl] - o) @ R
                axis_pt = np.stack(
                    [
                        np.zeros(sl.stop - sl.start),
                        np.clip(local[:, 1], 0.0, bone.length),
                        np.zeros(sl.stop - sl.start),
                    ],
                    axis=1,
                )
                n_local = state.normals_root[sl] @ R
                outward = ((local - axis_pt) * n_local).sum(axis=1)
                assert np.all(outward > 0)

    def test_region_multiset_pose_invariant(self):
        rng = np.random.default_rng(1)
        ref = forward_kinematics(rest_pose()).region
        for _ in range(3):
            reg = forward_kinematics(random_pose(rng)).region
            np.testing.assert_array_equal(reg, ref)

    def test_rigid_composition_equivariance(self):
        rng = np.random.default_rng(2)
        pose = random_pose(rng)
        R = rotation_from_axis_angle(np.array([0.3, -0.5, 0.8]))
        t = np.array([0.05, -0.02, 0.11])
        composed = forward_kinematics(compose_global(R, t, pose))
        direct = forward_kinematics(pose)
        np.testing.assert_allclose(composed.points, direct.points @ R.T + t, atol=1e-12)
        np.testing.assert_allclose(composed.normals, direct.normals @ R.T, atol=1e-12)

    def test_clamping_idempotent(self):
        rng = np.random.default_rng(3)
        joints = rng.uniform(-3, 3, 20)
        once = clamp_joints(joints)
        np.testing.assert_array_equal(clamp_joints(once), once)

    def test_non_finite_pose_rejected(self):
        pose = rest_pose()
        pose.translation = np.array([np.nan, 0.0, 0.0])
        with pytest.raises(InvalidArgumentError):
            forward_kinematics(pose)


class TestJacobian:
    def test_translation_block_is_identity(self):
        Jp, _ = fk_jacobian(rest_pose())
        expected = np.broadcast_to(np.eye(3), (800, 3, 3))
        np.testing.assert_array_equal(Jp[:, :, 0:3], expected)

    def test_palm_points_insensitive_to_joints(self):
        surf = forward_kinematics(rest_pose())
        Jp, Jn = fk_jacobian(rest_pose())
        palm = surf.palm_indices()
        np.testing.assert_array_equal(Jp[palm][:, :, 6:], 0.0)
        np.testing.assert_array_equal(Jn[palm][:, :, 6:], 0.0)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        h = 1e-6
        worst = 0.0
        for _ in range(10):
            pose = random_pose(rng)
            Jp, Jn = fk_jacobian(pose)
            vec = pose.as_vector()
            fd_p = np.empty_like(Jp)
            fd_n = np.empty_like(Jn)
            for col in range(N_PARAMS):
                dv = np.zeros(N_PARAMS)
                dv[col] = h
                sp = forward_kinematics(HandPose.from_vector(vec + dv))
                sm = forward_kinematics(HandPose.from_vector(vec - dv))
                fd_p[:, :, col] = (sp.points - sm.points) / (2 * h)
                fd_n[:, :, col] = (sp.normals - sm.normals) / (2 * h)
            scale = max(np.abs(Jp).max(), 1.0)
            worst = max(worst, np.abs(Jp - fd_p).max() / scale)
            worst = max(worst, np.abs(Jn - fd_n).max() / max(np.abs(Jn).max(), 1.0))
        assert worst < 1e-5

    def test_pose_gradient_matches_jacobian_transpose(self):
        rng = np.random.default_rng(5)
        pose = random_pose(rng)
        state = fk_state(pose)
        Jp, Jn = fk_jacobian(pose)
        gp = rng.normal(size=(800, 3))
        gn = rng.normal(size=(800, 3))
        expected = np.einsum("sac,sa->c", Jp, gp) + np.einsum("sac,sa->c", Jn, gn)
        got = pose_gradient(state, gp, gn)
        np.testing.assert_allclose(got, expected, atol=1e-10)


class TestDerivedGeometry:
    def test_posed_solids_cover_surface(self):
        rng = np.random.default_rng(6)
        pose = random_pose(rng)
        state = fk_state(pose)
        solids = posed_solids(state)
        assert len(solids) == 16
        # every sampled surface point lies on the boundary of some solid
        dists = np.stack([np.abs(s.sdf(state.surface.points)) for s in solids])
        assert dists.min(axis=0).max() < 1e-9

    def test_middle_fingertip_moves_with_translation(self):
        tip0 = middle_fingertip(rest_pose())
        pose = rest_pose()
        pose.translation = np.array([0.0, 0.05, 0.0])
        tip1 = middle_fingertip(pose)
        np.testing.assert_allclose(tip1 - tip0, [0.0, 0.05, 0.0], atol=1e-12)

    def test_fingertip_beyond_palm(self):
        tip = middle_fingertip(rest_pose())
        assert tip[1] > 0.08
