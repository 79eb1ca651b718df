import os
import unittest
from unittest.mock import patch

import numpy as np

from src.estimation.estimator import (
    JointResidualModel,
    SolverConfig,
    compute_calibration,
    joint_error,
    recover_camera_pose,
    recover_joints,
)
from src.estimation.pipeline import estimate_frame, estimate_observation, link_overlay
from src.geometry.transforms import RigidTransform, se3_distance
from src.kinematics.chain import JointVector, forward_kinematics
from src.kinematics.chain_loader import REPO_ROOT, chain_from_dict, chain_to_dict, load_bundled_chain
from src.observation.detections import ObservationSet, build_observation_set, load_detection_file, load_encoder_file
from src.observation.registry import load_bundled_registry
from src.utils.exceptions import BaseUnobservedError, ConfigError, NumericalFailureError, UnobservableError

SAMPLE_FRAME = os.path.join(REPO_ROOT, "data", "frames", "sample_frame.json")
SAMPLE_ENCODERS = os.path.join(REPO_ROOT, "data", "frames", "sample_encoders.json")


def exact_observation(chain, theta, hidden=()):
    poses = forward_kinematics(chain, theta)
    return ObservationSet.from_link_poses(
        chain, [None if (j + 1) in hidden else p for j, p in enumerate(poses)])


class TestSolverConfig(unittest.TestCase):
    """求解器配置"""

    def test_defaults(self):
        cfg = SolverConfig.from_dict({})
        self.assertEqual(cfg.max_iterations, 100)
        self.assertEqual(cfg.rot_weight, 0.1)
        self.assertTrue(cfg.enforce_joint_limits)

    def test_max_step(self):
        self.assertEqual(SolverConfig().max_step, 0.5)
        self.assertIsNone(SolverConfig.from_dict({"max_step": None}).max_step)
        self.assertEqual(SolverConfig(max_step=0.2).make_solver().max_step, 0.2)
        with self.assertRaises(ConfigError):
            SolverConfig(max_step=0.0)

    def test_unknown_key(self):
        with self.assertRaises(ConfigError):
            SolverConfig.from_dict({"max_iter": 5})

    def test_invalid_values(self):
        with self.assertRaises(ConfigError):
            SolverConfig(rot_weight=0.0)
        with self.assertRaises(ConfigError):
            SolverConfig(max_iterations=0)
        with self.assertRaises(ConfigError):
            SolverConfig(link_weights={"wrist": -1.0})

    def test_overrides_skip_none(self):
        cfg = SolverConfig().with_overrides(rot_weight=0.5, max_iterations=None)
        self.assertEqual(cfg.rot_weight, 0.5)
        self.assertEqual(cfg.max_iterations, 100)


class TestResidualModel(unittest.TestCase):
    """残差与解析雅可比"""

    def setUp(self):
        self.chain = load_bundled_chain()
        self.rng = np.random.default_rng(21)

    def test_cost_matches_weighted_distance(self):
        links = self.chain.residual_links
        weights = [1.0, 2.0, 0.5, 1.0, 3.0, 1.0]
        for _ in range(20):
            truth = self.chain.sample_configuration(self.rng, 0.1)
            theta = truth.as_array() + self.rng.normal(0.0, 0.3, self.chain.dof)
            obs = exact_observation(self.chain, truth)
            residual, _ = JointResidualModel(self.chain, obs, links, 0.1, weights)(theta)
            poses = forward_kinematics(self.chain, theta)
            expected = sum(w * se3_distance(poses[j - 1], obs.pose(j), 0.1) ** 2 for j, w in zip(links, weights))
            self.assertAlmostEqual(float(residual @ residual), expected, places=10)

    def test_jacobian_matches_central_differences(self):
        h = 1e-6
        links = self.chain.residual_links
        for _ in range(20):
            truth = self.chain.sample_configuration(self.rng, 0.1)
            theta = truth.as_array() + self.rng.normal(0.0, 0.3, self.chain.dof)
            model = JointResidualModel(self.chain, exact_observation(self.chain, truth), links, 0.1,
                                       [1.0] * len(links))
            _, jac = model(theta)
            fd = np.zeros_like(jac)
            for i in range(self.chain.dof):
                step = np.zeros(self.chain.dof)
                step[i] = h
                fd[:, i] = (model(theta + step)[0] - model(theta - step)[0]) / (2.0 * h)
            np.testing.assert_allclose(jac, fd, rtol=1e-5, atol=1e-7)


class TestRecoverJoints(unittest.TestCase):
    """关节恢复"""

    def setUp(self):
        self.chain = load_bundled_chain()
        self.rng = np.random.default_rng(8)

    def test_fixed_point_from_zeros(self):
        for _ in range(100):
            truth = self.chain.sample_configuration(self.rng, 0.05)
            report = recover_joints(self.chain, exact_observation(self.chain, truth))
            self.assertTrue(report.converged, report.termination)
            self.assertLess(joint_error(report.theta_star, truth), 1e-4)
            self.assertEqual(report.initialization, "zeros")

    def test_iterate_leaves_joint_limit(self):
        truth = JointVector([0.3, -0.4, 0.5, 0.6, -0.8, 0.7])
        init = truth.as_array().copy()
        init[1] = self.chain.lower_limits[1]
        init[3] = self.chain.upper_limits[3]
        report = recover_joints(self.chain, exact_observation(self.chain, truth), init)
        self.assertTrue(report.converged, report.termination)
        np.testing.assert_allclose(report.theta_star.as_array(), truth.as_array(), atol=1e-6)

    def test_cost_trace_is_monotone(self):
        truth = self.chain.sample_configuration(self.rng, 0.05)
        report = recover_joints(self.chain, exact_observation(self.chain, truth))
        trace = report.cost_trace
        self.assertTrue(all(b <= a for a, b in zip(trace, trace[1:])))
        self.assertAlmostEqual(report.final_cost, trace[-1])
        self.assertLess(report.final_cost, 1e-12)

    def test_per_link_residuals(self):
        truth = self.chain.sample_configuration(self.rng, 0.05)
        report = recover_joints(self.chain, exact_observation(self.chain, truth, hidden=(3,)))
        self.assertEqual([r.link_index for r in report.per_link_residuals], [1, 2, 4, 5, 6])
        for residual in report.per_link_residuals:
            self.assertLess(residual.translation, 1e-6)
            self.assertLess(residual.rotation, 1e-5)

    def test_unobservable(self):
        with self.assertRaises(UnobservableError):
            recover_joints(self.chain, exact_observation(self.chain, np.zeros(6), hidden=range(1, 7)))

    def test_unobserved_joints_stay_at_init(self):
        truth = JointVector([0.3, -0.4, 0.5, 0.2, 0.1, 0.4])
        init = [0.0, 0.0, 0.1, -0.2, 0.3, 0.05]
        report = recover_joints(self.chain, exact_observation(self.chain, truth, hidden=(3, 4, 5, 6)), init)
        self.assertEqual(report.unobserved_joints, ["elbow_flex", "wrist_flex", "wrist_roll", "gripper"])
        np.testing.assert_allclose(report.theta_star.as_array()[2:], init[2:])
        np.testing.assert_allclose(report.theta_star.as_array()[:2], truth.as_array()[:2], atol=1e-6)
        self.assertFalse(report.degenerate_risk)

    def test_single_link_from_zeros_flags_degenerate_risk(self):
        truth = JointVector([0.3, -0.4, 0.5, 0.2, 0.1, 0.4])
        report = recover_joints(self.chain, exact_observation(self.chain, truth, hidden=(1, 2, 3, 4, 5)))
        self.assertTrue(report.degenerate_risk)
        self.assertTrue(any("degenerate" in w for w in report.warnings))

    def test_init_outside_limits_is_clamped(self):
        truth = JointVector([0.1] * 6)
        init = [0.5, 0.5, 0.5, 0.5, 0.5, 1.8]
        with self.assertLogs("src.estimation.estimator", level="WARNING"):
            report = recover_joints(self.chain, exact_observation(self.chain, truth), init)
        self.assertTrue(self.chain.within_limits(report.theta_star))
        self.assertLess(joint_error(report.theta_star, truth), 1e-4)

    def test_excluded_link_does_not_contribute(self):
        document = chain_to_dict(self.chain)
        document["joints"][5]["exclude_from_residuals"] = True
        chain = chain_from_dict(document)
        with self.assertRaises(UnobservableError):
            recover_joints(chain, exact_observation(chain, np.zeros(6), hidden=(1, 2, 3, 4, 5)))

    def test_unknown_link_weight(self):
        cfg = SolverConfig(link_weights={"tail": 2.0})
        with self.assertRaises(ConfigError):
            recover_joints(self.chain, exact_observation(self.chain, np.zeros(6)), cfg=cfg)

    def test_non_finite_cost(self):
        obs = exact_observation(self.chain, np.zeros(6))
        with patch.object(JointResidualModel, "__call__",
                          side_effect=lambda theta: (np.full(36, np.nan), np.zeros((36, 6)))):
            with self.assertRaises(NumericalFailureError) as ctx:
                recover_joints(self.chain, obs)
        self.assertEqual(ctx.exception.iterations, 0)

    def test_calibration(self):
        delta = compute_calibration([0.1, 0.2], [0.15, 0.1])
        np.testing.assert_allclose(delta.as_array(), [-0.05, 0.1])


class TestFramePipeline(unittest.TestCase):
    """单帧估计流程"""

    def setUp(self):
        self.chain = load_bundled_chain()
        self.registry = load_bundled_registry(self.chain)
        self.frame = load_detection_file(SAMPLE_FRAME)
        self.encoders = load_encoder_file(SAMPLE_ENCODERS, self.chain.dof)

    def test_sample_frame(self):
        estimate = estimate_frame(self.chain, self.registry, self.frame.detections, self.encoders,
                                  frame_id=self.frame.frame_id)
        report = estimate.report
        self.assertTrue(report.converged)
        self.assertEqual(report.initialization, "encoders")
        np.testing.assert_allclose(report.theta_star.as_array(), np.zeros(6), atol=1e-8)
        np.testing.assert_allclose(report.calibration_offset.as_array(), -self.encoders.as_array(), atol=1e-8)
        self.assertTrue(report.camera_pose.almost_equal(RigidTransform.identity()))
        self.assertEqual(estimate.to_dict()["visible_links"], [1, 2, 3, 4, 5, 6])

    def test_compare_init(self):
        estimate = estimate_frame(self.chain, self.registry, self.frame.detections, self.encoders,
                                  compare_init=True)
        comparison = estimate.comparison
        self.assertEqual(comparison.zeros.initialization, "zeros")
        self.assertEqual(comparison.encoders.initialization, "encoders")
        self.assertLess(comparison.joint_distance, 1e-6)
        self.assertIn("compare_init", estimate.to_dict())

    def test_camera_pose_needs_base(self):
        obs = exact_observation(self.chain, np.zeros(6))
        with self.assertRaises(BaseUnobservedError):
            recover_camera_pose(obs, self.registry)

    def test_camera_pose_from_sample(self):
        obs = build_observation_set(self.frame.detections, self.registry, self.chain)
        self.assertTrue(recover_camera_pose(obs, self.registry).almost_equal(RigidTransform.identity()))

    def test_encoder_fallback(self):
        obs = exact_observation(self.chain, np.zeros(6), hidden=range(1, 7))
        estimate = estimate_observation(self.chain, obs, self.encoders)
        report = estimate.report
        self.assertFalse(report.converged)
        self.assertEqual(report.initialization, "encoder_fallback")
        self.assertEqual(report.theta_star.to_list(), self.encoders.to_list())
        self.assertEqual(report.calibration_offset.to_list(), [0.0] * 6)

    def test_no_fallback_without_encoders(self):
        obs = exact_observation(self.chain, np.zeros(6), hidden=range(1, 7))
        with self.assertRaises(UnobservableError):
            estimate_observation(self.chain, obs)
        with self.assertRaises(UnobservableError):
            estimate_observation(self.chain, obs, self.encoders, SolverConfig(fallback_to_encoders=False))

    def test_zero_init_when_requested(self):
        obs = exact_observation(self.chain, np.zeros(6))
        estimate = estimate_observation(self.chain, obs, self.encoders, init_from_encoders=False)
        self.assertEqual(estimate.report.initialization, "zeros")
        self.assertIsNotNone(estimate.report.calibration_offset)

    def test_link_overlay(self):
        camera = RigidTransform.from_translation(0.4, 0.0, 0.3)
        rows = link_overlay(self.chain, JointVector.zeros(6), camera)
        self.assertEqual([r["link_name"] for r in rows], list(self.chain.link_names))
        base_in_camera = RigidTransform.from_dict(rows[0]["pose_in_camera"])
        self.assertTrue(base_in_camera.almost_equal(camera.inverse()))
        self.assertNotIn("pose_in_camera", link_overlay(self.chain, JointVector.zeros(6))[0])


if __name__ == '__main__':
    unittest.main()
