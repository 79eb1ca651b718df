import math
import pickle
import unittest

import numpy as np

from src.geometry.transforms import (
    RigidTransform,
    Rotation,
    Twist,
    compose,
    hat,
    inverse,
    pose_error,
    rot_x,
    rot_z,
    se3_distance,
    se3_exp,
    se3_log,
    so3_exp,
    so3_log,
    so3_right_jacobian_inverse,
    vee,
)
from src.utils.exceptions import BranchAmbiguityError, ParseError, ValidationError


def random_twist(rng, max_angle=math.pi - 1e-2, translation_scale=1.0):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, max_angle)
    return Twist.from_parts(axis * angle, rng.normal(0.0, translation_scale, size=3))


class TestGroupAxioms(unittest.TestCase):
    """SE(3)群公理的随机性质测试"""

    def setUp(self):
        self.rng = np.random.default_rng(20240501)

    def test_compose_with_inverse_is_identity(self):
        identity = RigidTransform.identity()
        for _ in range(2000):
            t = RigidTransform.random(self.rng)
            self.assertTrue(compose(t, inverse(t)).almost_equal(identity))
            self.assertTrue(compose(inverse(t), t).almost_equal(identity))

    def test_composition_is_associative(self):
        for _ in range(2000):
            a, b, c = (RigidTransform.random(self.rng) for _ in range(3))
            left = a.compose(b).compose(c)
            right = a.compose(b.compose(c))
            self.assertTrue(left.almost_equal(right))

    def test_identity_is_neutral(self):
        identity = RigidTransform.identity()
        for _ in range(200):
            t = RigidTransform.random(self.rng)
            self.assertTrue((identity @ t).almost_equal(t))
            self.assertTrue((t @ identity).almost_equal(t))

    def test_quarter_turn_composition(self):
        quarter = RigidTransform(Rotation.about_axis([0.0, 0.0, 1.0], math.pi / 2), np.array([1.0, 0.0, 0.0]))
        twice = quarter.compose(quarter)
        np.testing.assert_allclose(twice.rotation.matrix, rot_z(math.pi).rotation.matrix, atol=1e-12)
        np.testing.assert_allclose(twice.translation, [1.0, 1.0, 0.0], atol=1e-12)

        inv = quarter.inverse()
        np.testing.assert_allclose(inv.rotation.matrix, rot_z(-math.pi / 2).rotation.matrix, atol=1e-12)
        np.testing.assert_allclose(inv.translation, [0.0, 1.0, 0.0], atol=1e-12)

    def test_matrix_matches_homogeneous_product(self):
        for _ in range(200):
            a, b = RigidTransform.random(self.rng), RigidTransform.random(self.rng)
            np.testing.assert_allclose((a @ b).as_matrix(), a.as_matrix() @ b.as_matrix(), atol=1e-12)

    def test_orthonormality_after_many_compositions(self):
        step = RigidTransform.random(self.rng)
        current = RigidTransform.identity()
        for _ in range(1000):
            current = current.compose(step)
        self.assertLess(current.rotation.orthonormality_defect(), 1e-9)
        self.assertGreater(np.linalg.det(current.rotation.matrix), 0.0)

    def test_apply_matches_matrix(self):
        t = RigidTransform.random(self.rng)
        points = self.rng.normal(size=(5, 3))
        homogeneous = np.hstack([points, np.ones((5, 1))]) @ t.as_matrix().T
        np.testing.assert_allclose(t.apply(points), homogeneous[:, :3], atol=1e-12)


class TestExpLog(unittest.TestCase):
    """指数/对数映射"""

    def setUp(self):
        self.rng = np.random.default_rng(7)

    def test_round_trip(self):
        for _ in range(3000):
            twist = random_twist(self.rng)
            back = se3_log(se3_exp(twist))
            np.testing.assert_allclose(back.vector, twist.vector, atol=1e-8)

    def test_round_trip_small_angles(self):
        for angle in (0.0, 1e-12, 1e-9, 5e-8, 1e-7, 2e-7, 1e-5):
            axis = self.rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            twist = Twist.from_parts(axis * angle, self.rng.normal(size=3))
            np.testing.assert_allclose(se3_log(se3_exp(twist)).vector, twist.vector, atol=1e-10)

    def test_exp_of_pure_translation(self):
        t = se3_exp(Twist.from_parts([0.0, 0.0, 0.0], [1.0, 2.0, 3.0]))
        np.testing.assert_allclose(t.translation, [1.0, 2.0, 3.0])
        self.assertAlmostEqual(t.rotation.angle(), 0.0)

    def test_log_near_pi_raises_branch_ambiguity(self):
        t = RigidTransform(Rotation.about_axis([0.0, 0.0, 1.0], math.pi), np.zeros(3))
        with self.assertRaises(BranchAmbiguityError):
            se3_log(t)
        t = RigidTransform(Rotation.about_axis([1.0, 1.0, 0.0], math.pi - 1e-7), np.ones(3))
        with self.assertRaises(BranchAmbiguityError):
            se3_log(t)

    def test_so3_log_defined_at_pi(self):
        r = so3_exp([0.0, math.pi, 0.0])
        omega = so3_log(r)
        self.assertAlmostEqual(float(np.linalg.norm(omega)), math.pi, places=9)
        np.testing.assert_allclose(so3_exp(omega), r, atol=1e-9)

    def test_so3_log_near_pi(self):
        for angle in (math.pi - 1e-3, math.pi - 1e-5, math.pi - 1e-8):
            axis = np.array([1.0, 2.0, -0.5]) / np.linalg.norm([1.0, 2.0, -0.5])
            r = so3_exp(axis * angle)
            np.testing.assert_allclose(so3_exp(so3_log(r)), r, atol=1e-9)

    def test_right_jacobian_inverse(self):
        for _ in range(200):
            phi = random_twist(self.rng, max_angle=2.5).rotational
            delta = self.rng.normal(size=3) * 1e-6
            perturbed = so3_log(so3_exp(phi) @ so3_exp(delta))
            np.testing.assert_allclose(perturbed - phi, so3_right_jacobian_inverse(phi) @ delta, atol=1e-10)

    def test_hat_vee(self):
        v = np.array([0.3, -1.2, 2.0])
        np.testing.assert_allclose(vee(hat(v)), v)
        np.testing.assert_allclose(hat(v) @ np.array([1.0, 0.5, -0.2]), np.cross(v, [1.0, 0.5, -0.2]))


class TestDistance(unittest.TestCase):
    """se3_distance 的度量性质"""

    def setUp(self):
        self.rng = np.random.default_rng(99)

    def test_metric_properties(self):
        for _ in range(2000):
            a, b, c = (RigidTransform.random(self.rng) for _ in range(3))
            dab = se3_distance(a, b)
            self.assertGreaterEqual(dab, 0.0)
            self.assertAlmostEqual(dab, se3_distance(b, a), places=12)
            self.assertLess(se3_distance(a, a), 1e-12)
            self.assertLessEqual(se3_distance(a, c), dab + se3_distance(b, c) + 1e-12)

    def test_quarter_turn_distance(self):
        d = se3_distance(RigidTransform.identity(), rot_z(math.pi / 2), rot_weight=2.0)
        self.assertAlmostEqual(d, math.pi, places=12)

    def test_left_invariance(self):
        for _ in range(500):
            a, b, g = (RigidTransform.random(self.rng) for _ in range(3))
            self.assertAlmostEqual(se3_distance(g @ a, g @ b), se3_distance(a, b), places=9)

    def test_rot_weight(self):
        a = RigidTransform.identity()
        b = RigidTransform(Rotation.about_axis([0.0, 0.0, 1.0], 0.5), np.array([0.3, 0.0, 0.4]))
        self.assertAlmostEqual(se3_distance(a, b, rot_weight=0.1), math.sqrt(0.25 + 0.05 ** 2))
        self.assertAlmostEqual(se3_distance(a, b, rot_weight=1.0), math.sqrt(0.25 + 0.25))
        with self.assertRaises(ValidationError):
            se3_distance(a, b, rot_weight=0.0)

    def test_pose_error(self):
        a = RigidTransform.from_translation(0.0, 0.0, 0.0)
        b = rot_x(0.2) @ RigidTransform.from_translation(0.0, 0.003, 0.004)
        dt, dr = pose_error(a, b)
        self.assertAlmostEqual(dt, 0.005)
        self.assertAlmostEqual(dr, 0.2)


class TestSerialization(unittest.TestCase):
    """四元数与文档格式"""

    def test_quaternion_is_canonical(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            r = Rotation.random(rng)
            q = r.as_quaternion()
            self.assertGreaterEqual(q[0], 0.0)
            self.assertAlmostEqual(float(np.linalg.norm(q)), 1.0)
            np.testing.assert_allclose(Rotation.from_quaternion(q).matrix, r.matrix, atol=1e-12)

    def test_non_unit_quaternion_rejected(self):
        with self.assertRaises(ValidationError):
            Rotation.from_quaternion([1.0, 0.1, 0.0, 0.0])
        with self.assertRaises(ParseError) as ctx:
            RigidTransform.from_dict({"translation": [0, 0, 0], "quaternion": [2.0, 0, 0, 0]}, "pose.json", "pose")
        self.assertEqual(ctx.exception.location, "pose.quaternion")

    def test_missing_field_location(self):
        with self.assertRaises(ParseError) as ctx:
            RigidTransform.from_dict({"quaternion": [1.0, 0, 0, 0]}, "pose.json", "markers[1]")
        self.assertEqual(ctx.exception.location, "markers[1].translation")

    def test_reflection_rejected(self):
        with self.assertRaises(ValidationError):
            Rotation(np.diag([1.0, 1.0, -1.0]))

    def test_dict_round_trip(self):
        t = RigidTransform(Rotation.about_axis([0.0, 1.0, 0.0], 0.7), np.array([0.1, -0.2, 0.3]))
        self.assertTrue(RigidTransform.from_dict(t.to_dict()).almost_equal(t, 1e-12, 1e-9))

    def test_pickle_is_bitwise_exact(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            t = RigidTransform.random(rng) @ RigidTransform.random(rng)
            restored = pickle.loads(pickle.dumps(t))
            self.assertTrue(np.array_equal(restored.rotation.matrix, t.rotation.matrix))
            self.assertTrue(np.array_equal(restored.translation, t.translation))
        with self.assertRaises(AttributeError):
            restored.rotation._matrix = np.eye(3)

    def test_from_matrix_validates_last_row(self):
        m = np.eye(4)
        m[3, 0] = 1.0
        with self.assertRaises(ValidationError):
            RigidTransform.from_matrix(m)


if __name__ == '__main__':
    unittest.main()
