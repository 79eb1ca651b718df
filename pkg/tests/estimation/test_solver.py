import unittest

import numpy as np

from src.estimation.solver import LevenbergMarquardt
from src.utils.exceptions import NumericalFailureError


def rosenbrock(x):
    residual = np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])
    jac = np.array([[-20.0 * x[0], 10.0], [-1.0, 0.0]])
    return residual, jac


class TestLevenbergMarquardt(unittest.TestCase):
    """LM 求解器测试"""

    def test_linear_least_squares(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(12, 4))
        b = rng.normal(size=12)
        result = LevenbergMarquardt().solve(lambda x: (a @ x - b, a), np.zeros(4))
        expected = np.linalg.lstsq(a, b, rcond=None)[0]
        self.assertTrue(result.converged)
        np.testing.assert_allclose(result.x, expected, atol=1e-8)

    def test_rosenbrock(self):
        result = LevenbergMarquardt(max_iterations=200).solve(rosenbrock, np.array([-1.2, 1.0]))
        self.assertTrue(result.converged)
        np.testing.assert_allclose(result.x, [1.0, 1.0], atol=1e-6)

    def test_cost_trace_is_non_increasing(self):
        result = LevenbergMarquardt(max_iterations=200).solve(rosenbrock, np.array([-1.2, 1.0]))
        self.assertGreater(len(result.cost_trace), 1)
        self.assertTrue(all(b <= a for a, b in zip(result.cost_trace, result.cost_trace[1:])))
        self.assertEqual(result.cost, result.cost_trace[-1])

    def test_already_optimal(self):
        result = LevenbergMarquardt().solve(lambda x: (x - 1.0, np.eye(2)), np.ones(2))
        self.assertTrue(result.converged)
        self.assertEqual(result.termination, "gradient")
        self.assertEqual(result.iterations, 0)

    def test_bounds_keep_iterate_in_box(self):
        result = LevenbergMarquardt().solve(lambda x: (x - 5.0, np.eye(1)), np.zeros(1),
                                            bounds=(np.array([-1.0]), np.array([1.0])))
        self.assertTrue(result.converged)
        self.assertAlmostEqual(float(result.x[0]), 1.0)

    def test_free_coordinates_move_while_bound_is_active(self):
        def fn(x):
            residual = np.array([x[0] - 5.0, 3.0 * (x[1] - 0.5 * x[0])])
            return residual, np.array([[1.0, 0.0], [-1.5, 3.0]])

        bounds = (np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        result = LevenbergMarquardt().solve(fn, np.array([1.0, -1.0]), bounds=bounds)
        self.assertTrue(result.converged)
        np.testing.assert_allclose(result.x, [1.0, 0.5], atol=1e-8)

    def test_iterate_leaves_bound_when_gradient_points_inward(self):
        bounds = (np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        result = LevenbergMarquardt().solve(lambda x: (x - np.array([0.2, -0.4]), np.eye(2)),
                                            np.array([1.0, -1.0]), bounds=bounds)
        self.assertTrue(result.converged)
        np.testing.assert_allclose(result.x, [0.2, -0.4], atol=1e-8)

    def test_free_coordinates(self):
        x = np.array([-1.0, 1.0, 0.0, 1.0])
        gradient = np.array([1.0, -1.0, 1.0, 1.0])
        bounds = (-np.ones(4), np.ones(4))
        free = LevenbergMarquardt.free_coordinates(x, gradient, bounds)
        self.assertEqual(free.tolist(), [False, False, True, True])
        self.assertTrue(LevenbergMarquardt.free_coordinates(x, gradient, None).all())

    def test_max_step_caps_step_length(self):
        result = LevenbergMarquardt(max_iterations=1, max_step=0.5).solve(
            lambda x: (x - 10.0, np.eye(1)), np.zeros(1))
        self.assertAlmostEqual(float(result.x[0]), 0.5)
        result = LevenbergMarquardt(max_iterations=200, max_step=0.5).solve(
            lambda x: (x - 10.0, np.eye(1)), np.zeros(1))
        self.assertTrue(result.converged)
        self.assertAlmostEqual(float(result.x[0]), 10.0, places=8)

    def test_max_iterations(self):
        result = LevenbergMarquardt(max_iterations=1).solve(rosenbrock, np.array([-1.2, 1.0]))
        self.assertFalse(result.converged)
        self.assertEqual(result.termination, "max_iterations")
        self.assertEqual(result.iterations, 1)

    def test_non_finite_cost_keeps_last_iterate(self):
        calls = []

        def fn(x):
            calls.append(x.copy())
            if len(calls) > 1:
                return np.array([np.nan]), np.eye(1)
            return x - 5.0, np.eye(1)

        with self.assertRaises(NumericalFailureError) as ctx:
            LevenbergMarquardt().solve(fn, np.array([1.0]))
        self.assertEqual(ctx.exception.last_theta, [1.0])
        self.assertEqual(ctx.exception.iterations, 1)
        self.assertEqual(ctx.exception.exit_code, 6)

    def test_non_finite_initial_cost(self):
        with self.assertRaises(NumericalFailureError) as ctx:
            LevenbergMarquardt().solve(lambda x: (np.array([np.inf]), np.eye(1)), np.zeros(1))
        self.assertEqual(ctx.exception.iterations, 0)


if __name__ == '__main__':
    unittest.main()
