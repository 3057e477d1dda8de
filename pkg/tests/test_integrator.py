import os
import sys
import unittest

import numpy as np

# Add parent directory to path to allow imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from curvflow.config.settings import FlowControls
from curvflow.core.integrator import (
    COMPLETED,
    COUPLING,
    ERROR_WEIGHTS,
    MAX_STEPS,
    NODES,
    STEP_UNDERFLOW,
    STOPPED,
    WEIGHTS,
    CashKarpIntegrator,
)


def decay(t, y):
    return -y


class TestTableau(unittest.TestCase):
    """Test cases for the Butcher tableau"""

    def test_consistency(self):
        """Test row sums, weight sums and the error-weight sum"""
        self.assertAlmostEqual(float(np.sum(WEIGHTS)), 1.0, places=15)
        self.assertAlmostEqual(float(np.sum(ERROR_WEIGHTS)), 0.0, places=15)
        for node, row in zip(NODES, COUPLING):
            self.assertAlmostEqual(sum(row), node, places=15)


class TestCashKarpIntegrator(unittest.TestCase):
    """Test cases for adaptive stepping"""

    def setUp(self):
        self.controls = FlowControls(horizon=1.0, rtol=1e-11, atol=1e-12)

    def test_single_step(self):
        """Test one step of y' = -y against exp(-h)"""
        y_new, err = CashKarpIntegrator(decay, self.controls).step(0.0, np.array([1.0]), 0.1)
        self.assertAlmostEqual(y_new[0], np.exp(-0.1), delta=1e-8)
        self.assertLess(abs(err[0]), 1e-6)

    def test_exponential_decay(self):
        """Test y(1) = e⁻¹ for y' = -y"""
        result = CashKarpIntegrator(decay, self.controls).integrate(np.array([1.0, 2.0]))
        self.assertEqual(result.status, COMPLETED)
        self.assertAlmostEqual(result.times[-1], 1.0, places=12)
        np.testing.assert_allclose(result.states[-1], [np.exp(-1.0), 2 * np.exp(-1.0)], rtol=1e-9)
        self.assertGreater(result.accepted, 1)
        self.assertEqual(len(result.times), result.accepted + 1)

    def test_energy_guard_accepts_descent(self):
        """Test that a decreasing energy never triggers rejections"""
        integrator = CashKarpIntegrator(decay, self.controls, energy=lambda y: float(y @ y))
        result = integrator.integrate(np.array([1.0]))
        self.assertEqual(result.status, COMPLETED)
        self.assertEqual(result.monotonicity_rejections, 0)

    def test_energy_guard_rejects_ascent(self):
        """Test that an increasing energy is rejected until the step limit is reached"""
        controls = FlowControls(horizon=1.0, max_steps=100)
        integrator = CashKarpIntegrator(lambda t, y: y, controls, energy=lambda y: float(y[0]))
        result = integrator.integrate(np.array([1.0]))
        self.assertEqual(result.status, MAX_STEPS)
        self.assertGreater(result.monotonicity_rejections, 0)
        self.assertLess(result.times[-1], 1e-6)

    def test_callback_stop(self):
        """Test that the callback ends integration"""
        result = CashKarpIntegrator(decay, FlowControls(horizon=10.0)).integrate(
            np.array([1.0]), callback=lambda t, y: y[0] < 0.5)
        self.assertEqual(result.status, STOPPED)
        self.assertLess(result.states[-1][0], 0.5)
        self.assertLess(result.times[-1], 10.0)

    def test_callback_at_start(self):
        """Test that a callback true at t0 returns the initial state only"""
        result = CashKarpIntegrator(decay, self.controls).integrate(
            np.array([1.0]), callback=lambda t, y: True)
        self.assertEqual(result.status, STOPPED)
        self.assertEqual(len(result.states), 1)

    def test_stage_failure_underflow(self):
        """Test that a domain boundary causes step underflow rather than an exception"""
        def bounded(t, y):
            if t > 0.5:
                raise ValueError("outside the domain")
            return -y

        result = CashKarpIntegrator(bounded, self.controls).integrate(np.array([1.0]))
        self.assertEqual(result.status, STEP_UNDERFLOW)
        self.assertGreater(result.rejected, 0)
        self.assertLessEqual(result.times[-1], 0.5)
        self.assertGreater(result.times[-1], 0.5 - 1e-6)

    def test_to_dict(self):
        """Test the summary dictionary"""
        result = CashKarpIntegrator(decay, self.controls).integrate(np.array([1.0]))
        data = result.to_dict()
        self.assertEqual(data["status"], COMPLETED)
        self.assertAlmostEqual(data["final_time"], 1.0, places=12)


if __name__ == '__main__':
    unittest.main()
