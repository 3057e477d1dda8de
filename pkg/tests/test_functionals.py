import os
import sys
import unittest

import numpy as np
from hypothesis import given, settings, strategies as st

# Add parent directory to path to allow imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from curvflow.core.exceptions import (
    DimensionMismatchError,
    ExponentRegimeError,
    HypothesisViolationError,
    MissingEulerCharacteristicError,
)
from curvflow.core.functionals import (
    evaluate,
    gursky_bound,
    pinching_verdicts,
    q_curvature,
    sigma2,
    sobolev_bound,
    trace_gradient_check,
)
from curvflow.core.geometry_catalog import (
    PI2,
    HomogeneousModel,
    flat_torus,
    round_sphere,
    sphere_product,
    su2_milnor,
)
from curvflow.core.tensor_core import Sym2, random_curvature

radius = st.floats(min_value=0.3, max_value=3.0, allow_nan=False, allow_infinity=False)


class TestEvaluate(unittest.TestCase):
    """Test cases for the quadratic functionals on catalog models"""

    def test_four_sphere(self):
        """Test F_Rm = 16π², F_R = 384π² and Gauss-Bonnet on S⁴(1)"""
        report = evaluate(round_sphere(4))
        self.assertAlmostEqual(report.F_Rm / PI2, 16.0, places=10)
        self.assertAlmostEqual(report.F_R / PI2, 384.0, places=9)
        self.assertAlmostEqual(report.F_Ric / PI2, 96.0, places=9)
        self.assertAlmostEqual(report.F_W, 0.0, places=10)
        self.assertLess(abs(report.gb_residual), report.gb_tolerance())

    def test_three_sphere(self):
        """Test F_Rm = 6π², F_Ric = 24π², F_R = 72π² on S³(1)"""
        report = evaluate(round_sphere(3))
        self.assertAlmostEqual(report.F_Rm / PI2, 6.0, places=10)
        self.assertAlmostEqual(report.F_Ric / PI2, 24.0, places=10)
        self.assertAlmostEqual(report.F_R / PI2, 72.0, places=10)
        self.assertIsNone(report.gb_residual)
        self.assertIsNone(report.q_integral)

    def test_sphere_product(self):
        """Test F_W = 64π²/3 and F_2 = F^½ = 32π²/3 on S²(1)×S²(1)"""
        report = evaluate(sphere_product(), 0.5)
        self.assertAlmostEqual(report.F_W / PI2, 64.0 / 3.0, places=10)
        self.assertAlmostEqual(report.F_2 / PI2, 32.0 / 3.0, places=10)
        self.assertAlmostEqual(report.F_alpha / PI2, 32.0 / 3.0, places=10)
        self.assertLess(abs(report.gb_residual), report.gb_tolerance())

    @given(radius, radius, st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=50, deadline=None)
    def test_gauss_bonnet(self, r, s, alpha):
        """Test F_W - ½F_Ric0 + F_R/24 = 32π² on every S²(r)×S²(s)"""
        report = evaluate(sphere_product(r, s), alpha)
        self.assertLess(abs(report.gb_residual), report.gb_tolerance())
        self.assertLess(report.decomposition_residual(), 1e-12)

    @given(radius, st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=30, deadline=None)
    def test_scale_invariance(self, c, alpha):
        """Test that four-dimensional quadratic functionals ignore homotheties"""
        product = sphere_product(1.0, 2.0)
        before = evaluate(product, alpha)
        after = evaluate(product.scaled(c), alpha)
        for name in ("F_Rm", "F_W", "F_Ric0", "F_R", "F_alpha"):
            b, a = getattr(before, name), getattr(after, name)
            self.assertAlmostEqual(a, b, delta=1e-10 * (1.0 + abs(b)))
        # three-dimensional functionals scale by c^(-1/2)
        model = su2_milnor(1.0, 1.5, 0.7)
        f3, f3c = evaluate(model).F_R, evaluate(model.scaled(c)).F_R
        self.assertAlmostEqual(f3c, c ** -0.5 * f3, delta=1e-10 * (1.0 + f3))

    def test_flat_torus(self):
        """Test that the Q-curvature integral and σ₂ vanish on T⁴"""
        report = evaluate(flat_torus(4))
        self.assertEqual(report.q_integral, 0.0)
        self.assertEqual(report.sigma2_integral, 0.0)

    def test_alpha_flag(self):
        """Test that α outside [0, 1] is computed and flagged"""
        report = evaluate(sphere_product(), 1.5)
        self.assertTrue(report.alpha_flagged)
        self.assertFalse(evaluate(sphere_product(), 1.0).alpha_flagged)

    def test_to_dict(self):
        """Test the π² unit block of the report dictionary"""
        data = evaluate(round_sphere(4)).to_dict()
        self.assertAlmostEqual(data["pi2_units"]["F_Rm"], 16.0, places=10)
        self.assertIn("gb_residual", data)
        self.assertNotIn("pi2_units", evaluate(round_sphere(4)).to_dict(pi2_units=False))

    def test_unknown_attribute(self):
        """Test that unknown functional names raise AttributeError"""
        with self.assertRaises(AttributeError):
            evaluate(round_sphere(4)).F_unknown


class TestPointwise(unittest.TestCase):
    """Test cases for pointwise scalar invariants"""

    def test_sigma2_identity(self):
        """Test σ₂(g) = n(n-1)/2"""
        self.assertAlmostEqual(sigma2(Sym2.identity(4), Sym2.identity(4)), 6.0, places=14)

    def test_q_curvature_sphere(self):
        """Test Q = R²/6 - ½|Ric|² = 6 on S⁴(1)"""
        self.assertAlmostEqual(q_curvature(round_sphere(4).curvature), 6.0, places=12)

    def test_q_curvature_dimension(self):
        """Test that Q-curvature refuses n = 3"""
        with self.assertRaises(DimensionMismatchError):
            q_curvature(round_sphere(3).curvature)

    def test_trace_gradient(self):
        """Test tr ∇F^α = 0 on models and random curvature tensors"""
        for alpha in (0.0, 0.3, 1.0):
            self.assertAlmostEqual(trace_gradient_check(sphere_product(1.0, 2.0), alpha), 0.0,
                                   places=12)
            cp = random_curvature(11, 4)
            scale = 1.0 + cp.rm_norm2()
            self.assertLess(abs(trace_gradient_check(cp, alpha)), 1e-10 * scale)


class TestGursky(unittest.TestCase):
    """Test cases for the Yamabe lower bound"""

    def test_four_sphere(self):
        """Test the bound 32π²/3 on S⁴(1)"""
        self.assertAlmostEqual(gursky_bound(round_sphere(4)) / PI2, 32.0 / 3.0, places=10)

    def test_sphere_product(self):
        """Test the bound 64π²/9 on S²(1)×S²(1)"""
        self.assertAlmostEqual(gursky_bound(sphere_product()) / PI2, 64.0 / 9.0, places=10)

    def test_requires_four_dimensions(self):
        """Test the dimension and Euler characteristic guards"""
        with self.assertRaises(DimensionMismatchError):
            gursky_bound(round_sphere(3))
        bare = HomogeneousModel("bare", round_sphere(4).curvature, 1.0)
        with self.assertRaises(MissingEulerCharacteristicError):
            gursky_bound(bare)


class TestPinching(unittest.TestCase):
    """Test cases for the pinching predicates"""

    def test_four_sphere_passes(self):
        """Test that every predicate holds on S⁴(1)"""
        verdict = pinching_verdicts(round_sphere(4), 0.5)
        for name, (holds, slack) in verdict.predicates.items():
            self.assertTrue(holds, f"{name} slack={slack}")
        self.assertAlmostEqual(verdict.details["Y2_upper"] / PI2, 32.0 / 3.0, places=10)

    def test_sphere_product_small_energy(self):
        """Test that S²×S² fails the small-energy predicate at α = 4/13"""
        verdict = pinching_verdicts(sphere_product(), 4.0 / 13.0)
        self.assertFalse(verdict.holds("small_energy"))
        self.assertAlmostEqual(verdict.slack("small_energy") / PI2, -160.0 / 13.0, places=9)

    @given(radius, radius, st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=50, deadline=None)
    def test_equivalent_forms(self, r, s, alpha):
        """Test that the integral forms agree with the Gauss-Bonnet rewritten forms"""
        verdict = pinching_verdicts(sphere_product(r, s), alpha)
        scale = 1e-10 * (PI2 + verdict.details["Y2_upper"]
                         + evaluate(sphere_product(r, s)).F_R)
        self.assertLess(verdict.details["pinching_equivalence_residual"], scale)
        self.assertLess(verdict.details["hypothesis_equivalence_residual"], scale)
        self.assertEqual(verdict.holds("singularity_hypothesis"),
                         verdict.holds("singularity_hypothesis_integral_form"))

    def test_verdict_dict(self):
        """Test the serialized predicate table"""
        data = pinching_verdicts(round_sphere(4)).to_dict()
        self.assertIn("rigidity_ylower", data["predicates"])
        self.assertIn("slack_pi2", data["predicates"]["pinching"])
        self.assertIsNotNone(data["details"]["equibounds_eps"])


class TestSobolev(unittest.TestCase):
    """Test cases for the Sobolev-constant bound"""

    @given(st.floats(min_value=0.1, max_value=10.0), st.sampled_from([3.0, 4.0, 6.0]))
    @settings(max_examples=50, deadline=None)
    def test_homogeneity(self, lam, p):
        """Test B(λ‖R‖_p) = λ^{p/(2p-n)} B(‖R‖_p) in n = 4"""
        base = sobolev_bound(10.0, 1.0, p, 1.0, 4)
        scaled = sobolev_bound(10.0, lam, p, 1.0, 4)
        exponent = p / (2 * p - 4)
        self.assertAlmostEqual(scaled, lam ** exponent * base, delta=1e-10 * (1.0 + scaled))

    def test_infinite_exponent(self):
        """Test that p = ∞ is linear in ‖R‖_∞"""
        self.assertAlmostEqual(sobolev_bound(10.0, 2.0, np.inf, 1.0, 4),
                               2.0 * sobolev_bound(10.0, 1.0, np.inf, 1.0, 4), places=12)

    def test_regime_guard(self):
        """Test that p <= n/2 is rejected"""
        with self.assertRaises(ExponentRegimeError):
            sobolev_bound(10.0, 1.0, 2.0, 1.0, 4)

    def test_hypothesis_guard(self):
        """Test that Y < 2/A² is rejected"""
        with self.assertRaises(HypothesisViolationError):
            sobolev_bound(1.0, 1.0, 3.0, 1.0, 4)


if __name__ == '__main__':
    unittest.main()
