import os
import sys
import unittest

import numpy as np
from hypothesis import given, settings, strategies as st

# Add parent directory to path to allow imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from curvflow.core.exceptions import (
    InsufficientDegreeError,
    NotPositiveDefiniteError,
    ValenceError,
)
from curvflow.core.jet_chart import (
    Jet,
    JetGeometry,
    JetMetric,
    apply_operator,
    basis_size,
    conformal_line_metric,
    curvature_at_origin,
    euclidean_metric,
    jet_einsum,
    jet_inverse_metric,
    random_direction,
    random_metric,
    random_scalar,
    sphere_normal_metric,
    verify_first_variations,
    verify_identities,
)


def _product(a, b):
    return jet_einsum(",->", a, b)


class TestJetAlgebra(unittest.TestCase):
    """Test cases for truncated jet arithmetic"""

    def test_basis_size(self):
        """Test the number of monomials of degree <= d"""
        self.assertEqual(basis_size(3, 2), 10)
        self.assertEqual(basis_size(4, 6), 210)

    def test_truncated_product(self):
        """Test (1 + x)(1 - x) = 1 - x² at degree 2 and 1 at degree 1"""
        for degree, expected in ((2, -1.0), (1, 0.0)):
            one = Jet.constant(2, degree, 1.0)
            x = Jet.variable(2, degree, 0)
            prod = _product(one + x, one - x)
            self.assertEqual(prod.coeff((0, 0)), 1.0)
            self.assertEqual(prod.coeff((1, 0)), 0.0)
            self.assertEqual(prod.coeff((2, 0)), expected)

    @given(st.integers(min_value=0, max_value=10 ** 6))
    @settings(max_examples=25, deadline=None)
    def test_associativity(self, seed):
        """Test (ab)c = a(bc) at fixed degree"""
        a, b, c = (random_scalar(seed + k, 3, 4) for k in range(3))
        left = _product(_product(a, b), c)
        right = _product(a, _product(b, c))
        np.testing.assert_allclose(left.coeffs, right.coeffs, atol=1e-14)

    def test_derivative_lowers_degree(self):
        """Test ∂_0 x_0² = 2x_0"""
        sq = Jet.from_terms(2, 3, {(2, 0): 1.0})
        d = sq.derivative(0)
        self.assertEqual(d.degree, 2)
        self.assertEqual(d.coeff((1, 0)), 2.0)

    def test_metric_must_be_positive(self):
        """Test that g(0) must be positive definite"""
        coeffs = np.zeros((2, 2, basis_size(2, 2)))
        coeffs[..., 0] = np.diag([1.0, -1.0])
        with self.assertRaises(NotPositiveDefiniteError):
            JetMetric(coeffs, 2, 2)


class TestInverseMetric(unittest.TestCase):
    """Test cases for the jet inverse of a metric"""

    def test_flat(self):
        """Test that δ inverts to δ"""
        inv = jet_inverse_metric(euclidean_metric(3, 4))
        np.testing.assert_array_equal(inv.value(), np.eye(3))
        self.assertEqual(np.max(np.abs(inv.coeffs[..., 1:])), 0.0)

    def test_geometric_series(self):
        """Test ((1 + x₁)δ)⁻¹ = (1 - x₁ + x₁² - x₁³)δ to degree 3"""
        inv = jet_inverse_metric(conformal_line_metric(3, 3))
        expected = Jet.from_terms(3, 3, {(k, 0, 0): (-1.0) ** k for k in range(4)})
        for i in range(3):
            np.testing.assert_allclose(inv.coeffs[i, i], expected.coeffs, atol=1e-12)
        self.assertEqual(np.max(np.abs(inv.coeffs[0, 1])), 0.0)

    @given(st.integers(min_value=0, max_value=10 ** 6), st.sampled_from([3, 4]))
    @settings(max_examples=20, deadline=None)
    def test_composition(self, seed, n):
        """Test g·g⁻¹ = identity as jets"""
        g = random_metric(seed, n, 4)
        prod = jet_einsum("ij,jk->ik", g, jet_inverse_metric(g))
        identity = np.zeros_like(prod.coeffs)
        identity[..., 0] = np.eye(n)
        np.testing.assert_allclose(prod.coeffs, identity, atol=1e-13)


class TestCurvatureAtOrigin(unittest.TestCase):
    """Test cases for curvature of metric jets"""

    def test_flat(self):
        """Test that the flat metric has vanishing Rm and ∇Rm"""
        for t in curvature_at_origin(euclidean_metric(3, 4), derivs=2):
            self.assertLess(np.max(np.abs(t.value())), 1e-14)

    def test_sphere_normal_coordinates(self):
        """Test Rm(0)_1212 = K from the normal-coordinate expansion"""
        for n in (3, 4):
            for k in (1.0, 0.25):
                rm = curvature_at_origin(sphere_normal_metric(n, 4, k))[0].value()
                self.assertAlmostEqual(rm[0, 1, 0, 1], k, delta=1e-10)
                self.assertAlmostEqual(rm[1, 2, 1, 2], k, delta=1e-10)

    def test_insufficient_degree(self):
        """Test that ∇²Rm needs a degree-4 jet"""
        with self.assertRaises(InsufficientDegreeError):
            curvature_at_origin(random_metric(0, 3, 3), derivs=2)

    def test_random_metric_symmetries(self):
        """Test that Rm keeps its slot symmetries and ∇²Rm is finite"""
        rm, _, nabla2 = curvature_at_origin(random_metric(7, 4, 6), derivs=2)
        r = rm.value()
        np.testing.assert_allclose(r, -r.transpose(1, 0, 2, 3), atol=1e-12)
        np.testing.assert_allclose(r, -r.transpose(0, 1, 3, 2), atol=1e-12)
        np.testing.assert_allclose(r, r.transpose(2, 3, 0, 1), atol=1e-12)
        self.assertTrue(np.all(np.isfinite(nabla2.value())))


class TestOperators(unittest.TestCase):
    """Test cases for the double-form operators"""

    def test_second_bianchi(self):
        """Test D Rm = 0 at the origin"""
        geom = JetGeometry(random_metric(3, 4, 4))
        d_rm = apply_operator("D", geom.rm, geom)
        self.assertLess(np.max(np.abs(d_rm.value())), 1e-10)

    def test_contracted_bianchi(self):
        """Test δ̃Ric + ½DR = 0"""
        geom = JetGeometry(random_metric(4, 3, 4))
        lhs = apply_operator("delta_tilde", geom.ric, geom)
        rhs = apply_operator("D", geom.scal, geom)
        self.assertLess(np.max(np.abs(lhs.value() + 0.5 * rhs.value())), 1e-10)

    def test_unknown_operator(self):
        """Test that unknown operator names are rejected"""
        geom = JetGeometry(euclidean_metric(3, 3))
        with self.assertRaises(ValueError):
            apply_operator("curl", geom.ric, geom)

    def test_valence_mismatch(self):
        """Test that δ refuses a scalar"""
        geom = JetGeometry(euclidean_metric(3, 3))
        with self.assertRaises(ValenceError):
            apply_operator("delta", geom.scal, geom)


class TestIdentitySuite(unittest.TestCase):
    """Test cases for the identity and first-variation suites"""

    def test_flat_metric_is_exact(self):
        """Test that every identity residual vanishes on the flat metric"""
        for n in (3, 4):
            reports = verify_identities(0, n, 6, metric=euclidean_metric(n, 6))
            self.assertTrue(reports)
            for r in reports:
                self.assertLess(r.residual, 1e-9, str(r))

    def test_random_metrics(self):
        """Test all identities on seeded random metrics"""
        for n in (3, 4):
            for seed in range(3):
                for r in verify_identities(seed, n, 6):
                    self.assertTrue(r.passed(), str(r))

    def test_report_names(self):
        """Test that the suite covers the divergence and commutation identities"""
        names = {r.name for r in verify_identities(1, 3, 6)}
        for expected in ("second_bianchi", "contracted_bianchi", "divergence_curvature",
                         "divergence_weyl", "delta_d_scalar_metric", "delta_d_ricci",
                         "ricci_identity", "trace_delta_sign", "weitzenbock_laplacian",
                         "fourth_order_trace"):
            self.assertIn(expected, names)

    def test_low_degree(self):
        """Test that the suite refuses jets below degree 4"""
        with self.assertRaises(InsufficientDegreeError):
            verify_identities(0, 3, 3)

    def test_first_variations(self):
        """Test the first-variation formulas against the complex-step derivative"""
        for n in (3, 4):
            reports = verify_first_variations(2, n, 6)
            names = {r.name for r in reports}
            self.assertTrue({"volume_density", "inverse_metric", "christoffel", "riemann",
                             "ricci", "scalar", "scalar_homothety"} <= names)
            for r in reports:
                self.assertTrue(r.passed(), str(r))

    def test_flat_scalar_variation(self):
        """Test R'(h) = δδ̃h + Δ tr h on the flat background"""
        for r in verify_first_variations(5, 3, 4, metric=euclidean_metric(3, 4)):
            if r.name == "scalar":
                self.assertLess(r.residual, 1e-9)

    def test_deterministic(self):
        """Test that reports repeat for the same seed"""
        first = [r.to_dict() for r in verify_identities(9, 3, 5)]
        second = [r.to_dict() for r in verify_identities(9, 3, 5)]
        self.assertEqual(first, second)

    def test_direction_valence(self):
        """Test that a random direction is a (1,1) double-form"""
        self.assertEqual(random_direction(0, 3, 4).valence, (1, 1))


if __name__ == '__main__':
    unittest.main()
