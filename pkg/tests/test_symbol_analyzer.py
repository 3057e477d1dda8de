import os
import sys
import unittest

import numpy as np
from hypothesis import given, settings, strategies as st

# Add parent directory to path to allow imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from curvflow.core.exceptions import DimensionMismatchError
from curvflow.core.symbol_analyzer import (
    NOT_ELLIPTIC,
    NOT_STRONGLY_ELLIPTIC,
    STRONGLY_ELLIPTIC,
    classify,
    flow_coefficient,
    plane_wave_check,
    r_xi,
    sym2_basis,
    symbol,
    threshold,
    verdict_table,
)
from curvflow.core.tensor_core import Sym2, sym_inner, sym_norm2

dims = st.integers(min_value=3, max_value=8)
coefficient = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False, allow_infinity=False)


def _covector(seed, n):
    xi = np.random.default_rng(seed).standard_normal(n)
    return xi if np.any(xi) else np.ones(n)


class TestRXi(unittest.TestCase):
    """Test cases for R_ξ = ξ⊗ξ - |ξ|²g"""

    @given(dims, st.integers(min_value=0, max_value=10 ** 6))
    @settings(max_examples=50, deadline=None)
    def test_norm(self, n, seed):
        """Test |R_ξ|² = (n-1)|ξ|⁴"""
        xi = _covector(seed, n)
        g = Sym2.identity(n)
        expected = (n - 1) * np.dot(xi, xi) ** 2
        self.assertAlmostEqual(sym_norm2(r_xi(xi), g), expected, delta=1e-10 * expected)

    def test_length_mismatch(self):
        """Test that the covector length must equal n"""
        with self.assertRaises(DimensionMismatchError):
            r_xi([1.0, 0.0], 3)

    def test_basis_orthonormal(self):
        """Test that the Sym2 basis is orthonormal for the plain contraction"""
        basis = sym2_basis(4)
        gram = np.einsum("aij,bij->ab", basis, basis)
        np.testing.assert_allclose(gram, np.eye(10), atol=1e-15)


class TestSymbol(unittest.TestCase):
    """Test cases for the principal symbol"""

    def test_four_dim_eigenvalues(self):
        """Test eigenvalues -½ (nine times) and -¼ for n = 4, a = 1/12, |ξ| = 1"""
        op = symbol(4, 1.0 / 12.0, [1.0, 0.0, 0.0, 0.0])
        eigs = op.eigenvalues()
        self.assertEqual(len(eigs), 10)
        np.testing.assert_allclose(eigs[:9], -0.5, atol=1e-14)
        self.assertAlmostEqual(eigs[9], -0.25, places=14)

    @given(dims, coefficient, st.integers(min_value=0, max_value=10 ** 6))
    @settings(max_examples=100, deadline=None)
    def test_closed_form(self, n, a, seed):
        """Test the computed spectrum against the closed form"""
        op = symbol(n, a, _covector(seed, n))
        scale = op.xi_norm2 ** 2 * (1.0 + abs(a) * n)
        np.testing.assert_allclose(op.eigenvalues(), op.closed_form_eigenvalues(),
                                   atol=1e-10 * scale)

    def test_r_xi_direction(self):
        """Test that R_ξ is the distinguished eigenvector and its complement is killed"""
        n, a = 4, 0.3
        xi = np.array([1.0, 2.0, 0.0, -1.0])
        op = symbol(n, a, xi)
        x4 = op.xi_norm2 ** 2
        r = r_xi(xi)
        expected = (-0.5 + a * (n - 1)) * x4 * (n - 1) * x4
        self.assertAlmostEqual(op.r_xi_component(r), expected, delta=1e-10 * abs(expected))
        g = Sym2.identity(n)
        h = Sym2(np.diag([0.0, 0.0, 1.0, 0.0]))
        h_perp = Sym2(h.comps - sym_inner(h, r, g) / sym_norm2(r, g) * r.comps)
        self.assertAlmostEqual(op.r_xi_component(h_perp), 0.0, places=10)

    def test_zero_covector(self):
        """Test that ξ = 0 is rejected"""
        with self.assertRaises(ValueError):
            symbol(4, 0.1, np.zeros(4))

    def test_low_dimension(self):
        """Test that n < 3 is rejected"""
        with self.assertRaises(DimensionMismatchError):
            symbol(2, 0.1, [1.0, 0.0])
        with self.assertRaises(DimensionMismatchError):
            classify(2, 0.1)

    def test_plane_wave(self):
        """Test the symbol of R' against a plane-wave perturbation of the flat metric"""
        rng = np.random.default_rng(3)
        for n in (3, 4):
            xi = rng.standard_normal(n)
            amp = rng.standard_normal((n, n))
            amp = 0.5 * (amp + amp.T)
            self.assertLess(plane_wave_check(xi, amp), 1e-10)


class TestClassify(unittest.TestCase):
    """Test cases for ellipticity classes"""

    def test_threshold(self):
        """Test 1/(2(n-1))"""
        self.assertEqual(threshold(4), 1.0 / 6.0)
        self.assertEqual(threshold(3), 0.25)

    def test_four_dim(self):
        """Test the three classes around a = 1/6 in n = 4"""
        self.assertEqual(classify(4, 1.0 / 12.0).classification, STRONGLY_ELLIPTIC)
        self.assertEqual(classify(4, 1.0 / 6.0).classification, NOT_ELLIPTIC)
        self.assertEqual(classify(4, 0.5).classification, NOT_STRONGLY_ELLIPTIC)

    def test_tolerance_band(self):
        """Test that coefficients within atol of the threshold are not elliptic"""
        self.assertEqual(classify(4, 1.0 / 6.0 + 1e-12, atol=1e-9).classification, NOT_ELLIPTIC)
        self.assertEqual(classify(4, 1.0 / 6.0 + 1e-12).classification, NOT_STRONGLY_ELLIPTIC)

    @given(dims, coefficient)
    @settings(max_examples=200, deadline=None)
    def test_matches_spectrum(self, n, a):
        """Test that the class agrees with the sign of the top eigenvalue"""
        verdict = classify(n, a)
        top = symbol(n, a, np.eye(n)[0]).eigenvalues()[-1]
        if verdict.classification == STRONGLY_ELLIPTIC:
            self.assertLess(top, 0.0)
        elif verdict.classification == NOT_STRONGLY_ELLIPTIC:
            self.assertGreater(top, -1e-12)

    def test_grid(self):
        """Test the verdict table over n = 3..8"""
        ns = list(range(3, 9))
        table = verdict_table(ns, [0.0, 0.1, 0.25])
        self.assertEqual(len(table), 18)
        for v in table:
            expected = STRONGLY_ELLIPTIC if v.a < threshold(v.n) else (
                NOT_ELLIPTIC if v.a == threshold(v.n) else NOT_STRONGLY_ELLIPTIC)
            self.assertEqual(v.classification, expected, str(v))
        self.assertEqual(table[0].to_dict()["class"], STRONGLY_ELLIPTIC)


class TestFlowCoefficient(unittest.TestCase):
    """Test cases for gradient-flow coefficients"""

    def test_alpha_family(self):
        """Test a = (1-α)/(2(n-1)) for the F^α flow in n = 4"""
        self.assertEqual(flow_coefficient({"alpha": 1.0, "dim": 4}), 0.0)
        self.assertAlmostEqual(flow_coefficient({"alpha": 0.0, "dim": 4}), 1.0 / 6.0, places=15)

    def test_alpha_family_is_elliptic(self):
        """Test that every α in (0, 1] gives a strongly elliptic flow"""
        for n in range(3, 9):
            for alpha in (0.01, 0.5, 1.0):
                a = flow_coefficient({"alpha": alpha, "dim": n})
                self.assertEqual(classify(n, a).classification, STRONGLY_ELLIPTIC)

    def test_explicit_coefficient(self):
        """Test the {beta, a} form"""
        self.assertEqual(flow_coefficient({"beta": 0.5, "a": 0.2}), 0.2)

    def test_missing_keys(self):
        """Test that incomplete functional descriptions are rejected"""
        with self.assertRaises(ValueError):
            flow_coefficient({"alpha": 0.5})
        with self.assertRaises(DimensionMismatchError):
            flow_coefficient({"alpha": 0.5, "dim": 2})


if __name__ == '__main__':
    unittest.main()
