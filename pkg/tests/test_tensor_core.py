import os
import sys
import unittest

import numpy as np
from hypothesis import given, settings, strategies as st

# Add parent directory to path to allow imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from curvflow.core.exceptions import (
    BianchiError,
    DimensionMismatchError,
    NotPositiveDefiniteError,
    SymmetryError,
)
from curvflow.core.geometry_catalog import round_sphere, sphere_product
from curvflow.core.tensor_core import (
    DoubleForm22,
    Sym2,
    compose,
    decompose,
    df_inner,
    df_norm2,
    kulkarni_nomizu,
    psmajor_sides,
    psmajor_split,
    random_curvature,
    random_curvature_tensor,
    random_sym2,
    ring_action,
    sym_inner,
    sym_norm2,
    trace,
    vee_square,
)

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


class TestSym2(unittest.TestCase):
    """Test cases for symmetric 2-tensors"""

    def test_rejects_asymmetric(self):
        """Test that visibly asymmetric components are rejected"""
        with self.assertRaises(SymmetryError):
            Sym2([[1.0, 2.0], [0.0, 1.0]])

    def test_rejects_non_square(self):
        """Test that a non-square array is rejected"""
        with self.assertRaises(DimensionMismatchError):
            Sym2(np.zeros((2, 3)))

    def test_components_are_read_only(self):
        """Test that values are immutable after construction"""
        g = Sym2.identity(3)
        with self.assertRaises(ValueError):
            g.comps[0, 0] = 2.0

    def test_inverse_needs_positive_metric(self):
        """Test that contractions refuse an indefinite metric"""
        with self.assertRaises(NotPositiveDefiniteError):
            trace(Sym2.identity(3), Sym2.diag([1.0, -1.0, 1.0]))

    def test_compose_identity(self):
        """Test compose(g, g) = g"""
        g = Sym2.identity(4)
        np.testing.assert_allclose(compose(g, g, g).comps, g.comps)


class TestKulkarniNomizu(unittest.TestCase):
    """Test cases for the Kulkarni-Nomizu product"""

    def test_metric_square(self):
        """Test (g∧g)_1212 = 2"""
        g = Sym2.identity(4)
        gg = kulkarni_nomizu(g, g)
        self.assertEqual(gg.comps[0, 1, 0, 1], 2.0)
        self.assertTrue(gg.bianchi)

    def test_zero_factor(self):
        """Test g∧0 = 0"""
        g = Sym2.identity(4)
        self.assertEqual(np.max(np.abs(kulkarni_nomizu(g, Sym2.zero(4)).comps)), 0.0)

    def test_dimension_mismatch(self):
        """Test that factors of different dimension are rejected"""
        with self.assertRaises(DimensionMismatchError):
            kulkarni_nomizu(Sym2.identity(3), Sym2.identity(4))

    @given(seeds, st.sampled_from([3, 4]))
    @settings(max_examples=50, deadline=None)
    def test_product_norm(self, seed, n):
        """Test ‖u∧v‖² = ‖u‖²‖v‖² + ⟨u,v⟩² - 2⟨u∘u, v∘v⟩"""
        rng = np.random.default_rng(seed)
        g = Sym2.identity(n)
        u, v = random_sym2(rng, n), random_sym2(rng, n)
        lhs = df_norm2(kulkarni_nomizu(u, v), g)
        rhs = (sym_norm2(u, g) * sym_norm2(v, g) + sym_inner(u, v, g) ** 2
               - 2 * sym_inner(compose(u, u, g), compose(v, v, g), g))
        self.assertAlmostEqual(lhs, rhs, delta=1e-12 * (1 + abs(lhs)))


class TestDoubleForms(unittest.TestCase):
    """Test cases for double-form norms and contractions"""

    def test_sphere_norms(self):
        """Test ‖Rm‖² = 6 on S⁴(1) and 3 on S³(1)"""
        for n, expected in ((4, 6.0), (3, 3.0)):
            g = Sym2.identity(n)
            rm = kulkarni_nomizu(g, g) * 0.5
            self.assertAlmostEqual(df_inner(rm, rm, g), expected, places=12)

    def test_zero_norm(self):
        """Test the norm of the zero form"""
        self.assertEqual(df_norm2(DoubleForm22.zero(4), Sym2.identity(4)), 0.0)

    def test_bianchi_flag_is_checked(self):
        """Test that a form violating the first Bianchi identity cannot carry the flag"""
        arr = np.zeros((4, 4, 4, 4))
        # pair symmetries hold but the cyclic sum over the first three slots does not vanish
        for perm, sign in (((0, 1, 2, 3), 1), ((1, 0, 2, 3), -1), ((0, 1, 3, 2), -1),
                           ((1, 0, 3, 2), 1), ((2, 3, 0, 1), 1), ((3, 2, 0, 1), -1),
                           ((2, 3, 1, 0), -1), ((3, 2, 1, 0), 1)):
            arr[perm] = sign
        DoubleForm22(arr)
        with self.assertRaises(BianchiError):
            DoubleForm22(arr, bianchi=True)

    def test_decompose_requires_bianchi(self):
        """Test that decompose refuses unflagged forms"""
        g = Sym2.identity(4)
        with self.assertRaises(BianchiError):
            decompose(DoubleForm22(kulkarni_nomizu(g, g).comps), g)

    def test_ring_action_of_space_form(self):
        """Test (½g∧g)̊g = 3g in dimension four"""
        g = Sym2.identity(4)
        t = kulkarni_nomizu(g, g) * 0.5
        np.testing.assert_allclose(ring_action(t, g, g).comps, 3 * np.eye(4), atol=1e-14)
        np.testing.assert_allclose(ring_action(t, Sym2.zero(4), g).comps, 0.0)

    @given(seeds, st.sampled_from([3, 4]))
    @settings(max_examples=50, deadline=None)
    def test_ring_action_adjunction(self, seed, n):
        """Test ⟨T̊u, v⟩ = ⟨T, u∧v⟩"""
        rng = np.random.default_rng(seed)
        g = Sym2.identity(n)
        t = random_curvature_tensor(rng, n)
        u, v = random_sym2(rng, n), random_sym2(rng, n)
        lhs = sym_inner(ring_action(t, u, g), v, g)
        rhs = df_inner(t, kulkarni_nomizu(u, v), g)
        self.assertAlmostEqual(lhs, rhs, delta=1e-12 * (1 + abs(lhs)))

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_vee_square_trace(self, seed):
        """Test tr(T∨T) = 4‖T‖²"""
        rng = np.random.default_rng(seed)
        g = Sym2.identity(4)
        t = random_curvature_tensor(rng, 4)
        norm2 = df_norm2(t, g)
        self.assertAlmostEqual(trace(vee_square(t, g), g), 4 * norm2, delta=1e-12 * (1 + norm2))

    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_weyl_vee_square(self, seed):
        """Test W∨W = ‖W‖²g in dimension four"""
        cp = random_curvature(seed, 4)
        w2 = cp.weyl_norm2()
        np.testing.assert_allclose(vee_square(cp.weyl, cp.g).comps, w2 * np.eye(4),
                                   atol=1e-12 * (1 + w2))


class TestDecomposition(unittest.TestCase):
    """Test cases for the orthogonal curvature decomposition"""

    def test_round_sphere(self):
        """Test W = 0, Ric̊ = 0 and R = 12 on S⁴(1)"""
        cp = round_sphere(4).curvature
        self.assertAlmostEqual(cp.scal, 12.0, places=12)
        self.assertAlmostEqual(cp.weyl_norm2(), 0.0, places=12)
        self.assertAlmostEqual(cp.ric0_norm2(), 0.0, places=12)

    def test_sphere_product(self):
        """Test ‖W‖² = 4/3 and R = 4 on S²×S², and ‖Ric̊‖² = (1 - 1/s²)²"""
        cp = sphere_product(1.0, 1.0).curvature
        self.assertAlmostEqual(cp.weyl_norm2(), 4.0 / 3.0, places=12)
        self.assertAlmostEqual(cp.scal, 4.0, places=12)
        self.assertAlmostEqual(cp.ric0_norm2(), 0.0, places=12)
        s = 3.0
        cp = sphere_product(1.0, s).curvature
        self.assertAlmostEqual(cp.ric0_norm2(), (1 - 1 / s ** 2) ** 2, places=12)

    def test_low_dimension_rejected(self):
        """Test that decompose needs n >= 3"""
        g = Sym2.identity(2)
        with self.assertRaises(DimensionMismatchError):
            decompose(kulkarni_nomizu(g, g), g)

    @given(seeds, st.sampled_from([3, 4]))
    @settings(max_examples=100, deadline=None)
    def test_orthogonality_and_additivity(self, seed, n):
        """Test pairwise orthogonality of the parts and additivity of their norms"""
        cp = random_curvature(seed, n)
        g = cp.g
        v = kulkarni_nomizu(cp.ric0, g) * (1.0 / (n - 2))
        u = kulkarni_nomizu(g, g) * (cp.scal / (2 * n * (n - 1)))
        rm2 = cp.rm_norm2()
        tol = 1e-12 * (1 + rm2)
        self.assertLess(abs(df_inner(cp.weyl, v, g)), tol)
        self.assertLess(abs(df_inner(cp.weyl, u, g)), tol)
        self.assertLess(abs(df_inner(v, u, g)), tol)
        rebuilt = cp.weyl_norm2() + cp.ric0_norm2() / (n - 2) + cp.scal ** 2 / (2 * n * (n - 1))
        self.assertAlmostEqual(rm2, rebuilt, delta=tol)
        self.assertLess(cp.decomposition_residual(), 1e-12 * (1 + np.sqrt(rm2)))
        self.assertLess(abs(trace(cp.ric0, g)), 1e-12 * (1 + abs(cp.scal)))

    def test_random_curvature_is_deterministic(self):
        """Test that the same seed gives the same curvature"""
        a, b = random_curvature(11, 4), random_curvature(11, 4)
        np.testing.assert_array_equal(a.rm.comps, b.rm.comps)

    def test_random_curvature_three_dimensional(self):
        """Test that the Weyl part vanishes in dimension three"""
        self.assertEqual(random_curvature(5, 3).weyl_norm2(), 0.0)


class TestPsMajor(unittest.TestCase):
    """Test cases for the Ric̊∧Ric̊ splitting and its inequality"""

    def test_vanishing_traceless_ricci(self):
        """Test both sides vanish when Ric̊ = 0"""
        lhs, rhs = psmajor_sides(round_sphere(4).curvature)
        self.assertAlmostEqual(lhs, 0.0, places=12)
        self.assertAlmostEqual(rhs, 0.0, places=12)

    def test_conformally_flat_block(self):
        """Test the W = 0, Ric̊ = diag(1,1,-1,-1) example"""
        g = Sym2.identity(4)
        e = Sym2.diag([1.0, 1.0, -1.0, -1.0])
        rm = kulkarni_nomizu(e, g) * 0.5
        cp = decompose(rm, g)
        lhs, rhs = psmajor_sides(cp)
        e_norm = np.sqrt(sym_norm2(cp.ric0, g))
        self.assertAlmostEqual(rhs, 2 / np.sqrt(3) * e_norm ** 3 / 2, places=12)
        self.assertLessEqual(lhs, rhs + 1e-12 * rhs)

    def test_requires_dimension_four(self):
        """Test that the inequality is four-dimensional"""
        with self.assertRaises(DimensionMismatchError):
            psmajor_sides(random_curvature(0, 3))

    @given(seeds)
    @settings(max_examples=300, deadline=None)
    def test_inequality_fuzz(self, seed):
        """Test lhs <= rhs on random curvature points"""
        lhs, rhs = psmajor_sides(random_curvature(seed, 4))
        self.assertLessEqual(lhs - rhs, 1e-12 * (1 + rhs))

    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_split_norms(self, seed):
        """Test ‖U‖² = ⅙‖E‖⁴ and ‖T‖² + 2‖V‖² = (4/3)‖E‖⁴ for traceless E"""
        rng = np.random.default_rng(seed)
        g = Sym2.identity(4)
        e = random_sym2(rng, 4, traceless=True)
        t, v, u = psmajor_split(e, g)
        e4 = sym_norm2(e, g) ** 2
        self.assertAlmostEqual(df_norm2(u, g), e4 / 6.0, delta=1e-12 * (1 + e4))
        self.assertAlmostEqual(df_norm2(t, g) + 2 * df_norm2(v, g), 4.0 * e4 / 3.0,
                               delta=1e-12 * (1 + e4))


if __name__ == '__main__':
    unittest.main()
