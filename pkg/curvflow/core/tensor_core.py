"""
Pointwise algebra of symmetric 2-tensors and (2,2) double-forms.

Index conventions used throughout the package:

- Kulkarni-Nomizu product (u∧v)_ijkl = u_ik v_jl + u_jl v_ik - u_il v_jk - u_jk v_il,
  so that (g∧g)_1212 = 2 and a space form of curvature K has Rm = (K/2) g∧g.
- Rm_ijkl = <R(e_i, e_j) e_l, e_k>, so Rm_ijij is the sectional curvature.
- Ric_jl = g^ik Rm_ijkl and R = g^jl Ric_jl.
- Double-form inner products carry the 1/(p! q!) factor, i.e. 1/4 of the full
  contraction for (2,2) forms; symmetric 2-tensors use the plain contraction.
"""

import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..config.settings import settings
from .exceptions import (
    BianchiError,
    DimensionMismatchError,
    NotPositiveDefiniteError,
    SymmetryError,
)

logger = logging.getLogger(__name__)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _tol(scale: float) -> float:
    return settings.tensor.tol * (1.0 + scale)


class Sym2:
    """Symmetric 2-tensor in dimension n"""

    __slots__ = ("n", "comps")

    def __init__(self, comps: Any):
        arr = np.array(comps, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionMismatchError(f"Sym2 needs a square array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("Sym2 components must be finite")
        if not np.array_equal(arr, arr.T):
            if np.max(np.abs(arr - arr.T)) > _tol(np.max(np.abs(arr))):
                raise SymmetryError("Sym2 components are not symmetric")
            arr = 0.5 * (arr + arr.T)
        self.n = arr.shape[0]
        self.comps = _frozen(arr)

    @classmethod
    def identity(cls, n: int) -> "Sym2":
        return cls(np.eye(n))

    @classmethod
    def diag(cls, values) -> "Sym2":
        return cls(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def zero(cls, n: int) -> "Sym2":
        return cls(np.zeros((n, n)))

    def __add__(self, other: "Sym2") -> "Sym2":
        _check_dims(self, other)
        return Sym2(self.comps + other.comps)

    def __sub__(self, other: "Sym2") -> "Sym2":
        _check_dims(self, other)
        return Sym2(self.comps - other.comps)

    def __mul__(self, scalar: float) -> "Sym2":
        return Sym2(self.comps * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Sym2":
        return Sym2(-self.comps)

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "comps": self.comps.tolist()}

    def __repr__(self) -> str:
        return f"Sym2(n={self.n}, comps={self.comps.tolist()})"


class DoubleForm22:
    """(2,2) double-form; `bianchi` marks algebraic curvature tensors"""

    __slots__ = ("n", "comps", "bianchi")

    def __init__(self, comps: Any, bianchi: bool = False):
        arr = np.array(comps, dtype=float)
        if arr.ndim != 4 or len(set(arr.shape)) != 1:
            raise DimensionMismatchError(f"DoubleForm22 needs an n^4 array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("DoubleForm22 components must be finite")
        scale = float(np.max(np.abs(arr))) if arr.size else 0.0
        deviation = max(
            np.max(np.abs(arr + arr.transpose(1, 0, 2, 3))),
            np.max(np.abs(arr + arr.transpose(0, 1, 3, 2))),
            np.max(np.abs(arr - arr.transpose(2, 3, 0, 1))),
        )
        if deviation > _tol(scale):
            raise SymmetryError(f"DoubleForm22 symmetry violated by {deviation:.3e}")
        if deviation > 0.0:
            arr = _project_double_form(arr)
        if bianchi:
            residual = np.max(np.abs(bianchi_map(arr)))
            if residual > _tol(scale):
                raise BianchiError(f"first Bianchi identity violated by {residual:.3e}")
        self.n = arr.shape[0]
        self.comps = _frozen(arr)
        self.bianchi = bool(bianchi)

    @classmethod
    def zero(cls, n: int) -> "DoubleForm22":
        return cls(np.zeros((n, n, n, n)), bianchi=True)

    def __add__(self, other: "DoubleForm22") -> "DoubleForm22":
        _check_dims(self, other)
        return DoubleForm22(self.comps + other.comps, bianchi=self.bianchi and other.bianchi)

    def __sub__(self, other: "DoubleForm22") -> "DoubleForm22":
        _check_dims(self, other)
        return DoubleForm22(self.comps - other.comps, bianchi=self.bianchi and other.bianchi)

    def __mul__(self, scalar: float) -> "DoubleForm22":
        return DoubleForm22(self.comps * float(scalar), bianchi=self.bianchi)

    __rmul__ = __mul__

    def __neg__(self) -> "DoubleForm22":
        return DoubleForm22(-self.comps, bianchi=self.bianchi)

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "bianchi": self.bianchi, "comps": self.comps.tolist()}


def _project_double_form(arr: np.ndarray) -> np.ndarray:
    arr = 0.5 * (arr - arr.transpose(1, 0, 2, 3))
    arr = 0.5 * (arr - arr.transpose(0, 1, 3, 2))
    return 0.5 * (arr + arr.transpose(2, 3, 0, 1))


def bianchi_map(arr: np.ndarray) -> np.ndarray:
    """Cyclic average over the first three slots"""
    return (arr + arr.transpose(1, 2, 0, 3) + arr.transpose(2, 0, 1, 3)) / 3.0


def _check_dims(*tensors) -> int:
    dims = {t.n for t in tensors}
    if len(dims) != 1:
        raise DimensionMismatchError(f"dimension mismatch: {sorted(dims)}")
    return dims.pop()


def inverse_metric(g: Sym2) -> np.ndarray:
    """Inverse of a positive definite metric, raising when g is not positive"""
    eigs = np.linalg.eigvalsh(g.comps)
    if eigs[0] <= 0.0:
        raise NotPositiveDefiniteError(f"metric has eigenvalue {eigs[0]:.3e}")
    return np.linalg.inv(g.comps)


def kulkarni_nomizu(u: Sym2, v: Sym2) -> DoubleForm22:
    _check_dims(u, v)
    return DoubleForm22(kn_array(u.comps, v.comps), bianchi=True)


def kn_array(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Kulkarni-Nomizu product of component arrays; leading axes broadcast"""
    return (
        np.einsum("...ik,...jl->...ijkl", u, v)
        + np.einsum("...jl,...ik->...ijkl", u, v)
        - np.einsum("...il,...jk->...ijkl", u, v)
        - np.einsum("...jk,...il->...ijkl", u, v)
    )


def sym_inner(u: Sym2, v: Sym2, g: Sym2) -> float:
    _check_dims(u, v, g)
    gi = inverse_metric(g)
    return float(np.einsum("ij,kl,ik,jl->", u.comps, v.comps, gi, gi, optimize=True))


def sym_norm2(u: Sym2, g: Sym2) -> float:
    return sym_inner(u, u, g)


def df_inner(s: DoubleForm22, t: DoubleForm22, g: Sym2) -> float:
    _check_dims(s, t, g)
    gi = inverse_metric(g)
    raised = np.einsum("abcd,ia,jb,kc,ld->ijkl", t.comps, gi, gi, gi, gi, optimize=True)
    return 0.25 * float(np.einsum("ijkl,ijkl->", s.comps, raised))


def df_norm2(t: DoubleForm22, g: Sym2) -> float:
    return df_inner(t, t, g)


def trace(u: Sym2, g: Sym2) -> float:
    _check_dims(u, g)
    return float(np.einsum("ij,ij->", inverse_metric(g), u.comps))


def ricci_contraction(rm: DoubleForm22, g: Sym2) -> Sym2:
    _check_dims(rm, g)
    return Sym2(np.einsum("ik,ijkl->jl", inverse_metric(g), rm.comps))


def ring_action(t: DoubleForm22, u: Sym2, g: Sym2) -> Sym2:
    """(T̊u)_ij = T_{a i b j} u^{ab}"""
    _check_dims(t, u, g)
    gi = inverse_metric(g)
    u_up = gi @ u.comps @ gi
    return Sym2(np.einsum("aibj,ab->ij", t.comps, u_up))


def vee_square(t: DoubleForm22, g: Sym2) -> Sym2:
    """(T∨T)_ij = T_abci T^abc_j as a raw contraction"""
    _check_dims(t, g)
    gi = inverse_metric(g)
    raised = np.einsum("abcj,ax,by,cz->xyzj", t.comps, gi, gi, gi, optimize=True)
    return Sym2(np.einsum("abci,abcj->ij", t.comps, raised))


def compose(u: Sym2, v: Sym2, g: Sym2) -> Sym2:
    """Endomorphism product u∘v lowered by g, symmetrized when u and v do not commute"""
    _check_dims(u, v, g)
    gi = inverse_metric(g)
    uv = u.comps @ gi @ v.comps
    return Sym2(0.5 * (uv + uv.T))


class CurvaturePoint:
    """Curvature package of a metric at one point"""

    __slots__ = ("g", "rm", "ric", "scal", "weyl", "ric0", "schouten")

    def __init__(self, g: Sym2, rm: DoubleForm22, ric: Sym2, scal: float,
                 weyl: DoubleForm22, ric0: Sym2, schouten: Sym2):
        self.g = g
        self.rm = rm
        self.ric = ric
        self.scal = float(scal)
        self.weyl = weyl
        self.ric0 = ric0
        self.schouten = schouten

    @property
    def n(self) -> int:
        return self.g.n

    def rm_norm2(self) -> float:
        return df_norm2(self.rm, self.g)

    def weyl_norm2(self) -> float:
        return df_norm2(self.weyl, self.g)

    def ric_norm2(self) -> float:
        return sym_norm2(self.ric, self.g)

    def ric0_norm2(self) -> float:
        return sym_norm2(self.ric0, self.g)

    def scaled(self, factor: float) -> "CurvaturePoint":
        """Curvature of the metric factor*g, expressed in a factor-rescaled frame"""
        return decompose(self.rm * (1.0 / factor), self.g)

    def decomposition_residual(self) -> float:
        n = self.n
        rebuilt = (
            self.weyl.comps
            + kn_array(self.ric0.comps, self.g.comps) / (n - 2)
            + self.scal / (2 * n * (n - 1)) * kn_array(self.g.comps, self.g.comps)
        )
        return float(np.sqrt(0.25 * np.sum((self.rm.comps - rebuilt) ** 2)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "scal": self.scal,
            "rm_norm2": self.rm_norm2(),
            "weyl_norm2": self.weyl_norm2(),
            "ric0_norm2": self.ric0_norm2(),
            "ric": self.ric.comps.tolist(),
        }

    def __str__(self) -> str:
        return (f"CurvaturePoint(n={self.n}, R={self.scal:.6g}, |W|^2={self.weyl_norm2():.6g}, "
                f"|Ric0|^2={self.ric0_norm2():.6g})")


def decompose(rm: DoubleForm22, g: Optional[Sym2] = None) -> CurvaturePoint:
    """Split a curvature tensor into Weyl, traceless Ricci and scalar parts"""
    if g is None:
        g = Sym2.identity(rm.n)
    n = _check_dims(rm, g)
    if n < 3:
        raise DimensionMismatchError(f"decomposition needs n >= 3, got {n}")
    if not rm.bianchi:
        raise BianchiError("decompose requires a tensor flagged with the first Bianchi identity")
    ric = ricci_contraction(rm, g)
    scal = trace(ric, g)
    ric0 = Sym2(ric.comps - scal / n * g.comps)
    schouten = Sym2(ric.comps - scal / (2 * (n - 1)) * g.comps)
    weyl_arr = (
        rm.comps
        - kn_array(ric0.comps, g.comps) / (n - 2)
        - scal / (2 * n * (n - 1)) * kn_array(g.comps, g.comps)
    )
    if n == 3:
        weyl_arr = np.zeros_like(weyl_arr)
    weyl = DoubleForm22(weyl_arr, bianchi=True)
    return CurvaturePoint(g=g, rm=rm, ric=ric, scal=scal, weyl=weyl, ric0=ric0, schouten=schouten)


def curvature_from_sectional(sectional: Dict[Tuple[int, int], float], n: int) -> DoubleForm22:
    """Curvature tensor diagonal on coordinate planes with the given sectional curvatures"""
    arr = np.zeros((n, n, n, n))
    for (i, j), k in sectional.items():
        arr[i, j, i, j] = k
        arr[j, i, j, i] = k
        arr[i, j, j, i] = -k
        arr[j, i, i, j] = -k
    return DoubleForm22(arr, bianchi=True)


def psmajor_split(u: Sym2, g: Sym2) -> Tuple[DoubleForm22, DoubleForm22, DoubleForm22]:
    """Orthogonal split u∧u = T + V + U into Weyl, traceless-Ricci and scalar parts"""
    n = _check_dims(u, g)
    uu = kulkarni_nomizu(u, u)
    cp = decompose(uu, g)
    v_part = kulkarni_nomizu(cp.ric0, g) * (1.0 / (n - 2))
    u_part = kulkarni_nomizu(g, g) * (cp.scal / (2 * n * (n - 1)))
    return cp.weyl, v_part, u_part


def psmajor_sides(cp: CurvaturePoint) -> Tuple[float, float]:
    if cp.n != 4:
        raise DimensionMismatchError(f"psmajor_sides is a four-dimensional inequality, got n={cp.n}")
    ric0, g = cp.ric0, cp.g
    lhs_form = cp.weyl + kulkarni_nomizu(ric0, g) * 0.5
    lhs = abs(df_inner(lhs_form, kulkarni_nomizu(ric0, ric0), g))
    r2 = sym_norm2(ric0, g)
    rhs = (2.0 / np.sqrt(3.0)) * r2 * np.sqrt(max(cp.weyl_norm2() + 0.25 * r2, 0.0))
    return lhs, float(rhs)


def decompose_batch(rm: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(ric0, scal, weyl) for a stack of curvature arrays in an orthonormal frame

    rm has shape (..., n, n, n, n) with n >= 4; the split is the one `decompose`
    makes with g the identity.
    """
    rm = np.asarray(rm, dtype=float)
    n = rm.shape[-1]
    if rm.ndim < 4 or rm.shape[-4:] != (n,) * 4 or n < 4:
        raise DimensionMismatchError(f"expected a stack of n^4 arrays with n >= 4, got {rm.shape}")
    g = np.eye(n)
    ric = np.einsum("...ijil->...jl", rm)
    scal = np.einsum("...ii->...", ric)
    ric0 = ric - scal[..., None, None] / n * g
    weyl = (rm - kn_array(ric0, g) / (n - 2)
            - (scal / (2 * n * (n - 1)))[..., None, None, None, None] * kn_array(g, g))
    return ric0, scal, weyl


def psmajor_sides_batch(rm: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """psmajor_sides for a stack of four-dimensional curvature arrays in an orthonormal frame"""
    rm = np.asarray(rm, dtype=float)
    if rm.shape[-1] != 4:
        raise DimensionMismatchError(f"psmajor_sides is a four-dimensional inequality, got {rm.shape}")
    ric0, _, weyl = decompose_batch(rm)
    g = np.eye(4)
    lhs_form = weyl + 0.5 * kn_array(ric0, g)
    lhs = np.abs(0.25 * np.einsum("...ijkl,...ijkl->...", lhs_form, kn_array(ric0, ric0)))
    r2 = np.einsum("...ij,...ij->...", ric0, ric0)
    w2 = 0.25 * np.einsum("...ijkl,...ijkl->...", weyl, weyl)
    rhs = (2.0 / np.sqrt(3.0)) * r2 * np.sqrt(np.maximum(w2 + 0.25 * r2, 0.0))
    return lhs, rhs


def random_sym2(rng: np.random.Generator, n: int, traceless: bool = False) -> Sym2:
    a = rng.standard_normal((n, n))
    a = 0.5 * (a + a.T)
    if traceless:
        a -= np.trace(a) / n * np.eye(n)
    return Sym2(a)


def random_curvature_tensor(rng: np.random.Generator, n: int) -> DoubleForm22:
    x = rng.standard_normal((n, n, n, n))
    x = x - x.transpose(1, 0, 2, 3)
    x = x - x.transpose(0, 1, 3, 2)
    x = x + x.transpose(2, 3, 0, 1)
    x = x - bianchi_map(x)
    return DoubleForm22(x, bianchi=True)


def random_curvature_batch(seed: int, count: int, n: int = 4) -> np.ndarray:
    """`count` algebraic curvature arrays drawn like random_curvature_tensor, shape (count, n, n, n, n)"""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((count, n, n, n, n))
    x = x - x.swapaxes(1, 2)
    x = x - x.swapaxes(3, 4)
    x = x + x.transpose(0, 3, 4, 1, 2)
    return x - (x + x.transpose(0, 2, 3, 1, 4) + x.transpose(0, 3, 1, 2, 4)) / 3.0


def random_curvature(seed: int, n: int) -> CurvaturePoint:
    """Deterministic random algebraic curvature point in an orthonormal frame"""
    if n not in (3, 4):
        raise DimensionMismatchError(f"random_curvature supports n in {{3, 4}}, got {n}")
    rng = np.random.default_rng(seed)
    rm = random_curvature_tensor(rng, n)
    cp = decompose(rm)
    if n == 3:
        # exact Weyl-free representative
        rm = DoubleForm22(
            kn_array(cp.ric0.comps, cp.g.comps)
            + cp.scal / 12.0 * kn_array(cp.g.comps, cp.g.comps),
            bianchi=True,
        )
        cp = decompose(rm)
    logger.debug(f"random curvature seed={seed} n={n}: {cp}")
    return cp


def random_weyl(seed: int, n: int = 4) -> DoubleForm22:
    return random_curvature(seed, n).weyl
