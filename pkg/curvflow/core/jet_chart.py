"""
Truncated Taylor jets of tensor fields at the origin of a chart.

A jet of degree d stores the Taylor coefficients of every component in a
graded monomial basis (all exponents of total degree <= d). Products are
truncated at the smaller degree of the two operands; a partial derivative
lowers the degree by one. Curvature, covariant derivatives and the
double-form operators δ, δ̃, D, D̃, tr and Δ are computed exactly in this
algebra and compared at the origin.

Tensors are stored with all indices down; a (p, q) double-form carries p + q
axes, the first p forming the first antisymmetric group.
"""

import itertools
import logging
from functools import cached_property, lru_cache
from math import comb
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse

from ..config.settings import settings
from .exceptions import (
    DimensionMismatchError,
    InsufficientDegreeError,
    NotPositiveDefiniteError,
    SymmetryError,
    ValenceError,
)

logger = logging.getLogger(__name__)

_PAIR = "Z"
_INDEX = "cdefghijklmnopqrstuvwxy"


def basis_size(n: int, degree: int) -> int:
    return comb(n + degree, degree) if degree >= 0 else 0


class MonomialBasis:
    """Graded exponent list with derivative and product tables"""

    def __init__(self, n: int, degree: int):
        self.n = n
        self.degree = degree
        exponents = []
        for k in range(degree + 1):
            for combo in itertools.combinations_with_replacement(range(n), k):
                e = [0] * n
                for i in combo:
                    e[i] += 1
                exponents.append(tuple(e))
        self.exponents = np.array(exponents, dtype=int).reshape(len(exponents), n)
        self.index = {e: k for k, e in enumerate(exponents)}
        self.size = len(exponents)
        self.degrees = self.exponents.sum(axis=1)

        # ∂_i: coefficient of x^e in the derivative is (e_i + 1) * c[e + unit_i]
        lower = basis_size(n, degree - 1)
        self.deriv_src = []
        self.deriv_fac = []
        for i in range(n):
            src = np.empty(lower, dtype=int)
            fac = np.empty(lower, dtype=float)
            for k in range(lower):
                e = list(exponents[k])
                fac[k] = e[i] + 1
                e[i] += 1
                src[k] = self.index[tuple(e)]
            self.deriv_src.append(src)
            self.deriv_fac.append(fac)

        pair_a, pair_b, pair_c = [], [], []
        for a in range(self.size):
            for b in np.nonzero(self.degrees <= degree - self.degrees[a])[0]:
                pair_a.append(a)
                pair_b.append(b)
                pair_c.append(self.index[tuple(self.exponents[a] + self.exponents[b])])
        self.pair_a = np.array(pair_a, dtype=int)
        self.pair_b = np.array(pair_b, dtype=int)
        self.scatter = scipy.sparse.csr_matrix(
            (np.ones(len(pair_c)), (np.array(pair_c, dtype=int), np.arange(len(pair_c)))),
            shape=(self.size, len(pair_c)),
        )
        logger.debug(f"monomial basis n={n} degree={degree}: {self.size} monomials, "
                     f"{len(pair_c)} product pairs")


@lru_cache(maxsize=None)
def monomial_basis(n: int, degree: int) -> MonomialBasis:
    return MonomialBasis(n, degree)


class JetTensor:
    """Tensor field jet: coefficient array of shape tensor_shape + (basis size,)"""

    def __init__(self, coeffs: Any, n: int, degree: int,
                 valence: Optional[Tuple[int, int]] = None):
        coeffs = np.asarray(coeffs)
        if degree < 0:
            raise InsufficientDegreeError(f"jet degree must be non-negative, got {degree}")
        if coeffs.ndim == 0 or coeffs.shape[-1] != basis_size(n, degree):
            raise DimensionMismatchError(
                f"coefficient axis of length {coeffs.shape[-1:]} does not match "
                f"n={n} degree={degree}")
        if any(s != n for s in coeffs.shape[:-1]):
            raise DimensionMismatchError(f"tensor axes {coeffs.shape[:-1]} do not all equal n={n}")
        if valence is not None and sum(valence) != coeffs.ndim - 1:
            raise ValenceError(f"valence {valence} does not match rank {coeffs.ndim - 1}")
        self.coeffs = coeffs
        self.n = n
        self.degree = degree
        self.valence = tuple(valence) if valence is not None else None

    @property
    def rank(self) -> int:
        return self.coeffs.ndim - 1

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.coeffs.shape[:-1]

    @property
    def basis(self) -> MonomialBasis:
        return monomial_basis(self.n, self.degree)

    def value(self) -> np.ndarray:
        """Components at the origin"""
        return self.coeffs[..., 0]

    def truncate(self, degree: int) -> "JetTensor":
        if degree > self.degree:
            raise InsufficientDegreeError(f"cannot raise jet degree {self.degree} to {degree}")
        return _wrap(self.coeffs[..., :basis_size(self.n, degree)], self.n, degree, self.valence)

    def with_valence(self, p: int, q: int) -> "JetTensor":
        return _wrap(self.coeffs, self.n, self.degree, (p, q))

    def derivative(self, i: int) -> "JetTensor":
        if self.degree < 1:
            raise InsufficientDegreeError("derivative of a degree-0 jet")
        basis = self.basis
        coeffs = self.coeffs[..., basis.deriv_src[i]] * basis.deriv_fac[i]
        return _wrap(coeffs, self.n, self.degree - 1)

    def gradient(self) -> "JetTensor":
        """Partial derivatives stacked along a new leading axis"""
        parts = [self.derivative(i).coeffs for i in range(self.n)]
        return _wrap(np.stack(parts, axis=0), self.n, self.degree - 1)

    def moveaxis(self, source: int, destination: int) -> "JetTensor":
        return _wrap(np.moveaxis(self.coeffs, source, destination), self.n, self.degree)

    def transpose(self, *axes: int) -> "JetTensor":
        return _wrap(self.coeffs.transpose(tuple(axes) + (self.rank,)), self.n, self.degree)

    @property
    def real(self) -> "JetTensor":
        return _wrap(self.coeffs.real, self.n, self.degree, self.valence)

    @property
    def imag(self) -> "JetTensor":
        return _wrap(self.coeffs.imag, self.n, self.degree, self.valence)

    def _aligned(self, other: "JetTensor") -> Tuple[np.ndarray, np.ndarray, int]:
        if self.n != other.n or self.shape != other.shape:
            raise DimensionMismatchError(f"jet shapes {self.shape} and {other.shape} differ")
        d = min(self.degree, other.degree)
        m = basis_size(self.n, d)
        return self.coeffs[..., :m], other.coeffs[..., :m], d

    def __add__(self, other: "JetTensor") -> "JetTensor":
        a, b, d = self._aligned(other)
        return _wrap(a + b, self.n, d, self.valence or other.valence)

    def __sub__(self, other: "JetTensor") -> "JetTensor":
        a, b, d = self._aligned(other)
        return _wrap(a - b, self.n, d, self.valence or other.valence)

    def __mul__(self, scalar: complex) -> "JetTensor":
        return _wrap(self.coeffs * scalar, self.n, self.degree, self.valence)

    __rmul__ = __mul__

    def __neg__(self) -> "JetTensor":
        return _wrap(-self.coeffs, self.n, self.degree, self.valence)

    def __repr__(self) -> str:
        return (f"{type(self).__name__}(n={self.n}, degree={self.degree}, shape={self.shape}, "
                f"valence={self.valence})")


class Jet(JetTensor):
    """Scalar jet"""

    def __init__(self, coeffs: Any, n: int, degree: int,
                 valence: Optional[Tuple[int, int]] = (0, 0)):
        super().__init__(coeffs, n, degree, valence if valence is not None else (0, 0))
        if self.rank != 0:
            raise DimensionMismatchError(f"scalar jet with tensor shape {self.shape}")

    def coeff(self, multi_index: Sequence[int]) -> complex:
        key = tuple(int(k) for k in multi_index)
        if len(key) != self.n or sum(key) > self.degree:
            return 0.0
        return self.coeffs[self.basis.index[key]]

    @classmethod
    def constant(cls, n: int, degree: int, value: float) -> "Jet":
        coeffs = np.zeros(basis_size(n, degree))
        coeffs[0] = value
        return cls(coeffs, n, degree)

    @classmethod
    def variable(cls, n: int, degree: int, i: int) -> "Jet":
        if degree < 1:
            return cls.constant(n, degree, 0.0)
        e = [0] * n
        e[i] = 1
        return cls.from_terms(n, degree, {tuple(e): 1.0})

    @classmethod
    def from_terms(cls, n: int, degree: int, terms: Dict[Tuple[int, ...], float]) -> "Jet":
        basis = monomial_basis(n, degree)
        coeffs = np.zeros(basis.size)
        for e, c in terms.items():
            if sum(e) <= degree:
                coeffs[basis.index[tuple(e)]] += c
        return cls(coeffs, n, degree)


class JetMetric(JetTensor):
    """Symmetric (1,1) jet with positive definite value at the origin"""

    def __init__(self, coeffs: Any, n: int, degree: int,
                 valence: Optional[Tuple[int, int]] = (1, 1)):
        super().__init__(coeffs, n, degree, (1, 1))
        if self.rank != 2:
            raise DimensionMismatchError(f"metric jet must have rank 2, got {self.rank}")
        asym = np.max(np.abs(self.coeffs - self.coeffs.swapaxes(0, 1)))
        if asym > settings.tensor.tol * (1.0 + np.max(np.abs(self.coeffs))):
            raise SymmetryError(f"metric jet is not symmetric ({asym:.3e})")
        eigs = np.linalg.eigvalsh(np.real(self.value()))
        if eigs[0] <= 0.0:
            raise NotPositiveDefiniteError(f"g(0) has eigenvalue {eigs[0]:.3e}")


def _wrap(coeffs: np.ndarray, n: int, degree: int,
          valence: Optional[Tuple[int, int]] = None) -> JetTensor:
    if coeffs.ndim == 1:
        return Jet(coeffs, n, degree, valence or (0, 0))
    return JetTensor(coeffs, n, degree, valence)


def jet_einsum(subscripts: str, *operands: JetTensor,
               valence: Optional[Tuple[int, int]] = None) -> JetTensor:
    """Einstein summation over tensor axes with truncated multiplication of the jets"""
    lhs, out = subscripts.replace(" ", "").split("->")
    subs = lhs.split(",")
    if len(subs) != len(operands) or len(operands) not in (1, 2):
        raise ValueError(f"jet_einsum takes one or two operands, got {subscripts!r}")
    n = operands[0].n
    if len(operands) == 1:
        (a,) = operands
        coeffs = np.einsum(f"{subs[0]}{_PAIR}->{out}{_PAIR}", a.coeffs)
        return _wrap(coeffs, n, a.degree, valence)

    a, b = operands
    if a.n != b.n:
        raise DimensionMismatchError(f"jets in dimensions {a.n} and {b.n}")
    d = min(a.degree, b.degree)
    basis = monomial_basis(n, d)
    m = basis.size
    pa = a.coeffs[..., :m][..., basis.pair_a]
    pb = b.coeffs[..., :m][..., basis.pair_b]
    prod = np.einsum(f"{subs[0]}{_PAIR},{subs[1]}{_PAIR}->{out}{_PAIR}", pa, pb)
    flat = prod.reshape(-1, prod.shape[-1])
    coeffs = np.asarray(basis.scatter @ flat.T).T.reshape(prod.shape[:-1] + (m,))
    return _wrap(coeffs, n, d, valence)


def jet_scale(f: JetTensor, t: JetTensor) -> JetTensor:
    """Product of a scalar jet with a tensor jet"""
    idx = _INDEX[:t.rank]
    return jet_einsum(f",{idx}->{idx}", f, t, valence=t.valence)


def jet_inverse_metric(m: JetMetric) -> JetTensor:
    """Neumann series g⁻¹ = Σ_k (-g0⁻¹ N)^k g0⁻¹ with N = g - g(0)"""
    g0 = m.value()
    if np.linalg.eigvalsh(np.real(g0))[0] <= 0.0:
        raise NotPositiveDefiniteError("g(0) is singular or indefinite")
    g0_inv = np.linalg.inv(g0)
    basis = m.basis
    inv0 = np.zeros(m.shape + (basis.size,), dtype=np.result_type(m.coeffs.dtype, float))
    inv0[..., 0] = g0_inv
    inv0_jet = JetTensor(inv0, m.n, m.degree)
    nilpotent = m.coeffs.copy()
    nilpotent[..., 0] = 0.0
    step = -jet_einsum("ij,jk->ik", inv0_jet, JetTensor(nilpotent, m.n, m.degree))
    total = inv0_jet
    term = inv0_jet
    for _ in range(m.degree):
        term = jet_einsum("ij,jk->ik", step, term)
        total = total + term
    return total.with_valence(1, 1)


def jet_kulkarni_nomizu(u: JetTensor, v: JetTensor) -> JetTensor:
    kn = (jet_einsum("ik,jl->ijkl", u, v)
          + jet_einsum("jl,ik->ijkl", u, v)
          - jet_einsum("il,jk->ijkl", u, v)
          - jet_einsum("jk,il->ijkl", u, v))
    return kn.with_valence(2, 2)


class JetGeometry:
    """Levi-Civita data of a metric jet, computed lazily"""

    def __init__(self, metric: JetMetric):
        self.metric = metric
        self.n = metric.n
        self.degree = metric.degree
        self.ginv = jet_inverse_metric(metric)

    @cached_property
    def christoffel_lower(self) -> JetTensor:
        """Γ_{ijl} = ½(∂_i g_jl + ∂_j g_il - ∂_l g_ij)"""
        dg = self.metric.gradient()
        c = dg.coeffs
        return _wrap(0.5 * (c + c.transpose(1, 0, 2, 3) - c.transpose(1, 2, 0, 3)),
                     self.n, dg.degree)

    @cached_property
    def gamma(self) -> JetTensor:
        """gamma[k, i, j] = Γ^k_ij"""
        return jet_einsum("kl,ijl->kij", self.ginv, self.christoffel_lower)

    @cached_property
    def rm(self) -> JetTensor:
        if self.degree < 2:
            raise InsufficientDegreeError("curvature needs a metric jet of degree >= 2")
        gamma = self.gamma
        dgamma = gamma.gradient()
        d1 = dgamma.coeffs.transpose(0, 2, 3, 1, 4)
        linear = _wrap(d1 - d1.transpose(1, 0, 2, 3, 4), self.n, dgamma.degree)
        quad = jet_einsum("lim,mjk->ijkl", gamma, gamma)
        curv = linear + quad - quad.transpose(1, 0, 2, 3)
        # Rm_ijkl = R_ijl^m g_mk
        return jet_einsum("ijlm,mk->ijkl", curv, self.metric, valence=(2, 2))

    @cached_property
    def ric(self) -> JetTensor:
        return jet_einsum("ik,ijkl->jl", self.ginv, self.rm, valence=(1, 1))

    @cached_property
    def scal(self) -> Jet:
        return jet_einsum("jl,jl->", self.ginv, self.ric)

    @cached_property
    def schouten(self) -> JetTensor:
        factor = 1.0 / (2 * (self.n - 1))
        return (self.ric - jet_scale(self.scal, self.metric) * factor).with_valence(1, 1)

    @cached_property
    def weyl(self) -> JetTensor:
        kn = jet_kulkarni_nomizu(self.schouten, self.metric)
        return (self.rm - kn * (1.0 / (self.n - 2))).with_valence(2, 2)

    def raise_pair(self, u: JetTensor) -> JetTensor:
        half = jet_einsum("ac,cd->ad", self.ginv, u)
        return jet_einsum("ad,db->ab", half, self.ginv)

    def mixed(self, u: JetTensor) -> JetTensor:
        """u^a_b = g^{ac} u_cb"""
        return jet_einsum("ac,cb->ab", self.ginv, u)

    def compose(self, u: JetTensor, v: JetTensor) -> JetTensor:
        """(u∘v)_ij = u_ia g^ab v_bj"""
        return jet_einsum("ib,bj->ij", jet_einsum("ia,ab->ib", u, self.ginv), v, valence=(1, 1))

    def ring_action(self, t: JetTensor, u: JetTensor) -> JetTensor:
        return jet_einsum("aibj,ab->ij", t, self.raise_pair(u), valence=(1, 1))

    def inner(self, u: JetTensor, v: JetTensor) -> Jet:
        return jet_einsum("ab,ab->", self.raise_pair(u), v)

    def contract(self, t: JetTensor, first: int, second: int) -> JetTensor:
        """g^{ab} contraction of two axes of t"""
        idx = list(_INDEX[:t.rank])
        idx[first], idx[second] = "a", "b"
        out = "".join(c for k, c in enumerate(idx) if k not in (first, second))
        return jet_einsum(f"ab,{''.join(idx)}->{out}", self.ginv, t)


MetricLike = Union[JetMetric, JetGeometry]


def _geometry(m: MetricLike) -> JetGeometry:
    return m if isinstance(m, JetGeometry) else JetGeometry(m)


def covariant_derivative(t: JetTensor, m: MetricLike) -> JetTensor:
    """(∇T)[a, i1..ir] = ∂_a T_{i1..ir} - Σ_s Γ^p_{a i_s} T_{..p..}"""
    geom = _geometry(m)
    if t.degree < 1:
        raise InsufficientDegreeError("covariant derivative of a degree-0 jet")
    out = t.gradient()
    idx = _INDEX[:t.rank]
    for s in range(t.rank):
        tsub = idx[:s] + "b" + idx[s + 1:]
        out = out - jet_einsum(f"ba{idx[s]},{tsub}->a{idx}", geom.gamma, t)
    return out


def _valence(t: JetTensor) -> Tuple[int, int]:
    if t.valence is None:
        raise ValenceError("operator needs a tensor with declared (p, q) valence")
    return t.valence


def delta(t: JetTensor, m: MetricLike) -> JetTensor:
    """(δT)_{I J} = -∇^a T_{a I J}"""
    p, q = _valence(t)
    if p < 1:
        raise ValenceError(f"δ needs p >= 1, got valence {(p, q)}")
    geom = _geometry(m)
    return (-geom.contract(covariant_derivative(t, geom), 0, 1)).with_valence(p - 1, q)


def delta_tilde(t: JetTensor, m: MetricLike) -> JetTensor:
    """(δ̃T)_{I J} = -∇^a T_{I a J}"""
    p, q = _valence(t)
    if q < 1:
        raise ValenceError(f"δ̃ needs q >= 1, got valence {(p, q)}")
    geom = _geometry(m)
    return (-geom.contract(covariant_derivative(t, geom), 0, 1 + p)).with_valence(p, q - 1)


def exterior_d(t: JetTensor, m: MetricLike) -> JetTensor:
    p, q = _valence(t)
    nabla = covariant_derivative(t, m)
    total = nabla
    for k in range(1, p + 1):
        term = nabla.moveaxis(0, k)
        total = total - term if k % 2 else total + term
    return total.with_valence(p + 1, q)


def exterior_d_tilde(t: JetTensor, m: MetricLike) -> JetTensor:
    p, q = _valence(t)
    nabla = covariant_derivative(t, m)
    total = nabla.moveaxis(0, p)
    for k in range(1, q + 1):
        term = nabla.moveaxis(0, p + k)
        total = total - term if k % 2 else total + term
    return total.with_valence(p, q + 1)


def jet_trace(t: JetTensor, m: MetricLike) -> JetTensor:
    p, q = _valence(t)
    if p < 1 or q < 1:
        raise ValenceError(f"trace needs p, q >= 1, got valence {(p, q)}")
    return _geometry(m).contract(t, 0, p).with_valence(p - 1, q - 1)


def laplacian(t: JetTensor, m: MetricLike) -> JetTensor:
    """Δ = -g^{ab} ∇_a ∇_b"""
    geom = _geometry(m)
    second = covariant_derivative(covariant_derivative(t, geom), geom)
    return (-geom.contract(second, 0, 1)).with_valence(*(t.valence or (0, 0)))


def hessian(f: JetTensor, m: MetricLike) -> JetTensor:
    geom = _geometry(m)
    return covariant_derivative(covariant_derivative(f, geom), geom).with_valence(1, 1)


OPERATORS = {
    "delta": delta,
    "delta_tilde": delta_tilde,
    "D": exterior_d,
    "D_tilde": exterior_d_tilde,
    "trace": jet_trace,
    "laplacian": laplacian,
    "hessian": hessian,
}


def apply_operator(op_name: str, t: JetTensor, m: MetricLike) -> JetTensor:
    try:
        op = OPERATORS[op_name]
    except KeyError:
        raise ValueError(f"Unknown operator: {op_name}")
    return op(t, m)


def curvature_at_origin(m: JetMetric, derivs: int = 0) -> List[JetTensor]:
    """Rm, ∇Rm, ..., ∇^k Rm at the origin as degree-0 jets"""
    if m.degree < derivs + 2:
        raise InsufficientDegreeError(
            f"∇^{derivs}Rm needs a metric jet of degree >= {derivs + 2}, got {m.degree}")
    geom = _geometry(m)
    current = geom.rm
    out = [current.truncate(0)]
    for _ in range(derivs):
        current = covariant_derivative(current, geom)
        out.append(current.truncate(0))
    return out


# ---------------------------------------------------------------------------
# Jet constructors


def _symmetric_coeffs(rng: np.random.Generator, n: int, degree: int) -> np.ndarray:
    c = rng.uniform(-1.0, 1.0, size=(n, n, basis_size(n, degree)))
    return 0.5 * (c + c.swapaxes(0, 1))


def euclidean_metric(n: int, degree: int) -> JetMetric:
    coeffs = np.zeros((n, n, basis_size(n, degree)))
    coeffs[..., 0] = np.eye(n)
    return JetMetric(coeffs, n, degree)


def random_metric(seed: int, n: int, degree: Optional[int] = None,
                  eps: Optional[float] = None) -> JetMetric:
    """g = δ + ε·(symmetric polynomial with coefficients uniform in [-1, 1])"""
    degree = settings.jet.default_degree if degree is None else degree
    eps = settings.jet.perturbation if eps is None else eps
    rng = np.random.default_rng(seed)
    coeffs = eps * _symmetric_coeffs(rng, n, degree)
    coeffs[..., 0] += np.eye(n)
    return JetMetric(coeffs, n, degree)


def random_direction(seed: int, n: int, degree: Optional[int] = None) -> JetTensor:
    degree = settings.jet.default_degree if degree is None else degree
    rng = np.random.default_rng([seed, 1])
    return JetTensor(_symmetric_coeffs(rng, n, degree), n, degree, (1, 1))


def random_scalar(seed: int, n: int, degree: Optional[int] = None) -> Jet:
    degree = settings.jet.default_degree if degree is None else degree
    rng = np.random.default_rng([seed, 2])
    return Jet(rng.uniform(-1.0, 1.0, size=basis_size(n, degree)), n, degree)


def sphere_normal_metric(n: int, degree: int, curvature: float = 1.0) -> JetMetric:
    """g_ij = δ_ij - (K/3)(δ_ij |x|² - x_i x_j), the quadratic part of normal coordinates"""
    basis = monomial_basis(n, degree)
    coeffs = np.zeros((n, n, basis.size))
    coeffs[..., 0] = np.eye(n)
    if degree >= 2:
        for a in range(n):
            e = [0] * n
            e[a] = 2
            k = basis.index[tuple(e)]
            for i in range(n):
                coeffs[i, i, k] -= curvature / 3.0
        for i in range(n):
            for j in range(n):
                e = [0] * n
                e[i] += 1
                e[j] += 1
                coeffs[i, j, basis.index[tuple(e)]] += curvature / 3.0
    return JetMetric(coeffs, n, degree)


def conformal_line_metric(n: int, degree: int) -> JetMetric:
    """(1 + x_1) δ_ij"""
    f = Jet.constant(n, degree, 1.0) + Jet.variable(n, degree, 0)
    coeffs = np.einsum("ij,m->ijm", np.eye(n), f.coeffs)
    return JetMetric(coeffs, n, degree)


def flat_curvilinear_metric(seed: int, n: int, degree: Optional[int] = None,
                            eps: Optional[float] = None) -> JetMetric:
    """Pull-back of the Euclidean metric by φ(x) = x + ε·(random quadratic + cubic)"""
    degree = settings.jet.default_degree if degree is None else degree
    eps = settings.jet.perturbation if eps is None else eps
    rng = np.random.default_rng([seed, 3])
    basis = monomial_basis(n, degree + 1)
    phi = np.zeros((n, basis.size))
    mask = (basis.degrees == 2) | (basis.degrees == 3)
    phi[:, mask] = eps * rng.uniform(-1.0, 1.0, size=(n, int(mask.sum())))
    for k in range(n):
        phi[k, basis.index[tuple(int(i == k) for i in range(n))]] += 1.0
    dphi = JetTensor(phi, n, degree + 1).gradient()  # dphi[i, k] = ∂_i φ^k
    g = jet_einsum("ik,jk->ij", dphi, dphi)
    c = g.coeffs
    return JetMetric(0.5 * (c + c.swapaxes(0, 1)), n, degree)


def plane_wave_direction(xi: Sequence[float], amplitude: np.ndarray, degree: int = 2) -> JetTensor:
    """h = H (ξ·x)² / 2"""
    xi = np.asarray(xi, dtype=float)
    n = xi.size
    terms: Dict[Tuple[int, ...], float] = {}
    for a in range(n):
        for b in range(n):
            e = [0] * n
            e[a] += 1
            e[b] += 1
            terms[tuple(e)] = terms.get(tuple(e), 0.0) + 0.5 * xi[a] * xi[b]
    profile = Jet.from_terms(n, degree, terms)
    coeffs = np.einsum("ij,m->ijm", np.asarray(amplitude, dtype=float), profile.coeffs)
    return JetTensor(coeffs, n, degree, (1, 1))


# ---------------------------------------------------------------------------
# Identity verification


class IdentityReport:
    """Residual of one identity at the chart origin"""

    def __init__(self, name: str, residual: float, seed: Optional[int], degree: int, n: int,
                 kind: str = "explicit", details: Optional[Dict[str, Any]] = None):
        self.name = name
        self.residual = abs(float(residual))
        self.seed = seed
        self.degree = degree
        self.n = n
        self.kind = kind
        self.details = details or {}

    def passed(self, tol: Optional[float] = None) -> bool:
        return self.residual <= (settings.jet.identity_tol if tol is None else tol)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "residual": self.residual,
            "seed": self.seed,
            "degree": self.degree,
            "n": self.n,
            "kind": self.kind,
            "details": self.details,
        }

    def __str__(self) -> str:
        return f"{self.name} [{self.kind}] n={self.n} seed={self.seed}: {self.residual:.3e}"


def _residual(*terms: JetTensor) -> float:
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return float(np.max(np.abs(total.value()))) if total.rank else float(abs(total.value()))


def _scale(t: JetTensor) -> float:
    return float(np.max(np.abs(t.value()))) if t.rank else float(abs(t.value()))


def _explicit_identities(geom: JetGeometry, h: JetTensor) -> Dict[str, float]:
    n = geom.n
    g = geom.metric
    rm, ric, scal = geom.rm, geom.ric, geom.scal
    res: Dict[str, float] = {}
    res["second_bianchi"] = _residual(exterior_d(rm, geom))
    res["second_bianchi_tilde"] = _residual(exterior_d_tilde(rm, geom))
    d_scal = exterior_d(scal, geom)
    res["contracted_bianchi"] = _residual(delta_tilde(ric, geom), d_scal * 0.5)
    res["divergence_curvature"] = _residual(delta_tilde(rm, geom), exterior_d(ric, geom))
    res["divergence_weyl"] = _residual(
        delta_tilde(geom.weyl, geom), exterior_d(geom.schouten, geom) * ((n - 3) / (n - 2)))
    scal_g = jet_scale(scal, g).with_valence(1, 1)
    res["delta_d_scalar_metric"] = _residual(
        delta(exterior_d(scal_g, geom), geom),
        -jet_scale(laplacian(scal, geom), g),
        -hessian(scal, geom))
    res["delta_d_ricci"] = _residual(
        delta(exterior_d(ric, geom), geom),
        -laplacian(ric, geom),
        -hessian(scal, geom) * 0.5,
        -geom.compose(ric, ric),
        geom.ring_action(rm, ric))
    second = covariant_derivative(covariant_derivative(h, geom), geom)
    h_mixed = geom.mixed(h)  # h^k_v
    res["ricci_identity"] = _residual(
        second,
        -second.transpose(1, 0, 2, 3),
        jet_einsum("xyku,kv->xyuv", rm, h_mixed),
        jet_einsum("xykv,ku->xyuv", rm, h_mixed))
    tr_h = jet_trace(h, geom)
    res["trace_d_anticommutator"] = _residual(
        jet_trace(exterior_d(h, geom), geom), exterior_d(tr_h, geom), delta_tilde(h, geom))
    res["trace_d_tilde_anticommutator"] = _residual(
        jet_trace(exterior_d_tilde(h, geom), geom), exterior_d_tilde(tr_h, geom), delta(h, geom))
    dh = exterior_d(h, geom)
    res["trace_delta_sign"] = _residual(
        jet_trace(delta(dh, geom), geom), delta(jet_trace(dh, geom), geom))
    return res


def _schematic_identities(geom: JetGeometry, h: JetTensor, f: Jet) -> Dict[str, float]:
    res: Dict[str, float] = {}
    dh = exterior_d(h, geom)
    res["d_squared"] = _residual(exterior_d(dh, geom))
    res["d_d_tilde_commutator"] = _residual(
        exterior_d(exterior_d_tilde(h, geom), geom), -exterior_d_tilde(dh, geom))
    res["delta_squared"] = _residual(delta(delta(dh, geom), geom))
    delta_h = delta(h, geom)
    res["weitzenbock_laplacian"] = _residual(
        laplacian(h, geom), -delta(dh, geom), -exterior_d(delta_h, geom))
    res["delta_laplacian_commutator"] = _residual(
        delta(laplacian(h, geom), geom), -laplacian(delta_h, geom))
    fourth = jet_trace(delta(exterior_d(delta(dh, geom), geom), geom), geom)
    tr_h = jet_trace(h, geom)
    res["fourth_order_trace"] = _residual(
        fourth,
        -laplacian(laplacian(tr_h, geom), geom),
        laplacian(jet_trace(exterior_d(delta_h, geom), geom), geom))
    res["delta_delta_hessian"] = _residual(
        delta_tilde(delta(hessian(f, geom), geom), geom), -laplacian(laplacian(f, geom), geom))
    return res


def verify_identities(seed: int, n: int, degree: Optional[int] = None,
                      metric: Optional[JetMetric] = None) -> List[IdentityReport]:
    """Check the double-form identities at the origin of a seeded random metric

    Identities with explicit curvature remainders are checked on the curved
    metric. Identities whose remainder is only known to be curvature-order
    are checked on a flat metric in curvilinear coordinates; their curved
    residual is recorded in the report details.
    """
    degree = settings.jet.default_degree if degree is None else degree
    if degree < 4:
        raise InsufficientDegreeError(f"identity suite needs degree >= 4, got {degree}")
    curved = JetGeometry(metric if metric is not None else random_metric(seed, n, degree))
    flat = curved if metric is not None else JetGeometry(flat_curvilinear_metric(seed, n, degree))
    h = random_direction(seed, n, degree)
    f = random_scalar(seed, n, degree)

    reports = [IdentityReport(name, value, seed, degree, n, "explicit")
               for name, value in _explicit_identities(curved, h).items()]

    rm_scale = _scale(curved.rm)
    curved_values = _schematic_identities(curved, h, f) if flat is not curved else None
    for name, value in _schematic_identities(flat, h, f).items():
        details = {"rm_scale": rm_scale}
        if curved_values is not None:
            details["curved_residual"] = curved_values[name]
            details["curved_ratio"] = curved_values[name] / max(rm_scale, 1e-300)
        reports.append(IdentityReport(name, value, seed, degree, n, "schematic", details))

    worst = max(reports, key=lambda r: r.residual)
    logger.info(f"identity suite seed={seed} n={n} degree={degree}: worst {worst}")
    return reports


def _complex_metric(metric: JetMetric, h: JetTensor, eps: float) -> JetMetric:
    hc = h.truncate(metric.degree) if h.degree > metric.degree else h
    coeffs = metric.coeffs[..., :basis_size(metric.n, hc.degree)] + 1j * eps * hc.coeffs
    return JetMetric(coeffs, metric.n, min(metric.degree, hc.degree))


def verify_first_variations(seed: int, n: int, degree: Optional[int] = None,
                            direction: Optional[JetTensor] = None,
                            metric: Optional[JetMetric] = None) -> List[IdentityReport]:
    """Compare first-variation formulas with a complex-step derivative in the direction h"""
    degree = settings.jet.default_degree if degree is None else degree
    eps = settings.jet.complex_step
    g = metric if metric is not None else random_metric(seed, n, degree)
    h = direction if direction is not None else random_direction(seed, n, degree)
    if h.valence is None:
        h = h.with_valence(1, 1)
    geom = JetGeometry(g)
    pert = JetGeometry(_complex_metric(g, h, eps))

    def variation(t: JetTensor) -> JetTensor:
        return t.imag * (1.0 / eps)

    reports: List[IdentityReport] = []

    def report(name: str, value: float, kind: str = "variation", **details) -> None:
        reports.append(IdentityReport(name, value, seed, degree, n, kind, details))

    g0, h0 = g.value(), h.value()
    det_c = np.sqrt(np.linalg.det(pert.metric.value()))
    dv_formula = 0.5 * np.trace(np.linalg.solve(g0, h0)) * np.sqrt(np.linalg.det(g0))
    report("volume_density", abs(det_c.imag / eps - dv_formula))

    inv_formula = -geom.raise_pair(h)
    inv_diff = variation(pert.ginv) - inv_formula
    report("inverse_metric", float(np.max(np.abs(inv_diff.coeffs))))

    # Γ'^k_ij = ½ g^{kl}(∇_i h_jl + ∇_j h_il - ∇_l h_ij)
    nabla_h = covariant_derivative(h, geom)
    c = nabla_h.coeffs
    lowered = _wrap(0.5 * (c + c.transpose(1, 0, 2, 3) - c.transpose(1, 2, 0, 3)), n, nabla_h.degree)
    gamma_formula = jet_einsum("kl,ijl->kij", geom.ginv, lowered)
    report("christoffel", _residual(variation(pert.gamma), -gamma_formula))

    rm = geom.rm
    h_mixed = geom.mixed(h)  # h^m_i
    rm_var = variation(pert.rm)
    lhs = (rm_var
           - jet_einsum("mi,mjab->ijab", h_mixed, rm)
           - jet_einsum("mj,imab->ijab", h_mixed, rm))
    ddh = exterior_d_tilde(exterior_d(h, geom), geom)
    rhs = (ddh
           + jet_einsum("mi,mjab->ijab", h_mixed, rm)
           + jet_einsum("mj,imab->ijab", h_mixed, rm)) * (-0.5)
    report("riemann", _residual(lhs, -rhs))

    ric = geom.ric
    h_comp_ric = jet_einsum("jm,mb->jb", jet_einsum("ja,am->jm", h, geom.ginv), ric)
    ric_var = variation(pert.ric)
    ric_lhs = ric_var - h_comp_ric
    dh = exterior_d(h, geom)
    first_form = (delta(dh, geom)
                  + exterior_d_tilde(jet_trace(dh, geom), geom)
                  - h_comp_ric
                  - geom.ring_action(rm, h)) * 0.5
    report("ricci", _residual(ric_lhs, -first_form))

    tr_h = jet_trace(h, geom)
    second_form = (laplacian(h, geom)
                   - exterior_d(delta(h, geom) + exterior_d_tilde(tr_h, geom) * 0.5, geom)
                   - exterior_d_tilde(delta_tilde(h, geom) + exterior_d(tr_h, geom) * 0.5, geom)) * 0.5
    first_on_ric = first_form + h_comp_ric
    flat_geom = JetGeometry(flat_curvilinear_metric(seed, n, degree))
    flat_first = _ricci_first_form(flat_geom, h)
    flat_second = _ricci_second_form(flat_geom, h)
    report("ricci_second_form", _residual(flat_first, -flat_second), "schematic",
           curved_residual=_residual(first_on_ric, -second_form))

    scal_var = variation(pert.scal)
    scal_formula = (delta(delta_tilde(h, geom), geom)
                    + laplacian(tr_h, geom)
                    - geom.inner(ric, h))
    report("scalar", _residual(scal_var, -scal_formula))
    report("scalar_trace", _residual(scal_var, -jet_trace(ric_lhs.with_valence(1, 1), geom)))

    homothety = JetGeometry(_complex_metric(g, g, eps))
    report("scalar_homothety", _residual(variation(homothety.scal), geom.scal))

    worst = max(reports, key=lambda r: r.residual)
    logger.info(f"first-variation suite seed={seed} n={n}: worst {worst}")
    return reports


def _ricci_first_form(geom: JetGeometry, h: JetTensor) -> JetTensor:
    dh = exterior_d(h, geom)
    h_comp_ric = geom.compose(h, geom.ric)
    return ((delta(dh, geom) + exterior_d_tilde(jet_trace(dh, geom), geom)
             + h_comp_ric - geom.ring_action(geom.rm, h)) * 0.5)


def _ricci_second_form(geom: JetGeometry, h: JetTensor) -> JetTensor:
    tr_h = jet_trace(h, geom)
    return (laplacian(h, geom)
            - exterior_d(delta(h, geom) + exterior_d_tilde(tr_h, geom) * 0.5, geom)
            - exterior_d_tilde(delta_tilde(h, geom) + exterior_d(tr_h, geom) * 0.5, geom)) * 0.5


def scalar_variation_at_origin(metric: JetMetric, h: JetTensor) -> float:
    """Complex-step derivative of R at the origin in the direction h"""
    eps = settings.jet.complex_step
    pert = JetGeometry(_complex_metric(metric, h, eps))
    return float(pert.scal.value().imag / eps)
