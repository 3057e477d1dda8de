"""
Principal symbol of the gauged flow operator and its ellipticity class.

The symbol acts on symmetric 2-tensors as σ = -½|ξ|⁴ Id + a <R_ξ, ·> R_ξ with
R_ξ = ξ⊗ξ - |ξ|² g; the class depends only on the sign of a - 1/(2(n-1)).
"""

import logging
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .exceptions import DimensionMismatchError
from .jet_chart import euclidean_metric, plane_wave_direction, scalar_variation_at_origin
from .tensor_core import Sym2, sym_inner

logger = logging.getLogger(__name__)

STRONGLY_ELLIPTIC = "strongly_elliptic"
NOT_ELLIPTIC = "not_elliptic"
NOT_STRONGLY_ELLIPTIC = "not_strongly_elliptic"


def threshold(n: int) -> float:
    return 1.0 / (2 * (n - 1))


@lru_cache(maxsize=None)
def sym2_basis(n: int) -> np.ndarray:
    """Orthonormal basis of symmetric n×n matrices for the plain contraction, shape (N, n, n)"""
    basis = []
    for i in range(n):
        for j in range(i, n):
            e = np.zeros((n, n))
            if i == j:
                e[i, i] = 1.0
            else:
                e[i, j] = e[j, i] = 1.0 / np.sqrt(2.0)
            basis.append(e)
    out = np.array(basis)
    out.setflags(write=False)
    return out


def r_xi(xi: Sequence[float], n: Optional[int] = None) -> Sym2:
    xi = np.asarray(xi, dtype=float)
    n = xi.size if n is None else n
    if xi.size != n:
        raise DimensionMismatchError(f"covector of length {xi.size} in dimension {n}")
    return Sym2(np.outer(xi, xi) - np.dot(xi, xi) * np.eye(n))


class SymbolOperator:
    """Matrix of the principal symbol in the orthonormal Sym2 basis"""

    def __init__(self, n: int, a: float, xi: np.ndarray, matrix: np.ndarray):
        self.n = n
        self.a = a
        self.xi = xi
        self.matrix = matrix

    @property
    def xi_norm2(self) -> float:
        return float(np.dot(self.xi, self.xi))

    def apply(self, h: Sym2) -> Sym2:
        basis = sym2_basis(self.n)
        coords = np.einsum("kij,ij->k", basis, h.comps)
        return Sym2(np.einsum("k,kij->ij", self.matrix @ coords, basis))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def closed_form_eigenvalues(self) -> np.ndarray:
        """-½|ξ|⁴ with multiplicity N-1 and (-½ + a(n-1))|ξ|⁴ once"""
        size = self.n * (self.n + 1) // 2
        x4 = self.xi_norm2 ** 2
        values = np.full(size, -0.5 * x4)
        values[-1] = (-0.5 + self.a * (self.n - 1)) * x4
        return np.sort(values)

    def r_xi_component(self, h: Sym2) -> float:
        """<σ(h), R_ξ>"""
        return sym_inner(self.apply(h), r_xi(self.xi), Sym2.identity(self.n))

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "a": self.a, "xi": self.xi.tolist(),
                "eigenvalues": self.eigenvalues().tolist()}


def symbol(n: int, a: float, xi: Sequence[float]) -> SymbolOperator:
    if n < 3:
        raise DimensionMismatchError(f"symbol analysis needs n >= 3, got {n}")
    xi = np.asarray(xi, dtype=float)
    if xi.size != n:
        raise DimensionMismatchError(f"covector of length {xi.size} in dimension {n}")
    if not np.any(xi):
        raise ValueError("the principal symbol is evaluated at a nonzero covector")
    basis = sym2_basis(n)
    r = np.einsum("kij,ij->k", basis, r_xi(xi).comps)
    x4 = float(np.dot(xi, xi)) ** 2
    matrix = -0.5 * x4 * np.eye(len(basis)) + a * np.outer(r, r)
    return SymbolOperator(n, a, xi, matrix)


class EllipticityVerdict:
    def __init__(self, n: int, a: float, classification: str, margin: float):
        self.n = n
        self.a = a
        self.classification = classification
        self.threshold = threshold(n)
        self.margin = margin

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "a": self.a, "class": self.classification,
                "threshold": self.threshold, "margin": self.margin}

    def __str__(self) -> str:
        return f"n={self.n} a={self.a:.6g}: {self.classification} (margin {self.margin:+.6g})"


def classify(n: int, a: float, atol: float = 0.0) -> EllipticityVerdict:
    """Strongly elliptic iff a < 1/(2(n-1)); |a - threshold| <= atol counts as the threshold"""
    if n < 3:
        raise DimensionMismatchError(f"symbol analysis needs n >= 3, got {n}")
    margin = threshold(n) - a
    if abs(margin) <= atol:
        cls = NOT_ELLIPTIC
    elif margin > 0:
        cls = STRONGLY_ELLIPTIC
    else:
        cls = NOT_STRONGLY_ELLIPTIC
    return EllipticityVerdict(n, a, cls, margin)


def flow_coefficient(functional_spec: Dict[str, float]) -> float:
    """Coefficient a of ΔR·g in the flow operator of a named gradient flow

    {"beta", "a"}: the (1-β)F_Rm + β(F_Ric - ¼F_R) - (a/2)F_R family, returns a.
    {"alpha", "dim"} (optionally with "beta" when dim >= 4): returns (1-α)/(2(dim-1)).
    The coefficient b of ∇²R never affects the class and is ignored.
    """
    spec = dict(functional_spec)
    if "a" in spec:
        beta = spec.get("beta", 0.0)
        if not 0.0 <= beta <= 1.0:
            logger.warning(f"beta={beta} lies outside [0, 1]")
        return float(spec["a"])
    if "alpha" not in spec or "dim" not in spec:
        raise ValueError(f"flow_coefficient needs {{beta, a}} or {{alpha, dim}}, got {sorted(spec)}")
    alpha, dim = float(spec["alpha"]), int(spec["dim"])
    if dim < 3:
        raise DimensionMismatchError(f"flow_coefficient needs dim >= 3, got {dim}")
    if not 0.0 < alpha <= 1.0:
        logger.warning(f"alpha={alpha} lies outside (0, 1]; the flow is not covered by the theory")
    if "beta" in spec and not 0.0 <= spec["beta"] <= 1.0:
        logger.warning(f"beta={spec['beta']} lies outside [0, 1]")
    return (1.0 - alpha) / (2.0 * (dim - 1))


def verdict_table(ns: Sequence[int], coefficients: Sequence[float],
                  atol: float = 0.0) -> List[EllipticityVerdict]:
    return [classify(n, a, atol) for n in ns for a in coefficients]


def plane_wave_check(xi: Sequence[float], amplitude: np.ndarray) -> float:
    """|R'(h)(0) - <R_ξ, H>| for h = H (ξ·x)²/2 on the flat metric"""
    xi = np.asarray(xi, dtype=float)
    n = xi.size
    amplitude = np.asarray(amplitude, dtype=float)
    h = plane_wave_direction(xi, amplitude, degree=2)
    measured = scalar_variation_at_origin(euclidean_metric(n, 2), h)
    expected = sym_inner(r_xi(xi), Sym2(amplitude), Sym2.identity(n))
    residual = abs(measured - expected)
    logger.debug(f"plane-wave symbol check xi={xi.tolist()}: residual {residual:.3e}")
    return residual
