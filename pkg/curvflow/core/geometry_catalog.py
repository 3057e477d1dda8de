"""
Closed-form homogeneous geometries.

Every model carries its curvature in an orthonormal frame, its volume and,
in dimension four, its Euler characteristic. The Milnor family on SU(2) is
computed from the structure constants [e_i, e_j] = λ0 ε_ijk e_k of a frame in
which the metric is diag(a, b, c); λ0 defaults to the configured
`catalog.structure_constant` (2, so that a = b = c = 1 is the unit sphere).
"""

import logging
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from ..config.settings import settings
from .exceptions import DimensionMismatchError
from .tensor_core import (
    CurvaturePoint,
    DoubleForm22,
    curvature_from_sectional,
    decompose,
)

logger = logging.getLogger(__name__)

PI2 = np.pi ** 2

_LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _LEVI_CIVITA[_i, _j, _k] = 1.0
    _LEVI_CIVITA[_j, _i, _k] = -1.0


class HomogeneousModel:
    """Geometry whose curvature is constant in an orthonormal frame"""

    def __init__(self, name: str, curvature: CurvaturePoint, volume: float,
                 euler_char: Optional[int] = None, params: Optional[Dict[str, float]] = None,
                 frame_metric: Optional[Sequence[float]] = None,
                 nabla_rm: Optional[np.ndarray] = None):
        if not volume > 0:
            raise ValueError(f"{name}: volume must be positive, got {volume}")
        self.name = name
        self.curvature = curvature
        self.volume = float(volume)
        self.euler_char = euler_char
        self.params = dict(params or {})
        n = curvature.n
        self.frame_metric = tuple(float(x) for x in (frame_metric if frame_metric is not None
                                                     else np.ones(n)))
        self.nabla_rm = nabla_rm if nabla_rm is not None else np.zeros((n,) * 5)

    @property
    def n(self) -> int:
        return self.curvature.n

    @property
    def rm_sup(self) -> float:
        """‖Rm‖_∞; the pointwise norm is constant"""
        return float(np.sqrt(self.curvature.rm_norm2()))

    @property
    def rm_l2(self) -> float:
        return float(np.sqrt(self.curvature.rm_norm2() * self.volume))

    @property
    def nabla_rm_norm2(self) -> float:
        """|∇Rm|² with the (1,2,2) double-form factor"""
        return float(0.25 * np.sum(self.nabla_rm ** 2))

    @property
    def min_metric_eig(self) -> float:
        return min(self.frame_metric)

    def integral(self, density: float) -> float:
        return self.volume * density

    def scaled(self, factor: float) -> "HomogeneousModel":
        """The same manifold with metric factor·g"""
        if not factor > 0:
            raise ValueError(f"scale factor must be positive, got {factor}")
        params = dict(self.params)
        params["scale"] = params.get("scale", 1.0) * factor
        return HomogeneousModel(
            name=self.name,
            curvature=self.curvature.scaled(factor),
            volume=self.volume * factor ** (self.n / 2.0),
            euler_char=self.euler_char,
            params=params,
            frame_metric=[factor * x for x in self.frame_metric],
            nabla_rm=self.nabla_rm * factor ** -1.5,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "n": self.n,
            "params": self.params,
            "volume": self.volume,
            "euler_char": self.euler_char,
            "rm_sup": self.rm_sup,
            "frame_metric": list(self.frame_metric),
            "curvature": self.curvature.to_dict(),
        }

    def __str__(self) -> str:
        params = ", ".join(f"{k}={v:.6g}" for k, v in sorted(self.params.items()))
        return f"{self.name}({params})"


def _check_positive(**values: float) -> None:
    for key, value in values.items():
        if not value > 0:
            raise ValueError(f"{key} must be positive, got {value}")


def round_sphere(n: int, r: float = 1.0) -> HomogeneousModel:
    if n not in (3, 4):
        raise DimensionMismatchError(f"round_sphere supports n in {{3, 4}}, got {n}")
    _check_positive(r=r)
    k = 1.0 / r ** 2
    rm = curvature_from_sectional({(i, j): k for i in range(n) for j in range(i + 1, n)}, n)
    volume = 2 * PI2 * r ** 3 if n == 3 else (8 * PI2 / 3) * r ** 4
    return HomogeneousModel(
        name=f"s{n}", curvature=decompose(rm), volume=volume,
        euler_char=2 if n == 4 else None, params={"r": r},
        frame_metric=[r ** 2] * n,
    )


def flat_torus(n: int, side_lengths: Optional[Sequence[float]] = None) -> HomogeneousModel:
    sides = [1.0] * n if side_lengths is None else [float(s) for s in side_lengths]
    if len(sides) != n:
        raise DimensionMismatchError(f"{len(sides)} side lengths for a {n}-torus")
    if n < 3:
        raise DimensionMismatchError(f"flat_torus supports n >= 3, got {n}")
    for s in sides:
        _check_positive(side=s)
    return HomogeneousModel(
        name=f"t{n}", curvature=decompose(DoubleForm22.zero(n)), volume=float(np.prod(sides)),
        euler_char=0 if n == 4 else None,
        params={f"side{i}": s for i, s in enumerate(sides)},
        frame_metric=[s ** 2 for s in sides],
    )


def sphere_product(r: float = 1.0, s: float = 1.0) -> HomogeneousModel:
    """S²(r) × S²(s)"""
    _check_positive(r=r, s=s)
    rm = curvature_from_sectional({(0, 1): 1.0 / r ** 2, (2, 3): 1.0 / s ** 2}, 4)
    return HomogeneousModel(
        name="s2xs2", curvature=decompose(rm), volume=16 * PI2 * r ** 2 * s ** 2,
        euler_char=4, params={"r": r, "s": s},
        frame_metric=[r ** 2, r ** 2, s ** 2, s ** 2],
    )


def milnor_structure_constants(a: float, b: float, c: float,
                               structure_constant: Optional[float] = None) -> np.ndarray:
    """c[i, j, k] with [f_i, f_j] = c[i, j, k] f_k in the orthonormal frame f_i = e_i/√a_i"""
    lam0 = settings.catalog.structure_constant if structure_constant is None else structure_constant
    scales = np.array([a, b, c], dtype=float)
    lam = lam0 * scales / np.sqrt(a * b * c)
    return _LEVI_CIVITA * lam[None, None, :]


def milnor_ricci(a, b, c, structure_constant: Optional[float] = None) -> Tuple[Any, Any, Any]:
    """Ricci eigenvalues in the orthonormal Milnor frame; accepts complex parameters"""
    lam0 = settings.catalog.structure_constant if structure_constant is None else structure_constant
    root = np.sqrt(a * b * c)
    l1, l2, l3 = lam0 * a / root, lam0 * b / root, lam0 * c / root
    half = 0.5 * (l1 + l2 + l3)
    m1, m2, m3 = half - l1, half - l2, half - l3
    return 2 * m2 * m3, 2 * m1 * m3, 2 * m1 * m2


def milnor_volume(a, b, c, structure_constant: Optional[float] = None):
    lam0 = settings.catalog.structure_constant if structure_constant is None else structure_constant
    return 16 * PI2 * np.sqrt(a * b * c) / lam0 ** 3


def frame_curvature(structure: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Rm and ∇Rm of a left-invariant metric from orthonormal-frame structure constants

    Koszul: Γ[i, j, k] = <∇_{f_i} f_j, f_k> = ½(c_ijk - c_jki + c_kij).
    """
    c = np.asarray(structure, dtype=float)
    gamma = 0.5 * (c - c.transpose(1, 2, 0) + c.transpose(2, 0, 1))
    rm = (np.einsum("jlm,imk->ijkl", gamma, gamma)
          - np.einsum("ilm,jmk->ijkl", gamma, gamma)
          - np.einsum("ijm,mlk->ijkl", c, gamma))
    nabla = -(np.einsum("aim,mjkl->aijkl", gamma, rm)
              + np.einsum("ajm,imkl->aijkl", gamma, rm)
              + np.einsum("akm,ijml->aijkl", gamma, rm)
              + np.einsum("alm,ijkm->aijkl", gamma, rm))
    return rm, nabla


def su2_milnor(a: float, b: float, c: float,
               structure_constant: Optional[float] = None) -> HomogeneousModel:
    _check_positive(a=a, b=b, c=c)
    r1, r2, r3 = (float(x) for x in milnor_ricci(a, b, c, structure_constant))
    # in dimension three Ric determines Rm: K_ij = (r_i + r_j - r_k)/2
    rm = curvature_from_sectional({
        (0, 1): 0.5 * (r1 + r2 - r3),
        (0, 2): 0.5 * (r1 + r3 - r2),
        (1, 2): 0.5 * (r2 + r3 - r1),
    }, 3)
    _, nabla = frame_curvature(milnor_structure_constants(a, b, c, structure_constant))
    return HomogeneousModel(
        name="milnor", curvature=decompose(rm),
        volume=float(milnor_volume(a, b, c, structure_constant)),
        params={"a": a, "b": b, "c": c}, frame_metric=[a, b, c], nabla_rm=nabla,
    )


def build_model(name: str, params: Optional[Dict[str, float]] = None) -> HomogeneousModel:
    """Look up a catalog model by its CLI name"""
    p = dict(params or {})
    if name in ("s3", "s4"):
        return round_sphere(int(name[1]), p.get("r", p.get("radius", 1.0)))
    if name in ("t3", "t4"):
        n = int(name[1])
        return flat_torus(n, [p.get(f"side{i}", 1.0) for i in range(n)])
    if name == "s2xs2":
        return sphere_product(p.get("r", 1.0), p.get("s", 1.0))
    if name == "milnor":
        return su2_milnor(p.get("a", 1.0), p.get("b", 1.0), p.get("c", 1.0))
    raise ValueError(f"Unknown model: {name}")


def yamabe_bracket(model: HomogeneousModel, alpha: float = 0.0) -> Tuple[Optional[float], float]:
    """(lower, upper) bounds on the Yamabe invariant

    upper uses the constant test function, ((n-2)/(4(n-1)))·R·Vol^{2/n};
    lower is the square root of max(0, (2/3)((1-α)8π²χ - F^α)) in dimension four
    when χ is known, otherwise None.
    """
    n = model.n
    cp = model.curvature
    upper = (n - 2) / (4.0 * (n - 1)) * cp.scal * model.volume ** (2.0 / n)
    lower = None
    if n == 4 and model.euler_char is not None:
        f_alpha = model.integral((1 - alpha) * cp.weyl_norm2() + 0.5 * alpha * cp.ric0_norm2())
        lower2 = max(0.0, (2.0 / 3.0) * ((1 - alpha) * 8 * PI2 * model.euler_char - f_alpha))
        lower = float(np.sqrt(lower2))
        if lower == 0.0:
            logger.warning(f"Yamabe lower bound degenerates on {model} at alpha={alpha}")
    return lower, float(upper)


def sphere_volume_quadrature(n: int, r: float = 1.0) -> float:
    """Volume of S^n(r) by integrating the solid-angle recursion"""
    area = 2.0  # S^0
    for k in range(1, n + 1):
        integral, _ = quad(lambda t: np.sin(t) ** (k - 1), 0.0, np.pi)
        area *= integral
    return area * r ** n
