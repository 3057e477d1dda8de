import logging
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    ExponentRegimeError,
    HypothesisViolationError,
    MissingEulerCharacteristicError,
)
from .geometry_catalog import PI2, HomogeneousModel, yamabe_bracket
from .tensor_core import CurvaturePoint, Sym2, compose, ring_action, sym_norm2, trace

logger = logging.getLogger(__name__)

_FIELDS = ("F_Rm", "F_Ric", "F_R", "F_W", "F_Ric0", "F_2", "F_alpha", "G_alpha")


class FunctionalReport:
    """Quadratic curvature functionals of one homogeneous model"""

    def __init__(self, model: HomogeneousModel, alpha: float, values: Dict[str, float],
                 gb_residual: Optional[float], q_integral: Optional[float],
                 sigma2_integral: float, gursky_Y2_lower: Optional[float]):
        self.model_name = str(model)
        self.n = model.n
        self.alpha = alpha
        self.alpha_flagged = not 0.0 <= alpha <= 1.0
        self.volume = model.volume
        self.euler_char = model.euler_char
        self.values = values
        self.gb_residual = gb_residual
        self.q_integral = q_integral
        self.sigma2_integral = sigma2_integral
        self.gursky_Y2_lower = gursky_Y2_lower

    def __getattr__(self, name: str) -> float:
        values = self.__dict__.get("values", {})
        if name in values:
            return values[name]
        raise AttributeError(name)

    def decomposition_residual(self) -> float:
        """F_Rm - F_W - F_Ric0/(n-2) - F_R/(2n(n-1)), relative to 1 + F_Rm"""
        n = self.n
        v = self.values
        rebuilt = v["F_W"] + v["F_Ric0"] / (n - 2) + v["F_R"] / (2 * n * (n - 1))
        return abs(v["F_Rm"] - rebuilt) / (1.0 + abs(v["F_Rm"]))

    def gb_tolerance(self) -> float:
        chi = self.euler_char or 0
        return 1e-10 * 8 * PI2 * (abs(chi) + 1)

    def to_dict(self, pi2_units: bool = True) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "model": self.model_name,
            "n": self.n,
            "alpha": self.alpha,
            "alpha_flagged": self.alpha_flagged,
            "volume": self.volume,
            "euler_char": self.euler_char,
            "gb_residual": self.gb_residual,
            "gursky_Y2_lower": self.gursky_Y2_lower,
            "Q_integral": self.q_integral,
            "sigma2_integral": self.sigma2_integral,
        }
        out.update(self.values)
        if pi2_units:
            out["pi2_units"] = {k: v / PI2 for k, v in self.values.items()}
            if self.gursky_Y2_lower is not None:
                out["pi2_units"]["gursky_Y2_lower"] = self.gursky_Y2_lower / PI2
        return out

    def __str__(self) -> str:
        parts = ", ".join(f"{k}={self.values[k] / PI2:.6g}π²" for k in _FIELDS)
        return f"{self.model_name} alpha={self.alpha}: {parts}"


def sigma2(u: Sym2, g: Sym2) -> float:
    """Second elementary symmetric function of the eigenvalues of u relative to g"""
    tr = trace(u, g)
    return 0.5 * (tr ** 2 - sym_norm2(u, g))


def q_curvature(cp: CurvaturePoint) -> float:
    """Q = (1/6)R² - ½|Ric|² where ΔR = 0"""
    if cp.n != 4:
        raise DimensionMismatchError(f"Q-curvature is four-dimensional, got n={cp.n}")
    return cp.scal ** 2 / 6.0 - 0.5 * cp.ric_norm2()


def f_alpha(model: HomogeneousModel, alpha: float) -> float:
    cp = model.curvature
    return model.integral((1 - alpha) * cp.weyl_norm2() + 0.5 * alpha * cp.ric0_norm2())


def evaluate(model: HomogeneousModel, alpha: float = 0.5) -> FunctionalReport:
    cp = model.curvature
    n = model.n
    if not 0.0 <= alpha <= 1.0:
        logger.warning(f"alpha={alpha} lies outside [0, 1]; values are computed but flagged")
    f_r = model.integral(cp.scal ** 2)
    f_ric = model.integral(cp.ric_norm2())
    values = {
        "F_Rm": model.integral(cp.rm_norm2()),
        "F_Ric": f_ric,
        "F_R": f_r,
        "F_W": model.integral(cp.weyl_norm2()),
        "F_Ric0": model.integral(cp.ric0_norm2()),
        "F_2": n / (8.0 * (n - 1)) * f_r - 0.5 * f_ric,
    }
    values["F_alpha"] = (1 - alpha) * values["F_W"] + 0.5 * alpha * values["F_Ric0"]
    values["G_alpha"] = values["F_Ric0"] + alpha * f_r

    gb_residual = None
    gursky = None
    q_integral = None
    if n == 4:
        q_integral = model.integral(q_curvature(cp))
        if model.euler_char is not None:
            gb_residual = (values["F_W"] - 0.5 * values["F_Ric0"] + f_r / 24.0
                           - 8 * PI2 * model.euler_char)
            gursky = gursky_bound(model, alpha)

    report = FunctionalReport(
        model, alpha, values, gb_residual, q_integral,
        sigma2_integral=model.integral(sigma2(cp.schouten, cp.g)),
        gursky_Y2_lower=gursky,
    )
    logger.debug(f"evaluated {report}")
    return report


def _require_dim4(model: HomogeneousModel) -> int:
    if model.n != 4:
        raise DimensionMismatchError(f"{model} is not four-dimensional")
    if model.euler_char is None:
        raise MissingEulerCharacteristicError(f"{model} has no known Euler characteristic")
    return model.euler_char


def gursky_bound(model: HomogeneousModel, alpha: float = 0.0) -> float:
    """Lower bound max(0, (2/3)((1-α)8π²χ - F^α)) on Y²"""
    chi = _require_dim4(model)
    return max(0.0, (2.0 / 3.0) * ((1 - alpha) * 8 * PI2 * chi - f_alpha(model, alpha)))


class PinchingVerdict:
    """Boolean outcome and slack (rhs - lhs) of every pinching predicate"""

    def __init__(self, model_name: str, alpha: float):
        self.model_name = model_name
        self.alpha = alpha
        self.predicates: Dict[str, Tuple[bool, float]] = {}
        self.details: Dict[str, float] = {}

    def add(self, name: str, slack: float, strict: bool = True, tol: float = 0.0) -> None:
        holds = slack > tol if strict else slack >= -tol
        self.predicates[name] = (bool(holds), float(slack))

    def holds(self, name: str) -> bool:
        return self.predicates[name][0]

    def slack(self, name: str) -> float:
        return self.predicates[name][1]

    def __getitem__(self, name: str) -> Tuple[bool, float]:
        return self.predicates[name]

    def to_dict(self, pi2_units: bool = True) -> Dict[str, Any]:
        out = {
            "model": self.model_name,
            "alpha": self.alpha,
            "predicates": {k: {"holds": h, "slack": s} for k, (h, s) in self.predicates.items()},
            "details": dict(self.details),
        }
        if pi2_units:
            for k, (_, s) in self.predicates.items():
                out["predicates"][k]["slack_pi2"] = s / PI2
        return out


def pinching_verdicts(model: HomogeneousModel, alpha: float = 0.5) -> PinchingVerdict:
    chi = _require_dim4(model)
    report = evaluate(model, alpha)
    f_w, f_ric0, f_r, f_a = report.F_W, report.F_Ric0, report.F_R, report.F_alpha
    scale = 1e-12 * (8 * PI2 * (abs(chi) + 1) + f_w + f_ric0 + f_r)

    y2_lower = max(gursky_bound(model, alpha), gursky_bound(model, 0.0))
    _, upper = yamabe_bracket(model, alpha)
    y2_upper = max(upper, 0.0) ** 2

    verdict = PinchingVerdict(str(model), alpha)
    verdict.details.update({"Y2_lower": y2_lower, "Y2_upper": y2_upper})
    energy = f_w + 0.25 * f_ric0
    for label, y2 in (("ylower", y2_lower), ("yupper", y2_upper)):
        verdict.add(f"rigidity_{label}", 3.0 / 16.0 * y2 - energy)
        verdict.add(f"conf_flat_{label}", 25.0 / 54.0 * y2 - f_w)
        verdict.add(f"conf_pinching_{label}", 40.0 / 13.0 * PI2 * chi - f_w - 6.0 / 13.0 * y2)

    if alpha <= 4.0 / 13.0:
        verdict.add("small_energy", 2 * alpha * PI2 * chi - f_a)
    else:
        verdict.add("small_energy", 8.0 / 9.0 * (1 - alpha) * PI2 * chi - f_a)

    pinching = 8.0 / 9.0 * PI2 * chi - f_w - 2.0 / 9.0 * f_ric0
    verdict.add("pinching", pinching)
    verdict.add("pinching_scalar_form", f_r / 192.0 - f_w - 5.0 / 16.0 * f_ric0)
    verdict.details["pinching_equivalence_residual"] = abs(
        9.0 / 8.0 * pinching - verdict.slack("pinching_scalar_form"))

    hypothesis = (1 - alpha) * 8 * PI2 * chi - f_a
    integral_form = (1 - alpha) / 12.0 * f_r - f_ric0
    verdict.add("singularity_hypothesis", hypothesis, strict=False, tol=scale)
    verdict.add("singularity_hypothesis_integral_form", integral_form, strict=False, tol=scale)
    residual = abs(hypothesis - 0.5 * integral_form)
    verdict.details["hypothesis_equivalence_residual"] = residual
    if residual > scale:
        logger.error(f"{model}: hypothesis equivalence residual {residual:.3e} exceeds {scale:.3e}")

    # largest ε for which the energy hypothesis holds
    if alpha <= 4.0 / 13.0:
        eps = PI2 * chi - f_a / (2 * alpha) if alpha > 0 else -np.inf
    else:
        eps = PI2 * chi - 9.0 * f_a / (8.0 * (1 - alpha)) if alpha < 1 else -np.inf
    verdict.details["equibounds_eps"] = float(eps) if np.isfinite(eps) else None
    if eps > 0:
        conclusion = 3.0 / 16.0 * gursky_bound(model, 0.0) - eps - energy
        verdict.add("equibounds_implication", conclusion, strict=False, tol=scale)
    else:
        verdict.add("equibounds_implication", 0.0, strict=False)
    logger.debug(f"pinching verdicts for {model}: {verdict.predicates}")
    return verdict


def sobolev_constant(n: int, p: float) -> float:
    """C(n, p) from the Young-inequality step: ½C² = (1-n/2p)(n/p)^{n/(2p-n)} ((n-2)/(8(n-1)))^{2p/(2p-n)}"""
    base = (n - 2) / (8.0 * (n - 1))
    if np.isinf(p):
        return float(np.sqrt(2.0) * base)
    c2 = 2 * (1 - n / (2 * p)) * (n / p) ** (n / (2 * p - n)) * base ** (2 * p / (2 * p - n))
    return float(np.sqrt(c2))


def sobolev_bound(Y: float, R_p_norm: float, p: float, A: float, n: int) -> float:
    """Upper bound (C A² ‖R‖_p)^{p/(2p-n)} on the Sobolev constant B_A"""
    if not p > n / 2.0:
        raise ExponentRegimeError(f"need p > n/2, got p={p}, n={n}")
    if Y < 2.0 / A ** 2:
        raise HypothesisViolationError(f"Y={Y} is below 2/A^2={2.0 / A ** 2}")
    exponent = 1.0 if np.isinf(p) else p / (2 * p - n)
    return float((sobolev_constant(n, p) * A ** 2 * R_p_norm) ** exponent)


def nabla_f_alpha(cp: CurvaturePoint, alpha: float) -> Sym2:
    """Gradient of F^α at a point where R is constant and ΔRic̊ = 0 (n = 4)

    ∇F^α = -W̊(Ric̊) + Ric̊∘Ric̊ - ¼|Ric̊|² g + ((2-α)/12) R Ric̊
    """
    if cp.n != 4:
        raise DimensionMismatchError(f"nabla_f_alpha is four-dimensional, got n={cp.n}")
    ric0, g = cp.ric0, cp.g
    return (-ring_action(cp.weyl, ric0, g)
            + compose(ric0, ric0, g)
            - g * (0.25 * sym_norm2(ric0, g))
            + ric0 * ((2 - alpha) / 12.0 * cp.scal))


def trace_gradient_check(target: Union[HomogeneousModel, CurvaturePoint], alpha: float) -> float:
    """tr_g ∇F^α; vanishes on homogeneous models"""
    cp = target.curvature if isinstance(target, HomogeneousModel) else target
    return trace(nabla_f_alpha(cp, alpha), cp.g)
