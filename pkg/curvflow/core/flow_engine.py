"""
Gradient flows restricted to finite-parameter families of homogeneous metrics.

Every family is a diagonal metric g_θ = Σ_i θ_i P_i in a fixed reference frame,
P_i the projection on a block of frame directions. In the orthonormal frame
of g_θ the tangent vector ∂g/∂θ_i is P_i/θ_i, so the L² Gram matrix is
Vol(θ)·diag(|block_i|/θ_i²). The reduced flow is

    θ̇ = -factor · G(θ)⁻¹ ∇_θF,

with factor 2 for F^α (∂_t g = -2∇F^α) and 1 for G^α (∂_t g = -∇G^α).
Energies are closed forms written with numpy operations so that ∇_θF can be
taken by the complex step Im F(θ + i h e_k)/h.
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, IO, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from ..config.settings import FlowControls, settings
from .exceptions import GramSingularError, NoBlowupError
from .geometry_catalog import (
    PI2,
    HomogeneousModel,
    flat_torus,
    milnor_ricci,
    milnor_volume,
    round_sphere,
    sphere_product,
    su2_milnor,
)
from .integrator import STEP_UNDERFLOW, CashKarpIntegrator

logger = logging.getLogger(__name__)

CONVERGED = "converged"
BLOWUP = "blowup"
COLLAPSE = "collapse"
HORIZON_REACHED = "horizon_reached"
STALLED = "stalled"

_COMPLEX_STEP = 1e-20
_GRAM_CONDITION_LIMIT = 1e12


class ReducedFamily:
    """Flow-invariant family of metrics with a closed-form energy

    Flow invariance is an isometry-group assumption: each family is the fixed
    set of a group acting isometrically on the whole flow.
    """

    def __init__(self, name: str, n: int, blocks: Sequence[Sequence[int]],
                 functional: str, alpha: float,
                 energy: Callable[[np.ndarray, float], Any],
                 model: Callable[[np.ndarray], HomogeneousModel],
                 volume: Callable[[np.ndarray], Any],
                 theta0: Sequence[float],
                 analytic_gradient: Optional[Callable[[np.ndarray, float], np.ndarray]] = None):
        if functional not in ("F_alpha", "G_alpha"):
            raise ValueError(f"Unknown functional: {functional}")
        self.name = name
        self.n = n
        self.blocks = [list(b) for b in blocks]
        self.functional = functional
        self.alpha = alpha
        self._energy = energy
        self._model = model
        self._volume = volume
        self.theta0 = np.array(theta0, dtype=float)
        self._analytic_gradient = analytic_gradient

    @property
    def param_count(self) -> int:
        return len(self.blocks)

    @property
    def factor(self) -> float:
        return 2.0 if self.functional == "F_alpha" else 1.0

    def check_admissible(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.param_count,):
            raise ValueError(f"{self.name}: expected {self.param_count} parameters, got {theta.shape}")
        if not np.all(theta > 0) or not np.all(np.isfinite(theta)):
            raise GramSingularError(f"{self.name}: parameters {theta.tolist()} leave the admissible domain")
        return theta

    def model(self, theta: np.ndarray) -> HomogeneousModel:
        return self._model(self.check_admissible(theta))

    def energy(self, theta: np.ndarray) -> float:
        return float(np.real(self._energy(self.check_admissible(theta), self.alpha)))

    def volume(self, theta: np.ndarray) -> float:
        return float(np.real(self._volume(self.check_admissible(theta))))

    def frame_metric(self, theta: np.ndarray) -> np.ndarray:
        out = np.empty(self.n)
        for value, block in zip(theta, self.blocks):
            out[block] = value
        return out

    def tangent_basis(self, theta: np.ndarray) -> List[np.ndarray]:
        """∂g/∂θ_i in the orthonormal frame of g_θ"""
        theta = self.check_admissible(theta)
        basis = []
        for value, block in zip(theta, self.blocks):
            h = np.zeros((self.n, self.n))
            h[block, block] = 1.0 / value
            basis.append(h)
        return basis

    def gram(self, theta: np.ndarray) -> np.ndarray:
        basis = self.tangent_basis(theta)
        vol = self.volume(theta)
        return vol * np.array([[np.sum(hi * hj) for hj in basis] for hi in basis])

    def energy_gradient(self, theta: np.ndarray) -> np.ndarray:
        """∇_θF, analytic when the family provides it, otherwise by complex step"""
        theta = self.check_admissible(theta)
        if self._analytic_gradient is not None:
            return np.asarray(self._analytic_gradient(theta, self.alpha), dtype=float)
        grad = np.empty(theta.size)
        for k in range(theta.size):
            shifted = theta.astype(complex)
            shifted[k] += 1j * _COMPLEX_STEP
            grad[k] = np.imag(self._energy(shifted, self.alpha)) / _COMPLEX_STEP
        return grad

    def gram_diagonal(self, thetas: np.ndarray) -> np.ndarray:
        """Vol(θ)·|block_i|/θ_i² for every column θ of a (k, ...) array"""
        thetas = np.asarray(thetas, dtype=float)
        sizes = np.array([len(b) for b in self.blocks], dtype=float)
        sizes = sizes.reshape((-1,) + (1,) * (thetas.ndim - 1))
        return np.real(self._volume(thetas)) * sizes / thetas ** 2

    def energy_gradients(self, thetas: np.ndarray) -> np.ndarray:
        """∇_θF for every column of a (k, ...) array; no admissibility check"""
        thetas = np.asarray(thetas, dtype=float)
        if self._analytic_gradient is not None:
            return np.asarray(self._analytic_gradient(thetas, self.alpha), dtype=float)
        grads = np.empty_like(thetas)
        for k in range(thetas.shape[0]):
            shifted = thetas.astype(complex)
            shifted[k] += 1j * _COMPLEX_STEP
            grads[k] = np.imag(self._energy(shifted, self.alpha)) / _COMPLEX_STEP
        return grads

    def velocities(self, thetas: np.ndarray) -> np.ndarray:
        """Column-wise θ̇; the Gram matrix is diagonal"""
        return -self.factor * self.energy_gradients(thetas) / self.gram_diagonal(thetas)

    def gradient_norm2s(self, thetas: np.ndarray) -> np.ndarray:
        """Column-wise ∇Fᵀ G⁻¹ ∇F"""
        return np.sum(self.energy_gradients(thetas) ** 2 / self.gram_diagonal(thetas), axis=0)

    def __str__(self) -> str:
        return f"{self.name}[{self.functional}, alpha={self.alpha}]"


def _sphere3_energy(theta, alpha):
    (c,) = theta
    return 72 * alpha * PI2 * c ** -0.5


def _sphere3_gradient(theta, alpha):
    (c,) = theta
    return np.array([-36 * alpha * PI2 * c ** -1.5])


def _milnor_energy(a, b, c, alpha):
    """G^α = ∫ |Ric̊|² + α R² for the Milnor metric diag(a, b, c)"""
    r1, r2, r3 = milnor_ricci(a, b, c)
    scal = r1 + r2 + r3
    ric0_norm2 = r1 ** 2 + r2 ** 2 + r3 ** 2 - scal ** 2 / 3.0
    return milnor_volume(a, b, c) * (ric0_norm2 + alpha * scal ** 2)


def _sphere_product_energy(theta, alpha):
    """F^α of S²×S² with metric u·g_{S²} + v·g_{S²}"""
    u, v = theta
    scal = 2 / u + 2 / v
    rm_norm2 = 1 / u ** 2 + 1 / v ** 2
    ric0_norm2 = (1 / u - 1 / v) ** 2
    weyl_norm2 = rm_norm2 - 0.5 * ric0_norm2 - scal ** 2 / 24.0
    return 16 * PI2 * u * v * ((1 - alpha) * weyl_norm2 + 0.5 * alpha * ric0_norm2)


def _zero_energy(theta, alpha):
    return 0.0 * theta[0]


def _torus_volume(theta):
    return np.prod(np.sqrt(theta), axis=0)


def build_family(name: str, alpha: float = 0.5) -> ReducedFamily:
    """Reduced family by name: s3-round, s4-round, milnor, berger, s2xs2, torus3, torus4"""
    if name == "s3-round":
        return ReducedFamily(
            name, 3, [[0, 1, 2]], "G_alpha", alpha, _sphere3_energy,
            lambda th: round_sphere(3, np.sqrt(th[0])),
            lambda th: 2 * PI2 * th[0] ** 1.5, [1.0], analytic_gradient=_sphere3_gradient)
    if name == "s4-round":
        return ReducedFamily(
            name, 4, [[0, 1, 2, 3]], "F_alpha", alpha, _zero_energy,
            lambda th: round_sphere(4, np.sqrt(th[0])),
            lambda th: 8 * PI2 / 3 * th[0] ** 2, [1.0])
    if name == "milnor":
        return ReducedFamily(
            name, 3, [[0], [1], [2]], "G_alpha", alpha,
            lambda th, al: _milnor_energy(th[0], th[1], th[2], al),
            lambda th: su2_milnor(*th), lambda th: milnor_volume(*th), [1.0, 1.0, 1.5])
    if name == "berger":
        return ReducedFamily(
            name, 3, [[0, 1], [2]], "G_alpha", alpha,
            lambda th, al: _milnor_energy(th[0], th[0], th[1], al),
            lambda th: su2_milnor(th[0], th[0], th[1]),
            lambda th: milnor_volume(th[0], th[0], th[1]), [1.0, 1.5])
    if name == "s2xs2":
        return ReducedFamily(
            name, 4, [[0, 1], [2, 3]], "F_alpha", alpha, _sphere_product_energy,
            lambda th: sphere_product(np.sqrt(th[0]), np.sqrt(th[1])),
            lambda th: 16 * PI2 * th[0] * th[1], [1.0, 1.0])
    if name in ("torus3", "torus4"):
        n = int(name[-1])
        return ReducedFamily(
            name, n, [[i] for i in range(n)], "G_alpha" if n == 3 else "F_alpha", alpha,
            _zero_energy, lambda th: flat_torus(n, np.sqrt(th)), _torus_volume, [1.0] * n)
    raise ValueError(f"Unknown family: {name}")


FAMILIES = ("s3-round", "s4-round", "milnor", "berger", "s2xs2", "torus3", "torus4")


def _solve_gram(family: ReducedFamily, theta: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    gram = family.gram(theta)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > _GRAM_CONDITION_LIMIT:
        raise GramSingularError(f"{family.name}: Gram matrix condition number {cond:.3e} at {theta.tolist()}")
    try:
        return scipy.linalg.solve(gram, rhs, assume_a="pos")
    except np.linalg.LinAlgError as e:
        raise GramSingularError(f"{family.name}: Gram matrix is not positive definite") from e


def reduced_gradient(family: ReducedFamily, theta: Sequence[float]) -> np.ndarray:
    """θ̇ = -factor·G⁻¹∇_θF"""
    theta = family.check_admissible(theta)
    return -family.factor * _solve_gram(family, theta, family.energy_gradient(theta))


def gradient_norm2(family: ReducedFamily, theta: np.ndarray) -> float:
    """‖∇F‖²_{L²} of the Riesz representative on the family, ∇Fᵀ G⁻¹ ∇F"""
    grad = family.energy_gradient(theta)
    return float(grad @ _solve_gram(family, family.check_admissible(theta), grad))


class FlowState:
    __slots__ = ("t", "theta", "F", "grad_norm", "rm_sup", "rm_l2", "volume",
                 "min_metric_eig", "max_metric_eig", "dissipation")

    def __init__(self, t: float, theta: np.ndarray, F: float, grad_norm: float, rm_sup: float,
                 rm_l2: float, volume: float, min_metric_eig: float, max_metric_eig: float,
                 dissipation: float = 0.0):
        self.t = t
        self.theta = theta
        self.F = F
        self.grad_norm = grad_norm
        self.rm_sup = rm_sup
        self.rm_l2 = rm_l2
        self.volume = volume
        self.min_metric_eig = min_metric_eig
        self.max_metric_eig = max_metric_eig
        self.dissipation = dissipation

    @property
    def collapse_measure(self) -> float:
        """Smallest frame eigenvalue times a diameter proxy min(1, π√max_eig)"""
        return self.min_metric_eig * min(1.0, np.pi * np.sqrt(self.max_metric_eig))

    def row(self) -> List[float]:
        return ([self.t] + [float(x) for x in self.theta]
                + [self.F, self.grad_norm, self.rm_sup, self.rm_l2, self.volume, self.min_metric_eig])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "theta": [float(x) for x in self.theta],
            "F": self.F,
            "grad_norm": self.grad_norm,
            "rm_sup": self.rm_sup,
            "rm_l2": self.rm_l2,
            "volume": self.volume,
            "min_eig": self.min_metric_eig,
            "dissipation": self.dissipation,
        }


def flow_state(family: ReducedFamily, t: float, theta: np.ndarray, dissipation: float = 0.0) -> FlowState:
    model = family.model(theta)
    frame = family.frame_metric(theta)
    return FlowState(
        t=float(t),
        theta=np.array(theta, dtype=float),
        F=family.energy(theta),
        grad_norm=float(np.sqrt(max(gradient_norm2(family, theta), 0.0))),
        rm_sup=model.rm_sup,
        rm_l2=model.rm_l2,
        volume=model.volume,
        min_metric_eig=float(np.min(frame)),
        max_metric_eig=float(np.max(frame)),
        dissipation=float(dissipation),
    )


def detect_event(state: FlowState, controls: FlowControls) -> Optional[str]:
    """blowup > collapse > converged; None while the flow is regular"""
    if state.rm_sup > controls.blowup_threshold:
        return BLOWUP
    if state.collapse_measure < controls.collapse_threshold and state.rm_sup < controls.curvature_bound:
        return COLLAPSE
    if state.grad_norm < controls.conv_tol:
        return CONVERGED
    return None


class Trajectory:
    """Time-ordered flow states and the terminal event"""

    def __init__(self, family: ReducedFamily, controls: FlowControls):
        self.family = family
        self.controls = controls
        self.states: List[FlowState] = []
        self.event = HORIZON_REACHED
        self.event_data: Dict[str, Any] = {}

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def thetas(self) -> np.ndarray:
        return np.array([s.theta for s in self.states])

    def energies(self) -> np.ndarray:
        return np.array([s.F for s in self.states])

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    def max_energy_increase(self) -> float:
        """Largest per-step F increase relative to 1 + |F|"""
        f = self.energies()
        if f.size < 2:
            return 0.0
        return float(np.max(np.diff(f) / (1.0 + np.abs(f[:-1]))))

    def quasi_converged(self) -> bool:
        window = self.states[-self.controls.quasi_window:]
        return len(window) > 0 and all(s.grad_norm < self.controls.conv_tol for s in window)

    def columns(self) -> List[str]:
        thetas = [f"theta{i}" for i in range(self.family.param_count)]
        return ["t"] + thetas + ["F", "grad_norm", "rm_sup", "rm_l2", "volume", "min_eig"]

    def write_csv(self, stream: IO[str]) -> None:
        writer = csv.writer(stream, lineterminator="\r\n")
        writer.writerow(self.columns())
        for s in self.states:
            writer.writerow([repr(float(x)) for x in s.row()])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family.name,
            "functional": self.family.functional,
            "alpha": self.family.alpha,
            "event": self.event,
            "event_data": self.event_data,
            "initial": self.states[0].to_dict() if self.states else None,
            "final": self.final.to_dict() if self.states else None,
            "controls": self.controls.model_dump(),
            "accepted_states": len(self.states),
        }


def integrate(family: ReducedFamily, theta0: Optional[Sequence[float]] = None,
              controls: Optional[FlowControls] = None, telemetry=None) -> Trajectory:
    """Integrate the reduced flow with adaptive Cash-Karp steps

    The state vector carries θ and the dissipated energy q with
    q̇ = factor·‖∇F‖², so that q(T) balances F(0) - F(T).
    """
    controls = controls or settings.flow
    theta0 = family.theta0 if theta0 is None else np.array(theta0, dtype=float)
    family.check_admissible(theta0)
    k = family.param_count
    traj = Trajectory(family, controls)
    logger.info(f"integrating {family} from theta0={theta0.tolist()} to T={controls.horizon}")

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        theta = family.check_admissible(y[:k])
        grad = family.energy_gradient(theta)
        solved = _solve_gram(family, theta, grad)
        return np.append(-family.factor * solved, family.factor * float(grad @ solved))

    def energy(y: np.ndarray) -> float:
        return family.energy(y[:k])

    def on_step(t: float, y: np.ndarray) -> bool:
        state = flow_state(family, t, y[:k], y[k])
        traj.states.append(state)
        event = detect_event(state, controls)
        if event is None:
            return False
        if event == CONVERGED and not controls.stop_on_converged:
            return False
        traj.event = event
        return True

    integrator = CashKarpIntegrator(rhs, controls, energy)
    result = integrator.integrate(np.append(theta0, 0.0), 0.0, controls.horizon, on_step)

    if result.status == STEP_UNDERFLOW:
        # no threshold was crossed; only detect_event reports a blow-up
        traj.event = STALLED
        logger.warning(f"{family}: step size underflow at t={traj.final.t:.10g} "
                       f"with rm_sup={traj.final.rm_sup:.6g} below the blow-up threshold")

    f = traj.energies()
    traj.event_data = {
        "status": result.status,
        "t_end": traj.final.t,
        "accepted": result.accepted,
        "rejected": result.rejected,
        "monotonicity_rejections": result.monotonicity_rejections,
        "max_local_error": float(max(result.error_estimates)),
        "max_energy_increase": traj.max_energy_increase(),
        "quasi_converged": traj.quasi_converged(),
        "dissipation": traj.final.dissipation,
        "energy_drop": float(f[0] - f[-1]),
        "thresholds": {
            "blowup_threshold": controls.blowup_threshold,
            "collapse_threshold": controls.collapse_threshold,
            "curvature_bound": controls.curvature_bound,
            "conv_tol": controls.conv_tol,
        },
    }
    if telemetry is not None:
        telemetry.record_integration(family.name, result.accepted, result.rejected,
                                     result.duration, traj.event)
    logger.info(f"{family}: {traj.event} at t={traj.final.t:.6g} "
                f"({result.accepted} accepted, {result.rejected} rejected)")
    return traj


def blowup_rescale(traj: Trajectory, count: int = 5) -> List[Tuple[float, HomogeneousModel]]:
    """Models α_i g(t_i) with α_i = ‖Rm(t_i)‖_∞, so each has ‖Rm‖_∞ = 1

    t_i is the first time the running supremum of ‖Rm‖_∞ reaches 2^j‖Rm(0)‖_∞;
    the last `count` such times are returned. Raises NoBlowupError when the
    curvature never doubles before the blow-up threshold.
    """
    if traj.event != BLOWUP:
        raise NoBlowupError(f"trajectory ended with {traj.event}, not {BLOWUP}")
    base = traj.states[0].rm_sup
    if base <= 0:
        raise NoBlowupError("initial curvature vanishes")
    picks: List[FlowState] = []
    level = 2.0 * base
    running = 0.0
    for state in traj.states:
        running = max(running, state.rm_sup)
        if state.rm_sup >= running and state.rm_sup >= level:
            picks.append(state)
            while level <= state.rm_sup:
                level *= 2.0
    if not picks:
        raise NoBlowupError(f"rm_sup never reached {2.0 * base:.6g}, twice its initial value")
    out = []
    for state in picks[-count:]:
        model = traj.family.model(state.theta)
        out.append((state.t, model.scaled(model.rm_sup)))
    logger.info(f"blow-up sequence of {len(out)} rescaled models from {traj.family}")
    return out


def sweep(family_name: str, alphas: Iterable[float], theta0s: Iterable[Optional[Sequence[float]]],
          controls: Optional[FlowControls] = None, max_workers: int = 4,
          progress: Optional[Callable[[str], None]] = None) -> Dict[str, Dict[str, Any]]:
    """Run a grid of trajectories concurrently; results are keyed and sorted by configuration"""
    controls = controls or settings.flow
    configs = []
    for alpha in alphas:
        for theta0 in theta0s:
            family = build_family(family_name, alpha)
            theta = family.theta0 if theta0 is None else np.array(theta0, dtype=float)
            key = f"alpha={alpha!r};theta0=" + ",".join(repr(float(x)) for x in theta)
            configs.append((key, family, theta))

    def run(config):
        key, family, theta = config
        traj = integrate(family, theta, controls)
        if progress is not None:
            progress(traj.event)
        return key, {
            "alpha": family.alpha,
            "theta0": [float(x) for x in theta],
            "event": traj.event,
            "t_end": traj.final.t,
            "theta_end": [float(x) for x in traj.final.theta],
            "F_start": traj.states[0].F,
            "F_end": traj.final.F,
            "rm_sup_end": traj.final.rm_sup,
        }

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = list(pool.map(run, configs))
    return dict(sorted(results))
