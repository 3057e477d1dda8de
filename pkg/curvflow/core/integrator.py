"""
Adaptive Cash-Karp 5(4) stepping with an energy-monotonicity guard.
"""

import logging
import time
from typing import Callable, List, Optional

import numpy as np

from ..config.settings import FlowControls
from .exceptions import CurvFlowError

logger = logging.getLogger(__name__)

# Butcher tableau
NODES = np.array([0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8])
COUPLING = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [3 / 10, -9 / 10, 6 / 5],
    [-11 / 54, 5 / 2, -70 / 27, 35 / 27],
    [1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096],
]
WEIGHTS = np.array([37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771])
# fifth minus fourth order weights
ERROR_WEIGHTS = np.array([-277 / 64512, 0.0, 6925 / 370944, -6925 / 202752,
                          -277 / 14336, 277 / 7084])

COMPLETED = "completed"
STOPPED = "stopped"
STEP_UNDERFLOW = "step_underflow"
MAX_STEPS = "max_steps"


class IntegrationResult:
    def __init__(self):
        self.times: List[float] = []
        self.states: List[np.ndarray] = []
        self.error_estimates: List[float] = []
        self.accepted = 0
        self.rejected = 0
        self.monotonicity_rejections = 0
        self.status = COMPLETED
        self.duration = 0.0

    def to_dict(self):
        return {
            "status": self.status,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "monotonicity_rejections": self.monotonicity_rejections,
            "final_time": self.times[-1] if self.times else None,
            "duration": self.duration,
        }


class CashKarpIntegrator:
    """Explicit embedded 5(4) pair with step-size control

    `energy(y)` must not increase by more than monotonicity_tol·(1 + |F|) over an
    accepted step; stage evaluations that leave the admissible domain (raise a
    CurvFlowError or produce non-finite values) count as rejected steps.
    """

    def __init__(self, rhs: Callable[[float, np.ndarray], np.ndarray],
                 controls: FlowControls,
                 energy: Optional[Callable[[np.ndarray], float]] = None):
        self.rhs = rhs
        self.controls = controls
        self.energy = energy

    def step(self, t: float, y: np.ndarray, h: float):
        """One trial step: returns (y_new, error_vector)"""
        k = np.empty((len(NODES), y.size))
        for s in range(len(NODES)):
            ys = y + h * sum(c * k[j] for j, c in enumerate(COUPLING[s])) if s else y
            k[s] = self.rhs(t + NODES[s] * h, ys)
        return y + h * WEIGHTS @ k, h * ERROR_WEIGHTS @ k

    def _error_norm(self, y: np.ndarray, y_new: np.ndarray, err: np.ndarray) -> float:
        c = self.controls
        scale = c.atol + c.rtol * np.maximum(np.abs(y), np.abs(y_new))
        return float(np.max(np.abs(err) / scale))

    def _factor(self, err_norm: float) -> float:
        c = self.controls
        if err_norm == 0.0:
            return c.max_factor
        return min(c.max_factor, max(c.min_factor, c.safety * err_norm ** -0.2))

    def integrate(self, y0: np.ndarray, t0: float = 0.0, t_end: Optional[float] = None,
                  callback: Optional[Callable[[float, np.ndarray], bool]] = None) -> IntegrationResult:
        """Integrate until t_end, until callback(t, y) returns True, or until the step underflows"""
        c = self.controls
        t_end = t0 + c.horizon if t_end is None else t_end
        start = time.time()
        result = IntegrationResult()
        t, y = float(t0), np.array(y0, dtype=float)
        result.times.append(t)
        result.states.append(y.copy())
        result.error_estimates.append(0.0)
        if callback is not None and callback(t, y):
            result.status = STOPPED
            result.duration = time.time() - start
            return result

        h = min(c.initial_step, c.max_step)
        f_now = self.energy(y) if self.energy is not None else None
        while t < t_end:
            if result.accepted + result.rejected >= c.max_steps:
                result.status = MAX_STEPS
                logger.warning(f"step limit {c.max_steps} reached at t={t:.6g}")
                break
            h = min(h, t_end - t)
            if h < c.min_step and t_end - t > c.min_step:
                result.status = STEP_UNDERFLOW
                logger.info(f"step size underflow at t={t:.10g} (h={h:.3e})")
                break

            try:
                y_new, err = self.step(t, y, h)
                ok = bool(np.all(np.isfinite(y_new)))
            except (CurvFlowError, ValueError, FloatingPointError, np.linalg.LinAlgError) as e:
                logger.debug(f"stage evaluation failed at t={t:.6g}, h={h:.3e}: {e}")
                ok = False
            if not ok:
                result.rejected += 1
                h *= 0.5
                continue

            err_norm = self._error_norm(y, y_new, err)
            if err_norm > 1.0:
                result.rejected += 1
                h *= max(c.min_factor, c.safety * err_norm ** -0.25)
                continue

            if self.energy is not None:
                try:
                    f_new = self.energy(y_new)
                except (CurvFlowError, ValueError) as e:
                    logger.debug(f"energy evaluation failed at t={t + h:.6g}: {e}")
                    result.rejected += 1
                    h *= 0.5
                    continue
                if f_new > f_now + c.monotonicity_tol * (1.0 + abs(f_now)):
                    result.rejected += 1
                    result.monotonicity_rejections += 1
                    h *= 0.5
                    continue
                f_now = f_new

            t += h
            y = y_new
            result.accepted += 1
            result.times.append(t)
            result.states.append(y.copy())
            result.error_estimates.append(float(np.max(np.abs(err))))
            h = min(h * self._factor(err_norm), c.max_step)
            if callback is not None and callback(t, y):
                result.status = STOPPED
                break

        result.duration = time.time() - start
        logger.debug(f"integration finished: {result.to_dict()}")
        return result
