"""
Interpolation and multiplicative Sobolev inequalities on flat periodic grids.

Fields live on the unit torus [0, 1)^n, n in {1, 2}, and are generated from a
seeded set of Fourier coefficients independent of the grid, so the same
field can be sampled at several resolutions. Lᵖ norms use the uniform grid
quadrature (the torus has volume 1) and p = ∞ the maximum. Exponents are
passed as reciprocals where the inequalities are written that way:
`norm(values, gamma)` is the L^{1/γ} norm.
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, IO, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import comb

from ..config.settings import settings
from .exceptions import (
    DegenerateNormError,
    DimensionMismatchError,
    ExponentRegimeError,
    HypothesisViolationError,
)

logger = logging.getLogger(__name__)

_EXPONENT_TOL = 1e-12


def norm(values: np.ndarray, gamma: float) -> float:
    """L^{1/γ} norm by grid quadrature; γ = 0 is the sup norm"""
    if gamma < 0:
        raise ExponentRegimeError(f"reciprocal exponent must be non-negative, got {gamma}")
    a = np.abs(values)
    if gamma == 0:
        return float(np.max(a))
    return float(np.mean(a ** (1.0 / gamma)) ** gamma)


def lp_norm(values: np.ndarray, p: float) -> float:
    return norm(values, 0.0 if np.isinf(p) else 1.0 / p)


class PeriodicField:
    """Real field sampled on a uniform periodic grid, differentiated spectrally"""

    def __init__(self, values: np.ndarray, band_limit: Optional[int] = None,
                 spectral_tol: Optional[float] = None):
        values = np.asarray(values, dtype=float)
        if values.ndim not in (1, 2) or len(set(values.shape)) != 1:
            raise DimensionMismatchError(f"expected a square grid in dimension 1 or 2, got {values.shape}")
        self.values = values
        self.n = values.ndim
        self.grid = values.shape[0]
        self.band_limit = band_limit
        tol = settings.estimates.spectral_tol if spectral_tol is None else spectral_tol
        spectrum = np.fft.fftn(values)
        cutoff = tol * max(float(np.max(np.abs(spectrum))), 1.0)
        spectrum[np.abs(spectrum) < cutoff] = 0.0
        self.spectrum = spectrum
        freqs = np.fft.fftfreq(self.grid, d=1.0 / self.grid)
        if self.grid % 2 == 0:
            freqs[self.grid // 2] = 0.0  # Nyquist
        self._wavenumbers = 2j * np.pi * freqs

    def derivative(self, orders: Sequence[int]) -> np.ndarray:
        """Partial derivative with the given order along each axis"""
        if len(orders) != self.n:
            raise DimensionMismatchError(f"{len(orders)} derivative orders for a {self.n}-dimensional field")
        symbol = np.ones(self.spectrum.shape, dtype=complex)
        for axis, order in enumerate(orders):
            shape = [1] * self.n
            shape[axis] = self.grid
            symbol = symbol * (self._wavenumbers ** order).reshape(shape)
        return np.real(np.fft.ifftn(self.spectrum * symbol))

    def axis_derivative(self, order: int, axis: int = 0) -> np.ndarray:
        orders = [0] * self.n
        orders[axis] = order
        return self.derivative(orders)

    def gradient_norm(self, k: int) -> np.ndarray:
        """Pointwise |∇^k u|, summing over all ordered index tuples"""
        if k == 0:
            return np.abs(self.values)
        if self.n == 1:
            return np.abs(self.derivative([k]))
        total = np.zeros_like(self.values)
        for a in range(k + 1):
            total += comb(k, a, exact=True) * self.derivative([a, k - a]) ** 2
        return np.sqrt(total)

    def __str__(self) -> str:
        return f"PeriodicField(n={self.n}, grid={self.grid}, band_limit={self.band_limit})"


def grid_points(n: int, grid: int) -> List[np.ndarray]:
    axis = np.arange(grid) / grid
    return list(np.meshgrid(*([axis] * n), indexing="ij"))


def from_function(fn: Callable[..., np.ndarray], n: int, grid: int) -> PeriodicField:
    return PeriodicField(fn(*grid_points(n, grid)))


def random_coefficients(seed: int, n: int, band_limit: int, decay: float = 1.0) -> np.ndarray:
    """Hermitian Fourier coefficients c_k, k in [-L, L]^n, decaying like (1+|k|²)^-decay"""
    rng = np.random.default_rng(seed)
    size = 2 * band_limit + 1
    shape = (size,) * n
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    ks = np.meshgrid(*([np.arange(-band_limit, band_limit + 1)] * n), indexing="ij")
    c = c * (1.0 + sum(k ** 2 for k in ks)) ** -decay
    flipped = np.conj(c[(slice(None, None, -1),) * n])
    return 0.5 * (c + flipped)


def random_field(seed: int, n: int, grid: int, band_limit: Optional[int] = None,
                 decay: float = 1.0) -> PeriodicField:
    """Band-limited field Σ c_k e^{2πi k·x} sampled on a grid of the given size"""
    band_limit = settings.estimates.band_limit if band_limit is None else band_limit
    if grid < 2 * band_limit + 2:
        raise ValueError(f"grid {grid} cannot resolve band limit {band_limit}")
    coeffs = random_coefficients(seed, n, band_limit, decay)
    spectrum = np.zeros((grid,) * n, dtype=complex)
    index = np.arange(-band_limit, band_limit + 1) % grid
    spectrum[np.ix_(*([index] * n))] = coeffs
    values = np.real(np.fft.ifftn(spectrum)) * grid ** n
    return PeriodicField(values, band_limit)


def interpolation_gamma(k: int, m: int, alpha: float, beta: float) -> float:
    """γ_k = (1 - k/m)α + (k/m)β"""
    return (1.0 - k / m) * alpha + (k / m) * beta


def _check_interpolation_exponents(k: int, m: int, alpha: float, beta: float) -> None:
    if m < 1 or not 0 <= k <= m:
        raise ExponentRegimeError(f"need 0 <= k <= m and m >= 1, got k={k}, m={m}")
    if not (0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0) or (alpha == 0.0 and beta == 0.0):
        raise ExponentRegimeError(f"alpha, beta must lie in [0, 1], not both zero; got {alpha}, {beta}")


def interpolation_ratio(field: PeriodicField, k: int, m: int, alpha: float, beta: float) -> float:
    """‖∇^k u‖_{1/γ_k} / (‖u‖_{1/α}^{1-k/m} ‖∇^m u‖_{1/β}^{k/m})"""
    _check_interpolation_exponents(k, m, alpha, beta)
    base = norm(field.values, alpha)
    if base == 0.0:
        raise DegenerateNormError("interpolation ratio of the zero field")
    lhs = norm(field.gradient_norm(k), interpolation_gamma(k, m, alpha, beta))
    if lhs == 0.0:
        return 0.0
    top = norm(field.gradient_norm(m), beta)
    rhs = base ** (1.0 - k / m) * top ** (k / m)
    if rhs == 0.0:
        raise DegenerateNormError(f"right-hand side vanishes for k={k}, m={m}")
    return lhs / rhs


def hamilton_sequence_check(f: Sequence[float], C: float) -> bool:
    """f(k) ≤ C^{k(m-k)} f(0)^{1-k/m} f(m)^{k/m} given f(k) ≤ C f(k-1)^{½} f(k+1)^{½}

    Works in logarithms. Raises HypothesisViolationError when the
    log-convexity hypothesis fails.
    """
    f = np.asarray(f, dtype=float)
    if f.ndim != 1 or f.size < 2:
        raise ValueError("need a sequence f(0), ..., f(m) with m >= 1")
    if not np.all(f > 0) or not C > 0:
        raise ValueError("sequence and constant must be positive")
    logs = np.log(f)
    log_c = float(np.log(C))
    m = f.size - 1
    scale = 1.0 + float(np.max(np.abs(logs))) + abs(log_c)
    tol = _EXPONENT_TOL * scale

    for k in range(1, m):
        bound = log_c + 0.5 * (logs[k - 1] + logs[k + 1])
        if logs[k] > bound + tol:
            raise HypothesisViolationError(
                f"f({k}) exceeds C·f({k - 1})^(1/2)·f({k + 1})^(1/2) by {logs[k] - bound:.3e} in log")

    for k in range(m + 1):
        bound = k * (m - k) * log_c + (1 - k / m) * logs[0] + (k / m) * logs[m]
        if logs[k] > bound + tol * (1 + k * (m - k)):
            logger.debug(f"Hamilton conclusion fails at k={k}: {logs[k]:.6g} > {bound:.6g}")
            return False
    return True


def sobolev_alpha(m: float, p: float, q: float, n: int) -> float:
    """α = (1/m - 1/p)/(1/m - 1/q + 1/n), with 1/∞ = 0"""
    inv = lambda x: 0.0 if np.isinf(x) else 1.0 / x
    return (inv(m) - inv(p)) / (inv(m) - inv(q) + 1.0 / n)


def _check_sobolev_regime(m: float, p: float, q: float, n: int) -> float:
    if q < 2:
        raise ExponentRegimeError(f"need q >= 2, got {q}")
    if not 2 <= m <= p:
        raise ExponentRegimeError(f"need 2 <= m <= p, got m={m}, p={p}")
    if q < n and p > n * q / (n - q):
        raise ExponentRegimeError(f"q < n requires p <= nq/(n-q) = {n * q / (n - q)}, got {p}")
    if q == n and np.isinf(p):
        raise ExponentRegimeError("q = n requires a finite p")
    alpha = sobolev_alpha(m, p, q, n)
    if not -_EXPONENT_TOL <= alpha <= 1 + _EXPONENT_TOL:
        raise ExponentRegimeError(f"interpolation exponent {alpha} lies outside [0, 1]")
    return min(max(alpha, 0.0), 1.0)


def sobolev_chain_ratio(field: PeriodicField, p: float, q: float, m_exp: float,
                        A: float, B: float) -> float:
    """‖u‖_p / (‖u‖_m^{1-α} (A‖∇u‖_q + B‖u‖_q)^α)"""
    alpha = _check_sobolev_regime(m_exp, p, q, field.n)
    lhs = lp_norm(field.values, p)
    if lhs == 0.0:
        raise DegenerateNormError("Sobolev ratio of the zero field")
    grad_q = lp_norm(field.gradient_norm(1), q)
    rhs = lp_norm(field.values, m_exp) ** (1 - alpha) * (A * grad_q + B * lp_norm(field.values, q)) ** alpha
    return lhs / rhs


def sobolev_norm(field: PeriodicField, k: int, p: float, A: float, B: float) -> float:
    """‖T‖_{H_k^p(A)} = A^k‖∇^k T‖_p + B^k‖T‖_p"""
    return A ** k * lp_norm(field.gradient_norm(k), p) + B ** k * lp_norm(field.values, p)


def sobolev_infty_exponents(n: int) -> Tuple[float, float, float]:
    """Exponents of ‖T‖₂, ‖T‖_{H_1^2} and ‖T‖_{H_k^2} in the sup-norm bound, k = ⌊n/2⌋ + 1

    Odd n = 2k - 1 gives 1/(n+1), 0 and n/(n+1). Even n = 2k - 2 passes through
    H_2^n and gives 1/(n+1), 1/(n+1) and (n-1)/(n+1); the general
    (n-2k+1)/(n+1) would be negative there. The exponents always sum to one.
    """
    if n < 1:
        raise ValueError(f"dimension must be positive, got {n}")
    if n % 2:
        return 1.0 / (n + 1), 0.0, n / (n + 1)
    return 1.0 / (n + 1), 1.0 / (n + 1), (n - 1) / (n + 1)


def sobolev_infty_ratio(field: PeriodicField, A: float, B: float, dim: Optional[int] = None) -> float:
    """‖T‖_∞ / (‖T‖₂^a ‖T‖_{H_1^2}^b ‖T‖_{H_k^2}^c) with (a, b, c) from sobolev_infty_exponents"""
    n = field.n if dim is None else dim
    k = n // 2 + 1
    a, b, c = sobolev_infty_exponents(n)
    lhs = lp_norm(field.values, np.inf)
    if lhs == 0.0:
        raise DegenerateNormError("sup-norm ratio of the zero field")
    rhs = (lp_norm(field.values, 2) ** a
           * sobolev_norm(field, 1, 2, A, B) ** b
           * sobolev_norm(field, k, 2, A, B) ** c)
    return lhs / rhs


def defining_exponent(n: int) -> float:
    """2n/(n-2) for n >= 3; the sup norm on the low-dimensional grids"""
    return 2.0 * n / (n - 2) if n >= 3 else np.inf


def calibrate_sobolev_b(fields: Sequence[PeriodicField], A: float, p: float) -> float:
    """Smallest B ≥ 1 with ‖u‖_p ≤ A‖∇u‖₂ + B‖u‖₂ over the corpus"""
    b = 1.0
    for field in fields:
        l2 = lp_norm(field.values, 2)
        if l2 == 0.0:
            continue
        needed = (lp_norm(field.values, p) - A * lp_norm(field.gradient_norm(1), 2)) / l2
        b = max(b, needed)
    return float(b)


def corollary_exponents(k: int) -> List[Dict[str, float]]:
    """Parameter choices giving ‖T‖_{k+4} and ‖∇^{k+2}T‖₂ for the cubic and quartic terms"""
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    m = k + 2
    return [
        {"j": 3, "k": 2 * k + 2, "m": m, "alpha": 1.0 / (k + 4), "beta": 0.5},
        {"j": 4, "k": 2 * k, "m": m, "alpha": 1.0 / (k + 4), "beta": 0.5},
    ]


def _product_exponent_check(j: int, k: int, m: int, alpha: float, beta: float) -> None:
    if j < 2 or k < 1:
        raise ExponentRegimeError(f"need j >= 2 and k >= 1, got j={j}, k={k}")
    if m < (k + 1) // 2 or m < 1:
        raise ExponentRegimeError(f"need m >= [(k+1)/2] = {(k + 1) // 2}, got {m}")
    if not (0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0):
        raise ExponentRegimeError(f"alpha, beta must lie in [0, 1]; got {alpha}, {beta}")
    total = (j - k / m) * alpha + (k / m) * beta
    if abs(total - 1.0) > _EXPONENT_TOL:
        raise ExponentRegimeError(f"(j - k/m)α + (k/m)β = {total}, expected 1")


def pjk_ratio(field: PeriodicField, orders: Sequence[int], m: int, alpha: float, beta: float) -> float:
    """|∫ Π_i ∂^{k_i} u| / (‖u‖_{1/α}^{j-k/m} ‖∇^m u‖_{1/β}^{k/m})

    The contraction is the product of derivatives along the first axis; j is
    the number of factors and k the total derivative count.
    """
    j, k = len(orders), int(sum(orders))
    _product_exponent_check(j, k, m, alpha, beta)
    product = np.ones_like(field.values)
    for order in orders:
        product = product * field.axis_derivative(order)
    lhs = abs(float(np.mean(product)))
    base = norm(field.values, alpha)
    top = norm(field.gradient_norm(m), beta)
    rhs = base ** (j - k / m) * top ** (k / m)
    if rhs == 0.0:
        if lhs == 0.0:
            return 0.0
        raise DegenerateNormError("right-hand side of the product bound vanishes")
    return lhs / rhs


def ibp_residual(field: PeriodicField, orders: Sequence[int]) -> float:
    """|∫ ∂^{k₁}u·P + ∫ ∂^{k₁-1}u·∂P| with P the product of the remaining factors"""
    if len(orders) < 2 or orders[0] < 1:
        raise ValueError("need at least two factors and a differentiated first factor")
    rest = np.ones_like(field.values)
    for order in orders[1:]:
        rest = rest * field.axis_derivative(order)
    moved = PeriodicField(rest, spectral_tol=0.0).axis_derivative(1)
    first = np.mean(field.axis_derivative(orders[0]) * rest)
    second = np.mean(field.axis_derivative(orders[0] - 1) * moved)
    scale = 1.0 + abs(first) + abs(second)
    return float(abs(first + second) / scale)


INEQUALITIES = ("interpolation", "sobolev", "sobolev_infty", "pjk")


class CorpusResult:
    """Per-seed ratios of one inequality on one grid"""

    def __init__(self, inequality: str, grid: int, n: int, params: Dict[str, Any],
                 samples: List[Tuple[int, float]]):
        self.inequality = inequality
        self.grid = grid
        self.n = n
        self.params = params
        self.samples = sorted(samples)

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r for _, r in self.samples])

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios)) if self.samples else 0.0

    def write_csv(self, stream: IO[str]) -> None:
        writer = csv.writer(stream, lineterminator="\r\n")
        writer.writerow(["inequality", "grid", "seed", "ratio"])
        for seed, ratio in self.samples:
            writer.writerow([self.inequality, self.grid, seed, repr(float(ratio))])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "inequality": self.inequality,
            "grid": self.grid,
            "n": self.n,
            "params": self.params,
            "count": len(self.samples),
            "max_ratio": self.max_ratio,
        }


def run_corpus(inequality: str, grid: int, count: Optional[int] = None, seed: Optional[int] = None,
               n: int = 1, band_limit: Optional[int] = None, max_workers: int = 4,
               progress: Optional[Callable[[], None]] = None, **params: Any) -> CorpusResult:
    """Evaluate one inequality over seeded random fields seed, seed+1, ...

    interpolation: k, m, alpha, beta. sobolev: p, q, m_exp, A (B calibrated
    on the corpus unless given). sobolev_infty: A, B. pjk: orders, m, alpha, beta.
    """
    if inequality not in INEQUALITIES:
        raise ValueError(f"Unknown inequality: {inequality}")
    count = settings.estimates.corpus_size if count is None else count
    seed = settings.estimates.seed if seed is None else seed
    seeds = list(range(seed, seed + count))
    fields = [random_field(s, n, grid, band_limit) for s in seeds]
    params = dict(params)

    if inequality == "interpolation":
        p = {"k": 1, "m": 2, "alpha": 0.5, "beta": 0.5, **params}
        evaluate = lambda f: interpolation_ratio(f, p["k"], p["m"], p["alpha"], p["beta"])
    elif inequality == "sobolev":
        p = {"p": 4.0, "q": 2.0, "m_exp": 2.0, "A": 1.0, **params}
        if p.get("B") is None:
            p["B"] = calibrate_sobolev_b(fields, p["A"], p["p"])
        evaluate = lambda f: sobolev_chain_ratio(f, p["p"], p["q"], p["m_exp"], p["A"], p["B"])
    elif inequality == "sobolev_infty":
        p = {"A": 1.0, **params}
        if p.get("B") is None:
            p["B"] = calibrate_sobolev_b(fields, p["A"], defining_exponent(n))
        evaluate = lambda f: sobolev_infty_ratio(f, p["A"], p["B"])
    else:
        p = {"orders": [1, 1, 0], "m": 2, "alpha": 1.0 / 3.0, "beta": 1.0 / 3.0, **params}
        evaluate = lambda f: pjk_ratio(f, p["orders"], p["m"], p["alpha"], p["beta"])

    def run(item):
        s, field = item
        ratio = evaluate(field)
        if progress is not None:
            progress()
        return s, ratio

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        samples = list(pool.map(run, zip(seeds, fields)))
    result = CorpusResult(inequality, grid, n, p, samples)
    logger.info(f"{inequality} corpus on grid {grid}: {count} fields, max ratio {result.max_ratio:.6g}")
    return result


def refinement_study(inequality: str, grids: Optional[Sequence[int]] = None,
                     **kwargs: Any) -> Dict[str, Any]:
    """Corpus maxima across grids; stable when max/min ≤ 2"""
    grids = list(settings.estimates.grids if grids is None else grids)
    results = [run_corpus(inequality, grid, **kwargs) for grid in grids]
    maxima = [r.max_ratio for r in results]
    positive = [x for x in maxima if x > 0]
    spread = max(positive) / min(positive) if positive else 1.0
    return {
        "inequality": inequality,
        "grids": grids,
        "maxima": maxima,
        "spread": spread,
        "stable": bool(spread <= 2.0),
        "results": results,
    }


def hamilton_constant(f: Sequence[float]) -> float:
    """Smallest C with f(k) ≤ C f(k-1)^{½} f(k+1)^{½} at every interior k"""
    logs = np.log(np.asarray(f, dtype=float))
    if logs.size < 3:
        return 1.0
    excess = logs[1:-1] - 0.5 * (logs[:-2] + logs[2:])
    return float(np.exp(np.max(excess)))


def hamilton_corpus(count: int, seed: int = 0, max_length: int = 9) -> List[Tuple[int, float, bool]]:
    """(seed, C, conclusion) for random positive sequences paired with their smallest admissible C"""
    out = []
    for s in range(seed, seed + count):
        rng = np.random.default_rng(s)
        length = int(rng.integers(3, max_length + 1))
        f = np.exp(rng.normal(0.0, 3.0, size=length))
        c = hamilton_constant(f)
        out.append((s, c, hamilton_sequence_check(f, c)))
    return out
