"""Gaussian-process regression over planar positions with RSSI targets.

The model is a squared-exponential GP with a constant mean. Training
factorizes the regularized kernel matrix once (Cholesky) and caches the
residual coefficients, so batched posterior queries cost O(n*M) for
means and O(n*M^2) for variances against M training points.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist

LOG_2PI = math.log(2.0 * math.pi)

# Optimizer box constraints (natural units).
SIGNAL_VARIANCE_BOUNDS = (1e-4, 1e4)   # sigma_f^2, dBm^2
LENGTH_SCALE_BOUNDS = (0.01, 100.0)    # l, m
NOISE_VARIANCE_BOUNDS = (1e-6, 1e3)    # sigma_n^2, dBm^2

# Diagonal conditioning added on top of the noise variance before the
# cached factorization, as a fraction of the signal variance. A single
# retry scales it by 10 if the first factorization fails.
JITTER_FRACTION = 1e-8
JITTER_RETRY_FACTOR = 10.0

_LOG_LO = np.log([SIGNAL_VARIANCE_BOUNDS[0], LENGTH_SCALE_BOUNDS[0], NOISE_VARIANCE_BOUNDS[0]])
_LOG_HI = np.log([SIGNAL_VARIANCE_BOUNDS[1], LENGTH_SCALE_BOUNDS[1], NOISE_VARIANCE_BOUNDS[1]])


class FactorizationFailure(RuntimeError):
    """The regularized kernel matrix is not numerically positive definite."""


class DegenerateData(ValueError):
    """Training samples carry no usable spatial information."""


class RssiRangeWarning(UserWarning):
    """RSSI target outside the typical [-100, 0] dBm range."""


@dataclass(frozen=True)
class RssiSample:
    """One RSSI measurement (dBm) taken at a planar position (m)."""

    position: tuple[float, float]
    rssi: float

    def __post_init__(self):
        x, y = self.position
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(self.rssi)):
            raise ValueError("sample position and RSSI must be finite")
        object.__setattr__(self, "position", (float(x), float(y)))
        object.__setattr__(self, "rssi", float(self.rssi))
        if not -100.0 <= self.rssi <= 0.0:
            warnings.warn(
                f"RSSI {self.rssi:.1f} dBm outside the typical [-100, 0] dBm range",
                RssiRangeWarning,
                stacklevel=2,
            )


@dataclass(frozen=True)
class GpHyperParams:
    """Kernel hyperparameters plus the constant prior mean.

    Attributes
    ----------
    signal_variance : float
        sigma_f^2 > 0, dBm^2.
    length_scale : float
        l > 0, meters.
    noise_variance : float
        sigma_n^2 >= 0, dBm^2.
    mean : float
        Constant prior mean, dBm.
    """

    signal_variance: float
    length_scale: float
    noise_variance: float
    mean: float = 0.0

    def __post_init__(self):
        vals = (self.signal_variance, self.length_scale, self.noise_variance, self.mean)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("hyperparameters must be finite")
        if self.signal_variance <= 0.0:
            raise ValueError("signal_variance must be > 0")
        if self.length_scale <= 0.0:
            raise ValueError("length_scale must be > 0")
        if self.noise_variance < 0.0:
            raise ValueError("noise_variance must be >= 0")


@dataclass(frozen=True)
class FitBudget:
    """Effort limits for :func:`fit`.

    ``restarts`` counts optimizer starts (heuristic start plus seeded
    random ones, plus an optional warm start). ``max_training_points``
    caps the training set by uniform random subsampling.
    """

    restarts: int = 5
    max_training_points: int = 100
    seed: int = 0
    scan_points: int = 21
    max_sweeps: int = 6
    warm_start: GpHyperParams | None = None


@dataclass(frozen=True, eq=False)
class TrainedGp:
    """Factorized posterior state of a fitted GP.

    ``chol_lower`` is the lower Cholesky factor of
    ``K + (noise_variance + jitter) I`` and ``residual_coeffs`` the
    corresponding solve against the centered targets. Arrays are
    read-only; instances are immutable and safe to share across
    concurrent readers.
    """

    inputs: np.ndarray          # (M, 2) training positions, m
    targets: np.ndarray         # (M,) training RSSI, dBm
    hyperparams: GpHyperParams
    jitter: float               # extra diagonal actually factorized, dBm^2
    chol_lower: np.ndarray      # (M, M) lower triangular
    residual_coeffs: np.ndarray  # (M,) alpha
    log_marginal: float

    def __post_init__(self):
        for name in ("inputs", "targets", "chol_lower", "residual_coeffs"):
            arr = getattr(self, name)
            arr.flags.writeable = False

    @property
    def num_points(self) -> int:
        return self.inputs.shape[0]


def se_kernel(x, x_prime, hp: GpHyperParams) -> float:
    """Squared-exponential covariance between two planar positions.

    Returns ``sigma_f^2 * exp(-||x - x'||^2 / (2 l^2))``; symmetric in
    its arguments and bounded by ``(0, sigma_f^2]``.
    """
    dx = float(x[0]) - float(x_prime[0])
    dy = float(x[1]) - float(x_prime[1])
    return hp.signal_variance * math.exp(-(dx * dx + dy * dy) / (2.0 * hp.length_scale**2))


def _as_training_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    if len(samples) < 2:
        raise DegenerateData("need at least 2 training samples")
    x = np.array([s.position for s in samples], dtype=float)
    y = np.array([s.rssi for s in samples], dtype=float)
    return x, y

def _kernel_matrix(sq_dists: np.ndarray, hp: GpHyperParams) -> np.ndarray:
    return hp.signal_variance * np.exp(-0.5 * sq_dists / hp.length_scale**2)


def _cross_kernel(queries: np.ndarray, model: TrainedGp) -> np.ndarray:
    hp = model.hyperparams
    d2 = cdist(queries, model.inputs, "sqeuclidean")
    return hp.signal_variance * np.exp(-0.5 * d2 / hp.length_scale**2)


def _lml_from_dists(sq_dists: np.ndarray, residuals: np.ndarray, hp: GpHyperParams) -> float:
    k = _kernel_matrix(sq_dists, hp)
    m = residuals.shape[0]
    k.flat[:: m + 1] += hp.noise_variance
    try:
        lower = cholesky(k, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise FactorizationFailure(
            "kernel matrix is not positive definite; jitter or reject these hyperparameters"
        ) from exc
    alpha = cho_solve((lower, True), residuals, check_finite=False)
    return float(
        -0.5 * float(residuals @ alpha)
        - float(np.log(np.diag(lower)).sum())
        - 0.5 * m * LOG_2PI
    )


def log_marginal_likelihood(samples, hp: GpHyperParams) -> float:
    """Exact log marginal likelihood of the targets under ``hp``.

    Evaluates ``-1/2 (y-mu)^T (K+sigma_n^2 I)^{-1} (y-mu)
    - 1/2 log det(K+sigma_n^2 I) - (M/2) log 2 pi`` with no added
    jitter; raises :class:`FactorizationFailure` when the matrix is not
    numerically positive definite so the caller can jitter or reject.
    """
    x, y = _as_training_arrays(samples)
    d2 = cdist(x, x, "sqeuclidean")
    return _lml_from_dists(d2, y - hp.mean, hp)


def _factorize(sq_dists: np.ndarray, hp: GpHyperParams) -> tuple[np.ndarray, float]:
    jitter = JITTER_FRACTION * hp.signal_variance
    for attempt in range(2):
        k = _kernel_matrix(sq_dists, hp)
        k.flat[:: k.shape[0] + 1] += hp.noise_variance + jitter
        try:
            return cholesky(k, lower=True, check_finite=False), jitter
        except np.linalg.LinAlgError:
            if attempt == 0:
                jitter *= JITTER_RETRY_FACTOR
    raise FactorizationFailure("factorization failed even with retried jitter")


def _train_arrays(x: np.ndarray, y: np.ndarray, hp: GpHyperParams) -> TrainedGp:
    d2 = cdist(x, x, "sqeuclidean")
    lower, jitter = _factorize(d2, hp)
    residuals = y - hp.mean
    alpha = cho_solve((lower, True), residuals, check_finite=False)
    lml = float(
        -0.5 * float(residuals @ alpha)
        - float(np.log(np.diag(lower)).sum())
        - 0.5 * len(y) * LOG_2PI
    )
    return TrainedGp(
        inputs=x.copy(),
        targets=y.copy(),
        hyperparams=hp,
        jitter=jitter,
        chol_lower=lower,
        residual_coeffs=np.asarray(alpha, dtype=float),
        log_marginal=lml,
    )


def fit_with_hyperparams(samples, hp: GpHyperParams) -> TrainedGp:
    """Factorize the posterior for fixed hyperparameters (no optimization)."""
    x, y = _as_training_arrays(samples)
    if np.unique(x, axis=0).shape[0] < 2:
        raise DegenerateData("all training positions coincide")
    return _train_arrays(x, y, hp)


def _heuristic_start(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    spread = float(np.linalg.norm(x.max(axis=0) - x.min(axis=0)))
    var = float(np.var(y))
    sig2 = np.clip(max(var, 1e-3), *SIGNAL_VARIANCE_BOUNDS)
    ell = np.clip(max(0.3 * spread, 0.05), *LENGTH_SCALE_BOUNDS)
    noise2 = np.clip(max(0.1 * var, 1e-3), *NOISE_VARIANCE_BOUNDS)
    return np.log([sig2, ell, noise2])


def _golden_max(f, a: float, b: float, iters: int = 24) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _coordinate_ascent(sq_dists, residuals, theta0, budget: FitBudget):
    def value(theta):
        hp = GpHyperParams(math.exp(theta[0]), math.exp(theta[1]), math.exp(theta[2]))
        try:
            return _lml_from_dists(sq_dists, residuals, hp)
        except FactorizationFailure:
            return -math.inf

    theta = np.clip(np.asarray(theta0, dtype=float), _LOG_LO, _LOG_HI)
    best = value(theta)
    for _ in range(budget.max_sweeps):
        sweep_start = best
        for c in range(3):
            grid = np.linspace(_LOG_LO[c], _LOG_HI[c], budget.scan_points)
            spacing = grid[1] - grid[0]

            def along(t, _c=c):
                cand = theta.copy()
                cand[_c] = t
                return value(cand)

            scan_vals = [along(g) for g in grid]
            gi = int(np.argmax(scan_vals))
            center = grid[gi] if scan_vals[gi] > best else theta[c]
            lo = max(_LOG_LO[c], center - spacing)
            hi = min(_LOG_HI[c], center + spacing)
            t_star, v_star = _golden_max(along, lo, hi)
            if v_star > best:
                theta[c] = t_star
                best = v_star
        if not math.isfinite(best) or best - sweep_start < 1e-7:
            break
    return theta, best


def fit(samples, budget: FitBudget = FitBudget()) -> TrainedGp:
    """Fit hyperparameters by maximizing the log marginal likelihood.

    The constant mean is pinned to the sample mean of the targets; the
    remaining three hyperparameters are optimized by multi-start
    coordinate ascent in log space (coarse scan plus golden-section
    refinement per coordinate) within the module bounds. When the input
    exceeds ``budget.max_training_points`` a seeded uniform random
    subset of that size is used.

    Raises
    ------
    DegenerateData
        If fewer than 2 samples or all positions coincide.
    """
    x, y = _as_training_arrays(samples)
    if np.unique(x, axis=0).shape[0] < 2:
        raise DegenerateData("all training positions coincide")

    rng = np.random.default_rng(budget.seed)
    if x.shape[0] > budget.max_training_points:
        idx = np.sort(rng.choice(x.shape[0], size=budget.max_training_points, replace=False))
        x, y = x[idx], y[idx]
        if np.unique(x, axis=0).shape[0] < 2:
            raise DegenerateData("sampled training subset has coinciding positions")

    mu = float(y.mean())
    residuals = y - mu
    d2 = cdist(x, x, "sqeuclidean")

    starts: list[np.ndarray] = []
    if budget.warm_start is not None:
        w = budget.warm_start
        starts.append(np.log([w.signal_variance, w.length_scale, w.noise_variance]))
    starts.append(_heuristic_start(x, y))
    while len(starts) < max(budget.restarts, len(starts)):
        starts.append(rng.uniform(_LOG_LO, _LOG_HI))

    best_theta, best_val = None, -math.inf
    for theta0 in starts:
        theta, val = _coordinate_ascent(d2, residuals, theta0, budget)
        if val > best_val:
            best_theta, best_val = theta, val
    if best_theta is None or not math.isfinite(best_val):
        raise FactorizationFailure("no admissible hyperparameters found")

    hp = GpHyperParams(
        signal_variance=math.exp(best_theta[0]),
        length_scale=math.exp(best_theta[1]),
        noise_variance=math.exp(best_theta[2]),
        mean=mu,
    )
    return _train_arrays(x, y, hp)


def predict(model: TrainedGp, queries) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at each query point.

    Means cost O(n*M), variances O(n*M^2); both reuse the cached
    factorization. Variances are clamped at zero against roundoff and
    never exceed ``signal_variance``.
    """
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    kq = _cross_kernel(q, model)
    mean = model.hyperparams.mean + kq @ model.residual_coeffs
    v = solve_triangular(model.chol_lower, kq.T, lower=True, check_finite=False)
    var = model.hyperparams.signal_variance - np.einsum("ij,ij->j", v, v)
    return mean, np.maximum(var, 0.0)


def predict_mean(model: TrainedGp, queries) -> np.ndarray:
    """Posterior mean only (O(n*M); the fast path for grid searches)."""
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    kq = _cross_kernel(q, model)
    return model.hyperparams.mean + kq @ model.residual_coeffs


def predict_variance(model: TrainedGp, queries) -> np.ndarray:
    """Posterior variance only, clamped at zero against roundoff."""
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    kq = _cross_kernel(q, model)
    v = solve_triangular(model.chol_lower, kq.T, lower=True, check_finite=False)
    var = model.hyperparams.signal_variance - np.einsum("ij,ij->j", v, v)
    return np.maximum(var, 0.0)
