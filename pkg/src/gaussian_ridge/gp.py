"""Gaussian process regression on reduced coordinates.

Squared-exponential kernel with one correlation length per reduced
coordinate, zero prior mean, and maximum-marginal-likelihood hyperparameters.
All hyperparameters are stored on a log scale.
"""

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import DimensionError, IllConditionedKernelError, NumericalError
from .stiefel import CgOptions, euclidean_cg_minimize

NOISE_FLOOR = 1e-12
JITTER_START = 1e-10
JITTER_MAX = 1e-4
VARIANCE_ROUNDOFF = 1e-10
# largest move of the log hyperparameters in one line-search trial
MAX_LOG_STEP = 2.0


@dataclass(frozen=True)
class GpHyperparameters:
    """Log signal variance, log noise variance and log correlation lengths."""

    log_signal_variance: float
    log_noise_variance: float
    log_correlation_lengths: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        lengths = np.atleast_1d(np.asarray(self.log_correlation_lengths, dtype=float)).copy()
        lengths.setflags(write=False)
        object.__setattr__(self, "log_correlation_lengths", lengths)
        object.__setattr__(self, "log_signal_variance", float(self.log_signal_variance))
        object.__setattr__(self, "log_noise_variance", float(self.log_noise_variance))
        if lengths.ndim != 1 or lengths.size < 1:
            raise DimensionError("need at least one correlation length")
        if not (np.isfinite(self.log_signal_variance) and np.isfinite(self.log_noise_variance)
                and np.all(np.isfinite(lengths))):
            raise ValueError("hyperparameters must be finite")

    @classmethod
    def default(cls, m):
        """All log-hyperparameters zero: unit variances and unit lengths."""
        return cls(0.0, 0.0, np.zeros(m))

    @classmethod
    def from_values(cls, signal_variance, noise_variance, correlation_lengths):
        """Build from raw (positive) values; the noise variance is floored at ``NOISE_FLOOR``."""
        return cls(
            np.log(signal_variance),
            np.log(max(noise_variance, NOISE_FLOOR)),
            np.log(np.atleast_1d(np.asarray(correlation_lengths, dtype=float))),
        )

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float)
        return cls(v[0], v[1], v[2:])

    def to_vector(self):
        return np.concatenate(([self.log_signal_variance, self.log_noise_variance], self.log_correlation_lengths))

    @property
    def m(self):
        return self.log_correlation_lengths.size

    @property
    def signal_variance(self):
        return float(np.exp(self.log_signal_variance))

    @property
    def noise_variance(self):
        return float(np.exp(self.log_noise_variance))

    @property
    def correlation_lengths(self):
        return np.exp(self.log_correlation_lengths)

    def to_dict(self):
        return {
            "log_signal_variance": self.log_signal_variance,
            "log_noise_variance": self.log_noise_variance,
            "log_correlation_lengths": self.log_correlation_lengths.tolist(),
        }


@dataclass(frozen=True)
class TrainedGp:
    reduced_inputs: np.ndarray
    outputs: np.ndarray
    hyperparameters: GpHyperparameters
    coefficients: np.ndarray
    cholesky: np.ndarray
    jitter: float = 0.0

    @property
    def m(self):
        return self.reduced_inputs.shape[1]

    @property
    def n(self):
        return self.reduced_inputs.shape[0]


def _points(U, m=None):
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[None, :] if m is None or U.size == m else U[:, None]
    if U.ndim != 2:
        raise DimensionError(f"expected a 2-D array of points, got shape {U.shape}")
    if m is not None and U.shape[1] != m:
        raise DimensionError(f"points have {U.shape[1]} coordinates, hyperparameters expect {m}")
    return U


def _scaled_sq_differences(Ua, Ub, theta):
    """Per-coordinate squared differences ((u_a - u_b) / l)^2, one (Na, Nb) array each."""
    inv_l = np.exp(-theta.log_correlation_lengths)
    out = []
    for k in range(Ua.shape[1]):
        diff = np.subtract.outer(Ua[:, k] * inv_l[k], Ub[:, k] * inv_l[k])
        out.append(diff * diff)
    return out


def kernel_eval(u_i, u_j, theta):
    """Squared-exponential covariance between two reduced points."""
    u_i = np.atleast_1d(np.asarray(u_i, dtype=float))
    u_j = np.atleast_1d(np.asarray(u_j, dtype=float))
    if u_i.shape != (theta.m,) or u_j.shape != (theta.m,):
        raise DimensionError(f"points must have length {theta.m}")
    z = (u_i - u_j) / theta.correlation_lengths
    return theta.signal_variance * float(np.exp(-0.5 * np.dot(z, z)))


def kernel_matrix(U_a, U_b, theta):
    """Kernel matrix ``K[i, j] = k(U_a[i], U_b[j])``."""
    U_a = _points(U_a, theta.m)
    U_b = _points(U_b, theta.m)
    return theta.signal_variance * np.exp(-0.5 * sum(_scaled_sq_differences(U_a, U_b, theta)))


def _factorize(K, noise_variance):
    """Cholesky of ``K + noise I``, adding escalating jitter on failure."""
    n = K.shape[0]
    A = K + noise_variance * np.eye(n)
    scale = float(np.mean(np.diag(K))) if n else 1.0
    jitter = 0.0
    levels = [0.0]
    level = JITTER_START
    while level <= JITTER_MAX * (1 + 1e-9):
        levels.append(level * scale)
        level *= 10
    for jitter in levels:
        try:
            L = np.linalg.cholesky(A + jitter * np.eye(n) if jitter else A)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return L, jitter
    raise IllConditionedKernelError(
        f"Cholesky factorization failed up to jitter {jitter:.3e}", jitter=jitter
    )


def train_gp(U, f, theta):
    """Factorize ``K + noise I`` on the training set and solve for the coefficients.

    Parameters
    ----------
    U : ndarray, shape (N, m)
        Reduced training inputs.
    f : ndarray, shape (N,)
        Training outputs.
    theta : GpHyperparameters

    Returns
    -------
    TrainedGp
    """
    U = _points(U, theta.m)
    f = np.asarray(f, dtype=float).ravel()
    if U.shape[0] < 1:
        raise DimensionError("need at least one training point")
    if f.shape[0] != U.shape[0]:
        raise DimensionError(f"{U.shape[0]} inputs but {f.shape[0]} outputs")
    if not (np.all(np.isfinite(U)) and np.all(np.isfinite(f))):
        raise ValueError("training data contain non-finite values")
    K = kernel_matrix(U, U, theta)
    L, jitter = _factorize(K, theta.noise_variance)
    beta = cho_solve((L, True), f)
    return TrainedGp(U.copy(), f.copy(), theta, beta, L, jitter)


def _eval_points(u, gp):
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    return _points(u[None, :] if single else u, gp.m), single


def posterior_mean(u, gp):
    """Posterior mean ``k(u, U) @ beta`` at one point ``(m,)`` or many ``(n, m)``."""
    U, single = _eval_points(u, gp)
    mean = kernel_matrix(U, gp.reduced_inputs, gp.hyperparameters) @ gp.coefficients
    return float(mean[0]) if single else mean


def posterior_variance(u, gp):
    """Posterior variance ``k(u, u) - k(u, U) (K + noise I)^{-1} k(U, u)``.

    Negative values down to ``-1e-10`` (round-off) are clamped to zero; anything
    lower raises :class:`NumericalError`.
    """
    U, single = _eval_points(u, gp)
    Ks = kernel_matrix(U, gp.reduced_inputs, gp.hyperparameters)
    V = solve_triangular(gp.cholesky, Ks.T, lower=True, check_finite=False)
    var = gp.hyperparameters.signal_variance - np.einsum("ij,ij->j", V, V)
    if np.any(var < -VARIANCE_ROUNDOFF):
        raise NumericalError(f"negative posterior variance {var.min():.3e}")
    var = np.maximum(var, 0.0)
    return float(var[0]) if single else var


def posterior_mean_grad_u(u, gp):
    """Gradient of the posterior mean with respect to the reduced coordinates.

    ``-Gamma^{-1} sum_i (u - u_i) k(u, u_i) beta_i`` with ``Gamma = diag(l^2)``.
    Accepts a single point or an ``(n, m)`` batch.
    """
    U, single = _eval_points(u, gp)
    theta = gp.hyperparameters
    w = kernel_matrix(U, gp.reduced_inputs, theta) * gp.coefficients[None, :]
    diff = U * w.sum(axis=1)[:, None] - w @ gp.reduced_inputs
    grad = -diff / theta.correlation_lengths ** 2
    return grad[0] if single else grad


def log_marginal_likelihood(theta, U, f):
    """Log marginal likelihood and its gradient with respect to ``theta.to_vector()``.

    Returns
    -------
    value : float
    grad : ndarray, shape (m + 2,)
        Derivatives with respect to log signal variance, log noise variance
        and each log correlation length.
    """
    gp = train_gp(U, f, theta)
    return _lml_from_gp(gp)


def _lml_from_gp(gp):
    theta = gp.hyperparameters
    U, f, L, alpha = gp.reduced_inputs, gp.outputs, gp.cholesky, gp.coefficients
    n = f.size
    value = -0.5 * f @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * np.log(2 * np.pi)

    K = kernel_matrix(U, U, theta)
    Ainv = cho_solve((L, True), np.eye(n))
    W = np.outer(alpha, alpha) - Ainv  # dL/dA = W / 2
    grad = np.empty(theta.m + 2)
    grad[0] = 0.5 * np.sum(W * K)
    grad[1] = 0.5 * theta.noise_variance * np.trace(W)
    WK = W * K
    for k, sq in enumerate(_scaled_sq_differences(U, U, theta)):
        grad[2 + k] = 0.5 * np.sum(WK * sq)
    return float(value), grad


@dataclass
class HyperparameterFit:
    hyperparameters: GpHyperparameters
    log_likelihood: float
    initial_log_likelihood: float
    iterations: int
    line_search_failed: bool


def optimize_hyperparameters(U, f, theta0=None, max_iterations=200, gradient_tolerance=1e-6,
                             full_output=False):
    """Maximize the log marginal likelihood with Polak-Ribiere conjugate gradients.

    The noise variance is parametrized as ``NOISE_FLOOR + exp(z)`` so it never
    drops below the floor. Trial points where the kernel cannot be factorized
    are rejected by the line search.

    Parameters
    ----------
    U : ndarray, shape (N, m)
    f : ndarray, shape (N,)
    theta0 : GpHyperparameters, optional
        Starting point; defaults to all log-hyperparameters zero.
    max_iterations : int
    gradient_tolerance : float
    full_output : bool
        Also return a :class:`HyperparameterFit` with diagnostics.

    Returns
    -------
    GpHyperparameters, or (GpHyperparameters, HyperparameterFit)
    """
    U = _points(U)
    m = U.shape[1]
    theta0 = theta0 or GpHyperparameters.default(m)
    if theta0.m != m:
        raise DimensionError(f"theta0 has {theta0.m} lengths, data have {m} coordinates")

    def unpack(z):
        noise = NOISE_FLOOR + np.exp(z[1])
        return GpHyperparameters(z[0], np.log(noise), z[2:])

    def pack(theta):
        excess = max(theta.noise_variance - NOISE_FLOOR, NOISE_FLOOR * 1e-6)
        return np.concatenate(([theta.log_signal_variance, np.log(excess)], theta.log_correlation_lengths))

    cache = {}

    def evaluate(z):
        key = z.tobytes()
        if key not in cache:
            cache.clear()
            try:
                if np.any(np.abs(z) > 50):
                    raise IllConditionedKernelError("hyperparameters out of range", jitter=0.0)
                theta = unpack(z)
                value, grad = log_marginal_likelihood(theta, U, f)
                ez = np.exp(z[1])
                grad = grad.copy()
                grad[1] *= ez / (NOISE_FLOOR + ez)
                cache[key] = (-value, -grad)
            except IllConditionedKernelError:
                cache[key] = (np.inf, None)
        return cache[key]

    z0 = pack(theta0)
    start_value = evaluate(z0)[0]
    if not np.isfinite(start_value):
        raise IllConditionedKernelError("kernel cannot be factorized at the initial hyperparameters",
                                        jitter=JITTER_MAX)
    opts = CgOptions(max_iterations=max_iterations, gradient_norm_tolerance=gradient_tolerance,
                     max_step_norm=MAX_LOG_STEP)
    res = euclidean_cg_minimize(lambda z: evaluate(z)[0], lambda z: evaluate(z)[1], z0, opts)
    failed = res.iterations == 0 and res.stop_reason == "line search failed"
    if failed:
        warnings.warn("hyperparameter line search failed at the initial point", RuntimeWarning)
        theta = theta0
        final = -start_value
    else:
        theta = unpack(res.point)
        final = -res.trace[-1][0]
    if not full_output:
        return theta
    return theta, HyperparameterFit(theta, final, -start_value, res.iterations, failed)
