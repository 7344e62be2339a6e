"""Stiefel manifold primitives and a Riemannian conjugate-gradient minimizer.

Points on the manifold are plain ``(d, m)`` arrays with orthonormal columns and
tangent vectors are ``(d, m)`` arrays ``X`` with ``M.T @ X`` skew-symmetric.
Inner products use the canonical metric ``<A, B>_M = tr(A.T (I - M M.T / 2) B)``,
under which ``G - M G.T M`` is the Riemannian gradient of a function whose
Euclidean gradient is ``G``.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import DimensionError, FactorizationError, NumericalError

ORTHONORMALITY_TOL = 1e-10


@dataclass(frozen=True)
class CgOptions:
    """Settings for :func:`riemannian_cg_minimize`.

    ``min_step_norm`` stops the run once an accepted step moves the iterate
    by less than this amount; ``restart_every`` defaults to ``d * m``.
    ``max_step_norm``, when set, caps the length of every trial step.
    """

    max_iterations: int = 500
    gradient_norm_tolerance: float = 1e-6
    initial_step: float = 1.0
    contraction: float = 0.5
    sufficient_decrease: float = 1e-4
    max_backtracks: int = 40
    min_step_norm: float = 1e-10
    restart_every: Optional[int] = None
    max_step_norm: Optional[float] = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        for name in ("gradient_norm_tolerance", "initial_step", "sufficient_decrease", "min_step_norm"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0 < self.contraction < 1:
            raise ValueError("contraction must lie in (0, 1)")
        if not 0 < self.sufficient_decrease < 1:
            raise ValueError("sufficient_decrease must lie in (0, 1)")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be positive")
        if self.max_step_norm is not None and not self.max_step_norm > 0:
            raise ValueError("max_step_norm must be strictly positive")
        if self.restart_every is not None and self.restart_every < 1:
            raise ValueError("restart_every must be positive")


@dataclass
class CgResult:
    point: np.ndarray
    trace: List[Tuple[float, float]]
    iterations: int
    converged: bool
    stop_reason: str


def _as_matrix(M):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise DimensionError(f"expected a 2-D array, got shape {M.shape}")
    return M


def orthonormality_error(M):
    """Max-norm of ``M.T M - I``."""
    M = _as_matrix(M)
    return float(np.max(np.abs(M.T @ M - np.eye(M.shape[1]))))


def check_stiefel(M, tol=ORTHONORMALITY_TOL):
    """Validate that ``M`` is a tall matrix with orthonormal columns and return it as an array."""
    M = _as_matrix(M)
    d, m = M.shape
    if not 1 <= m <= d:
        raise DimensionError(f"need 1 <= m <= d, got d={d}, m={m}")
    err = orthonormality_error(M)
    if err > tol:
        raise DimensionError(f"columns are not orthonormal (max |M^T M - I| = {err:.3e})")
    return M


def _qr_positive(A):
    Q, R = np.linalg.qr(A)
    diag = np.diag(R)
    scale = max(np.max(np.abs(A)), 1.0)
    if np.any(np.abs(diag) <= 1e-13 * scale * max(A.shape)):
        raise FactorizationError("matrix is numerically rank deficient")
    signs = np.where(diag < 0, -1.0, 1.0)
    return Q * signs


def random_orthonormal(d, m, seed=None):
    """Orthonormal ``(d, m)`` matrix from the QR factorization of a standard-normal draw.

    ``seed`` may be an integer or a ``numpy.random.Generator``. The R factor is
    sign-normalized to a positive diagonal so the result is unique per draw.
    """
    d, m = int(d), int(m)
    if not 1 <= m <= d:
        raise DimensionError(f"need 1 <= m <= d, got d={d}, m={m}")
    rng = np.random.default_rng(seed)
    return _qr_positive(rng.standard_normal((d, m)))


def project_to_tangent(M, G):
    """Map a Euclidean gradient ``G`` to the Riemannian gradient ``G - M G^T M`` at ``M``."""
    M = _as_matrix(M)
    G = _as_matrix(G)
    if G.shape != M.shape:
        raise DimensionError(f"shape mismatch: point {M.shape}, matrix {G.shape}")
    return G - M @ (G.T @ M)


def orthogonal_projection(M, V):
    """Orthogonal projection of ``V`` onto the tangent space at ``M``; idempotent."""
    MtV = M.T @ V
    return V - M @ (0.5 * (MtV + MtV.T))


def inner(M, A, B):
    """Canonical-metric inner product of tangent vectors ``A`` and ``B`` at ``M``."""
    return float(np.sum(A * B) - 0.5 * np.sum((M.T @ A) * (M.T @ B)))


def retract(M, xi, t=1.0):
    """QR retraction: the sign-normalized Q factor of ``M + t xi``."""
    M = _as_matrix(M)
    xi = _as_matrix(xi)
    if xi.shape != M.shape:
        raise DimensionError(f"shape mismatch: point {M.shape}, tangent {xi.shape}")
    if t == 0:
        return M.copy()
    return _qr_positive(M + t * xi)


def _nonlinear_cg(objective, gradient, x0, inner_fn, retract_fn, transport_fn, restart_every, opts):
    """Polak-Ribiere+ nonlinear CG with Armijo backtracking on a generic manifold.

    Trial points whose objective is not finite are rejected by the line search.
    A non-finite value or gradient at an accepted point raises NumericalError.
    """
    x = x0
    f = float(objective(x))
    if not np.isfinite(f):
        raise NumericalError("objective is not finite at the starting point", iteration=0)
    g = gradient(x)
    if not np.all(np.isfinite(g)):
        raise NumericalError("gradient is not finite at the starting point", iteration=0)
    gg = inner_fn(x, g, g)
    trace = [(f, float(np.sqrt(max(gg, 0.0))))]
    if np.sqrt(gg) <= opts.gradient_norm_tolerance:
        return CgResult(x, trace, 0, True, "gradient tolerance")

    eta = -g
    since_restart = 0
    prev_step, prev_slope = None, None
    stop_reason = "max iterations"
    converged = False
    it = 0
    for it in range(1, opts.max_iterations + 1):
        slope = inner_fn(x, g, eta)
        steepest = False
        if slope >= 0 or since_restart >= restart_every:
            eta, slope, since_restart, steepest = -g, -gg, 0, True

        while True:
            if prev_step is None:
                t = opts.initial_step
            else:
                t = 2.0 * prev_step * prev_slope / slope
            if opts.max_step_norm is not None:
                t = min(t, opts.max_step_norm / np.sqrt(max(inner_fn(x, eta, eta), 1e-300)))
            accepted = None
            for _ in range(opts.max_backtracks):
                x_try = retract_fn(x, eta, t)
                f_try = float(objective(x_try))
                if np.isfinite(f_try) and f_try <= f + opts.sufficient_decrease * t * slope:
                    accepted = (x_try, f_try)
                    break
                t *= opts.contraction
            if accepted is not None or steepest:
                break
            eta, slope, since_restart, steepest = -g, -gg, 0, True

        if accepted is None:
            stop_reason = "line search failed"
            it -= 1
            break

        x_new, f_new = accepted
        g_new = gradient(x_new)
        if not np.all(np.isfinite(g_new)):
            raise NumericalError(f"gradient is not finite at iteration {it}", iteration=it)
        gg_new = inner_fn(x_new, g_new, g_new)
        step_norm = t * np.sqrt(max(inner_fn(x, eta, eta), 0.0))

        g_old = transport_fn(x_new, g)
        eta_old = transport_fn(x_new, eta)
        beta = max(0.0, inner_fn(x_new, g_new, g_new - g_old) / gg)
        prev_step, prev_slope = t, slope
        x, f, g, gg = x_new, f_new, g_new, gg_new
        eta = -g + beta * eta_old
        since_restart += 1
        trace.append((f, float(np.sqrt(max(gg, 0.0)))))

        if np.sqrt(gg) <= opts.gradient_norm_tolerance:
            stop_reason, converged = "gradient tolerance", True
            break
        if step_norm < opts.min_step_norm:
            stop_reason = "step size below minimum"
            break
    return CgResult(x, trace, it, converged, stop_reason)


def minimize_cg_result(
    objective: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    M0,
    opts: Optional[CgOptions] = None,
) -> CgResult:
    """Like :func:`riemannian_cg_minimize` but returns the full :class:`CgResult`."""
    opts = opts or CgOptions()
    M0 = check_stiefel(M0)
    d, m = M0.shape
    restart_every = opts.restart_every or d * m
    return _nonlinear_cg(
        objective,
        gradient,
        M0,
        inner,
        retract,
        orthogonal_projection,
        restart_every,
        opts,
    )


def riemannian_cg_minimize(objective, gradient, M0, opts=None):
    """Minimize ``objective`` over the Stiefel manifold with Riemannian CG.

    Parameters
    ----------
    objective : callable
        Maps a ``(d, m)`` orthonormal matrix to a float.
    gradient : callable
        Returns the Riemannian gradient (a tangent vector at its argument).
    M0 : ndarray, shape (d, m)
        Starting point.
    opts : CgOptions, optional

    Returns
    -------
    M : ndarray
        Final point; its objective is no larger than at ``M0``.
    trace : list of (float, float)
        Objective value and canonical gradient norm at every accepted iterate,
        starting with ``M0``.
    """
    res = minimize_cg_result(objective, gradient, M0, opts)
    return res.point, res.trace


def euclidean_cg_minimize(objective, gradient, x0, opts=None) -> CgResult:
    """Polak-Ribiere nonlinear CG on a flat parameter vector."""
    opts = opts or CgOptions()
    x0 = np.asarray(x0, dtype=float).copy()
    return _nonlinear_cg(
        objective,
        gradient,
        x0,
        lambda x, a, b: float(np.dot(a, b)),
        lambda x, eta, t: x + t * eta,
        lambda x, v: v,
        opts.restart_every or x0.size,
        opts,
    )
