"""Gaussian ridge function fitting.

Alternates maximum-likelihood hyperparameter estimation on a training split
with Riemannian CG over the Stiefel manifold on a testing split.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.linalg import cho_solve

from .datasets import Dataset
from .errors import AllTrialsFailedError, DimensionError, GaussianRidgeError, SizeError
from .gp import (GpHyperparameters, TrainedGp, kernel_matrix, optimize_hyperparameters,
                 posterior_mean, posterior_variance, train_gp)
from .stiefel import CgOptions, check_stiefel, minimize_cg_result, project_to_tangent, random_orthonormal

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaussianRidgeModel:
    """A subspace ``M`` plus a GP trained on ``M^T x`` of the stored training inputs.

    ``output_offset`` is the training-output mean removed before GP training and
    added back by :meth:`predict`.
    """

    subspace: np.ndarray
    gp: TrainedGp
    train_inputs: np.ndarray
    output_offset: float = 0.0

    @property
    def ambient_dimension(self):
        return self.subspace.shape[0]

    @property
    def subspace_dimension(self):
        return self.subspace.shape[1]

    @property
    def hyperparameters(self):
        return self.gp.hyperparameters

    def reduce(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.ambient_dimension:
            raise DimensionError(f"inputs have {X.shape[1]} columns, model expects {self.ambient_dimension}")
        return X @ self.subspace

    def predict(self, X):
        return self.output_offset + posterior_mean(self.reduce(X), self.gp)

    def variance(self, X):
        return posterior_variance(self.reduce(X), self.gp)


def build_model(M, train, theta, center=True):
    """Train a GP on ``train`` projected through ``M`` with fixed hyperparameters."""
    M = check_stiefel(M)
    offset = float(np.mean(train.outputs)) if center else 0.0
    gp = train_gp(train.inputs @ M, train.outputs - offset, theta)
    return GaussianRidgeModel(M, gp, train.inputs.copy(), offset)


@dataclass(frozen=True)
class FitOptions:
    """Settings for :func:`fit_gaussian_ridge`.

    ``epsilon`` is the outer-loop tolerance on the change in test residual
    between rounds; ``seed`` drives both the split and the initial subspace.
    """

    m: int = 2
    n_train: int = 50
    n_test: int = 50
    epsilon: float = 1e-6
    max_outer_iterations: int = 10
    cg: CgOptions = field(default_factory=CgOptions)
    hyper_max_iterations: int = 200
    hyper_gradient_tolerance: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_outer_iterations < 1:
            raise ValueError("max_outer_iterations must be positive")
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("n_train and n_test must be positive")


@dataclass
class FitReport:
    final_model: GaussianRidgeModel
    objective_trace: List[float]
    gradient_norm_trace: List[float]
    outer_iterations_used: int
    converged: bool
    trial_seed: int
    initial_objective: float = np.nan
    objective_before: List[float] = field(default_factory=list)
    inner_traces: List[list] = field(default_factory=list)
    hyperparameter_warnings: int = 0
    error: Optional[str] = None

    @property
    def final_objective(self):
        return self.objective_trace[-1] if self.objective_trace else np.nan

    @property
    def subspace(self):
        return self.final_model.subspace


def split_data(dataset, n_train, n_test, seed=None):
    """Disjoint training and testing subsets drawn without replacement."""
    if n_train < 1 or n_test < 1:
        raise SizeError("both splits need at least one sample")
    if n_train + n_test > dataset.n:
        raise SizeError(f"requested {n_train} + {n_test} samples from a dataset of {dataset.n}")
    perm = np.random.default_rng(seed).permutation(dataset.n)
    return dataset.subset(perm[:n_train]), dataset.subset(perm[n_train:n_train + n_test])


def _weighted_pair_sum(C, Xa, Va, Xb, Vb):
    # sum_ab C_ab (x_a - x_b)(v_a - v_b)^T
    return (Xa.T @ (C.sum(axis=1)[:, None] * Va) - Xa.T @ (C @ Vb)
            - Xb.T @ (C.T @ Va) + Xb.T @ (C.sum(axis=0)[:, None] * Vb))


class RidgeProblem:
    """Test residual of a ridge model as a function of ``M`` with hyperparameters held fixed.

    For every ``M`` the GP is retrained on the projected training inputs, so the
    objective and its gradient account for the training coordinates and the
    coefficient vector moving with ``M``. The last evaluation is cached so an
    objective call followed by a gradient call at the same point costs one
    factorization.
    """

    def __init__(self, theta, train_inputs, train_outputs, test_inputs, test_outputs):
        self.theta = theta
        self.Xh = np.asarray(train_inputs, dtype=float)
        self.fh = np.asarray(train_outputs, dtype=float)
        self.Xt = np.asarray(test_inputs, dtype=float)
        self.ft = np.asarray(test_outputs, dtype=float)
        if self.Xh.shape[1] != self.Xt.shape[1]:
            raise DimensionError("training and testing inputs differ in dimension")
        self._key = None
        self._state = None

    def _evaluate(self, M):
        key = M.tobytes()
        if key != self._key:
            gp = train_gp(self.Xh @ M, self.fh, self.theta)
            Ut = self.Xt @ M
            Ks = kernel_matrix(Ut, gp.reduced_inputs, self.theta)
            resid = Ks @ gp.coefficients - self.ft
            self._key, self._state = key, (gp, Ut, Ks, resid)
        return self._state

    def objective(self, M):
        resid = self._evaluate(M)[3]
        return 0.5 * float(resid @ resid) / resid.size

    def euclidean_gradient(self, M):
        gp, Ut, Ks, resid = self._evaluate(M)
        nt = resid.size
        beta = gp.coefficients
        inv_l2 = np.exp(-2 * self.theta.log_correlation_lengths)
        Vh = gp.reduced_inputs * inv_l2
        Vt = Ut * inv_l2
        alpha = cho_solve((gp.cholesky, True), Ks.T @ resid) / nt
        K = kernel_matrix(gp.reduced_inputs, gp.reduced_inputs, self.theta)
        C_cross = (resid[:, None] * beta[None, :]) * Ks / nt
        C_train = -(alpha[:, None] * beta[None, :]) * K
        return -(_weighted_pair_sum(C_cross, self.Xt, Vt, self.Xh, Vh)
                 + _weighted_pair_sum(C_train, self.Xh, Vh, self.Xh, Vh))

    def gradient(self, M):
        return project_to_tangent(M, self.euclidean_gradient(M))


def ridge_objective(M, theta, train, test):
    """Mean half squared residual ``sum (f_i - g(M^T x_i))^2 / (2 N_test)`` on the test split.

    The GP is trained on ``train`` projected through ``M`` with hyperparameters
    ``theta``.
    """
    M = check_stiefel(M)
    if M.shape[0] != test.d or M.shape[0] != train.d:
        raise DimensionError("subspace dimension does not match the data")
    return RidgeProblem(theta, train.inputs, train.outputs, test.inputs, test.outputs).objective(M)


def ridge_gradient(M, theta, train, test):
    """Riemannian gradient (a tangent vector at ``M``) of :func:`ridge_objective`."""
    M = check_stiefel(M)
    if M.shape[0] != test.d or M.shape[0] != train.d:
        raise DimensionError("subspace dimension does not match the data")
    return RidgeProblem(theta, train.inputs, train.outputs, test.inputs, test.outputs).gradient(M)


def _fit_split(train, test, options, trial_seed):
    offset = float(np.mean(train.outputs))
    fh = train.outputs - offset
    ft = test.outputs - offset
    M = random_orthonormal(train.d, options.m, trial_seed)
    theta = GpHyperparameters.default(options.m)

    objective_trace, grad_trace, before, inner_traces = [], [], [], []
    initial = None
    warnings_count = 0
    converged = False
    previous = None
    for outer in range(options.max_outer_iterations):
        theta, info = optimize_hyperparameters(
            train.inputs @ M, fh, theta, options.hyper_max_iterations,
            options.hyper_gradient_tolerance, full_output=True)
        warnings_count += info.line_search_failed
        problem = RidgeProblem(theta, train.inputs, fh, test.inputs, ft)
        res = minimize_cg_result(problem.objective, problem.gradient, M, options.cg)
        M = res.point
        r_before, r_after = res.trace[0][0], res.trace[-1][0]
        if initial is None:
            initial = r_before
        before.append(r_before)
        objective_trace.append(r_after)
        grad_trace.append(res.trace[-1][1])
        inner_traces.append(res.trace)
        log.debug("seed %s round %d: r %.3e -> %.3e (%d its, %s)", trial_seed, outer,
                  r_before, r_after, res.iterations, res.stop_reason)
        if previous is not None and abs(r_after - previous) < options.epsilon:
            converged = True
            break
        previous = r_after

    gp = train_gp(train.inputs @ M, fh, theta)
    model = GaussianRidgeModel(M, gp, train.inputs.copy(), offset)
    return FitReport(model, objective_trace, grad_trace, len(objective_trace), converged,
                     trial_seed, initial, before, inner_traces, warnings_count)


def fit_gaussian_ridge(dataset, options=None, trial_seed=None):
    """Fit a Gaussian ridge function with the alternating algorithm.

    Parameters
    ----------
    dataset : Dataset
    options : FitOptions, optional
        ``options.seed`` selects the split; ``trial_seed`` (default ``options.seed``)
        selects the random initial subspace.

    Returns
    -------
    FitReport
    """
    options = options or FitOptions()
    train, test = split_data(dataset, options.n_train, options.n_test, options.seed)
    seed = options.seed if trial_seed is None else trial_seed
    return _fit_split(train, test, options, seed)


def _run_trial(args):
    train, test, options, seed = args
    try:
        return _fit_split(train, test, options, seed)
    except GaussianRidgeError as exc:
        return exc


def multi_trial_fit(dataset, options=None, n_trials=20, jobs=1):
    """Run ``n_trials`` fits from different random starts on one split and keep the best.

    Trial ``k`` uses initial-subspace seed ``options.seed + k``. A trial raising
    a package error is logged and left out of ``reports``; if every trial fails
    :class:`AllTrialsFailedError` carries the collected errors.

    Returns
    -------
    best : FitReport
        The trial with the smallest final test residual.
    reports : list of FitReport
        All successful trials in seed order.
    """
    options = options or FitOptions()
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    train, test = split_data(dataset, options.n_train, options.n_test, options.seed)
    tasks = [(train, test, options, options.seed + k) for k in range(n_trials)]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_trial, tasks))
    else:
        results = [_run_trial(t) for t in tasks]
    reports, errors = [], []
    for task, res in zip(tasks, results):
        if isinstance(res, Exception):
            log.warning("trial with seed %d failed: %s", task[3], res)
            errors.append((task[3], res))
        else:
            reports.append(res)
    if not reports:
        raise AllTrialsFailedError(errors)
    best = min(reports, key=lambda r: r.final_objective)
    return best, reports
