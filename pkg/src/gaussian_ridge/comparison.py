"""Side-by-side comparison of the Gaussian ridge subspace with SIR, SAVE and CR."""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .diagnostics import SummaryPlotData, subspace_distance, summary_plot_export
from .errors import GaussianRidgeError
from .gp import optimize_hyperparameters
from .ridge import FitOptions, build_model, multi_trial_fit
from .sdr import CR, SAVE, SIR, SliceSpec, cr, save, sir

log = logging.getLogger(__name__)

RIDGE = "gaussian-ridge"


@dataclass
class MethodResult:
    method: str
    subspace: Optional[np.ndarray] = None
    expected_posterior_variance: float = np.nan
    distance_to_truth: Optional[float] = None
    spectrum: Optional[np.ndarray] = None
    summary: Optional[SummaryPlotData] = None
    model: object = None
    error: Optional[str] = None
    extra: dict = field(default_factory=dict)


def _variance_samples(dataset, n_samples, seed):
    samples = dataset.sample_density(n_samples, seed)
    return dataset.inputs if samples is None else samples


def evaluate_subspace(M, dataset, samples, hyper_max_iterations=200):
    """Fit a GP (maximum likelihood) on ``dataset`` projected through ``M``.

    Returns the model and the mean posterior variance over ``samples``.
    """
    offset = float(np.mean(dataset.outputs))
    theta = optimize_hyperparameters(dataset.inputs @ M, dataset.outputs - offset,
                                     max_iterations=hyper_max_iterations)
    model = build_model(M, dataset, theta)
    return model, float(np.mean(model.variance(samples)))


def compare_methods(dataset, m=2, n_subset=None, n_trials=20, seed=0, slices=None,
                    n_variance_samples=2000, fit_options=None, jobs=1):
    """Estimate an ``m``-dimensional subspace with every method on one shared sample subset.

    The ridge method splits the subset evenly into training and testing halves.
    Every subspace is then scored by the expected posterior variance of a GP
    fitted to the whole dataset on that subspace. Variance samples come from the
    dataset's sampling density when it is known, otherwise the dataset inputs
    are used. A failing method is reported with its error instead of aborting.

    Returns
    -------
    list of MethodResult
        Sorted by expected posterior variance, failed methods last.
    """
    slices = slices or SliceSpec()
    rng = np.random.default_rng(seed)
    n_subset = dataset.n if n_subset is None else min(n_subset, dataset.n)
    idx = np.sort(rng.permutation(dataset.n)[:n_subset])
    sub = dataset.subset(idx)
    samples = _variance_samples(dataset, n_variance_samples, seed)

    n_train = n_subset // 2
    opts = fit_options or FitOptions(m=m, n_train=n_train, n_test=n_subset - n_train, seed=seed)
    estimators = [
        (RIDGE, lambda: multi_trial_fit(sub, opts, n_trials, jobs)),
        (SIR, lambda: sir(sub.inputs, sub.outputs, slices, m)),
        (SAVE, lambda: save(sub.inputs, sub.outputs, slices, m)),
        (CR, lambda: cr(sub.inputs, sub.outputs, m)),
    ]
    results = []
    for name, estimate in estimators:
        res = MethodResult(name)
        try:
            out = estimate()
            if name == RIDGE:
                best, reports = out
                res.subspace = best.subspace
                res.extra = {"best_objective": best.final_objective,
                             "trial_objectives": [r.final_objective for r in reports]}
            else:
                res.subspace = out.directions
                res.spectrum = out.eigenvalues
            res.model, res.expected_posterior_variance = evaluate_subspace(res.subspace, dataset, samples)
            res.summary = summary_plot_export(res.model, dataset)
            if dataset.true_subspace is not None and dataset.true_subspace.shape == res.subspace.shape:
                res.distance_to_truth = subspace_distance(dataset.true_subspace, res.subspace)
        except (GaussianRidgeError, np.linalg.LinAlgError) as exc:
            log.warning("%s failed: %s", name, exc)
            res.error = f"{type(exc).__name__}: {exc}"
        results.append(res)
    results.sort(key=lambda r: (r.error is not None, r.expected_posterior_variance))
    return results
