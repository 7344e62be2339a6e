"""Subspace quality metrics and sufficient-summary-plot data."""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, SizeError
from .gp import posterior_mean, posterior_variance

GRID_RESOLUTION = {1: 256, 2: 64}
GRID_MARGIN = 0.1


def _basis(M):
    M = np.asarray(M, dtype=float)
    return M[:, None] if M.ndim == 1 else M


def subspace_distance(M, M_tilde):
    """Spectral norm of ``M M^T - Mt Mt^T``, i.e. the sine of the largest principal angle.

    Computed from the component of ``Mt`` orthogonal to ``span(M)``, which stays
    accurate for nearly coincident subspaces.
    """
    M, Mt = _basis(M), _basis(M_tilde)
    if M.shape != Mt.shape:
        raise DimensionError(f"subspaces have shapes {M.shape} and {Mt.shape}")
    resid = Mt - M @ (M.T @ Mt)
    return float(min(np.linalg.norm(resid, 2), 1.0))


def projector_distance(M, M_tilde):
    """The same distance evaluated directly from the projector difference."""
    M, Mt = _basis(M), _basis(M_tilde)
    if M.shape != Mt.shape:
        raise DimensionError(f"subspaces have shapes {M.shape} and {Mt.shape}")
    return float(np.linalg.norm(M @ M.T - Mt @ Mt.T, 2))


def expected_posterior_variance(model, samples):
    """Monte Carlo mean of the ridge model's posterior variance over ``samples`` (N, d)."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 0:
        raise SizeError("no samples given")
    return float(np.mean(model.variance(samples)))


def success_probability(reports, threshold=0.005):
    """Fraction of fit reports whose final test residual is at most ``threshold``."""
    reports = list(reports)
    if not reports:
        raise SizeError("no reports given")
    hits = sum(1 for r in reports if np.isfinite(r.final_objective) and r.final_objective <= threshold)
    return hits / len(reports)


@dataclass
class SummaryPlotData:
    """Reduced coordinates and outputs, plus an optional mean / 2-sigma grid.

    ``grid`` holds one column per reduced coordinate and has one row per grid
    node (long form); ``mean`` and ``two_sigma`` are aligned with it.
    """

    u: np.ndarray
    f: np.ndarray
    grid: Optional[np.ndarray] = None
    mean: Optional[np.ndarray] = None
    two_sigma: Optional[np.ndarray] = None
    notice: Optional[str] = None

    @property
    def has_grid(self):
        return self.grid is not None


def grid_axes(u, resolution):
    lo, hi = u.min(axis=0), u.max(axis=0)
    pad = GRID_MARGIN * np.where(hi > lo, hi - lo, 1.0)
    return [np.linspace(a, b, resolution) for a, b in zip(lo - pad, hi + pad)]


def summary_plot_export(subspace_or_model, dataset, resolution=None):
    """Sufficient-summary-plot data for ``dataset`` on a subspace or a fitted ridge model.

    With a model and ``m`` in {1, 2}, the posterior mean and two standard
    deviations are evaluated on a regular grid covering the projected data with
    a 10% margin. For ``m >= 3`` only the coordinates are exported.
    """
    model = None
    if hasattr(subspace_or_model, "subspace"):
        model = subspace_or_model
        M = model.subspace
    else:
        M = _basis(subspace_or_model)
    if M.shape[0] != dataset.d:
        raise DimensionError(f"subspace has {M.shape[0]} rows, data have {dataset.d} inputs")
    u = dataset.inputs @ M
    out = SummaryPlotData(u, dataset.outputs.copy())
    if model is None:
        return out
    m = M.shape[1]
    if m not in GRID_RESOLUTION:
        out.notice = f"gridded mean and variance need m <= 2 (got m = {m}); exported coordinates only"
        warnings.warn(out.notice)
        return out
    res = resolution or GRID_RESOLUTION[m]
    axes = grid_axes(u, res)
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.column_stack([g.ravel() for g in mesh])
    out.grid = grid
    out.mean = model.output_offset + posterior_mean(grid, model.gp)
    out.two_sigma = 2.0 * np.sqrt(posterior_variance(grid, model.gp))
    return out
