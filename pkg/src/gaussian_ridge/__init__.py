"""Gaussian ridge functions.

The posterior mean of a Gaussian process on reduced coordinates ``u = M^T x``,
with ``M`` found by alternating marginal-likelihood hyperparameter fits and
Riemannian conjugate gradients over the Stiefel manifold.
"""

from .datasets import (Dataset, gen_bivariate_normal_ridge, gen_linear_ridge, gen_log_sum,
                       load_dataset, load_doe_csv, save_dataset)
from .diagnostics import (SummaryPlotData, expected_posterior_variance, subspace_distance,
                          success_probability, summary_plot_export)
from .gp import (GpHyperparameters, TrainedGp, kernel_eval, kernel_matrix, log_marginal_likelihood,
                 optimize_hyperparameters, posterior_mean, posterior_mean_grad_u, posterior_variance,
                 train_gp)
from .ridge import (FitOptions, FitReport, GaussianRidgeModel, fit_gaussian_ridge, multi_trial_fit,
                    ridge_gradient, ridge_objective, split_data)
from .sdr import SliceSpec, SubspaceEstimate, cr, save, sir, standardize
from .stiefel import CgOptions, project_to_tangent, random_orthonormal, retract, riemannian_cg_minimize

__version__ = "0.1.0"
