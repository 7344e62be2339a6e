"""
Sufficient summary plot data for log(x1 + x2 + x3)
==================================================

Exports the one-dimensional projection, the GP mean and its 2-sigma band as tables.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from gaussian_ridge import FitOptions, fit_gaussian_ridge, gen_log_sum, summary_plot_export
from gaussian_ridge.reporting import write_summary

data = gen_log_sum(N=120, seed=0)
report = fit_gaussian_ridge(data, FitOptions(m=1, n_train=60, n_test=60, seed=2))

# The direction should line up with (1, 1, 1) / sqrt(3), up to sign.
k = report.subspace[:, 0]
print("recovered direction:", np.round(k * np.sign(k.sum()), 4))

plot = summary_plot_export(report.final_model, data)
print("scatter points: %d, grid nodes: %d" % (len(plot.f), len(plot.grid)))
print("widest 2-sigma band on the grid: %.2e" % plot.two_sigma.max())

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
for path in write_summary(plot, out):
    print("wrote", path)
