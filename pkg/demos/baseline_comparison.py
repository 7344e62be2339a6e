"""
Gaussian ridge against SIR, SAVE and contour regression
=======================================================

Every method sees the same samples; a GP is then fitted on each method's 2-D
projection and judged by its average posterior variance over the input density.
"""

from gaussian_ridge import gen_linear_ridge
from gaussian_ridge.comparison import compare_methods

data = gen_linear_ridge(d=10, N=300, seed=0)
results = compare_methods(data, m=2, n_trials=5, seed=0, n_variance_samples=1000)

print("%-16s %14s %15s" % ("method", "E[post. var.]", "dist. to truth"))
for r in results:
    print("%-16s %14.3e %15.3f" % (r.method, r.expected_posterior_variance, r.distance_to_truth))
