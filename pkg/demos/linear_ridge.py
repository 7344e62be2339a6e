"""
Recovering a linear ridge in ten dimensions
===========================================

``f(x) = y1 + y2`` with ``y = M^T x`` for a hidden orthonormal ``M``.
"""

import numpy as np

from gaussian_ridge import FitOptions, gen_linear_ridge, multi_trial_fit, subspace_distance, success_probability

data = gen_linear_ridge(d=10, N=200, seed=0)

# Half the samples train the GP, the other half score the subspace.
# Each trial starts from a different random subspace; the best test residual wins.
best, reports = multi_trial_fit(data, FitOptions(m=2, n_train=50, n_test=50, seed=0), n_trials=5)

print("final test residual per trial:", ["%.2e" % r.final_objective for r in reports])
print("success probability (r <= 0.005):", success_probability(reports, 0.005))

# y1 + y2 only changes along m1 + m2, so that is the direction the data pin down.
M = best.subspace
index = data.true_subspace.sum(axis=1) / np.sqrt(2)
print("residual of m1 + m2 outside the recovered plane: %.2e" % np.linalg.norm(index - M @ (M.T @ index)))
print("distance between the planes: %.3f" % subspace_distance(M, data.true_subspace))
