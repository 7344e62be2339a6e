"""
A bivariate normal density seen through a 5-D ridge
===================================================

Standard-normal inputs, outputs given by a correlated 2-D Gaussian density of ``M^T x``.
"""

from gaussian_ridge import FitOptions, gen_bivariate_normal_ridge, multi_trial_fit, subspace_distance

data = gen_bivariate_normal_ridge(N=200, seed=0)
best, reports = multi_trial_fit(data, FitOptions(m=2, n_train=100, n_test=100, seed=0), n_trials=6)

# Trials that end at a larger residual usually sit at a poor subspace.
for r in sorted(reports, key=lambda r: r.final_objective):
    print("seed %2d  r = %.2e  distance = %.3f" % (r.trial_seed, r.final_objective,
                                                    subspace_distance(r.subspace, data.true_subspace)))

print("fitted hyperparameters:", best.final_model.hyperparameters.to_dict())
