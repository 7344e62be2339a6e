import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaussian_ridge.errors import DimensionError
from gaussian_ridge.gp import (NOISE_FLOOR, GpHyperparameters, kernel_eval, kernel_matrix,
                               log_marginal_likelihood, optimize_hyperparameters, posterior_mean,
                               posterior_mean_grad_u, posterior_variance, train_gp)

NOISELESS = GpHyperparameters.from_values(1.0, 0.0, [1.0])


def random_theta(rng, m, noise=None):
    log_noise = np.log(noise) if noise is not None else rng.uniform(-6, -1)
    return GpHyperparameters(rng.uniform(-1, 1), log_noise, rng.uniform(-0.7, 0.7, size=m))


def central_gradient(fun, x, h=1e-6):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def gradients_agree(analytic, numeric, rel=1e-5):
    return np.linalg.norm(analytic - numeric) <= rel * max(np.linalg.norm(numeric), 1e-8)


class TestHyperparameters:
    def test_default_is_unit(self):
        th = GpHyperparameters.default(3)
        assert th.signal_variance == 1 and th.noise_variance == 1
        np.testing.assert_array_equal(th.correlation_lengths, 1)

    def test_vector_round_trip(self):
        th = GpHyperparameters(0.1, -2.0, [0.3, -0.4])
        back = GpHyperparameters.from_vector(th.to_vector())
        np.testing.assert_array_equal(back.to_vector(), th.to_vector())

    def test_zero_noise_is_floored(self):
        assert GpHyperparameters.from_values(1, 0, [1]).noise_variance == pytest.approx(NOISE_FLOOR)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            GpHyperparameters(np.inf, 0.0, [0.0])


class TestKernel:
    def test_zero_distance(self):
        th = GpHyperparameters.from_values(2.5, 0.1, [0.3, 2.0])
        assert kernel_eval([0.4, -1.0], [0.4, -1.0], th) == pytest.approx(2.5)

    def test_hand_value(self):
        assert kernel_eval([0.0], [math.sqrt(2)], NOISELESS) == pytest.approx(math.exp(-1), rel=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        th = random_theta(rng, 3)
        for _ in range(20):
            a, b = rng.standard_normal((2, 3))
            assert kernel_eval(a, b, th) == kernel_eval(b, a, th)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            kernel_eval([0.0, 1.0], [0.0, 1.0], NOISELESS)

    def test_matrix_single_point(self):
        th = GpHyperparameters.from_values(1.7, 0.1, [1.0, 1.0])
        np.testing.assert_allclose(kernel_matrix([[0.2, 0.3]], [[0.2, 0.3]], th), [[1.7]])

    def test_matrix_matches_pointwise(self):
        rng = np.random.default_rng(1)
        th = random_theta(rng, 2)
        A, B = rng.standard_normal((4, 2)), rng.standard_normal((3, 2))
        K = kernel_matrix(A, B, th)
        expected = [[kernel_eval(a, b, th) for b in B] for a in A]
        np.testing.assert_allclose(K, expected, rtol=1e-13)

    def test_matrix_symmetric_psd(self):
        rng = np.random.default_rng(2)
        th = random_theta(rng, 2)
        U = rng.standard_normal((20, 2))
        K = kernel_matrix(U, U, th)
        assert np.max(np.abs(K - K.T)) <= 1e-14
        assert np.linalg.eigvalsh(K).min() >= -1e-10 * th.signal_variance

    def test_matrix_dimension_error(self):
        with pytest.raises(DimensionError):
            kernel_matrix(np.zeros((3, 2)), np.zeros((3, 3)), GpHyperparameters.default(2))


class TestTraining:
    def test_single_point(self):
        gp = train_gp([[0.0]], [3.0], NOISELESS)
        assert gp.coefficients[0] == pytest.approx(3.0, rel=1e-10)

    def test_two_point_hand_solve(self):
        gp = train_gp([[0.0], [2.0]], [1.0, 1.0], NOISELESS)
        np.testing.assert_allclose(gp.coefficients, 1 / (1 + math.exp(-2)), rtol=1e-10)
        assert posterior_mean([1.0], gp) == pytest.approx(2 * math.exp(-0.5) / (1 + math.exp(-2)), rel=1e-10)

    def test_solve_and_factor_invariants(self):
        rng = np.random.default_rng(3)
        th = random_theta(rng, 2, noise=1e-3)
        U, f = rng.standard_normal((10, 2)), rng.standard_normal(10)
        gp = train_gp(U, f, th)
        A = kernel_matrix(U, U, th) + th.noise_variance * np.eye(10)
        assert np.linalg.norm(A @ gp.coefficients - f) / np.linalg.norm(f) <= 1e-8
        assert np.linalg.norm(gp.cholesky @ gp.cholesky.T - A) / np.linalg.norm(A) <= 1e-8

    def test_duplicate_points_factorize(self):
        U = np.zeros((3, 1))
        gp = train_gp(U, [1.0, 1.0, 1.0], NOISELESS)
        assert gp.jitter <= 1e-4
        assert posterior_mean([0.0], gp) == pytest.approx(1.0, rel=1e-6)

    def test_output_length_mismatch(self):
        with pytest.raises(DimensionError):
            train_gp(np.zeros((3, 1)), [1.0, 2.0], NOISELESS)


class TestPosterior:
    def setup_method(self):
        rng = np.random.default_rng(4)
        self.U = rng.uniform(-2, 2, size=(15, 2))
        self.f = np.sin(self.U[:, 0]) * self.U[:, 1]
        self.theta = GpHyperparameters.from_values(1.3, 0.0, [0.8, 1.1])
        self.gp = train_gp(self.U, self.f, self.theta)

    def test_noiseless_interpolation(self):
        err = np.max(np.abs(posterior_mean(self.U, self.gp) - self.f))
        assert err <= 1e-6 * np.max(np.abs(self.f))

    def test_zero_far_away(self):
        assert abs(posterior_mean([1e3, -1e3], self.gp)) <= 1e-12

    def test_variance_at_training_points(self):
        np.testing.assert_allclose(posterior_variance(self.U, self.gp), 0, atol=1e-8)

    def test_variance_far_away(self):
        assert posterior_variance([50.0, 50.0], self.gp) == pytest.approx(1.3, abs=1e-8)

    def test_variance_bounds_on_grid(self):
        g = np.linspace(-3, 3, 41)
        grid = np.array(np.meshgrid(g, g)).reshape(2, -1).T
        v = posterior_variance(grid, self.gp)
        assert v.min() >= 0 and v.max() <= 1.3 + 1e-10

    def test_variance_matches_dense_formula(self):
        rng = np.random.default_rng(5)
        th = random_theta(rng, 2, noise=0.05)
        gp = train_gp(self.U, self.f, th)
        u = rng.standard_normal(2)
        k = kernel_matrix(u[None], self.U, th)[0]
        A = kernel_matrix(self.U, self.U, th) + th.noise_variance * np.eye(15)
        expected = th.signal_variance - k @ np.linalg.solve(A, k)
        assert posterior_variance(u, gp) == pytest.approx(expected, rel=1e-9, abs=1e-14)

    def test_scalar_and_batch_agree(self):
        pts = self.U[:3] + 0.1
        batch = posterior_mean(pts, self.gp)
        assert [posterior_mean(p, self.gp) for p in pts] == pytest.approx(batch.tolist(), rel=1e-14)


class TestMeanGradient:
    def test_single_point_centre(self):
        gp = train_gp([[0.5, -0.2]], [2.0], GpHyperparameters.from_values(1, 0, [1, 2]))
        np.testing.assert_allclose(posterior_mean_grad_u([0.5, -0.2], gp), 0, atol=1e-15)

    def test_symmetric_pair(self):
        gp = train_gp([[-0.7], [0.7]], [1.0, 1.0], NOISELESS)
        assert abs(posterior_mean_grad_u([0.0], gp)[0]) <= 1e-15

    def test_finite_differences_50_instances(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            m = rng.integers(1, 4)
            th = random_theta(rng, m)
            U = rng.standard_normal((12, m))
            gp = train_gp(U, rng.standard_normal(12), th)
            u = rng.standard_normal(m)
            fd = central_gradient(lambda v: posterior_mean(v, gp), u)
            assert gradients_agree(posterior_mean_grad_u(u, gp), fd)


class TestLikelihood:
    def test_single_zero_output(self):
        value, _ = log_marginal_likelihood(NOISELESS, [[0.0]], [0.0])
        assert value == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)

    def test_matches_dense_formula(self):
        rng = np.random.default_rng(7)
        th = random_theta(rng, 2, noise=0.1)
        U, f = rng.standard_normal((8, 2)), rng.standard_normal(8)
        A = kernel_matrix(U, U, th) + th.noise_variance * np.eye(8)
        expected = (-0.5 * f @ np.linalg.solve(A, f) - 0.5 * np.linalg.slogdet(A)[1]
                    - 4 * math.log(2 * math.pi))
        assert log_marginal_likelihood(th, U, f)[0] == pytest.approx(expected, rel=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(8)
        th = random_theta(rng, 2)
        U, f = rng.standard_normal((10, 2)), rng.standard_normal(10)
        p = rng.permutation(10)
        a = log_marginal_likelihood(th, U, f)[0]
        b = log_marginal_likelihood(th, U[p], f[p])[0]
        assert a == pytest.approx(b, rel=1e-12)

    def test_gradient_finite_differences_50_instances(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            m = rng.integers(1, 4)
            th = random_theta(rng, m)
            U, f = rng.standard_normal((10, m)), rng.standard_normal(10)
            fun = lambda v: log_marginal_likelihood(GpHyperparameters.from_vector(v), U, f)[0]
            fd = central_gradient(fun, th.to_vector())
            assert gradients_agree(log_marginal_likelihood(th, U, f)[1], fd)


class TestInvariants:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_isotropic_rotation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        m = 3
        th = GpHyperparameters(rng.uniform(-1, 1), np.log(1e-3), np.full(m, rng.uniform(-0.5, 0.5)))
        U, f = rng.standard_normal((12, m)), rng.standard_normal(12)
        Q = np.linalg.qr(rng.standard_normal((m, m)))[0]
        test = rng.standard_normal((6, m))
        a = posterior_mean(test, train_gp(U, f, th))
        b = posterior_mean(test @ Q, train_gp(U @ Q, f, th))
        np.testing.assert_allclose(a, b, atol=1e-8)

    def test_duplicate_point_with_noise(self):
        rng = np.random.default_rng(10)
        th = GpHyperparameters.from_values(1.0, 1e-2, [0.7])
        U = rng.uniform(-2, 2, size=(10, 1))
        f = np.cos(U[:, 0])
        grid = np.linspace(-3, 3, 61)[:, None]
        gp1 = train_gp(U, f, th)
        gp2 = train_gp(np.vstack([U, U[:1]]), np.r_[f, f[:1]], th)
        diff = np.abs(posterior_mean(grid, gp1) - posterior_mean(grid, gp2))
        assert diff.max() <= 0.1
        v = posterior_variance(grid, gp2)
        assert v.min() >= 0 and v.max() <= 1.0 + 1e-10


class TestOptimizer:
    def test_ascent(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            U = rng.standard_normal((20, 2))
            f = np.sin(2 * U[:, 0]) + 0.05 * rng.standard_normal(20)
            th0 = GpHyperparameters.default(2)
            th, info = optimize_hyperparameters(U, f, th0, full_output=True)
            assert log_marginal_likelihood(th, U, f)[0] >= log_marginal_likelihood(th0, U, f)[0]
            assert th.noise_variance >= NOISE_FLOOR

    def test_recovers_length_scale(self):
        hits = 0
        true = GpHyperparameters.from_values(1.0, 1e-4, [0.5])
        for seed in range(20):
            rng = np.random.default_rng(seed)
            U = rng.uniform(-3, 3, size=(200, 1))
            K = kernel_matrix(U, U, true) + true.noise_variance * np.eye(200)
            f = np.linalg.cholesky(K + 1e-10 * np.eye(200)) @ rng.standard_normal(200)
            th = optimize_hyperparameters(U, f)
            if 0.5 / 1.5 <= th.correlation_lengths[0] <= 0.5 * 1.5:
                hits += 1
        assert hits >= 16

    def test_scale_equivariance(self):
        rng = np.random.default_rng(12)
        U = rng.uniform(-2, 2, size=(40, 2))
        f = np.sin(U[:, 0]) + 0.5 * U[:, 1] ** 2 + 0.05 * rng.standard_normal(40)
        a = optimize_hyperparameters(U, f)
        b = optimize_hyperparameters(U, 10 * f)
        assert b.signal_variance / a.signal_variance == pytest.approx(100, rel=0.05)
        assert b.noise_variance / a.noise_variance == pytest.approx(100, rel=0.05)
        np.testing.assert_allclose(b.correlation_lengths, a.correlation_lengths, rtol=0.05)
