import numpy as np
import pytest

from qrshrink.covariance import (build_gamma, estimate_A_hac, estimate_D0,
                                 estimate_covariance, estimate_sparsity,
                                 hall_sheather_bandwidth, newey_west_lags)
from qrshrink.data import Dataset, PartitionSpec
from qrshrink.dgp import gen_ar1_errors
from qrshrink.solver import fit_quantile


class TestD0:
    def test_scaled_orthonormal(self, rng):
        q, _ = np.linalg.qr(rng.standard_normal((50, 3)))
        d = Dataset(q * np.sqrt(50), rng.standard_normal(50), intercept=False)
        assert np.allclose(estimate_D0(d), np.eye(3), atol=1e-10)

    def test_column_of_ones(self, rng):
        d = Dataset(np.ones((17, 1)), rng.standard_normal(17), intercept=False)
        assert np.allclose(estimate_D0(d), [[1.0]])

    def test_matches_naive_triple_loop(self, rng):
        X = rng.standard_normal((20, 3))
        d = Dataset(X, rng.standard_normal(20), intercept=False)
        ref = np.zeros((3, 3))
        for i in range(20):
            for a in range(3):
                for b in range(3):
                    ref[a, b] += X[i, a] * X[i, b]
        assert np.allclose(estimate_D0(d), ref / 20, atol=1e-12)

    def test_includes_intercept_column(self, rng):
        X = rng.standard_normal((30, 2))
        d = Dataset(X, rng.standard_normal(30))
        D = estimate_D0(d)
        assert D.shape == (3, 3)
        assert D[0, 0] == pytest.approx(1.0)


class TestSparsity:
    def test_uniform_density(self, rng):
        r = rng.uniform(0, 1, 100_000)
        w2 = estimate_sparsity(r, 0.5)
        assert w2 == pytest.approx(0.25, rel=0.05)

    def test_standard_normal(self, rng):
        r = rng.standard_normal(100_000)
        w2 = estimate_sparsity(r, 0.5)
        assert w2 == pytest.approx(0.25 * 2 * np.pi, rel=0.05)

    def test_constant_residuals_error(self):
        with pytest.raises(ValueError, match="constant"):
            estimate_sparsity(np.ones(50), 0.5)

    def test_too_few_residuals(self, rng):
        with pytest.raises(ValueError):
            estimate_sparsity(rng.standard_normal(10), 0.5)

    def test_bandwidth_shrinks_with_n(self):
        assert hall_sheather_bandwidth(10_000, 0.5) < hall_sheather_bandwidth(100, 0.5)


class TestHac:
    def test_zero_bandwidth_is_definition(self, rng):
        X = rng.standard_normal((25, 2))
        d = Dataset(X, rng.standard_normal(25), intercept=False)
        r = rng.standard_normal(25)
        tau = 0.3
        A, L = estimate_A_hac(d, r, tau, bandwidth=0)
        psi = tau - (r < 0)
        ref = (X * psi[:, None]).T @ (X * psi[:, None]) / 25
        assert L == 0
        assert np.allclose(A, ref, atol=1e-12)

    def test_iid_limit_quarter_d0(self, rng):
        n = 60_000
        X = rng.standard_normal((n, 2))
        d = Dataset(X, rng.standard_normal(n), intercept=False)
        r = rng.standard_normal(n)
        A, _ = estimate_A_hac(d, r, 0.5, bandwidth=0)
        D0 = estimate_D0(d)
        assert np.allclose(A, 0.25 * D0, atol=0.25 * 0.05)

    def test_ar1_long_run_variance_vs_batch_means(self):
        # intercept-only design: A is the long-run variance of psi(e_i)
        n = 100_000
        e = gen_ar1_errors(n, 0.5, seed=7)
        r = e - np.median(e)
        d = Dataset(np.ones((n, 1)), e, intercept=False)
        A, _ = estimate_A_hac(d, r, 0.5, bandwidth=newey_west_lags(n))
        psi = 0.5 - (r < 0)
        nb = 500
        batches = psi[: n - n % nb].reshape(nb, -1).sum(axis=1)
        batch_means_lrv = np.var(batches) / (n // nb)
        assert A[0, 0] == pytest.approx(batch_means_lrv, rel=0.15)

    def test_psd_for_every_bandwidth(self, rng):
        X = rng.standard_normal((40, 3))
        d = Dataset(X, rng.standard_normal(40), intercept=False)
        r = rng.standard_normal(40)
        for L in range(0, 12):
            A, _ = estimate_A_hac(d, r, 0.4, bandwidth=L)
            assert np.min(np.linalg.eigvalsh(A)) >= -1e-10

    def test_bandwidth_bounds(self, rng):
        d = Dataset(rng.standard_normal((20, 2)), rng.standard_normal(20))
        with pytest.raises(ValueError):
            estimate_A_hac(d, rng.standard_normal(20), 0.5, bandwidth=20)
        with pytest.raises(ValueError):
            estimate_A_hac(d, rng.standard_normal(20), 0.5, bandwidth=-1)

    def test_default_rule(self):
        assert newey_west_lags(100) == 4
        assert newey_west_lags(50) == 3


def _spd(rng, k):
    A = rng.standard_normal((k, 2 * k))
    return A @ A.T / (2 * k) + 0.2 * np.eye(k)


class TestBuildGamma:
    def test_cancellation(self, rng):
        D = _spd(rng, 4)
        part = PartitionSpec((0,), (1, 2))
        cov = build_gamma(D, D, part, tau=0.5, omega_sq=1.0, intercept=True)
        assert np.allclose(cov.gamma, np.linalg.inv(D), atol=1e-9)

    def test_block_diagonal_schur(self, rng):
        g11 = _spd(rng, 2)
        g22 = _spd(rng, 2)
        gamma = np.block([[g11, np.zeros((2, 2))], [np.zeros((2, 2)), g22]])
        # choose D0 = I so Gamma = A; intercept + covariate 0 in block 1
        part = PartitionSpec((0,), (1, 2))
        cov = build_gamma(np.eye(4), gamma, part, tau=0.5, omega_sq=1.0,
                          intercept=True)
        assert np.allclose(cov.gamma_22_1, cov.g22, atol=1e-10)

    def test_schur_is_inverse_of_inverse_block(self, rng):
        G = _spd(rng, 4)
        part = PartitionSpec((0,), (1, 2))
        cov = build_gamma(np.eye(4), G, part, tau=0.5, omega_sq=1.0,
                          intercept=True)
        ref = np.linalg.inv(np.linalg.inv(G)[np.ix_([2, 3], [2, 3])])
        assert np.allclose(cov.gamma_22_1, ref, atol=1e-9)

    def test_iid_normalization_property(self, rng):
        D = _spd(rng, 3)
        tau = 0.3
        part = PartitionSpec((0,), (1,))
        cov = build_gamma(D, tau * (1 - tau) * D, part, tau=tau, omega_sq=1.0,
                          intercept=True)
        assert np.allclose(cov.gamma, tau * (1 - tau) * np.linalg.inv(D),
                           atol=1e-9)

    def test_swapping_roles_transposes_offblock(self, rng):
        G = _spd(rng, 5)
        p1 = PartitionSpec((0, 1), (2, 3))
        p2 = PartitionSpec((2, 3), (0, 1))
        c1 = build_gamma(np.eye(5), G, p1, tau=0.5, omega_sq=1.0)
        c2 = build_gamma(np.eye(5), G, p2, tau=0.5, omega_sq=1.0)
        # the covariate sub-blocks swap; intercept stays in block 1
        assert np.allclose(c1.g12[1:, :], c2.g21[:, 1:], atol=1e-12)

    def test_loewner_order(self, rng):
        G = _spd(rng, 4)
        part = PartitionSpec((0,), (1, 2))
        cov = build_gamma(np.eye(4), G, part, tau=0.5, omega_sq=1.0)
        ev = np.linalg.eigvalsh(cov.g22 - cov.gamma_22_1)
        assert np.min(ev) >= -1e-10

    def test_singular_d0_rejected(self, rng):
        D = np.ones((3, 3))
        part = PartitionSpec((0,), (1,))
        with pytest.raises(ValueError, match="singular D0"):
            build_gamma(D, np.eye(3), part, tau=0.5, omega_sq=1.0)


class TestPipeline:
    def test_estimate_covariance_shapes(self, rng):
        X = rng.standard_normal((60, 5))
        y = X @ np.array([1.0, 0.5, 0, 0, 0]) + rng.standard_normal(60)
        d = Dataset(X, y)
        part = PartitionSpec.from_keep([0, 1], 5)
        fm = fit_quantile(d, 0.5)
        sm = fit_quantile(d, 0.5, part)
        cov = estimate_covariance(d, fm, part, sparsity_fits=(fm, sm))
        assert cov.gamma.shape == (6, 6)
        assert cov.g11.shape == (3, 3)  # intercept + 2 kept
        assert cov.g22.shape == (3, 3)
        assert cov.gamma_22_1.shape == (3, 3)
        assert cov.test_precision.shape == (3, 3)
        assert cov.omega_sq > 0
        assert np.allclose(cov.gamma, cov.gamma.T)
