import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrshrink.data import Dataset, PartitionSpec
from qrshrink.solver import (STATUS_DEGENERATE, check_loss, fit_ols,
                             fit_quantile, subgradient_gap)


def enumeration_objective(Z, y, tau):
    """Minimum check loss over all interpolating basic solutions."""
    n, k = Z.shape
    best = np.inf
    for sub in itertools.combinations(range(n), k):
        Zb = Z[list(sub)]
        if np.linalg.matrix_rank(Zb) < k:
            continue
        b = np.linalg.solve(Zb, y[list(sub)])
        best = min(best, float(np.sum(check_loss(y - Z @ b, tau))))
    return best


class TestCheckLoss:
    def test_positive_branch(self):
        assert check_loss(1.0, 0.5) == 0.5

    def test_negative_branch(self):
        assert check_loss(-2.0, 0.25) == 1.5

    def test_zero_at_origin(self):
        assert check_loss(0.0, 0.9) == 0.0

    def test_domain_error(self):
        for bad in (0.0, 1.0, -0.2, 1.7):
            with pytest.raises(ValueError):
                check_loss(1.0, bad)

    @given(st.floats(-1e6, 1e6), st.floats(0.01, 0.99))
    @settings(max_examples=200, deadline=None)
    def test_reflection_symmetry(self, u, tau):
        assert check_loss(u, tau) == pytest.approx(check_loss(-u, 1 - tau), abs=1e-9)

    def test_convex_piecewise_linear(self):
        u = np.linspace(-3, 3, 101)
        v = check_loss(u, 0.3)
        assert np.all(v >= 0)
        assert np.all(np.diff(v, 2) >= -1e-12)


class TestFitQuantile:
    def test_intercept_only_median(self, rng):
        y = rng.standard_normal(31)
        d = Dataset(np.ones((31, 1)), y, intercept=False)
        fit = fit_quantile(d, 0.5)
        assert fit.beta[0] == pytest.approx(np.median(y), abs=1e-10)

    def test_single_point_interpolates(self):
        d = Dataset(np.ones((1, 1)), [3.25], intercept=False)
        for tau in (0.1, 0.5, 0.9):
            fit = fit_quantile(d, tau)
            assert fit.beta[0] == pytest.approx(3.25)
            assert fit.objective == pytest.approx(0.0, abs=1e-12)

    def test_matches_enumeration_oracle(self, rng):
        for _ in range(30):
            n = int(rng.integers(8, 22))
            p = int(rng.integers(1, 4))
            tau = float(rng.choice([0.1, 0.3, 0.5, 0.7, 0.9]))
            X = rng.standard_normal((n, p))
            y = X @ rng.standard_normal(p) + rng.standard_normal(n)
            d = Dataset(X, y)
            fit = fit_quantile(d, tau)
            Z = np.column_stack([np.ones(n), X])
            ref = enumeration_objective(Z, y, tau)
            assert fit.objective == pytest.approx(ref, abs=1e-8 * (1 + abs(ref)))

    def test_objective_matches_residual_loss(self, toy_data):
        fit = fit_quantile(toy_data, 0.3)
        assert fit.objective == pytest.approx(
            float(np.sum(check_loss(fit.residuals, 0.3))), abs=1e-10)

    def test_perturbation_never_improves(self, rng):
        for _ in range(100):
            n = int(rng.integers(10, 25))
            p = int(rng.integers(1, 4))
            tau = float(rng.uniform(0.15, 0.85))
            X = rng.standard_normal((n, p))
            y = X @ rng.standard_normal(p) + rng.standard_normal(n)
            d = Dataset(X, y)
            fit = fit_quantile(d, tau)
            Z = np.column_stack([np.ones(n), X])
            for j in range(p + 1):
                for s in (-1e-3, 1e-3):
                    b = fit.beta.copy()
                    b[j] += s
                    obj = float(np.sum(check_loss(y - Z @ b, tau)))
                    assert obj >= fit.objective - 1e-10

    def test_regression_equivariance(self, toy_data):
        c = np.array([2.0, -1.0, 0.5])
        fit0 = fit_quantile(toy_data, 0.4)
        shifted = Dataset(toy_data.X, toy_data.y + toy_data.X @ c)
        fit1 = fit_quantile(shifted, 0.4)
        assert np.allclose(fit1.beta[1:], fit0.beta[1:] + c, atol=1e-7)
        assert fit1.beta[0] == pytest.approx(fit0.beta[0], abs=1e-7)

    @pytest.mark.parametrize("tau", [0.25, 0.5, 0.77])
    def test_quantile_count_property(self, toy_data, tau):
        fit = fit_quantile(toy_data, tau)
        ztol = 1e-9 * (1 + np.max(np.abs(toy_data.y)))
        frac_neg = np.mean(fit.residuals < -ztol)
        frac_nonpos = np.mean(fit.residuals <= ztol)
        assert frac_neg <= tau <= frac_nonpos

    def test_submodel_zeros_and_nesting(self, rng):
        X = rng.standard_normal((40, 5))
        y = X @ np.array([1.0, 2.0, 0, 0, 0]) + rng.standard_normal(40)
        d = Dataset(X, y)
        part = PartitionSpec.from_keep([0, 1], 5)
        full = fit_quantile(d, 0.3)
        sub = fit_quantile(d, 0.3, part)
        assert np.all(sub.beta[[3, 4, 5]] == 0.0)
        assert sub.objective >= full.objective - 1e-12

    def test_noncontiguous_partition(self, rng):
        X = rng.standard_normal((60, 8))
        y = X @ np.array([3.0, 1.5, 0, 0, 2.0, 0, 0, 0]) + rng.standard_normal(60)
        d = Dataset(X, y)
        part = PartitionSpec.from_keep([0, 1, 4], 8)
        sub = fit_quantile(d, 0.5, part)
        off = 1
        assert np.all(sub.beta[[j + off for j in part.test_idx]] == 0.0)
        assert np.any(sub.beta[[1, 2, 5]] != 0.0)

    def test_subgradient_certificate(self, rng):
        for _ in range(20):
            X = rng.standard_normal((30, 3))
            y = rng.standard_normal(30)
            d = Dataset(X, y)
            fit = fit_quantile(d, 0.35)
            Z = np.column_stack([np.ones(30), X])
            ztol = 1e-9 * (1 + np.max(np.abs(y)))
            assert subgradient_gap(Z, fit.residuals, 0.35, ztol) <= 1e-7

    def test_rank_deficiency_flags_degenerate(self, rng):
        X = rng.standard_normal((30, 2))
        X = np.column_stack([X, X[:, 0] + X[:, 1]])
        d = Dataset(X, rng.standard_normal(30))
        fit = fit_quantile(d, 0.5)
        assert fit.status == STATUS_DEGENERATE

    def test_multiple_optima_flagged(self):
        # even-count intercept-only median: any value between the middle
        # order statistics is optimal
        y = np.array([0.0, 1.0, 2.0, 3.0])
        d = Dataset(np.ones((4, 1)), y, intercept=False)
        fit = fit_quantile(d, 0.5)
        assert fit.multiple_optima

    def test_bad_tau_rejected(self, toy_data):
        with pytest.raises(ValueError):
            fit_quantile(toy_data, 1.2)


class TestFitOls:
    def test_orthonormal_design(self, rng):
        q, _ = np.linalg.qr(rng.standard_normal((30, 3)))
        y = rng.standard_normal(30)
        d = Dataset(q, y, intercept=False)
        fit = fit_ols(d)
        assert np.allclose(fit.beta, q.T @ y, atol=1e-10)

    def test_exact_fit_zero_residuals(self, rng):
        X = rng.standard_normal((20, 2))
        y = 1.5 + X @ np.array([2.0, -3.0])
        fit = fit_ols(Dataset(X, y))
        assert np.allclose(fit.residuals, 0.0, atol=1e-9)

    def test_matches_two_by_two_inverse(self, rng):
        X = rng.standard_normal((10, 2))
        y = rng.standard_normal(10)
        d = Dataset(X, y, intercept=False)
        fit = fit_ols(d)
        a, b = X[:, 0] @ X[:, 0], X[:, 0] @ X[:, 1]
        c = X[:, 1] @ X[:, 1]
        det = a * c - b * b
        inv = np.array([[c, -b], [-b, a]]) / det
        assert np.allclose(fit.beta, inv @ (X.T @ y), atol=1e-10)

    def test_residual_orthogonality(self, toy_data):
        fit = fit_ols(toy_data)
        Z = np.column_stack([np.ones(toy_data.n), toy_data.X])
        assert np.max(np.abs(Z.T @ fit.residuals)) < 1e-8 * toy_data.n

    def test_singular_names_columns(self, rng):
        X = rng.standard_normal((25, 2))
        X = np.column_stack([X, X[:, 1]])
        d = Dataset(X, rng.standard_normal(25), labels=["a", "b", "b_copy"])
        with pytest.raises(ValueError, match="b_copy"):
            fit_ols(d)
