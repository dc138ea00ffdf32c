import numpy as np
import pytest
from scipy import integrate
from scipy.stats import chi2 as s_chi2
from scipy.stats import ncx2

from qrshrink import chisq


class TestCentral:
    def test_df2_closed_form(self):
        for x in (0.1, 1.0, 3.7, 12.0):
            assert chisq.ncchisq_cdf(x, 2, 0.0) == pytest.approx(
                1.0 - np.exp(-x / 2), abs=1e-12)

    def test_zero_at_origin(self):
        for df in (1, 4, 11):
            assert chisq.ncchisq_cdf(0.0, df, 3.0) == 0.0

    def test_ppf_roundtrip(self):
        for q in (0.01, 0.5, 0.95, 0.999):
            for df in (1, 5, 20):
                x = chisq.chi2_ppf(q, df)
                assert chisq.chi2_cdf(x, df) == pytest.approx(q, abs=1e-10)

    def test_vs_scipy(self, rng):
        for _ in range(100):
            df = int(rng.integers(1, 30))
            x = float(rng.uniform(0, 60))
            assert chisq.chi2_cdf(x, df) == pytest.approx(
                s_chi2.cdf(x, df), abs=1e-12)


class TestNoncentral:
    def test_quadrature_oracle(self):
        val, err = integrate.quad(lambda t: ncx2.pdf(t, 4, 3.0), 0, 5.0,
                                  epsabs=1e-12)
        assert err < 1e-9
        assert chisq.ncchisq_cdf(5.0, 4, 3.0) == pytest.approx(val, abs=1e-9)

    def test_quadrature_grid(self, rng):
        for _ in range(50):
            df = int(rng.integers(1, 15))
            dl = float(rng.uniform(0, 25))
            x = float(rng.uniform(0.1, 50))
            assert chisq.ncchisq_cdf(x, df, dl) == pytest.approx(
                ncx2.cdf(x, df, dl), abs=1e-9)

    def test_monotone_in_x(self):
        xs = np.linspace(0, 40, 81)
        vals = [chisq.ncchisq_cdf(x, 5, 4.0) for x in xs]
        assert np.all(np.diff(vals) >= -1e-13)

    def test_monotone_in_noncentrality(self):
        dls = np.linspace(0, 30, 61)
        vals = [chisq.ncchisq_cdf(8.0, 5, d) for d in dls]
        assert np.all(np.diff(vals) <= 1e-13)

    def test_clamped(self):
        assert 0.0 <= chisq.ncchisq_cdf(1e9, 3, 50.0) <= 1.0


class TestInverseMoments:
    def test_central_power_one(self):
        for df in (3, 7, 30):
            assert chisq.expect_inv_ncchisq(df, 0.0, 1) == pytest.approx(
                1.0 / (df - 2), abs=1e-10)

    def test_central_power_two(self):
        for df in (5, 9, 21):
            assert chisq.expect_inv_ncchisq(df, 0.0, 2) == pytest.approx(
                1.0 / ((df - 2) * (df - 4)), abs=1e-10)

    def test_monte_carlo_oracle(self):
        z = ncx2.rvs(7, 2.5, size=2_000_000, random_state=17)
        mc = float(np.mean(1.0 / z))
        se = float(np.std(1.0 / z) / np.sqrt(z.size))
        assert abs(chisq.expect_inv_ncchisq(7, 2.5, 1) - mc) < 3 * se

    def test_decreasing_in_noncentrality_and_df(self):
        vals = [chisq.expect_inv_ncchisq(6, d, 1) for d in np.linspace(0, 20, 41)]
        assert np.all(np.diff(vals) < 0)
        vals = [chisq.expect_inv_ncchisq(df, 3.0, 1) for df in range(3, 25)]
        assert np.all(np.diff(vals) < 0)

    def test_nonexistent_moment(self):
        with pytest.raises(ValueError, match="does not exist"):
            chisq.expect_inv_ncchisq(2, 1.0, 1)
        with pytest.raises(ValueError, match="does not exist"):
            chisq.expect_inv_ncchisq(4, 1.0, 2)


class TestTruncated:
    def test_infinite_cutoff_limit(self):
        full = chisq.expect_inv_ncchisq(7, 2.5, 1)
        assert chisq.truncated_moment(7, 2.5, 1e9, 1) == pytest.approx(
            full, abs=1e-12)

    def test_zero_cutoff(self):
        assert chisq.truncated_moment(5, 1.0, 0.0, 1) == 0.0
        assert chisq.truncated_moment(5, 1.0, -3.0, 1) == 0.0

    def test_power_zero_is_cdf(self):
        assert chisq.truncated_moment(5, 1.0, 3.0, 0) == pytest.approx(
            ncx2.cdf(3.0, 5, 1.0), abs=1e-12)

    def test_quadrature_oracle(self):
        val, err = integrate.quad(lambda t: ncx2.pdf(t, 5, 1.0) / t, 1e-13, 3.0,
                                  epsabs=1e-11, limit=300)
        assert chisq.truncated_moment(5, 1.0, 3.0, 1) == pytest.approx(
            val, abs=1e-8)

    def test_acceptance_tolerances(self):
        # the machinery targets: central closed forms to 1e-10 and the
        # noncentral CDF within 1e-9 of quadrature on a grid
        for df in (5, 9):
            assert abs(chisq.expect_inv_ncchisq(df, 0.0, 1) - 1 / (df - 2)) < 1e-10
