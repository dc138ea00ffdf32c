import numpy as np
import pytest

from qrshrink.risk import (KINDS, AsymptoticParams, mc_risk_oracle, risk,
                           risk_curve, scale_gamma_direction)


def random_params(rng, p1, p2, omega_sq=None):
    k = p1 + p2
    A = rng.standard_normal((k, 2 * k))
    G = A @ A.T / (2 * k) + 0.3 * np.eye(k)
    w2 = float(rng.uniform(0.5, 2.5)) if omega_sq is None else omega_sq
    return AsymptoticParams(G[:p1, :p1], G[:p1, p1:], G[p1:, p1:], w2,
                            rng.standard_normal(p2))


class TestParams:
    def test_derived_identities(self, rng):
        par = random_params(rng, 3, 4)
        # Gamma_11.2^-1 = Gamma_11^-1 + Phi (block-inverse identity)
        g11_2 = par.g11 - par.g12 @ np.linalg.inv(par.g22) @ par.g21
        assert np.allclose(np.linalg.inv(g11_2), par.g11_2_inv, atol=1e-8)
        # delta = G11^-1 G12 gamma
        assert np.allclose(par.delta_vec,
                           np.linalg.solve(par.g11, par.g12 @ par.gamma_vec),
                           atol=1e-10)
        # Proposition-1 covariances: cov(t1,t3) = w^2 Phi, cov(t3,t2) = 0
        assert np.allclose(par.sigma12, par.omega_sq * par.phi, atol=1e-12)
        assert np.allclose(par.sigma_star, 0.0)

    def test_noncentrality_zero_iff_gamma_zero(self, rng):
        par = random_params(rng, 2, 3)
        assert par.noncentrality > 0
        par0 = AsymptoticParams(par.g11, par.g12, par.g22, par.omega_sq,
                                np.zeros(3))
        assert par0.noncentrality == 0.0

    def test_phi_psd(self, rng):
        par = random_params(rng, 4, 3)
        assert np.min(np.linalg.eigvalsh(par.phi)) >= -1e-10


class TestClosedForms:
    def test_gamma12_zero_collapses_all(self, rng):
        g11 = np.diag([1.3, 0.7, 2.0])
        g22 = np.diag([0.8, 1.1, 1.4, 0.6])
        par = AsymptoticParams(g11, np.zeros((3, 4)), g22, 1.7, np.ones(4))
        vals = [risk(k, par, 0.05) for k in KINDS]
        base = 1.7 * np.trace(np.linalg.inv(g11))
        assert np.max(np.abs(np.asarray(vals) - base)) < 1e-10

    def test_scalar_blocks_sm_below_fm_at_null(self):
        par = AsymptoticParams([[2.0]], [[0.8]], [[1.5]], 1.0, [0.0])
        assert risk("SM", par) <= risk("FM", par)
        assert risk("SM", par) == pytest.approx(1.0 / 2.0, abs=1e-12)
        g11_2 = 2.0 - 0.8 * 0.8 / 1.5
        assert risk("FM", par) == pytest.approx(1.0 / g11_2, abs=1e-12)

    def test_fm_constant_in_noncentrality(self, rng):
        par = random_params(rng, 3, 5)
        vals = [p.risks["FM"] for p in risk_curve(par, ("FM",), [0, 1, 5, 20])]
        assert np.ptp(vals) < 1e-12

    def test_pt_below_fm_at_null_then_hump(self, rng):
        par = random_params(rng, 3, 5)
        pts = risk_curve(par, ("FM", "PT"), [0, 1, 2, 5, 10, 20, 50, 150], 0.05)
        fm = pts[0].risks["FM"]
        pt = [p.risks["PT"] for p in pts]
        assert pt[0] <= fm
        assert max(pt) > fm
        assert pt[-1] == pytest.approx(fm, rel=1e-4)

    def test_ordering_ps_s_fm(self, rng):
        for _ in range(5):
            par = random_params(rng, 6, 5)
            for dl in (0.0, 0.5, 2.0, 8.0, 20.0):
                pt = scale_gamma_direction(par, np.ones(5), dl)
                r = {k: risk(k, pt, 0.05) for k in ("FM", "S", "PS")}
                assert r["PS"] <= r["S"] + 1e-12
                assert r["S"] <= r["FM"] + 1e-10

    def test_ps_strictly_better_at_small_delta(self, rng):
        par = random_params(rng, 5, 5)
        pt = scale_gamma_direction(par, np.ones(5), 0.5)
        assert risk("PS", pt) < risk("S", pt) - 1e-6

    def test_pt_needs_alpha(self, rng):
        par = random_params(rng, 2, 4)
        with pytest.raises(ValueError):
            risk("PT", par, None)

    def test_stein_needs_p2_three(self, rng):
        par = random_params(rng, 2, 2)
        with pytest.raises(ValueError, match="p2 >= 3"):
            risk("S", par)

    def test_unknown_kind(self, rng):
        par = random_params(rng, 2, 3)
        with pytest.raises(ValueError, match="unknown"):
            risk("XX", par)


class TestOracle:
    def test_fm_matches_gaussian_moment(self, rng):
        par = random_params(rng, 3, 4)
        est, se = mc_risk_oracle("FM", par, 200_000, seed=5)
        assert abs(est - risk("FM", par)) < 3 * se

    def test_sm_at_null(self, rng):
        par = random_params(rng, 3, 4)
        par0 = AsymptoticParams(par.g11, par.g12, par.g22, par.omega_sq,
                                np.zeros(4))
        est, se = mc_risk_oracle("SM", par0, 200_000, seed=6)
        assert abs(est - par0.omega_sq * np.trace(np.linalg.inv(par0.g11))) < 3 * se

    @pytest.mark.parametrize("kind", KINDS)
    def test_all_kinds_match_closed_form(self, rng, kind):
        par = random_params(rng, 4, 5)
        pt = scale_gamma_direction(par, np.arange(1.0, 6.0), 3.0)
        est, se = mc_risk_oracle(kind, pt, 300_000, seed=hash(kind) % 2 ** 31,
                                 alpha_level=0.05)
        assert abs(est - risk(kind, pt, 0.05)) < 3.5 * se

    def test_ps_below_s_significantly(self, rng):
        par = random_params(rng, 5, 5)
        pt = scale_gamma_direction(par, np.ones(5), 0.5)
        s_est, s_se = mc_risk_oracle("S", pt, 1_000_000, seed=8)
        ps_est, ps_se = mc_risk_oracle("PS", pt, 1_000_000, seed=8)
        assert ps_est < s_est - 3 * np.hypot(s_se, ps_se) or \
            risk("PS", pt) < risk("S", pt) - 3 * np.hypot(s_se, ps_se)

    def test_reproducible(self, rng):
        par = random_params(rng, 2, 3)
        a = mc_risk_oracle("FM", par, 50_000, seed=3)
        b = mc_risk_oracle("FM", par, 50_000, seed=3)
        assert a == b

    def test_draw_floor(self, rng):
        par = random_params(rng, 2, 3)
        with pytest.raises(ValueError):
            mc_risk_oracle("FM", par, 100, seed=0)


class TestCurve:
    def test_single_point_grid(self, rng):
        par = random_params(rng, 3, 4)
        pts = risk_curve(par, ("FM", "PT"), [0.0], 0.05)
        assert len(pts) == 1
        assert pts[0].risks["PT"] <= pts[0].risks["FM"]

    def test_grid_hits_noncentrality_exactly(self, rng):
        par = random_params(rng, 3, 4)
        for dl in (0.0, 2.5, 11.0):
            pt = scale_gamma_direction(par, np.ones(4), dl)
            assert pt.noncentrality == pytest.approx(dl, abs=1e-9)

    def test_errors(self, rng):
        par = random_params(rng, 3, 4)
        with pytest.raises(ValueError, match="zero direction"):
            risk_curve(par, ("FM",), [0, 1], direction=np.zeros(4))
        with pytest.raises(ValueError, match="empty"):
            risk_curve(par, ("FM",), [])
        with pytest.raises(ValueError, match="nonnegative"):
            risk_curve(par, ("FM",), [-1.0, 2.0])
