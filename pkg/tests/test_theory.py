import math

import numpy as np
import pytest

from ipsvrg import (ConditioningSummary, c_fista_restart, c_proxgrad,
                    gradient_complexity, rate_factor, required_p,
                    required_p_raw, speedup_regime)


class TestCProxGrad:
    @pytest.mark.parametrize("p", [1, 2, 10, 100])
    def test_perfect_metric_gives_zero(self, p):
        assert c_proxgrad(p, 1.0) == 0.0

    def test_monotone_decreasing_in_p(self):
        values = [c_proxgrad(p, 10.0) for p in range(1, 101)]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_hand_value_cond_two(self):
        # tau = sqrt(3)/2; (1+tau)/(1-tau) = (2+sqrt(3))^2 = 7+4*sqrt(3),
        # so c(1) = 6*(7+4*sqrt(3)) = 42 + 24*sqrt(3)
        assert c_proxgrad(1, 2.0) == pytest.approx(42.0 + 24.0 * math.sqrt(3.0),
                                                   rel=1e-12)


class TestCFistaRestart:
    def test_cond_one_block(self):
        c6, p0, rho = c_fista_restart(6, 1.0)
        assert p0 == 6
        assert rho ** 6 == pytest.approx(1.0 / 3.0, rel=1e-12)
        assert c6 == pytest.approx(7.0, rel=1e-12)

    def test_cond_one_two_blocks(self):
        c12, _, _ = c_fista_restart(12, 1.0)
        assert c12 == pytest.approx(1.75, rel=1e-12)

    @pytest.mark.parametrize("cond", [1.0, 10.0, 100.0])
    def test_geometric_decay(self, cond):
        _, p0, _ = c_fista_restart(1, cond)
        c_one, _, _ = c_fista_restart(p0, cond)
        c_ten, _, _ = c_fista_restart(10 * p0, cond)
        assert c_ten <= 1e-3 * c_one

    @pytest.mark.parametrize("cond", [1.0, 4.0, 25.0, 1000.0])
    def test_rate_bound(self, cond):
        _, _, rho = c_fista_restart(1, cond)
        assert rho <= math.exp(-1.0 / (2 * math.e * math.sqrt(cond) + 1)) * (1 + 1e-12)

    def test_decreasing_in_p_on_block_multiples(self):
        _, p0, _ = c_fista_restart(1, 10.0)
        values = [c_fista_restart(r * p0, 10.0)[0] for r in range(1, 11)]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_increasing_in_cond_at_fixed_p(self):
        values = [c_fista_restart(60, cond)[0] for cond in (2.0, 4.0, 8.0, 16.0)]
        assert all(b > a for a, b in zip(values, values[1:]))


class TestRequiredP:
    def test_pre_rounding_hand_value(self):
        assert required_p_raw(1.0, 1.0) == pytest.approx(60.80, abs=0.01)

    def test_rounded_to_whole_blocks(self):
        assert required_p(1.0, 1.0) == 66  # 11 blocks of 6

    @pytest.mark.parametrize("kappa_m", [1.0, 10.0, 100.0, 1000.0])
    @pytest.mark.parametrize("kappa_fm", [1.0, 10.0])
    def test_certificate_holds_on_grid(self, kappa_m, kappa_fm):
        p = required_p(kappa_m, kappa_fm)
        c, p0, _ = c_fista_restart(p, kappa_m)
        assert p % p0 == 0
        assert 64.0 * kappa_fm * c * c <= 1.0

    def test_nondecreasing_in_both_arguments(self):
        grid_m = [1.0, 10.0, 100.0, 1000.0]
        grid_f = [1.0, 10.0]
        for kf in grid_f:
            vals = [required_p(km, kf) for km in grid_m]
            assert all(b >= a for a, b in zip(vals, vals[1:]))
        for km in grid_m:
            vals = [required_p(km, kf) for kf in grid_f]
            assert all(b >= a for a, b in zip(vals, vals[1:]))


class TestRateFactor:
    def test_vanishing_progress(self):
        assert rate_factor("svrg_like", 1, 1e-12, 1.0) == pytest.approx(1.0, abs=1e-9)
        assert rate_factor("katx_like", 1, 1e-12, 1.0) == pytest.approx(1.0, abs=1e-6)

    def test_svrg_like_hand_value(self):
        assert rate_factor("svrg_like", 4, 1.0, 1.0) == pytest.approx(0.5, rel=1e-15)

    def test_katx_like_hand_value(self):
        # m*eta*sigma/2 = 4, so the factor is 1/(1 + 0.5*2) = 1/2
        assert rate_factor("katx_like", 8, 1.0, 1.0) == pytest.approx(0.5, rel=1e-15)

    @pytest.mark.parametrize("m,eta,sigma", [(1, 0.1, 1.0), (100, 1.0, 1e-4),
                                             (10, 10.0, 10.0)])
    def test_open_unit_interval(self, m, eta, sigma):
        for fam in ("svrg_like", "katx_like"):
            f = rate_factor(fam, m, eta, sigma)
            assert 0.0 < f < 1.0


class TestGradientComplexity:
    def test_svrg_hand_value(self):
        # n = m = 1e4 and eta*sigma = 4/m make the log term ln 2
        val = gradient_complexity("svrg", 10 ** 4, 1, 10 ** 4, 4e-4, 1.0, 0, 1e-3)
        expected = 2e4 / math.log(2.0) * math.log(1e3)
        assert val == pytest.approx(expected, rel=1e-12)

    def test_preconditioned_with_zero_p_reduces_to_classical(self):
        a = gradient_complexity("ipresvrg", 1000, 37, 50, 0.01, 1.0, 0, 1e-4)
        b = gradient_complexity("svrg", 1000, 37, 50, 0.01, 1.0, 0, 1e-4)
        assert a == b

    def test_pure_eps_scaling(self):
        for variant in ("svrg", "katx", "ipresvrg", "iprekatx"):
            eps = 1e-4
            full = gradient_complexity(variant, 500, 5, 40, 0.1, 0.5, 3, eps)
            half = gradient_complexity(variant, 500, 5, 40, 0.1, 0.5, 3, eps / 2)
            assert half / full == pytest.approx(
                math.log(2.0 / eps) / math.log(1.0 / eps), rel=1e-12)

    def test_regime_one_ratio_tracks_prediction(self):
        # ratio of preconditioned (perfect-metric, budgeted p, m = n/(1+pd))
        # to the classical complexity minimized over m, against sqrt(n)/kf
        eps = 1e-3
        for n in (10 ** 5, 10 ** 6):
            for d in (5, 10):
                for kf in (1e3, 1e4):
                    if not math.sqrt(n) < kf < n ** 2 / d ** 2:
                        continue
                    p = required_p(kf, 1.0)
                    m_pre = max(1, math.ceil(n / (1 + p * d)))
                    pre = gradient_complexity("ipresvrg", n, d, m_pre,
                                              1 / (2 * math.sqrt(m_pre)), 1.0,
                                              p, eps)
                    grid = np.unique(np.geomspace(1, 4 * n, 400).astype(int))
                    base = min(gradient_complexity("svrg", n, d, int(m),
                                                   1 / (2 * math.sqrt(m) * kf),
                                                   1.0, 0, eps)
                               for m in grid)
                    prediction = math.sqrt(n) / kf
                    assert pre / base <= 10.0 * prediction
                    assert pre / base >= prediction / 10.0


class TestSpeedupRegime:
    def test_regime_one_example(self):
        report = speedup_regime(10 ** 6, 10, 1e4)
        assert report.regime == "regime-1"
        assert report.svrg_type_ratio == pytest.approx(0.1, rel=1e-12)
        assert report.katx_type_ratio == pytest.approx(math.sqrt(0.1), rel=1e-12)

    def test_boundary_reports_no_guarantee(self):
        report = speedup_regime(10 ** 4, 10, 100.0)  # kappa == sqrt(n)
        assert report.regime == "no-guarantee"
        assert report.svrg_type_ratio is None

    def test_regime_two_example(self):
        report = speedup_regime(10 ** 4, 10 ** 3, 1e5)
        assert report.regime == "regime-2"
        assert report.katx_type_ratio == pytest.approx(1.0, rel=1e-12)
        assert report.svrg_type_ratio == pytest.approx(
            1e3 / math.sqrt(1e4 * 1e5), rel=1e-12)

    def test_assumption_reported_not_enforced(self):
        assert "cond(M)" in speedup_regime(100, 2, 50.0).note


class TestConditioningSummary:
    def test_ratio_invariant_enforced(self):
        with pytest.raises(ValueError, match="kappa_f_m"):
            ConditioningSummary(kappa_m=10.0, kappa_f=100.0, kappa_f_m=2.0,
                                smoothness_m=4.0, strong_convexity_m=1.0,
                                n=10, d=2)

    def test_valid_summary(self):
        s = ConditioningSummary(kappa_m=10.0, kappa_f=100.0, kappa_f_m=4.0,
                                smoothness_m=4.0, strong_convexity_m=1.0,
                                n=10, d=2)
        assert s.kappa_f_m == 4.0
