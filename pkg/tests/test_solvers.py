import numpy as np
import pytest

from ipsvrg import (LeastSquares, Preconditioner, Regularizer, SolverConfig,
                    SubsolverConfig, build_preconditioner,
                    default_momentum_weight, gen_ill_conditioned_least_squares,
                    gen_sum_of_nonconvex, metric_conditioning, momentum_step,
                    objective_value, run_iprekatx, run_ipresvrg, run_solver,
                    sample_epoch_length, variance_reduced_gradient)
from ipsvrg.harness.reference import compute_reference_optimum
from test_problems import make_problem


def max_iterate_deviation(t1, t2):
    return max(float(np.max(np.abs(a - b))) for a, b in zip(t1.iterates, t2.iterates))


def component_metric_smoothness(prob, precond):
    """Largest whitened component curvature, the step-size constant of the analysis."""
    m_inv = np.linalg.inv(precond.mat)
    lead = max(float(prob.A[i] @ m_inv @ prob.A[i]) for i in range(prob.n))
    return lead + 2.0 * prob.lambda2 / precond.lambda_min


class TestEpochLength:
    def test_fixed_is_m_minus_one(self):
        rng = np.random.default_rng(0)
        assert all(sample_epoch_length("fixed", 100, rng) == 99 for _ in range(5))

    def test_geometric_mean_matches_m_minus_one(self):
        # Monte-Carlo check of the distribution's mean
        rng = np.random.default_rng(np.random.SeedSequence(12345))
        total = sum(sample_epoch_length("geometric", 100, rng)
                    for _ in range(1_000_000))
        assert 98.7 <= total / 1e6 <= 99.3

    def test_degenerate_geometric(self):
        rng = np.random.default_rng(1)
        assert all(sample_epoch_length("geometric", 1, rng) == 0
                   for _ in range(100))

    def test_invalid_m(self):
        with pytest.raises(ValueError):
            sample_epoch_length("fixed", 0, np.random.default_rng(0))


class TestVarianceReducedGradient:
    def test_anchor_point_returns_full_gradient(self):
        prob = make_problem("least_squares", 20, 4, 0)
        w0 = np.random.default_rng(1).standard_normal(4)
        g = prob.full_gradient(w0)
        np.testing.assert_array_equal(
            variance_reduced_gradient(g, prob, 3, w0, w0), g)

    @pytest.mark.parametrize("kind", ["least_squares", "logistic", "nonconvex"])
    def test_exhaustive_mean_is_full_gradient(self, kind):
        prob = make_problem(kind, 40, 6, 2)
        rng = np.random.default_rng(3)
        w0 = rng.standard_normal(6)
        wt = rng.standard_normal(6)
        g = prob.full_gradient(w0)
        mean = np.mean([variance_reduced_gradient(g, prob, i, wt, w0)
                        for i in range(prob.n)], axis=0)
        full = prob.full_gradient(wt)
        assert np.linalg.norm(mean - full) <= 1e-12 * max(1.0, np.linalg.norm(full))

    def test_single_component(self):
        prob = LeastSquares(np.array([[1.0, 2.0]]), np.array([0.5]))
        rng = np.random.default_rng(4)
        w0, wt = rng.standard_normal((2, 2))
        g = prob.full_gradient(w0)
        np.testing.assert_allclose(variance_reduced_gradient(g, prob, 0, wt, w0),
                                   prob.full_gradient(wt), rtol=1e-14)


class TestRunIpresvrg:
    def test_single_component_quadratic_one_exact_step(self):
        # f(x) = x^2/2, anchor gradient equals the only component gradient,
        # so one inner step from 1 with eta = 1 lands on the minimizer
        prob = LeastSquares(np.array([[1.0]]), np.array([0.0]))
        cfg = SolverConfig(method="ipresvrg", eta=1.0, m=1, epochs=1)
        trace = run_ipresvrg(prob, Regularizer.zero(), cfg, x0=np.array([1.0]))
        np.testing.assert_array_equal(trace.x_final, [0.0])
        assert trace.objective == [0.5, 0.0]

    @pytest.mark.parametrize("mode", ["fixed", "geometric"])
    def test_classical_equals_identity_preconditioned(self, mode):
        prob = gen_ill_conditioned_least_squares(50, 5, seed=1, gram_cond=100.0)
        reg = Regularizer.l1(1e-3)
        base = dict(eta=0.05, m=10, epochs=8, seed=7, epoch_mode=mode,
                    record_iterates=True)
        classical = run_ipresvrg(prob, reg, SolverConfig(method="svrg", **base))
        precond = run_ipresvrg(prob, reg, SolverConfig(
            method="ipresvrg", sub=SubsolverConfig(engine="prox_grad", p=1), **base))
        assert max_iterate_deviation(classical, precond) <= 1e-12

    def test_zero_epochs_records_initial_point_only(self):
        prob = make_problem("least_squares", 10, 3, 5)
        cfg = SolverConfig(method="svrg", eta=0.1, m=5, epochs=0)
        trace = run_ipresvrg(prob, Regularizer.zero(), cfg)
        assert trace.epoch == [0]
        assert trace.grad_evals == [0]

    def test_gradient_accounting_fixed_mode(self):
        prob = make_problem("least_squares", 30, 4, 6)
        cfg = SolverConfig(method="svrg", eta=0.01, m=7, epochs=5, seed=2)
        trace = run_ipresvrg(prob, Regularizer.zero(), cfg)
        expected = [(30 + 2 * 7) * k for k in range(6)]
        assert trace.grad_evals == expected
        assert trace.matvecs == [0] * 6
        assert trace.prox_calls == [7 * k for k in range(6)]

    def test_matvec_accounting_dense_subsolver(self):
        prob = make_problem("least_squares", 20, 4, 7)
        m1 = build_preconditioner(prob, "full")
        cfg = SolverConfig(method="ipresvrg", eta=1e-3, m=5, epochs=3, seed=3,
                           precond=m1, sub=SubsolverConfig(engine="fista", p=20))
        trace = run_ipresvrg(prob, Regularizer.zero(), cfg)
        assert trace.matvecs == [5 * 20 * k for k in range(4)]
        assert trace.prox_calls == trace.matvecs

    def test_diagonal_exact_accounting(self):
        prob = make_problem("least_squares", 20, 4, 8)
        m2 = build_preconditioner(prob, "diag_shift", alpha=0.1)
        cfg = SolverConfig(method="ipresvrg", eta=1e-3, m=5, epochs=2, seed=3,
                           precond=m2)
        trace = run_ipresvrg(prob, Regularizer.zero(), cfg)
        assert trace.matvecs == [0, 5, 10]

    def test_counters_nondecreasing_and_every_epoch_recorded(self):
        prob = make_problem("logistic", 25, 4, 9, lambda2=1e-3)
        cfg = SolverConfig(method="svrg", eta=0.5, m=10, epochs=12, seed=4)
        trace = run_ipresvrg(prob, Regularizer.l1(1e-3), cfg)
        assert trace.epoch == list(range(13))
        for series in (trace.grad_evals, trace.matvecs, trace.prox_calls,
                       trace.wall_s):
            assert all(b >= a for a, b in zip(series, series[1:]))

    def test_stop_below_terminates_early(self):
        prob = make_problem("least_squares", 30, 4, 10)
        ref = compute_reference_optimum(prob, Regularizer.zero(), tol=1e-10)
        cfg = SolverConfig(method="svrg", eta=0.2, m=30, epochs=500, seed=5,
                           stop_below=ref.f_star + 1e-4)
        trace = run_ipresvrg(prob, Regularizer.zero(), cfg)
        assert trace.epoch[-1] < 500
        assert trace.objective[-1] <= ref.f_star + 1e-4

    def test_abort_above_stops_divergence(self):
        prob = gen_ill_conditioned_least_squares(100, 5, seed=2, gram_cond=10.0)
        cfg = SolverConfig(method="svrg", eta=50.0, m=50, epochs=300, seed=6,
                           abort_above=1e6)
        trace = run_ipresvrg(prob, Regularizer.zero(), cfg)
        assert trace.epoch[-1] < 300

    def test_rejects_wrong_method(self):
        prob = make_problem("least_squares", 10, 3, 11)
        cfg = SolverConfig(method="iprekatx", eta=0.1, tau=0.5)
        with pytest.raises(ValueError, match="run_ipresvrg"):
            run_ipresvrg(prob, Regularizer.zero(), cfg)

    def test_classical_method_rejects_preconditioner(self):
        with pytest.raises(ValueError, match="Euclidean"):
            SolverConfig(method="svrg", eta=0.1,
                         precond=Preconditioner.diagonal([1.0, 2.0]))


class TestMomentumStep:
    def test_half_weight_collapses_to_last_epoch_output(self):
        rng = np.random.default_rng(12)
        y_k = rng.standard_normal(5)
        y_km1 = rng.standard_normal(5)
        out = momentum_step(y_k, y_km1, y_km1, 0.5)
        np.testing.assert_allclose(out, y_k, rtol=1e-15, atol=1e-15)

    def test_consensus_fixed_point(self):
        v = np.random.default_rng(13).standard_normal(4)
        for tau in (0.1, 0.5, 1.0):
            np.testing.assert_allclose(momentum_step(v, v, v, tau), v, rtol=1e-15)

    def test_hand_value_full_weight(self):
        out = momentum_step(np.array([2.0]), np.array([0.0]), np.array([0.0]), 1.0)
        np.testing.assert_allclose(out, [1.5])

    def test_weight_range(self):
        with pytest.raises(ValueError):
            momentum_step(np.zeros(2), np.zeros(2), np.zeros(2), 0.0)


class TestRunIprekatx:
    def test_half_weight_reduces_to_plain_loop(self):
        prob = gen_ill_conditioned_least_squares(60, 6, seed=3, gram_cond=50.0)
        reg = Regularizer.l1(1e-3)
        base = dict(eta=0.05, m=8, epochs=10, seed=11, record_iterates=True)
        plain = run_ipresvrg(prob, reg, SolverConfig(method="ipresvrg", **base))
        momentum = run_iprekatx(prob, reg, SolverConfig(method="iprekatx",
                                                        tau=0.5, **base))
        assert max_iterate_deviation(plain, momentum) <= 1e-10

    def test_zero_epochs(self):
        prob = make_problem("least_squares", 10, 3, 14)
        cfg = SolverConfig(method="katyushax", eta=0.1, epochs=0, tau=0.5)
        trace = run_iprekatx(prob, Regularizer.zero(), cfg)
        assert trace.epoch == [0]
        assert trace.objective == [objective_value(prob, Regularizer.zero(),
                                                   np.zeros(3))]

    def test_default_weight_formula(self):
        # m = 4, eta = 1/(2*sqrt(m)*L), sigma = L: 0.5*sqrt(0.5*4*0.25) ~ 0.3536
        assert default_momentum_weight(4, 0.25, 1.0) == \
            pytest.approx(0.5 * np.sqrt(0.5), rel=1e-15)

    def test_default_weight_used_when_tau_missing(self):
        prob = make_problem("least_squares", 12, 3, 15)
        cfg = SolverConfig(method="katyushax", eta=0.01, m=4, epochs=2, seed=1)
        trace = run_iprekatx(prob, Regularizer.zero(), cfg, sigma_metric=1.0)
        assert trace.warnings == []
        with pytest.raises(ValueError, match="sigma_metric"):
            run_iprekatx(prob, Regularizer.zero(), cfg)

    def test_oversized_default_weight_clamped_with_warning(self):
        prob = make_problem("least_squares", 12, 3, 16)
        cfg = SolverConfig(method="katyushax", eta=1.0, m=100, epochs=1, seed=1)
        trace = run_iprekatx(prob, Regularizer.zero(), cfg, sigma_metric=10.0)
        assert any("clamped" in w for w in trace.warnings)

    def test_dispatch(self):
        prob = make_problem("least_squares", 12, 3, 17)
        cfg = SolverConfig(method="katyushax", eta=0.01, epochs=1, tau=0.4, seed=0)
        trace = run_solver(prob, Regularizer.zero(), cfg)
        assert trace.epoch == [0, 1]


class TestConvergenceProperties:
    def test_monotone_decrease_at_certified_step(self):
        # at the analysis step size the objective should essentially never
        # increase across epochs; the tolerance allows 5 exceptions in 100
        monotone = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            prob = LeastSquares(rng.standard_normal((50, 5)),
                                rng.standard_normal(50), 1e-3)
            m1 = build_preconditioner(prob, "full")
            eta = 1.0 / (2.0 * np.sqrt(10) * component_metric_smoothness(prob, m1))
            cfg = SolverConfig(method="ipresvrg", eta=eta, m=10, epochs=20,
                               seed=seed, precond=m1,
                               sub=SubsolverConfig(engine="fista", p=20))
            trace = run_ipresvrg(prob, Regularizer.l1(1e-3), cfg)
            if np.all(np.diff(trace.objective) <= 1e-12):
                monotone += 1
        assert monotone >= 95

    def test_linear_rate_direction_and_contraction(self):
        # log-gap slope must be negative and the per-epoch contraction median
        # within 1.5x of the certified factor
        slopes = []
        for seed in range(10):
            rng = np.random.default_rng(2000 + seed)
            prob = LeastSquares(rng.standard_normal((120, 8)),
                                rng.standard_normal(120), 1e-3)
            reg = Regularizer.l1(1e-3)
            ref = compute_reference_optimum(prob, reg, tol=1e-13)
            m1 = build_preconditioner(prob, "full")
            cond = metric_conditioning(prob.hessian_matrix(), m1)
            m = 20
            eta = 1.0 / (2.0 * np.sqrt(m) * component_metric_smoothness(prob, m1))
            cfg = SolverConfig(method="ipresvrg", eta=eta, m=m, epochs=50,
                               seed=seed, precond=m1,
                               sub=SubsolverConfig(engine="fista", p=20))
            trace = run_ipresvrg(prob, reg, cfg)
            gap = np.maximum(np.asarray(trace.objective) - ref.f_star, 1e-300)
            slope = np.polyfit(np.arange(5, 51), np.log(gap[5:51]), 1)[0]
            slopes.append(slope)
            certified = 1.0 / (1.0 + 0.25 * m * eta * cond.strong_convexity)
            assert np.median(gap[6:51] / gap[5:50]) <= certified * 1.5
        assert all(s < 0 for s in slopes)

    def test_nonconvex_components_stay_finite_at_paper_step(self):
        prob = gen_sum_of_nonconvex(2000, 100, seed=0)
        m2 = build_preconditioner(prob, "diag_shift", alpha=15.0)
        cfg = SolverConfig(method="ipresvrg", eta=0.015, m=100, epochs=200,
                           seed=0, precond=m2)
        trace = run_ipresvrg(prob, Regularizer.l1(1e-3), cfg)
        assert np.all(np.isfinite(trace.objective))
        assert trace.epoch[-1] == 200
