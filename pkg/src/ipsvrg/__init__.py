"""Variance-reduced stochastic optimization with inexact fixed preconditioning.

The solvers minimize composite finite sums F(x) = (1/n) sum_i f_i(x) + psi(x)
whose average is strongly convex.  The classical loops (SVRG and its
momentum-accelerated form) take exact Euclidean prox steps; the
preconditioned variants measure each step in a fixed SPD metric and solve
the resulting proximal subproblem inexactly with a small fixed number of
simple iterations, which provably preserves the outer linear rate while
shrinking the effective condition number.
"""

__version__ = "0.1.0"

from .metric import (EigenConvergenceError, MetricConditioning, Preconditioner,
                     eigen_bounds, metric_conditioning)
from .problems import (LeastSquares, Logistic, NonconvexQuadSum, Regularizer,
                       build_preconditioner, gen_ill_conditioned_least_squares,
                       gen_logistic, gen_sum_of_nonconvex, objective_value)
from .solvers import (RunTrace, SolverConfig, default_momentum_weight,
                      momentum_step, run_iprekatx, run_ipresvrg, run_solver,
                      sample_epoch_length, variance_reduced_gradient)
from .subsolver import (SubproblemSpec, SubsolverConfig, default_restart_block,
                        diagonal_exact, fista_engine, fista_restart_engine,
                        make_inner_solver, prox_grad_engine, solve_subproblem,
                        subproblem_residual, subsolve_cost)
from .theory import (ConditioningSummary, SpeedupReport, c_fista_restart,
                     c_proxgrad, gradient_complexity, rate_factor, required_p,
                     required_p_raw, speedup_regime)

__all__ = [
    "__version__",
    "Preconditioner", "MetricConditioning", "EigenConvergenceError",
    "eigen_bounds", "metric_conditioning",
    "Regularizer", "LeastSquares", "Logistic", "NonconvexQuadSum",
    "objective_value", "build_preconditioner", "gen_sum_of_nonconvex",
    "gen_ill_conditioned_least_squares", "gen_logistic",
    "SubproblemSpec", "SubsolverConfig", "solve_subproblem", "subsolve_cost",
    "make_inner_solver", "diagonal_exact", "prox_grad_engine", "fista_engine",
    "fista_restart_engine", "subproblem_residual", "default_restart_block",
    "SolverConfig", "RunTrace", "sample_epoch_length",
    "variance_reduced_gradient", "momentum_step", "default_momentum_weight",
    "run_ipresvrg", "run_iprekatx", "run_solver",
    "ConditioningSummary", "SpeedupReport", "c_proxgrad", "c_fista_restart",
    "required_p", "required_p_raw", "rate_factor", "gradient_complexity",
    "speedup_regime",
]
