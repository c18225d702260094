"""Outer loops: SVRG, Katyusha X, and their inexactly preconditioned variants.

An epoch computes the full gradient at an anchor point and then runs D+1
stochastic steps, each correcting one component gradient against the anchor
(the variance-reduced gradient).  The unpreconditioned methods take the
classical exact prox step; the preconditioned ones hand each step to the
inexact subproblem solver.  The momentum variants wrap one such epoch per
outer iteration in an affine extrapolation step.

Randomness contract: the epoch-length stream and the component-index stream
are two independently seeded child generators spawned from ``cfg.seed``, and
every epoch draws its length first and then its D+1 indices in one block.
Methods sharing a seed therefore consume identical randomness epoch for
epoch, which is what makes the cross-method equivalences exact.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .metric import Preconditioner
from .problems import Regularizer, objective_value
from .subsolver import SubsolverConfig, make_inner_solver, subsolve_cost

__all__ = [
    "METHODS",
    "SolverConfig",
    "RunTrace",
    "sample_epoch_length",
    "variance_reduced_gradient",
    "momentum_step",
    "default_momentum_weight",
    "run_ipresvrg",
    "run_iprekatx",
    "run_solver",
]

METHODS = ("svrg", "ipresvrg", "katyushax", "iprekatx")
_CLASSICAL = ("svrg", "katyushax")


@dataclass
class SolverConfig:
    """Outer-loop parameters.

    The classical methods (svrg, katyushax) always take the exact identity
    step ``prox(w - eta*g, eta)``; supplying a non-identity preconditioner
    together with one of them is rejected.  ``m`` controls the epoch length:
    D = m-1 inner steps deterministically in "fixed" mode, D ~ Geom(1/m) in
    "geometric" mode.  ``tau`` is the momentum weight of the Katyusha-type
    methods; leave it None to derive it from a supplied strong-convexity
    constant at run time.
    """

    method: str
    eta: float
    m: int = 100
    epochs: int = 50
    epoch_mode: str = "fixed"
    tau: float | None = None
    seed: int = 0
    precond: Preconditioner | None = None
    sub: SubsolverConfig | None = None
    record_iterates: bool = False
    # optional trace-driven termination: stop once the objective falls to
    # stop_below, or abort (recording the last value) if it exceeds
    # abort_above or turns non-finite
    stop_below: float | None = None
    abort_above: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.eta <= 0:
            raise ValueError("step size eta must be positive")
        if self.m < 1:
            raise ValueError("epoch-length parameter m must be >= 1")
        if self.epochs < 0:
            raise ValueError("epoch count must be nonnegative")
        if self.epoch_mode not in ("fixed", "geometric"):
            raise ValueError(f"unknown epoch mode {self.epoch_mode!r}")
        if self.tau is not None and not 0.0 < self.tau <= 1.0:
            raise ValueError("momentum weight tau must lie in (0, 1]")
        if self.method in _CLASSICAL and self.precond is not None \
                and self.precond.kind != "identity":
            raise ValueError(f"{self.method} runs in the Euclidean metric; "
                             "drop the preconditioner or use its preconditioned variant")


@dataclass
class RunTrace:
    """Per-epoch record of a run.

    All counters are cumulative.  Gradient evaluations count component
    gradients only (n per anchor, 2 per inner step); the once-per-epoch
    objective evaluation is bookkeeping and excluded, as is trace writing.
    Wall time covers the algorithm work of each epoch.  Row 0 is the initial
    point.
    """

    epoch: list[int] = field(default_factory=list)
    grad_evals: list[int] = field(default_factory=list)
    matvecs: list[int] = field(default_factory=list)
    prox_calls: list[int] = field(default_factory=list)
    wall_s: list[float] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    x_final: np.ndarray | None = None
    iterates: list[np.ndarray] | None = None
    warnings: list[str] = field(default_factory=list)

    def append(self, epoch, grad_evals, matvecs, prox_calls, wall_s, objective):
        self.epoch.append(int(epoch))
        self.grad_evals.append(int(grad_evals))
        self.matvecs.append(int(matvecs))
        self.prox_calls.append(int(prox_calls))
        self.wall_s.append(float(wall_s))
        self.objective.append(float(objective))

    def suboptimality(self, f_star: float) -> np.ndarray:
        return np.asarray(self.objective) - f_star


def sample_epoch_length(mode: str, m: int, rng: np.random.Generator) -> int:
    """Number of inner steps minus one for the next epoch.

    "fixed" returns m-1 deterministically; "geometric" draws from the
    geometric distribution on {0, 1, ...} with success probability 1/m, whose
    mean is also m-1.  The inner loop then runs D+1 steps.
    """
    if m < 1:
        raise ValueError("epoch-length parameter m must be >= 1")
    if mode == "fixed":
        return m - 1
    if mode == "geometric":
        # numpy's geometric counts trials on {1, 2, ...}; shift to failures
        return int(rng.geometric(1.0 / m)) - 1
    raise ValueError(f"unknown epoch mode {mode!r}")


def variance_reduced_gradient(g, prob, i, w_t, w_0) -> np.ndarray:
    """g + grad_i(w_t) - grad_i(w_0): unbiased for the full gradient at w_t.

    ``g`` must be the full gradient at the anchor ``w_0``.  Costs two
    component-gradient evaluations.
    """
    return g + prob.component_gradient(i, w_t) - prob.component_gradient(i, w_0)


def momentum_step(y_k, x_k, y_km1, tau: float) -> np.ndarray:
    """Affine extrapolation (1.5*y_k + 0.5*x_k - (1-tau)*y_{k-1}) / (1+tau)."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("momentum weight tau must lie in (0, 1]")
    return (1.5 * y_k + 0.5 * x_k - (1.0 - tau) * y_km1) / (1.0 + tau)


def default_momentum_weight(m: int, eta: float, sigma_metric: float) -> float:
    """The analysis' momentum weight 0.5*sqrt(0.5*m*eta*sigma), unclamped."""
    return 0.5 * math.sqrt(0.5 * m * eta * sigma_metric)


def _resolve_run(prob, reg, cfg: SolverConfig):
    """Inner-step closure and per-step costs for a run."""
    classical = cfg.method in _CLASSICAL
    if classical:
        eta = cfg.eta

        def inner(anchor, grad):
            return reg.prox(anchor - eta * grad, eta)

        return inner, (0, 1)  # no metric matvec in the classical step
    precond = cfg.precond if cfg.precond is not None else Preconditioner.identity(prob.d)
    if cfg.sub is not None:
        subcfg = cfg.sub
    elif precond.kind == "dense":
        subcfg = SubsolverConfig(engine="fista", p=20)
    else:
        subcfg = SubsolverConfig(engine="diagonal_exact", p=1)
    return make_inner_solver(cfg.eta, precond, reg, subcfg), subsolve_cost(subcfg, precond)


def _spawn_streams(seed: int):
    len_seq, idx_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(len_seq), np.random.default_rng(idx_seq)


def _svrg_epoch(prob, x, cfg, inner, rng_len, rng_idx):
    """One anchor + D+1 stochastic steps; returns (iterate, grads, steps)."""
    big_d = sample_epoch_length(cfg.epoch_mode, cfg.m, rng_len)
    g = prob.full_gradient(x)
    idx = rng_idx.integers(0, prob.n, size=big_d + 1)
    w = x
    for i in idx:
        vr = variance_reduced_gradient(g, prob, int(i), w, x)
        w = inner(w, vr)
    return w, prob.n + 2 * (big_d + 1), big_d + 1


def _should_stop(cfg: SolverConfig, objective: float) -> bool:
    if not math.isfinite(objective):
        return True
    if cfg.stop_below is not None and objective <= cfg.stop_below:
        return True
    return cfg.abort_above is not None and objective > cfg.abort_above


def run_ipresvrg(prob, reg: Regularizer, cfg: SolverConfig, x0=None) -> RunTrace:
    """K epochs of (inexactly preconditioned) variance-reduced descent.

    With method "svrg" this is the classical prox-SVRG loop; with
    "ipresvrg" each inner step solves the metric proximal subproblem
    inexactly.  Starts at zero unless ``x0`` is given.
    """
    if cfg.method not in ("svrg", "ipresvrg"):
        raise ValueError(f"run_ipresvrg cannot run method {cfg.method!r}")
    inner, step_cost = _resolve_run(prob, reg, cfg)
    rng_len, rng_idx = _spawn_streams(cfg.seed)
    x = np.zeros(prob.d) if x0 is None else np.array(x0, dtype=float)

    trace = RunTrace(iterates=[] if cfg.record_iterates else None)
    grads = matvecs = proxes = 0
    wall = 0.0
    trace.append(0, 0, 0, 0, 0.0, objective_value(prob, reg, x))
    if cfg.record_iterates:
        trace.iterates.append(x.copy())
    for k in range(cfg.epochs):
        t0 = time.perf_counter()
        x, epoch_grads, steps = _svrg_epoch(prob, x, cfg, inner, rng_len, rng_idx)
        wall += time.perf_counter() - t0
        grads += epoch_grads
        matvecs += steps * step_cost[0]
        proxes += steps * step_cost[1]
        obj = objective_value(prob, reg, x)
        trace.append(k + 1, grads, matvecs, proxes, wall, obj)
        if cfg.record_iterates:
            trace.iterates.append(x.copy())
        if _should_stop(cfg, obj):
            break
    trace.x_final = x
    return trace


def run_iprekatx(prob, reg: Regularizer, cfg: SolverConfig, x0=None,
                 sigma_metric: float | None = None) -> RunTrace:
    """Momentum outer loop: extrapolate, then run one epoch from that point.

    With method "katyushax" the epoch takes the classical exact step.  The
    momentum weight comes from ``cfg.tau``; when that is None it defaults to
    0.5*sqrt(0.5*m*eta*sigma_metric), clamped to 1 with a recorded warning if
    the formula exceeds it.  The trace reports the objective at the epoch
    outputs y_k.
    """
    if cfg.method not in ("katyushax", "iprekatx"):
        raise ValueError(f"run_iprekatx cannot run method {cfg.method!r}")
    inner, step_cost = _resolve_run(prob, reg, cfg)
    rng_len, rng_idx = _spawn_streams(cfg.seed)
    x_start = np.zeros(prob.d) if x0 is None else np.array(x0, dtype=float)

    trace = RunTrace(iterates=[] if cfg.record_iterates else None)
    if cfg.tau is not None:
        tau = cfg.tau
    else:
        if sigma_metric is None:
            raise ValueError("either cfg.tau or sigma_metric is required")
        tau = default_momentum_weight(cfg.m, cfg.eta, sigma_metric)
        if tau > 1.0:
            trace.warnings.append(
                f"momentum weight formula gave {tau:.6g} > 1; clamped to 1")
            tau = 1.0

    y_prev = x_start.copy()   # y_{k-1}
    y = x_start.copy()        # y_k
    x = x_start               # x_k
    grads = matvecs = proxes = 0
    wall = 0.0
    trace.append(0, 0, 0, 0, 0.0, objective_value(prob, reg, y))
    if cfg.record_iterates:
        trace.iterates.append(y.copy())
    for k in range(cfg.epochs):
        t0 = time.perf_counter()
        x_next = momentum_step(y, x, y_prev, tau)
        y_next, epoch_grads, steps = _svrg_epoch(prob, x_next, cfg, inner,
                                                 rng_len, rng_idx)
        wall += time.perf_counter() - t0
        y_prev, y, x = y, y_next, x_next
        grads += epoch_grads
        matvecs += steps * step_cost[0]
        proxes += steps * step_cost[1]
        obj = objective_value(prob, reg, y)
        trace.append(k + 1, grads, matvecs, proxes, wall, obj)
        if cfg.record_iterates:
            trace.iterates.append(y.copy())
        if _should_stop(cfg, obj):
            break
    trace.x_final = y
    return trace


def run_solver(prob, reg: Regularizer, cfg: SolverConfig, x0=None,
               sigma_metric: float | None = None) -> RunTrace:
    """Dispatch on cfg.method."""
    if cfg.method in ("svrg", "ipresvrg"):
        return run_ipresvrg(prob, reg, cfg, x0=x0)
    return run_iprekatx(prob, reg, cfg, x0=x0, sigma_metric=sigma_metric)
