"""Closed-form certificates and complexity estimates for the solvers.

Everything here is a pure function of condition numbers and loop parameters:
the contraction constants c(p) that bound the inner solver's stationarity
residual, the inner-iteration budget that makes the outer analysis go
through, the per-epoch rate factors, and order-of-magnitude gradient
complexity comparisons between the classical and preconditioned methods.

All big-O expressions are evaluated with constant 1 and must be read as
order estimates, not rigorous operation counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .subsolver import default_restart_block

__all__ = [
    "ConditioningSummary",
    "SpeedupReport",
    "c_proxgrad",
    "c_fista_restart",
    "required_p",
    "required_p_raw",
    "rate_factor",
    "gradient_complexity",
    "speedup_regime",
]

# certificate constant: the budget rule targets 64 * kappa_fM * c(p)^2 <= 1
# with c(p) = 14*kappa_M*tau^p/(1-tau^p), hence c1 = 1/(64*14^2).
_C1 = 1.0 / (64.0 * 14.0 ** 2)


@dataclass(frozen=True)
class ConditioningSummary:
    """Condition numbers of one problem/preconditioner pairing."""

    kappa_m: float        # condition number of the preconditioner
    kappa_f: float        # Euclidean condition number of the smooth part
    kappa_f_m: float      # condition number measured in the M-norm
    smoothness_m: float   # L under the M-norm
    strong_convexity_m: float
    n: int
    d: int

    def __post_init__(self):
        for name in ("kappa_m", "kappa_f", "kappa_f_m"):
            if getattr(self, name) < 1.0:
                raise ValueError(f"{name} must be >= 1")
        if self.smoothness_m <= 0 or self.strong_convexity_m <= 0:
            raise ValueError("metric smoothness constants must be positive")
        ratio = self.smoothness_m / self.strong_convexity_m
        if not math.isclose(ratio, self.kappa_f_m, rel_tol=1e-9):
            raise ValueError("kappa_f_m must equal smoothness_m / strong_convexity_m")


def c_proxgrad(p: int, kappa_m: float) -> float:
    """Residual constant of p proximal-gradient inner steps.

    c(p) = (kappa+1)*kappa*(tau^p + tau^(p-1)) / (1 - tau^p) with
    tau = sqrt(1 - kappa^-2).  A perfectly conditioned metric (kappa = 1)
    solves the subproblem in one step, so c is identically zero there.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if kappa_m < 1.0:
        raise ValueError("kappa_m must be >= 1")
    if kappa_m == 1.0:
        return 0.0
    tau = math.sqrt(1.0 - kappa_m ** -2)
    tp = tau ** p
    return (kappa_m + 1.0) * kappa_m * (tp + tau ** (p - 1)) / (1.0 - tp)


def c_fista_restart(p: int, kappa_m: float) -> tuple[float, int, float]:
    """Residual constant of p restarted-FISTA inner steps.

    Returns (c(p), p0, rho) where p0 = ceil(2e*sqrt(kappa)) is the restart
    block, rho = (4*kappa/p0^2)^(1/(2*p0)) the per-iteration contraction, and
    c(p) = 14*kappa*rho^p / (1 - rho^p).
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if kappa_m < 1.0:
        raise ValueError("kappa_m must be >= 1")
    p0 = default_restart_block(kappa_m)
    rho = (4.0 * kappa_m / p0 ** 2) ** (1.0 / (2.0 * p0))
    bound = math.exp(-1.0 / (2.0 * math.e * math.sqrt(kappa_m) + 1.0))
    if rho > bound * (1.0 + 1e-12):
        raise AssertionError(
            f"contraction rate {rho} exceeded its certified bound {bound}")
    rp = rho ** p
    return 14.0 * kappa_m * rp / (1.0 - rp), p0, rho


def required_p_raw(kappa_m: float, kappa_f_m: float) -> float:
    """Pre-rounding inner-iteration budget for the outer analysis to hold."""
    if kappa_m < 1.0 or kappa_f_m < 1.0:
        raise ValueError("condition numbers must be >= 1")
    ratio = (math.sqrt(kappa_f_m) * kappa_m + math.sqrt(_C1)) / _C1
    return (2.0 * math.e * math.sqrt(kappa_m) + 1.0) * math.log(ratio)


def required_p(kappa_m: float, kappa_f_m: float) -> int:
    """Smallest certified whole-block budget p with 64*kappa_fM*c(p)^2 <= 1.

    Rounds the raw budget up to a multiple of the restart block (the
    contraction constant is only certified for whole blocks) and verifies the
    certificate on the result; a failure here would be an internal defect,
    not a user error.
    """
    raw = required_p_raw(kappa_m, kappa_f_m)
    p0 = default_restart_block(kappa_m)
    p = p0 * max(1, math.ceil(raw / p0))
    c, _, _ = c_fista_restart(p, kappa_m)
    if 64.0 * kappa_f_m * c * c > 1.0:
        raise AssertionError(
            "internal defect: rounded budget failed its own certificate "
            f"(kappa_m={kappa_m}, kappa_f_m={kappa_f_m}, p={p})")
    return p


def rate_factor(method: str, m: int, eta: float, sigma_metric: float) -> float:
    """Per-epoch contraction factor of the expected suboptimality.

    "svrg_like" gives 1/(1 + m*eta*sigma/4); "katx_like" gives
    1/(1 + 0.5*sqrt(0.5*m*eta*sigma)).
    """
    prog = m * eta * sigma_metric
    if prog <= 0:
        raise ValueError("m*eta*sigma must be positive")
    if method == "svrg_like":
        return 1.0 / (1.0 + 0.25 * prog)
    if method == "katx_like":
        return 1.0 / (1.0 + 0.5 * math.sqrt(0.5 * prog))
    raise ValueError(f"unknown rate family {method!r}")


def gradient_complexity(variant: str, n: int, d: int, m: int, eta: float,
                        sigma: float, p: int, eps: float) -> float:
    """Order estimate of component-gradient evaluations to eps-suboptimality.

    Per epoch the classical methods cost n+m gradient evaluations; the
    preconditioned ones cost n + (1+p*d)*m, charging each inner iteration at
    d evaluations.  Dividing by the log of the per-epoch progress and scaling
    by log(1/eps) gives the bracketed complexity expression with constant 1
    (an order estimate only).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if min(n, m) < 1 or d < 1 or eta <= 0 or sigma <= 0 or p < 0:
        raise ValueError("sizes and constants must be positive")
    prog = m * eta * sigma
    if variant in ("svrg", "katx"):
        per_epoch = n + m
    elif variant in ("ipresvrg", "iprekatx"):
        per_epoch = n + (1 + p * d) * m
    else:
        raise ValueError(f"unknown variant {variant!r}")
    if variant in ("svrg", "ipresvrg"):
        denom = math.log1p(0.25 * prog)
    else:
        denom = math.log1p(0.5 * math.sqrt(0.5 * prog))
    return per_epoch / denom * math.log(1.0 / eps)


@dataclass(frozen=True)
class SpeedupReport:
    """Predicted preconditioned-vs-classical complexity ratios.

    The bounds assume the preconditioner tracks the problem's curvature:
    cond(M) of the same order as kappa_f, with the metric condition number
    small against both.  That premise is reported, not enforced.
    """

    regime: str                   # "no-guarantee", "regime-1", "regime-2"
    svrg_type_ratio: float | None
    katx_type_ratio: float | None
    note: str


def speedup_regime(n: int, d: int, kappa_f: float) -> SpeedupReport:
    """Classify (n, d, kappa_f) into the predicted speedup regimes.

    No speedup is guaranteed for kappa_f <= sqrt(n).  Between sqrt(n) and
    n^2/d^2 the predicted complexity ratios are sqrt(n)/kappa_f (svrg-type)
    and sqrt(sqrt(n)/kappa_f) (momentum-type); beyond n^2/d^2 they become
    d/sqrt(n*kappa_f) and d/n^(3/4).  All ratios are order estimates.
    """
    if n < 1 or d < 1 or kappa_f < 1:
        raise ValueError("n, d and kappa_f must be >= 1")
    root_n = math.sqrt(n)
    crossover = n ** 2 / d ** 2
    note = ("assumes cond(M) ~ kappa_f with the metric condition number small "
            "against both; order estimates with constant 1")
    if kappa_f <= root_n:
        return SpeedupReport("no-guarantee", None, None,
                             f"kappa_f <= sqrt(n)={root_n:g}; no speedup guarantee. " + note)
    if kappa_f < crossover:
        return SpeedupReport("regime-1",
                             root_n / kappa_f,
                             math.sqrt(root_n / kappa_f),
                             note)
    return SpeedupReport("regime-2",
                         d / math.sqrt(n * kappa_f),
                         d / n ** 0.75,
                         note)
