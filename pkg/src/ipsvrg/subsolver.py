"""Inexact solvers for the preconditioned proximal subproblem.

Each inner step of the preconditioned outer loops must (approximately)
minimize

    Psi(y) = psi(y) + (1/(2*eta)) * ||y - w||_M^2 + <g, y>

over y, where w is the current iterate and g the variance-reduced gradient.
Rather than solving this exactly, a fixed number p of simple iterations is
applied, always initialized at w: plain proximal gradient, FISTA, or FISTA
with periodic momentum restarts.  When M is diagonal (or the identity) the
minimizer has a coordinatewise closed form and is computed exactly.

``subproblem_residual`` materializes a certified bound on how far a candidate
output is from stationarity, measured in the M-norm of the implicit error
term; pairing it with the contraction constants in :mod:`ipsvrg.theory`
reproduces the error-bound certificates the convergence analysis relies on.

The outer loops call these solvers millions of times, so
:func:`make_inner_solver` pre-resolves defaults into a tight closure; the
one-shot functions below are thin wrappers over the same code path, which
keeps their outputs bitwise identical to the solvers'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metric import Preconditioner
from .problems import Regularizer

__all__ = [
    "SubproblemSpec",
    "SubsolverConfig",
    "make_inner_solver",
    "solve_subproblem",
    "subsolve_cost",
    "diagonal_exact",
    "prox_grad_engine",
    "fista_engine",
    "fista_restart_engine",
    "subproblem_residual",
    "default_restart_block",
]

ENGINES = ("prox_grad", "fista", "fista_restart", "diagonal_exact")


@dataclass(frozen=True)
class SubproblemSpec:
    """One instance of the inner problem: anchor, linear term, step, geometry."""

    anchor: np.ndarray          # w, the quadratic term's center
    grad: np.ndarray            # g, the linear term
    eta: float                  # outer step size
    precond: Preconditioner
    reg: Regularizer

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("outer step size eta must be positive")
        d = self.precond.dim
        if self.anchor.shape != (d,) or self.grad.shape != (d,):
            raise ValueError("anchor/gradient dimensions do not match the preconditioner")

    def grad_quadratic(self, y: np.ndarray) -> np.ndarray:
        """Gradient of the smooth part: (1/eta) * M (y - anchor) + g."""
        return self.precond.apply(y - self.anchor) / self.eta + self.grad

    def smooth_part(self, y: np.ndarray) -> float:
        diff = y - self.anchor
        return 0.5 * self.precond.m_norm(diff) ** 2 / self.eta + float(self.grad @ y)

    def value(self, y: np.ndarray) -> float:
        return self.smooth_part(y) + self.reg.value(y)


@dataclass(frozen=True)
class SubsolverConfig:
    """Engine choice and iteration budget for the inner solves.

    ``gamma`` overrides the engine's certified default step
    (eta*lambda_min/lambda_max^2 for prox_grad, eta/lambda_max for the FISTA
    variants).  ``restart_block`` overrides the default restart period.  When
    ``certified_blocks`` is set, a fista_restart budget that is not a whole
    number of blocks is rounded up to one; otherwise exactly p iterations run
    and the final block is truncated.
    """

    engine: str = "fista"
    p: int = 20
    gamma: float | None = None
    restart_block: int | None = None
    certified_blocks: bool = True

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}; expected one of {ENGINES}")
        if self.p < 1:
            raise ValueError("iteration budget p must be >= 1")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma override must be positive")
        if self.restart_block is not None and self.restart_block < 1:
            raise ValueError("restart block must be >= 1")


def default_restart_block(cond: float) -> int:
    """Restart period ceil(2*e*sqrt(cond)) that balances the per-block contraction."""
    return int(math.ceil(2.0 * math.e * math.sqrt(cond)))


def _resolved_plan(cfg: SubsolverConfig, precond: Preconditioner):
    """(total iterations, block length) an iterative config runs against M."""
    if cfg.engine == "prox_grad":
        return cfg.p, cfg.p
    if cfg.engine == "fista":
        return cfg.p, cfg.p
    p0 = cfg.restart_block or default_restart_block(precond.cond)
    if cfg.certified_blocks:
        return p0 * math.ceil(cfg.p / p0), p0
    return cfg.p, p0


def _make_exact_diagonal(eta, precond, reg):
    m_diag = precond.diagonal_entries()
    if reg.kind == "zero":
        def solver(anchor, grad):
            return anchor - eta * grad / m_diag
    else:
        thresh = eta * reg.lambda1 / m_diag

        def solver(anchor, grad):
            base = anchor - eta * grad / m_diag
            return np.sign(base) * np.maximum(np.abs(base) - thresh, 0.0)
    return solver


def _make_iterative(eta, precond, reg, gamma, total, block, accelerated):
    """Closure running `total` prox-gradient or accelerated steps from the anchor.

    Momentum (when accelerated) restarts every `block` steps: theta resets to
    one and only the last iterate crosses the boundary.
    """
    kind = precond.kind
    mat = precond.mat if kind == "dense" else None
    entries = precond.entries if kind == "diagonal" else None
    l1 = reg.lambda1 if reg.kind == "l1" else None
    gl = gamma * l1 if l1 is not None else None

    def grad_quad(y, anchor, grad):
        diff = y - anchor
        if mat is not None:
            mv = mat @ diff
        elif entries is not None:
            mv = entries * diff
        else:
            mv = diff
        return mv / eta + grad

    def prox_step(u, anchor, grad):
        z = u - gamma * grad_quad(u, anchor, grad)
        if gl is None:
            return z
        return np.sign(z) * np.maximum(np.abs(z) - gl, 0.0)

    if not accelerated:
        def solver(anchor, grad):
            w = anchor
            for _ in range(total):
                w = prox_step(w, anchor, grad)
            return w
        return solver

    def solver(anchor, grad):
        w_block = anchor
        done = 0
        while done < total:
            span = min(block, total - done)
            w_prev = w_block
            u = w_block
            theta = 1.0
            for _ in range(span):
                w_new = prox_step(u, anchor, grad)
                theta_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
                u = w_new + ((theta - 1.0) / theta_new) * (w_new - w_prev)
                w_prev = w_new
                theta = theta_new
            w_block = w_prev
            done += span
        return w_block
    return solver


def make_inner_solver(eta: float, precond: Preconditioner, reg: Regularizer,
                      cfg: SubsolverConfig):
    """Pre-resolve a config into a fast ``(anchor, grad) -> w_plus`` closure.

    Deterministic: identical inputs give bitwise-identical outputs.
    """
    if eta <= 0:
        raise ValueError("outer step size eta must be positive")
    if cfg.engine == "diagonal_exact":
        if precond.kind == "dense":
            raise ValueError("diagonal_exact requires a diagonal or identity preconditioner")
        return _make_exact_diagonal(eta, precond, reg)
    if cfg.engine == "prox_grad":
        gamma = cfg.gamma if cfg.gamma is not None \
            else eta * precond.lambda_min / precond.lambda_max ** 2
        return _make_iterative(eta, precond, reg, gamma, cfg.p, cfg.p, False)
    gamma = cfg.gamma if cfg.gamma is not None else eta / precond.lambda_max
    total, block = _resolved_plan(cfg, precond)
    return _make_iterative(eta, precond, reg, gamma, total, block, True)


def subsolve_cost(cfg: SubsolverConfig, precond: Preconditioner) -> tuple[int, int]:
    """(M-matvecs, prox calls) one subproblem solve costs under this config."""
    if cfg.engine == "diagonal_exact":
        return 1, 1
    total, _ = _resolved_plan(cfg, precond)
    return total, total


def solve_subproblem(spec: SubproblemSpec, cfg: SubsolverConfig) -> np.ndarray:
    """Run the configured engine for its fixed budget, starting from the anchor."""
    return make_inner_solver(spec.eta, spec.precond, spec.reg, cfg)(spec.anchor, spec.grad)


def diagonal_exact(spec: SubproblemSpec) -> np.ndarray:
    """Exact coordinatewise minimizer, available when M is diagonal.

    With diagonal entries m_j the solution is
    ``soft(w_j - eta*g_j/m_j, eta*lambda1/m_j)`` per coordinate (no threshold
    for the zero regularizer).
    """
    if spec.precond.kind == "dense":
        raise ValueError("diagonal_exact requires a diagonal or identity preconditioner")
    return _make_exact_diagonal(spec.eta, spec.precond, spec.reg)(spec.anchor, spec.grad)


def prox_grad_engine(spec: SubproblemSpec, p: int, gamma: float | None = None) -> np.ndarray:
    """p proximal-gradient steps from the anchor.

    The default step gamma = eta*lambda_min/lambda_max^2 makes the iterates
    contract toward the subproblem minimizer at rate sqrt(1 - cond(M)^-2)
    per step.  Each step costs one M-matvec and one prox.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if gamma is None:
        gamma = spec.eta * spec.precond.lambda_min / spec.precond.lambda_max ** 2
    return _make_iterative(spec.eta, spec.precond, spec.reg, gamma, p, p,
                           False)(spec.anchor, spec.grad)


def fista_engine(spec: SubproblemSpec, p: int, gamma: float | None = None) -> np.ndarray:
    """Plain FISTA: p accelerated steps, no restart."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if gamma is None:
        gamma = spec.eta / spec.precond.lambda_max
    return _make_iterative(spec.eta, spec.precond, spec.reg, gamma, p, p,
                           True)(spec.anchor, spec.grad)


def fista_restart_engine(spec: SubproblemSpec, p0: int, r: int,
                         gamma: float | None = None) -> np.ndarray:
    """r blocks of p0 FISTA steps; momentum and theta reset at each block.

    Only the last iterate crosses a block boundary.  The default
    gamma = eta/lambda_max(M) together with p0 = ceil(2e*sqrt(cond(M)))
    yields a per-block contraction sqrt(4*cond(M)/p0^2) < 1 on the iterates.
    """
    if p0 < 1 or r < 1:
        raise ValueError("need p0 >= 1 and r >= 1")
    if gamma is None:
        gamma = spec.eta / spec.precond.lambda_max
    return _make_iterative(spec.eta, spec.precond, spec.reg, gamma, r * p0, p0,
                           True)(spec.anchor, spec.grad)


def subproblem_residual(spec: SubproblemSpec, w_plus: np.ndarray) -> float:
    """Certified stationarity residual of a candidate subproblem solution.

    Writes the optimality condition of the subproblem as
    ``0 in dpsi(w+) + (1/eta) M (w+ - w) + g + M*eps`` and returns ||eps||_M
    for the canonical subgradient choice: q = -(1/eta) M (w+ - w) - g is
    projected coordinatewise onto the subdifferential of psi at w+ (the
    interval [-lambda1, lambda1] at zeros, the signed endpoint elsewhere),
    which minimizes each coordinate of q - s.  The exact minimizer returns 0.
    """
    w_plus = np.asarray(w_plus, dtype=float)
    q = -spec.precond.apply(w_plus - spec.anchor) / spec.eta - spec.grad
    s = spec.reg.subgradient_project(q, w_plus)
    diff = q - s
    eps = spec.precond.solve(diff)
    return float(np.sqrt(max(float(eps @ diff), 0.0)))
