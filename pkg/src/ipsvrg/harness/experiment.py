"""Experiment execution: problem assembly, solver dispatch, trace output.

Traces are CSV so they diff and plot without tooling; the header is exactly
``epoch,grad_evals,matvecs,prox_calls,wall_s,objective`` with an additional
``subopt`` column when a reference optimum is supplied.  Floats carry 17
significant digits.  A ``<output>.meta`` sidecar echoes every normative
configuration key with its fully resolved value plus the code version.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .. import __version__
from ..metric import Preconditioner
from ..problems import (LeastSquares, Logistic, NonconvexQuadSum, Regularizer,
                        build_preconditioner, gen_ill_conditioned_least_squares,
                        gen_logistic, gen_sum_of_nonconvex)
from ..solvers import RunTrace, SolverConfig, run_solver
from ..subsolver import SubsolverConfig
from .config import ConfigError, ExperimentConfig, NORMATIVE_KEYS
from .datasets import parse_libsvm

__all__ = ["NumericalError", "build_problem", "build_run", "run_experiment",
           "write_trace_csv", "save_synthetic", "load_reference",
           "write_reference"]


class NumericalError(RuntimeError):
    """The run produced a non-finite objective or failed numerically."""


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def save_synthetic(prob: NonconvexQuadSum, path: str, seed: int) -> str:
    """Persist a generated sum-of-nonconvex instance as an .npz archive."""
    if not path.endswith(".npz"):
        path = path + ".npz"
    np.savez(path, C=prob.C, d_sign=prob.d_sign, bvec=prob.bvec,
             seed=np.asarray(seed))
    return path


def _load_synthetic_npz(path: str) -> NonconvexQuadSum:
    with np.load(path) as data:
        return NonconvexQuadSum(data["C"], data["d_sign"], data["bvec"])


def build_problem(cfg: ExperimentConfig):
    """Load or generate the objective described by the config."""
    kind = cfg.problem_kind
    if cfg.data_path is not None:
        if kind == "sum_of_nonconvex":
            if not cfg.data_path.endswith(".npz"):
                raise ConfigError("data.path",
                                  "sum_of_nonconvex data must be a gen-synthetic .npz")
            return _load_synthetic_npz(cfg.data_path)
        ds = parse_libsvm(cfg.data_path)
        if ds.n == 0:
            raise ConfigError("data.path", "dataset is empty")
        if kind == "least_squares":
            return LeastSquares(ds.features, ds.labels, cfg.reg_l2)
        return Logistic(ds.features, ds.labels, cfg.reg_l2)
    n, d, seed = cfg.synthetic_n, cfg.synthetic_d, cfg.synthetic_seed
    if kind == "least_squares":
        return gen_ill_conditioned_least_squares(n, d, seed, lambda2=cfg.reg_l2)
    if kind == "logistic":
        return gen_logistic(n, d, seed, lambda2=cfg.reg_l2)
    return gen_sum_of_nonconvex(n, d, seed)


def build_run(cfg: ExperimentConfig):
    """Resolve the config into (problem, regularizer, solver config).

    Subsolver defaults depend on the preconditioner kind: one exact
    coordinatewise solve when it is diagonal, 20 accelerated iterations when
    it is dense.
    """
    prob = build_problem(cfg)
    reg = Regularizer.l1(cfg.reg_l1) if cfg.reg_l1 > 0 else Regularizer.zero()

    precond = None
    if cfg.precond_kind != "identity":
        if cfg.solver_method in ("svrg", "katyushax"):
            raise ConfigError("precond.kind",
                              f"{cfg.solver_method} does not take a preconditioner")
        precond = build_preconditioner(prob, cfg.precond_kind, cfg.precond_alpha)

    sub = None
    if cfg.solver_method in ("ipresvrg", "iprekatx"):
        engine = cfg.subsolver_engine
        if engine is None:
            engine = "fista" if (precond is not None and precond.kind == "dense") \
                else "diagonal_exact"
        p = cfg.subsolver_p
        if p is None:
            p = 20 if engine in ("fista", "fista_restart") else 1
        sub = SubsolverConfig(engine=engine, p=p, gamma=cfg.subsolver_gamma)

    solver_cfg = SolverConfig(
        method=cfg.solver_method,
        eta=cfg.solver_eta,
        m=cfg.solver_m,
        epochs=cfg.solver_epochs,
        epoch_mode=cfg.solver_epoch_mode,
        tau=cfg.solver_tau,
        seed=cfg.seed,
        precond=precond,
        sub=sub,
    )
    return prob, reg, solver_cfg


def _resolved_items(cfg: ExperimentConfig, solver_cfg: SolverConfig):
    """Every normative key with its resolved value, for the metadata sidecar."""
    sub = solver_cfg.sub
    values = {
        "problem.kind": cfg.problem_kind,
        "data.path": cfg.data_path if cfg.data_path is not None else "",
        "synthetic.n": cfg.synthetic_n if cfg.synthetic_n is not None else "",
        "synthetic.d": cfg.synthetic_d if cfg.synthetic_d is not None else "",
        "synthetic.seed": cfg.synthetic_seed if cfg.synthetic_seed is not None else "",
        "reg.l1": _fmt(cfg.reg_l1),
        "reg.l2": _fmt(cfg.reg_l2),
        "solver.method": cfg.solver_method,
        "solver.eta": _fmt(cfg.solver_eta),
        "solver.m": cfg.solver_m,
        "solver.epochs": cfg.solver_epochs,
        "solver.tau": _fmt(cfg.solver_tau) if cfg.solver_tau is not None else "",
        "solver.epoch_mode": cfg.solver_epoch_mode,
        "precond.kind": cfg.precond_kind,
        "precond.alpha": _fmt(cfg.precond_alpha) if cfg.precond_alpha is not None else "",
        "subsolver.engine": sub.engine if sub is not None else "",
        "subsolver.p": sub.p if sub is not None else "",
        "subsolver.gamma": _fmt(sub.gamma) if sub is not None and sub.gamma is not None else "",
        "seed": cfg.seed,
        "output.path": cfg.output_path,
    }
    return [(key, values[key]) for key in NORMATIVE_KEYS]


def write_trace_csv(trace: RunTrace, path: str, f_star: float | None = None) -> None:
    header = "epoch,grad_evals,matvecs,prox_calls,wall_s,objective"
    if f_star is not None:
        header += ",subopt"
    lines = [header]
    for i in range(len(trace.epoch)):
        row = (f"{trace.epoch[i]},{trace.grad_evals[i]},{trace.matvecs[i]},"
               f"{trace.prox_calls[i]},{_fmt(trace.wall_s[i])},{_fmt(trace.objective[i])}")
        if f_star is not None:
            row += f",{_fmt(trace.objective[i] - f_star)}"
        lines.append(row)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_metadata(cfg: ExperimentConfig, solver_cfg: SolverConfig, path: str) -> None:
    lines = [f"{key} = {value}" for key, value in _resolved_items(cfg, solver_cfg)]
    lines.append(f"version = {__version__}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_reference(result, path: str, tol: float) -> None:
    payload = {
        "f_star": result.f_star,
        "x_star": [float(v) for v in result.x_star],
        "residual": result.residual,
        "iterations": result.iterations,
        "tol": tol,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_reference(path: str) -> float:
    with open(path, "r", encoding="utf-8") as fh:
        return float(json.load(fh)["f_star"])


def run_experiment(cfg: ExperimentConfig, reference_path: str | None = None):
    """Run one configured experiment; returns (trace, csv_path, meta_path).

    The suboptimality column appears only when a reference file is supplied.
    A non-finite objective anywhere in the trace is a numerical failure.
    """
    prob, reg, solver_cfg = build_run(cfg)
    f_star = load_reference(reference_path) if reference_path else None
    trace = run_solver(prob, reg, solver_cfg)
    if not np.all(np.isfinite(trace.objective)):
        raise NumericalError(
            f"objective became non-finite during {cfg.solver_method} run")
    out = cfg.output_path
    out_dir = os.path.dirname(out)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    write_trace_csv(trace, out, f_star=f_star)
    meta_path = out + ".meta"
    _write_metadata(cfg, solver_cfg, meta_path)
    return trace, out, meta_path
