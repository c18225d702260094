"""Command-line driver.

Subcommands:

* ``run <config> [--reference FILE]`` - one experiment, trace CSV + sidecar.
* ``bench <config-dir>`` - run every ``*.cfg`` in a directory and print a
  baseline-vs-preconditioned speedup table (epochs and wall time to target).
* ``gen-synthetic --n --d --seed --out`` - materialize the synthetic
  sum-of-nonconvex instance.
* ``reference <config> --tol [--out FILE]`` - high-accuracy optimum as JSON.
* ``analyze --n --d --kappa-f --kappa-m --kappa-fm`` - budget, certificate
  and complexity report from the closed-form constants.

Exit codes: 0 success, 1 configuration or data error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from ..metric import EigenConvergenceError
from ..problems import gen_sum_of_nonconvex
from ..theory import (c_fista_restart, gradient_complexity, required_p,
                      required_p_raw, speedup_regime)
from .config import ConfigError, load_config
from .datasets import LibsvmParseError
from .experiment import (NumericalError, build_run, load_reference,
                         run_experiment, save_synthetic, write_reference)
from .reference import compute_reference_optimum

__all__ = ["main"]


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    trace, csv_path, meta_path = run_experiment(cfg, reference_path=args.reference)
    print(f"wrote {csv_path} and {meta_path} "
          f"({len(trace.epoch) - 1} epochs, final objective {trace.objective[-1]:.6g})")
    for note in trace.warnings:
        print(f"warning: {note}")
    return 0


def _epochs_to_target(trace, target: float):
    for k, obj in zip(trace.epoch, trace.objective):
        if obj <= target:
            return k, trace.wall_s[k]
    return None, None


_BASELINE_OF = {"ipresvrg": "svrg", "iprekatx": "katyushax"}


def _cmd_bench(args) -> int:
    paths = sorted(Path(args.config_dir).glob("*.cfg"))
    if not paths:
        raise ConfigError("config-dir", f"no *.cfg files under {args.config_dir}")
    runs = {}
    problems = {}
    for path in paths:
        cfg = load_config(str(path))
        prob, reg, solver_cfg = build_run(cfg)
        trace, _, _ = run_experiment(cfg)
        group = (cfg.problem_kind, cfg.data_path, cfg.synthetic_n, cfg.synthetic_d,
                 cfg.synthetic_seed, cfg.reg_l1, cfg.reg_l2)
        runs.setdefault(group, {})[cfg.solver_method] = trace
        problems.setdefault(group, (prob, reg))
        print(f"ran {path.name}: {cfg.solver_method}, "
              f"final objective {trace.objective[-1]:.6g}")

    print()
    print(f"speedup summary (target: suboptimality <= {args.target:g} of the "
          f"initial gap; '>' means the baseline never reached it)")
    header = (f"{'problem':<18} {'pair':<22} {'ep_base':>8} {'ep_pre':>7} "
              f"{'ep_ratio':>9} {'wall_ratio':>11}")
    print(header)
    print("-" * len(header))
    for group, by_method in runs.items():
        prob, reg = problems[group]
        ref = compute_reference_optimum(prob, reg, tol=args.reference_tol)
        for pre_name, base_name in _BASELINE_OF.items():
            if pre_name not in by_method or base_name not in by_method:
                continue
            pre, base = by_method[pre_name], by_method[base_name]
            gap0 = base.objective[0] - ref.f_star
            target = ref.f_star + args.target * gap0
            ep_b, wall_b = _epochs_to_target(base, target)
            ep_p, wall_p = _epochs_to_target(pre, target)
            label = f"{base_name}->{pre_name}"
            prob_label = group[0][:18]
            if ep_p is None:
                print(f"{prob_label:<18} {label:<22} {'-':>8} {'-':>7} "
                      f"{'n/a':>9} {'n/a':>11}  (preconditioned run missed target)")
                continue
            if ep_b is None:
                cap = base.epoch[-1]
                ratio = cap / max(ep_p, 1)
                print(f"{prob_label:<18} {label:<22} {'>' + str(cap):>8} {ep_p:>7} "
                      f"{'>' + format(ratio, '.2f'):>9} {'n/a':>11}")
                continue
            ep_ratio = ep_b / max(ep_p, 1)
            wall_ratio = wall_b / wall_p if wall_p and wall_p > 0 else float("inf")
            print(f"{prob_label:<18} {label:<22} {ep_b:>8} {ep_p:>7} "
                  f"{ep_ratio:>9.2f} {wall_ratio:>11.2f}")
    return 0


def _cmd_gen_synthetic(args) -> int:
    prob = gen_sum_of_nonconvex(args.n, args.d, args.seed)
    path = save_synthetic(prob, args.out, args.seed)
    print(f"wrote {path} (n={prob.n}, d={prob.d}, seed={args.seed})")
    return 0


def _cmd_reference(args) -> int:
    cfg = load_config(args.config)
    prob, reg, _ = build_run(cfg)
    result = compute_reference_optimum(prob, reg, tol=args.tol)
    out = args.out or cfg.output_path + ".ref.json"
    write_reference(result, out, args.tol)
    print(f"wrote {out} (f_star={result.f_star:.17g}, residual={result.residual:.3e}, "
          f"{result.iterations} iterations)")
    return 0


def _cmd_analyze(args) -> int:
    p = required_p(args.kappa_m, args.kappa_fm)
    raw = required_p_raw(args.kappa_m, args.kappa_fm)
    c, p0, rho = c_fista_restart(p, args.kappa_m)
    report = speedup_regime(args.n, args.d, args.kappa_f)

    print("inner-solver budget (restarted accelerated iterations)")
    print(f"  restart block p0          : {p0}")
    print(f"  per-iteration contraction : {rho:.6f}")
    print(f"  required p (raw)          : {raw:.2f}")
    print(f"  required p (whole blocks) : {p}")
    print(f"  residual constant c(p)    : {c:.6e}")
    print(f"  certificate 64*kfm*c^2    : {64 * args.kappa_fm * c * c:.6e} (<= 1)")
    print()

    m_pre = max(1, int(np.ceil(args.n / (1 + p * args.d))))
    # theory step sizes make m*eta*sigma = sqrt(m)/(2*kappa) in each metric
    pre = gradient_complexity("ipresvrg", args.n, args.d, m_pre,
                              1.0 / (2.0 * np.sqrt(m_pre) * args.kappa_fm), 1.0,
                              p, args.eps)
    grid = np.unique(np.geomspace(1, 4 * args.n, 200).astype(int))
    base = min(gradient_complexity("svrg", args.n, args.d, int(m),
                                   1.0 / (2.0 * np.sqrt(m) * args.kappa_f), 1.0,
                                   0, args.eps)
               for m in grid)
    print("gradient complexity, order estimates with constant 1 (non-rigorous)")
    print(f"  preconditioned svrg-type at m={m_pre}: {pre:.4e}")
    print(f"  classical svrg-type at its best m   : {base:.4e}")
    print(f"  estimated ratio                      : {pre / base:.4e}")
    print()
    print(f"speedup regime: {report.regime}")
    if report.svrg_type_ratio is not None:
        print(f"  predicted svrg-type ratio bound     : {report.svrg_type_ratio:.4e}")
        print(f"  predicted momentum-type ratio bound : {report.katx_type_ratio:.4e}")
    print(f"  note: {report.note}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ipsvrg",
        description="Variance-reduced stochastic optimization with inexact "
                    "fixed preconditioning: experiment runner and analysis tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single experiment from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--reference", default=None,
                       help="reference JSON (adds the subopt column)")
    p_run.set_defaults(func=_cmd_run)

    p_bench = sub.add_parser("bench", help="run all *.cfg in a directory and "
                                           "print a speedup summary")
    p_bench.add_argument("config_dir")
    p_bench.add_argument("--target", type=float, default=1e-6,
                         help="relative suboptimality target (default 1e-6)")
    p_bench.add_argument("--reference-tol", type=float, default=1e-10)
    p_bench.set_defaults(func=_cmd_bench)

    p_gen = sub.add_parser("gen-synthetic",
                           help="generate the synthetic sum-of-nonconvex instance")
    p_gen.add_argument("--n", type=int, default=2000)
    p_gen.add_argument("--d", type=int, default=100)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_gen_synthetic)

    p_ref = sub.add_parser("reference",
                           help="compute a high-accuracy optimum for a config")
    p_ref.add_argument("config")
    p_ref.add_argument("--tol", type=float, default=1e-12)
    p_ref.add_argument("--out", default=None)
    p_ref.set_defaults(func=_cmd_reference)

    p_an = sub.add_parser("analyze",
                          help="budget/certificate/complexity report")
    p_an.add_argument("--n", type=int, required=True)
    p_an.add_argument("--d", type=int, required=True)
    p_an.add_argument("--kappa-f", dest="kappa_f", type=float, required=True)
    p_an.add_argument("--kappa-m", dest="kappa_m", type=float, required=True)
    p_an.add_argument("--kappa-fm", dest="kappa_fm", type=float, required=True)
    p_an.add_argument("--eps", type=float, default=1e-3)
    p_an.set_defaults(func=_cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, LibsvmParseError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, EigenConvergenceError, RuntimeError,
            FloatingPointError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
