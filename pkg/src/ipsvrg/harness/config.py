"""Line-oriented ``key = value`` experiment configuration.

Only the normative keys below are accepted; anything else is rejected with
the offending key named, so typos fail loudly instead of silently running a
default.  ``#`` starts a comment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = ["ConfigError", "ExperimentConfig", "NORMATIVE_KEYS", "load_config",
           "parse_config_text"]


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, detail: str):
        super().__init__(f"config key {key!r}: {detail}")
        self.key = key
        self.detail = detail


PROBLEM_KINDS = ("least_squares", "logistic", "sum_of_nonconvex")
METHODS = ("svrg", "ipresvrg", "katyushax", "iprekatx")
EPOCH_MODES = ("fixed", "geometric")
PRECOND_KINDS = ("identity", "full", "diag_shift")
ENGINES = ("prox_grad", "fista", "fista_restart", "diagonal_exact")

NORMATIVE_KEYS = (
    "problem.kind",
    "data.path",
    "synthetic.n",
    "synthetic.d",
    "synthetic.seed",
    "reg.l1",
    "reg.l2",
    "solver.method",
    "solver.eta",
    "solver.m",
    "solver.epochs",
    "solver.tau",
    "solver.epoch_mode",
    "precond.kind",
    "precond.alpha",
    "subsolver.engine",
    "subsolver.p",
    "subsolver.gamma",
    "seed",
    "output.path",
)


@dataclass
class ExperimentConfig:
    """One experiment: problem source, regularization, solver, output."""

    problem_kind: str
    solver_method: str
    solver_eta: float
    solver_epochs: int
    output_path: str
    data_path: str | None = None
    synthetic_n: int | None = None
    synthetic_d: int | None = None
    synthetic_seed: int | None = None
    reg_l1: float = 0.0
    reg_l2: float = 0.0
    solver_m: int = 100
    solver_tau: float | None = None
    solver_epoch_mode: str = "fixed"
    precond_kind: str = "identity"
    precond_alpha: float | None = None
    subsolver_engine: str | None = None
    subsolver_p: int | None = None
    subsolver_gamma: float | None = None
    seed: int = 0
    source_path: str = field(default="<memory>", compare=False)

    def validate(self) -> None:
        if self.problem_kind not in PROBLEM_KINDS:
            raise ConfigError("problem.kind",
                              f"{self.problem_kind!r} not in {PROBLEM_KINDS}")
        if self.solver_method not in METHODS:
            raise ConfigError("solver.method",
                              f"{self.solver_method!r} not in {METHODS}")
        if self.solver_eta <= 0:
            raise ConfigError("solver.eta", "must be positive")
        if self.solver_epochs < 0:
            raise ConfigError("solver.epochs", "must be nonnegative")
        if self.solver_m < 1:
            raise ConfigError("solver.m", "must be >= 1")
        if self.solver_tau is not None and not 0 < self.solver_tau <= 1:
            raise ConfigError("solver.tau", "must lie in (0, 1]")
        if self.solver_epoch_mode not in EPOCH_MODES:
            raise ConfigError("solver.epoch_mode",
                              f"{self.solver_epoch_mode!r} not in {EPOCH_MODES}")
        if self.precond_kind not in PRECOND_KINDS:
            raise ConfigError("precond.kind",
                              f"{self.precond_kind!r} not in {PRECOND_KINDS}")
        if self.precond_kind == "diag_shift" and (self.precond_alpha is None
                                                  or self.precond_alpha <= 0):
            raise ConfigError("precond.alpha",
                              "diag_shift requires a positive alpha")
        if self.subsolver_engine is not None and self.subsolver_engine not in ENGINES:
            raise ConfigError("subsolver.engine",
                              f"{self.subsolver_engine!r} not in {ENGINES}")
        if self.subsolver_p is not None and self.subsolver_p < 1:
            raise ConfigError("subsolver.p", "must be >= 1")
        if self.subsolver_gamma is not None and self.subsolver_gamma <= 0:
            raise ConfigError("subsolver.gamma", "must be positive")
        if self.reg_l1 < 0:
            raise ConfigError("reg.l1", "must be nonnegative")
        if self.reg_l2 < 0:
            raise ConfigError("reg.l2", "must be nonnegative")
        if not self.output_path:
            raise ConfigError("output.path", "is required")
        synthetic = [self.synthetic_n, self.synthetic_d, self.synthetic_seed]
        if self.data_path is None:
            if any(v is None for v in synthetic):
                raise ConfigError("data.path",
                                  "either data.path or all of synthetic.{n,d,seed} "
                                  "must be given")
        elif any(v is not None for v in synthetic):
            raise ConfigError("data.path",
                              "data.path and synthetic.* are mutually exclusive")


def _parse_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(key, f"{value!r} is not an integer") from None


def _parse_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(key, f"{value!r} is not a number") from None


def parse_config_text(text: str, source_path: str = "<memory>") -> ExperimentConfig:
    raw: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(stripped.split()[0],
                              f"line {line_no} is not of the form 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in NORMATIVE_KEYS:
            raise ConfigError(key, "unknown key")
        if key in raw:
            raise ConfigError(key, f"duplicated on line {line_no}")
        raw[key] = value

    def need(key: str) -> str:
        if key not in raw:
            raise ConfigError(key, "is required")
        return raw[key]

    cfg = ExperimentConfig(
        problem_kind=need("problem.kind"),
        solver_method=need("solver.method"),
        solver_eta=_parse_float("solver.eta", need("solver.eta")),
        solver_epochs=_parse_int("solver.epochs", need("solver.epochs")),
        output_path=need("output.path"),
        data_path=raw.get("data.path"),
        synthetic_n=_parse_int("synthetic.n", raw["synthetic.n"]) if "synthetic.n" in raw else None,
        synthetic_d=_parse_int("synthetic.d", raw["synthetic.d"]) if "synthetic.d" in raw else None,
        synthetic_seed=_parse_int("synthetic.seed", raw["synthetic.seed"]) if "synthetic.seed" in raw else None,
        reg_l1=_parse_float("reg.l1", raw.get("reg.l1", "0")),
        reg_l2=_parse_float("reg.l2", raw.get("reg.l2", "0")),
        solver_m=_parse_int("solver.m", raw.get("solver.m", "100")),
        solver_tau=_parse_float("solver.tau", raw["solver.tau"]) if "solver.tau" in raw else None,
        solver_epoch_mode=raw.get("solver.epoch_mode", "fixed"),
        precond_kind=raw.get("precond.kind", "identity"),
        precond_alpha=_parse_float("precond.alpha", raw["precond.alpha"]) if "precond.alpha" in raw else None,
        subsolver_engine=raw.get("subsolver.engine"),
        subsolver_p=_parse_int("subsolver.p", raw["subsolver.p"]) if "subsolver.p" in raw else None,
        subsolver_gamma=_parse_float("subsolver.gamma", raw["subsolver.gamma"]) if "subsolver.gamma" in raw else None,
        seed=_parse_int("seed", raw.get("seed", "0")),
        source_path=source_path,
    )
    cfg.validate()
    return cfg


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source_path=str(path))
