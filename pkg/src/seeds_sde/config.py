"""Run configuration: JSON file plus CLI overrides, flags win."""

import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .grids import StepGrid, edm_grid, linear_lambda_grid
from .models import DataDistribution, ScoreModel, ZeroModel
from .schedules import ScheduleBase, make_schedule
from .solvers import ChurnParams, SolverSpec

_DEFAULT_MODEL = {"kind": "gaussian_mixture",
                  "components": [{"weight": 1.0, "mean": [0.0], "var": [1.0]}]}


@dataclass
class RunConfig:
    """Everything a run needs, already validated and cross-checked."""

    schedule: ScheduleBase
    model_spec: dict
    solver: SolverSpec
    grid_spec: dict
    seed: int = 0
    n_paths: int = 1000
    workers: int = 1
    out: str | None = None
    threshold: float = 1e-10
    order: dict = field(default_factory=dict)

    def build_model(self):
        kind = self.model_spec.get("kind", "gaussian_mixture")
        if kind == "zero":
            d = int(self.model_spec.get("dim", 1))
            return ZeroModel(d, self.schedule)
        if kind == "gaussian_mixture":
            data = DataDistribution.from_components(self.model_spec["components"])
            return ScoreModel(data, self.schedule)
        raise ConfigError(f"unknown model kind {kind!r}")

    def build_grid(self) -> StepGrid:
        spec = dict(self.grid_spec)
        kind = spec.pop("kind", "linear_lambda")
        steps = int(spec.pop("steps", 31))
        sched = self.schedule
        if kind == "linear_lambda":
            eps_end = float(spec.pop("eps_end", sched.t_min))
            t_top = float(spec.pop("t_top", sched.t_max))
            variant = spec.pop("variant", "sde")
            _reject_extras("grid", spec)
            return linear_lambda_grid(steps, eps_end, t_top, sched, variant)
        if kind == "edm":
            sigma_min = float(spec.pop("sigma_min", sched.sigma_of_t(sched.t_min)))
            sigma_max = float(spec.pop("sigma_max", sched.sigma_of_t(sched.t_max)))
            rho = float(spec.pop("rho", 7.0))
            _reject_extras("grid", spec)
            return edm_grid(steps, sigma_min, sigma_max, rho, sched)
        raise ConfigError(f"unknown grid kind {kind!r}; expected 'linear_lambda' or 'edm'")

    def resolved(self) -> dict:
        """JSON-ready dict that reproduces this configuration."""
        sched = self.schedule
        sched_spec = {"kind": {"VpLinear": "vp", "VpCosine": "vp_cosine", "Ve": "ve",
                               "Edm": "edm"}[type(sched).__name__]}
        for name in ("beta_d", "beta_m", "shift", "sigma_data", "t_min", "t_max"):
            if hasattr(sched, name):
                sched_spec[name] = getattr(sched, name)
        solver_spec = {"family": self.solver.family, "mode": self.solver.mode,
                       "r1": self.solver.r1, "r2": self.solver.r2, "c2": self.solver.c2}
        if self.solver.churn is not None:
            ch = self.solver.churn
            solver_spec["churn"] = {"s_churn": ch.s_churn, "s_tmin": ch.s_tmin,
                                    "s_tmax": ch.s_tmax, "s_noise": ch.s_noise}
        return {"schedule": sched_spec, "model": self.model_spec, "solver": solver_spec,
                "grid": self.grid_spec, "seed": self.seed, "paths": self.n_paths,
                "workers": self.workers, "threshold": self.threshold, "order": self.order}


def _reject_extras(section: str, leftover: dict) -> None:
    if leftover:
        raise ConfigError(f"unknown keys in {section} config: {sorted(leftover)}")


def _build_schedule(spec: dict) -> ScheduleBase:
    spec = dict(spec)
    kind = spec.pop("kind", "vp")
    return make_schedule(kind, **spec)


def _build_solver(spec: dict) -> SolverSpec:
    spec = dict(spec)
    churn_spec = spec.pop("churn", None)
    churn = ChurnParams(**churn_spec) if churn_spec else None
    try:
        return SolverSpec(churn=churn, **spec)
    except TypeError as exc:
        raise ConfigError(f"bad solver config: {exc}") from exc


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """Merge a JSON config file (optional) with CLI overrides (flags win)."""
    raw = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path!r} is not valid JSON: {exc}") from exc

    sched_spec = dict(raw.get("schedule", {"kind": "vp"}))
    if overrides.get("schedule"):
        sched_spec = {"kind": overrides["schedule"]}
    schedule = _build_schedule(sched_spec)

    solver_spec = dict(raw.get("solver", {"family": "seeds3"}))
    for key, flag in (("family", "solver"), ("mode", "mode")):
        if overrides.get(flag):
            solver_spec[key] = overrides[flag]
    solver = _build_solver(solver_spec)
    solver.validate_against(schedule)

    grid_spec = dict(raw.get("grid", {"kind": "linear_lambda"}))
    if overrides.get("steps") is not None:
        grid_spec["steps"] = overrides["steps"]

    def pick(flag, key, default):
        return overrides[flag] if overrides.get(flag) is not None else raw.get(key, default)

    cfg = RunConfig(
        schedule=schedule,
        model_spec=dict(raw.get("model", _DEFAULT_MODEL)),
        solver=solver,
        grid_spec=grid_spec,
        seed=int(pick("seed", "seed", 0)),
        n_paths=int(pick("paths", "paths", 1000)),
        workers=int(pick("workers", "workers", 1)),
        out=overrides.get("out") or raw.get("out"),
        threshold=float(pick("threshold", "threshold", 1e-10)),
        order=dict(raw.get("order", {})),
    )
    if cfg.n_paths < 1:
        raise ConfigError("paths must be >= 1")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    cfg.build_grid()   # validate grid construction eagerly
    cfg.build_model()  # and the model spec
    return cfg
