"""Declarative scenarios: YAML configs, validation and end-to-end runs."""
from __future__ import annotations

import copy
import math
import os
import time
from dataclasses import dataclass, field, fields, asdict
from typing import Any, Optional

import numpy as np
import yaml

from . import analysis
from .accounting import count_gradients
from .discrete import IterationConfig, run_iterations
from .flows import (
    ELFlow,
    IntegratorConfig,
    NesterovFlow,
    PhaseState,
    ReducedFlow,
    integrate,
    write_csv,
    write_json,
)
from .manifold import FlowParams, SlowManifoldExpansion
from .objective import BUILTIN_NAMES, Objective, builtin

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "MODES",
    "parse_config",
    "load_config",
    "dump_config",
    "apply_overrides",
    "run_scenario",
    "run_warmstart_comparison",
]

MODES = ("el_flow", "metric_flow", "nesterov_flow", "reduced_flow", "gd", "nesterov_iter", "heavy_ball")
FLOW_MODES = ("el_flow", "metric_flow", "nesterov_flow", "reduced_flow")
DEFAULT_HORIZON = {"autonomous": 20.0, "nonautonomous": 40.0}
DEFAULT_T0 = 0.1


class ConfigError(ValueError):
    """Validation failure at a dotted field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)

    def to_dict(self) -> dict:
        return {"error": "config", "path": self.path, "message": self.message}


# -- field converters ---------------------------------------------------------------

def _join(path, key):
    return f"{path}.{key}" if path else key


def _number(value, path, *, positive=False, allow_inf=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    value = float(value)
    if math.isnan(value) or (math.isinf(value) and not allow_inf):
        raise ConfigError(path, "must be finite")
    if positive and not value > 0:
        raise ConfigError(path, "must be positive")
    return value


def _integer(value, path, *, minimum=0):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(path, f"must be at least {minimum}")
    return value


def _boolean(value, path):
    if not isinstance(value, bool):
        raise ConfigError(path, f"expected true or false, got {value!r}")
    return value


def _choice(value, path, options):
    if value not in options:
        raise ConfigError(path, f"must be one of {', '.join(options)}; got {value!r}")
    return value


def _string(value, path):
    if not isinstance(value, str) or not value:
        raise ConfigError(path, "expected a non-empty string")
    return value


def _vector(value, path):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(path, "expected a non-empty list of numbers")
    return tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(value))


def _matrix(value, path):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(path, "expected a list of rows")
    rows = tuple(_vector(r, f"{path}[{i}]") for i, r in enumerate(value))
    if any(len(r) != len(rows) for r in rows):
        raise ConfigError(path, "matrix must be square")
    return rows


class _Reader:
    """Pops known keys from a mapping and rejects leftovers."""

    def __init__(self, data, path):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(path, "expected a mapping")
        self.data = dict(data)
        self.path = path

    def get(self, key, conv=None, default=None, required=False, **kw):
        p = _join(self.path, key)
        if key not in self.data or self.data[key] is None:
            self.data.pop(key, None)
            if required:
                raise ConfigError(p, "is required")
            return default
        value = self.data.pop(key)
        return value if conv is None else conv(value, p, **kw)

    def done(self):
        if self.data:
            key = sorted(self.data)[0]
            raise ConfigError(_join(self.path, key), "unknown field")


# -- config sections ------------------------------------------------------------------

@dataclass(frozen=True)
class ObjectiveSpec:
    builtin: Optional[str] = None
    expression: Optional[str] = None
    dim: Optional[int] = None
    smoothness_order: float = math.inf
    domain: tuple = (-10.0, 10.0)
    minimizer: Optional[tuple] = None

    @classmethod
    def parse(cls, data, path):
        if isinstance(data, str):
            data = {"builtin": data}
        r = _Reader(data, path)
        spec = cls(
            builtin=r.get("builtin", lambda v, p: _choice(v, p, BUILTIN_NAMES)),
            expression=r.get("expression", _string),
            dim=r.get("dim", _integer, minimum=1),
            smoothness_order=r.get("smoothness_order", _number, math.inf, allow_inf=True),
            domain=r.get("domain", _vector, (-10.0, 10.0)),
            minimizer=r.get("minimizer", _vector),
        )
        r.done()
        if (spec.builtin is None) == (spec.expression is None):
            raise ConfigError(path, "give exactly one of builtin or expression")
        if spec.expression is not None and spec.dim is None:
            raise ConfigError(_join(path, "dim"), "is required with expression")
        if len(spec.domain) != 2 or not spec.domain[0] < spec.domain[1]:
            raise ConfigError(_join(path, "domain"), "expected [lo, hi] with lo < hi")
        if spec.smoothness_order < 1:
            raise ConfigError(_join(path, "smoothness_order"), "must be at least 1")
        if spec.builtin is not None and spec.dim not in (None, 2):
            raise ConfigError(_join(path, "dim"), "builtin objectives are two-dimensional")
        return spec

    def build(self) -> Objective:
        if self.builtin is not None:
            obj = builtin(self.builtin)
            obj.smoothness_order = self.smoothness_order
            obj.domain = tuple(self.domain)
            return obj
        return Objective.from_expression(
            self.expression,
            self.dim,
            known_minimizer=self.minimizer,
            smoothness_order=self.smoothness_order,
            domain=tuple(self.domain),
        )


@dataclass(frozen=True)
class ParamsSpec:
    mu: Optional[float] = None
    eta: float = 1.0
    rho: Optional[float] = None
    alpha0: Optional[float] = None
    metric: Optional[tuple] = None

    @classmethod
    def parse(cls, data, path):
        r = _Reader(data, path)
        spec = cls(
            mu=r.get("mu", _number, positive=True),
            eta=r.get("eta", _number, 1.0, positive=True),
            rho=r.get("rho", _number, positive=True),
            alpha0=r.get("alpha0", _number),
            metric=r.get("metric", _matrix),
        )
        r.done()
        try:
            spec.build()
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None
        return spec

    def build(self) -> FlowParams:
        metric = None if self.metric is None else np.array(self.metric, dtype=float)
        return FlowParams(mu=self.mu, eta=self.eta, metric=metric, alpha0=self.alpha0, rho=self.rho)


@dataclass(frozen=True)
class ReducedSpec:
    kind: str = "autonomous"
    form: str = "series"
    r: float = math.inf
    time_window: Optional[tuple] = None

    @classmethod
    def parse(cls, data, path):
        r = _Reader(data, path)
        spec = cls(
            kind=r.get("kind", lambda v, p: _choice(v, p, ("autonomous", "nonautonomous")), "autonomous"),
            form=r.get("form", lambda v, p: _choice(v, p, ("series", "resummed")), "series"),
            r=r.get("r", _number, math.inf, allow_inf=True),
            time_window=r.get("time_window", _vector),
        )
        r.done()
        if spec.r < 0:
            raise ConfigError(_join(path, "r"), "must be non-negative")
        if spec.time_window is not None and len(spec.time_window) != 2:
            raise ConfigError(_join(path, "time_window"), "expected [t0, t1]")
        return spec


@dataclass(frozen=True)
class IntegratorSpec:
    scheme: str = "rk4"
    step: float = 1e-3
    horizon: Optional[float] = None
    max_steps: Optional[int] = None
    stop_tolerance: Optional[float] = None
    record_every: int = 1

    @classmethod
    def parse(cls, data, path):
        r = _Reader(data, path)
        spec = cls(
            scheme=r.get("scheme", lambda v, p: _choice(v, p, ("rk4", "explicit_euler")), "rk4"),
            step=r.get("step", _number, 1e-3, positive=True),
            horizon=r.get("horizon", _number, positive=True),
            max_steps=r.get("max_steps", _integer),
            stop_tolerance=r.get("stop_tolerance", _number, positive=True),
            record_every=r.get("record_every", _integer, 1, minimum=1),
        )
        r.done()
        return spec

    def resolve(self, kind: str) -> IntegratorConfig:
        if self.max_steps is not None:
            steps = self.max_steps
        else:
            horizon = self.horizon if self.horizon is not None else DEFAULT_HORIZON[kind]
            steps = int(round(horizon / self.step))
        return IntegratorConfig(self.scheme, self.step, steps, self.stop_tolerance, self.record_every)


@dataclass(frozen=True)
class IterationSpec:
    step: float = 0.1
    momentum: Optional[float] = None
    max_iters: int = 10_000
    tolerance: Optional[float] = 1e-6

    @classmethod
    def parse(cls, data, path):
        r = _Reader(data, path)
        spec = cls(
            step=r.get("step", _number, 0.1, positive=True),
            momentum=r.get("momentum", _number),
            max_iters=r.get("max_iters", _integer, 10_000),
            tolerance=r.get("tolerance", _number, None, positive=True),
        )
        r.done()
        if spec.momentum is not None and not 0.0 <= spec.momentum < 1.0:
            raise ConfigError(_join(path, "momentum"), "must lie in [0, 1)")
        return spec


@dataclass(frozen=True)
class InitialSpec:
    x: tuple = ()
    v: Optional[tuple] = None
    t: Optional[float] = None
    warm_start: str = "none"

    @classmethod
    def parse(cls, data, path):
        r = _Reader(data, path)
        spec = cls(
            x=r.get("x", _vector, required=True),
            v=r.get("v", _vector),
            t=r.get("t", _number, positive=True),
            warm_start=r.get("warm_start", lambda v, p: _choice(v, p, ("none", "cheap", "projected")), "none"),
        )
        r.done()
        if spec.v is not None and len(spec.v) != len(spec.x):
            raise ConfigError(_join(path, "v"), "must have the same length as x")
        return spec


@dataclass(frozen=True)
class DiagnosticsSpec:
    distance: bool = False
    energy: bool = False
    lyapunov: bool = False
    identity_residual: bool = False

    @classmethod
    def parse(cls, data, path):
        r = _Reader(data, path)
        spec = cls(**{f.name: r.get(f.name, _boolean, False) for f in fields(cls)})
        r.done()
        return spec


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    name: str = "run"

    @classmethod
    def parse(cls, data, path):
        r = _Reader(data, path)
        spec = cls(dir=r.get("dir", _string, "out"), name=r.get("name", _string, "run"))
        r.done()
        return spec


@dataclass(frozen=True)
class ScenarioConfig:
    objective: ObjectiveSpec
    mode: str
    params: ParamsSpec = field(default_factory=ParamsSpec)
    truncation: int = 1
    reduced: ReducedSpec = field(default_factory=ReducedSpec)
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)
    iteration: IterationSpec = field(default_factory=IterationSpec)
    initial: InitialSpec = field(default_factory=lambda: InitialSpec(x=(1.0, 1.0)))
    diagnostics: DiagnosticsSpec = field(default_factory=DiagnosticsSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    @property
    def nonautonomous(self) -> bool:
        return self.mode == "nesterov_flow" or (
            self.mode == "reduced_flow" and self.reduced.kind == "nonautonomous"
        )


def parse_config(data: Any) -> ScenarioConfig:
    """Validate a config mapping (already loaded from YAML)."""
    r = _Reader(data, "")
    cfg = ScenarioConfig(
        objective=ObjectiveSpec.parse(r.get("objective", required=True), "objective"),
        mode=r.get("mode", lambda v, p: _choice(v, p, MODES), required=True),
        params=ParamsSpec.parse(r.get("params"), "params"),
        truncation=r.get("truncation", _integer, 1),
        reduced=ReducedSpec.parse(r.get("reduced"), "reduced"),
        integrator=IntegratorSpec.parse(r.get("integrator"), "integrator"),
        iteration=IterationSpec.parse(r.get("iteration"), "iteration"),
        initial=InitialSpec.parse(r.get("initial", required=True), "initial"),
        diagnostics=DiagnosticsSpec.parse(r.get("diagnostics"), "diagnostics"),
        output=OutputSpec.parse(r.get("output"), "output"),
    )
    r.done()
    _check_mode(cfg)
    return cfg


def _check_mode(cfg: ScenarioConfig):
    dim = 2 if cfg.objective.builtin is not None else cfg.objective.dim
    if len(cfg.initial.x) != dim:
        raise ConfigError("initial.x", f"expected {dim} components")
    p = cfg.params
    if cfg.mode in ("el_flow", "metric_flow") or (cfg.mode == "reduced_flow" and not cfg.nonautonomous):
        if p.mu is None:
            raise ConfigError("params.mu", f"is required for mode {cfg.mode}")
    if cfg.nonautonomous and p.rho is None:
        raise ConfigError("params.rho", f"is required for mode {cfg.mode}")
    if cfg.mode == "metric_flow" and p.metric is None:
        raise ConfigError("params.metric", "is required for mode metric_flow")
    if p.metric is not None and len(p.metric) != dim:
        raise ConfigError("params.metric", f"expected a {dim}x{dim} matrix")
    if cfg.mode == "heavy_ball" and cfg.iteration.momentum is None:
        raise ConfigError("iteration.momentum", "is required for mode heavy_ball")
    if cfg.initial.warm_start != "none" and cfg.mode not in ("el_flow", "metric_flow"):
        raise ConfigError("initial.warm_start", "warm starts apply to el_flow and metric_flow")
    if cfg.truncation > cfg.objective.smoothness_order:
        raise ConfigError("truncation", "exceeds objective.smoothness_order")
    if cfg.nonautonomous and cfg.initial.t is not None and not cfg.initial.t > 0:
        raise ConfigError("initial.t", "must be positive")


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return _plain(asdict(cfg))


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError("", f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("", f"invalid YAML: {exc}") from None
    return data


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``a.b.c=value`` overrides (values parsed as YAML scalars)."""
    data = copy.deepcopy(data) if data is not None else {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError("", f"override {item!r} is not of the form path=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for i, part in enumerate(parts[:-1]):
            child = node.get(part)
            if child is None or isinstance(child, str):
                child = {} if child is None else {"builtin": child}
                node[part] = child
            if not isinstance(child, dict):
                raise ConfigError(".".join(parts[: i + 1]), "is not a mapping")
            node = child
        try:
            node[parts[-1]] = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(key, f"cannot parse value: {exc}") from None
    return data


# -- running -------------------------------------------------------------------------

def _final_error(obj: Objective, x) -> float:
    if obj.known_minimizer is not None:
        return float(np.linalg.norm(x - obj.known_minimizer))
    return float(np.linalg.norm(obj._raw_gradient(x)))


def _expansion(cfg: ScenarioConfig, obj, params) -> SlowManifoldExpansion:
    if cfg.nonautonomous:
        window = cfg.reduced.time_window
        return SlowManifoldExpansion(obj, params, cfg.truncation, "nonautonomous",
                                     time_window=None if window is None else tuple(window))
    return SlowManifoldExpansion(obj, params, cfg.truncation)


def _initial_state(cfg: ScenarioConfig, obj, exp, report: dict) -> PhaseState:
    ini = cfg.initial
    x = np.array(ini.x, dtype=float)
    t = ini.t if ini.t is not None else (DEFAULT_T0 if cfg.nonautonomous else None)
    if ini.warm_start == "cheap":
        return analysis.warm_start_cheap(exp, x)
    if ini.warm_start == "projected":
        v0 = np.zeros_like(x) if ini.v is None else np.array(ini.v, dtype=float)
        res = analysis.warm_start_projected(exp, x, v0)
        report["projected_warm_start"] = {"converged": res.converged, "iterations": res.iterations,
                                          "value": res.value}
        return res.state
    v = None if ini.v is None else np.array(ini.v, dtype=float)
    return PhaseState(x, v, t)


def _monotone(series, slack_per_step: float = 1e-9) -> dict:
    s = np.asarray(series)
    if s.size < 2:
        return {"non_increasing": True, "max_increase": 0.0}
    inc = float(np.max(np.diff(s)))
    return {"non_increasing": bool(inc <= slack_per_step), "max_increase": inc}


def execute(cfg: ScenarioConfig):
    """Run a scenario in memory; returns ``(trajectory, extra_columns, report, diagnostics)``."""
    obj = cfg.objective.build()
    params = cfg.params.build()
    report: dict = {}
    exp = None
    with count_gradients() as ledger:
        if cfg.mode in ("gd", "nesterov_iter", "heavy_ball"):
            scheme = {"gd": "gradient_descent", "nesterov_iter": "nesterov", "heavy_ball": "heavy_ball"}[cfg.mode]
            it = cfg.iteration
            icfg = IterationConfig(scheme, it.step, it.momentum, it.max_iters, it.tolerance)
            traj = run_iterations(icfg, obj, np.array(cfg.initial.x, dtype=float))
        else:
            kind = "nonautonomous" if cfg.nonautonomous else "autonomous"
            icfg = cfg.integrator.resolve(kind)
            if cfg.mode in ("el_flow", "metric_flow", "reduced_flow"):
                exp = _expansion(cfg, obj, params)
            if cfg.mode in ("el_flow", "metric_flow"):
                flow = ELFlow(obj, params)
            elif cfg.mode == "nesterov_flow":
                flow = NesterovFlow(obj, params.rho)
            elif cfg.nonautonomous:
                flow = ReducedFlow(exp, cfg.reduced.form, cfg.reduced.r)
            else:
                flow = ReducedFlow(exp)
            s0 = _initial_state(cfg, obj, exp, report)
            report["setup_grad_evals"] = ledger.count
            traj = integrate(flow, s0, icfg)
    report["grad_evals"] = ledger.count

    # diagnostics evaluate gradients too; keep them out of the run's cost
    with count_gradients() as diag_ledger:
        extra, diag = _diagnostics(cfg, obj, params, exp, traj)
    report["diagnostics_grad_evals"] = diag_ledger.count
    x_final = traj.x[-1]
    report.update({
        "mode": cfg.mode,
        "steps": traj.steps,
        "trajectory_grad_evals": traj.grad_evals,
        "final_error": _final_error(obj, x_final),
        "final_x": x_final.tolist(),
        "stop_reason": traj.stop_reason,
        "final_in_domain": obj.in_domain(x_final),
        "left_domain": bool(not all(obj.in_domain(x) for x in traj.x)),
        "run_settings": traj.metadata,
    })
    return traj, extra, report, diag


def _diagnostics(cfg, obj, params, exp, traj):
    d = cfg.diagnostics
    extra: dict = {}
    diag = analysis.DiagnosticsReport(traj.times)
    if d.distance and traj.has_v and exp is not None and exp.autonomous:
        extra["d_manifold"] = analysis.distance_series(traj, exp)
        diag.add_series("d_manifold", extra["d_manifold"])
    if d.energy and traj.has_v and not traj.has_t and obj.known_minimizer is not None:
        extra["energy"] = analysis.energy_series(traj, params, obj)
        diag.add_series("energy", extra["energy"])
        diag.summaries["energy"] = _monotone(extra["energy"])
    if (d.lyapunov or d.identity_residual) and exp is not None and exp.mode == "autonomous_euclidean" \
            and obj.known_minimizer is not None:
        if d.lyapunov and not traj.has_v:
            extra["lyapunov"] = analysis.lyapunov_series(traj, exp)
            diag.add_series("lyapunov", extra["lyapunov"])
            diag.summaries["lyapunov"] = _monotone(extra["lyapunov"])
        if d.identity_residual:
            idx = np.unique(np.linspace(0, len(traj) - 1, 10).astype(int))
            res = []
            for i in idx:
                x = traj.x[i]
                vel = np.linalg.norm(analysis.reduced_rhs(exp, x))
                r = analysis.lyapunov_gradient_identity_residual(exp, x)
                res.append(r / vel if vel > 0 else r)
            diag.summaries["identity_residual_max_relative"] = float(max(res))
    diag.summaries["grad_norm_final"] = float(np.linalg.norm(obj._raw_gradient(traj.x[-1])))
    return extra, diag


def config_echo(cfg: ScenarioConfig) -> dict:
    return config_to_dict(cfg)


def write_outputs(cfg: ScenarioConfig, traj, extra, report, diag, out_dir=None) -> dict:
    out_dir = out_dir or cfg.output.dir
    name = cfg.output.name
    paths = {
        "trajectory": os.path.join(out_dir, f"{name}.csv"),
        "sidecar": os.path.join(out_dir, f"{name}.json"),
        "diagnostics": os.path.join(out_dir, f"{name}_diagnostics.json"),
        "report": os.path.join(out_dir, f"{name}_report.json"),
    }
    write_csv(traj, paths["trajectory"], extra)
    write_json({**traj.summary(), "config": config_echo(cfg)}, paths["sidecar"])
    diag.to_json(paths["diagnostics"])
    write_json(report, paths["report"])
    return paths


def run_scenario(cfg: ScenarioConfig, out_dir: Optional[str] = None, write: bool = True) -> dict:
    """Run ``cfg`` end to end and return the run report (artifacts written to disk)."""
    start = time.perf_counter()
    traj, extra, report, diag = execute(cfg)
    report["wall_time"] = time.perf_counter() - start
    report["config"] = config_echo(cfg)
    if write:
        report["artifacts"] = write_outputs(cfg, traj, extra, report, diag, out_dir)
    return report


class NonConvergenceError(RuntimeError):
    pass


def run_warmstart_comparison(cfg: ScenarioConfig, out_dir: Optional[str] = None, write: bool = True) -> dict:
    """Cold start (``v0 = 0``) against the cheap warm start on the same scenario."""
    if cfg.mode not in ("el_flow", "metric_flow"):
        raise ConfigError("mode", "warm-start comparison needs el_flow or metric_flow")
    obj = cfg.objective.build()
    if obj.known_minimizer is None:
        raise ConfigError("objective", "warm-start comparison needs a known minimizer")
    params = cfg.params.build()
    exp = _expansion(cfg, obj, params)
    icfg = cfg.integrator.resolve("autonomous")
    if icfg.stop_tolerance is None:
        icfg = IntegratorConfig(icfg.scheme, icfg.step, icfg.max_steps, 1e-6, icfg.record_every)
    x0 = np.array(cfg.initial.x, dtype=float)
    flow = ELFlow(obj, params)
    cold = integrate(flow, PhaseState(x0, np.zeros_like(x0)), icfg)
    with count_gradients() as setup:
        s0 = analysis.warm_start_cheap(exp, x0)
    warm = integrate(flow, s0, icfg)
    for label, tr in (("cold", cold), ("warm", warm)):
        if tr.stop_reason != "tolerance_reached":
            raise NonConvergenceError(f"{label} start did not reach tolerance ({tr.stop_reason})")
    warm_total = warm.grad_evals + setup.count
    saving = cold.grad_evals - warm_total
    report = {
        "cold_grad_evals": cold.grad_evals,
        "cold_steps": cold.steps,
        "warm_grad_evals": warm.grad_evals,
        "warm_setup_grad_evals": setup.count,
        "warm_total_grad_evals": warm_total,
        "warm_steps": warm.steps,
        "saving": saving,
        "saving_fraction": saving / cold.grad_evals if cold.grad_evals else 0.0,
        "saving_positive": saving > 0,
        "initial_velocity_warm": s0.v.tolist(),
        "config": config_echo(cfg),
    }
    if write:
        out_dir = out_dir or cfg.output.dir
        name = cfg.output.name
        write_csv(cold, os.path.join(out_dir, f"{name}_cold.csv"))
        write_csv(warm, os.path.join(out_dir, f"{name}_warm.csv"))
        write_json(report, os.path.join(out_dir, f"{name}_warmstart.json"))
    return report
