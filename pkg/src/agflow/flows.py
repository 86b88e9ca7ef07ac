"""Continuous flows and a fixed-step integrator.

State vectors are flat arrays laid out as ``[x, v, t]`` with the ``v`` and
``t`` blocks present only when the flow carries them.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .accounting import count_gradients
from .manifold import FlowParams, SlowManifoldExpansion, graph, metric_solve, resummed_coefficient
from .objective import Objective

__all__ = [
    "PhaseState",
    "IntegratorConfig",
    "Trajectory",
    "ELFlow",
    "NesterovFlow",
    "ReducedFlow",
    "GradientFlow",
    "el_rhs",
    "nesterov_rhs",
    "reduced_rhs",
    "schedule",
    "schedule_rate",
    "integrate",
    "write_csv",
    "write_json",
]

STOP_REASONS = ("tolerance_reached", "max_steps", "domain_exit")


@dataclass
class PhaseState:
    x: np.ndarray
    v: Optional[np.ndarray] = None
    t: Optional[float] = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.v is not None:
            self.v = np.asarray(self.v, dtype=float)
            if self.v.shape != self.x.shape:
                raise ValueError("x and v must have the same shape")
        if self.t is not None:
            self.t = float(self.t)


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "rk4"
    step: float = 1e-3
    max_steps: int = 20_000
    stop_tolerance: Optional[float] = None  # None: run to max_steps
    record_every: int = 1

    def __post_init__(self):
        if self.scheme not in ("rk4", "explicit_euler"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if int(self.max_steps) != self.max_steps or self.max_steps < 0:
            raise ValueError("max_steps must be a non-negative integer")
        if self.stop_tolerance is not None and not self.stop_tolerance > 0:
            raise ValueError("stop_tolerance must be positive")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError("record_every must be a positive integer")


@dataclass
class Trajectory:
    """Recorded samples of one run.

    ``states`` holds one flat state per row; ``n``, ``has_v`` and ``has_t``
    describe the layout.
    """

    times: np.ndarray
    states: np.ndarray
    n: int
    has_v: bool
    has_t: bool
    grad_evals: int
    stop_reason: str
    steps: int
    metadata: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.states[:, : self.n]

    @property
    def v(self) -> Optional[np.ndarray]:
        if not self.has_v:
            return None
        return self.states[:, self.n : 2 * self.n]

    @property
    def t(self) -> Optional[np.ndarray]:
        if not self.has_t:
            return None
        return self.states[:, -1]

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> PhaseState:
        row = self.states[i]
        v = row[self.n : 2 * self.n] if self.has_v else None
        t = row[-1] if self.has_t else None
        return PhaseState(row[: self.n].copy(), None if v is None else v.copy(), t)

    @property
    def final(self) -> PhaseState:
        return self.state(-1)

    def columns(self) -> list[str]:
        names = ["time"] + [f"x_{i + 1}" for i in range(self.n)]
        if self.has_v:
            names += [f"v_{i + 1}" for i in range(self.n)]
        if self.has_t:
            names.append("t")
        return names

    def summary(self) -> dict:
        return {
            "grad_evals": self.grad_evals,
            "stop_reason": self.stop_reason,
            "steps": self.steps,
            "samples": len(self),
            **self.metadata,
        }


# -- right-hand sides -----------------------------------------------------------

class ELFlow:
    """``x' = v, v' = -mu v - eta H^{-1} grad f(x)``."""

    has_v, has_t = True, False

    def __init__(self, objective: Objective, params: FlowParams):
        if params.mu is None:
            raise ValueError("EL flow needs mu")
        if params.metric is not None and params.metric.shape[0] != objective.dim:
            raise ValueError("metric size does not match objective dimension")
        self.objective = objective
        self.params = params
        self.n = objective.dim

    def rhs(self, y):
        n = self.n
        x, v = y[:n], y[n:]
        out = np.empty_like(y)
        out[:n] = v
        force = self.objective.gradient(x)
        if self.params.metric is not None:
            force = metric_solve(self.params, force)
        out[n:] = -self.params.mu * v - self.params.eta * force
        return out

    def pack(self, s: PhaseState):
        v = np.zeros(self.n) if s.v is None else s.v
        return np.concatenate([s.x, v])

    def start_time(self, s: PhaseState) -> float:
        return 0.0

    def describe(self) -> dict:
        return {"flow": "el_flow", "mu": self.params.mu, "eta": self.params.eta,
                "metric": None if self.params.metric is None else self.params.metric.tolist()}


class NesterovFlow:
    """Extended phase space ``x' = v, v' = -(rho/t) v - grad f(x), t' = 1``."""

    has_v, has_t = True, True

    def __init__(self, objective: Objective, rho: float):
        if not rho > 0:
            raise ValueError("rho must be positive")
        self.objective = objective
        self.rho = float(rho)
        self.n = objective.dim

    def rhs(self, y):
        n = self.n
        x, v, t = y[:n], y[n : 2 * n], y[-1]
        if not t > 0:
            raise ValueError(f"Nesterov flow is singular at t={t}; need t > 0")
        out = np.empty_like(y)
        out[:n] = v
        out[n : 2 * n] = -(self.rho / t) * v - self.objective.gradient(x)
        out[-1] = 1.0
        return out

    def pack(self, s: PhaseState):
        if s.t is None or not s.t > 0:
            raise ValueError("Nesterov flow needs an initial time t > 0")
        v = np.zeros(self.n) if s.v is None else s.v
        return np.concatenate([s.x, v, [s.t]])

    def start_time(self, s: PhaseState) -> float:
        return s.t

    def describe(self) -> dict:
        return {"flow": "nesterov_flow", "rho": self.rho}


class ReducedFlow:
    """Flow on the truncated slow manifold, ``x' = v^{eps,p}(x)``.

    For a nonautonomous expansion the state carries ``t`` and the velocity is
    either the series sum (``form="series"``) or the resummed
    ``-S_r(eps) t grad f`` (``form="resummed"``, ``r`` may be ``inf``).
    """

    has_v = False

    def __init__(self, expansion: SlowManifoldExpansion, form: str = "series", r: float | None = None):
        if form not in ("series", "resummed"):
            raise ValueError("form must be 'series' or 'resummed'")
        if form == "resummed":
            if expansion.autonomous:
                raise ValueError("the resummed form applies to nonautonomous expansions")
            if r is None:
                raise ValueError("resummed form needs r")
            self.coef = resummed_coefficient(expansion.epsilon, r)
        self.expansion = expansion
        self.objective = expansion.objective
        self.form = form
        self.r = r
        self.n = self.objective.dim
        self.has_t = not expansion.autonomous

    def rhs(self, y):
        if not self.has_t:
            return graph(self.expansion, y)
        x, t = y[:-1], y[-1]
        out = np.empty_like(y)
        if self.form == "resummed":
            out[:-1] = -self.coef * t * self.objective.gradient(x)
        else:
            out[:-1] = graph(self.expansion, x, t)
        out[-1] = 1.0
        return out

    def pack(self, s: PhaseState):
        if not self.has_t:
            return s.x.copy()
        if s.t is None or not s.t > 0:
            raise ValueError("nonautonomous reduced flow needs t > 0")
        return np.concatenate([s.x, [s.t]])

    def start_time(self, s: PhaseState) -> float:
        return s.t if self.has_t else 0.0

    def describe(self) -> dict:
        d = {"flow": "reduced_flow", "p": self.expansion.p, "mode": self.expansion.mode,
             "epsilon": self.expansion.epsilon}
        if self.has_t:
            d["form"] = self.form
            if self.form == "resummed":
                d["r"] = self.r if math.isfinite(self.r) else "inf"
        return d


class GradientFlow:
    """``x' = -scale * grad f(x)``."""

    has_v, has_t = False, False

    def __init__(self, objective: Objective, scale: float = 1.0):
        self.objective = objective
        self.scale = float(scale)
        self.n = objective.dim

    def rhs(self, y):
        return -self.scale * self.objective.gradient(y)

    def pack(self, s: PhaseState):
        return s.x.copy()

    def start_time(self, s: PhaseState) -> float:
        return 0.0

    def describe(self) -> dict:
        return {"flow": "gradient_flow", "scale": self.scale}


def el_rhs(obj: Objective, params: FlowParams, s: PhaseState) -> PhaseState:
    flow = ELFlow(obj, params)
    d = flow.rhs(flow.pack(s))
    return PhaseState(d[: flow.n], d[flow.n :])


def nesterov_rhs(obj: Objective, rho: float, s: PhaseState) -> PhaseState:
    flow = NesterovFlow(obj, rho)
    d = flow.rhs(flow.pack(s))
    return PhaseState(d[: flow.n], d[flow.n : 2 * flow.n], d[-1])


def reduced_rhs(exp: SlowManifoldExpansion, x, t: float | None = None, *,
                form: str = "series", r: float | None = None) -> np.ndarray:
    """Velocity of the reduced flow at ``x`` (and ``t`` when nonautonomous)."""
    x = np.asarray(x, dtype=float)
    if exp.autonomous:
        return graph(exp, x)
    if t is None:
        raise ValueError("nonautonomous reduced flow needs t")
    if not t > 0:
        raise ValueError("nonautonomous reduced flow needs t > 0")
    flow = ReducedFlow(exp, form, r)
    return flow.rhs(np.concatenate([x, [float(t)]]))[:-1]


def schedule(params: FlowParams, t: float) -> tuple[float, float]:
    """``(alpha_t, beta_t)`` keeping ``e^alpha - alpha' = mu`` and ``e^{2 alpha + beta} = eta``."""
    mu, eta = _schedule_params(params)
    c = _schedule_c(params)
    # log(1 + c e^{mu t}) without overflow
    denom = 0.0 if c == 0.0 else float(np.logaddexp(0.0, math.log(c) + mu * t))
    alpha = math.log(mu) - denom
    return alpha, math.log(eta) - 2.0 * alpha


def schedule_rate(params: FlowParams, t: float) -> float:
    """``d alpha_t / dt`` for the closed-form schedule."""
    mu, _ = _schedule_params(params)
    c = _schedule_c(params)
    if c == 0.0:
        return 0.0
    z = math.log(c) + mu * t
    return -mu / (1.0 + math.exp(-z)) if z > -700 else -mu * math.exp(z)


def _schedule_c(params: FlowParams) -> float:
    c = params.mu * math.exp(-params.alpha0) - 1.0
    # alpha0 = log(mu) leaves a rounding residue that e^{mu t} would amplify
    return 0.0 if abs(c) <= 8 * np.finfo(float).eps else c


def _schedule_params(params: FlowParams):
    if params.mu is None or params.alpha0 is None:
        raise ValueError("schedule needs mu and alpha0")
    if params.alpha0 > math.log(params.mu):
        raise ValueError("schedule needs alpha0 <= log(mu)")
    return params.mu, params.eta


# -- integration -----------------------------------------------------------------

class _CallableFlow:
    has_v, has_t = False, False
    objective = None

    def __init__(self, fn: Callable, n: int):
        self.rhs = fn
        self.n = n

    def pack(self, s):
        return np.array(s.x, dtype=float, ndmin=1)

    def start_time(self, s):
        return 0.0

    def describe(self):
        return {"flow": "callable"}


def _stop_metric(flow, y) -> Optional[float]:
    obj = flow.objective
    if obj is None:
        return None
    x = y[: flow.n]
    if obj.known_minimizer is not None:
        d = x - obj.known_minimizer
    else:
        # uncharged: the stop rule is bookkeeping, not part of the method
        d = obj._raw_gradient(x)
    return math.sqrt(float(d @ d))


def integrate(flow, s0, cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Fixed-step integration of ``flow`` from ``s0``.

    ``flow`` is one of the flow classes, or a plain callable ``rhs(y)`` with
    ``s0`` an array.  The run stops when the error (``|x - x*|``, or
    ``|grad f|`` without a known minimizer) drops below
    ``cfg.stop_tolerance``, after ``cfg.max_steps`` steps, or when the state
    stops being finite.
    """
    if not isinstance(s0, PhaseState):
        s0 = PhaseState(s0)
    if not hasattr(flow, "rhs"):
        flow = _CallableFlow(flow, s0.x.size)
    y = flow.pack(s0)
    t0 = flow.start_time(s0)
    h = cfg.step
    tol = cfg.stop_tolerance
    f = flow.rhs
    times = [t0]
    rows = [y.copy()]
    reason = "max_steps"
    k = 0
    with count_gradients() as ledger, np.errstate(over="ignore", invalid="ignore"):
        if tol is not None:
            m = _stop_metric(flow, y)
            if m is not None and m <= tol:
                reason = "tolerance_reached"
        if reason == "max_steps":
            h2, h6 = 0.5 * h, h / 6.0
            rk4 = cfg.scheme == "rk4"
            while k < cfg.max_steps:
                try:
                    if rk4:
                        k1 = f(y)
                        k2 = f(y + h2 * k1)
                        k3 = f(y + h2 * k2)
                        k4 = f(y + h * k3)
                        y = y + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                    else:
                        y = y + h * f(y)
                except (OverflowError, FloatingPointError, ZeroDivisionError):
                    y = np.full_like(y, np.nan)
                k += 1
                finite = bool(np.all(np.isfinite(y)))
                stop = None
                if not finite:
                    stop = "domain_exit"
                elif tol is not None:
                    m = _stop_metric(flow, y)
                    if m is not None and m <= tol:
                        stop = "tolerance_reached"
                if stop is not None or k % cfg.record_every == 0 or k == cfg.max_steps:
                    times.append(t0 + k * h)
                    rows.append(y.copy())
                if stop is not None:
                    reason = stop
                    break
    meta = {"scheme": cfg.scheme, "step": h, "max_steps": cfg.max_steps,
            "stop_tolerance": tol, "record_every": cfg.record_every, **flow.describe()}
    return Trajectory(
        times=np.array(times),
        states=np.array(rows),
        n=flow.n,
        has_v=flow.has_v,
        has_t=flow.has_t,
        grad_evals=ledger.count,
        stop_reason=reason,
        steps=k,
        metadata=meta,
    )


# -- export ----------------------------------------------------------------------

def _fmt(value: float) -> str:
    return repr(float(value))


def _atomic_write(path, text: str):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(traj: Trajectory, path, extra: dict[str, Sequence[float]] | None = None):
    """Write samples as CSV; ``extra`` maps column names to per-sample series."""
    header = traj.columns()
    cols = [traj.times[:, None], traj.states]
    for name, series in (extra or {}).items():
        series = np.asarray(series, dtype=float)
        if series.shape != (len(traj),):
            raise ValueError(f"column {name!r} has {series.shape[0]} values for {len(traj)} samples")
        header.append(name)
        cols.append(series[:, None])
    table = np.hstack(cols)
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in table)
    _atomic_write(path, "\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(data: dict, path):
    _atomic_write(path, json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
