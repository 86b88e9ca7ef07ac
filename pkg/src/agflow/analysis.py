"""Lyapunov functions, manifold diagnostics and warm starts."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import autodiff
from .flows import PhaseState, Trajectory, reduced_rhs, write_json
from .manifold import (
    FlowParams,
    SlowManifoldExpansion,
    _AutonomousTerms,
    graph,
)
from .objective import Objective

__all__ = [
    "heavy_ball_energy",
    "reduced_lyapunov",
    "lyapunov_gradient_identity_residual",
    "manifold_distance",
    "warm_start_cheap",
    "warm_start_projected",
    "ProjectedStart",
    "convergence_order",
    "DiagnosticsReport",
    "energy_series",
    "distance_series",
    "lyapunov_series",
    "window_amplitude",
    "fd_gradient",
]

_FD_SCALE = np.finfo(float).eps ** (1.0 / 3.0)


def _require_minimizer(obj: Objective):
    if obj.known_minimizer is None:
        raise ValueError("this diagnostic needs a known minimizer")


def heavy_ball_energy(params: FlowParams, obj: Objective, s: PhaseState) -> float:
    """``eta (f(x) - f*) + |v|^2 / 2``; non-increasing along the EL flow."""
    _require_minimizer(obj)
    kinetic = 0.0 if s.v is None else 0.5 * float(s.v @ s.v)
    return params.eta * (float(obj(s.x)) - obj.minimum_value) + kinetic


def _default_r(exp: SlowManifoldExpansion) -> int:
    return max((exp.p - 1) // 2, 0)


def reduced_lyapunov(exp: SlowManifoldExpansion, x, r: Optional[int] = None) -> float:
    """Lyapunov function of the autonomous reduced flow.

    ``E = eps eta (f - f*) + sum_{k=1}^r eps^{2k+1}/2 sum_l <g_l, g_{2k-l}>``
    with ``2r + 1 <= p`` (``r`` defaults to the largest such value).  Its
    gradient is minus the reduced velocity.
    """
    if exp.mode != "autonomous_euclidean":
        raise ValueError("reduced_lyapunov needs the autonomous Euclidean expansion")
    _require_minimizer(exp.objective)
    if r is None:
        r = _default_r(exp)
    if r < 0 or 2 * r + 1 > 2 * exp.p + 1:
        raise ValueError(f"r={r} is not supported by truncation p={exp.p}")
    x = np.asarray(x, dtype=float)
    eps, eta = exp.epsilon, exp.params.eta
    value = eps * eta * (float(exp.objective(x)) - exp.objective.minimum_value)
    if r == 0:
        return value
    g = _AutonomousTerms(exp).odd(x, r - 1)  # g_1, g_3, ..., g_{2r-1}
    for k in range(1, r + 1):
        inner = sum(float(g[i] @ g[k - 1 - i]) for i in range(k))
        value += 0.5 * eps ** (2 * k + 1) * inner
    return value


def fd_gradient(fn, x, h: Optional[float] = None) -> np.ndarray:
    """Central-difference gradient with step ``eps^{1/3} (1 + |x|)``."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = _FD_SCALE * (1.0 + np.linalg.norm(x))
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return out


def lyapunov_gradient_identity_residual(exp: SlowManifoldExpansion, x, r: Optional[int] = None) -> float:
    """``|FD grad E(x) + x'|`` for the reduced flow truncated at order ``2r+1``."""
    if r is None:
        r = _default_r(exp)
    x = np.asarray(x, dtype=float)
    grad_e = fd_gradient(lambda y: reduced_lyapunov(exp, y, r), x)
    if 2 * r + 1 == exp.p or 2 * r + 2 == exp.p:
        velocity = reduced_rhs(exp, x)
    else:
        trimmed = SlowManifoldExpansion(exp.objective, exp.params, 2 * r + 1, exp.mode)
        velocity = reduced_rhs(trimmed, x)
    return float(np.linalg.norm(grad_e + velocity))


def manifold_distance(exp: SlowManifoldExpansion, s: PhaseState) -> float:
    """``|v - v^{eps,p}(x)|``."""
    if not exp.autonomous:
        raise ValueError("manifold_distance needs an autonomous expansion")
    if s.v is None:
        raise ValueError("state has no velocity")
    return float(np.linalg.norm(s.v - graph(exp, s.x)))


def warm_start_cheap(exp: SlowManifoldExpansion, x0) -> PhaseState:
    """Start on the truncated graph: ``(x0, v^{eps,p}(x0))``."""
    if not exp.autonomous:
        raise ValueError("warm starts need an autonomous expansion")
    x0 = np.asarray(x0, dtype=float)
    return PhaseState(x0.copy(), graph(exp, x0))


@dataclass
class ProjectedStart:
    state: PhaseState
    converged: bool
    iterations: int
    value: float


def _graph_any(exp: SlowManifoldExpansion, X):
    # graph() coerces to floats; this variant also runs on jet vectors
    terms = _AutonomousTerms(exp).odd(X, (exp.p - 1) // 2) if exp.p > 0 else []
    eps = exp.epsilon
    out = 0.0 * X
    for j, g in enumerate(terms):
        out = out + eps ** (2 * j + 1) * g
    return out


def _curvature_probe(exp: SlowManifoldExpansion, x) -> float:
    obj = exp.objective
    cols = [
        autodiff.directional_derivative(obj._raw_gradient, x, e, 1)
        for e in np.eye(obj.dim)
    ]
    return float(max(np.linalg.norm(c) for c in cols))


def warm_start_projected(
    exp: SlowManifoldExpansion,
    x0,
    v0,
    *,
    max_iter: int = 500,
    tol: float = 1e-10,
) -> ProjectedStart:
    """Closest point of the truncated manifold to ``(x0, v0)``.

    Minimizes ``|x - x0|^2 + |v^{eps,p}(x) - v0|^2`` by gradient descent with
    step ``0.1 / (1 + eps eta L)``, ``L`` a crude curvature probe of ``f`` at
    ``x0``.  The step is halved whenever it fails to decrease the objective.
    Non-convergence returns the best iterate with ``converged=False``.
    """
    if not exp.autonomous:
        raise ValueError("warm starts need an autonomous expansion")
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)

    def objective(x):
        dv = _graph_any(exp, x) - v0
        dx = x - x0
        return (dx * dx).sum() + (dv * dv).sum()

    lip = _curvature_probe(exp, x0)
    step = 0.1 / (1.0 + exp.epsilon * exp.params.eta * lip)
    x = x0.copy()
    value = float(objective(x))
    converged = False
    it = 0
    while it < max_iter:
        grad = autodiff.gradient(objective, x)
        if np.linalg.norm(grad) <= tol:
            converged = True
            break
        it += 1
        trial = x - step * grad
        trial_value = float(objective(trial))
        # slack keeps rounding noise near the minimum from collapsing the step
        slack = 1e-13 * (1.0 + abs(value))
        while not trial_value <= value + slack and step > 1e-12:
            step *= 0.5
            trial = x - step * grad
            trial_value = float(objective(trial))
        if not trial_value <= value + slack:
            break
        x, value = trial, trial_value
    if not converged:
        warnings.warn(
            f"projected warm start did not converge in {it} iterations", RuntimeWarning, stacklevel=2
        )
    return ProjectedStart(PhaseState(x, graph(exp, x)), converged, it, value)


def convergence_order(errors: Sequence[float], epsilons: Optional[Sequence[float]] = None) -> float:
    """Least-squares slope of ``log(error)`` against ``log(eps)``.

    Without ``epsilons`` the samples are taken to follow successive halvings.
    """
    err = np.asarray(errors, dtype=float)
    if err.ndim != 1 or err.size < 3:
        raise ValueError("need at least three error samples")
    if np.any(~(err > 0)):
        raise ValueError("errors must be positive")
    if epsilons is None:
        eps = 0.5 ** np.arange(err.size)
    else:
        eps = np.asarray(epsilons, dtype=float)
        if eps.shape != err.shape or np.any(~(eps > 0)):
            raise ValueError("epsilons must be positive and match errors")
    slope, _ = np.polyfit(np.log(eps), np.log(err), 1)
    return float(slope)


# -- series along trajectories ------------------------------------------------------

def energy_series(traj: Trajectory, params: FlowParams, obj: Objective) -> np.ndarray:
    return np.array([heavy_ball_energy(params, obj, traj.state(i)) for i in range(len(traj))])


def distance_series(traj: Trajectory, exp: SlowManifoldExpansion) -> np.ndarray:
    return np.array([manifold_distance(exp, traj.state(i)) for i in range(len(traj))])


def lyapunov_series(traj: Trajectory, exp: SlowManifoldExpansion) -> np.ndarray:
    return np.array([reduced_lyapunov(exp, x) for x in traj.x])


def window_amplitude(times, values, lo: float, hi: float) -> float:
    """Largest ``|value|`` over samples with ``lo <= time <= hi``."""
    times = np.asarray(times)
    values = np.asarray(values)
    mask = (times >= lo) & (times <= hi)
    if not mask.any():
        raise ValueError("no samples in window")
    return float(np.max(np.abs(values[mask])))


@dataclass
class DiagnosticsReport:
    """Named series (time-aligned with ``times``) and scalar summaries."""

    times: np.ndarray
    series: dict = field(default_factory=dict)
    summaries: dict = field(default_factory=dict)

    def add_series(self, name: str, values):
        values = np.asarray(values, dtype=float)
        if values.shape != np.shape(self.times):
            raise ValueError(f"series {name!r} is not aligned with the trajectory")
        self.series[name] = values

    def to_dict(self) -> dict:
        return {
            "times": np.asarray(self.times).tolist(),
            "series": {k: v.tolist() for k, v in self.series.items()},
            "summaries": dict(self.summaries),
        }

    def to_json(self, path=None) -> str:
        if path is not None:
            write_json(self.to_dict(), path)
        return json.dumps(self.to_dict(), sort_keys=True)
