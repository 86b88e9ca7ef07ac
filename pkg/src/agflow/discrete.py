"""Discrete baselines: gradient descent, Nesterov's method and heavy ball."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .accounting import count_gradients
from .flows import Trajectory
from .objective import Objective

__all__ = [
    "IterationConfig",
    "gd_step",
    "nesterov_step",
    "heavy_ball_step",
    "run_iterations",
    "nesterov_momentum",
    "SCHEMES",
]

SCHEMES = ("gradient_descent", "nesterov", "heavy_ball")

Schedule = Union[float, Callable[[int], float]]


def nesterov_momentum(k: int) -> float:
    """The standard schedule ``k / (k + 3)``."""
    return k / (k + 3.0)


@dataclass(frozen=True)
class IterationConfig:
    scheme: str = "gradient_descent"
    step: Schedule = 0.1
    momentum: Optional[Schedule] = None  # nesterov defaults to k/(k+3)
    max_iters: int = 10_000
    tolerance: Optional[float] = 1e-6
    guard: float = 1e6

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not callable(self.step) and not self.step > 0:
            raise ValueError("step must be positive")
        if self.momentum is not None and not callable(self.momentum):
            if not 0.0 <= self.momentum < 1.0:
                raise ValueError("momentum must lie in [0, 1)")
        if self.scheme == "heavy_ball" and self.momentum is None:
            raise ValueError("heavy_ball needs a momentum value")
        if int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ValueError("max_iters must be a non-negative integer")
        if self.tolerance is not None and not self.tolerance > 0:
            raise ValueError("tolerance must be positive")

    def step_at(self, k: int) -> float:
        s = self.step(k) if callable(self.step) else self.step
        if not s > 0:
            raise ValueError(f"step at iteration {k} is not positive")
        return float(s)

    def momentum_at(self, k: int) -> float:
        if self.scheme == "gradient_descent":
            return 0.0
        m = self.momentum
        if m is None:
            return nesterov_momentum(k)
        return float(m(k) if callable(m) else m)


def gd_step(obj: Objective, x, s: float) -> np.ndarray:
    if not s > 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    return x - s * obj.gradient(x)


def nesterov_step(obj: Objective, x_k, x_prev, lam: float, s: float) -> np.ndarray:
    """Extrapolate by ``lam (x_k - x_prev)`` and take a gradient step from there."""
    if not s > 0:
        raise ValueError("step must be positive")
    x_k = np.asarray(x_k, dtype=float)
    if lam == 0:
        return x_k - s * obj.gradient(x_k)
    y = x_k + lam * (x_k - np.asarray(x_prev, dtype=float))
    return y - s * obj.gradient(y)


def heavy_ball_step(obj: Objective, x_k, x_prev, lam: float, s: float) -> np.ndarray:
    """Momentum step with the gradient taken at ``x_k``."""
    if not s > 0:
        raise ValueError("step must be positive")
    x_k = np.asarray(x_k, dtype=float)
    if lam == 0:
        return x_k - s * obj.gradient(x_k)
    return x_k + lam * (x_k - np.asarray(x_prev, dtype=float)) - s * obj.gradient(x_k)


def _error(obj: Objective, x) -> float:
    if obj.known_minimizer is not None:
        d = x - obj.known_minimizer
    else:
        d = obj._raw_gradient(x)
    return math.sqrt(float(d @ d))


def run_iterations(cfg: IterationConfig, obj: Objective, x0) -> Trajectory:
    """Iterate until the error drops below ``cfg.tolerance`` or ``max_iters``.

    Sample times are iteration indices.  A non-finite iterate or one with
    ``|x| > cfg.guard`` ends the run with ``stop_reason="domain_exit"``.
    """
    x = np.array(x0, dtype=float)
    if x.shape != (obj.dim,):
        raise ValueError(f"x0 must have shape ({obj.dim},)")
    x_prev = x.copy()
    rows = [x.copy()]
    reason = "max_steps"
    k = 0
    with count_gradients() as ledger, np.errstate(over="ignore", invalid="ignore"):
        if cfg.tolerance is not None and _error(obj, x) <= cfg.tolerance:
            reason = "tolerance_reached"
        else:
            while k < cfg.max_iters:
                s = cfg.step_at(k)
                lam = cfg.momentum_at(k)
                if cfg.scheme == "gradient_descent":
                    x_new = gd_step(obj, x, s)
                elif cfg.scheme == "nesterov":
                    x_new = nesterov_step(obj, x, x_prev, lam, s)
                else:
                    x_new = heavy_ball_step(obj, x, x_prev, lam, s)
                x_prev, x = x, x_new
                k += 1
                rows.append(x.copy())
                if not np.all(np.isfinite(x)) or np.linalg.norm(x) > cfg.guard:
                    reason = "domain_exit"
                    break
                if cfg.tolerance is not None and _error(obj, x) <= cfg.tolerance:
                    reason = "tolerance_reached"
                    break
    meta = {
        "scheme": cfg.scheme,
        "step": "schedule" if callable(cfg.step) else cfg.step,
        "momentum": "k/(k+3)" if cfg.momentum is None and cfg.scheme == "nesterov"
        else ("schedule" if callable(cfg.momentum) else cfg.momentum),
        "max_iters": cfg.max_iters,
        "tolerance": cfg.tolerance,
    }
    return Trajectory(
        times=np.arange(len(rows), dtype=float),
        states=np.array(rows),
        n=obj.dim,
        has_v=False,
        has_t=False,
        grad_evals=ledger.count,
        stop_reason=reason,
        steps=k,
        metadata=meta,
    )
