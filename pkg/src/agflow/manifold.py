"""Series expansions of the slow manifold of accelerated gradient flows.

Autonomous case (constant damping ``mu`` and gain ``eta``): the manifold is
the graph ``v = sum_k eps^k g_k(x)`` with ``eps = 1/mu`` and

    g_1 = -eta H^{-1} grad f,   g_{2k} = 0,
    g_{2k+1} = -sum_{l=1}^{2k-1} (D g_l) g_{2k-l}.

Non-autonomous (Nesterov) case, ``eps = 1/rho``:

    g_1 = -t grad f,   g_2 = t grad f,
    g_k = -t [ d/dt g_{k-1} + sum_{j=1}^{k-2} (D g_j) g_{k-j-1} ],   k >= 3.

All products ``(D g) d`` are Jacobian-vector products taken with nested jets,
so no derivative tensor of ``f`` is ever formed.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .autodiff import derivative, directional_derivative
from .objective import Objective

__all__ = [
    "FlowParams",
    "SlowManifoldExpansion",
    "MODES",
    "g_term",
    "g_term_nonautonomous",
    "gradient_part_nonautonomous",
    "graph",
    "phi_term",
    "resummed_coefficient",
    "metric_solve",
]

MODES = ("autonomous_euclidean", "autonomous_metric", "nonautonomous")


@dataclass(frozen=True, eq=False)
class FlowParams:
    """Constants of the accelerated flows.

    ``mu`` is the damping and ``eta`` the gradient gain of the autonomous
    flow; ``rho`` is the Nesterov coefficient.  ``epsilon`` is derived
    (``1/mu``, or ``1/rho`` when only ``rho`` is set) and cannot be set.
    """

    mu: Optional[float] = None
    eta: float = 1.0
    metric: Optional[np.ndarray] = None
    alpha0: Optional[float] = None
    rho: Optional[float] = None
    _chol: Optional[tuple] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.mu is not None and not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.rho is not None and not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.alpha0 is not None:
            if self.mu is None:
                raise ValueError("alpha0 needs mu")
            if self.alpha0 > math.log(self.mu):
                raise ValueError(f"alpha0={self.alpha0} violates alpha0 <= log(mu)={math.log(self.mu)}")
        if self.metric is not None:
            H = np.array(self.metric, dtype=float)
            if H.ndim != 2 or H.shape[0] != H.shape[1]:
                raise ValueError("metric must be a square matrix")
            if not np.allclose(H, H.T, rtol=0.0, atol=1e-12):
                raise ValueError("metric must be symmetric")
            try:
                chol = scipy.linalg.cho_factor(H, lower=True)
            except np.linalg.LinAlgError:
                raise ValueError("metric must be positive definite") from None
            H.setflags(write=False)
            object.__setattr__(self, "metric", H)
            object.__setattr__(self, "_chol", chol)

    @property
    def epsilon(self) -> float:
        if self.mu is not None:
            return 1.0 / self.mu
        if self.rho is not None:
            return 1.0 / self.rho
        raise ValueError("epsilon needs mu or rho")


def metric_solve(params: FlowParams, g):
    """``H^{-1} g`` through the stored Cholesky factor (identity if no metric)."""
    if params.metric is None:
        return g
    if isinstance(g, np.ndarray) and g.dtype != object:
        return scipy.linalg.cho_solve(params._chol, g)
    # forward/back substitution on jets
    L = params._chol[0]
    n = L.shape[0]
    y = [None] * n
    for i in range(n):
        acc = g[i]
        for j in range(i):
            acc = acc - L[i, j] * y[j]
        y[i] = acc / L[i, i]
    z = [None] * n
    for i in reversed(range(n)):
        acc = y[i]
        for j in range(i + 1, n):
            acc = acc - L[j, i] * z[j]
        z[i] = acc / L[i, i]
    out = np.empty(n, dtype=object)
    out[:] = z
    return out


@dataclass(frozen=True, eq=False)
class SlowManifoldExpansion:
    """Truncation order ``p`` of the slow-manifold series for one flow."""

    objective: Objective
    params: FlowParams
    p: int = 1
    mode: Optional[str] = None
    time_window: Optional[tuple[float, float]] = None

    def __post_init__(self):
        mode = self.mode
        if mode is None:
            mode = "autonomous_metric" if self.params.metric is not None else "autonomous_euclidean"
            object.__setattr__(self, "mode", mode)
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if int(self.p) != self.p or self.p < 0:
            raise ValueError("truncation p must be a non-negative integer")
        if self.p > self.objective.smoothness_order:
            raise ValueError(
                f"truncation p={self.p} exceeds smoothness_order={self.objective.smoothness_order}"
            )
        if mode == "nonautonomous":
            if self.params.rho is None:
                raise ValueError("nonautonomous mode needs rho")
        elif self.params.mu is None:
            raise ValueError("autonomous modes need mu")
        if mode == "autonomous_metric" and self.params.metric is None:
            raise ValueError("autonomous_metric mode needs a metric")
        if mode == "autonomous_euclidean" and self.params.metric is not None:
            raise ValueError("autonomous_euclidean mode cannot carry a metric")
        if self.params.metric is not None and self.params.metric.shape[0] != self.objective.dim:
            raise ValueError("metric size does not match objective dimension")
        if self.epsilon >= 1.0:
            warnings.warn(
                f"epsilon={self.epsilon:g} >= 1: the manifold may not persist",
                RuntimeWarning,
                stacklevel=3,
            )

    @property
    def epsilon(self) -> float:
        if self.mode == "nonautonomous":
            return 1.0 / self.params.rho
        return 1.0 / self.params.mu

    @property
    def autonomous(self) -> bool:
        return self.mode != "nonautonomous"


# -- evaluators ---------------------------------------------------------------

class _AutonomousTerms:
    """Call-local evaluator of g_1, g_3, ... memoized per input point."""

    def __init__(self, exp: SlowManifoldExpansion):
        self.obj = exp.objective
        self.params = exp.params
        self.eta = exp.params.eta
        self._memo: dict[int, tuple] = {}

    def odd(self, X, m: int) -> list:
        """``[g_1(X), g_3(X), ..., g_{2m+1}(X)]``."""
        entry = self._memo.get(id(X))
        if entry is None:
            g1 = -self.eta * metric_solve(self.params, self.obj.gradient(X))
            entry = (X, [g1])
            self._memo[id(X)] = entry
        terms = entry[1]
        while len(terms) <= m:
            j = len(terms)
            acc = None
            for i in range(j):
                # l = 2i+1 pairs with 2j-l = 2(j-i)-1
                jvp = directional_derivative(
                    lambda Y, i=i: self.odd(Y, i)[i], X, terms[j - 1 - i], 1
                )
                acc = jvp if acc is None else acc + jvp
            terms.append(-acc)
        return terms


class _NonautonomousTerms:
    """Call-local evaluator of g_k(x, t), memoized per (x, t) input pair."""

    def __init__(self, exp: SlowManifoldExpansion):
        self.obj = exp.objective
        self._memo: dict[tuple, tuple] = {}

    def terms(self, X, T, k: int) -> list:
        """``[g_1(X,T), ..., g_k(X,T)]``."""
        key = (id(X), id(T))
        entry = self._memo.get(key)
        if entry is None:
            grad = self.obj.gradient(X)
            entry = (X, T, [-T * grad, T * grad])
            self._memo[key] = entry
        g = entry[2]
        while len(g) < k:
            m = len(g) + 1  # index of the term being built
            acc = derivative(lambda S, m=m: self.terms(X, S, m - 1)[m - 2], T, 1)
            for j in range(1, m - 1):
                acc = acc + directional_derivative(
                    lambda Y, j=j: self.terms(Y, T, j)[j - 1], X, g[m - j - 2], 1
                )
            g.append(-T * acc)
        return g[:k] if k < len(g) else g


def _point(exp: SlowManifoldExpansion, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (exp.objective.dim,):
        raise ValueError(f"point must have shape ({exp.objective.dim},)")
    return x


def _require_autonomous(exp: SlowManifoldExpansion):
    if not exp.autonomous:
        raise ValueError("operation needs an autonomous expansion")


def _check_odd_order(exp: SlowManifoldExpansion, k: int):
    if k < 1:
        raise ValueError("term index must be at least 1")
    if k > 2 * exp.p + 1:
        raise ValueError(f"term index {k} exceeds supported order 2p+1={2 * exp.p + 1}")
    needed = (k + 1) // 2  # g_{2j+1} uses derivatives of f up to order j+1
    if needed > exp.objective.smoothness_order:
        raise ValueError(
            f"g_{k} needs derivatives of order {needed} > smoothness_order "
            f"{exp.objective.smoothness_order}"
        )


def g_term(exp: SlowManifoldExpansion, k: int, x) -> np.ndarray:
    """The autonomous term ``g_k(x)`` (zero for even ``k``)."""
    _require_autonomous(exp)
    _check_odd_order(exp, k)
    x = _point(exp, x)
    if k % 2 == 0:
        return np.zeros_like(x)
    return _AutonomousTerms(exp).odd(x, (k - 1) // 2)[-1]


def graph(exp: SlowManifoldExpansion, x, t: float | None = None) -> np.ndarray:
    """Truncated slow-manifold velocity ``sum_{k<=p} eps^k g_k``."""
    x = _point(exp, x)
    eps = exp.epsilon
    if exp.p == 0:
        return np.zeros_like(x)
    if exp.autonomous:
        m = (exp.p - 1) // 2
        terms = _AutonomousTerms(exp).odd(x, m)
        out = np.zeros_like(x)
        for j, g in enumerate(terms):
            out = out + eps ** (2 * j + 1) * g
        return out
    if t is None:
        raise ValueError("nonautonomous graph needs t")
    t = _time(exp, t)
    terms = _NonautonomousTerms(exp).terms(x, t, exp.p)
    out = np.zeros_like(x)
    for k, g in enumerate(terms, start=1):
        out = out + eps ** k * g
    return out


def phi_term(exp: SlowManifoldExpansion, k: int, x) -> float:
    """Scalar potential with ``grad phi_k = g_k`` (Euclidean metric only)."""
    if exp.mode != "autonomous_euclidean":
        raise ValueError("phi_term needs the autonomous Euclidean expansion")
    _check_odd_order(exp, k)
    x = _point(exp, x)
    if k % 2 == 0:
        return 0.0
    if k == 1:
        return -exp.params.eta * float(exp.objective(x))
    j = (k - 1) // 2
    g = _AutonomousTerms(exp).odd(x, j - 1)
    # sum over odd l in 1..2j-1 of <g_l, g_{2j-l}>
    acc = 0.0
    for i in range(j):
        acc += float(np.dot(g[i], g[j - 1 - i]))
    return -0.5 * acc


def _time(exp: SlowManifoldExpansion, t) -> float:
    t = float(t)
    if not t > 0:
        raise ValueError("nonautonomous terms need t > 0")
    if exp.time_window is not None:
        lo, hi = exp.time_window
        if not lo <= t <= hi:
            warnings.warn(
                f"t={t:g} is outside the configured window [{lo:g}, {hi:g}]",
                RuntimeWarning,
                stacklevel=3,
            )
    return t


def _check_nonautonomous(exp: SlowManifoldExpansion, k: int):
    if exp.autonomous:
        raise ValueError("operation needs a nonautonomous expansion")
    if k < 1:
        raise ValueError("term index must be at least 1")
    if k > 2 * exp.objective.smoothness_order:
        raise ValueError(
            f"g_{k} needs derivatives of order {math.ceil(k / 2)} beyond smoothness_order"
        )


def g_term_nonautonomous(exp: SlowManifoldExpansion, k: int, x, t: float) -> np.ndarray:
    _check_nonautonomous(exp, k)
    x = _point(exp, x)
    t = _time(exp, t)
    return _NonautonomousTerms(exp).terms(x, t, k)[k - 1]


def gradient_part_nonautonomous(exp: SlowManifoldExpansion, k: int, x, t: float) -> np.ndarray:
    """The part of ``g_k(x, t)`` proportional to ``t grad f(x)``.

    ``g_k`` is a polynomial in ``t`` whose linear coefficient is a multiple of
    ``grad f``; it is read off exactly with a jet in the time slot at 0.
    """
    _check_nonautonomous(exp, k)
    x = _point(exp, x)
    t = _time(exp, t)
    ev = _NonautonomousTerms(exp)
    slope = derivative(lambda S: ev.terms(x, S, k)[k - 1], 0.0, 1)
    return t * slope


def resummed_coefficient(epsilon: float, r: float) -> float:
    """``S_r(eps) = eps (1 - eps^{2r}) / (1 + eps)``; ``r = inf`` gives ``eps/(1+eps)``."""
    if r < 0:
        raise ValueError("r must be non-negative")
    if math.isinf(r):
        if not 0 < epsilon < 1:
            raise ValueError("the r -> inf limit needs 0 < epsilon < 1")
        return epsilon / (1.0 + epsilon)
    return epsilon * (1.0 - epsilon ** (2 * r)) / (1.0 + epsilon)
