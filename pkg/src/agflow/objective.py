"""Convex objectives with jet-evaluatable values and gradients."""
from __future__ import annotations

import math
from numbers import Number
from typing import Callable, Optional

import numpy as np

from . import autodiff
from .accounting import charge
from .autodiff import exp, power
from .expression import ExpressionAst, parse_expression

__all__ = [
    "Objective",
    "QuadraticObjective",
    "builtin",
    "gradient",
    "BUILTIN_NAMES",
    "TABLE1",
]

DEFAULT_DOMAIN = (-10.0, 10.0)


def _vec(*components) -> np.ndarray:
    if all(isinstance(c, Number) for c in components):
        return np.array(components, dtype=float)
    out = np.empty(len(components), dtype=object)
    out[:] = components
    return out


class Objective:
    """A scalar objective on R^n.

    Parameters
    ----------
    dim : int
        Number of variables.
    func : callable
        Maps a 1-D array (float or object array of jets) to a scalar.
    grad : callable, optional
        Analytic gradient accepting the same inputs as ``func``.  When absent
        the gradient is computed with one jet pass per coordinate.
    known_minimizer : array_like, optional
        Stored, not computed.  Checked to have ``|grad| <= 1e-10``.
    smoothness_order : float
        User-declared order ``r`` of trusted derivatives (``inf`` for C^inf).
    domain : (lo, hi)
        Box ``[lo, hi]^n``.  Points outside are allowed and only flagged.
    """

    def __init__(
        self,
        dim: int,
        func: Callable,
        *,
        grad: Optional[Callable] = None,
        known_minimizer=None,
        smoothness_order: float = math.inf,
        domain: tuple[float, float] = DEFAULT_DOMAIN,
        name: str | None = None,
        source: str | None = None,
    ):
        if dim < 1:
            raise ValueError("dim must be at least 1")
        if smoothness_order < 1:
            raise ValueError("smoothness_order must be at least 1")
        lo, hi = domain
        if not lo < hi:
            raise ValueError("domain must satisfy lo < hi")
        self.dim = int(dim)
        self.func = func
        self.grad_func = grad
        self.smoothness_order = smoothness_order
        self.domain = (float(lo), float(hi))
        self.name = name
        self.source = source
        self.known_minimizer = None
        self._f_min = None
        if known_minimizer is not None:
            xs = np.asarray(known_minimizer, dtype=float)
            if xs.shape != (self.dim,):
                raise ValueError(f"known_minimizer must have shape ({self.dim},)")
            g = self._raw_gradient(xs)
            if np.linalg.norm(g) > 1e-10:
                raise ValueError(
                    f"gradient at known_minimizer has norm {np.linalg.norm(g):.3e} > 1e-10"
                )
            xs.setflags(write=False)
            self.known_minimizer = xs
            self._f_min = float(func(xs))

    @classmethod
    def from_expression(cls, src: str, dim: int, **kwargs) -> "Objective":
        ast = parse_expression(src, dim)
        kwargs.setdefault("source", src)
        return cls(dim, ast, **kwargs)

    def __repr__(self):
        label = self.name or self.source or "custom"
        return f"{type(self).__name__}({label!r}, dim={self.dim})"

    def __call__(self, x):
        return self.func(x)

    @property
    def minimum_value(self) -> float:
        if self._f_min is None:
            raise ValueError("objective has no known minimizer")
        return self._f_min

    def _raw_gradient(self, x):
        if self.grad_func is not None:
            return self.grad_func(x)
        return autodiff.gradient(self.func, x)

    def gradient(self, x):
        """Gradient at ``x``; charges one evaluation to active ledgers."""
        charge(1)
        return self._raw_gradient(x)

    def in_domain(self, x) -> bool:
        lo, hi = self.domain
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= lo) & (x <= hi)))


def gradient(obj: Objective, x):
    return obj.gradient(x)


class QuadraticObjective(Objective):
    """``f(x) = 1/2 x^T A x`` with symmetric positive-definite ``A``."""

    def __init__(self, A, **kwargs):
        A = np.array(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if not np.allclose(A, A.T, rtol=0.0, atol=1e-12):
            raise ValueError("A must be symmetric to 1e-12")
        try:
            np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            raise ValueError("A must be positive definite") from None
        A.setflags(write=False)
        self.A = A
        n = A.shape[0]
        kwargs.setdefault("known_minimizer", np.zeros(n))
        kwargs.setdefault("name", "quadratic")
        super().__init__(n, self._value, grad=self._grad, **kwargs)

    def _value(self, x):
        return 0.5 * (x @ (self.A @ x))

    def _grad(self, x):
        return self.A @ x


# -- Table 1 functions ----------------------------------------------------------

_W1 = np.array([1.0, 5.0])
_W2 = np.array([1.0, 50.0])


def _grad_example1(x):
    return _W1 * x


def _grad_example2(x):
    return _W2 * power(x, 3)


def _grad_example3(x):
    # softmax weights written so neither exponential overflows on the domain box
    a = power(x[0], 2)
    b = 4.0 * power(x[1], 2)
    w1 = 1.0 / (1.0 + exp(b - a))
    w2 = 1.0 / (1.0 + exp(a - b))
    return _vec(2.0 * x[0] * w1, 8.0 * x[1] * w2)


_BUILTINS = {
    "example1": ("0.5*(x1^2 + 5*x2^2)", _grad_example1),
    "example2": ("0.25*(x1^4 + 50*x2^4)", _grad_example2),
    "example3": ("log(exp(x1^2) + exp(4*x2^2))", _grad_example3),
}

BUILTIN_NAMES = tuple(_BUILTINS)

# (mu, eta) for the autonomous flow and rho for the Nesterov flow
TABLE1 = {
    "example1": {"mu": 8.0, "eta": 1.0, "rho": 3.0},
    "example2": {"mu": 2.0, "eta": 1.0, "rho": 1.5},
    "example3": {"mu": 4.0, "eta": 1.0, "rho": 3.0},
}


def builtin(name: str, *, analytic_gradient: bool = True) -> Objective:
    """One of the three two-dimensional test functions, minimized at the origin."""
    try:
        src, grad = _BUILTINS[name]
    except KeyError:
        raise ValueError(
            f"unknown builtin objective {name!r}; choose from {', '.join(BUILTIN_NAMES)}"
        ) from None
    ast: ExpressionAst = parse_expression(src, 2)
    return Objective(
        2,
        ast,
        grad=grad if analytic_gradient else None,
        known_minimizer=np.zeros(2),
        name=name,
        source=src,
    )
