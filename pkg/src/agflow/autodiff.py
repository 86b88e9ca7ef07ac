"""Truncated Taylor jets for forward-mode derivatives of arbitrary order.

A :class:`Jet` stores the Taylor coefficients ``[c0, c1, ..., cK]`` of a scalar
path ``s -> value(x + s d)`` truncated at order ``K``.  Coefficients are plain
floats or jets of an *inner* level.  Every call to
:func:`directional_derivative` opens a fresh level (a new ``tag``); arithmetic
between jets of different levels treats the inner one as a constant
coefficient of the outer one.  Nesting order-1 jets this way gives exact
Jacobian-vector products of maps that themselves take derivatives, without
ever forming a derivative tensor.

Vectors of jets are ordinary numpy arrays with ``dtype=object``.
"""
from __future__ import annotations

import itertools
import math
from numbers import Number
from typing import Callable

import numpy as np

__all__ = [
    "Jet",
    "JetError",
    "OrderMismatchError",
    "NestingDepthError",
    "MAX_NESTING",
    "constant",
    "variable",
    "jet_vector",
    "jet_arith",
    "jet_transcendental",
    "exp",
    "log",
    "power",
    "primal",
    "nesting_depth",
    "directional_derivative",
    "derivative",
    "gradient",
    "jacobian",
]

MAX_NESTING = 6

_tags = itertools.count(1)


class JetError(ValueError):
    pass


class OrderMismatchError(JetError):
    pass


class NestingDepthError(JetError):
    pass


def primal(a):
    """Innermost constant term of ``a`` (``a`` itself for non-jets)."""
    while isinstance(a, Jet):
        a = a.coeffs[0]
    return a


def nesting_depth(a) -> int:
    if isinstance(a, Jet):
        return 1 + max(nesting_depth(c) for c in a.coeffs)
    if isinstance(a, np.ndarray) and a.dtype == object:
        return max((nesting_depth(c) for c in a.flat), default=0)
    return 0


def _scalar_exp(c):
    if isinstance(c, Jet):
        return c.exp()
    try:
        return math.exp(c)
    except OverflowError:
        return math.inf


def _scalar_log(c):
    if isinstance(c, Jet):
        return c.log()
    if c <= 0:
        raise JetError(f"log of non-positive value {c!r}")
    return math.log(c)


def _map(fn, arr: np.ndarray) -> np.ndarray:
    out = np.empty(arr.shape, dtype=object)
    for i, e in enumerate(arr.flat):
        out.flat[i] = fn(e)
    return out


class Jet:
    """Truncated univariate Taylor series with coefficients of any numeric type."""

    __slots__ = ("coeffs", "tag")
    __array_ufunc__ = None  # let numpy defer to the reflected operators

    def __init__(self, coeffs, tag: int = 0):
        coeffs = tuple(coeffs)
        if not coeffs:
            raise JetError("a jet needs at least one coefficient")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "tag", tag)

    def __setattr__(self, name, value):
        raise AttributeError("Jet is immutable")

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __repr__(self):
        return f"Jet({list(self.coeffs)!r}, tag={self.tag})"

    # -- level bookkeeping --------------------------------------------------
    def _outer(self, other):
        """Classify ``other`` relative to this jet's level.

        Returns 1 if ``other`` is a constant at this level, 0 if it shares
        the level, -1 if ``other`` is the outer jet.
        """
        if not isinstance(other, Jet) or other.tag < self.tag:
            return 1
        if other.tag == self.tag:
            if other.order != self.order:
                raise OrderMismatchError(
                    f"jet orders differ: {self.order} vs {other.order}"
                )
            return 0
        return -1

    # -- arithmetic ---------------------------------------------------------
    def __neg__(self):
        return Jet([-c for c in self.coeffs], self.tag)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, np.ndarray):
            return _map(lambda e: self + e, other)
        rel = self._outer(other)
        if rel == 1:
            return Jet((self.coeffs[0] + other,) + self.coeffs[1:], self.tag)
        if rel == 0:
            return Jet([a + b for a, b in zip(self.coeffs, other.coeffs)], self.tag)
        return other.__radd__(self)

    def __radd__(self, other):
        if isinstance(other, np.ndarray):
            return _map(lambda e: e + self, other)
        rel = self._outer(other)
        if rel == 1:
            return Jet((other + self.coeffs[0],) + self.coeffs[1:], self.tag)
        if rel == 0:
            return Jet([b + a for a, b in zip(self.coeffs, other.coeffs)], self.tag)
        return other.__add__(self)

    def __sub__(self, other):
        if isinstance(other, np.ndarray):
            return _map(lambda e: self - e, other)
        rel = self._outer(other)
        if rel == 1:
            return Jet((self.coeffs[0] - other,) + self.coeffs[1:], self.tag)
        if rel == 0:
            return Jet([a - b for a, b in zip(self.coeffs, other.coeffs)], self.tag)
        return other.__rsub__(self)

    def __rsub__(self, other):
        if isinstance(other, np.ndarray):
            return _map(lambda e: e - self, other)
        rel = self._outer(other)
        if rel == 1:
            return Jet((other - self.coeffs[0],) + tuple(-c for c in self.coeffs[1:]), self.tag)
        if rel == 0:
            return Jet([b - a for a, b in zip(self.coeffs, other.coeffs)], self.tag)
        return other.__sub__(self)

    def __mul__(self, other):
        if isinstance(other, np.ndarray):
            return _map(lambda e: self * e, other)
        rel = self._outer(other)
        if rel == 1:
            return Jet([c * other for c in self.coeffs], self.tag)
        if rel == -1:
            return other.__rmul__(self)
        a, b = self.coeffs, other.coeffs
        if len(a) == 2:
            return Jet((a[0] * b[0], a[0] * b[1] + a[1] * b[0]), self.tag)
        out = []
        for k in range(len(a)):
            acc = a[0] * b[k]
            for j in range(1, k + 1):
                acc = acc + a[j] * b[k - j]
            out.append(acc)
        return Jet(out, self.tag)

    def __rmul__(self, other):
        if isinstance(other, np.ndarray):
            return _map(lambda e: e * self, other)
        rel = self._outer(other)
        if rel == 1:
            return Jet([other * c for c in self.coeffs], self.tag)
        if rel == -1:
            return other.__mul__(self)
        return other.__mul__(self)

    def __truediv__(self, other):
        if isinstance(other, np.ndarray):
            return _map(lambda e: self / e, other)
        rel = self._outer(other)
        if rel == 1:
            if primal(other) == 0:
                raise ZeroDivisionError("division of a jet by zero")
            return Jet([c / other for c in self.coeffs], self.tag)
        if rel == -1:
            return other.__rtruediv__(self)
        return _divide(self.coeffs, other.coeffs, self.tag)

    def __rtruediv__(self, other):
        if isinstance(other, np.ndarray):
            return _map(lambda e: e / self, other)
        # ``other`` is a constant at this level (same-level is handled by
        # __truediv__ of the left operand)
        rel = self._outer(other)
        if rel == -1:
            return other.__truediv__(self)
        num = (other,) + (0.0,) * self.order if rel == 1 else other.coeffs
        return _divide(num, self.coeffs, self.tag)

    def __pow__(self, p):
        if isinstance(p, Jet):
            return (p * self.log()).exp()
        if isinstance(p, (int, np.integer)) or (isinstance(p, float) and p.is_integer() and abs(p) < 2**31):
            n = int(p)
            if n < 0:
                return 1.0 / _ipow(self, -n)
            return _ipow(self, n)
        return self._real_pow(float(p))

    def __rpow__(self, base):
        return (self * _scalar_log(base)).exp()

    def _real_pow(self, alpha: float):
        a = self.coeffs
        if primal(a[0]) <= 0:
            raise JetError("non-integer power needs a positive constant term")
        b = [a[0] ** alpha]
        for k in range(1, len(a)):
            acc = 0.0
            for j in range(1, k + 1):
                acc = acc + ((alpha + 1.0) * j - k) * a[j] * b[k - j]
            b.append(acc / (k * a[0]))
        return Jet(b, self.tag)

    # -- transcendental functions -------------------------------------------
    def exp(self):
        a = self.coeffs
        b = [_scalar_exp(a[0])]
        for k in range(1, len(a)):
            acc = a[1] * b[k - 1]
            for j in range(2, k + 1):
                acc = acc + j * a[j] * b[k - j]
            b.append(acc / k if k > 1 else acc)
        return Jet(b, self.tag)

    def log(self):
        a = self.coeffs
        if primal(a[0]) <= 0:
            raise JetError(f"log of a jet with non-positive constant term {primal(a[0])!r}")
        b = [_scalar_log(a[0])]
        for k in range(1, len(a)):
            acc = a[k]
            for j in range(1, k):
                acc = acc - (j / k) * b[j] * a[k - j]
            b.append(acc / a[0])
        return Jet(b, self.tag)


def _divide(a, b, tag):
    if primal(b[0]) == 0:
        raise ZeroDivisionError("division by a jet with zero constant term")
    c = []
    for k in range(len(b)):
        acc = a[k]
        for j in range(1, k + 1):
            acc = acc - b[j] * c[k - j]
        c.append(acc / b[0])
    return Jet(c, tag)


def _ipow(a, n: int):
    # square-and-multiply; floats and jets share this path so that
    # order-0 jets reproduce plain evaluation bit for bit
    if n == 0:
        if isinstance(a, Jet):
            return Jet((1.0,) + (0.0,) * a.order, a.tag)
        return 1.0
    result = None
    base = a
    while n:
        if n & 1:
            result = base if result is None else result * base
        n >>= 1
        if n:
            base = base * base
    return result


# -- public constructors / spec-level operations -----------------------------

def constant(c, order: int, tag: int = 0) -> Jet:
    """Constant lift: coefficients ``[c, 0, ..., 0]``."""
    return Jet((c,) + (0.0,) * order, tag)


def variable(x0, order: int, tag: int = 0) -> Jet:
    """The path ``x0 + s`` truncated at ``order``."""
    if order == 0:
        return Jet((x0,), tag)
    return Jet((x0, 1.0) + (0.0,) * (order - 1), tag)


def jet_vector(x, d, order: int, tag: int | None = None) -> np.ndarray:
    """Object array of jets for the path ``x + s d`` (all of one order)."""
    x = np.asarray(x)
    d = np.asarray(d)
    if x.ndim != 1 or x.shape != d.shape or x.size == 0:
        raise JetError("jet_vector needs matching non-empty 1-D point and direction")
    if order < 0:
        raise JetError("order must be non-negative")
    if tag is None:
        tag = next(_tags)
    tail = (0.0,) * max(order - 1, 0)
    out = np.empty(x.shape, dtype=object)
    for i in range(x.size):
        out[i] = Jet((x[i], d[i]) + tail, tag) if order else Jet((x[i],), tag)
    return out


_OPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
}


def jet_arith(a: Jet, b: Jet, op: str) -> Jet:
    try:
        fn = _OPS[op]
    except KeyError:
        raise JetError(f"unknown jet operation {op!r}") from None
    if isinstance(a, Jet) and isinstance(b, Jet) and a.tag == b.tag and a.order != b.order:
        raise OrderMismatchError(f"jet orders differ: {a.order} vs {b.order}")
    return fn(a, b)


def jet_transcendental(a: Jet, fn: str, p=None) -> Jet:
    if fn == "exp":
        return a.exp()
    if fn == "log":
        return a.log()
    if fn == "pow":
        if p is None:
            raise JetError("pow needs an exponent")
        return a ** p
    raise JetError(f"unknown jet function {fn!r}")


# -- dispatching elementary functions -----------------------------------------

_obj_exp = np.frompyfunc(_scalar_exp, 1, 1)
_obj_log = np.frompyfunc(_scalar_log, 1, 1)


def exp(x):
    if isinstance(x, Jet):
        return x.exp()
    if isinstance(x, np.ndarray):
        return _obj_exp(x) if x.dtype == object else np.exp(x)
    return math.exp(x)


def log(x):
    if isinstance(x, Jet):
        return x.log()
    if isinstance(x, np.ndarray):
        return _obj_log(x) if x.dtype == object else np.log(x)
    return _scalar_log(x)


def power(x, n: int):
    """Integer power by repeated multiplication (identical for floats and jets)."""
    if isinstance(x, np.ndarray):
        return np.frompyfunc(lambda c: power(c, n), 1, 1)(x) if x.dtype == object else x ** n
    if n < 0:
        return 1.0 / _ipow(x, -n)
    return _ipow(x, n)


# -- derivatives ---------------------------------------------------------------

def _extract(y, tag: int, k: int):
    if isinstance(y, Jet) and y.tag == tag:
        return y.coeffs[k] if k < len(y.coeffs) else 0.0
    if isinstance(y, Jet) and y.tag > tag:
        raise JetError("derivative level escaped its scope")
    return 0.0 if k > 0 else y


def _tidy(arr: np.ndarray) -> np.ndarray:
    if all(isinstance(c, Number) for c in arr.flat):
        return arr.astype(float)
    return arr


def _check_depth(*values):
    depth = max(nesting_depth(np.asarray(v, dtype=object) if not isinstance(v, Jet) else v) for v in values)
    if depth + 1 > MAX_NESTING:
        raise NestingDepthError(f"jet nesting depth {depth + 1} exceeds MAX_NESTING={MAX_NESTING}")


def directional_derivative(fn: Callable, x, d, k: int = 1):
    """``(d/ds)^k fn(x + s d)`` at ``s = 0``.

    ``fn`` maps a 1-D array to a scalar or a 1-D array and must accept object
    arrays of jets.  For ``k = 1`` this is the Jacobian-vector product.
    """
    if k < 0:
        raise JetError("derivative order must be non-negative")
    x = np.asarray(x)
    d = np.asarray(d)
    _check_depth(x, d)
    tag = next(_tags)
    X = jet_vector(x, d, k, tag)
    try:
        y = fn(X)
    except (TypeError, AttributeError) as exc:
        raise JetError(f"map is not jet-evaluatable: {exc}") from exc
    scale = math.factorial(k)
    if isinstance(y, np.ndarray):
        out = np.empty(y.shape, dtype=object)
        for i, yi in enumerate(y.flat):
            c = _extract(yi, tag, k)
            out.flat[i] = c * scale if scale != 1 else c
        return _tidy(out)
    c = _extract(y, tag, k)
    return c * scale if scale != 1 else c


def derivative(fn: Callable, t, k: int = 1):
    """``(d/ds)^k fn(t + s)`` at ``s = 0`` for a scalar argument."""
    _check_depth(t)
    tag = next(_tags)
    y = fn(variable(t, k, tag))
    scale = math.factorial(k)
    if isinstance(y, np.ndarray):
        out = np.empty(y.shape, dtype=object)
        for i, yi in enumerate(y.flat):
            c = _extract(yi, tag, k)
            out.flat[i] = c * scale if scale != 1 else c
        return _tidy(out)
    c = _extract(y, tag, k)
    return c * scale if scale != 1 else c


def gradient(fn: Callable, x):
    """Gradient of a scalar map, one jet pass per coordinate direction."""
    x = np.asarray(x)
    n = x.size
    out = np.empty(n, dtype=object)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        out[i] = directional_derivative(fn, x, e, 1)
    return _tidy(out)


def jacobian(fn: Callable, x) -> np.ndarray:
    """Dense Jacobian (columns are JVPs with the unit vectors)."""
    x = np.asarray(x)
    n = x.size
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        cols.append(np.atleast_1d(directional_derivative(fn, x, e, 1)))
    return np.column_stack(cols)
