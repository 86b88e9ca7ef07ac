"""Gradient-evaluation ledger.

Every call to :meth:`agflow.objective.Objective.gradient` charges one
evaluation to the innermost active ledger (and to every enclosing one).
"""
from __future__ import annotations

import contextlib
import contextvars

_active: contextvars.ContextVar[tuple] = contextvars.ContextVar("agflow_ledgers", default=())


class GradientLedger:
    __slots__ = ("count",)

    def __init__(self):
        self.count = 0

    def __repr__(self):
        return f"GradientLedger(count={self.count})"


def charge(n: int = 1) -> None:
    for ledger in _active.get():
        ledger.count += n


@contextlib.contextmanager
def count_gradients():
    """Context manager yielding a ledger that tallies gradient evaluations."""
    ledger = GradientLedger()
    token = _active.set(_active.get() + (ledger,))
    try:
        yield ledger
    finally:
        _active.reset(token)
