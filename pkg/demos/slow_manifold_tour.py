"""
Slow manifolds of an accelerated gradient flow
===============================================

The damped flow x'' + mu x' + eta grad f(x) = 0 collapses quickly onto a
graph v = v(x) and then drifts slowly along it.  This script builds the
truncated graph for the first test function, checks the quadratic series,
and watches a trajectory approach the graph.
"""

import numpy as np

from agflow.analysis import distance_series
from agflow.flows import ELFlow, IntegratorConfig, PhaseState, integrate
from agflow.manifold import FlowParams, SlowManifoldExpansion, g_term, graph
from agflow.objective import QuadraticObjective, builtin

f = builtin("example1")          # (x1^2 + 5 x2^2) / 2
params = FlowParams(mu=8.0, eta=1.0)

# First-order graph at (1, 1): -eps * grad f
exp1 = SlowManifoldExpansion(f, params, p=1)
print("v^{eps,1}(1,1) =", graph(exp1, [1.0, 1.0]))

# On a quadratic the odd terms carry Catalan numbers 1, 1, 2, 5, 14
A = np.diag([1.0, 5.0])
q = SlowManifoldExpansion(QuadraticObjective(A), params, p=9)
x = np.array([1.0, 1.0])
for k in range(5):
    ratio = g_term(q, 2 * k + 1, x) / -(np.linalg.matrix_power(A, k + 1) @ x)
    print(f"g_{2 * k + 1} / (-A^{k + 1} x) =", ratio)

# Fast collapse, then a plateau set by the truncation order
traj = integrate(ELFlow(f, params), PhaseState([1.0, 1.0], [0.0, 0.0]),
                 IntegratorConfig(step=1e-3, max_steps=20000, record_every=250))
d1 = distance_series(traj, exp1)
d3 = distance_series(traj, SlowManifoldExpansion(f, params, p=3))
print("\n   t      d(p=1)      d(p=3)")
for t, a, b in zip(traj.times[::8], d1[::8], d3[::8]):
    print(f"{t:5.1f}  {a:10.3e}  {b:10.3e}")
