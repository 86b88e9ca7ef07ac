"""
Starting on the slow manifold
=============================

A cold start (v0 = 0) spends a short transient falling onto the slow
manifold.  Starting at v0 = v^{eps,1}(x0) costs one extra gradient and
skips that transient.  Both runs stop at |x - x*| <= 1e-6.
"""

from agflow.analysis import warm_start_projected
from agflow.manifold import FlowParams, SlowManifoldExpansion
from agflow.objective import builtin
from agflow.reproduce import warmstart_curves

cold, warm = warmstart_curves("example1", tol=1e-6, step=1e-2)
print("cold start: steps", cold.steps, "gradients", cold.grad_evals)
print("warm start: steps", warm.steps, "gradients", warm.grad_evals + 1, "(one for the setup)")

# The saving is set by the length of the skipped transient, about 0.1 time
# units, so it stays a small fraction of a long run at any step size.
print("saving:", cold.grad_evals - warm.grad_evals - 1)

# The projected start moves x0 as well, to the nearest point of the graph
exp = SlowManifoldExpansion(builtin("example1"), FlowParams(mu=8.0), p=1)
res = warm_start_projected(exp, [1.0, 1.0], [0.0, 0.0])
print("projected start:", res.state.x, res.state.v, "converged:", res.converged)
