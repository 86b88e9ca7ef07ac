"""
Nesterov's flow and its reduced flow
====================================

x'' + (rho / t) x' + grad f(x) = 0 has no fixed time scale, but in the
extended phase space (x, v, t) it still has a slow manifold.  Resumming
the expansion gives x' = -S t grad f(x) with S = eps / (1 + eps), which is
plain gradient flow in the time t_hat = S t^2 / 2.
"""

import numpy as np

from agflow.objective import TABLE1
from agflow.reproduce import nesterov_vs_reduced

for name in TABLE1:
    full, red = nesterov_vs_reduced(name, record_every=100)
    gap = np.linalg.norm(full.x - red.x, axis=1)
    n = len(gap) // 4
    print(f"{name}: rho={TABLE1[name]['rho']}")
    print("   max gap, first quarter:", f"{gap[:n].max():.3e}")
    print("   max gap, last quarter: ", f"{gap[-n:].max():.3e}")
    print("   |x(40)| Nesterov / reduced:",
          f"{np.linalg.norm(full.x[-1]):.3e} / {np.linalg.norm(red.x[-1]):.3e}")
