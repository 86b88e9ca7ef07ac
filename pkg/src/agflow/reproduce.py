"""Data bundles behind the example figures (phase portraits, d(t), warm starts, Nesterov)."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import analysis
from .flows import (
    ELFlow,
    IntegratorConfig,
    NesterovFlow,
    PhaseState,
    ReducedFlow,
    integrate,
    write_csv,
    write_json,
    _atomic_write,
    _fmt,
)
from .manifold import FlowParams, SlowManifoldExpansion, graph
from .objective import BUILTIN_NAMES, TABLE1, builtin

__all__ = [
    "FIGURES",
    "X0",
    "NESTEROV_T0",
    "NESTEROV_V0",
    "el_trajectory",
    "distance_curves",
    "warmstart_curves",
    "nesterov_vs_reduced",
    "manifold_grid",
    "stable_step",
    "reproduce",
]

FIGURES = ("fig3", "fig4", "fig5", "fig6")
X0 = (1.0, 1.0)
NESTEROV_T0 = 0.1
NESTEROV_V0 = (2.0, 0.0)
STEP = 1e-3
AUTONOMOUS_HORIZON = 20.0
NONAUTONOMOUS_HORIZON = 40.0


def _params(name: str) -> FlowParams:
    row = TABLE1[name]
    return FlowParams(mu=row["mu"], eta=row["eta"])


def el_trajectory(name: str, horizon: float = AUTONOMOUS_HORIZON, step: float = STEP, record_every: int = 1,
                  x0=X0, v0=(0.0, 0.0)):
    obj = builtin(name)
    cfg = IntegratorConfig("rk4", step, int(round(horizon / step)), None, record_every)
    return integrate(ELFlow(obj, _params(name)), PhaseState(x0, v0), cfg)


def distance_curves(name: str = "example1", orders=(1, 3), horizon: float = AUTONOMOUS_HORIZON,
                    step: float = STEP, record_every: int = 1):
    """EL trajectory from ``(x0, 0)`` and ``d(t)`` for each truncation order."""
    traj = el_trajectory(name, horizon, step, record_every)
    obj, params = builtin(name), _params(name)
    curves = {p: analysis.distance_series(traj, SlowManifoldExpansion(obj, params, p)) for p in orders}
    return traj, curves


def warmstart_curves(name: str = "example1", tol: float = 1e-6, step: float = STEP, max_steps: int = 500_000,
                     record_every: int = 1):
    obj, params = builtin(name), _params(name)
    exp = SlowManifoldExpansion(obj, params, 1)
    cfg = IntegratorConfig("rk4", step, max_steps, tol, record_every)
    flow = ELFlow(obj, params)
    cold = integrate(flow, PhaseState(X0, (0.0, 0.0)), cfg)
    warm = integrate(flow, analysis.warm_start_cheap(exp, X0), cfg)
    return cold, warm


def nesterov_vs_reduced(name: str, horizon: float = NONAUTONOMOUS_HORIZON, step: float = STEP,
                        r: float = math.inf, record_every: int = 1):
    """Nesterov flow and the resummed reduced flow sampled on a common time grid."""
    obj = builtin(name)
    rho = TABLE1[name]["rho"]
    cfg = IntegratorConfig("rk4", step, int(round(horizon / step)), None, record_every)
    full = integrate(NesterovFlow(obj, rho), PhaseState(X0, NESTEROV_V0, NESTEROV_T0), cfg)
    exp = SlowManifoldExpansion(obj, FlowParams(rho=rho), 1, "nonautonomous")
    red = integrate(ReducedFlow(exp, "resummed", r), PhaseState(X0, None, NESTEROV_T0), cfg)
    return full, red


def stable_step(flow, x0, cap: float = 1e-2) -> float:
    """Fixed RK4 step kept inside the stability interval at ``x0``.

    The reduced flows are stiffest at the starting point (example2 with p=3
    has a Jacobian spectral radius near 5000 at (1, 1)), so one estimate
    there bounds the whole run.
    """
    x0 = np.asarray(x0, dtype=float)
    h = 1e-6 * (1.0 + np.linalg.norm(x0))
    cols = []
    for e in np.eye(x0.size):
        cols.append((flow.rhs(x0 + h * e) - flow.rhs(x0 - h * e)) / (2 * h))
    radius = float(np.max(np.abs(np.linalg.eigvals(np.column_stack(cols)))))
    # RK4 is stable on the negative real axis up to about 2.78
    return cap if radius * cap <= 2.0 else 2.0 / radius


def _write_table(path, header, columns):
    table = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in table)
    _atomic_write(path, "\n".join(lines) + "\n")


def manifold_grid(name: str, grid, orders=(1, 3)) -> np.ndarray:
    """Rows ``(x_1, x_2, v^{eps,p}(x) for p in orders)`` over ``grid x grid``."""
    obj, params = builtin(name), _params(name)
    exps = [SlowManifoldExpansion(obj, params, p) for p in orders]
    rows = []
    for a in grid:
        for b in grid:
            x = np.array([a, b])
            row = [a, b]
            for exp in exps:
                row.extend(graph(exp, x))
            rows.append(row)
    return np.array(rows)


def _fig3(out_dir):
    files = []
    grid = np.linspace(-1.5, 1.5, 31)
    for name in BUILTIN_NAMES:
        obj, params = builtin(name), _params(name)
        traj = el_trajectory(name, record_every=10)
        path = os.path.join(out_dir, f"fig3_{name}_el.csv")
        write_csv(traj, path)
        files.append(path)
        exps = {p: SlowManifoldExpansion(obj, params, p) for p in (1, 3)}
        rows = manifold_grid(name, grid)
        path = os.path.join(out_dir, f"fig3_{name}_manifold.csv")
        _write_table(path, ["x_1", "x_2", "v_1_p1", "v_2_p1", "v_1_p3", "v_2_p3"], rows.T)
        files.append(path)
        flow = ReducedFlow(exps[3])
        h = stable_step(flow, X0)
        n = int(math.ceil(AUTONOMOUS_HORIZON / h))
        red = integrate(flow, PhaseState(X0), IntegratorConfig("rk4", h, n, None, max(1, n // 2000)))
        path = os.path.join(out_dir, f"fig3_{name}_reduced.csv")
        write_csv(red, path)
        files.append(path)
    return files


def _fig4(out_dir):
    traj, curves = distance_curves(record_every=5)
    path = os.path.join(out_dir, "fig4_distance.csv")
    _write_table(path, ["time", "d_p1", "d_p3"], [traj.times, curves[1], curves[3]])
    return [path]


def _fig5(out_dir):
    cold, warm = warmstart_curves(record_every=100)
    obj = builtin("example1")
    files = []
    for label, tr in (("cold", cold), ("warm", warm)):
        err = np.linalg.norm(tr.x - obj.known_minimizer, axis=1)
        path = os.path.join(out_dir, f"fig5_{label}.csv")
        _write_table(path, ["time", "error"], [tr.times, err])
        files.append(path)
    path = os.path.join(out_dir, "fig5_summary.json")
    write_json({
        "cold_grad_evals": cold.grad_evals,
        "warm_grad_evals": warm.grad_evals,
        "warm_setup_grad_evals": 1,
        "saving": cold.grad_evals - warm.grad_evals - 1,
        "cold_steps": cold.steps,
        "warm_steps": warm.steps,
    }, path)
    files.append(path)
    return files


def _fig6(out_dir):
    files = []
    for name in BUILTIN_NAMES:
        full, red = nesterov_vs_reduced(name, record_every=10)
        path = os.path.join(out_dir, f"fig6_{name}.csv")
        gap = np.linalg.norm(full.x - red.x, axis=1)
        _write_table(path, ["time", "x_1_nesterov", "x_2_nesterov", "x_1_reduced", "x_2_reduced", "gap"],
                     [full.times, full.x[:, 0], full.x[:, 1], red.x[:, 0], red.x[:, 1], gap])
        files.append(path)
    return files


_BUILDERS = {"fig3": _fig3, "fig4": _fig4, "fig5": _fig5, "fig6": _fig6}


def _run_one(which, out_dir):
    return _BUILDERS[which](out_dir)


def reproduce(which: str, out_dir: str, jobs: int = 1) -> dict:
    """Write the CSV bundle for one figure (or ``"all"``); returns ``{figure: [paths]}``."""
    if which == "all":
        names = list(FIGURES)
    elif which in FIGURES:
        names = [which]
    else:
        raise ValueError(f"unknown figure {which!r}; choose from {', '.join(FIGURES)} or all")
    os.makedirs(out_dir, exist_ok=True)
    if jobs > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, names, [out_dir] * len(names)))
    else:
        results = [_run_one(n, out_dir) for n in names]
    return dict(zip(names, results))
