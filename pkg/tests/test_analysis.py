import json
import math
import warnings

import numpy as np
import pytest

from agflow.accounting import count_gradients
from agflow.analysis import (
    DiagnosticsReport,
    convergence_order,
    distance_series,
    energy_series,
    heavy_ball_energy,
    lyapunov_gradient_identity_residual,
    lyapunov_series,
    manifold_distance,
    reduced_lyapunov,
    warm_start_cheap,
    warm_start_projected,
    window_amplitude,
)
from agflow.flows import ELFlow, IntegratorConfig, PhaseState, ReducedFlow, integrate, reduced_rhs
from agflow.manifold import FlowParams, SlowManifoldExpansion, graph
from agflow.objective import TABLE1, Objective, QuadraticObjective, builtin

from conftest import random_spd

E1 = builtin("example1")
P8 = FlowParams(mu=8.0)


def _table(name):
    row = TABLE1[name]
    return builtin(name), FlowParams(mu=row["mu"], eta=row["eta"])


# -- heavy-ball energy ------------------------------------------------------------------

def test_energy_example1():
    assert heavy_ball_energy(P8, E1, PhaseState([1.0, 1.0], [0.0, 0.0])) == 3.0


def test_energy_pure_kinetic():
    assert heavy_ball_energy(P8, E1, PhaseState([0.0, 0.0], [1.0, 0.0])) == 0.5


def test_energy_at_equilibrium():
    assert heavy_ball_energy(P8, E1, PhaseState([0.0, 0.0], [0.0, 0.0])) == 0.0


def test_energy_needs_minimizer():
    obj = Objective.from_expression("x1^2 + x2^2", 2)
    with pytest.raises(ValueError, match="minimizer"):
        heavy_ball_energy(P8, obj, PhaseState([1.0, 1.0], [0.0, 0.0]))


@pytest.mark.parametrize("name", ["example1", "example2", "example3"])
def test_energy_decays_along_el_flow(name, rng):
    obj, params = _table(name)
    h = 1e-3
    for v0 in ([0.0, 0.0], rng.uniform(-1, 1, 2)):
        traj = integrate(ELFlow(obj, params), PhaseState([1.0, 1.0], v0), IntegratorConfig(step=h, max_steps=3000))
        E = energy_series(traj, params, obj)
        assert np.all(np.diff(E) <= 1e-9)
        # five-point dE/dt against -mu |v|^2; a three-point stencil is too coarse
        # where |v| is small but still changing fast
        speed2 = np.sum(traj.v ** 2, axis=1)[2:-2]
        dE = (-E[4:] + 8 * E[3:-1] - 8 * E[1:-3] + E[:-4]) / (12 * h)
        expect = -params.mu * speed2
        mask = np.sqrt(speed2) > 1e-3
        assert mask.any()
        rel = np.abs(dE[mask] - expect[mask]) / np.abs(expect[mask])
        assert rel.max() <= 1e-4


# -- reduced Lyapunov -------------------------------------------------------------------

def test_reduced_lyapunov_example1():
    exp = SlowManifoldExpansion(E1, P8, 3)
    assert reduced_lyapunov(exp, [1.0, 1.0], r=1) == pytest.approx(0.400390625, rel=1e-15)


def test_reduced_lyapunov_vanishes_at_minimizer():
    exp = SlowManifoldExpansion(builtin("example3"), FlowParams(mu=4.0), 5)
    assert reduced_lyapunov(exp, [0.0, 0.0]) == 0.0


def test_reduced_lyapunov_first_correction(rng):
    obj = builtin("example3")
    exp = SlowManifoldExpansion(obj, FlowParams(mu=4.0, eta=0.5), 3)
    x = rng.uniform(-1, 1, 2)
    eps, eta = 0.25, 0.5
    g = obj.gradient(x)
    lead = eps * eta * (obj(x) - obj.minimum_value)
    assert reduced_lyapunov(exp, x, 1) - lead == pytest.approx(0.5 * eps ** 3 * eta ** 2 * (g @ g), rel=1e-13)


def test_reduced_lyapunov_rejects_large_r():
    exp = SlowManifoldExpansion(E1, P8, 1)
    with pytest.raises(ValueError):
        reduced_lyapunov(exp, [1.0, 1.0], r=2)


def test_identity_residual_quadratic(rng):
    A = random_spd(rng, 3)
    exp = SlowManifoldExpansion(QuadraticObjective(A), FlowParams(mu=6.0), 3)
    for _ in range(10):
        x = rng.normal(size=3)
        res = lyapunov_gradient_identity_residual(exp, x, 1)
        assert res <= 1e-6 * (1 + np.linalg.norm(reduced_rhs(exp, x)))


def test_identity_residual_at_minimizer():
    for p in (1, 3):
        exp = SlowManifoldExpansion(builtin("example3"), FlowParams(mu=4.0), p)
        assert lyapunov_gradient_identity_residual(exp, [0.0, 0.0]) <= 1e-10


@pytest.mark.parametrize("name", ["example1", "example2", "example3"])
@pytest.mark.parametrize("p", [1, 3])
def test_identity_residual_random_points(name, p, rng):
    obj, params = _table(name)
    exp = SlowManifoldExpansion(obj, params, p)
    for _ in range(50):
        x = rng.uniform(-1.5, 1.5, 2)
        scale = np.linalg.norm(reduced_rhs(exp, x))
        assert lyapunov_gradient_identity_residual(exp, x) <= 1e-5 * scale


@pytest.mark.parametrize("name", ["example1", "example2", "example3"])
@pytest.mark.parametrize("p", [1, 3])
def test_reduced_lyapunov_decays_along_reduced_flow(name, p):
    obj, params = _table(name)
    exp = SlowManifoldExpansion(obj, params, p)
    # example2 with p=3 is stiff at (1,1); keep RK4 inside its stability region
    traj = integrate(ReducedFlow(exp), PhaseState([1.0, 1.0]), IntegratorConfig(step=5e-4, max_steps=4000,
                                                                                 record_every=20))
    L = lyapunov_series(traj, exp)
    assert np.all(np.diff(L) <= 1e-12)
    assert L[-1] < L[0]


# -- manifold distance and warm starts --------------------------------------------------

def test_manifold_distance_example1():
    exp = SlowManifoldExpansion(E1, P8, 1)
    d = manifold_distance(exp, PhaseState([1.0, 1.0], [0.0, 0.0]))
    assert d == pytest.approx(math.hypot(0.125, 0.625), rel=1e-15)
    assert round(d, 5) == 0.63738


def test_manifold_distance_on_graph(rng):
    exp = SlowManifoldExpansion(builtin("example3"), FlowParams(mu=4.0), 3)
    x = rng.normal(size=2)
    assert manifold_distance(exp, PhaseState(x, graph(exp, x))) == 0.0


def test_higher_order_graph_is_closer_after_fast_stage():
    exp1, exp3 = SlowManifoldExpansion(E1, P8, 1), SlowManifoldExpansion(E1, P8, 3)
    traj = integrate(ELFlow(E1, P8), PhaseState([1.0, 1.0], [0.0, 0.0]),
                     IntegratorConfig(step=1e-3, max_steps=20000, record_every=100))
    late = traj.times >= 2.0
    d1, d3 = distance_series(traj, exp1)[late], distance_series(traj, exp3)[late]
    assert np.all(d3 <= d1)


def test_warm_start_cheap_example1():
    exp = SlowManifoldExpansion(E1, P8, 1)
    with count_gradients() as led:
        s = warm_start_cheap(exp, [1.0, 1.0])
    np.testing.assert_array_equal(s.x, [1.0, 1.0])
    np.testing.assert_allclose(s.v, [-0.125, -0.625], rtol=1e-15)
    assert led.count == 1


def test_warm_start_cheap_at_minimizer():
    s = warm_start_cheap(SlowManifoldExpansion(builtin("example3"), FlowParams(mu=4.0), 3), [0.0, 0.0])
    np.testing.assert_array_equal(s.v, [0.0, 0.0])


def test_warm_start_cheap_p3_quadratic(rng):
    A = random_spd(rng, 3)
    exp = SlowManifoldExpansion(QuadraticObjective(A), FlowParams(mu=5.0), 3)
    x0 = rng.normal(size=3)
    s = warm_start_cheap(exp, x0)
    np.testing.assert_allclose(s.v, -0.2 * A @ x0 - 0.008 * A @ A @ x0, rtol=1e-13)


def _augmented(exp, x0, v0):
    def value(x):
        return np.sum((x - x0) ** 2) + np.sum((graph(exp, x) - v0) ** 2)
    return value


def test_warm_start_projected_against_grid():
    exp = SlowManifoldExpansion(E1, P8, 1)
    x0, v0 = np.array([1.0, 1.0]), np.zeros(2)
    res = warm_start_projected(exp, x0, v0)
    assert res.converged
    # p=1 on example1 has closed-form graph -eps*(x1, 5 x2); evaluate the grid vectorised
    g = np.linspace(-2, 2, 401)
    X1, X2 = np.meshgrid(g, g, indexing="ij")
    vals = (X1 - 1) ** 2 + (X2 - 1) ** 2 + (X1 / 8) ** 2 + (5 * X2 / 8) ** 2
    aug = _augmented(exp, x0, v0)
    assert aug(res.state.x) <= vals.min() + 1e-12
    assert aug(res.state.x) < aug(x0)
    # grid cell containing the optimum
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    assert abs(res.state.x[0] - g[i]) <= 0.01 and abs(res.state.x[1] - g[j]) <= 0.01
    np.testing.assert_allclose(res.state.v, graph(exp, res.state.x), rtol=1e-15)


def test_warm_start_projected_on_graph_is_fixed(rng):
    exp = SlowManifoldExpansion(builtin("example3"), FlowParams(mu=4.0), 3)
    x0 = rng.uniform(-1, 1, 2)
    v0 = graph(exp, x0)
    res = warm_start_projected(exp, x0, v0)
    assert res.converged and res.iterations == 0
    np.testing.assert_array_equal(res.state.x, x0)
    np.testing.assert_array_equal(res.state.v, v0)


def test_warm_start_projected_small_eps():
    exp = SlowManifoldExpansion(E1, FlowParams(mu=1e6), 1)
    res = warm_start_projected(exp, [1.0, 1.0], [0.3, -0.4])
    np.testing.assert_allclose(res.state.x, [1.0, 1.0], atol=1e-5)


def test_warm_start_projected_reports_non_convergence():
    exp = SlowManifoldExpansion(E1, P8, 1)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = warm_start_projected(exp, [1.0, 1.0], [0.0, 0.0], max_iter=2)
    assert not res.converged and res.iterations == 2
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)


# -- convergence order ------------------------------------------------------------------

def test_convergence_order_cubic():
    assert convergence_order([8e-3, 1e-3, 1.25e-4]) == pytest.approx(3.0, abs=0.1)


def test_convergence_order_constant():
    assert convergence_order([1e-3, 1e-3, 1e-3]) == pytest.approx(0.0, abs=1e-12)


def test_convergence_order_validation():
    with pytest.raises(ValueError):
        convergence_order([1.0, 0.5])
    with pytest.raises(ValueError):
        convergence_order([1.0, 0.0, 0.5])


def test_p1_graph_order_on_scalar_quadratic():
    a, eta, x = 2.0, 1.0, 0.7
    errs, epss = [], []
    for mu in (10.0, 20.0, 40.0, 80.0):
        exp = SlowManifoldExpansion(QuadraticObjective([[a]]), FlowParams(mu=mu, eta=eta), 1)
        # slow root of l^2 + mu l + eta a = 0 in a cancellation-free form
        lam = -2 * eta * a / (mu + math.sqrt(mu * mu - 4 * eta * a))
        errs.append(abs(graph(exp, [x])[0] - lam * x))
        epss.append(1 / mu)
    assert convergence_order(errs, epss) >= 2.9


# -- series and report ------------------------------------------------------------------

def test_window_amplitude():
    assert window_amplitude([0, 1, 2, 3], [5, -4, 2, 1], 1, 2) == 4.0
    with pytest.raises(ValueError):
        window_amplitude([0, 1], [1, 1], 5, 6)


def test_report_alignment_and_json(tmp_path):
    traj = integrate(ELFlow(E1, P8), PhaseState([1.0, 1.0], [0.0, 0.0]), IntegratorConfig(step=0.01, max_steps=50))
    rep = DiagnosticsReport(traj.times)
    rep.add_series("energy", energy_series(traj, P8, E1))
    rep.summaries["grad_evals"] = traj.grad_evals
    with pytest.raises(ValueError):
        rep.add_series("bad", [1.0, 2.0])
    rep.to_json(tmp_path / "rep.json")
    data = json.loads((tmp_path / "rep.json").read_text())
    assert data["summaries"]["grad_evals"] == 200
    assert len(data["series"]["energy"]) == len(traj)
