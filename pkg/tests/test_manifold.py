import math
import warnings

import numpy as np
import pytest
import sympy as sp

from agflow.accounting import count_gradients
from agflow.manifold import (
    FlowParams,
    SlowManifoldExpansion,
    g_term,
    g_term_nonautonomous,
    gradient_part_nonautonomous,
    graph,
    phi_term,
    resummed_coefficient,
)
from agflow.objective import BUILTIN_NAMES, TABLE1, Objective, QuadraticObjective, builtin

from conftest import central_jacobian, random_spd


def expansion(name, p, **kw):
    return SlowManifoldExpansion(builtin(name), FlowParams(mu=TABLE1[name]["mu"], **kw), p)


def catalan(k):
    return math.comb(2 * k, k) // (k + 1)


def slow_eigenvalue(mu, eta, a):
    # root of l^2 + mu l + eta a = 0 closest to zero, written without cancellation
    return -2 * eta * a / (mu + math.sqrt(mu * mu - 4 * eta * a))


# -- autonomous terms -----------------------------------------------------------------

def test_g1_example1():
    np.testing.assert_array_equal(g_term(expansion("example1", 1), 1, [1.0, 1.0]), [-1.0, -5.0])


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_even_terms_vanish(name, rng):
    exp = expansion(name, 5)
    for k in (2, 4, 6):
        np.testing.assert_array_equal(g_term(exp, k, rng.normal(size=2)), np.zeros(2))


def test_catalan_coefficients_quadratic(rng):
    for n in (1, 2, 3, 4):
        A = random_spd(rng, n)
        x = rng.normal(size=n)
        exp = SlowManifoldExpansion(QuadraticObjective(A), FlowParams(mu=10.0, eta=0.5), 7)
        for k in range(4):
            want = -catalan(k) * 0.5 ** (k + 1) * np.linalg.matrix_power(A, k + 1) @ x
            got = g_term(exp, 2 * k + 1, x)
            assert np.linalg.norm(got - want) <= 1e-12 * np.linalg.norm(want)


def test_g3_is_minus_hessian_times_gradient(rng):
    # g_3 = -eta^2 Hess f grad f for any f
    exp = expansion("example3", 3)
    obj = exp.objective
    for _ in range(10):
        x = rng.uniform(-1.5, 1.5, 2)
        H = central_jacobian(obj.gradient, x)
        np.testing.assert_allclose(g_term(exp, 3, x), -H @ obj.gradient(x), rtol=1e-7, atol=1e-9)


def test_term_index_limits():
    exp = expansion("example1", 1)
    with pytest.raises(ValueError, match="exceeds"):
        g_term(exp, 5, [1.0, 1.0])
    with pytest.raises(ValueError):
        g_term(exp, 0, [1.0, 1.0])


def test_truncation_bounded_by_smoothness():
    obj = Objective.from_expression("x1^2", 1, smoothness_order=2)
    with pytest.raises(ValueError, match="smoothness"):
        SlowManifoldExpansion(obj, FlowParams(mu=4.0), 3)
    exp = SlowManifoldExpansion(obj, FlowParams(mu=4.0), 2)
    g_term(exp, 3, [1.0])
    with pytest.raises(ValueError, match="derivatives"):
        g_term(exp, 5, [1.0])


def test_large_epsilon_warns():
    with pytest.warns(RuntimeWarning, match="epsilon"):
        SlowManifoldExpansion(builtin("example1"), FlowParams(mu=0.8), 1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        SlowManifoldExpansion(builtin("example2"), FlowParams(mu=2.0), 1)


def test_flow_params_validation():
    assert FlowParams(mu=8.0).epsilon * 8.0 == 1.0
    with pytest.raises(ValueError, match="alpha0"):
        FlowParams(mu=2.0, alpha0=1.0)
    with pytest.raises(ValueError, match="positive definite"):
        FlowParams(mu=2.0, metric=[[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ValueError):
        FlowParams(mu=-1.0)
    with pytest.raises(AttributeError):
        FlowParams(mu=2.0).epsilon = 0.1


# -- graph ----------------------------------------------------------------------------

def test_graph_paper_value():
    np.testing.assert_array_equal(graph(expansion("example1", 1), [1.0, 1.0]), [-0.125, -0.625])


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_graph_vanishes_at_minimizer(name):
    np.testing.assert_array_equal(graph(expansion(name, 3), [0.0, 0.0]), [0.0, 0.0])


@pytest.mark.parametrize("a", [1.0, 5.0])
def test_graph_matches_slow_eigenvalue_series(a):
    mu, eta = 16.0, 1.0
    eps = 1 / mu
    obj = QuadraticObjective([[a]])
    series = [-eta * a * eps, -(eta * a) ** 2 * eps ** 3, -2 * (eta * a) ** 3 * eps ** 5]
    for p, terms in ((1, 1), (3, 2), (5, 3)):
        exp = SlowManifoldExpansion(obj, FlowParams(mu=mu, eta=eta), p)
        assert graph(exp, [1.0])[0] == pytest.approx(sum(series[:terms]), rel=1e-14)


@pytest.mark.parametrize("a", [1.0, 5.0])
@pytest.mark.parametrize("p", [1, 3, 5])
def test_truncation_error_shrinks_with_epsilon(a, p):
    obj = QuadraticObjective([[a]])
    errs = []
    for mu in (8.0, 16.0, 32.0):
        exp = SlowManifoldExpansion(obj, FlowParams(mu=mu), p)
        errs.append(abs(graph(exp, [1.0])[0] - slow_eigenvalue(mu, 1.0, a)))
    assert errs[0] / errs[1] >= 2 ** (p + 1)
    assert errs[1] / errs[2] >= 2 ** (p + 1)


def test_graph_p1_charges_one_gradient():
    exp = expansion("example1", 1)
    with count_gradients() as ledger:
        graph(exp, [1.0, 1.0])
    assert ledger.count == 1


# -- metric ------------------------------------------------------------------------------

@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_identity_metric_matches_euclidean(name, rng):
    mu = TABLE1[name]["mu"]
    plain = SlowManifoldExpansion(builtin(name), FlowParams(mu=mu), 5)
    metric = SlowManifoldExpansion(builtin(name), FlowParams(mu=mu, metric=np.eye(2)), 5)
    assert metric.mode == "autonomous_metric"
    for _ in range(5):
        x = rng.uniform(-1, 1, 2)
        for k in (1, 3, 5):
            np.testing.assert_allclose(g_term(metric, k, x), g_term(plain, k, x), rtol=1e-15, atol=1e-15)


def test_metric_g1_uses_cholesky_solve(rng):
    H = random_spd(rng, 2)
    exp = SlowManifoldExpansion(builtin("example3"), FlowParams(mu=4.0, eta=2.0, metric=H), 3)
    x = np.array([0.4, -0.3])
    np.testing.assert_allclose(g_term(exp, 1, x), -2.0 * np.linalg.solve(H, exp.objective.gradient(x)),
                               rtol=1e-13)


def test_metric_quadratic_recursion(rng):
    # with H: g_{2k+1} = -C_k eta^{k+1} (H^{-1} A)^{k+1} x
    A, H = random_spd(rng, 3), random_spd(rng, 3)
    exp = SlowManifoldExpansion(QuadraticObjective(A), FlowParams(mu=10.0, metric=H), 5)
    M = np.linalg.solve(H, A)
    x = rng.normal(size=3)
    for k in range(3):
        want = -catalan(k) * np.linalg.matrix_power(M, k + 1) @ x
        np.testing.assert_allclose(g_term(exp, 2 * k + 1, x), want, rtol=1e-10)


# -- potentials --------------------------------------------------------------------------

def test_phi_values():
    exp = expansion("example1", 3)
    assert phi_term(exp, 1, [1.0, 1.0]) == -3.0
    assert phi_term(exp, 2, [1.0, 1.0]) == 0.0
    A = np.diag([1.0, 5.0])
    x = np.array([0.3, -2.0])
    assert phi_term(exp, 3, x) == pytest.approx(-0.5 * np.sum((A @ x) ** 2), rel=1e-15)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_phi_is_potential_of_g(name, rng):
    exp = expansion(name, 5)
    for _ in range(50):
        x = rng.uniform(-1.5, 1.5, 2)
        for k in (1, 3, 5):
            fd = central_jacobian(lambda y: np.array([phi_term(exp, k, y)]), x)[0]
            g = g_term(exp, k, x)
            assert np.linalg.norm(fd - g) <= 1e-6 * max(np.linalg.norm(g), 1e-8)


def test_phi_needs_euclidean_mode():
    exp = SlowManifoldExpansion(builtin("example1"), FlowParams(mu=8.0, metric=np.eye(2)), 3)
    with pytest.raises(ValueError):
        phi_term(exp, 3, [1.0, 1.0])


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_jacobians_are_symmetric(name, rng):
    exp = expansion(name, 5)
    for _ in range(20):
        x = rng.uniform(-1.5, 1.5, 2)
        for k in (3, 5):
            J = central_jacobian(lambda y: g_term(exp, k, y), x)
            assert np.linalg.norm(J - J.T) <= 1e-5 * np.linalg.norm(J)


# -- nonautonomous ----------------------------------------------------------------------

def nonaut(name="example1", rho=3.0, p=6, obj=None):
    return SlowManifoldExpansion(obj or builtin(name), FlowParams(rho=rho), p, "nonautonomous")


def test_nonautonomous_first_terms():
    exp = nonaut()
    np.testing.assert_array_equal(g_term_nonautonomous(exp, 1, [1.0, 1.0], 2.0), [-2.0, -10.0])
    np.testing.assert_array_equal(g_term_nonautonomous(exp, 2, [1.0, 1.0], 2.0), [2.0, 10.0])


def test_nonautonomous_g3_g4_quadratic(rng):
    A = random_spd(rng, 2)
    exp = nonaut(obj=QuadraticObjective(A))
    for _ in range(5):
        x, t = rng.normal(size=2), rng.uniform(0.1, 3.0)
        gf = A @ x
        np.testing.assert_allclose(g_term_nonautonomous(exp, 3, x, t), -t * gf - t ** 3 * A @ gf, rtol=1e-13)
        np.testing.assert_allclose(g_term_nonautonomous(exp, 4, x, t), t * gf + 5 * t ** 3 * A @ gf, rtol=1e-13)


def test_nonautonomous_needs_positive_time():
    with pytest.raises(ValueError, match="t > 0"):
        g_term_nonautonomous(nonaut(), 1, [1.0, 1.0], 0.0)


def test_nonautonomous_order_limit():
    obj = Objective.from_expression("x1^4", 1, smoothness_order=2)
    exp = SlowManifoldExpansion(obj, FlowParams(rho=3.0), 2, "nonautonomous")
    g_term_nonautonomous(exp, 4, [1.0], 1.0)
    with pytest.raises(ValueError):
        g_term_nonautonomous(exp, 5, [1.0], 1.0)


def test_time_window_warning():
    exp = SlowManifoldExpansion(builtin("example1"), FlowParams(rho=3.0), 2, "nonautonomous",
                                time_window=(0.1, 10.0))
    with pytest.warns(RuntimeWarning, match="window"):
        g_term_nonautonomous(exp, 1, [1.0, 1.0], 20.0)


def _symbolic_terms(K):
    """Nonautonomous recursion in one variable with a generic f, done by sympy."""
    x, t = sp.symbols("x t", positive=True)
    f = sp.Function("f")
    fp = sp.diff(f(x), x)
    g = [None, -t * fp, t * fp]
    for k in range(3, K + 1):
        acc = sp.diff(g[k - 1], t)
        for j in range(1, k - 1):
            acc += sp.diff(g[j], x) * g[k - j - 1]
        g.append(sp.expand(-t * acc))
    return x, t, fp, g


def test_gradient_parts_symbolic():
    x, t, fp, g = _symbolic_terms(8)
    for k in range(1, 9):
        linear = sp.expand(g[k]).coeff(t, 1)
        assert sp.simplify(linear - (-1) ** k * fp) == 0


@pytest.mark.parametrize("r", [1, 2, 3])
def test_gradient_parts_sum_to_resummed(r, rng):
    exp = nonaut(rho=3.0, p=2 * r)
    eps = exp.epsilon
    for _ in range(3):
        x, t = rng.uniform(-1, 1, 2), rng.uniform(0.2, 2.0)
        total = sum(eps ** k * gradient_part_nonautonomous(exp, k, x, t) for k in range(1, 2 * r + 1))
        want = -resummed_coefficient(eps, r) * t * exp.objective.gradient(x)
        np.testing.assert_allclose(total, want, rtol=1e-13)


def test_nonautonomous_graph_sums_terms():
    exp = nonaut(p=4)
    x, t, eps = np.array([0.5, -0.2]), 1.5, 1 / 3
    want = sum(eps ** k * g_term_nonautonomous(exp, k, x, t) for k in range(1, 5))
    np.testing.assert_allclose(graph(exp, x, t), want, rtol=1e-14)
    with pytest.raises(ValueError):
        graph(exp, x)


def test_resummed_coefficient():
    assert resummed_coefficient(0.5, math.inf) == pytest.approx(1 / 3, rel=1e-15)
    assert resummed_coefficient(0.5, 1) == 0.25
    assert resummed_coefficient(0.37, 0) == 0.0
    with pytest.raises(ValueError):
        resummed_coefficient(1.5, math.inf)
