import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agflow import autodiff as ad
from agflow.autodiff import Jet, constant, variable
from agflow.objective import BUILTIN_NAMES, builtin

from conftest import central_jacobian


def coeffs(j):
    return [float(c) for c in j.coeffs]


def test_binomial_square():
    a = variable(1.0, 2)
    assert coeffs(ad.jet_arith(a, a, "mul")) == [1.0, 2.0, 1.0]


def test_additive_identity():
    a = Jet((0.3, -1.2, 4.0))
    assert coeffs(ad.jet_arith(a, constant(0.0, 2), "add")) == coeffs(a)


def test_self_division():
    a = variable(1.0, 3)
    assert coeffs(ad.jet_arith(a, a, "div")) == [1.0, 0.0, 0.0, 0.0]


def test_division_by_zero_constant_term():
    with pytest.raises(ZeroDivisionError):
        ad.jet_arith(variable(1.0, 2), variable(0.0, 2), "div")


def test_order_mismatch():
    with pytest.raises(ad.OrderMismatchError):
        ad.jet_arith(variable(1.0, 2), variable(1.0, 3), "add")


def test_constant_lift():
    assert coeffs(constant(2.5, 3)) == [2.5, 0.0, 0.0, 0.0]


def test_exp_series():
    got = coeffs(ad.jet_transcendental(variable(0.0, 3), "exp"))
    assert got == pytest.approx([1.0, 1.0, 0.5, 1 / 6], abs=1e-15)


def test_log_series():
    got = coeffs(ad.jet_transcendental(variable(1.0, 3), "log"))
    assert got == pytest.approx([0.0, 1.0, -0.5, 1 / 3], abs=1e-15)


def test_log_domain():
    with pytest.raises(ad.JetError):
        ad.jet_transcendental(variable(-1.0, 2), "log")


def test_pow_integer_matches_repeated_product():
    a = Jet((1.5, -0.5, 2.0, 0.25))
    assert coeffs(ad.jet_transcendental(a, "pow", 3)) == pytest.approx(coeffs(a * a * a), rel=1e-15)


@given(st.floats(0.1, 5.0), st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=50, deadline=None)
def test_exp_log_inverse(c0, c1, c2):
    a = Jet((c0, c1, c2))
    back = ad.jet_transcendental(ad.jet_transcendental(a, "log"), "exp")
    assert coeffs(back) == pytest.approx([c0, c1, c2], rel=1e-12, abs=1e-12)


def test_identity_map_derivative():
    x, d = np.array([0.3, -2.0, 1.0]), np.array([1.0, 4.0, -0.5])
    np.testing.assert_array_equal(ad.directional_derivative(lambda X: X, x, d, 1), d)


def test_hessian_column_example1():
    obj = builtin("example1")
    got = ad.directional_derivative(obj.gradient, [1.0, 1.0], [1.0, 0.0], 1)
    np.testing.assert_allclose(got, [1.0, 0.0], atol=0)


def test_quadratic_second_derivative_vanishes(rng):
    from conftest import random_spd
    A = random_spd(rng, 3)
    got = ad.directional_derivative(lambda X: A @ X, rng.normal(size=3), rng.normal(size=3), 2)
    np.testing.assert_array_equal(got, np.zeros(3))


def test_higher_order_scalar():
    # d^3/ds^3 of (x + s d)^4 at s = 0 is 24 x d^3
    got = ad.directional_derivative(lambda X: X[0] ** 4, [2.0], [3.0], 3)
    assert got == pytest.approx(24 * 2 * 27)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_jvp_matches_finite_differences(name, rng):
    obj = builtin(name)
    worst = 0.0
    for _ in range(100):
        x = rng.uniform(-2, 2, 2)
        d = rng.normal(size=2)
        jvp = ad.directional_derivative(obj.gradient, x, d, 1)
        fd = central_jacobian(obj.gradient, x) @ d
        worst = max(worst, np.linalg.norm(jvp - fd) / max(np.linalg.norm(fd), 1e-12))
    assert worst <= 1e-6


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_jvp_linearity(name, rng):
    obj = builtin(name)
    x, d = rng.uniform(-1, 1, 2), rng.normal(size=2)
    a = 3.7
    lhs = ad.directional_derivative(obj.gradient, x, a * d, 1)
    rhs = a * ad.directional_derivative(obj.gradient, x, d, 1)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_nested_first_derivatives_equal_second(name, rng):
    obj = builtin(name)
    for _ in range(10):
        x, d = rng.uniform(-1, 1, 2), rng.normal(size=2)
        once = ad.directional_derivative(obj, x, d, 2)
        nested = ad.directional_derivative(
            lambda Y: ad.directional_derivative(obj, Y, d, 1), x, d, 1
        )
        assert nested == pytest.approx(once, rel=1e-10, abs=1e-12)


def test_nesting_depth_limit():
    def nest(level):
        if level == 0:
            return lambda X: X[0] ** 2
        inner = nest(level - 1)
        return lambda X: ad.directional_derivative(inner, X, np.array([1.0]), 1)

    assert nest(2)(np.array([1.0])) == 2.0
    assert nest(ad.MAX_NESTING)(np.array([1.0])) == 0.0
    with pytest.raises(ad.NestingDepthError):
        nest(ad.MAX_NESTING + 1)(np.array([1.0]))


def test_map_not_jet_evaluatable():
    with pytest.raises(ad.JetError):
        ad.directional_derivative(lambda X: np.sin(X), [1.0], [1.0], 1)


def test_jets_are_immutable():
    a = variable(1.0, 2)
    with pytest.raises(AttributeError):
        a.coeffs = (0.0,)


def test_gradient_and_jacobian():
    f = lambda X: X[0] * X[1] + ad.exp(X[0])
    x = np.array([0.5, 2.0])
    np.testing.assert_allclose(ad.gradient(f, x), [2.0 + math.exp(0.5), 0.5], rtol=1e-15)
    J = ad.jacobian(lambda X: np.array([X[0] * X[1], X[1] ** 2], dtype=object), x)
    np.testing.assert_allclose(J, [[2.0, 0.5], [0.0, 4.0]])
