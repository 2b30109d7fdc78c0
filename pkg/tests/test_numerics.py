import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pmodulus import numerics


def test_gk15_polynomial_exact():
    res = numerics.integrate_1d(lambda x: 3 * x ** 2 + 2 * x, 0.0, 2.0)
    assert res.value == pytest.approx(12.0, rel=1e-14)


def test_endpoint_singularity():
    res = numerics.integrate_1d(lambda x: 1 / math.sqrt(x), 0.0, 1.0, 1e-10)
    assert res.value == pytest.approx(2.0, abs=1e-8)


def test_breakpoints_and_vectorized():
    f = lambda x: np.abs(x - 0.3)
    res = numerics.integrate_1d(f, 0.0, 1.0, vectorized=True, breakpoints=[0.3])
    assert res.value == pytest.approx(0.5 * (0.09 + 0.49), rel=1e-13)


def test_divergent_integral_raises():
    with pytest.raises(numerics.QuadratureError):
        numerics.integrate_1d(lambda x: 1 / x, 0.0, 1.0, limit=200)


def test_integrate_2d_separable():
    res = numerics.integrate_2d(lambda x, y: math.exp(x) * math.cos(y), [(0, 1), (0, 1)])
    assert res.value == pytest.approx((math.e - 1) * math.sin(1), rel=1e-10)


def test_ode_exponential():
    tr = numerics.solve_ode(lambda s, y: -y, [1.0], 0.0, 3.0, 1e-11)
    assert tr.final[0] == pytest.approx(math.exp(-3.0), rel=1e-9)


def test_ode_harmonic_backwards():
    tr = numerics.solve_ode(lambda s, y: np.array([y[1], -y[0]]), [0.0, 1.0], 0.0, -2.0, 1e-11)
    assert tr.final[0] == pytest.approx(math.sin(-2.0), abs=1e-9)


def test_jacobian_fd_linear_map():
    A = np.array([[1.0, 2.0], [-3.0, 0.5]])
    assert np.allclose(numerics.jacobian_fd(lambda x: A @ x, [0.3, -0.7]), A, atol=1e-9)


@given(st.floats(0.1, 30.0))
def test_gamma_matches_stdlib(x):
    assert numerics.gamma_fn(x) == pytest.approx(math.gamma(x), rel=1e-12)


def test_gamma_half_integers():
    assert numerics.gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    assert numerics.gamma_fn(0.25) == pytest.approx(math.gamma(0.25), rel=1e-13)


def test_gamma_rejects_nonpositive():
    with pytest.raises(ValueError):
        numerics.gamma_fn(-0.5)


def test_reference_integrals():
    assert numerics.integrate_1d(lambda s: 1 / s, 1.0, math.e).value == pytest.approx(1.0,
                                                                                     rel=1e-12)
    Q, p = 4, 2
    assert numerics.integrate_1d(lambda s: s ** ((1 - Q) / (p - 1)), 1.0, 2.0).value == \
        pytest.approx(0.375, rel=1e-12)
    val = numerics.integrate_1d(lambda a: math.sqrt(max(math.cos(a), 0.0)), -math.pi / 2,
                                math.pi / 2).value
    assert val == pytest.approx(math.sqrt(math.pi) * math.gamma(0.75) / math.gamma(1.25),
                                rel=1e-10)


def test_reference_double_integrals():
    assert numerics.integrate_2d(lambda x, y: 1.0, [(0, 1), (0, 1)]).value == \
        pytest.approx(1.0, rel=1e-14)
    area = numerics.integrate_2d(lambda th, a: math.sqrt(max(math.cos(a), 0.0)),
                                 [(0, 2 * math.pi), (-math.pi / 2, math.pi / 2)], 1e-11)
    assert area.value == pytest.approx(4 * math.sqrt(2 * math.pi) * math.gamma(0.75) ** 2,
                                       rel=1e-8)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_integral_is_linear(a, b):
    f = lambda x: math.exp(-x) * math.sin(3 * x)
    g = lambda x: 1 / (1 + x * x)
    lhs = numerics.integrate_1d(lambda x: a * f(x) + b * g(x), 0.0, 2.0, 1e-13).value
    rhs = (a * numerics.integrate_1d(f, 0.0, 2.0, 1e-13).value
           + b * numerics.integrate_1d(g, 0.0, 2.0, 1e-13).value)
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_euclidean_radial_field():
    xi = np.array([0.6, 0.0, 0.8])
    tr = numerics.solve_ode(lambda s, y: y / s, xi, 1.0, 2.0)
    assert np.allclose(tr.final, 2 * xi, atol=1e-9)
    assert np.all(np.diff(tr.samples) > 0)
    assert len(tr.samples) == len(tr.states)


def test_ode_blow_up_raises_singularity():
    with pytest.raises(numerics.SingularityError) as info:
        numerics.solve_ode(lambda s, y: y * y, [1.0], 0.0, 2.0)
    assert info.value.s_last is not None and info.value.s_last < 1.0


def test_jacobian_examples():
    assert np.allclose(numerics.jacobian_fd(lambda x: x, [0.2, 0.4]), np.eye(2), atol=1e-10)
    shear = lambda v: np.array([v[0] + v[1], v[1]])
    assert np.allclose(numerics.jacobian_fd(shear, [0.3, 0.9]), [[1, 1], [0, 1]], atol=1e-10)
    sq = lambda v: np.array([v[0] ** 2 - v[1] ** 2, 2 * v[0] * v[1]])
    assert np.linalg.det(numerics.jacobian_fd(sq, [1.0, 0.0])) == pytest.approx(4.0, rel=1e-8)


def test_gamma_reference_values():
    assert numerics.gamma_fn(1.0) == pytest.approx(1.0, rel=1e-14)
    assert numerics.gamma_fn(0.75) * numerics.gamma_fn(0.25) == pytest.approx(
        math.pi * math.sqrt(2), rel=1e-12)
    with pytest.raises(ValueError):
        numerics.gamma_fn(0.0)
