import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdot_ode.problem import BoxDomain, unit_box
from sdot_ode.quadrature import (
    NonFiniteIntegrandError,
    QuadratureSpec,
    default_spec,
    gauss_kronrod,
    integrate,
)


def sigma(u):
    return 1.0 / (1.0 + np.exp(-u))


def test_constant_is_exact():
    res = integrate(lambda x: np.ones(len(x)), unit_box(1))
    assert res.converged
    assert res.value[0] == pytest.approx(1.0, abs=1e-15)


def test_logistic_product():
    # d/du sigma(u) = sigma(u) sigma(-u), so the integral is sigma(0.5) - sigma(-0.5)
    f = lambda x: sigma(0.5 - x[:, 0]) * sigma(x[:, 0] - 0.5)  # noqa: E731
    expected = sigma(0.5) - sigma(-0.5)
    assert expected == pytest.approx(0.2449187, abs=1e-7)
    res = integrate(f, unit_box(1))
    assert res.value[0] == pytest.approx(expected, rel=1e-12)


def test_printed_bump_constant():
    f = lambda x: 1.8305 * np.exp(-10 * (x[:, 0] - 0.5) ** 2)  # noqa: E731
    assert abs(integrate(f, unit_box(1)).value[0] - 1.0) < 1e-3


@pytest.mark.parametrize("n", [3, 5, 7, 10])
def test_kronrod_degree(n):
    x, wk, wg = gauss_kronrod(n)
    deg = 3 * n + 1
    for k in range(deg + 1):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert wk @ x**k == pytest.approx(exact, abs=1e-13)
    for k in range(2 * n):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert wg @ x**k == pytest.approx(exact, abs=1e-13)


def test_gk15_matches_published_nodes():
    # largest Kronrod node and centre weight of the classic 7/15 pair
    x, wk, _ = gauss_kronrod(7)
    assert x[-1] == pytest.approx(0.991455371120812639206854697526329, abs=1e-15)
    assert wk[7] == pytest.approx(0.209482141084727828012999174891714, abs=1e-14)


@pytest.mark.parametrize("dim", [2, 3])
def test_box_polynomial_exact_single_panel(dim):
    spec = QuadratureSpec(rel_tol=1e-14, abs_tol=0, max_subdivisions=1,
                          base_rule_order=default_spec(dim).base_rule_order, initial_panels=1)
    f = lambda x: np.prod(x**2, axis=1) + x[:, 0] ** 3  # noqa: E731
    exact = (1 / 3) ** dim + 0.25
    assert integrate(f, unit_box(dim), spec).value[0] == pytest.approx(exact, abs=1e-13)


def test_vector_valued_shared_mesh():
    dom = BoxDomain((0.0, -1.0), (2.0, 1.0))
    f = lambda x: np.stack([np.ones(len(x)), x[:, 0], x[:, 1] ** 2], axis=1)  # noqa: E731
    res = integrate(f, dom)
    np.testing.assert_allclose(res.value, [4.0, 4.0, 4.0 / 3.0], rtol=1e-12)


@pytest.mark.parametrize("eps", [1e-1, 1e-2, 1e-3, 1e-4])
def test_sharp_peak(eps):
    # antiderivative of sech^2(u)/2 is tanh(u); the integrand integrates to
    # tanh(0.35/eps) + tanh(0.15/eps)
    def f(x):
        u = (x[:, 0] - 0.3) / (2 * eps)
        with np.errstate(over="ignore"):
            return 1.0 / (2 * eps) / np.cosh(u) ** 2

    exact = math.tanh(0.35 / eps) + math.tanh(0.15 / eps)
    spec = default_spec(1)
    res = integrate(f, unit_box(1), spec)
    assert res.converged
    assert abs(res.value[0] - exact) <= spec.rel_tol * abs(exact)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(a, b):
    f = lambda x: np.exp(x[:, 0])  # noqa: E731
    g = lambda x: np.sin(5 * x[:, 0])  # noqa: E731
    dom = unit_box(1)
    lhs = integrate(lambda x: a * f(x) + b * g(x), dom).value[0]
    rhs = a * integrate(f, dom).value[0] + b * integrate(g, dom).value[0]
    assert lhs == pytest.approx(rhs, abs=1e-10 * (1 + abs(a) + abs(b)))


def test_refinement_monotone():
    # closed form: int_0^1 1/(1e-2 + x^2) = atan(10) * 10
    f = lambda x: 1.0 / (1e-2 + x[:, 0] ** 2)  # noqa: E731
    exact = 10 * math.atan(10)
    errs = []
    for tol in [1e-4, 5e-5, 2.5e-5, 1.25e-5, 6.25e-6]:
        spec = QuadratureSpec(rel_tol=tol, abs_tol=0, base_rule_order=3, initial_panels=1)
        errs.append(abs(integrate(f, unit_box(1), spec).value[0] - exact))
    assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_non_convergence_flag():
    f = lambda x: np.sqrt(np.abs(x[:, 0] - 1 / 3))  # noqa: E731
    spec = QuadratureSpec(rel_tol=1e-15, abs_tol=0, max_subdivisions=4, initial_panels=2)
    res = integrate(f, unit_box(1), spec)
    assert not res.converged
    assert np.isfinite(res.value[0])


def test_nan_is_hard_error():
    with pytest.raises(NonFiniteIntegrandError):
        integrate(lambda x: np.full(len(x), np.nan), unit_box(2))


def test_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(rel_tol=0)
    with pytest.raises(ValueError):
        QuadratureSpec(base_rule_order=1)
    with pytest.raises(ValueError):
        QuadratureSpec(max_subdivisions=0)
