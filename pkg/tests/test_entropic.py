import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdot_ode import entropic
from sdot_ode.linalg import restricted_eigenvalues
from sdot_ode.newton import entropic_solution, reference_solution_1d
from sdot_ode.ode import initial_potential
from sdot_ode.problem import (
    CostFunction,
    Problem,
    SourceMeasure,
    TargetMeasure,
    builtin_example,
    random_problem,
    unit_box,
)
from sdot_ode.quadrature import QuadratureSpec, integrate

TIGHT_1D = QuadratureSpec(rel_tol=1e-14, abs_tol=1e-16, initial_panels=16)
TIGHT_2D = QuadratureSpec(rel_tol=1e-12, abs_tol=1e-14, base_rule_order=7, initial_panels=4)


def sigma(u):
    return 1.0 / (1.0 + math.exp(-u))


def two_point(mu=(0.2, 0.8)):
    return Problem(SourceMeasure(unit_box(1)), TargetMeasure(((0.25,), (0.75,)), mu), CostFunction(2))


def random_instances():
    out = []
    for seed in range(3):
        out.append((random_problem(1, 3 + seed, seed=seed, uniform_weights=False,
                                   p=2.0 + seed), TIGHT_1D))
    for seed in range(2):
        out.append((random_problem(2, 3, seed=10 + seed, uniform_weights=False), TIGHT_2D))
    return out


def zero_mean(rng, n, scale=0.3):
    v = scale * rng.standard_normal(n)
    return v - v.mean()


# ------------------------------------------------------------ soft weights

def test_soft_weights_examples():
    p = two_point((0.5, 0.5))
    np.testing.assert_allclose(entropic.soft_cell_weights(p, [0, 0], 0.3, 0.5), [0.5, 0.5])
    w = entropic.soft_cell_weights(p, [0, 0], 0.5, 0.0)
    assert w[0] == pytest.approx(1 / (1 + math.exp(-0.5)), abs=1e-15)
    assert w[0] == pytest.approx(0.6224593, abs=1e-7)


def test_soft_weights_t0_equal_mu():
    p = builtin_example("E1")
    x = np.linspace(0, 1, 7)[:, None]
    w = entropic.soft_cell_weights(p, initial_potential(p.mu), 0.0, x)
    np.testing.assert_allclose(w, np.tile(p.mu, (7, 1)), atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=4, max_size=4), st.floats(0, 0.9999),
       st.floats(-2, 3))
def test_soft_weights_normalised(psi, t, x):
    p = builtin_example("E3")
    w = entropic.soft_cell_weights(p, psi, t, x)
    assert np.all(w >= 0)
    assert abs(w.sum() - 1.0) <= 1e-12


def test_rejects_bad_t_and_nan():
    p = two_point()
    for t in (1.0, 1.5, -0.1, float("nan")):
        with pytest.raises(ValueError):
            entropic.grad_phi(p, [0, 0], t)
    with pytest.raises(ValueError):
        entropic.soft_cell_weights(p, [0, float("nan")], 0.5, 0.1)
    with pytest.raises(ValueError):
        entropic.phi(p, [0, 0, 0], 0.5)


def test_stable_softmax_large_scores():
    w, lse = entropic.stable_softmax(np.array([[1e4, 1e4 - 1, -1e4]]))
    assert np.all(np.isfinite(w))
    assert lse[0] == pytest.approx(1e4 + math.log1p(math.exp(-1)))


# ------------------------------------------------------------ phi

def test_phi_t0_zero_potential():
    p = builtin_example("E1")
    assert entropic.phi(p, np.zeros(3), 0.0) == pytest.approx(math.log(3) - 1, abs=1e-12)


def test_phi_t0_initial_potential():
    p = two_point()
    psi = initial_potential(p.mu)
    np.testing.assert_allclose(psi, [-0.693147, 0.693147], atol=1e-6)
    expected = math.log(np.exp(psi).sum()) - psi @ p.mu - 1.0
    assert entropic.phi(p, psi, 0.0) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 0.95))
def test_phi_convex_on_midpoints(seed, t):
    p = builtin_example("E1")
    rng = np.random.default_rng(seed)
    a, b = zero_mean(rng, 3, 1.0), zero_mean(rng, 3, 1.0)
    mid = entropic.phi(p, 0.5 * (a + b), t)
    assert mid <= 0.5 * entropic.phi(p, a, t) + 0.5 * entropic.phi(p, b, t) + 1e-10


# ------------------------------------------------------------ gradient

def test_grad_examples():
    p = two_point()
    np.testing.assert_allclose(entropic.grad_phi(p, initial_potential(p.mu), 0.0), 0, atol=1e-12)
    np.testing.assert_allclose(entropic.grad_phi(p, [0, 0], 0.5), [0.3, -0.3], atol=1e-12)
    np.testing.assert_allclose(entropic.smoothed_masses(p, [0, 0], 0.5), [0.5, 0.5], atol=1e-12)
    sym = two_point((0.5, 0.5))
    for t in (0.1, 0.6, 0.99):
        np.testing.assert_allclose(entropic.grad_phi(sym, [0, 0], t), 0, atol=1e-12)


def test_masses_minus_mu_is_grad():
    p = builtin_example("E2")
    psi = np.array([0.1, -0.3, 0.2])
    diff = entropic.smoothed_masses(p, psi, 0.7) - p.mu - entropic.grad_phi(p, psi, 0.7)
    assert np.max(np.abs(diff)) <= 1e-14


@pytest.mark.parametrize("idx", range(5))
def test_grad_vs_fd_of_phi(idx):
    prob, spec = random_instances()[idx]
    rng = np.random.default_rng(idx)
    psi, t, h = zero_mean(rng, prob.n), 0.6, 1e-6
    g = entropic.grad_phi(prob, psi, t, spec)
    assert abs(g.sum()) < 1e-10
    fd = np.empty(prob.n)
    for k in range(prob.n):
        e = -np.full(prob.n, 1.0 / prob.n)
        e[k] += 1.0
        fd[k] = (entropic.phi(prob, psi + h * e, t, spec)
                 - entropic.phi(prob, psi - h * e, t, spec)) / (2 * h)
    np.testing.assert_allclose(fd, g, atol=1e-6)


# ------------------------------------------------------------ Hessian

def test_hessian_e0_example():
    p = two_point()
    h = entropic.hessian_phi(p, [0, 0], 0.5)
    off = -2 * (sigma(0.5) - sigma(-0.5))
    assert off == pytest.approx(-0.4898374, abs=1e-7)
    np.testing.assert_allclose(h, [[-off, off], [off, -off]], rtol=1e-11)


@pytest.mark.parametrize("idx", range(5))
def test_hessian_vs_fd_of_grad(idx):
    prob, spec = random_instances()[idx]
    rng = np.random.default_rng(100 + idx)
    psi, t, h = zero_mean(rng, prob.n), 0.7, 1e-5
    d = entropic.derivatives(prob, psi, t, spec)
    fd = np.empty((prob.n, prob.n))
    for k in range(prob.n):
        e = np.zeros(prob.n)
        e[k] = h
        fd[:, k] = (entropic.grad_phi(prob, psi + e, t, spec)
                    - entropic.grad_phi(prob, psi - e, t, spec)) / (2 * h)
    np.testing.assert_allclose(d.hessian, fd, atol=1e-5)
    # structure
    np.testing.assert_array_equal(d.hessian, d.hessian.T)
    assert np.max(np.abs(d.hessian.sum(axis=1))) < 1e-12
    off = d.hessian[~np.eye(prob.n, dtype=bool)]
    assert np.all(off <= 0)
    assert restricted_eigenvalues(d.hessian)[0] >= -1e-8


@pytest.mark.parametrize("idx", range(5))
def test_dt_grad_vs_fd_in_t(idx):
    prob, spec = random_instances()[idx]
    rng = np.random.default_rng(200 + idx)
    psi, t, h = zero_mean(rng, prob.n), 0.5, 1e-5
    dt = entropic.dt_grad_phi(prob, psi, t, spec)
    fd = (entropic.grad_phi(prob, psi, t + h, spec) - entropic.grad_phi(prob, psi, t - h, spec)) / (2 * h)
    np.testing.assert_allclose(dt, fd, atol=1e-6)
    assert abs(dt.sum()) < 1e-12


def test_dt_grad_symmetric_configuration_vanishes():
    p = builtin_example("E1").target
    sym = Problem(SourceMeasure(unit_box(1)),
                  TargetMeasure(p.points, (1 / 3, 1 / 3, 1 / 3)), CostFunction(2))
    dt = entropic.dt_grad_phi(sym, np.zeros(3), 0.4)
    # mirror symmetry pairs the outer targets; the entries still sum to zero
    assert dt[0] == pytest.approx(dt[2], abs=1e-13)
    assert abs(dt.sum()) < 1e-13
    two = two_point((0.5, 0.5))
    np.testing.assert_allclose(entropic.dt_grad_phi(two, [0, 0], 0.4), 0, atol=1e-13)


def test_dt_grad_matches_printed_exponential_form():
    """Direct form with exp(A_k / (1-t)), fine for moderate inputs.

    The printed expression differentiates ``mu - int pi``, i.e. minus our
    gradient, so it must equal ``-dt_grad_phi``.
    """
    prob = builtin_example("E1", {"p": 3})
    psi = np.array([0.05, -0.02, -0.03])
    t = 0.4
    y = prob.y[:, 0]

    def printed(x):
        c = np.abs(x[:, :1] - y) ** 3
        out = np.empty((len(x), 3))
        for j in range(3):
            ks = [k for k in range(3) if k != j]
            a_t = np.stack([psi[k] - psi[j] + t * c[:, j] - t * c[:, k] for k in ks], axis=1)
            a_1 = np.stack([psi[k] - psi[j] + c[:, j] - c[:, k] for k in ks], axis=1)
            e = np.exp(a_t / (1 - t))
            out[:, j] = (a_1 * e).sum(axis=1) / ((1 - t) * (1 + e.sum(axis=1))) ** 2
        return out

    ref = integrate(printed, prob.domain, TIGHT_1D).value
    np.testing.assert_allclose(-entropic.dt_grad_phi(prob, psi, t, TIGHT_1D), ref, atol=1e-10)


# ------------------------------------------------------------ theory predicates

def test_restricted_eigs_uniform_near_solution():
    prob = builtin_example("E1")
    ref = reference_solution_1d(prob)
    lam = []
    for t in (0.9, 0.99, 0.999, 0.9999):
        psi = entropic_solution(prob, t, psi0=t * ref)
        lam.append(restricted_eigenvalues(entropic.hessian_phi(prob, psi, t))[0])
    lam = np.array(lam)
    assert lam.min() >= 1e-6
    assert lam.max() / lam.min() < 10


@pytest.mark.parametrize("t", [0.5, 0.9, 0.99])
def test_smoothed_mass_lower_bound(t):
    prob = builtin_example("E1")
    psi = entropic_solution(prob, t)
    bound = prob.target.min_weight / (2 * prob.n * math.exp(2 * entropic.cost_sup_norm(prob)))
    assert np.all(entropic.smoothed_masses(prob, psi, t) >= bound)


def test_cost_sup_norm():
    assert entropic.cost_sup_norm(builtin_example("E1")) == pytest.approx(0.5625)
    assert entropic.cost_sup_norm(builtin_example("E4")) == pytest.approx(2.0)


def test_quadrature_failure_raises():
    prob = builtin_example("E1")
    tiny = QuadratureSpec(rel_tol=1e-14, abs_tol=0, max_subdivisions=2, initial_panels=1)
    with pytest.raises(entropic.QuadratureError):
        entropic.derivatives(prob, np.zeros(3), 0.999, tiny)
