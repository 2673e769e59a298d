import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdot_ode.problem import (
    EXAMPLE_IDS,
    BoxDomain,
    CostFunction,
    SourceMeasure,
    TargetMeasure,
    builtin_example,
    cost_eval,
    exact_solution,
    load_problem,
    problem_from_dict,
    problem_to_dict,
    random_problem,
    save_problem,
    unit_box,
)
from sdot_ode.quadrature import QuadratureSpec, integrate


def test_e1_data():
    p = builtin_example("E1")
    assert p.dim == 1
    assert p.source.kind == "uniform"
    np.testing.assert_array_equal(p.y[:, 0], [0.25, 0.5, 0.75])
    np.testing.assert_array_equal(p.mu, [0.3, 0.4, 0.3])


def test_e2_density_constant_and_mass():
    p = builtin_example("E2")
    assert p.source.display_constant == 1.8305
    # recomputed constant rounds to the printed one
    assert abs(p.source.normalization_constant - 1.8305) < 5e-5
    res = integrate(p.source.density, p.domain, QuadratureSpec(rel_tol=1e-13, abs_tol=0))
    assert abs(res.value[0] - 1.0) < 1e-12
    # printed constant integrates to 1 within 1e-3
    printed = SourceMeasure(unit_box(1), "gaussian_bump", (("center", (0.5,)), ("scale", 10.0)), 1.8305)
    assert abs(integrate(printed.density, unit_box(1)).value[0] - 1.0) < 1e-3


def test_e3_targets_outside_domain():
    p = builtin_example("E3")
    np.testing.assert_array_equal(p.y[:, 0], [-3.4584, -2.3668, 0.3374, 2.4005])
    np.testing.assert_array_equal(p.mu, [0.0078, 0.4920, 0.4823, 0.0179])


@pytest.mark.parametrize("eid", EXAMPLE_IDS)
def test_weights_sum_to_one(eid):
    p = builtin_example(eid)
    assert abs(math.fsum(p.target.weights) - 1.0) <= 1e-12
    assert p.target.min_weight > 0


def test_e0_and_e4_exact():
    np.testing.assert_allclose(exact_solution("E0"), [-0.15, 0.15])
    np.testing.assert_allclose(exact_solution("E4", {"b": 0.5}),
                               [-0.138071, 0.276142, -0.138071], atol=1e-6)
    np.testing.assert_allclose(exact_solution("E5"), [0.25, -0.25])
    assert exact_solution("E1") is None
    assert exact_solution("E7") is None
    # closed forms are tied to a cost exponent
    assert exact_solution("E4", {"p": 3}) is None


@pytest.mark.parametrize("eid", ["E0", "E4", "E5", "E6"])
def test_exact_zero_mean(eid):
    assert abs(exact_solution(eid).sum()) < 1e-12


def test_bad_ids_and_params():
    with pytest.raises(ValueError):
        builtin_example("E9")
    with pytest.raises(ValueError):
        builtin_example("E4", {"b": 1.0})
    with pytest.raises(ValueError):
        builtin_example("E1", {"b": 0.3})
    with pytest.raises(ValueError):
        builtin_example("E1", {"q": 1})


def test_cost_eval_examples():
    assert cost_eval(CostFunction(2), 0.25, 0.75) == pytest.approx(0.25)
    assert cost_eval(CostFunction(2), [0.3], [0.3]) == 0.0
    assert cost_eval(CostFunction(3), [0, 0], [1, 1]) == pytest.approx(2 ** 1.5, rel=1e-15)
    with pytest.raises(ValueError):
        cost_eval(CostFunction(2), [0, 0], [1, 1, 1])
    with pytest.raises(ValueError):
        CostFunction(1.5)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.floats(2, 6))
def test_cost_symmetric(x, y, p):
    c = CostFunction(p)
    assert cost_eval(c, x, y) == pytest.approx(cost_eval(c, y, x), rel=1e-14, abs=1e-300)


def test_validation():
    with pytest.raises(ValueError):
        BoxDomain((0.0,), (0.0,))
    with pytest.raises(ValueError):
        BoxDomain((0,) * 4, (1,) * 4)
    with pytest.raises(ValueError):
        TargetMeasure(((0.1,),), (1.0,))
    with pytest.raises(ValueError):
        TargetMeasure(((0.1,), (0.2,)), (0.5, 0.6))
    with pytest.raises(ValueError):
        TargetMeasure(((0.1,), (0.2,)), (1.0, 0.0))


@pytest.mark.parametrize("eid", EXAMPLE_IDS)
def test_json_round_trip(tmp_path, eid):
    p = builtin_example(eid)
    path = tmp_path / "p.json"
    save_problem(p, path)
    q = load_problem(path)
    assert q == p
    assert problem_to_dict(q) == problem_to_dict(p)


def test_random_problem_seeded():
    a = random_problem(2, 5, seed=3, uniform_weights=False)
    b = random_problem(2, 5, seed=3, uniform_weights=False)
    assert a == b
    assert problem_from_dict(problem_to_dict(a)) == a


def test_quantile_inverts_cdf():
    src = builtin_example("E2").source
    for q in [0.1, 0.3, 0.7, 0.95]:
        assert src.cdf_1d(src.quantile_1d(q)) == pytest.approx(q, abs=1e-14)
