import numpy as np
import pytest
from hypothesis import given, strategies as st

from mfinverse.core import (
    Bounds,
    BudgetExhaustedError,
    EvaluationBudget,
    TargetSpec,
    budget_tick,
    derive_target_info,
    plain_objective,
    rmse_objective,
    rng_from,
)

finite_floats = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


@pytest.mark.parametrize(
    "computed, target, expected",
    [
        ([1, 1, 1], [1, 1, 1], 0.0),
        ([2, 2], [0, 0], 2.0),
        # hand arithmetic: (1 + 4 + 9 + 16) / 4 = 7.5
        ([1, 2, 3, 4], [0, 0, 0, 0], 7.5**0.5),
    ],
)
def test_rmse_examples(computed, target, expected):
    assert rmse_objective(computed, target) == pytest.approx(expected, abs=1e-12)


def test_rmse_rejects_bad_input():
    with pytest.raises(ValueError):
        rmse_objective([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        rmse_objective([1, np.nan], [1, 2])
    with pytest.raises(ValueError):
        rmse_objective([], [])


@given(
    u=st.lists(finite_floats, min_size=1, max_size=8),
    v_offset=st.lists(finite_floats, min_size=8, max_size=8),
    a=st.floats(min_value=-100, max_value=100, allow_nan=False),
)
def test_rmse_scales_linearly(u, v_offset, a):
    u = np.asarray(u)
    v = u + np.asarray(v_offset[: u.size])
    scaled = rmse_objective(a * u, a * v)
    assert scaled == pytest.approx(abs(a) * rmse_objective(u, v), rel=1e-9, abs=1e-9)


@given(u=st.lists(finite_floats, min_size=1, max_size=8))
def test_rmse_sign_symmetric(u):
    u = np.asarray(u)
    v = u + 1.5
    assert rmse_objective(u, v) == pytest.approx(rmse_objective(-u, -v), rel=1e-12)


@pytest.mark.parametrize(
    "values, reduction, expected",
    [([1, 2, 3], "mean", 2.0), ([1, 2, 3], "max", 3.0)],
)
def test_target_info(values, reduction, expected):
    assert derive_target_info(values, reduction) == expected


def test_target_info_empty():
    with pytest.raises(ValueError):
        derive_target_info([], "mean")


@given(values=st.lists(finite_floats, min_size=1, max_size=16))
def test_max_dominates_mean(values):
    assert derive_target_info(values, "max") >= derive_target_info(values, "mean")


def test_target_spec_recomputable():
    t = TargetSpec([1.0, 2.0, 4.0], "mean")
    assert abs(t.info - 7.0 / 3.0) <= 1e-12 * abs(t.info)
    assert TargetSpec([1.0, 2.0, 4.0], "max").info == 4.0
    with pytest.raises(ValueError):
        TargetSpec([1.0], "median")


def test_budget_tick_paths():
    b = EvaluationBudget(total=200)
    budget_tick(b, gated=True)
    assert (b.rb, b.hf_count, b.consumed) == (1, 0, 1)
    b2 = EvaluationBudget(total=200, consumed=199, hf_count=150, rb=49)
    b2.tick(gated=False)
    assert b2.consumed == 200 and b2.exhausted
    with pytest.raises(BudgetExhaustedError):
        b2.tick(gated=False)


@given(gates=st.lists(st.booleans(), min_size=1, max_size=200))
def test_budget_identity(gates):
    b = EvaluationBudget(total=len(gates))
    for g in gates:
        b.tick(g)
        assert b.hf_count + b.rb == b.consumed <= b.total
    assert b.rb == sum(gates)


def test_budget_accounting_example():
    b = EvaluationBudget(total=200)
    for i in range(200):
        b.tick(gated=(i % 5 == 0))  # 40 gated out of 200
    assert (b.hf_count, b.rb) == (160, 40)


def test_budget_validation():
    with pytest.raises(ValueError):
        EvaluationBudget(total=0)
    with pytest.raises(ValueError):
        EvaluationBudget(total=10, consumed=3, hf_count=1, rb=1)


def test_rng_streams_are_deterministic_and_distinct():
    a = rng_from(7, "pso").random(4)
    b = rng_from(7, "pso").random(4)
    c = rng_from(7, "shade").random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(rng_from(8, "pso").random(4), a)


def test_bounds_operations():
    b = Bounds([0.0, -1.0], [1.0, 1.0])
    assert b.dim == 2
    assert b.contains([0.5, 0.0])
    assert not b.contains([1.5, 0.0])
    assert np.array_equal(b.clip([2.0, -3.0]), [1.0, -1.0])
    inner = Bounds([0.2, -0.5], [0.8, 0.5])
    assert inner.nested_in(b)
    assert not b.nested_in(inner)
    with pytest.raises(ValueError):
        Bounds([1.0], [0.0])
    with pytest.raises(ValueError):
        Bounds([0.0, 0.0], [1.0])


def test_plain_objective_ticks_hf():
    b = EvaluationBudget(total=3)
    hook = plain_objective(lambda x: float(np.sum(x)), b)
    res = hook(np.array([1.0, 2.0]))
    assert res.fitness == 3.0 and not res.penalized
    assert b.hf_count == 1 and b.rb == 0
