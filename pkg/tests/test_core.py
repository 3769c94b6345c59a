import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lipgo.core import (
    BoxDomain,
    BudgetExhausted,
    DomainError,
    InputError,
    LipschitzSpec,
    NonFiniteValueError,
    Objective,
    SolverResult,
    TargetReached,
    Trial,
    diagonal_lower_bound,
    improvement_threshold,
    lipschitz_violation_witness,
    minorant_minimum_1d,
    minorant_value,
)
from oracles import cone_minorant_loops


def T(x, z):
    return Trial(np.atleast_1d(np.asarray(x, dtype=float)), float(z))


# --- BoxDomain -------------------------------------------------------------


def test_box_domain_basics():
    d = BoxDomain([0.0, -1.0], [2.0, 1.0])
    assert d.dimension == 2
    assert np.array_equal(d.widths, [2.0, 2.0])
    assert d.volume == 4.0
    assert d.contains([1.0, 0.0]) and d.contains([2.0, 1.0])
    assert not d.contains([2.1, 0.0])
    u = d.to_unit([1.0, 0.5])
    assert np.allclose(u, [0.5, 0.75])
    assert np.allclose(d.from_unit(u), [1.0, 0.5])


@pytest.mark.parametrize("lo,hi", [([0.0], [0.0]), ([1.0], [0.0]), ([0.0, 0.0], [1.0]), ([], [])])
def test_box_domain_rejects_bad_bounds(lo, hi):
    with pytest.raises(InputError):
        BoxDomain(lo, hi)


def test_box_domain_equality_and_hash():
    a = BoxDomain.cube(3, -1, 1)
    b = BoxDomain([-1.0] * 3, [1.0] * 3)
    assert a == b and hash(a) == hash(b)


# --- Objective -------------------------------------------------------------


def test_objective_counts_and_tracks_best():
    obj = Objective(lambda x: float(x[0] ** 2), BoxDomain([-2.0], [2.0]))
    for x in (1.0, -0.5, 2.0):
        obj([x])
    assert obj.evaluation_count == 3
    assert obj.best.value == 0.25
    assert [t.value for t in obj.history] == [1.0, 0.25, 4.0]


def test_objective_budget_fails_loudly():
    calls = []
    obj = Objective(lambda x: calls.append(1) or 0.0, budget=2)
    obj([0.0])
    obj([1.0])
    with pytest.raises(BudgetExhausted):
        obj([2.0])
    assert len(calls) == 2 and obj.exhausted


def test_objective_domain_and_nonfinite():
    obj = Objective(lambda x: math.nan, BoxDomain([0.0], [1.0]))
    with pytest.raises(DomainError):
        obj([1.5])
    with pytest.raises(NonFiniteValueError):
        obj([0.5])
    assert obj.evaluation_count == 0


def test_objective_on_trial_can_stop():
    def hook(k, trial):
        if k == 3:
            raise TargetReached("done")

    obj = Objective(lambda x: 1.0, on_trial=hook)
    obj([0.0])
    obj([0.0])
    with pytest.raises(TargetReached):
        obj([0.0])
    assert obj.evaluation_count == 3


def test_trial_points_are_frozen():
    obj = Objective(lambda x: 0.0)
    obj([1.0, 2.0])
    with pytest.raises(ValueError):
        obj.history[0].point[0] = 5.0


# --- LipschitzSpec ---------------------------------------------------------


def test_lipschitz_spec_validation():
    assert LipschitzSpec.a_priori(2.0).L == 2.0
    with pytest.raises(InputError):
        LipschitzSpec.a_priori(0.0)
    with pytest.raises(InputError):
        LipschitzSpec.a_priori(math.inf)
    with pytest.raises(InputError):
        LipschitzSpec.adaptive_global(r=1.0)
    with pytest.raises(InputError):
        LipschitzSpec.local_tuning(xi=0.0)
    with pytest.raises(InputError):
        LipschitzSpec.multiple_estimates(eps=-1e-3)
    assert LipschitzSpec.multiple_estimates(0.0).eps == 0.0


def test_solver_result_invariants():
    obj = Objective(lambda x: float(abs(x[0] - 1)))
    for x in (0.0, 1.5, 3.0):
        obj([x])
    res = SolverResult.from_objective(obj, 2, "done", 1)
    assert res.best_value == min(t.value for t in res.trial_history) == 0.5
    assert res.trials_used == len(res.trial_history) == obj.evaluation_count


# --- minorant_value --------------------------------------------------------


def test_minorant_value_examples():
    assert minorant_value([T(0, 1), T(1, 0)], 2.0, 0.5) == 0.0
    assert minorant_value([T(0.3, 7.0)], 123.0, 0.3) == 7.0
    two = [T(0, 0), T(1, 0)]
    assert minorant_value(two, 1.0, 0.5) == -0.5
    grid = np.linspace(0, 1, 10_001)[:, None]
    assert np.max(minorant_value(two, 1.0, grid)) == pytest.approx(0.0)
    # the minimum over the grid sits at 0.5
    assert np.min(minorant_value(two, 1.0, grid)) == pytest.approx(-0.5)


def test_minorant_value_errors():
    with pytest.raises(DomainError):
        minorant_value([], 1.0, 0.0)
    with pytest.raises(InputError):
        minorant_value([T(0, 1)], -1.0, 0.0)
    with pytest.raises(InputError):
        minorant_value([T(0, math.inf)], 1.0, 0.0)
    with pytest.raises(InputError):
        minorant_value([T(0, 1)], 1.0, math.nan)


def test_minorant_value_matches_loop_oracle():
    rng = np.random.default_rng(3)
    pts = rng.random((15, 3))
    vals = rng.normal(size=15)
    trials = [Trial(p, v) for p, v in zip(pts, vals)]
    xs = rng.random((40, 3))
    got = minorant_value(trials, 1.7, xs)
    want = [cone_minorant_loops(pts, vals, 1.7, x) for x in xs]
    assert np.allclose(got, want, rtol=0, atol=1e-13)


@given(
    st.lists(st.tuples(st.floats(0, 1), st.floats(-5, 5)), min_size=1, max_size=12),
    st.floats(0.1, 20),
    st.floats(0.1, 20),
    st.floats(0, 1),
)
def test_minorant_monotone_in_L(samples, l1, l2, x):
    trials = [T(p, z) for p, z in samples]
    lo, hi = sorted((l1, l2))
    assert minorant_value(trials, hi, x) <= minorant_value(trials, lo, x) + 1e-12


def test_minorant_interpolates_lipschitz_data():
    rng = np.random.default_rng(0)
    c = rng.random((6, 2))

    def g(x):
        return float(np.max(-3.0 * np.linalg.norm(c - x, axis=1)))

    pts = rng.random((30, 2))
    trials = [Trial(p, g(p)) for p in pts]
    assert lipschitz_violation_witness(trials, 3.0) is None
    for t in trials:
        assert abs(minorant_value(trials, 3.0, t.point) - t.value) <= 1e-12


# --- minorant_minimum_1d ---------------------------------------------------


def test_minorant_minimum_examples():
    x, v = minorant_minimum_1d([T(0, 1), T(1, 0)], 2.0)
    assert (x, v) == (0.75, -0.5)
    x, v = minorant_minimum_1d([T(0, 0), T(1, 0)], 1.0)
    assert (x, v) == (0.5, -0.5)
    x, _ = minorant_minimum_1d([T(0, 4.2), T(1, 4.2)], 13.0)
    assert x == 0.5


def test_minorant_minimum_errors():
    with pytest.raises(InputError):
        minorant_minimum_1d([T(0, 1), T(1, 0)], 0.0)
    with pytest.raises(InputError):
        minorant_minimum_1d([T(1, 1), T(0, 0)], 1.0)


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=8), st.integers(0, 10_000))
def test_minorant_minimum_matches_dense_grid(values, seed):
    rng = np.random.default_rng(seed)
    xs = np.sort(np.concatenate([[0.0, 1.0], rng.random(len(values) - 2)]))
    if np.any(np.diff(xs) <= 1e-9):
        return
    slopes = np.abs(np.diff(values)) / np.diff(xs)
    L = 1.5 * float(slopes.max()) + 0.1
    trials = [T(x, z) for x, z in zip(xs, values)]
    _, v = minorant_minimum_1d(trials, L, (0.0, 1.0))
    grid = np.linspace(0.0, 1.0, 100_001)[:, None]
    g = float(np.min(minorant_value(trials, L, grid)))
    assert v <= g + 1e-12
    # a grid point is at most h/2 from the true minimizer, where the
    # minorant has slope at most L
    h = 1e-5
    assert g - v <= 0.5 * L * h + 1e-12


# --- diagonal_lower_bound --------------------------------------------------


def test_diagonal_lower_bound_examples():
    assert diagonal_lower_bound(1.0, 0.0, 1.0, 2.0) == -0.5
    assert diagonal_lower_bound(3.0, 3.0, 2.0, 0.25) == 3.0 - 0.25
    assert diagonal_lower_bound(0.0, 0.0, 2.0, 0.5) == -0.5
    # equals the minimum of the two-cone minorant along the diagonal
    cones = [T(0, 1.0), T(1, 0.0)]
    grid = np.linspace(0, 1, 10_001)[:, None]
    assert float(np.min(minorant_value(cones, 2.0, grid))) == pytest.approx(-0.5, abs=1e-4)


@pytest.mark.parametrize("length,L", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0), (1.0, -2.0)])
def test_diagonal_lower_bound_errors(length, L):
    with pytest.raises(InputError):
        diagonal_lower_bound(0.0, 0.0, length, L)


# --- lipschitz_violation_witness ------------------------------------------


def test_violation_witness_examples():
    trials = [T(0, 0), T(1, 10)]
    assert lipschitz_violation_witness(trials, 1.0) == (0, 1)
    assert lipschitz_violation_witness(trials, 10.0) is None
    assert lipschitz_violation_witness([T(0.5, 3)], 1e-9) is None


def test_improvement_threshold():
    assert improvement_threshold(2.0, 1e-4) == pytest.approx(2.0 - 2e-4)
    assert improvement_threshold(-2.0, 1e-4) == pytest.approx(-2.0 - 2e-4)
    assert improvement_threshold(0.0, 1e-4) == -1e-8
    # eps = 0 switches the margin off entirely, floor included
    assert improvement_threshold(1e-6, 0.0) == 1e-6
    with pytest.raises(InputError):
        improvement_threshold(1.0, -1e-4)
