import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factories import (brute_best_uncoded, fig3_instance, make_instance,
                       random_binary_placement, random_instance)
from helpercache.delay import uncoded_objective
from helpercache.greedy import greedy_place, is_independent, marginal_value

seeds = st.integers(0, 2**32 - 1)


def test_marginal_single_user():
    inst = make_instance([[1]], 2.0, 0.5, [0.6, 0.4], 1)
    assert marginal_value(inst, np.zeros((2, 1), dtype=bool), 0, 1) == pytest.approx(0.9)


def test_marginal_zero_when_better_helper_has_it():
    inst = make_instance([[1, 1], [1, 1]], 2.0, [[0.3, 0.3], [0.6, 0.6]], [0.6, 0.4], 1)
    X = np.array([[1, 0], [0, 0]], dtype=bool)
    assert marginal_value(inst, X, 0, 2) == 0.0


def test_marginal_rejects_placed_and_full():
    inst = make_instance([[1]], 2.0, 0.5, [0.6, 0.4], 1)
    X = np.array([[1], [0]], dtype=bool)
    with pytest.raises(ValueError, match="already cached"):
        marginal_value(inst, X, 0, 1)
    with pytest.raises(ValueError, match="full"):
        marginal_value(inst, X, 1, 1)


@settings(max_examples=80, deadline=None)
@given(seed=seeds)
def test_marginal_equals_objective_difference(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 5, 3, 6, 3, ties=bool(seed % 2))
    X = random_binary_placement(rng, inst)
    base = uncoded_objective(inst, X)
    for f in range(inst.F):
        for h in range(1, inst.H + 1):
            if X[f, h - 1] or X[:, h - 1].sum() >= inst.M:
                continue
            Y = X.copy()
            Y[f, h - 1] = True
            assert marginal_value(inst, X, f, h) == pytest.approx(
                uncoded_objective(inst, Y) - base, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_marginals_shrink_on_supersets(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 5, 3, 6, 3)
    big = random_binary_placement(rng, inst)
    small = big & (rng.random(big.shape) < 0.5)
    free = [(f, h) for f in range(inst.F) for h in range(1, inst.H + 1)
            if not big[f, h - 1] and big[:, h - 1].sum() < inst.M]
    for f, h in free:
        assert marginal_value(inst, small, f, h) >= marginal_value(inst, big, f, h) - 1e-9


def test_single_helper_caches_most_popular():
    rng = np.random.default_rng(7)
    probs = np.sort(rng.dirichlet(np.ones(8)))[::-1]
    inst = make_instance(np.ones((1, 5)), rng.uniform(1, 2, 5), 0.3, probs, 3)
    X, _ = greedy_place(inst)
    assert X.files_at(1).tolist() == [0, 1, 2]


def test_fig3_topology():
    # full enumeration of the nine placements by hand: the optimum 2.6 puts
    # file 1 at helper 1 and file 2 at helper 2; greedy finds it
    inst = fig3_instance()
    X, trace = greedy_place(inst)
    assert X.x.tolist() == [[True, False], [False, True]]
    assert trace.objective == pytest.approx(2.6)
    assert brute_best_uncoded(inst) == pytest.approx(2.6)
    assert [(s.element.file, s.element.helper) for s in trace.steps] == [(0, 1), (1, 2)]
    assert [s.marginal for s in trace.steps] == pytest.approx([1.8, 0.8])


def test_stops_at_zero_marginal():
    inst = make_instance([[0, 0]], 2.0, 0.5, [0.5, 0.5], 2)
    X, trace = greedy_place(inst)
    assert not X.x.any() and trace.steps == []
    inst = make_instance([[1]], 2.0, 0.5, [1.0, 0.0, 0.0], 3)
    X, trace = greedy_place(inst)
    assert X.x[:, 0].tolist() == [True, False, False]


def test_zero_cache():
    inst = make_instance([[1]], 2.0, 0.5, [0.5, 0.5], 0)
    for lazy in (True, False):
        X, trace = greedy_place(inst, lazy=lazy)
        assert not X.x.any()


@settings(max_examples=200, deadline=None)
@given(seed=seeds)
def test_lazy_matches_naive(seed):
    rng = np.random.default_rng(seed)
    F, H, U = int(rng.integers(1, 11)), int(rng.integers(1, 5)), int(rng.integers(1, 9))
    M = int(rng.integers(0, min(3, F) + 1))
    inst = random_instance(rng, F, H, U, M, ties=bool(seed % 2))
    X_lazy, t_lazy = greedy_place(inst, lazy=True)
    X_naive, t_naive = greedy_place(inst, lazy=False)
    assert np.array_equal(X_lazy.x, X_naive.x)
    assert [s.element for s in t_lazy.steps] == [s.element for s in t_naive.steps]
    assert t_naive.evaluations <= M * H * F * H
    # trace invariants
    m = [s.marginal for s in t_lazy.steps]
    obj = [s.objective for s in t_lazy.steps]
    assert all(a >= b - 1e-12 for a, b in zip(m, m[1:]))
    assert all(a <= b for a, b in zip(obj, obj[1:]))
    assert is_independent(inst, X_lazy)
    assert t_lazy.objective == pytest.approx(uncoded_objective(inst, X_lazy), abs=1e-12)


def test_equal_marginals_break_by_file_then_helper():
    inst = make_instance([[1, 0], [0, 1]], 2.0, 1.0, [0.5, 0.5], 1)
    _, trace = greedy_place(inst)
    assert [tuple(s.element) for s in trace.steps] == [(0, 1), (0, 2)]


def test_trace_rows_are_one_based():
    inst = make_instance([[1]], 2.0, 0.5, [0.6, 0.4], 1)
    _, trace = greedy_place(inst)
    assert trace.to_rows() == [{"step": 1, "file": 1, "helper": 1,
                                "marginal": pytest.approx(0.9),
                                "objective": pytest.approx(0.9)}]
