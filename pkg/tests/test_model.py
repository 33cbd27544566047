import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factories import make_instance, product_form_delay, random_instance
from helpercache.model import (OMEGA_INF_FACTOR, CodedPlacement, ConnectivityGraph,
                               InfeasiblePlacementError, Popularity, UncodedPlacement,
                               check_placement, helper_order, validate, zipf_popularity)


def test_zipf_uniform_and_harmonic():
    np.testing.assert_allclose(zipf_popularity(2, 0).probs, [0.5, 0.5])
    np.testing.assert_allclose(zipf_popularity(2, 1).probs, [2 / 3, 1 / 3])


def test_zipf_top_hundred_mass():
    # 0.339768379532987 from a 30-digit mpmath evaluation of the same sum
    p = zipf_popularity(1000, 0.56).probs
    assert abs(p[:100].sum() - 0.339768379532987) < 1e-12
    assert abs(p[:100].sum() - 0.34) < 0.01


def test_zipf_rejects_bad_arguments():
    with pytest.raises(ValueError):
        zipf_popularity(3, -0.1)
    with pytest.raises(ValueError):
        zipf_popularity(0, 1.0)


@settings(max_examples=30, deadline=None)
@given(F=st.integers(1, 10**6), gamma=st.floats(0, 3))
def test_zipf_normalized_and_monotone(F, gamma):
    p = zipf_popularity(F, gamma).probs
    assert abs(p.sum() - 1.0) < 1e-9
    assert np.all(np.diff(p) <= 0)


def test_popularity_from_vector_renormalizes_small_drift():
    p = Popularity.from_vector([0.5, 0.5 + 5e-7])
    assert abs(p.probs.sum() - 1.0) < 1e-15
    with pytest.raises(ValueError):
        Popularity.from_vector([0.5, 0.49])
    with pytest.raises(ValueError):
        Popularity.from_vector([1.5, -0.5])


def test_helper_order_examples():
    # one user, two helpers; only BS
    inst = make_instance([[0], [0]], 2.0, 0.5, [1.0], 1)
    assert helper_order(inst, 0).helpers.tolist() == [0]
    inst = make_instance([[1], [1]], 2.0, [[0.5], [0.3]], [1.0], 1)
    assert helper_order(inst, 0).helpers.tolist() == [2, 1, 0]
    inst = make_instance([[1], [1]], 2.0, [[0.5], [0.5]], [1.0], 1)
    assert helper_order(inst, 0).helpers.tolist() == [1, 2, 0]


def test_helper_order_base_station_last_under_tie():
    inst = make_instance([[1]], 2.0, 2.0, [1.0], 1)
    assert helper_order(inst, 0).helpers.tolist() == [1, 0]


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_helper_order_monotone(seed):
    inst = random_instance(np.random.default_rng(seed), 3, 4, 6, 1, ties=True)
    for u in range(inst.U):
        order = helper_order(inst, u)
        assert order.helpers[-1] == 0
        assert np.all(np.diff(order.delays) >= 0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_tied_orders_give_same_delay(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 3, 4, 4, 2, ties=True)
    X = rng.random((inst.F, inst.H)) < 0.5
    for u in range(inst.U):
        hs = [h for h in range(1, inst.H + 1) if inst.adjacency[h - 1, u]]
        values = set()
        for perm in itertools.permutations(hs):
            d = [inst.omega[h, u] for h in perm]
            if all(a <= b for a, b in zip(d, d[1:])):
                values.add(round(product_form_delay(inst, X, u, list(perm)), 12))
        assert len(values) == 1


def test_omega_infinity_sentinel():
    inst = make_instance([[1, 0]], [2.0, 3.0], 1.0, [1.0], 1)
    assert inst.delays.omega_infinity == OMEGA_INF_FACTOR * 3.0
    assert inst.omega[1, 1] == inst.delays.omega_infinity


def test_graph_neighborhoods_consistent():
    rng = np.random.default_rng(3)
    g = ConnectivityGraph(rng.random((5, 7)) < 0.4)
    for h, u in g.edges():
        assert u in g.users_of(h) and h in g.helpers_of(u)
    for h in range(1, 6):
        for u in g.users_of(h):
            assert (h, int(u)) in g.edges()
    assert g.users_of(0).tolist() == list(range(7))


def test_graph_from_edges_rejects_out_of_range():
    with pytest.raises(ValueError):
        ConnectivityGraph.from_edges(2, 2, [(3, 0)])
    with pytest.raises(ValueError):
        ConnectivityGraph.from_edges(2, 2, [(0, 0)])


def test_cache_size_truncated_with_warning():
    with pytest.warns(UserWarning, match="truncated"):
        inst = make_instance([[1]], 2.0, 1.0, [0.5, 0.5], 5)
    assert inst.M == 2


def test_max_degree():
    inst = make_instance([[1, 1, 0], [1, 0, 0], [1, 0, 0]], 2.0, 1.0, [1.0], 1)
    assert inst.max_degree == 3


def test_validate_clean_instance():
    rng = np.random.default_rng(0)
    assert validate(random_instance(rng, 4, 3, 5, 2)) == []


def test_validate_bs_dominance():
    inst = make_instance([[1, 1]], [2.0, 2.0], [[1.0, 3.0]], [1.0], 1)
    v = validate(inst)
    assert [x.invariant for x in v] == ["BS delay dominance"]
    assert "omega[1,2]" in v[0].detail


def test_validate_popularity_normalization():
    inst = make_instance([[1]], 2.0, 1.0, [0.5, 0.4], 1)
    assert [x.invariant for x in validate(inst)] == ["popularity normalization"]


def test_validate_non_edge_delay():
    inst = make_instance([[1, 0]], 2.0, 1.0, [1.0], 1)
    omega = inst.omega.copy()
    omega[1, 1] = 1.0
    from helpercache.model import DelayMatrix, ProblemInstance
    bad = ProblemInstance(inst.library, inst.popularity, inst.graph,
                          DelayMatrix(omega, inst.delays.omega_infinity), 1)
    assert [x.invariant for x in validate(bad)] == ["non-edge delay"]


def test_check_placement():
    inst = make_instance([[1], [1]], 2.0, 1.0, [0.5, 0.5], 1)
    check_placement(inst, UncodedPlacement(np.array([[1, 0], [0, 1]])), binary=True)
    with pytest.raises(InfeasiblePlacementError, match="helper 1"):
        check_placement(inst, np.array([[1, 0], [1, 0]]), binary=True)
    with pytest.raises(InfeasiblePlacementError):
        check_placement(inst, np.array([[0.5, 0], [0, 0]]), binary=True)
    with pytest.raises(InfeasiblePlacementError):
        check_placement(inst, np.ones((3, 2)), binary=True)
    # coded capacity allows 1e-7 slack
    check_placement(inst, CodedPlacement(np.array([[0.5, 0], [0.5 + 5e-8, 0]])), binary=False)
    with pytest.raises(InfeasiblePlacementError):
        check_placement(inst, np.array([[0.6, 0], [0.6, 0]]), binary=False)
    with pytest.raises(InfeasiblePlacementError):
        check_placement(inst, np.array([[1.2, 0], [0, 0]]), binary=False)


def test_instances_are_immutable():
    inst = make_instance([[1]], 2.0, 1.0, [1.0], 1)
    with pytest.raises(ValueError):
        inst.omega[0, 0] = 5.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        with pytest.raises(Exception):
            inst.cache_size = 3
