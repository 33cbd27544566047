import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factories import make_instance, random_instance
from helpercache.io import (FormatError, instance_from_dict, instance_to_dict,
                            placement_from_dict, placement_to_dict, read_instance,
                            read_scenario, write_instance, write_scenario)
from helpercache.model import CodedPlacement, UncodedPlacement, zipf_popularity
from helpercache.scenario import CellGeometry, RadioConfig, make_scenario


def _same(a, b):
    return (a.F == b.F and a.M == b.M and a.library == b.library
            and np.array_equal(a.P, b.P) and np.array_equal(a.adjacency, b.adjacency)
            and np.array_equal(a.omega, b.omega)
            and a.delays.omega_infinity == b.delays.omega_infinity)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_instance_round_trip_is_exact(seed, tmp_path_factory):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 5, 3, 6, 2, ties=bool(seed % 2))
    path = tmp_path_factory.mktemp("io") / "inst.json"
    write_instance(inst, path)
    back = read_instance(path)
    assert _same(inst, back)
    assert instance_to_dict(back) == instance_to_dict(inst)


def test_zipf_popularity_stored_compactly():
    inst = make_instance([[1]], 2.0, 1.0, zipf_popularity(4, 0.56).probs, 1)
    d = instance_to_dict(inst)
    assert d["popularity"] == {"probs": list(inst.P)}
    from helpercache.model import ProblemInstance
    z = ProblemInstance(inst.library, zipf_popularity(4, 0.56), inst.graph, inst.delays, 1)
    d = instance_to_dict(z)
    assert d["popularity"] == {"zipf": 0.56}
    assert np.array_equal(instance_from_dict(d).P, z.P)


def _doc():
    return instance_to_dict(make_instance([[1, 0]], 2.0, 1.0, [0.5, 0.5], 1))


def test_explicit_popularity_renormalized_or_rejected():
    d = _doc()
    d["popularity"] = {"probs": [0.5, 0.5 + 5e-7]}
    assert abs(instance_from_dict(d).P.sum() - 1) < 1e-15
    d["popularity"] = {"probs": [0.5, 0.45]}
    with pytest.raises(FormatError, match="popularity"):
        instance_from_dict(d)


def test_errors_name_the_field():
    d = _doc()
    del d["cache_size"]
    with pytest.raises(FormatError, match="cache_size"):
        instance_from_dict(d)
    d = _doc()
    d["edges"] = [[2, 1]]
    with pytest.raises(FormatError, match="edge"):
        instance_from_dict(d)
    d = _doc()
    d["format"] = "other"
    with pytest.raises(FormatError, match="format"):
        instance_from_dict(d)


def test_parse_error_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n "files": 2,\n "cache_size": \n}')
    with pytest.raises(FormatError, match="line 4"):
        read_instance(p)


def test_non_edge_overrides_survive():
    inst = make_instance([[1, 0]], 2.0, 1.0, [1.0], 1)
    omega = inst.omega.copy()
    omega[1, 1] = 0.7
    from helpercache.model import DelayMatrix, ProblemInstance
    odd = ProblemInstance(inst.library, inst.popularity, inst.graph,
                          DelayMatrix(omega, inst.delays.omega_infinity), 1)
    assert _same(instance_from_dict(instance_to_dict(odd)), odd)


def test_placement_round_trip():
    X = UncodedPlacement(np.array([[1, 0], [0, 1], [0, 0]], dtype=bool))
    d = placement_to_dict(X)
    assert d["entries"] == [[1, 1], [2, 2]]
    assert np.array_equal(placement_from_dict(json.loads(json.dumps(d))).x, X.x)
    R = CodedPlacement(np.array([[0.1, 0.0], [1 / 3, 1.0]]))
    d = placement_to_dict(R)
    assert d["entries"][0] == [1, 1, 0.1]
    assert np.array_equal(placement_from_dict(json.loads(json.dumps(d))).rho, R.rho)


def test_scenario_round_trip(tmp_path):
    sc = make_scenario(CellGeometry(grid_spacing=120), RadioConfig(), 30, 4)
    write_scenario(sc, tmp_path / "s.json")
    back = read_scenario(tmp_path / "s.json")
    assert np.array_equal(back.users, sc.users) and np.array_equal(back.helpers, sc.helpers)
    assert back.geometry == sc.geometry and back.radio == sc.radio and back.seed == 4
