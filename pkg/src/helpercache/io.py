"""JSON file formats for instances, scenarios, placements and configs.

All indices on disk are 1-based: files ``1..F``, users ``1..U``, helpers
``1..H`` with ``0`` for the base station. Floats are written with ``repr``
so a write/read round trip is exact. The schemas are documented in
``README.md``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import (POPULARITY_TOL, CodedPlacement, ConnectivityGraph, DelayMatrix,
                    FileLibrary, Popularity, ProblemInstance, UncodedPlacement,
                    zipf_popularity)
from .scenario import CellGeometry, MobilityConfig, RadioConfig, Scenario

INSTANCE_FORMAT = "helpercache-instance"
SCENARIO_FORMAT = "helpercache-scenario"
PLACEMENT_FORMAT = "helpercache-placement"


class FormatError(ValueError):
    """A file does not follow the expected schema; names the offending field."""


def _load(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _dump(obj, path):
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise FormatError(f"{where}: missing required field '{key}'")
    return d[key]


def _int(d: dict, key: str, where: str, minimum: int = 0) -> int:
    v = _require(d, key, where)
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise FormatError(f"{where}: field '{key}' must be an integer >= {minimum}")
    return v


# -- popularity ------------------------------------------------------------

def popularity_from_vector(values) -> Popularity:
    """Explicit vector: kept as is within 1e-9 of unit mass, renormalized
    within 1e-6, rejected otherwise."""
    p = np.asarray(values, dtype=float)
    if abs(p.sum() - 1.0) <= POPULARITY_TOL and np.all(p >= 0):
        return Popularity(p)
    return Popularity.from_vector(p)


def _popularity_to_dict(pop: Popularity) -> dict:
    g = pop.zipf_gamma
    if g is not None and np.array_equal(zipf_popularity(len(pop), g).probs, pop.probs):
        return {"zipf": g}
    return {"probs": [float(v) for v in pop.probs]}


def _popularity_from_dict(d, F: int, where: str) -> Popularity:
    if not isinstance(d, dict) or not ({"zipf", "probs"} & set(d)):
        raise FormatError(f"{where}: 'popularity' needs a 'zipf' or 'probs' entry")
    try:
        if "zipf" in d:
            return zipf_popularity(F, float(d["zipf"]))
        pop = popularity_from_vector(d["probs"])
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: popularity: {exc}") from None
    if len(pop) != F:
        raise FormatError(f"{where}: popularity has {len(pop)} entries, expected {F}")
    return pop


# -- instances -------------------------------------------------------------

def instance_to_dict(inst: ProblemInstance) -> dict:
    omega, inf = inst.omega, inst.delays.omega_infinity
    listed = np.zeros_like(omega, dtype=bool)
    listed[0] = True
    listed[1:] = inst.adjacency
    listed |= omega != inf
    hs, us = np.nonzero(listed)
    return {
        "format": INSTANCE_FORMAT,
        "version": 1,
        "files": inst.F,
        "file_size_bits": inst.library.file_size_bits,
        "cache_size": inst.M,
        "popularity": _popularity_to_dict(inst.popularity),
        "helpers": inst.H,
        "users": inst.U,
        "edges": [[h, u + 1] for h, u in inst.graph.edges()],
        "delays": {
            "default": float(inf),
            "entries": [[int(h), int(u) + 1, float(omega[h, u])] for h, u in zip(hs, us)],
        },
    }


def instance_from_dict(d: dict, where: str = "instance") -> ProblemInstance:
    if d.get("format") != INSTANCE_FORMAT:
        raise FormatError(f"{where}: 'format' must be '{INSTANCE_FORMAT}'")
    F = _int(d, "files", where, 1)
    M = _int(d, "cache_size", where)
    H = _int(d, "helpers", where)
    U = _int(d, "users", where, 1)
    pop = _popularity_from_dict(_require(d, "popularity", where), F, where)
    edges = []
    for e in _require(d, "edges", where):
        h, u = e
        if not (1 <= h <= H and 1 <= u <= U):
            raise FormatError(f"{where}: edge {e} out of range")
        edges.append((h, u - 1))
    graph = ConnectivityGraph.from_edges(H, U, edges)
    delays = _require(d, "delays", where)
    inf = float(_require(delays, "default", where + ".delays"))
    omega = np.full((H + 1, U), inf)
    for e in _require(delays, "entries", where + ".delays"):
        h, u, v = e
        if not (0 <= h <= H and 1 <= u <= U):
            raise FormatError(f"{where}: delay entry {e} out of range")
        omega[h, u - 1] = float(v)
    lib = FileLibrary(F, int(d.get("file_size_bits", 1)))
    return ProblemInstance(lib, pop, graph, DelayMatrix(omega, inf), M)


def write_instance(inst: ProblemInstance, path):
    _dump(instance_to_dict(inst), path)


def read_instance(path) -> ProblemInstance:
    return instance_from_dict(_load(path), str(path))


# -- scenarios -------------------------------------------------------------

def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "format": SCENARIO_FORMAT,
        "geometry": vars(sc.geometry).copy(),
        "radio": vars(sc.radio).copy(),
        "seed": sc.seed,
        "helper_ids": [int(i) for i in sc.helper_ids],
        "helpers": sc.helpers.tolist(),
        "users": sc.users.tolist(),
    }


def scenario_from_dict(d: dict, where: str = "scenario") -> Scenario:
    if d.get("format") != SCENARIO_FORMAT:
        raise FormatError(f"{where}: 'format' must be '{SCENARIO_FORMAT}'")
    return Scenario(CellGeometry(**d["geometry"]), RadioConfig(**d["radio"]),
                    np.array(d["helpers"], dtype=float), np.array(d["users"], dtype=float),
                    d.get("seed"), np.array(d.get("helper_ids", range(len(d["helpers"])))))


def write_scenario(sc: Scenario, path):
    _dump(scenario_to_dict(sc), path)


def read_scenario(path) -> Scenario:
    return scenario_from_dict(_load(path), str(path))


# -- placements ------------------------------------------------------------

def placement_to_dict(placement) -> dict:
    if isinstance(placement, UncodedPlacement):
        fs, hs = np.nonzero(placement.x)
        kind, entries = "uncoded", [[int(f) + 1, int(h) + 1] for f, h in zip(fs, hs)]
        F, H = placement.x.shape
    else:
        rho = placement.rho
        fs, hs = np.nonzero(rho)
        kind = "coded"
        entries = [[int(f) + 1, int(h) + 1, float(rho[f, h])] for f, h in zip(fs, hs)]
        F, H = rho.shape
    return {"format": PLACEMENT_FORMAT, "kind": kind, "files": F, "helpers": H,
            "entries": entries}


def placement_from_dict(d: dict, where: str = "placement"):
    if d.get("format") != PLACEMENT_FORMAT:
        raise FormatError(f"{where}: 'format' must be '{PLACEMENT_FORMAT}'")
    F, H = _int(d, "files", where, 1), _int(d, "helpers", where)
    kind = _require(d, "kind", where)
    entries = _require(d, "entries", where)
    if kind == "uncoded":
        x = np.zeros((F, H), dtype=bool)
        for f, h in entries:
            x[f - 1, h - 1] = True
        return UncodedPlacement(x)
    if kind == "coded":
        rho = np.zeros((F, H))
        for f, h, v in entries:
            rho[f - 1, h - 1] = float(v)
        return CodedPlacement(rho)
    raise FormatError(f"{where}: 'kind' must be 'uncoded' or 'coded'")


def write_placement(placement, path):
    _dump(placement_to_dict(placement), path)


def read_placement(path):
    return placement_from_dict(_load(path), str(path))


# -- generator config ------------------------------------------------------

def read_config(path) -> dict:
    d = _load(path)
    if not isinstance(d, dict):
        raise FormatError(f"{path}: top level must be an object")
    return d


def scenario_config(d: dict, where: str = "config") -> dict:
    """Check a ``generate`` config and fill defaults."""
    out = {
        "users": _int(d, "users", where, 1),
        "files": _int(d, "files", where, 1),
        "cache_size": _int(d, "cache_size", where),
        "zipf_gamma": float(d.get("zipf_gamma", 0.56)),
        "file_size_bits": int(d.get("file_size_bits", 1)),
        "seed": int(d.get("seed", 0)),
    }
    try:
        out["geometry"] = CellGeometry(**d.get("geometry", {}))
        out["radio"] = RadioConfig(**d.get("radio", {}))
        out["mobility"] = MobilityConfig(**d.get("mobility", {}))
    except TypeError as exc:
        raise FormatError(f"{where}: {exc}") from None
    if "helpers" in d:
        out["helpers"] = _int(d, "helpers", where, 1)
    elif "grid_spacing" not in d.get("geometry", {}):
        raise FormatError(f"{where}: missing required field 'helpers' "
                          "(or geometry.grid_spacing)")
    return out
