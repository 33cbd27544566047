"""Problem instance data model.

Conventions used throughout the package:

* ``omega`` is an ``(H+1, U)`` array; row 0 is the base station, rows
  ``1..H`` are helpers. Helper indices in the API therefore run ``1..H``.
* Placement matrices are ``(F, H)``; column ``h-1`` belongs to helper ``h``.
* File and user indices in the Python API are 0-based array positions.
  Files on disk, CLI output and error messages use 1-based numbering.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

#: multiplier applied to ``max_u omega[0, u]`` to obtain the non-edge delay
OMEGA_INF_FACTOR = 1e6

POPULARITY_TOL = 1e-9
POPULARITY_RENORM_TOL = 1e-6
CODED_CAP_TOL = 1e-7


class InfeasiblePlacementError(ValueError):
    """A placement violates the cache-size or range constraints."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FileLibrary:
    file_count: int
    file_size_bits: int = 1

    def __post_init__(self):
        if self.file_count < 1 or self.file_size_bits < 1:
            raise ValueError("file_count and file_size_bits must be >= 1")


@dataclass(frozen=True, eq=False)
class Popularity:
    """Request probabilities ``probs[f]`` for files ``f = 0..F-1``.

    ``zipf_gamma`` remembers the Zipf exponent when the vector was built by
    :func:`zipf_popularity`, so instance files can store it compactly.
    """

    probs: np.ndarray
    zipf_gamma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen(self.probs))
        if self.probs.ndim != 1:
            raise ValueError("popularity must be a vector")

    def __len__(self):
        return len(self.probs)

    @classmethod
    def from_vector(cls, values) -> Popularity:
        """Accept an explicit vector, renormalizing small drift.

        Vectors whose sum is off by more than ``POPULARITY_RENORM_TOL`` or that
        contain negative entries are rejected.
        """
        p = np.asarray(values, dtype=float)
        if p.ndim != 1 or len(p) == 0:
            raise ValueError("popularity vector must be a non-empty 1-D list")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("popularity entries must be finite and nonnegative")
        total = p.sum()
        if abs(total - 1.0) >= POPULARITY_RENORM_TOL:
            raise ValueError(f"popularity sums to {float(total)!r}, expected 1")
        return cls(p / total)


def zipf_popularity(F: int, gamma: float) -> Popularity:
    """Zipf law over ranks ``1..F``: ``P_f`` proportional to ``f**-gamma``."""
    if F < 1:
        raise ValueError("F must be >= 1")
    if gamma < 0:
        raise ValueError("Zipf exponent must be nonnegative")
    w = np.arange(1, F + 1, dtype=float) ** (-float(gamma))
    return Popularity(w / w.sum(), zipf_gamma=float(gamma))


@dataclass(frozen=True, eq=False)
class ConnectivityGraph:
    """Bipartite helper/user graph; the base station (helper 0) is implicit.

    ``adjacency[h-1, u]`` is True when helper ``h`` reaches user ``u``.
    """

    adjacency: np.ndarray

    def __post_init__(self):
        adj = _frozen(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[1] < 1:
            raise ValueError("adjacency must be an H x U matrix with U >= 1")
        object.__setattr__(self, "adjacency", adj)

    @classmethod
    def from_edges(cls, H: int, U: int, edges) -> ConnectivityGraph:
        """Build from ``(h, u)`` pairs with ``h`` in ``1..H`` and ``u`` 0-based."""
        adj = np.zeros((H, U), dtype=bool)
        for h, u in edges:
            if not (1 <= h <= H and 0 <= u < U):
                raise ValueError(f"edge (h={h}, u={u + 1}) out of range")
            adj[h - 1, u] = True
        return cls(adj)

    @property
    def helper_count(self) -> int:
        return self.adjacency.shape[0]

    @property
    def user_count(self) -> int:
        return self.adjacency.shape[1]

    def edges(self) -> list[tuple[int, int]]:
        hs, us = np.nonzero(self.adjacency)
        return [(int(h) + 1, int(u)) for h, u in zip(hs, us)]

    def users_of(self, h: int) -> np.ndarray:
        """Users reached by helper ``h``; helper 0 reaches everyone."""
        if h == 0:
            return np.arange(self.user_count)
        return np.flatnonzero(self.adjacency[h - 1])

    def helpers_of(self, u: int) -> np.ndarray:
        """Helpers (1-based, base station excluded) adjacent to user ``u``."""
        return np.flatnonzero(self.adjacency[:, u]) + 1


@dataclass(frozen=True, eq=False)
class DelayMatrix:
    omega: np.ndarray
    omega_infinity: float

    def __post_init__(self):
        object.__setattr__(self, "omega", _frozen(self.omega))

    @classmethod
    def from_links(cls, graph: ConnectivityGraph, bs_delay, helper_delay) -> DelayMatrix:
        """Fill edges from ``helper_delay`` (an ``(H, U)`` array or scalar).

        Non-edges receive ``omega_infinity = OMEGA_INF_FACTOR * max(bs_delay)``.
        """
        H, U = graph.helper_count, graph.user_count
        bs = np.broadcast_to(np.asarray(bs_delay, dtype=float), (U,))
        hd = np.broadcast_to(np.asarray(helper_delay, dtype=float), (H, U))
        inf = OMEGA_INF_FACTOR * float(bs.max()) if bs.max() > 0 else OMEGA_INF_FACTOR
        omega = np.full((H + 1, U), inf)
        omega[0] = bs
        omega[1:][graph.adjacency] = hd[graph.adjacency]
        return cls(omega, inf)


class HelperOrder(NamedTuple):
    helpers: np.ndarray  # helper indices, base station last
    delays: np.ndarray


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    library: FileLibrary
    popularity: Popularity
    graph: ConnectivityGraph
    delays: DelayMatrix
    cache_size: int
    _orders: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        F = self.library.file_count
        if len(self.popularity) != F:
            raise ValueError(f"popularity has {len(self.popularity)} entries, expected F={F}")
        H, U = self.graph.helper_count, self.graph.user_count
        if self.delays.omega.shape != (H + 1, U):
            raise ValueError(f"omega has shape {self.delays.omega.shape}, expected {(H + 1, U)}")
        if self.cache_size < 0:
            raise ValueError("cache size must be nonnegative")
        if self.cache_size > F:
            warnings.warn(f"cache size {self.cache_size} exceeds F={F}; truncated to {F}",
                          stacklevel=2)
            object.__setattr__(self, "cache_size", F)

    # short names used by the solvers
    @property
    def F(self) -> int:
        return self.library.file_count

    @property
    def H(self) -> int:
        return self.graph.helper_count

    @property
    def U(self) -> int:
        return self.graph.user_count

    @property
    def M(self) -> int:
        return self.cache_size

    @property
    def P(self) -> np.ndarray:
        return self.popularity.probs

    @property
    def omega(self) -> np.ndarray:
        return self.delays.omega

    @property
    def omega_bs(self) -> np.ndarray:
        return self.delays.omega[0]

    @property
    def adjacency(self) -> np.ndarray:
        return self.graph.adjacency

    @cached_property
    def max_degree(self) -> int:
        """``d``: the most helpers (base station excluded) any user sees."""
        return int(self.adjacency.sum(axis=0).max())

    def helper_order(self, u: int) -> HelperOrder:
        return helper_order(self, u)


def helper_order(instance: ProblemInstance, u: int) -> HelperOrder:
    """Neighbors of ``u`` sorted by delay, base station forced last.

    Ties among helpers are broken by ascending helper index.
    """
    cached = instance._orders.get(u)
    if cached is not None:
        return cached
    if not 0 <= u < instance.U:
        raise IndexError(f"user {u + 1} out of range")
    hs = instance.graph.helpers_of(u)
    d = instance.omega[hs, u]
    idx = np.lexsort((hs, d))
    helpers = np.append(hs[idx], 0)
    order = HelperOrder(_frozen(helpers, dtype=int), _frozen(instance.omega[helpers, u]))
    instance._orders[u] = order
    return order


@dataclass(frozen=True, eq=False)
class UncodedPlacement:
    """Binary ``(F, H)`` cache assignment."""

    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(self.x, dtype=bool))

    @classmethod
    def empty(cls, F: int, H: int) -> UncodedPlacement:
        return cls(np.zeros((F, H), dtype=bool))

    def files_at(self, h: int) -> np.ndarray:
        return np.flatnonzero(self.x[:, h - 1])


@dataclass(frozen=True, eq=False)
class CodedPlacement:
    """Fractional ``(F, H)`` assignment of coded parity mass; the base
    station implicitly holds every file in full."""

    rho: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", _frozen(self.rho))


def as_matrix(placement) -> np.ndarray:
    if isinstance(placement, UncodedPlacement):
        return placement.x.astype(float)
    if isinstance(placement, CodedPlacement):
        return placement.rho
    return np.asarray(placement, dtype=float)


def check_placement(instance: ProblemInstance, placement, *, binary: bool) -> np.ndarray:
    """Return the placement as a float matrix or raise InfeasiblePlacementError."""
    R = as_matrix(placement)
    if R.shape != (instance.F, instance.H):
        raise InfeasiblePlacementError(
            f"placement shape {R.shape} does not match (F, H) = {(instance.F, instance.H)}")
    if binary:
        if not np.all((R == 0) | (R == 1)):
            raise InfeasiblePlacementError("uncoded placement must be binary")
        cap_tol = 0.0
    else:
        if np.any(R < 0) or np.any(R > 1) or not np.all(np.isfinite(R)):
            raise InfeasiblePlacementError("coded placement entries must lie in [0, 1]")
        cap_tol = CODED_CAP_TOL
    load = R.sum(axis=0)
    over = np.flatnonzero(load > instance.M + cap_tol)
    if len(over):
        h = int(over[0]) + 1
        raise InfeasiblePlacementError(
            f"helper {h} stores {load[h - 1]:g} > M={instance.M}")
    return R


class Violation(NamedTuple):
    invariant: str
    detail: str


def validate(instance: ProblemInstance) -> list[Violation]:
    """Report every broken instance invariant; never raises."""
    out = []
    P = instance.P
    if np.any(P < 0):
        bad = np.flatnonzero(P < 0) + 1
        out.append(Violation("popularity nonnegativity", f"files {bad.tolist()}"))
    if abs(P.sum() - 1.0) > POPULARITY_TOL:
        out.append(Violation("popularity normalization", f"sum is {float(P.sum())!r}"))
    if instance.popularity.zipf_gamma is not None and np.any(np.diff(P) > 0):
        out.append(Violation("zipf monotonicity", "probabilities increase with rank"))

    omega = instance.omega
    if np.any(omega < 0) or not np.all(np.isfinite(omega)):
        out.append(Violation("delay nonnegativity", "omega has negative or non-finite entries"))
    adj = instance.adjacency
    bs = omega[0]
    hs, us = np.nonzero(adj & (omega[1:] > bs[None, :]))
    for h, u in zip(hs, us):
        out.append(Violation("BS delay dominance",
                             f"omega[{h + 1},{u + 1}]={float(omega[h + 1, u])!r} > omega[0,{u + 1}]={float(bs[u])!r}"))
    inf = instance.delays.omega_infinity
    if not inf > bs.max():
        out.append(Violation("omega_infinity sentinel",
                             f"omega_infinity={inf!r} not above max BS delay {float(bs.max())!r}"))
    hs, us = np.nonzero(~adj & (omega[1:] != inf))
    for h, u in zip(hs, us):
        out.append(Violation("non-edge delay",
                             f"omega[{h + 1},{u + 1}]={float(omega[h + 1, u])!r} on a non-edge"))
    if instance.M > instance.F:
        out.append(Violation("cache size", f"M={instance.M} > F={instance.F}"))
    return out
