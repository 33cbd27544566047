"""LP relaxation plus pipage rounding for uniform-delay instances.

The coverage LP is solved, then mass is shifted along cycles and paths of
the fractional file/helper edges until every entry is integral. Each shift
moves to whichever endpoint of the feasible segment has the larger
multilinear value, which never loses value because that value is convex
along the segment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .delay import SpecialCaseInstance, special_case, special_case_g
from .lp import LPSolveError, OPTIMAL, build_coverage_lp, snap, solve_lp
from .model import UncodedPlacement

INT_TOL = 1e-9
CAP_TOL = 1e-7


def approximation_ratio(d: int) -> float:
    """``1 - (1 - 1/d)**d``; equals 1 when users see at most one helper."""
    if d <= 1:
        return 1.0
    return 1.0 - (1.0 - 1.0 / d) ** d


class Edge(NamedTuple):
    file: int    # 0-based
    helper: int  # 1..H


def fractional_edges(R: np.ndarray, tol: float = INT_TOL) -> list[Edge]:
    fs, hs = np.nonzero((R > tol) & (R < 1.0 - tol))
    return [Edge(int(f), int(h) + 1) for f, h in zip(fs, hs)]


@dataclass(frozen=True)
class AugmentingStructure:
    kind: str  # "cycle" or "path"
    edges: tuple[Edge, ...]

    @property
    def m1(self) -> tuple[Edge, ...]:
        return self.edges[0::2]

    @property
    def m2(self) -> tuple[Edge, ...]:
        return self.edges[1::2]

    def bounds(self, R: np.ndarray) -> tuple[float, float]:
        """``(eps1, eps2)``: how far the segment extends down and up."""
        x1 = [R[e.file, e.helper - 1] for e in self.m1]
        x2 = [R[e.file, e.helper - 1] for e in self.m2]
        eps1 = min(x1 + [1.0 - v for v in x2])
        eps2 = min(x2 + [1.0 - v for v in x1])
        return eps1, eps2

    def shifted(self, R: np.ndarray, eps: float) -> np.ndarray:
        out = R.copy()
        for e in self.m1:
            out[e.file, e.helper - 1] += eps
        for e in self.m2:
            out[e.file, e.helper - 1] -= eps
        return out


def find_cycle_or_path(edges) -> AugmentingStructure | None:
    """Pick a simple cycle, or failing that a path between two leaves.

    Vertices are ordered files first then helpers, and searches always
    start from and branch to the lowest-ordered vertex.
    """
    edges = [Edge(*e) for e in edges]
    if not edges:
        return None
    adj: dict[tuple, list[tuple]] = {}
    for f, h in edges:
        adj.setdefault((0, f), []).append((1, h))
        adj.setdefault((1, h), []).append((0, f))
    for v in adj:
        adj[v].sort()
    vertices = sorted(adj)

    cycle = _find_cycle(adj, vertices)
    if cycle is not None:
        return AugmentingStructure("cycle", tuple(_edge(a, b) for a, b in cycle))

    start = next(v for v in vertices if len(adj[v]) == 1)
    walk = [start]
    prev = None
    cur = start
    while True:
        nxt = [w for w in adj[cur] if w != prev]
        if not nxt:
            break
        prev, cur = cur, nxt[0]
        walk.append(cur)
    return AugmentingStructure("path", tuple(_edge(a, b) for a, b in zip(walk, walk[1:])))


def _edge(a, b) -> Edge:
    f, h = (a, b) if a[0] == 0 else (b, a)
    return Edge(f[1], h[1])


def _find_cycle(adj, vertices):
    """Iterative DFS; returns the cycle as a list of vertex pairs or None."""
    color: dict = {}
    parent: dict = {}
    for root in vertices:
        if root in color:
            continue
        color[root] = 1
        parent[root] = None
        stack = [(root, iter(adj[root]))]
        while stack:
            v, it = stack[-1]
            for w in it:
                if w == parent[v]:
                    continue
                if color.get(w) == 1:
                    # back edge v -> w closes a cycle along the DFS path
                    path = [v]
                    while path[-1] != w:
                        path.append(parent[path[-1]])
                    path.reverse()  # w ... v
                    return list(zip(path, path[1:] + [path[0]]))
                if w not in color:
                    color[w] = 1
                    parent[w] = v
                    stack.append((w, iter(adj[w])))
                    break
            else:
                color[v] = 2
                stack.pop()
    return None


class PipageStep(NamedTuple):
    kind: str
    length: int
    eps: float
    g_before: float
    g_after: float
    fractional_left: int


def pipage_step(sc: SpecialCaseInstance, R: np.ndarray, alpha: AugmentingStructure
                ) -> np.ndarray:
    """Move ``R`` to the better endpoint of the segment defined by ``alpha``."""
    sc = special_case(sc)
    eps1, eps2 = alpha.bounds(R)
    if alpha.edges and (eps1 <= 0 or eps2 <= 0):
        raise ValueError(f"degenerate augmenting structure (eps1={eps1}, eps2={eps2})")
    files = sorted({e.file for e in alpha.edges})
    up = alpha.shifted(R, eps2)
    down = alpha.shifted(R, -eps1)
    # both candidates differ from R only in `files`, so compare those rows
    if special_case_g(sc, _clip(up), files) >= special_case_g(sc, _clip(down), files):
        out = up
    else:
        out = down
    return _clip(np.where(np.abs(out) < INT_TOL, 0.0,
                          np.where(np.abs(out - 1.0) < INT_TOL, 1.0, out)))


def _clip(R):
    return np.clip(R, 0.0, 1.0)


def pipage_round(sc: SpecialCaseInstance, R, *, trace: list | None = None
                 ) -> UncodedPlacement:
    """Round a feasible fractional placement to an integral one of no lower
    multilinear value. Fails loudly if it needs more than ``F*H`` steps."""
    sc = special_case(sc)
    R = snap(np.asarray(R, dtype=float), INT_TOL)
    if R.shape != (sc.F, sc.H):
        raise ValueError(f"R has shape {R.shape}, expected {(sc.F, sc.H)}")
    R = _repair_capacity(R, sc.M)
    limit = sc.F * sc.H
    steps = 0
    frac = fractional_edges(R)
    g = special_case_g(sc, R) if trace is not None else None
    while frac:
        steps += 1
        if steps > limit:
            raise RuntimeError(f"pipage rounding exceeded {limit} steps")
        alpha = find_cycle_or_path(frac)
        R_next = pipage_step(sc, R, alpha)
        frac_next = fractional_edges(R_next)
        if len(frac_next) >= len(frac):
            raise RuntimeError("pipage step made no progress")
        if np.any(R_next.sum(axis=0) > sc.M + CAP_TOL):
            raise RuntimeError("pipage step broke a cache-size constraint")
        if trace is not None:
            g_next = special_case_g(sc, R_next)
            eps = float(np.max(np.abs(R_next - R)))
            trace.append(PipageStep(alpha.kind, len(alpha.edges), eps, g, g_next,
                                    len(frac_next)))
            g = g_next
        R, frac = R_next, frac_next
    return UncodedPlacement(R > 0.5)


def _repair_capacity(R: np.ndarray, M: int) -> np.ndarray:
    """Remove solver-tolerance excess above ``M`` from each column."""
    load = R.sum(axis=0)
    if np.any(load > M + CAP_TOL):
        h = int(np.argmax(load))
        raise ValueError(f"helper {h + 1} holds {load[h]:g} > M={M}")
    R = R.copy()
    for h in np.flatnonzero(load > M):
        excess = load[h] - M
        for f in np.argsort(R[:, h]):
            take = min(excess, R[f, h])
            R[f, h] -= take
            excess -= take
            if excess <= 0:
                break
    return snap(R, INT_TOL)


def lp_pipage_solve(sc, *, backend: str = "simplex", trace: list | None = None
                    ) -> UncodedPlacement:
    """Coverage LP followed by pipage rounding (uniform-delay instances only)."""
    sc = special_case(sc)
    lp = build_coverage_lp(sc)
    sol = solve_lp(lp, backend)
    if sol.status != OPTIMAL:
        raise LPSolveError(sol.status)
    return pipage_round(sc, sol.block(lp, "rho"), trace=trace)
