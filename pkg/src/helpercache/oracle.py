"""Exhaustive solvers and hardness-reduction instances used as ground truth."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, prod

import numpy as np

from .model import (ConnectivityGraph, DelayMatrix, FileLibrary, Popularity, ProblemInstance,
                    UncodedPlacement, helper_order)

DEFAULT_BUDGET = 10**7
MAX_SOLUTIONS = 16
_CHUNK = 1 << 14


class BudgetExceededError(RuntimeError):
    def __init__(self, size: int, budget: int):
        shown = str(size) if size < 10**15 else f"about 2^{size.bit_length() - 1}"
        super().__init__(f"enumeration size {shown} placements exceeds budget {budget}")
        self.size = size
        self.budget = budget


@dataclass
class ExactResult:
    placements: list[UncodedPlacement]
    value: float
    count: int       # number of optimal placements found (may exceed len(placements))
    enumerated: int  # placements evaluated


def _subset_masks(files: np.ndarray, F: int, M: int) -> np.ndarray:
    """All subsets of ``files`` with at most ``M`` elements, as boolean rows."""
    rows = []
    for k in range(min(M, len(files)) + 1):
        for combo in itertools.combinations(files, k):
            r = np.zeros(F, dtype=bool)
            r[list(combo)] = True
            rows.append(r)
    return np.array(rows)


def enumeration_size(instance: ProblemInstance) -> int:
    f_eff = int(np.count_nonzero(instance.P > 0))
    per_helper = sum(comb(f_eff, k) for k in range(min(instance.M, f_eff) + 1))
    return per_helper ** instance.H


def _batch_savings(instance: ProblemInstance, X: np.ndarray) -> np.ndarray:
    """Savings for a batch ``X`` of shape ``(N, F, H)``."""
    omega, adj = instance.omega, instance.adjacency
    N = X.shape[0]
    best = np.full((N, instance.F, instance.U), np.inf)
    for h in range(instance.H):
        hit = X[:, :, h][:, :, None] & adj[h][None, None, :]
        best = np.where(hit, np.minimum(best, omega[h + 1][None, None, :]), best)
    src = np.where(np.isinf(best), omega[0][None, None, :], best)
    return ((omega[0][None, None, :] - src).sum(axis=2)) @ instance.P


def _enumerate(masks_per_helper, evaluate, budget, maximize=True):
    """Scan the product of per-helper choices in chunks.

    Returns ``(best value, up to MAX_SOLUTIONS optimal matrices, number of
    optimal matrices, number enumerated)``.
    """
    sizes = [len(m) for m in masks_per_helper]
    total = prod(sizes)
    if total > budget:
        raise BudgetExceededError(total, budget)
    sign = 1.0 if maximize else -1.0
    best = -np.inf
    winners: list[np.ndarray] = []
    count = 0
    for start in range(0, total, _CHUNK):
        ids = np.unravel_index(np.arange(start, min(total, start + _CHUNK)), sizes)
        X = np.stack([m[i] for m, i in zip(masks_per_helper, ids)], axis=2)
        score = sign * evaluate(X)
        top = score.max()
        if top > best + 1e-12 * max(1.0, abs(top)):
            best, winners, count = top, [], 0
        hits = np.flatnonzero(score >= best - 1e-12 * max(1.0, abs(best)))
        count += len(hits)
        winners.extend(X[i] for i in hits[:MAX_SOLUTIONS - len(winners)])
    return sign * best, winners, count, total


def exact_uncoded(instance: ProblemInstance, budget: int = DEFAULT_BUDGET) -> ExactResult:
    """Maximum savings over every placement with at most ``M`` files per helper.

    Only files with positive popularity are enumerated; the rest never help.
    """
    files = np.flatnonzero(instance.P > 0)
    size = enumeration_size(instance)
    if size > budget:
        raise BudgetExceededError(size, budget)
    masks = _subset_masks(files, instance.F, instance.M)
    best, winners, count, total = _enumerate(
        [masks] * instance.H, lambda X: _batch_savings(instance, X), budget)
    return ExactResult([UncodedPlacement(w) for w in winners], float(best), count, total)


def _grid_masks(F: int, M: int, step: float) -> np.ndarray:
    levels = np.round(np.arange(0.0, 1.0 + step / 2, step), 12)
    levels = levels[levels <= 1.0]
    rows = [r for r in itertools.product(levels, repeat=F) if sum(r) <= M + 1e-9]
    return np.array(rows, dtype=float)


def _batch_coded(instance: ProblemInstance, R: np.ndarray) -> np.ndarray:
    """Total coded delay for a batch ``R`` of shape ``(N, F, H)``."""
    total = np.zeros(R.shape[0])
    for u in range(instance.U):
        order = helper_order(instance, u)
        w = order.delays
        rho = R[:, :, order.helpers[:-1] - 1]
        S = np.concatenate([np.zeros(rho.shape[:2] + (1,)), np.cumsum(rho, axis=2)], axis=2)
        C = np.concatenate([np.zeros(rho.shape[:2] + (1,)),
                            np.cumsum(rho * w[:-1], axis=2)], axis=2)
        D = (w * (1.0 - S) + C).max(axis=2)
        total += D @ instance.P
    return total


def exact_coded_grid(instance: ProblemInstance, step: float,
                     budget: int = DEFAULT_BUDGET) -> float:
    """Smallest total coded delay over placements on a grid of ``step``."""
    n_levels = int(round(1.0 / step)) + 1
    if n_levels ** instance.F > budget:
        raise BudgetExceededError(n_levels ** (instance.F * instance.H), budget)
    masks = _grid_masks(instance.F, instance.M, step)
    best, _, _, _ = _enumerate([masks] * instance.H, lambda R: _batch_coded(instance, R),
                               budget, maximize=False)
    return float(best)


# -- 2-disjoint set cover --------------------------------------------------

def _check_bipartite(n_a: int, n_b: int, edges) -> list[tuple[int, int]]:
    if n_a < 1 or n_b < 1:
        raise ValueError("both vertex sets must be non-empty")
    out = []
    for a, b in edges:
        if not (0 <= a < n_a and 0 <= b < n_b):
            raise ValueError(f"edge ({a}, {b}) out of range")
        out.append((int(a), int(b)))
    return out


def brute_2dsc(n_a: int, n_b: int, edges) -> bool:
    """Can ``B`` be split into two parts that each cover every vertex of ``A``?

    ``edges`` are ``(a, b)`` pairs with 0-based indices.
    """
    edges = _check_bipartite(n_a, n_b, edges)
    if n_b > 20:
        raise ValueError("brute_2dsc supports |B| <= 20")
    cover = [0] * n_b
    for a, b in edges:
        cover[b] |= 1 << a
    full = (1 << n_a) - 1
    for mask in range(1 << n_b):
        c1 = c2 = 0
        for b in range(n_b):
            if mask >> b & 1:
                c1 |= cover[b]
            else:
                c2 |= cover[b]
        if c1 == full and c2 == full:
            return True
    return False


def build_hlp_from_2dsc(n_a: int, n_b: int, edges, epsilon: float = 0.5
                        ) -> tuple[ProblemInstance, float]:
    """Helper-decision instance whose optimum reaches ``Q = |A|`` exactly
    when the graph admits two disjoint covers.

    Users are ``A``, helpers are ``B``; two files with popularity
    ``(1, epsilon) / (1 + epsilon)``, one cache slot per helper, and unit
    delay gap between base station and helpers.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    edges = _check_bipartite(n_a, n_b, edges)
    graph = ConnectivityGraph.from_edges(n_b, n_a, [(b + 1, a) for a, b in edges])
    delays = DelayMatrix.from_links(graph, bs_delay=2.0, helper_delay=1.0)
    pop = Popularity(np.array([1.0, epsilon]) / (1.0 + epsilon))
    inst = ProblemInstance(FileLibrary(2), pop, graph, delays, cache_size=1)
    return inst, float(n_a)
