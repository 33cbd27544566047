"""Greedy maximization of the uncoded savings over the partition matroid.

The ground set holds one element per (file, helper) pair; a placement is
independent when each helper holds at most ``M`` files. Adding the element
with the largest marginal savings at every step gives at least half of the
optimum. The lazy variant keeps stale marginals in a heap as upper bounds
and produces exactly the same sequence of picks as the full scan.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .delay import source_delays
from .model import ProblemInstance, UncodedPlacement, check_placement


class GroundElement(NamedTuple):
    file: int    # 0-based
    helper: int  # 1..H


class GreedyStep(NamedTuple):
    element: GroundElement
    marginal: float
    objective: float


@dataclass
class GreedyTrace:
    steps: list[GreedyStep] = field(default_factory=list)
    evaluations: int = 0
    placement: UncodedPlacement | None = None

    @property
    def objective(self) -> float:
        return self.steps[-1].objective if self.steps else 0.0

    def to_rows(self) -> list[dict]:
        return [{"step": i + 1, "file": s.element.file + 1, "helper": s.element.helper,
                 "marginal": s.marginal, "objective": s.objective}
                for i, s in enumerate(self.steps)]


def is_independent(instance: ProblemInstance, X) -> bool:
    """Partition-matroid membership: at most ``M`` files per helper."""
    X = np.asarray(getattr(X, "x", X), dtype=bool)
    return bool(np.all(X.sum(axis=0) <= instance.M))


class _State:
    """Current source delays plus per-helper neighborhoods."""

    def __init__(self, instance: ProblemInstance, X=None):
        self.instance = instance
        self.P = instance.P
        if X is None:
            self.x = np.zeros((instance.F, instance.H), dtype=bool)
            self.cur = np.repeat(instance.omega_bs[None, :], instance.F, axis=0)
        else:
            self.x = check_placement(instance, X, binary=True).astype(bool)
            self.cur = source_delays(instance, self.x)
        self.load = self.x.sum(axis=0)
        self.users = [instance.graph.users_of(h) for h in range(1, instance.H + 1)]
        self.w = [instance.omega[h, self.users[h - 1]] for h in range(1, instance.H + 1)]
        self.evaluations = 0

    def marginal(self, f: int, h: int) -> float:
        self.evaluations += 1
        us = self.users[h - 1]
        if len(us) == 0:
            return 0.0
        gain = np.maximum(self.cur[f, us] - self.w[h - 1], 0.0).sum()
        return float(self.P[f] * gain)

    def add(self, f: int, h: int):
        us = self.users[h - 1]
        self.cur[f, us] = np.minimum(self.cur[f, us], self.w[h - 1])
        self.x[f, h - 1] = True
        self.load[h - 1] += 1


def marginal_value(instance: ProblemInstance, X, f: int, h: int) -> float:
    """Savings gained by adding file ``f`` to helper ``h`` on top of ``X``."""
    state = _State(instance, X)
    if state.x[f, h - 1]:
        raise ValueError(f"file {f + 1} is already cached at helper {h}")
    if state.load[h - 1] >= instance.M:
        raise ValueError(f"helper {h} is full (M={instance.M})")
    return state.marginal(f, h)


def greedy_place(instance: ProblemInstance, *, lazy: bool = True
                 ) -> tuple[UncodedPlacement, GreedyTrace]:
    """Greedy placement; ties go to the lowest file index, then helper index.

    Stops when every cache is full or the best marginal is not positive.
    """
    state = _State(instance)
    trace = GreedyTrace()
    pick = _lazy_picks if lazy else _naive_picks
    objective = 0.0
    for f, h, gain in pick(state):
        state.add(f, h)
        objective += gain
        trace.steps.append(GreedyStep(GroundElement(f, h), gain, objective))
    trace.evaluations = state.evaluations
    trace.placement = UncodedPlacement(state.x)
    return trace.placement, trace


def _naive_picks(state: _State):
    inst = state.instance
    for _ in range(inst.M * inst.H):
        best, arg = 0.0, None
        for f in range(inst.F):
            for h in range(1, inst.H + 1):
                if state.x[f, h - 1] or state.load[h - 1] >= inst.M:
                    continue
                g = state.marginal(f, h)
                if g > best:
                    best, arg = g, (f, h)
        if arg is None:
            return
        yield arg[0], arg[1], best


def _lazy_picks(state: _State):
    inst = state.instance
    if inst.M == 0:
        return
    # entries: (-bound, file, helper, number of picks when bound was computed)
    heap = [(-state.marginal(f, h), f, h, 0)
            for f in range(inst.F) for h in range(1, inst.H + 1)]
    heapq.heapify(heap)
    picks = 0
    while heap and picks < inst.M * inst.H:
        neg, f, h, stamp = heapq.heappop(heap)
        if state.load[h - 1] >= inst.M:
            continue
        if stamp == picks:
            if -neg <= 0.0:
                return
            picks += 1
            yield f, h, -neg
        else:
            heapq.heappush(heap, (-state.marginal(f, h), f, h, picks))
