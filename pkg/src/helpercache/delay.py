"""Objective functions for uncoded and coded placements.

Uncoded quantities are expressed in the *savings* form (maximized), coded
quantities in the *delay* form (minimized); for a binary placement the two
add up to ``sum_u omega[0, u]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ProblemInstance, check_placement, helper_order

#: cumulative coded mass at or above ``1 - REACH_TOL`` counts as a full file
REACH_TOL = 1e-9


class NotSpecialCaseError(ValueError):
    """The instance does not have a single uniform helper-link delay."""


# -- uncoded ---------------------------------------------------------------

def source_delays(instance: ProblemInstance, X) -> np.ndarray:
    """``(F, U)`` matrix of the per-bit delay at which each user gets each file.

    The first helper along the user's delay order that caches the file
    serves it; the base station serves whatever no neighbor caches.
    """
    X = check_placement(instance, X, binary=True).astype(bool)
    omega, adj = instance.omega, instance.adjacency
    best = np.full((instance.F, instance.U), np.inf)
    for h in range(1, instance.H + 1):
        if not X[:, h - 1].any():
            continue
        hit = X[:, h - 1][:, None] & adj[h - 1][None, :]
        best = np.where(hit, np.minimum(best, omega[h][None, :]), best)
    return np.where(np.isinf(best), omega[0][None, :], best)


def uncoded_user_delay(instance: ProblemInstance, X, u: int) -> float:
    """Expected per-bit delay of user ``u`` (first-hit scan along its order)."""
    X = check_placement(instance, X, binary=True).astype(bool)
    order = helper_order(instance, u)
    P = instance.P
    remaining = np.ones(instance.F, dtype=bool)
    total = 0.0
    for h, w in zip(order.helpers[:-1], order.delays[:-1]):
        hit = remaining & X[:, h - 1]
        total += w * P[hit].sum()
        remaining &= ~hit
    return float(total + instance.omega_bs[u] * P[remaining].sum())


def uncoded_delays(instance: ProblemInstance, X) -> np.ndarray:
    return instance.P @ source_delays(instance, X)


def uncoded_objective(instance: ProblemInstance, X) -> float:
    """Total savings ``sum_u (omega[0,u] - D_u)`` relative to base-station-only."""
    cur = source_delays(instance, X)
    return float(instance.P @ (instance.omega_bs[None, :] - cur).sum(axis=1))


# -- special case ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpecialCaseInstance:
    """An instance whose helper links all share the delay ``omega1``."""

    base: ProblemInstance
    omega1: float
    wtilde: np.ndarray

    def __post_init__(self):
        base = self.base
        edge_delays = base.omega[1:][base.adjacency]
        if np.any(edge_delays != self.omega1):
            raise NotSpecialCaseError(
                "special case required: helper-link delays are not uniform "
                f"(range {float(edge_delays.min())!r}..{float(edge_delays.max())!r})")
        wtilde = np.array(self.wtilde, dtype=float)
        if not np.array_equal(wtilde, base.omega_bs - self.omega1):
            raise ValueError("wtilde must equal omega[0] - omega1")
        if np.any(wtilde <= 0):
            u = int(np.flatnonzero(wtilde <= 0)[0]) + 1
            raise NotSpecialCaseError(
                f"special case required: base-station delay of user {u} does not exceed omega1")
        wtilde.setflags(write=False)
        object.__setattr__(self, "wtilde", wtilde)

    @property
    def F(self):
        return self.base.F

    @property
    def H(self):
        return self.base.H

    @property
    def U(self):
        return self.base.U

    @property
    def M(self):
        return self.base.M

    @property
    def P(self):
        return self.base.P

    @property
    def adjacency(self):
        return self.base.adjacency

    @property
    def max_degree(self) -> int:
        return self.base.max_degree


def special_case(instance: ProblemInstance) -> SpecialCaseInstance:
    if isinstance(instance, SpecialCaseInstance):
        return instance
    edge_delays = instance.omega[1:][instance.adjacency]
    omega1 = float(edge_delays[0]) if len(edge_delays) else 0.0
    return SpecialCaseInstance(instance, omega1, instance.omega_bs - omega1)


def _weights(sc: SpecialCaseInstance, files=None) -> np.ndarray:
    P = sc.P if files is None else sc.P[files]
    return P[:, None] * sc.wtilde[None, :]


def special_case_value(sc: SpecialCaseInstance, X) -> float:
    """Sum over users of ``wtilde_u`` times the popularity mass of the union
    of the caches the user can reach."""
    sc = special_case(sc)
    X = check_placement(sc.base, X, binary=True)
    covered = (X @ sc.adjacency.astype(float)) > 0
    return float((_weights(sc) * covered).sum())


def special_case_g(sc: SpecialCaseInstance, R, files=None) -> float:
    """Multilinear form ``sum P_f w_u (1 - prod_{h in H(u)} (1 - r_fh))``.

    Defined for fractional ``R`` in ``[0, 1]``. ``files`` restricts the sum
    to a subset of rows, which is all pipage rounding needs to compare two
    candidates differing only in those rows.
    """
    sc = special_case(sc)
    R = np.asarray(R, dtype=float)
    if R.shape != (sc.F, sc.H):
        raise ValueError(f"R has shape {R.shape}, expected {(sc.F, sc.H)}")
    if np.any(R < 0) or np.any(R > 1):
        raise ValueError("entries of R must lie in [0, 1]")
    if files is not None:
        R = R[files]
    miss = np.ones((R.shape[0], sc.U))
    adj = sc.adjacency
    for h in range(sc.H):
        miss *= np.where(adj[h][None, :], 1.0 - R[:, h][:, None], 1.0)
    return float((_weights(sc, files) * (1.0 - miss)).sum())


def coverage_surrogate_L(sc: SpecialCaseInstance, R) -> float:
    """``sum P_f w_u min(1, sum_{h in H(u)} r_fh)``."""
    sc = special_case(sc)
    R = check_placement(sc.base, R, binary=False)
    reach = R @ sc.adjacency.astype(float)
    return float((_weights(sc) * np.minimum(1.0, reach)).sum())


# -- coded -----------------------------------------------------------------

def _stage_delays(order, rho_sorted: np.ndarray) -> np.ndarray:
    """All candidate delays ``D^{f,j}`` for ``j = 1..k`` as an ``(F, k)`` array.

    ``D^{f,j} = w_j (1 - S_{j-1}) + C_{j-1}`` with ``S``/``C`` the running
    sums of ``rho`` and ``rho * w`` over the ``j-1`` fastest helpers.
    """
    w = order.delays
    F = rho_sorted.shape[0]
    S = np.zeros((F, len(w)))
    C = np.zeros((F, len(w)))
    S[:, 1:] = np.cumsum(rho_sorted, axis=1)
    C[:, 1:] = np.cumsum(rho_sorted * w[None, :-1], axis=1)
    return w[None, :] * (1.0 - S) + C


def _sorted_rho(R: np.ndarray, order) -> np.ndarray:
    return R[:, order.helpers[:-1] - 1]


def coded_user_file_delay(instance: ProblemInstance, R, u: int, f: int) -> float:
    """Per-bit delay of user ``u`` for file ``f``: max over stages ``j``."""
    R = check_placement(instance, R, binary=False)
    order = helper_order(instance, u)
    return float(_stage_delays(order, _sorted_rho(R[f:f + 1], order)).max())


def coded_user_file_delay_piecewise(instance: ProblemInstance, R, u: int, f: int) -> float:
    """Same quantity via the piecewise definition: the first stage whose
    cumulative mass reaches one, with the base station covering the rest."""
    R = check_placement(instance, R, binary=False)
    order = helper_order(instance, u)
    w = order.delays
    rho = R[f, order.helpers[:-1] - 1]
    j = len(w) - 1
    cum = 0.0
    for i, r in enumerate(rho):
        cum += r
        if cum >= 1.0 - REACH_TOL:
            j = i
            break
    return float(w[j] - sum(rho[i] * (w[j] - w[i]) for i in range(j)))


def coded_file_delays(instance: ProblemInstance, R) -> np.ndarray:
    """``(F, U)`` matrix of coded per-bit delays."""
    R = check_placement(instance, R, binary=False)
    out = np.empty((instance.F, instance.U))
    for u in range(instance.U):
        order = helper_order(instance, u)
        out[:, u] = _stage_delays(order, _sorted_rho(R, order)).max(axis=1)
    return out


def coded_delays(instance: ProblemInstance, R) -> np.ndarray:
    return instance.P @ coded_file_delays(instance, R)


def coded_objective(instance: ProblemInstance, R) -> float:
    """Total expected per-bit delay ``sum_u sum_f P_f D_u^f`` (minimized)."""
    return float(coded_delays(instance, R).sum())
