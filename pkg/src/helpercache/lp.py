"""Linear programs: container, solvers, and the two placement LPs.

Two backends are registered. ``"simplex"`` is a dense two-phase tableau
method with Bland's rule, meant for the small instances used by tests and
oracles. ``"highs"`` hands the same program to SciPy's HiGHS and is used at
experiment scale. Further backends can be added with :func:`register_backend`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .delay import SpecialCaseInstance, coded_objective, special_case
from .model import CodedPlacement, ProblemInstance, helper_order

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
BOUND_TOL = 1e-9
SNAP_TOL = 1e-9

OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"


class LPSolveError(RuntimeError):
    def __init__(self, status: str, message: str = ""):
        super().__init__(f"LP {status}" + (f": {message}" if message else ""))
        self.status = status


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``sense`` c.x subject to row constraints and box bounds.

    ``row_sense`` holds ``"<="``, ``">="`` or ``"=="`` per row.
    ``blocks`` maps a variable-group name to ``(offset, shape)`` so callers
    can pull named matrices out of a solution.
    """

    sense: str
    c: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    A: sp.csr_matrix
    row_sense: np.ndarray
    rhs: np.ndarray
    blocks: dict

    def __post_init__(self):
        if self.sense not in ("max", "min"):
            raise ValueError("sense must be 'max' or 'min'")
        n = len(self.c)
        if self.A.shape[1] != n or len(self.lower) != n or len(self.upper) != n:
            raise ValueError("inconsistent LP dimensions")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A.data))
                and np.all(np.isfinite(self.rhs))):
            raise ValueError("LP coefficients must be finite")
        if np.any(self.lower > self.upper):
            raise ValueError("variable with lower bound above upper bound")

    @classmethod
    def from_dense(cls, sense, c, A, row_sense, rhs, lower=0.0, upper=np.inf
                   ) -> LinearProgram:
        """Convenience constructor for small hand-written programs."""
        c = np.asarray(c, dtype=float)
        n = len(c)
        A = sp.csr_matrix(np.asarray(A, dtype=float).reshape(-1, n))
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        senses = np.empty(len(rhs), dtype=object)
        senses[:] = [row_sense] * len(rhs) if isinstance(row_sense, str) else list(row_sense)
        return cls(sense, c, np.broadcast_to(np.asarray(lower, dtype=float), (n,)).copy(),
                   np.broadcast_to(np.asarray(upper, dtype=float), (n,)).copy(), A, senses,
                   rhs, {})

    @property
    def num_vars(self) -> int:
        return len(self.c)

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    def var_name(self, i: int) -> str:
        for name, (off, shape) in self.blocks.items():
            size = int(np.prod(shape))
            if off <= i < off + size:
                idx = np.unravel_index(i - off, shape)
                return name + "".join(f"_{k + 1}" for k in idx)
        return f"x{i + 1}"


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    objective: float = float("nan")
    iterations: int = 0

    def block(self, lp: LinearProgram, name: str) -> np.ndarray:
        off, shape = lp.blocks[name]
        return self.x[off:off + int(np.prod(shape))].reshape(shape)


class _Builder:
    def __init__(self):
        self.blocks = {}
        self.n = 0
        self.lo, self.hi = [], []
        self.rows, self.cols, self.vals = [], [], []
        self.senses, self.rhs = [], []
        self.m = 0

    def add_vars(self, name, shape, lo, hi) -> np.ndarray:
        size = int(np.prod(shape))
        self.blocks[name] = (self.n, tuple(shape))
        self.lo.append(np.full(size, lo, dtype=float))
        self.hi.append(np.full(size, hi, dtype=float))
        idx = np.arange(self.n, self.n + size).reshape(shape)
        self.n += size
        return idx

    def add_rows(self, row_ids, cols, vals, sense, rhs):
        """``row_ids`` are local (0..k-1); ``rhs`` has length k."""
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        self.rows.append(np.asarray(row_ids) + self.m)
        self.cols.append(np.asarray(cols))
        self.vals.append(np.asarray(vals, dtype=float))
        self.senses.append(np.full(len(rhs), sense))
        self.rhs.append(rhs)
        self.m += len(rhs)

    def build(self, sense, c) -> LinearProgram:
        cat = (lambda parts, dt=float: np.concatenate(parts).astype(dt)
               if parts else np.zeros(0, dtype=dt))
        A = sp.csr_matrix((cat(self.vals), (cat(self.rows, int), cat(self.cols, int))),
                          shape=(self.m, self.n))
        A.sum_duplicates()
        return LinearProgram(sense, np.asarray(c, dtype=float), cat(self.lo), cat(self.hi), A,
                             cat(self.senses, object), cat(self.rhs), self.blocks)


# -- solvers ---------------------------------------------------------------

_BACKENDS: dict[str, Callable[[LinearProgram], LpSolution]] = {}


def register_backend(name: str, solver: Callable[[LinearProgram], LpSolution]):
    _BACKENDS[name] = solver


def solve_lp(lp: LinearProgram, backend: str = "simplex") -> LpSolution:
    """Solve ``lp``; an ``optimal`` result is always certified feasible."""
    try:
        solver = _BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown LP backend {backend!r}; have {sorted(_BACKENDS)}") from None
    sol = solver(lp)
    if sol.status == OPTIMAL:
        _certify(lp, sol)
    return sol


def _certify(lp: LinearProgram, sol: LpSolution):
    x = sol.x
    if np.any(x < lp.lower - BOUND_TOL) or np.any(x > lp.upper + BOUND_TOL):
        raise LPSolveError("error", "solution violates variable bounds")
    sol.x = x = np.clip(x, lp.lower, lp.upper)
    ax = lp.A @ x
    scale = 1.0 + np.abs(lp.rhs)
    viol = np.where(lp.row_sense == "<=", ax - lp.rhs,
                    np.where(lp.row_sense == ">=", lp.rhs - ax, np.abs(ax - lp.rhs)))
    if np.any(viol > FEAS_TOL * scale):
        i = int(np.argmax(viol / scale))
        raise LPSolveError("error", f"row {i + 1} violated by {viol[i]:.3g}")
    sol.objective = float(lp.c @ x)


def _standard_form(lp: LinearProgram):
    """Rewrite as ``min c'y, Ay = b, y >= 0, b >= 0``.

    Returns the pieces plus a map back to the original variables
    ``x = shift + T y``.
    """
    n = lp.num_vars
    A0 = lp.A.toarray()
    cols, T_cols, extra_rows = [], [], []
    shift = np.zeros(n)
    # columns of the y-space, each expressed as a multiple of one original var
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ny = len(cols)
    T = np.zeros((n, ny))
    for k, (j, s) in enumerate(cols):
        T[j, k] = s

    Ay = A0 @ T
    b = lp.rhs - A0 @ shift
    senses = list(lp.row_sense)
    if extra_rows:
        E = np.zeros((len(extra_rows), ny))
        for r, (k, cap) in enumerate(extra_rows):
            E[r, k] = 1.0
        Ay = np.vstack([Ay, E])
        b = np.concatenate([b, [cap for _, cap in extra_rows]])
        senses += ["<="] * len(extra_rows)

    m = len(b)
    n_slack = sum(s != "==" for s in senses)
    S = np.zeros((m, n_slack))
    k = 0
    slack_of_row = np.full(m, -1)
    for i, s in enumerate(senses):
        if s == "<=":
            S[i, k] = 1.0
        elif s == ">=":
            S[i, k] = -1.0
        else:
            continue
        slack_of_row[i] = ny + k
        k += 1
    A = np.hstack([Ay, S])
    neg = b < 0
    A[neg] *= -1
    b = np.where(neg, -b, b)

    c = (T.T @ lp.c) * (-1.0 if lp.sense == "max" else 1.0)
    c = np.concatenate([c, np.zeros(n_slack)])
    const = float(lp.c @ shift)
    return A, b, c, slack_of_row, T, shift, const


def _pivot(tab: np.ndarray, basis: np.ndarray, r: int, q: int):
    tab[r] /= tab[r, q]
    col = tab[:, q].copy()
    col[r] = 0.0
    tab -= np.outer(col, tab[r])
    basis[r] = q


def _bland(tab, basis, ncols, max_iter):
    """Run simplex iterations on ``tab`` (last row = reduced costs)."""
    it = 0
    while True:
        red = tab[-1, :ncols]
        entering = np.flatnonzero(red < -OPT_TOL)
        if len(entering) == 0:
            return OPTIMAL, it
        q = int(entering[0])
        colq = tab[:-1, q]
        pos = np.flatnonzero(colq > OPT_TOL)
        if len(pos) == 0:
            return UNBOUNDED, it
        ratios = tab[pos, -1] / colq[pos]
        best = ratios.min()
        tied = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(tied[np.argmin(basis[tied])])
        _pivot(tab, basis, r, q)
        it += 1
        if it > max_iter:
            raise LPSolveError("error", "simplex iteration limit reached")


def _simplex(lp: LinearProgram, max_iter: int = 200_000) -> LpSolution:
    A, b, c, slack_of_row, T, shift, const = _standard_form(lp)
    m, n = A.shape
    basis = np.empty(m, dtype=int)
    art_rows = []
    for i in range(m):
        s = slack_of_row[i]
        if s >= 0 and A[i, s] == 1.0:
            basis[i] = s
        else:
            art_rows.append(i)
    na = len(art_rows)
    tab = np.zeros((m + 1, n + na + 1))
    tab[:m, :n] = A
    tab[:m, -1] = b
    for k, i in enumerate(art_rows):
        tab[i, n + k] = 1.0
        basis[i] = n + k
    iters = 0
    if na:
        tab[-1, n:n + na] = 1.0
        for i in art_rows:
            tab[-1] -= tab[i]
        status, iters = _bland(tab, basis, n + na, max_iter)
        if -tab[-1, -1] > FEAS_TOL * (1.0 + np.abs(b).max()):
            return LpSolution(INFEASIBLE, iterations=iters)
        # drive remaining artificials out of the basis, dropping redundant rows
        keep = np.ones(m + 1, dtype=bool)
        for i in range(m):
            if basis[i] >= n:
                nz = np.flatnonzero(np.abs(tab[i, :n]) > 1e-9)
                if len(nz):
                    _pivot(tab, basis, i, int(nz[0]))
                else:
                    keep[i] = False
        tab = tab[keep][:, list(range(n)) + [n + na]]
        basis = basis[keep[:-1]]
        m = len(basis)
    tab[-1] = 0.0
    tab[-1, :n] = c
    for i in range(m):
        tab[-1] -= c[basis[i]] * tab[i]
    status, it2 = _bland(tab, basis, n, max_iter)
    iters += it2
    if status != OPTIMAL:
        return LpSolution(status, iterations=iters)
    y = np.zeros(n)
    y[basis] = tab[:m, -1]
    x = shift + T @ y[:T.shape[1]]
    return LpSolution(OPTIMAL, x, float(lp.c @ x), iters)


def _highs(lp: LinearProgram) -> LpSolution:
    from scipy.optimize import linprog

    A = lp.A
    ub = lp.row_sense == "<="
    lb = lp.row_sense == ">="
    eq = lp.row_sense == "=="
    A_ub = sp.vstack([A[ub], -A[lb]]).tocsr()
    b_ub = np.concatenate([lp.rhs[ub], -lp.rhs[lb]])
    c = -lp.c if lp.sense == "max" else lp.c
    bounds = np.column_stack([np.where(np.isfinite(lp.lower), lp.lower, None),
                              np.where(np.isfinite(lp.upper), lp.upper, None)])
    res = linprog(c, A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if len(b_ub) else None,
                  A_eq=A[eq] if eq.any() else None, b_eq=lp.rhs[eq] if eq.any() else None,
                  bounds=bounds, method="highs")
    status = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status)
    if status is None:
        raise LPSolveError("error", res.message)
    if status != OPTIMAL:
        return LpSolution(status)
    return LpSolution(OPTIMAL, np.asarray(res.x), float(lp.c @ res.x), int(res.nit))


register_backend("simplex", _simplex)
register_backend("highs", _highs)


def write_lp(lp: LinearProgram, stream):
    """Write the program in CPLEX LP text format (12 significant digits)."""
    name = lp.var_name
    fmt = "{:.12g}".format

    def expr(cols, vals):
        parts = []
        for j, v in zip(cols, vals):
            parts.append(f"{'-' if v < 0 else '+'} {fmt(abs(v))} {name(j)}")
        return " ".join(parts) if parts else "0 " + name(0)

    stream.write("Maximize\n" if lp.sense == "max" else "Minimize\n")
    nz = np.flatnonzero(lp.c)
    stream.write(f" obj: {expr(nz, lp.c[nz])}\n")
    stream.write("Subject To\n")
    ops = {"<=": "<=", ">=": ">=", "==": "="}
    for i in range(lp.num_rows):
        lo, hi = lp.A.indptr[i], lp.A.indptr[i + 1]
        stream.write(f" r{i + 1}: {expr(lp.A.indices[lo:hi], lp.A.data[lo:hi])} "
                     f"{ops[lp.row_sense[i]]} {fmt(lp.rhs[i])}\n")
    stream.write("Bounds\n")
    for j in range(lp.num_vars):
        lo, hi = lp.lower[j], lp.upper[j]
        lo_s = fmt(lo) if np.isfinite(lo) else "-inf"
        hi_s = fmt(hi) if np.isfinite(hi) else "+inf"
        stream.write(f" {lo_s} <= {name(j)} <= {hi_s}\n")
    stream.write("End\n")


# -- placement LPs ---------------------------------------------------------

def build_coverage_lp(sc: SpecialCaseInstance) -> LinearProgram:
    """Fractional coverage relaxation for uniform-delay instances.

    Variables ``rho[f, h]`` and ``t[f, u]`` in ``[0, 1]``; maximize
    ``sum P_f w_u t[f, u]`` with ``t[f, u] <= sum_{h in H(u)} rho[f, h]``
    and at most ``M`` units of mass per helper.
    """
    sc = special_case(sc)
    F, H, U = sc.F, sc.H, sc.U
    b = _Builder()
    rho = b.add_vars("rho", (F, H), 0.0, 1.0)
    t = b.add_vars("t", (F, U), 0.0, 1.0)

    # t[f,u] - sum_{h in H(u)} rho[f,h] <= 0, one row per (f, u)
    hs, us = np.nonzero(sc.adjacency)
    f_idx = np.arange(F)
    row_t = (f_idx[:, None] * U + np.arange(U)[None, :]).ravel()
    rows = [row_t, (f_idx[:, None] * U + us[None, :]).ravel()]
    cols = [t.ravel(), rho[:, hs].ravel()]
    vals = [np.ones(F * U), -np.ones(F * len(hs))]
    b.add_rows(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
               "<=", np.zeros(F * U))
    _capacity_rows(b, rho, sc.M)

    c = np.zeros(b.n)
    c[t.ravel()] = (sc.P[:, None] * sc.wtilde[None, :]).ravel()
    return b.build("max", c)


def _capacity_rows(b: _Builder, rho: np.ndarray, M: int):
    F, H = rho.shape
    b.add_rows(np.tile(np.arange(H), F), rho.ravel(), np.ones(F * H), "<=", np.full(H, float(M)))


def user_classes(instance: ProblemInstance) -> tuple[list[int], np.ndarray]:
    """Group users with identical delay orders.

    Returns representative users (first of each class) and class sizes.
    Users in one class have the same coded delay for any placement.
    """
    seen: dict = {}
    reps, counts = [], []
    for u in range(instance.U):
        order = helper_order(instance, u)
        key = (order.helpers.tobytes(), order.delays.tobytes())
        k = seen.get(key)
        if k is None:
            seen[key] = len(reps)
            reps.append(u)
            counts.append(1)
        else:
            counts[k] += 1
    return reps, np.array(counts, dtype=float)


def build_coded_lp(instance: ProblemInstance, *, aggregate: bool = False,
                   delay_unit: float = 1.0) -> LinearProgram:
    """Epigraph LP of the coded placement problem.

    Variables ``rho[f, h]`` in ``[0, 1]`` and ``z[u, f] >= 0``; minimize
    ``sum_{u,f} P_f z[u, f]`` with ``z[u, f]`` above every stage delay
    ``w_j - sum_{i<j} rho[f, (i)] (w_j - w_i)``.

    ``aggregate`` merges users with identical delay orders into one weighted
    ``z`` row (same optimum, far fewer rows). Delays are divided by
    ``delay_unit`` so that callers can keep coefficients near one.
    """
    F, H = instance.F, instance.H
    if aggregate:
        users, weight = user_classes(instance)
    else:
        users, weight = list(range(instance.U)), np.ones(instance.U)
    G = len(users)
    b = _Builder()
    rho = b.add_vars("rho", (F, H), 0.0, 1.0)
    z = b.add_vars("z", (G, F), 0.0, np.inf)

    rows, cols, vals, rhs = [], [], [], []
    nrow = 0
    f_idx = np.arange(F)
    for g, u in enumerate(users):
        order = helper_order(instance, u)
        w = order.delays / delay_unit
        hs = order.helpers[:-1]
        for j in range(len(w)):
            r = nrow + f_idx
            rows.append(r)
            cols.append(z[g])
            vals.append(np.ones(F))
            for i in range(j):
                coef = w[j] - w[i]
                if coef != 0.0:
                    rows.append(r)
                    cols.append(rho[:, hs[i] - 1])
                    vals.append(np.full(F, coef))
            rhs.append(np.full(F, w[j]))
            nrow += F
    b.add_rows(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
               ">=", np.concatenate(rhs))
    _capacity_rows(b, rho, instance.M)

    c = np.zeros(b.n)
    c[z.ravel()] = (weight[:, None] * instance.P[None, :]).ravel()
    return b.build("min", c)


def snap(R: np.ndarray, tol: float = SNAP_TOL) -> np.ndarray:
    R = np.clip(np.asarray(R, dtype=float), 0.0, 1.0)
    R = np.where(R < tol, 0.0, R)
    return np.where(R > 1.0 - tol, 1.0, R)


def solve_coded(instance: ProblemInstance, *, backend: str = "simplex",
                aggregate: bool = True) -> tuple[CodedPlacement, float]:
    """Optimal coded placement and its total expected per-bit delay.

    The LP value is checked against a direct evaluation of the placement.
    """
    unit = float(instance.omega_bs.max()) or 1.0
    lp = build_coded_lp(instance, aggregate=aggregate, delay_unit=unit)
    sol = solve_lp(lp, backend)
    if sol.status != OPTIMAL:
        raise LPSolveError(sol.status)
    rho = snap(sol.block(lp, "rho"))
    value = coded_objective(instance, rho)
    if abs(value / unit - sol.objective) > 1e-6 * max(1.0, abs(sol.objective)):
        raise LPSolveError("error", f"LP value {sol.objective * unit!r} disagrees with "
                                    f"evaluated delay {value!r}")
    return CodedPlacement(rho), value
