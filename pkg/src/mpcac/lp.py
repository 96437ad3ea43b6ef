"""Dense two-phase simplex with Bland's rule and Farkas certificates.

Solves  min c'z  s.t.  A_eq z = b_eq,  A_le z <= b_le,  z_j >= 0 for the
variables marked nonnegative (others free).  Free variables are split into
differences of nonnegative pairs so a single tableau code path suffices.

Every "infeasible" outcome carries a certificate w (one entry per original
row, equalities first) with w_le <= 0, A'w <= 0 on nonnegative variables,
A'w = 0 on free variables, and w'b > eps; it is re-verified by direct
multiplication before being returned.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._backend import SIMPLEX_OPTIMAL, SIMPLEX_UNBOUNDED, kernels

EPS_LP = 1e-9
MAX_PIVOTS = 20000
DEBUG_TABLEAUS = False  # set by the CLI --debug-lp flag; dumps to stderr

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LpInternalError(RuntimeError):
    """A verified-witness contract failed; never returned as a result."""


@dataclass
class LinearProgram:
    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_le: np.ndarray
    b_le: np.ndarray
    nonneg: np.ndarray  # bool per variable; False = free

    @staticmethod
    def build(c, a_eq=None, b_eq=None, a_le=None, b_le=None, nonneg=None):
        c = np.atleast_1d(np.asarray(c, dtype=float))
        nvar = len(c)

        def rows(a, b):
            if a is None:
                return np.zeros((0, nvar)), np.zeros(0)
            a = np.asarray(a, dtype=float).reshape(-1, nvar)
            b = np.atleast_1d(np.asarray(b, dtype=float))
            if a.shape[0] != b.shape[0]:
                raise ValueError("row/rhs count mismatch")
            return a, b

        a_eq, b_eq = rows(a_eq, b_eq)
        a_le, b_le = rows(a_le, b_le)
        if nonneg is None:
            nonneg = np.ones(nvar, dtype=bool)
        else:
            nonneg = np.asarray(nonneg, dtype=bool)
            if nonneg.shape != (nvar,):
                raise ValueError("sign restriction length mismatch")
        for arr in (c, a_eq, b_eq, a_le, b_le):
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite data in linear program")
        return LinearProgram(c, a_eq, b_eq, a_le, b_le, nonneg)


@dataclass
class LpOutcome:
    status: str
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    farkas: Optional[np.ndarray] = None
    pivots: int = 0
    tableau_log: list = field(default_factory=list)


def _verify_farkas(lp: LinearProgram, w: np.ndarray, eps: float) -> bool:
    p = lp.a_eq.shape[0]
    w_eq, w_le = w[:p], w[p:]
    if w_le.size and w_le.max() > eps:
        return False
    q = lp.a_eq.T @ w_eq + lp.a_le.T @ w_le
    if np.any(q[lp.nonneg] > eps):
        return False
    if np.any(np.abs(q[~lp.nonneg]) > eps):
        return False
    return float(w_eq @ lp.b_eq + w_le @ lp.b_le) > eps


def _debug_dump(stage: str, tab: np.ndarray) -> None:
    with np.printoptions(precision=4, suppress=True, linewidth=160):
        print(f"[lp {stage}] tableau {tab.shape[0]}x{tab.shape[1]}:\n{tab}", file=sys.stderr)


def lp_solve(lp: LinearProgram, eps: float = EPS_LP, log_tableaus: bool = False) -> LpOutcome:
    """Two-phase simplex; deterministic via Bland's rule."""
    log_tableaus = log_tableaus or DEBUG_TABLEAUS
    nvar = len(lp.c)
    p, m = lp.a_eq.shape[0], lp.a_le.shape[0]
    nrows = p + m

    if nrows == 0:
        # no constraints: 0 is optimal unless some cost pulls a variable away
        desc_free = np.any((lp.c != 0.0) & ~lp.nonneg)
        desc_nn = np.any((lp.c < 0.0) & lp.nonneg)
        if desc_free or desc_nn:
            return LpOutcome(UNBOUNDED)
        return LpOutcome(OPTIMAL, x=np.zeros(nvar), objective=0.0)

    # column layout: split/nonneg structural columns, then slacks, then artificials
    cols = []  # (var index, sign) in variable order: x+ then x- for free vars
    for j in range(nvar):
        cols.append((j, 1.0))
        if not lp.nonneg[j]:
            cols.append((j, -1.0))
    nstruct = len(cols)

    a = np.vstack([lp.a_eq, lp.a_le])
    b = np.concatenate([lp.b_eq, lp.b_le])
    struct = np.empty((nrows, nstruct))
    for k, (j, s) in enumerate(cols):
        struct[:, k] = s * a[:, j]

    flip = np.where(b < 0.0, -1.0, 1.0)
    # slack columns for <= rows (sign follows any row flip)
    slack = np.zeros((nrows, m))
    for i in range(m):
        slack[p + i, i] = flip[p + i]

    body = np.hstack([struct * flip[:, None], slack])
    rhs = b * flip
    ncols = nstruct + m + nrows  # + artificials

    tab = np.zeros((nrows + 1, ncols + 1))
    tab[:nrows, : nstruct + m] = body
    tab[:nrows, nstruct + m : ncols] = np.eye(nrows)
    tab[:nrows, ncols] = rhs
    # phase-1 objective: min sum of artificials -> reduced costs
    tab[nrows, : nstruct + m] = -body.sum(axis=0)
    tab[nrows, ncols] = -rhs.sum()
    basis = np.arange(nstruct + m, nstruct + m + nrows, dtype=np.int64)

    log: list = []

    def snapshot(stage, t):
        if log_tableaus:
            log.append(t.copy())
        if DEBUG_TABLEAUS:
            _debug_dump(stage, t)

    snapshot("phase1 start", tab)
    rc = kernels.simplex_loop(tab, basis, eps, MAX_PIVOTS)
    if rc != SIMPLEX_OPTIMAL:
        raise LpInternalError("phase-1 simplex did not terminate at an optimum")
    phase1 = -tab[nrows, ncols]
    snapshot("phase1 end", tab)

    if phase1 > eps:
        # infeasible; multipliers from artificial reduced costs: pi_i = 1 - rc_i
        pi = 1.0 - tab[nrows, nstruct + m : ncols]
        w = flip * pi
        w /= max(np.abs(w).max(), 1e-300)
        if not _verify_farkas(lp, w, eps):
            raise LpInternalError("Farkas certificate failed re-verification")
        return LpOutcome(INFEASIBLE, farkas=w, tableau_log=log)

    # drive artificials out of the basis (or drop redundant rows)
    art0 = nstruct + m
    keep = np.ones(nrows, dtype=bool)
    for i in range(nrows):
        if basis[i] >= art0:
            pivot_col = -1
            for j in range(art0):
                if abs(tab[i, j]) > eps:
                    pivot_col = j
                    break
            if pivot_col < 0:
                keep[i] = False
                continue
            piv = tab[i, pivot_col]
            tab[i, :] = tab[i, :] / piv
            for k in range(nrows + 1):
                if k != i:
                    f = tab[k, pivot_col]
                    if f != 0.0:
                        tab[k, :] = tab[k, :] - f * tab[i, :]
            basis[i] = pivot_col

    row_ix = np.nonzero(keep)[0]
    basis2 = basis[keep]
    tab2 = np.zeros((len(row_ix) + 1, art0 + 1))
    tab2[:-1, :art0] = tab[row_ix][:, :art0]
    tab2[:-1, art0] = tab[row_ix][:, ncols]

    # phase-2 reduced costs for the structural objective
    cost = np.zeros(art0)
    for k, (j, s) in enumerate(cols):
        cost[k] = s * lp.c[j]
    tab2[-1, :art0] = cost
    tab2[-1, art0] = 0.0
    for r, bj in enumerate(basis2):
        cb = cost[bj]
        if cb != 0.0:
            tab2[-1, :] = tab2[-1, :] - cb * tab2[r, :]

    snapshot("phase2 start", tab2)
    rc = kernels.simplex_loop(tab2, basis2, eps, MAX_PIVOTS)
    snapshot("phase2 end", tab2)
    if rc == SIMPLEX_UNBOUNDED:
        return LpOutcome(UNBOUNDED, tableau_log=log)
    if rc != SIMPLEX_OPTIMAL:
        raise LpInternalError("phase-2 simplex did not terminate")

    z = np.zeros(nstruct)
    for r, bj in enumerate(basis2):
        if bj < nstruct:
            z[bj] = tab2[r, art0]
    x = np.zeros(nvar)
    for k, (j, s) in enumerate(cols):
        x[j] += s * z[k]

    objective = float(lp.c @ x)
    scale = max(1.0, np.abs(b).max() if b.size else 1.0, np.abs(x).max() if x.size else 1.0)
    if lp.a_eq.size and np.abs(lp.a_eq @ x - lp.b_eq).max() > eps * scale * 100:
        raise LpInternalError("optimal point violates equality rows")
    if lp.a_le.size and (lp.a_le @ x - lp.b_le).max() > eps * scale * 100:
        raise LpInternalError("optimal point violates inequality rows")
    if np.any(x[lp.nonneg] < -eps * scale * 100):
        raise LpInternalError("optimal point violates sign restrictions")
    # weak-duality audit: tableau objective agrees with recomputed c'x
    tableau_obj = -tab2[-1, art0]
    if abs(tableau_obj - objective) > max(1.0, abs(objective)) * 1e-6:
        raise LpInternalError("objective audit failed")
    return LpOutcome(OPTIMAL, x=x, objective=objective, tableau_log=log)


def linear_feasibility(a_eq, b_eq, nonneg) -> LpOutcome:
    """Feasibility of {A z = b, sign restrictions}: lp_solve with c = 0."""
    a_eq = np.asarray(a_eq, dtype=float)
    if a_eq.ndim != 2:
        a_eq = a_eq.reshape(len(np.atleast_1d(b_eq)), -1)
    nvar = a_eq.shape[1]
    if nvar == 0:
        b = np.atleast_1d(np.asarray(b_eq, dtype=float))
        if b.size == 0 or np.abs(b).max() <= EPS_LP:
            return LpOutcome(OPTIMAL, x=np.zeros(0), objective=0.0)
        w = np.sign(b)
        return LpOutcome(INFEASIBLE, farkas=w)
    lp = LinearProgram.build(np.zeros(nvar), a_eq=a_eq, b_eq=b_eq, nonneg=nonneg)
    return lp_solve(lp)
