"""Global desk-scale solver by support enumeration.

Any point with fewer than alpha nonzeros is feasible for some size-alpha
support's reduced problem, so enumerating the C(n, alpha) supports of size
exactly alpha and minimizing each reduced problem covers the optimum.  Each
reduced problem is solved by a safeguarded augmented-Lagrangian loop with a
backtracking gradient-descent inner solver; affine-constrained quadratics
additionally get an exact primal active-set path, which doubles as a
cross-check oracle for the iterative route.  Off-support components are
held at exact (bitwise) zero throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from . import expr as ex
from . import lp as lpmod
from . import model as mo
from .model import PairPoint, Problem

EPS_TIE = 1e-8
KKT_TOL = 1e-6
FEAS_ACCEPT = 1e-6
SUPPORT_BUDGET = 100_000

CONVERGED = "converged"
MAX_OUTER = "max_outer"
INFEASIBLE = "infeasible"
INDEFINITE = "indefinite"


@dataclass
class SupportResult:
    support: tuple
    x: np.ndarray
    objective: float
    residual: float
    violation: float
    status: str
    starts: int
    method: str  # "qp" or "auglag" (+ "qp_fallback")


@dataclass
class SolveReport:
    problem: str
    best_x: Optional[np.ndarray]
    best_objective: Optional[float]
    best_support: Optional[tuple]
    companion: Optional[np.ndarray]
    unique_y: Optional[bool]
    ties: list
    certified: bool
    table: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "format": "mpcac-report-1",
            "problem": self.problem,
            "best_x": None if self.best_x is None else [float(v) for v in self.best_x],
            "best_objective": self.best_objective,
            "best_support": None if self.best_support is None else [int(i) for i in self.best_support],
            "companion_y": None if self.companion is None else [float(v) for v in self.companion],
            "unique_y": self.unique_y,
            "ties": [[int(i) for i in s] for s in self.ties],
            "certified_global": self.certified,
            "table": [
                {
                    "support": [int(i) for i in r.support],
                    "x": [float(v) for v in r.x],
                    "objective": float(r.objective),
                    "residual": float(r.residual),
                    "violation": float(r.violation),
                    "status": r.status,
                    "starts": r.starts,
                    "method": r.method,
                }
                for r in self.table
            ],
        }

    def format_table(self) -> str:
        lines = [
            f"{'support':<14} {'objective':>14} {'residual':>10} "
            f"{'violation':>10} {'status':<10} {'starts':>6}  method"
        ]
        for r in self.table:
            supp = ",".join(str(i) for i in r.support) or "-"
            lines.append(
                f"{supp:<14} {r.objective:>14.8g} {r.residual:>10.2e} "
                f"{r.violation:>10.2e} {r.status:<10} {r.starts:>6}  {r.method}"
            )
        if self.best_support is not None:
            lines.append(
                f"winner: support {{{','.join(str(i) for i in self.best_support)}}}"
                f"  objective {self.best_objective:.10g}"
            )
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# reduced problems

class _Reduced:
    """f, g, h of a problem restricted to a support, tape-batched."""

    def __init__(self, p: Problem, support):
        self.p = p
        self.support = tuple(sorted(support))
        self.k = len(self.support)
        self.cols = np.array([i - 1 for i in self.support], dtype=int)
        exprs = [p.f, *p.g, *p.h]
        self.values = ex.TapeSet(exprs)
        grads = []
        for e in exprs:
            for i in self.support:
                grads.append(e.partial(i))
        self.grads = ex.TapeSet(grads)
        self._vbuf = np.empty(len(exprs))
        self._gbuf = np.empty(len(exprs) * self.k)
        self._x = np.zeros(p.n)

    def embed(self, t: np.ndarray) -> np.ndarray:
        x = np.zeros(self.p.n)
        if self.k:
            x[self.cols] = t
        return x

    def eval(self, t: np.ndarray):
        """(f, g values, h values) at the embedded point."""
        if self.k:
            self._x[self.cols] = t
        v = self.values.eval_into(self._x, self._vbuf)
        m = self.p.m
        return v[0], v[1 : 1 + m], v[1 + m :]

    def eval_grads(self, t: np.ndarray):
        """(grad f, grad g rows, grad h rows) on the support coordinates."""
        rows = 1 + self.p.m + self.p.p
        if self.k == 0:
            g = np.zeros((rows, 0))
        else:
            self._x[self.cols] = t
            g = self.grads.eval_into(self._x, self._gbuf).reshape(rows, self.k)
        m = self.p.m
        return g[0], g[1 : 1 + m], g[1 + m :]


def _kkt_residual(red: _Reduced, t, mu, nu):
    fv, gv, hv = red.eval(t)
    gf, gg, gh = red.eval_grads(t)
    stat = gf.copy()
    if red.p.m:
        stat += mu @ gg
    if red.p.p:
        stat += nu @ gh
    stat_r = float(np.abs(stat).max(initial=0.0))
    feas = 0.0
    if red.p.m:
        feas = max(feas, float(gv.max(initial=0.0)))
    if red.p.p:
        feas = max(feas, float(np.abs(hv).max(initial=0.0)))
    comp = float(np.abs(mu * gv).max(initial=0.0)) if red.p.m else 0.0
    return max(stat_r, feas, comp), feas, fv


def solve_reduced(
    p: Problem,
    support,
    start,
    kkt_tol: float = KKT_TOL,
    max_outer: int = 50,
    max_inner: int = 500,
    rho0: float = 10.0,
    rho_cap: float = 1e40,
    mult_cap: float = 1e12,
):
    """Augmented-Lagrangian minimization on one support.

    Returns (x, residual, status) with x embedded in R^n (off-support
    entries bitwise zero).  Safeguarded outer loop: each constraint keeps
    its own penalty, multiplied by ten whenever that constraint's violation
    measure fails to halve.  Convergence requires the reduced KKT residual
    to reach kkt_tol AND the multiplier update to settle; degenerate rows
    (e.g. x^2 <= 0) push their multiplier to infinity and therefore keep
    grinding toward the feasible limit instead of stopping on a spuriously
    small residual.  Stalled violation above 1e-4 under a large penalty is
    reported as infeasible.
    """
    red = _Reduced(p, support)
    start = np.asarray(start, dtype=float)
    if start.shape == (p.n,):
        if np.any(np.delete(start, red.cols) != 0.0):
            raise ValueError("start must be zero off the support")
        t = start[red.cols].copy()
    else:
        t = start.copy()
    if t.shape != (red.k,):
        raise ValueError("start has the wrong dimension")

    m, prows = p.m, p.p
    mu = np.zeros(m)
    nu = np.zeros(prows)
    rho_g = np.full(m, rho0)
    rho_h = np.full(prows, rho0)

    if red.k == 0:
        res, feas, fv = _kkt_residual(red, t, mu, nu)
        status = CONVERGED if feas <= kkt_tol else INFEASIBLE
        return red.embed(t), res, status

    def aug_value(tv):
        fv, gv, hv = red.eval(tv)
        val = fv
        if prows:
            val += nu @ hv + 0.5 * (rho_h * hv) @ hv
        if m:
            shifted = np.maximum(0.0, mu + rho_g * gv)
            val += 0.5 * float((shifted * shifted - mu * mu) @ (1.0 / rho_g))
        return val

    def aug_grad(tv):
        fv, gv, hv = red.eval(tv)
        gf, gg, gh = red.eval_grads(tv)
        grad = gf.copy()
        if prows:
            grad += (nu + rho_h * hv) @ gh
        if m:
            grad += np.maximum(0.0, mu + rho_g * gv) @ gg
        return grad

    prev_feas = np.inf
    status = MAX_OUTER
    for _ in range(max_outer):
        val = aug_value(t)
        step0 = 1.0
        t_prev = None
        g_prev = None
        stall = 0
        for _ in range(max_inner):
            grad = aug_grad(t)
            gnorm = float(np.abs(grad).max(initial=0.0))
            if gnorm <= 1e-10:
                break
            if t_prev is not None:
                s = t - t_prev
                yv = grad - g_prev
                sy = float(s @ yv)
                if sy > 1e-300:
                    step0 = min(max(float(s @ s) / sy, 1e-20), 1e6)
            step = step0
            gg2 = float(grad @ grad)
            moved = False
            while step > 1e-22:
                cand = t - step * grad
                cval = aug_value(cand)
                if cval <= val - 1e-4 * step * gg2:
                    drop = val - cval
                    t_prev, g_prev = t, grad
                    t, val = cand, cval
                    moved = True
                    break
                step *= 0.5
            if not moved:
                break
            if drop <= 1e-18 * max(1.0, abs(val)):
                stall += 1
                if stall >= 2:
                    break
            else:
                stall = 0

        fv, gv, hv = red.eval(t)
        drift = 0.0
        grow_g = np.zeros(m, dtype=bool)
        grow_h = np.zeros(prows, dtype=bool)
        if m:
            mu_new = np.clip(np.maximum(0.0, mu + rho_g * gv), 0.0, mult_cap)
            change = np.abs(mu_new - mu)
            grow_g = change > kkt_tol * np.maximum(1.0, np.abs(mu_new))
            drift = float(change.max(initial=0.0))
            mu = mu_new
        if prows:
            nu_new = np.clip(nu + rho_h * hv, -mult_cap, mult_cap)
            change = np.abs(nu_new - nu)
            grow_h = change > kkt_tol * np.maximum(1.0, np.abs(nu_new))
            drift = max(drift, float(change.max(initial=0.0)))
            nu = nu_new
        res, feas, _ = _kkt_residual(red, t, mu, nu)
        settled = drift <= kkt_tol * max(
            1.0,
            float(np.abs(mu).max(initial=0.0)),
            float(np.abs(nu).max(initial=0.0)),
        )
        if res <= kkt_tol and settled:
            status = CONVERGED
            break
        if max(rho_g.max(initial=0.0), rho_h.max(initial=0.0)) >= 1e8 and (
            feas > 1e-4 and feas > 0.9 * prev_feas
        ):
            status = INFEASIBLE
            break
        prev_feas = feas
        # a settled multiplier means its constraint behaves; only rows whose
        # estimate is still moving get a stiffer penalty
        if m:
            rho_g = np.minimum(np.where(grow_g, rho_g * 10.0, rho_g), rho_cap)
        if prows:
            rho_h = np.minimum(np.where(grow_h, rho_h * 10.0, rho_h), rho_cap)

    res, feas, fv = _kkt_residual(red, t, mu, nu)
    return red.embed(t), res, status


# ---------------------------------------------------------------------------
# exact path for affine-constrained quadratics

def is_affine_quadratic(p: Problem) -> bool:
    return p.f.degree() <= 2 and p.x_affine()


def _quadratic_data(p: Problem, red: _Reduced):
    k = red.k
    g0 = red.eval_grads(np.zeros(k))
    c = g0[0].copy()
    q = np.zeros((k, k))
    for j in range(k):
        e = np.zeros(k)
        e[j] = 1.0
        q[:, j] = red.eval_grads(e)[0] - c
    q = 0.5 * (q + q.T)
    fv, gv, hv = red.eval(np.zeros(k))
    a_le = g0[1].reshape(p.m, k) if p.m else np.zeros((0, k))
    b_le = -gv if p.m else np.zeros(0)
    a_eq = g0[2].reshape(p.p, k) if p.p else np.zeros((0, k))
    b_eq = -hv if p.p else np.zeros(0)

    # constraints not touching the support reduce to constants
    feasible = True
    if a_le.size or b_le.size:
        zero = np.abs(a_le).max(axis=1, initial=0.0) <= 1e-14 if k else np.ones(p.m, dtype=bool)
        if np.any(b_le[zero] < -1e-9):
            feasible = False
        a_le, b_le = a_le[~zero], b_le[~zero]
    if a_eq.size or b_eq.size:
        zero = np.abs(a_eq).max(axis=1, initial=0.0) <= 1e-14 if k else np.ones(p.p, dtype=bool)
        if np.any(np.abs(b_eq[zero]) > 1e-9):
            feasible = False
        a_eq, b_eq = a_eq[~zero], b_eq[~zero]
    return q, c, float(fv), a_eq, b_eq, a_le, b_le, feasible


def solve_qp_affine(p: Problem, support, tol: float = 1e-10):
    """Primal active-set method on the reduced KKT systems; exact to
    linear-solve accuracy.  Falls back (status "indefinite") when the
    reduced Hessian is not positive semidefinite on the working nullspace."""
    if not is_affine_quadratic(p):
        raise ValueError("exact path needs a quadratic objective and affine constraints")
    red = _Reduced(p, support)
    k = red.k
    q, c, f0, a_eq, b_eq, a_le, b_le, trivially_ok = _quadratic_data(p, red)
    if not trivially_ok:
        return red.embed(np.zeros(k)), np.inf, INFEASIBLE
    if k == 0:
        return red.embed(np.zeros(0)), 0.0, CONVERGED
    feas = lpmod.lp_solve(
        lpmod.LinearProgram.build(
            np.zeros(k),
            a_eq=a_eq if a_eq.size else None,
            b_eq=b_eq if a_eq.size else None,
            a_le=a_le if a_le.size else None,
            b_le=b_le if a_le.size else None,
            nonneg=np.zeros(k, dtype=bool),
        )
    )
    if feas.status != lpmod.OPTIMAL:
        return red.embed(np.zeros(k)), np.inf, INFEASIBLE

    t = feas.x.copy()
    work = [i for i in range(a_le.shape[0]) if a_le[i] @ t >= b_le[i] - 1e-9]

    def kkt_solve(active):
        a = np.vstack([a_eq, a_le[active]]) if (a_eq.size or active) else np.zeros((0, k))
        rhs = np.concatenate([b_eq, b_le[active]])
        nrows = a.shape[0]
        kk = np.zeros((k + nrows, k + nrows))
        kk[:k, :k] = q
        if nrows:
            kk[:k, k:] = a.T
            kk[k:, :k] = a
        rr = np.concatenate([-c, rhs])
        # definiteness of the Hessian on the working nullspace
        z = _null(a, k)
        if z.shape[1]:
            w = np.linalg.eigvalsh(z.T @ q @ z)
            if w.min() < -1e-9:
                return None, None, INDEFINITE
            if w.min() < 1e-12:
                sol, *_ = np.linalg.lstsq(kk, rr, rcond=None)
                if np.abs(kk @ sol - rr).max() > 1e-7 * max(1.0, np.abs(rr).max()):
                    return None, None, INDEFINITE
                return sol[:k], sol[k:], None
        try:
            sol = np.linalg.solve(kk, rr)
        except np.linalg.LinAlgError:
            return None, None, INDEFINITE
        return sol[:k], sol[k:], None

    lam_full = np.zeros(a_le.shape[0])
    for _ in range(200 * (k + 1)):
        tstar, lam, bad = kkt_solve(work)
        if bad:
            return red.embed(t), np.inf, INDEFINITE
        step = tstar - t
        if np.abs(step).max(initial=0.0) <= 1e-11:
            lam_ineq = lam[a_eq.shape[0] :]
            neg = [wi for wi, l in zip(work, lam_ineq) if l < -1e-9]
            if not neg:
                lam_full = np.zeros(a_le.shape[0])
                for wi, l in zip(work, lam_ineq):
                    lam_full[wi] = l
                t = tstar
                break
            work = [wi for wi in work if wi != min(neg)]
            continue
        alpha = 1.0
        blocking = -1
        for i in range(a_le.shape[0]):
            if i in work:
                continue
            ap = a_le[i] @ step
            if ap > 1e-12:
                ratio = (b_le[i] - a_le[i] @ t) / ap
                if ratio < alpha - 1e-15:
                    alpha = max(ratio, 0.0)
                    blocking = i
        t = t + alpha * step
        if blocking >= 0:
            work = sorted(work + [blocking])
    else:
        return red.embed(t), np.inf, INDEFINITE

    nu = lam[: a_eq.shape[0]] if a_eq.size else np.zeros(0)
    stat = q @ t + c
    if a_eq.size:
        stat = stat + a_eq.T @ nu
    if a_le.size:
        stat = stat + a_le.T @ lam_full
    resid = float(np.abs(stat).max(initial=0.0))
    if a_eq.size:
        resid = max(resid, float(np.abs(a_eq @ t - b_eq).max()))
    if a_le.size:
        resid = max(resid, float((a_le @ t - b_le).max(initial=0.0)))
        resid = max(resid, float(np.abs(lam_full * (a_le @ t - b_le)).max(initial=0.0)))
    return red.embed(t), resid, CONVERGED


def _null(a: np.ndarray, dim: int) -> np.ndarray:
    if a.size == 0:
        return np.eye(dim)
    u, s, vt = np.linalg.svd(a, full_matrices=True)
    rank = int(np.sum(s > 1e-10 * max(1.0, s[0] if s.size else 0.0)))
    return vt[rank:].T


# ---------------------------------------------------------------------------
# support enumeration

def _start_points(k: int, starts: int):
    pts = [np.zeros(k), np.full(k, 0.5), np.full(k, -0.5)][: max(starts, 1)]
    for seed in range(1, max(starts - 3, 0) + 1):
        rng = np.random.default_rng(seed)
        pts.append(rng.uniform(-1.0, 1.0, k))
    return pts[:starts] if starts >= 1 else [np.zeros(k)]


def _solve_support(p: Problem, support, starts: int, use_qp: bool):
    if use_qp:
        x, resid, status = solve_qp_affine(p, support)
        if status != INDEFINITE:
            viol = _violation(p, x)
            return SupportResult(
                tuple(support), x, float(p.f.eval(x)), resid, viol, status, 1, "qp"
            )
        method = "qp_fallback"
    else:
        method = "auglag"
    best = None
    for start in _start_points(len(support), starts):
        x, resid, status = solve_reduced(p, support, start)
        viol = _violation(p, x)
        fv = float(p.f.eval(x))
        key = (viol > FEAS_ACCEPT, fv if viol <= FEAS_ACCEPT else viol)
        if best is None or key < best[0]:
            best = (key, x, fv, resid, viol, status)
    _, x, fv, resid, viol, status = best
    return SupportResult(tuple(support), x, fv, resid, viol, status, starts, method)


def _violation(p: Problem, x) -> float:
    viol = 0.0
    for e in p.g:
        viol = max(viol, float(e.eval(x)))
    for e in p.h:
        viol = max(viol, abs(float(e.eval(x))))
    return max(viol, 0.0)


def _pick_winner(table, tie_eps: float = EPS_TIE):
    feasible = [r for r in table if r.violation <= FEAS_ACCEPT]
    if not feasible:
        return None, []
    fmin = min(r.objective for r in feasible)
    ties = [r for r in feasible if r.objective <= fmin + tie_eps]
    winner = min(ties, key=lambda r: r.support)
    return winner, [r.support for r in ties]


def solve_brute(p: Problem, starts: int = 8, tie_eps: float = EPS_TIE) -> SolveReport:
    """Enumerate all size-alpha supports and minimize each reduced problem."""
    if math.comb(p.n, p.alpha) > SUPPORT_BUDGET:
        raise ValueError(
            f"support enumeration needs C({p.n},{p.alpha}) reduced solves; "
            f"budget is {SUPPORT_BUDGET}"
        )
    use_qp = is_affine_quadratic(p)
    table = [
        _solve_support(p, support, starts, use_qp)
        for support in combinations(range(1, p.n + 1), p.alpha)
    ]
    winner, ties = _pick_winner(table, tie_eps)
    if winner is None:
        return SolveReport(p.name, None, None, None, None, None, [], False, table)
    y, unique = mo.companion_y(winner.x, p.alpha)
    certified = use_qp and all(r.method == "qp" and r.status == CONVERGED for r in table)
    return SolveReport(
        p.name,
        winner.x,
        winner.objective,
        winner.support,
        y,
        unique,
        ties,
        certified,
        table,
    )


def solve_mixed_integer(p: Problem, starts: int = 8, tie_eps: float = EPS_TIE) -> SolveReport:
    """Exhaustive binary-y enumeration of the mixed-integer reformulation.

    Every binary y with e'y >= n - alpha frees the support {i : y_i = 0};
    minimizing over that support solves the slice exactly, so the best slice
    value is the mixed-integer optimum.
    """
    total = sum(math.comb(p.n, k) for k in range(p.alpha + 1))
    if total > SUPPORT_BUDGET:
        raise ValueError("binary enumeration exceeds the support budget")
    use_qp = is_affine_quadratic(p)
    table = []
    for size in range(p.alpha + 1):
        for support in combinations(range(1, p.n + 1), size):
            table.append(_solve_support(p, support, starts, use_qp))
    winner, ties = _pick_winner(table, tie_eps)
    if winner is None:
        return SolveReport(p.name, None, None, None, None, None, [], False, table)
    y = np.ones(p.n)
    for i in winner.support:
        y[i - 1] = 0.0
    certified = use_qp and all(r.method == "qp" and r.status == CONVERGED for r in table)
    return SolveReport(
        p.name,
        winner.x,
        winner.objective,
        winner.support,
        y,
        None,
        ties,
        certified,
        table,
    )


# ---------------------------------------------------------------------------
# full diagnostic at a feasible point

def diagnostic_pair(p: Problem, x, tau: float = mo.TAU_ZERO) -> PairPoint:
    """Feasible pair with the largest biactive set: y = 1 on the first
    n - alpha zero coordinates only.  The canonical companion (ones on every
    zero) hides biactive indices whenever nnz(x) < alpha; this pairing is the
    one whose stationarity ladder is informative."""
    x = np.asarray(x, dtype=float)
    zeros = [i for i in range(p.n) if abs(x[i]) <= tau]
    if len(zeros) < p.n - p.alpha:
        raise mo.CardinalityError("too many nonzeros for a feasible pairing")
    y = np.zeros(p.n)
    for i in zeros[: p.n - p.alpha]:
        y[i] = 1.0
    return PairPoint(x, y)


def point_report(
    p: Problem,
    x,
    cap: int = 12,
    tol: float = mo.TOL_FEAS,
    tau: float = mo.TAU_ZERO,
) -> dict:
    """Companion pair, index sets, stationarity profile, and CQ verdicts.

    The profile and qualification checks run at the diagnostic pairing,
    which exposes every biactive index."""
    from . import cones as co
    from . import stationarity as st

    x = np.asarray(x, dtype=float)
    if not mo.is_feasible_mpcac(p, x, max(tol, FEAS_ACCEPT), tau):
        raise ValueError("point is not feasible for the cardinality problem")
    y, unique = mo.companion_y(x, p.alpha, tau)
    pt = diagnostic_pair(p, x, tau)
    sets = mo.index_sets(pt, tau)
    prof = st.stationarity_profile(p, pt, cap, tol, tau)
    report = {
        "format": "mpcac-report-1",
        "problem": p.name,
        "x": [float(v) for v in x],
        "companion_y": [float(v) for v in y],
        "unique_y": unique,
        "diagnostic_y": [float(v) for v in pt.y],
        "index_sets": {
            "I00": list(sets.i00),
            "Ipm0": list(sets.i_pm0),
            "I0pm": list(sets.i0pm),
            "I0plus": list(sets.i0plus),
            "I0gt": list(sets.i0gt),
            "I01": list(sets.i01),
            "I0": list(sets.i0),
        },
        "stationarity": {
            "S": st.check_s_stationary(p, pt, tol, tau).verdict,
            "M": st.check_m_stationary(p, pt, tol, tau).verdict,
            "KKT_relaxed": st.check_kkt_relaxed(p, pt, tol, tau).verdict,
            "profile": prof.to_dict(),
        },
        "constraint_qualifications": co.cq_chain(p, pt, cap, tol, tau),
        "tolerances": {"zero": tau, "feasibility": tol, "certificate": st.EPS_CERT},
    }
    return report
