"""Stationarity certificates for the relaxed problem at a pair point.

The workhorse condition is parametrized by an index set I between the
"x=0 with y>0" indices and the full zero set of x: a point qualifies when
multipliers (lam_g >= 0, lam_h, gamma on I) solve

    grad f + sum lam_g grad g + sum lam_h grad h + sum_{i in I} gamma_i e_i = 0
    lam_g' g = 0

which is exactly the KKT system of the tightened problem at that point.
The strongest instance (smallest I) coincides with KKT of the relaxed
problem; the weakest takes I = all zero indices.  Certificates carry the
multipliers on success and a re-verified Farkas vector on failure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from . import expr as ex
from . import lp as lpmod
from . import model as mo
from .model import PairPoint, Problem, ReformulatedProblem

EPS_CERT = 1e-7
PROFILE_CAP = 12

COND_W = "W"
COND_S = "S"
COND_M = "M"
COND_KKT = "KKT_relaxed"


class StationarityInternalError(RuntimeError):
    """Cross-check disagreement between two certification routes."""


@dataclass
class StationarityCertificate:
    condition: str
    verdict: bool
    I: tuple
    lam_g: Optional[np.ndarray] = None
    lam_h: Optional[np.ndarray] = None
    gamma: Optional[np.ndarray] = None  # aligned with I
    stationarity_residual: Optional[float] = None
    complementarity_residual: Optional[float] = None
    farkas: Optional[np.ndarray] = None
    full: Optional[dict] = None  # lam_theta, lam_H, lam_Htil, lam_G + item residuals
    direct: Optional[dict] = None  # relaxed-problem KKT multipliers (direct route)
    problem: Optional[Problem] = None
    point: Optional[PairPoint] = None
    tolerances: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else [float(v) for v in np.atleast_1d(a)]

        d = {
            "format": "mpcac-report-1",
            "condition": self.condition,
            "verdict": "holds" if self.verdict else "fails",
            "I": [int(i) for i in self.I],
            "multipliers": None,
            "full_multipliers": None,
            "stationarity_residual": self.stationarity_residual,
            "complementarity_residual": self.complementarity_residual,
            "farkas": arr(self.farkas),
            "tolerances": dict(self.tolerances),
        }
        if self.verdict:
            d["multipliers"] = {
                "lam_g": arr(self.lam_g),
                "lam_h": arr(self.lam_h),
                "gamma": arr(self.gamma),
            }
        if self.full is not None:
            d["full_multipliers"] = {
                "lam_theta": self.full["lam_theta"],
                "lam_H": arr(self.full["lam_H"]),
                "lam_Htil": arr(self.full["lam_Htil"]),
                "lam_G": arr(self.full["lam_G"]),
                "item_residuals": self.full["item_residuals"],
            }
        if self.direct is not None:
            d["direct_multipliers"] = {k: arr(v) for k, v in self.direct.items()}
        return d


def _require_relaxed_feasible(p: Problem, pt: PairPoint, tol: float):
    if not mo.is_feasible_relaxed(p, pt, tol):
        raise ValueError("point is not feasible for the relaxed problem")


def _reduced_system(p: Problem, pt: PairPoint, I, tol: float):
    """Columns/rows of the multiplier search in the x variables only."""
    x = pt.x
    n = p.n
    gvals = np.array([e.eval(x) for e in p.g])
    active = [i for i in range(p.m) if gvals[i] >= -tol]
    cols = []
    nonneg = []
    for i in active:
        cols.append(ex.grad(p.g[i], x))
        nonneg.append(True)
    for e in p.h:
        cols.append(ex.grad(e, x))
        nonneg.append(False)
    for i in I:
        col = np.zeros(n)
        col[i - 1] = 1.0
        cols.append(col)
        nonneg.append(False)
    a = np.column_stack(cols) if cols else np.zeros((n, 0))
    b = -ex.grad(p.f, x)
    return a, b, nonneg, active, gvals


def check_w_stationary(
    p: Problem,
    pt: PairPoint,
    I,
    tol: float = mo.TOL_FEAS,
    tau: float = mo.TAU_ZERO,
    condition: str = COND_W,
) -> StationarityCertificate:
    """Multiplier search for the index set I via linear feasibility."""
    _require_relaxed_feasible(p, pt, tol)
    I = mo._check_I(pt, I, tau)
    a, b, nonneg, active, gvals = _reduced_system(p, pt, I, tol)
    out = lpmod.linear_feasibility(a, b, nonneg)
    tolerances = {"zero": tau, "feasibility": tol, "certificate": EPS_CERT}

    if out.status != lpmod.OPTIMAL:
        return StationarityCertificate(
            condition,
            False,
            I,
            farkas=out.farkas,
            problem=p,
            point=pt,
            tolerances=tolerances,
        )

    sol = out.x
    lam_g = np.zeros(p.m)
    for k, i in enumerate(active):
        lam_g[i] = sol[k]
    lam_h = np.array(sol[len(active) : len(active) + p.p])
    gamma = np.array(sol[len(active) + p.p :])
    resid = ex.grad(p.f, pt.x) + (a @ sol if a.size else 0.0)
    stat = float(np.abs(resid).max()) if p.n else 0.0
    comp = float(abs(lam_g @ gvals)) if p.m else 0.0
    cert = StationarityCertificate(
        condition,
        True,
        I,
        lam_g=lam_g,
        lam_h=lam_h,
        gamma=gamma,
        stationarity_residual=stat,
        complementarity_residual=comp,
        problem=p,
        point=pt,
        tolerances=tolerances,
    )
    # the complementarity bound scales with the feasibility tolerance:
    # active rows satisfy |g_i| <= tol, so |lam' g| <= |lam|_1 tol
    comp_bound = float(np.abs(lam_g).sum()) * tol + EPS_CERT
    if stat > EPS_CERT or comp > comp_bound or lam_g.min(initial=0.0) < -EPS_CERT:
        raise StationarityInternalError("accepted multipliers violate the residual contract")
    return cert


def check_s_stationary(p: Problem, pt: PairPoint, tol: float = mo.TOL_FEAS,
                       tau: float = mo.TAU_ZERO) -> StationarityCertificate:
    i_min, _ = mo.admissible_I_range(pt, tau)
    return check_w_stationary(p, pt, i_min, tol, tau, condition=COND_S)


def check_m_stationary(p: Problem, pt: PairPoint, tol: float = mo.TOL_FEAS,
                       tau: float = mo.TAU_ZERO) -> StationarityCertificate:
    _, i_max = mo.admissible_I_range(pt, tau)
    return check_w_stationary(p, pt, i_max, tol, tau, condition=COND_M)


# ---------------------------------------------------------------------------
# generic KKT certification of a reformulated problem (also the direct route
# for relaxed-problem KKT and the oracle for the tightened equivalence)

def kkt_reformulated(rp: ReformulatedProblem, z, tol: float = mo.TOL_FEAS):
    """KKT feasibility at z for an explicit reformulation.

    Inactive inequality multipliers are fixed to zero, so complementarity is
    exact and the search is a linear feasibility problem.  Returns
    (holds, info) where info carries multipliers or the Farkas vector.
    """
    z = np.asarray(z, dtype=float)
    if not rp.is_feasible(z, tol):
        raise ValueError("point is not feasible for the reformulated problem")
    ivals = rp.ineq_values(z) if rp.ineq else np.zeros(0)
    active = [k for k in range(len(rp.ineq)) if ivals[k] >= -tol]
    cols = []
    nonneg = []
    for k in active:
        cols.append(ex.grad(rp.ineq[k], z))
        nonneg.append(True)
    for e in rp.eq:
        cols.append(ex.grad(e, z))
        nonneg.append(False)
    a = np.column_stack(cols) if cols else np.zeros((len(z), 0))
    b = -ex.grad(rp.objective, z)
    out = lpmod.linear_feasibility(a, b, nonneg)
    if out.status != lpmod.OPTIMAL:
        return False, {"farkas": out.farkas, "active": active}
    lam_ineq = np.zeros(len(rp.ineq))
    for j, k in enumerate(active):
        lam_ineq[k] = out.x[j]
    lam_eq = np.array(out.x[len(active) :])
    resid = b - (a @ out.x if a.size else 0.0)
    return True, {
        "lam_ineq": lam_ineq,
        "lam_eq": lam_eq,
        "stationarity_residual": float(np.abs(resid).max()) if len(z) else 0.0,
        "complementarity_residual": float(abs(lam_ineq @ ivals)) if len(rp.ineq) else 0.0,
        "active": active,
    }


def check_kkt_relaxed(p: Problem, pt: PairPoint, tol: float = mo.TOL_FEAS,
                      tau: float = mo.TAU_ZERO) -> StationarityCertificate:
    """KKT of the relaxed problem, certified twice.

    Runs the direct multiplier search on the full 2n-variable system and the
    reduced x-space route with the smallest admissible I; the verdicts must
    agree (their equivalence is exercised as an internal cross-check).
    """
    _require_relaxed_feasible(p, pt, tol)
    rp = mo.build_relaxed(p)
    holds, info = kkt_reformulated(rp, pt.z(), tol)
    s_cert = check_s_stationary(p, pt, tol, tau)
    if holds != s_cert.verdict:
        raise StationarityInternalError(
            "direct relaxed-problem KKT route disagrees with the reduced route"
        )
    cert = StationarityCertificate(
        COND_KKT,
        holds,
        s_cert.I,
        lam_g=s_cert.lam_g,
        lam_h=s_cert.lam_h,
        gamma=s_cert.gamma,
        stationarity_residual=s_cert.stationarity_residual,
        complementarity_residual=s_cert.complementarity_residual,
        farkas=s_cert.farkas if not holds else None,
        problem=p,
        point=pt,
        tolerances=s_cert.tolerances,
    )
    if holds:
        lam = info["lam_ineq"]
        n, m = p.n, p.m
        cert.direct = {
            "lam_g": lam[:m],
            "lam_theta": lam[m : m + 1],
            "mu": lam[m + 1 : m + 1 + n],
            "lam_Htil": lam[m + 1 + n : m + 1 + 2 * n],
            "lam_h": info["lam_eq"][: p.p],
            "lam_xi": info["lam_eq"][p.p :],
        }
        cert.stationarity_residual = max(
            cert.stationarity_residual, info["stationarity_residual"]
        )
    else:
        cert.direct = {"farkas_direct": info["farkas"]}
    return cert


def recover_full_multipliers(cert: StationarityCertificate,
                             pt: Optional[PairPoint] = None) -> StationarityCertificate:
    """Extend a reduced holds-certificate to the tightened problem's full
    multiplier vector (gamma becomes the x-fixing multipliers; the bound and
    budget multipliers vanish) and verify every defining item."""
    if not cert.verdict:
        raise ValueError("full multipliers exist only for a holds-certificate")
    p = cert.problem
    pt = pt or cert.point
    if p is None or pt is None:
        raise ValueError("certificate lacks its problem/point context")
    n = p.n
    s = mo.index_sets(pt, cert.tolerances.get("zero", mo.TAU_ZERO))
    lam_theta = 0.0
    lam_H = np.zeros(n)
    lam_Htil = np.zeros(n)
    lam_G = np.array(cert.gamma) if cert.gamma is not None else np.zeros(0)

    x, y = pt.x, pt.y
    stat_x = ex.grad(p.f, x).copy()
    for i in range(p.m):
        stat_x += cert.lam_g[i] * ex.grad(p.g[i], x)
    for j in range(p.p):
        stat_x += cert.lam_h[j] * ex.grad(p.h[j], x)
    for k, i in enumerate(cert.I):
        stat_x[i - 1] += lam_G[k]
    stat_y = -lam_theta * np.ones(n) - lam_H + lam_Htil
    theta = float(p.n - p.alpha - y.sum())
    items = {
        "stationarity_x": float(np.abs(stat_x).max()),
        "stationarity_y": float(np.abs(stat_y).max()),
        "complementarity_g": float(abs(cert.lam_g @ np.array([e.eval(x) for e in p.g]))) if p.m else 0.0,
        "complementarity_theta": abs(lam_theta * theta),
        "complementarity_Htil": float(abs(lam_Htil @ (y - 1.0))),
        "lam_H_on_positive_y": float(
            max((abs(lam_H[i - 1]) for i in set(s.i0plus) | set(s.i01)), default=0.0)
        ),
    }
    eps = cert.tolerances.get("certificate", EPS_CERT)
    comp_bound = (
        float(np.abs(cert.lam_g).sum()) * cert.tolerances.get("feasibility", mo.TOL_FEAS)
        + eps
    )
    for name, value in items.items():
        bound = comp_bound if name == "complementarity_g" else eps
        if value > bound:
            raise StationarityInternalError("full multiplier verification failed")
    cert.full = {
        "lam_theta": lam_theta,
        "lam_H": lam_H,
        "lam_Htil": lam_Htil,
        "lam_G": lam_G,
        "item_residuals": items,
    }
    return cert


# ---------------------------------------------------------------------------
# profile over the admissible range

@dataclass
class StationarityProfile:
    i_min: tuple
    i_max: tuple
    i00: tuple
    entries: list  # (I tuple, holds) in subset (size, lex) order
    minimal: list  # minimal holding I sets, same order

    def verdict(self, I) -> bool:
        key = tuple(sorted(I))
        for J, holds in self.entries:
            if J == key:
                return holds
        raise KeyError(f"{I} is not an admissible index set")

    def to_dict(self) -> dict:
        return {
            "format": "mpcac-report-1",
            "I_min": [int(i) for i in self.i_min],
            "I_max": [int(i) for i in self.i_max],
            "I00": [int(i) for i in self.i00],
            "entries": [
                {"I": [int(i) for i in J], "verdict": "holds" if h else "fails"}
                for J, h in self.entries
            ],
            "minimal_stationary": [[int(i) for i in J] for J in self.minimal],
        }


def stationarity_profile(
    p: Problem,
    pt: PairPoint,
    cap: int = PROFILE_CAP,
    tol: float = mo.TOL_FEAS,
    tau: float = mo.TAU_ZERO,
) -> StationarityProfile:
    """Check every admissible I; verify up-closedness; report minimal sets."""
    _require_relaxed_feasible(p, pt, tol)
    s = mo.index_sets(pt, tau)
    i_min, i_max = mo.admissible_I_range(pt, tau)
    free = s.i00
    if len(free) > cap:
        raise ValueError(f"profile needs 2^{len(free)} checks; cap is 2^{cap}")

    subsets = []
    for size in range(len(free) + 1):
        subsets.extend(combinations(free, size))
    verdicts = {}
    entries = []
    for sub in subsets:
        I = tuple(sorted(set(i_min) | set(sub)))
        holds = check_w_stationary(p, pt, I, tol, tau).verdict
        verdicts[sub] = holds
        entries.append((I, holds))

    # a holding set must keep holding when any free index is added
    for sub in subsets:
        if verdicts[sub]:
            rest = [i for i in free if i not in sub]
            for j in rest:
                bigger = tuple(sorted(sub + (j,)))
                if not verdicts[bigger]:
                    raise StationarityInternalError(
                        "profile is not up-closed: "
                        f"{sub} holds but {bigger} fails"
                    )

    minimal = []
    for sub in subsets:
        if not verdicts[sub]:
            continue
        if all(not verdicts[tuple(v for v in sub if v != j)] for j in sub):
            minimal.append(tuple(sorted(set(i_min) | set(sub))))
    return StationarityProfile(i_min, i_max, free, entries, minimal)
