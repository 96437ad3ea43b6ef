"""Built-in catalog of worked cases with their expected facts.

Each case bundles a small problem (or a raw pair-set), distinguished
points, and a list of named checks; the runner executes every check and
reports expected/got/pass rows.  The catalog doubles as regression data for
the test suite and as a zero-setup reproduction path for the CLI.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import cones as co
from . import expr as ex
from . import model as mo
from . import solver as sv
from . import stationarity as st
from .cones import AffineComplementaritySet
from .model import PairPoint, Problem


@dataclass
class CorpusCase:
    id: str
    citation: str
    problem: Optional[Problem] = None
    pair_set: Optional[AffineComplementaritySet] = None
    points: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)  # (name, callable -> row dict)


def _row(name: str, expected, got, ok: bool) -> dict:
    return {"check": name, "expected": expected, "got": got, "pass": bool(ok)}


def _verdict_row(name, expected: bool, got: bool) -> dict:
    words = {True: "holds", False: "fails"}
    return _row(name, words[expected], words[got], expected == got)


def _close(a, b, tol) -> bool:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0)) <= tol


# ---------------------------------------------------------------------------
# problems

def quad_shifted() -> Problem:
    """n=3, bound 2: shifted quadratic with one sign constraint."""
    f = ex.parse_expr("(+ (^ (+ x1 -1) 2) (^ (+ x2 -1) 2) (^ x3 2))", 3)
    return Problem("ex2.1", 3, 2, f, (ex.parse_expr("x1", 3),))


def quad_two_targets() -> Problem:
    """n=3, bound 2: wants two coordinates at 1, first coordinate capped."""
    f = ex.parse_expr("(+ (^ x1 2) (^ (+ x2 -1) 2) (^ (+ x3 -1) 2))", 3)
    return Problem("ex2.2", 3, 2, f, (ex.parse_expr("x1", 3),))


def linear_parabola() -> Problem:
    """n=2, bound 1: linear objective against a parabolic inequality."""
    f = ex.parse_expr("(+ x1 x2)", 2)
    return Problem("ex4.1", 2, 1, f, (ex.parse_expr("(+ (neg x1) (^ x2 2))", 2),))


def sparse_chain(n: int) -> Problem:
    """n variables, bound n-1: every coordinate tied to the last one's square."""
    g = tuple(
        ex.parse_expr(f"(+ (neg x{i}) (^ x{n} 2))", n) for i in range(1, n)
    )
    return Problem(f"ex4.3(n={n})" if n != 3 else "ex4.3", n, n - 1, ex.affine([1.0] * n), g)


def crossing_bound_set() -> AffineComplementaritySet:
    """{x >= 0, y >= 0, y <= x, xy = 0}: a coupled (non-separable) row."""
    return AffineComplementaritySet.build(
        1,
        a_le=[[-1.0, 0.0], [0.0, -1.0], [-1.0, 1.0]],
        b_le=[0.0, 0.0, 0.0],
    )


def pinned_x_box_set() -> AffineComplementaritySet:
    """{x = 0, 0 <= y <= 1, xy = 0}."""
    return AffineComplementaritySet.build(
        1, a_eq=[[1.0, 0.0]], b_eq=[0.0],
        a_le=[[0.0, -1.0], [0.0, 1.0]], b_le=[0.0, 1.0],
    )


def unit_box_set() -> AffineComplementaritySet:
    """{0 <= x <= 1, 0 <= y <= 1, xy = 0}."""
    return AffineComplementaritySet.build(
        1,
        a_le=[[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]],
        b_le=[0.0, 1.0, 0.0, 1.0],
    )


# ---------------------------------------------------------------------------
# cases

def _case_ex21() -> CorpusCase:
    p = quad_shifted()
    pt = PairPoint([0.0, 1.0, 0.0], [0.5, 0.0, 0.5])
    case = CorpusCase("ex2.1", "relaxed optimum with a family of non-binary partners", problem=p, points={"relaxed_solution": pt})

    def feasibility():
        return _row(
            "pair point relaxed-feasible",
            True,
            mo.is_feasible_relaxed(p, pt),
            mo.is_feasible_relaxed(p, pt),
        )

    def indices():
        s = mo.index_sets(pt)
        got = {"I0plus": s.i0plus, "I00": s.i00, "Ipm0": s.i_pm0}
        want = {"I0plus": (1, 3), "I00": (), "Ipm0": (2,)}
        return _row("index sets", str(want), str(got), got == want)

    def strict_profile():
        prof = st.stationarity_profile(p, pt)
        ok = len(prof.entries) == 1
        return _row("strict complementarity: one-entry profile", 1, len(prof.entries), ok)

    def s_holds():
        return _verdict_row("S-stationarity at the solution pair", True,
                            st.check_s_stationary(p, pt).verdict)

    def kkt_holds():
        return _verdict_row("relaxed-problem KKT", True, st.check_kkt_relaxed(p, pt).verdict)

    def cq():
        chain = co.cq_chain(p, pt)
        want = {"licq": False, "mfcq": False, "acq": True, "gcq": True}
        got = {k: chain[k] for k in want}
        return _row("CQ chain (LICQ/MFCQ fail, ACQ/GCQ hold)", str(want), str(got), got == want)

    def solve():
        rep = sv.solve_brute(p)
        ok = abs(rep.best_objective - 1.0) <= 1e-6 and _close(rep.best_x, [0, 1, 0], 1e-6)
        return _row("global value 1 at (0,1,0)", "f*=1", f"f*={rep.best_objective:.9g}", ok)

    def equivalence():
        b = sv.solve_brute(p).best_objective
        mi = sv.solve_mixed_integer(p).best_objective
        return _row("support vs binary enumeration", "equal within 1e-6",
                    f"|{b:.9g} - {mi:.9g}|", abs(b - mi) <= 1e-6)

    case.checks = [
        ("feasibility", feasibility),
        ("index_sets", indices),
        ("profile", strict_profile),
        ("s_stationarity", s_holds),
        ("kkt", kkt_holds),
        ("cq_chain", cq),
        ("solve", solve),
        ("value_equivalence", equivalence),
    ]
    return case


def _case_ex22() -> CorpusCase:
    p = quad_two_targets()
    pt = PairPoint([0.0, 1.0, 0.0], [0.5, 0.0, 0.5])
    case = CorpusCase("ex2.2", "relaxed local optimum that is not a sparse local optimum", problem=p, points={"spurious_local": pt})

    def feas_pair():
        got = mo.is_feasible_relaxed(p, pt)
        return _row("pair point relaxed-feasible", True, got, got)

    def feas_x():
        got = mo.is_feasible_mpcac(p, [0.0, 1.0, 0.0])
        return _row("x=(0,1,0) feasible at bound 2", True, got, got)

    def infeas_x():
        got = mo.is_feasible_mpcac(p, [1.0, 1.0, 1.0])
        return _row("x=(1,1,1) infeasible (3 nonzeros)", False, got, not got)

    def companion():
        y, unique = mo.companion_y([0.0, 1.0, 0.0], 2)
        ok = np.array_equal(y, [1.0, 0.0, 1.0]) and unique is False
        return _row("companion y=(1,0,1), not unique", "(1,0,1)/False",
                    f"{tuple(y)}/{unique}", ok)

    def solve():
        rep = sv.solve_brute(p)
        ok = abs(rep.best_objective) <= 1e-6 and _close(rep.best_x, [0, 1, 1], 1e-6)
        return _row("global value 0 at (0,1,1)", "f*=0", f"f*={rep.best_objective:.9g}", ok)

    def equivalence():
        b = sv.solve_brute(p).best_objective
        mi = sv.solve_mixed_integer(p).best_objective
        return _row("support vs binary enumeration", "equal within 1e-6",
                    f"|{b:.9g} - {mi:.9g}|", abs(b - mi) <= 1e-6)

    case.checks = [
        ("pair_feasible", feas_pair),
        ("x_feasible", feas_x),
        ("cardinality_reject", infeas_x),
        ("companion", companion),
        ("solve", solve),
        ("value_equivalence", equivalence),
    ]
    return case


def _case_ex31() -> CorpusCase:
    s = crossing_bound_set()
    pt = PairPoint([0.0], [0.0])
    case = CorpusCase("ex3.1", "coupled bound set where the cone polars differ", pair_set=s, points={"origin": pt})

    def tangent():
        union = co.tangent_cone_pieces(s, pt)
        target = co.PolyhedralCone.build([[0.0, 1.0]], [[-1.0, 0.0]], 2)
        equal, flag = co.union_equals_cone(union, target)
        return _row("tangent cone is the nonnegative d1 axis", True,
                    f"{equal} ({flag})", equal and flag == co.EXACT)

    def linearized():
        d = co.linearized_cone(s, pt)
        target = co.PolyhedralCone.build(None, [[0.0, -1.0], [-1.0, 1.0]], 2)
        equal = co.cones_equal(d, target)
        return _row("linearized cone is 0 <= d2 <= d1", True, equal, equal)

    def d_generators():
        rays, lin = co.generators(co.linearized_cone(s, pt))
        want = {(1.0, 0.0), (1.0, 1.0)}
        got = {tuple(float(v) for v in np.round(r / np.abs(r).max(), 9)) for r in rays}
        return _row("linearized-cone rays up to scaling", str(sorted(want)),
                    str(sorted(got)), got == want and not lin)

    def acq():
        return _verdict_row("ACQ", False, co.check_acq(s, pt).verdict)

    def gcq():
        return _verdict_row("GCQ", False, co.check_gcq(s, pt).verdict)

    case.checks = [
        ("tangent_cone", tangent),
        ("linearized_cone", linearized),
        ("generators", d_generators),
        ("acq", acq),
        ("gcq", gcq),
    ]
    return case


def _case_rm31() -> CorpusCase:
    pt = PairPoint([0.0], [0.0])
    s1 = pinned_x_box_set()
    s2 = unit_box_set()
    case = CorpusCase("rm3.1", "pinned-x and unit-box complementarity sets", pair_set=s1,
                      points={"origin": pt})

    def first_acq():
        return _verdict_row("ACQ on {x=0, 0<=y<=1}", True, co.check_acq(s1, pt).verdict)

    def second_acq():
        return _verdict_row("ACQ on {0<=x<=1, 0<=y<=1}", False, co.check_acq(s2, pt).verdict)

    def second_gcq():
        return _verdict_row("GCQ on {0<=x<=1, 0<=y<=1} (separable rows)", True,
                            co.check_gcq(s2, pt).verdict)

    case.checks = [
        ("acq_pinned_x", first_acq),
        ("acq_box", second_acq),
        ("gcq_box", second_gcq),
    ]
    return case


def _case_ex41() -> CorpusCase:
    p = linear_parabola()
    pt = PairPoint([0.0, 0.0], [1.0, 0.0])
    case = CorpusCase("ex4.1", "parabolic constraint defeating every qualification", problem=p,
                      points={"global_solution": pt})

    def solve():
        rep = sv.solve_brute(p)
        ok = (
            float(np.abs(rep.best_x).max()) <= 1e-7
            and abs(rep.best_objective) <= 1e-7
        )
        return _row("global solution x*=(0,0), f*=0", "(0,0)/0",
                    f"{tuple(np.round(rep.best_x, 10))}/{rep.best_objective:.3g}", ok)

    def kkt():
        return _verdict_row("relaxed-problem KKT at the solution pair", False,
                            st.check_kkt_relaxed(p, pt).verdict)

    def s_fails():
        return _verdict_row("S-stationarity", False, st.check_s_stationary(p, pt).verdict)

    def m_holds():
        return _verdict_row("M-stationarity", True, st.check_m_stationary(p, pt).verdict)

    def profile():
        prof = st.stationarity_profile(p, pt)
        got = prof.minimal
        return _row("minimal stationary index set", "[(1, 2)]", str(got), got == [(1, 2)])

    def index_range():
        lo, hi = mo.admissible_I_range(pt)
        ok = lo == (1,) and hi == (1, 2)
        return _row("admissible index range", "({1}, {1,2})", f"({set(lo)}, {set(hi)})", ok)

    def tightened():
        rp = mo.build_tightened(p, pt, (1, 2))
        got = {"ineq": rp.ineq_labels, "eq": rp.eq_labels}
        ok = (
            "H1" in rp.ineq_labels
            and "H2" in rp.eq_labels
            and "G1" in rp.eq_labels
            and "G2" in rp.eq_labels
        )
        return _row("tightened rows: H1<=0, H2=0, G1=G2=0", "present", str(got), ok)

    def tightened_range_error():
        try:
            mo.build_tightened(p, pt, (2,))
            return _row("I={2} rejected", "error", "accepted", False)
        except ValueError as exc:
            return _row("I={2} rejected", "error", f"error: {exc}", True)

    def mfcq():
        return _verdict_row("MFCQ", False, co.check_mfcq(p, pt).verdict)

    def licq():
        return _verdict_row("LICQ", False, co.check_licq(p, pt).verdict)

    def gcq_refuted():
        rep = sv.solve_brute(p)
        at_solution = float(np.abs(rep.best_x - pt.x).max()) <= 1e-6
        not_kkt = not st.check_kkt_relaxed(p, pt).verdict
        ok = at_solution and not_kkt
        return _row(
            "GCQ refuted: verified minimizer is not KKT",
            "minimizer and not KKT",
            f"at_solution={at_solution}, kkt_fails={not_kkt}",
            ok,
        )

    def full_multipliers():
        cert = st.recover_full_multipliers(st.check_m_stationary(p, pt))
        worst = max(cert.full["item_residuals"].values())
        return _row("full multiplier items verified", "residuals <= 1e-7",
                    f"max={worst:.2e}", worst <= st.EPS_CERT)

    def equivalence():
        b = sv.solve_brute(p).best_objective
        mi = sv.solve_mixed_integer(p).best_objective
        return _row("support vs binary enumeration", "equal within 1e-6",
                    f"|{b:.9g} - {mi:.9g}|", abs(b - mi) <= 1e-6)

    case.checks = [
        ("solve", solve),
        ("kkt", kkt),
        ("s_stationarity", s_fails),
        ("m_stationarity", m_holds),
        ("profile", profile),
        ("index_range", index_range),
        ("tightened", tightened),
        ("tightened_range_error", tightened_range_error),
        ("mfcq", mfcq),
        ("licq", licq),
        ("gcq_refuted_via_solver", gcq_refuted),
        ("full_multipliers", full_multipliers),
        ("value_equivalence", equivalence),
    ]
    return case


def _case_ex43() -> CorpusCase:
    n = 3
    p = sparse_chain(n)
    pt = PairPoint(np.zeros(n), np.eye(n)[0])
    case = CorpusCase("ex4.3", "chain family stationary only past the coupled index", problem=p,
                      points={"global_solution": pt})

    def indices():
        s = mo.index_sets(pt)
        want = {"I01": (1,), "I00": (2, 3), "I0": (1, 2, 3)}
        got = {"I01": s.i01, "I00": s.i00, "I0": s.i0}
        return _row("index sets", str(want), str(got), got == want)

    def w_iff():
        lo, _ = mo.admissible_I_range(pt)
        ok = True
        from itertools import combinations as comb
        free = (2, 3)
        for size in range(len(free) + 1):
            for sub in comb(free, size):
                I = tuple(sorted(set(lo) | set(sub)))
                holds = st.check_w_stationary(p, pt, I).verdict
                if holds != (n in I):
                    ok = False
        return _row("stationary exactly when the last index is in I",
                    "iff n in I", "iff n in I" if ok else "mismatch", ok)

    def minimal():
        prof = st.stationarity_profile(p, pt)
        return _row("minimal stationary set", "[(1, 3)]", str(prof.minimal),
                    prof.minimal == [(1, 3)])

    def witness():
        cert = st.check_w_stationary(p, pt, (1, 3))
        ok = (
            cert.verdict
            and _close(cert.lam_g, [1.0, 1.0], 1e-7)
            and abs(cert.gamma[list(cert.I).index(3)] + 1.0) <= 1e-7
        )
        return _row("witness multipliers lam_g=(1,1), gamma_n=-1",
                    "(1,1)/-1",
                    f"{None if cert.lam_g is None else tuple(np.round(cert.lam_g, 6))}"
                    f"/{None if cert.gamma is None else tuple(np.round(cert.gamma, 6))}",
                    ok)

    def ladder():
        s_v = st.check_s_stationary(p, pt).verdict
        m_v = st.check_m_stationary(p, pt).verdict
        k_v = st.check_kkt_relaxed(p, pt).verdict
        ok = (not s_v) and m_v and (not k_v)
        return _row("S fails, M holds, KKT fails", "(False, True, False)",
                    str((s_v, m_v, k_v)), ok)

    def solve():
        rep = sv.solve_brute(p)
        ok = float(np.abs(rep.best_x).max()) <= 1e-7 and abs(rep.best_objective) <= 1e-7
        return _row("global solution x*=0, f*=0", "0/0",
                    f"max|x|={float(np.abs(rep.best_x).max()):.2e}, f={rep.best_objective:.2e}", ok)

    def cq():
        licq = co.check_licq(p, pt).verdict
        mfcq = co.check_mfcq(p, pt).verdict
        return _row("LICQ and MFCQ fail", "(False, False)", str((licq, mfcq)),
                    licq is False and mfcq is False)

    def equivalence():
        b = sv.solve_brute(p).best_objective
        mi = sv.solve_mixed_integer(p).best_objective
        return _row("support vs binary enumeration", "equal within 1e-6",
                    f"|{b:.9g} - {mi:.9g}|", abs(b - mi) <= 1e-6)

    case.checks = [
        ("index_sets", indices),
        ("w_iff_last_index", w_iff),
        ("minimal", minimal),
        ("witness", witness),
        ("ladder", ladder),
        ("solve", solve),
        ("cq", cq),
        ("value_equivalence", equivalence),
    ]
    return case


def cases() -> list:
    return [
        _case_ex21(),
        _case_ex22(),
        _case_ex31(),
        _case_rm31(),
        _case_ex41(),
        _case_ex43(),
    ]


def get_case(case_id: str) -> CorpusCase:
    for c in cases():
        if c.id == case_id:
            return c
    raise KeyError(f"unknown corpus case {case_id!r}")


def run(case_filter: Optional[str] = None) -> dict:
    """Execute the catalog (optionally one case) and collect result rows."""
    selected = [c for c in cases() if case_filter in (None, c.id)]
    if case_filter is not None and not selected:
        raise KeyError(f"unknown corpus case {case_filter!r}")
    out_cases = []
    total = passed = 0
    for c in selected:
        rows = []
        for name, fn in c.checks:
            row = fn()
            row["id"] = name
            rows.append(row)
            total += 1
            passed += bool(row["pass"])
        out_cases.append(
            {
                "case": c.id,
                "citation": c.citation,
                "checks": rows,
                "pass": all(r["pass"] for r in rows),
            }
        )
    return {
        "format": "mpcac-report-1",
        "cases": out_cases,
        "checks_total": total,
        "checks_passed": passed,
        "pass": passed == total,
    }


def export(directory: str) -> list:
    """Write problem and point files for every problem-backed case."""
    os.makedirs(directory, exist_ok=True)
    written = []
    for c in cases():
        if c.problem is None:
            continue
        path = os.path.join(directory, f"{c.id.replace('.', '_')}.json")
        mo.save_problem(c.problem, path)
        written.append(path)
        for label, pt in c.points.items():
            ppath = os.path.join(
                directory, f"{c.id.replace('.', '_')}_{label}.point.json"
            )
            import json

            with open(ppath, "w", encoding="utf-8") as fh:
                json.dump(mo.point_to_dict(pt), fh, indent=2, sort_keys=True)
                fh.write("\n")
            written.append(ppath)
    return written
