"""Command-line front end.

Thin adapters over the library: every report is the module output
serialized as-is (sorted keys, two-space indent), with the tolerances in
effect embedded.  Exit codes: 0 success, 1 failed checks in corpus mode,
2 usage/input errors.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import cones as co
from . import corpus as corpus_mod
from . import model as mo
from . import solver as sv
from . import stationarity as st
from .expr import ParseError


def _dump(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True)


def _parse_point(text: str) -> mo.PairPoint:
    """Inline "x=0,0;y=1,0" or "@path" to a point file."""
    if text.startswith("@"):
        return mo.load_point(text[1:])
    parts = {}
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise ValueError(f"bad point component {chunk!r}; use x=..;y=..")
        key, vals = chunk.split("=", 1)
        key = key.strip()
        if key not in ("x", "y"):
            raise ValueError(f"unknown point component {key!r}")
        parts[key] = np.array([float(v) for v in vals.split(",") if v.strip() != ""])
    if "x" not in parts:
        raise ValueError("point needs at least x=...")
    return mo.PairPoint(parts["x"], parts.get("y"))


def _parse_I(text) -> tuple:
    if text is None:
        return ()
    return tuple(int(v) for v in str(text).replace(",", " ").split())


def _point_with_y(p: mo.Problem, pt: mo.PairPoint, tau: float) -> mo.PairPoint:
    if pt.y is not None:
        return pt
    y, _ = mo.companion_y(pt.x, p.alpha, tau)
    return mo.PairPoint(pt.x, y)


def cmd_validate(args) -> int:
    problem = mo.load_problem(args.file)
    report = {
        "format": "mpcac-report-1",
        "file": args.file,
        "status": "ok",
        "problem": mo.problem_to_dict(problem),
    }
    print(_dump(report) if args.json else f"ok: {problem.name} (n={problem.n}, alpha={problem.alpha}, m={problem.m}, p={problem.p})")
    return 0


def cmd_reformulate(args) -> int:
    problem = mo.load_problem(args.file)
    if args.form == "relaxed":
        rp = mo.build_relaxed(problem)
    elif args.form == "mixed":
        rp = mo.build_mixed_integer(problem)
    else:
        if args.point is None:
            raise ValueError("tightened form needs --point")
        pt = _point_with_y(problem, _parse_point(args.point), args.tol_zero)
        rp = mo.build_tightened(problem, pt, _parse_I(args.I), args.tol_zero, args.tol_feas)
    if args.json:
        payload = {
            "format": "mpcac-report-1",
            "kind": rp.kind,
            "variables": rp.nvars,
            "objective": str(rp.objective),
            "inequalities": {lab: str(e) for lab, e in zip(rp.ineq_labels, rp.ineq)},
            "equalities": {lab: str(e) for lab, e in zip(rp.eq_labels, rp.eq)},
            "binary": [int(i) for i in rp.binary],
            "index_set": [int(i) for i in rp.index_set],
            "tolerances": {"zero": args.tol_zero, "feasibility": args.tol_feas},
        }
        print(_dump(payload))
    else:
        print(rp.describe())
    return 0


def cmd_check(args) -> int:
    problem = mo.load_problem(args.file)
    pt = _point_with_y(problem, _parse_point(args.point), args.tol_zero)
    cond = args.condition
    if cond == "kkt":
        cert = st.check_kkt_relaxed(problem, pt, args.tol_feas, args.tol_zero)
    elif cond == "s":
        cert = st.check_s_stationary(problem, pt, args.tol_feas, args.tol_zero)
    elif cond == "m":
        cert = st.check_m_stationary(problem, pt, args.tol_feas, args.tol_zero)
    else:
        cert = st.check_w_stationary(problem, pt, _parse_I(args.I), args.tol_feas, args.tol_zero)
    if cert.verdict and cond != "kkt":
        cert = st.recover_full_multipliers(cert)
    if args.json:
        print(_dump(cert.to_dict()))
    else:
        label = cond.upper() if cond != "w" else f"W({set(cert.I)})"
        print(f"{label}: {'holds' if cert.verdict else 'fails'}")
        if cert.verdict:
            print(f"  stationarity residual  {cert.stationarity_residual:.3e}")
            print(f"  complementarity        {cert.complementarity_residual:.3e}")
        elif cert.farkas is not None:
            print(f"  infeasibility certificate {np.round(cert.farkas, 6).tolist()}")
    return 0


def cmd_cq(args) -> int:
    problem = mo.load_problem(args.file)
    pt = _point_with_y(problem, _parse_point(args.point), args.tol_zero)
    which = args.which
    if which == "licq":
        report = co.check_licq(problem, pt, args.tol_feas)
    elif which == "mfcq":
        report = co.check_mfcq(problem, pt, args.tol_feas)
    elif which == "acq":
        report = co.check_acq(problem, pt, tol=args.tol_feas, tau=args.tol_zero)
    else:
        report = co.check_gcq(problem, pt, tol=args.tol_feas, tau=args.tol_zero)
    if args.json:
        payload = report.to_dict()
        payload["tolerances"] = {"zero": args.tol_zero, "feasibility": args.tol_feas}
        print(_dump(payload))
    else:
        print(f"{which.upper()}: {'holds' if report.verdict else 'fails'} ({report.flag})")
    return 0


def cmd_solve(args) -> int:
    problem = mo.load_problem(args.file)
    report = sv.solve_brute(problem, starts=args.starts)
    if args.emit_table:
        with open(args.emit_table, "w", encoding="utf-8") as fh:
            fh.write(report.format_table() + "\n")
    if args.json:
        payload = report.to_dict()
        payload["tolerances"] = {
            "zero": args.tol_zero,
            "feasibility": args.tol_feas,
            "tie": sv.EPS_TIE,
        }
        print(_dump(payload))
    else:
        print(report.format_table())
    return 0


def cmd_corpus(args) -> int:
    if args.export_dir:
        for path in corpus_mod.export(args.export_dir):
            print(f"wrote {path}")
        return 0
    result = corpus_mod.run(args.case)
    if args.json:
        print(_dump(result))
    else:
        for case in result["cases"]:
            print(f"[{case['case']}] {case['citation']}")
            for row in case["checks"]:
                mark = "pass" if row["pass"] else "FAIL"
                print(f"  {mark}  {row['check']}: expected {row['expected']}, got {row['got']}")
        print(
            f"{result['checks_passed']}/{result['checks_total']} checks passed"
        )
    return 0 if result["pass"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpcac",
        description=(
            "Cardinality-constrained program toolkit: reformulations, "
            "stationarity certificates, constraint qualifications, and a "
            "desk-scale global solver."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--tol-zero", type=float, default=mo.TAU_ZERO,
                        help="zero-classification tolerance")
        sp.add_argument("--tol-feas", type=float, default=mo.TOL_FEAS,
                        help="feasibility tolerance")
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.add_argument("--debug-lp", action="store_true",
                        help="dump simplex tableaus to stderr")

    sp = sub.add_parser("validate", help="parse and check a problem file")
    sp.add_argument("file")
    common(sp)
    sp.set_defaults(fn=cmd_validate)

    sp = sub.add_parser("reformulate", help="print a reformulation")
    sp.add_argument("file")
    sp.add_argument("--form", choices=["relaxed", "mixed", "tightened"], required=True)
    sp.add_argument("--point", help='pair point "x=..;y=.." or @file')
    sp.add_argument("--I", help='index set, e.g. "1,3"')
    common(sp)
    sp.set_defaults(fn=cmd_reformulate)

    sp = sub.add_parser("check", help="stationarity certificate at a point")
    sp.add_argument("file")
    sp.add_argument("--point", required=True)
    sp.add_argument("--condition", choices=["kkt", "s", "m", "w"], required=True)
    sp.add_argument("--I", help="index set for --condition w")
    common(sp)
    sp.set_defaults(fn=cmd_check)

    sp = sub.add_parser("cq", help="constraint-qualification verdict at a point")
    sp.add_argument("file")
    sp.add_argument("--point", required=True)
    sp.add_argument("--which", choices=["licq", "mfcq", "acq", "gcq"], required=True)
    common(sp)
    sp.set_defaults(fn=cmd_cq)

    sp = sub.add_parser("solve", help="global solve by support enumeration")
    sp.add_argument("file")
    sp.add_argument("--starts", type=int, default=8)
    sp.add_argument("--emit-table", help="write the per-support table to a file")
    common(sp)
    sp.set_defaults(fn=cmd_solve)

    sp = sub.add_parser("corpus", help="run the built-in case catalog")
    sp.add_argument("--case", help="run a single case, e.g. ex4.3")
    sp.add_argument("--export-dir", help="write case problem/point files")
    common(sp)
    sp.set_defaults(fn=cmd_corpus)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "debug_lp", False):
        from . import lp as lpmod

        lpmod.DEBUG_TABLEAUS = True
    try:
        return args.fn(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
