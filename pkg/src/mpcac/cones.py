"""Polyhedral cone algebra and constraint-qualification certifiers.

Cones live in halfspace form {d : E d = 0, A d <= 0}.  Generators (extreme
rays plus a lineality basis) are extracted by an incremental double
description pass: start from the nullspace of E, insert inequality rows one
at a time, first spending lineality against rows that cut it, then
combining ray pairs across the new halfspace and pruning non-extreme
candidates by an active-row rank test.  Everything is capped at ambient
dimension 12; desk-scale verification is the point here, not volume.

Tangent cones of affine-with-complementarity sets are finite unions: one
polyhedral piece per way of splitting the biactive indices (x_i = y_i = 0)
into an x-fixed part and a y-fixed part.  ACQ compares that union with the
linearized cone; GCQ compares the polars.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Union

import numpy as np

from . import expr as ex
from . import lp as lpmod
from . import model as mo
from .model import PairPoint, Problem

EPS_CONE = 1e-9
RANK_FACTOR = 1e-8
DIM_CAP = 12
I00_CAP = 12
SAMPLE_COUNT = 1000
SAMPLE_SEED = 20240

EXACT = "exact"
SAMPLED = "sampled"


class ConeDimensionError(ValueError):
    pass


class NonaffineError(ValueError):
    """Raised when a certifier that needs affine data sees a nonlinear row."""


@dataclass(eq=False)
class PolyhedralCone:
    eq: np.ndarray  # rows E with E d = 0
    le: np.ndarray  # rows A with A d <= 0
    dim: int
    label: str = ""
    _gens: Optional[tuple] = field(default=None, repr=False)

    @staticmethod
    def build(eq, le, dim: int, label: str = "") -> "PolyhedralCone":
        eq = np.asarray(eq, dtype=float).reshape(-1, dim) if eq is not None and len(eq) else np.zeros((0, dim))
        le = np.asarray(le, dtype=float).reshape(-1, dim) if le is not None and len(le) else np.zeros((0, dim))
        return PolyhedralCone(eq, le, dim, label)

    def contains(self, d, tol: float = EPS_CONE) -> bool:
        d = np.asarray(d, dtype=float)
        scale = max(1.0, float(np.abs(d).max(initial=0.0)))
        row_scale = 1.0
        for rows in (self.eq, self.le):
            if rows.size:
                row_scale = max(row_scale, float(np.abs(rows).max()))
        bound = tol * scale * row_scale * 10.0
        if self.eq.size and np.abs(self.eq @ d).max() > bound:
            return False
        if self.le.size and (self.le @ d).max() > bound:
            return False
        return True


@dataclass(eq=False)
class ConeUnion:
    pieces: list
    labels: list

    def contains(self, d, tol: float = EPS_CONE) -> bool:
        return any(c.contains(d, tol) for c in self.pieces)


# ---------------------------------------------------------------------------
# generators

def _nullspace(rows: np.ndarray, dim: int) -> np.ndarray:
    if rows.size == 0:
        return np.eye(dim)
    u, s, vt = np.linalg.svd(rows, full_matrices=True)
    tol = max(rows.shape) * (s[0] if s.size else 0.0) * 1e-12
    rank = int(np.sum(s > max(tol, 1e-300)))
    return vt[rank:].copy()


def _orthonormalize(vecs: list, dim: int) -> list:
    out: list = []
    for v in vecs:
        w = v.copy()
        for u in out:
            w = w - (u @ w) * u
        nrm = np.linalg.norm(w)
        if nrm > 1e-10:
            out.append(w / nrm)
    return out


def _project_off(v: np.ndarray, basis: list) -> np.ndarray:
    w = v.copy()
    for u in basis:
        w = w - (u @ w) * u
    return w


def _rank(rows: np.ndarray) -> int:
    if rows.size == 0:
        return 0
    tol = RANK_FACTOR * max(1.0, float(np.abs(rows).max()))
    return int(np.linalg.matrix_rank(rows, tol=tol))


def generators(cone: PolyhedralCone):
    """(extreme rays, lineality basis); cached.  Rays are unit vectors.

    Exact on the small, well-scaled cones this library builds; every
    returned ray is re-verified against the halfspace form.
    """
    if cone._gens is not None:
        return cone._gens
    if cone.dim > DIM_CAP:
        raise ConeDimensionError(
            f"generator extraction certified only up to dimension {DIM_CAP}"
        )
    dim = cone.dim
    eq_rows = [r / np.linalg.norm(r) for r in cone.eq if np.linalg.norm(r) > EPS_CONE]
    le_rows = [r / np.linalg.norm(r) for r in cone.le if np.linalg.norm(r) > EPS_CONE]

    lineality = [v for v in _nullspace(np.array(eq_rows) if eq_rows else np.zeros((0, dim)), dim)]
    rays: list = []
    processed: list = []  # normalized rows seen so far, eq rows first

    def extreme(candidate: np.ndarray) -> bool:
        active = [r for r in processed if abs(r @ candidate) <= 1e-8]
        have = _rank(np.array(eq_rows + active)) if (eq_rows or active) else 0
        return have == dim - len(lineality) - 1

    processed.extend(eq_rows)
    for a in le_rows:
        al = np.array([a @ l for l in lineality]) if lineality else np.zeros(0)
        if al.size and np.abs(al).max() > EPS_CONE:
            j = int(np.argmax(np.abs(al)))
            l0 = lineality[j]
            a0 = al[j]
            rest = [
                lineality[k] - (al[k] / a0) * l0
                for k in range(len(lineality))
                if k != j
            ]
            lineality = _orthonormalize(rest, dim)
            new_rays = []
            for r in rays:
                w = _project_off(r - ((a @ r) / a0) * l0, lineality)
                nrm = np.linalg.norm(w)
                if nrm > 1e-9:
                    new_rays.append(w / nrm)
            r0 = _project_off(-l0 if a0 > 0 else l0, lineality)
            nrm = np.linalg.norm(r0)
            if nrm > 1e-9:
                new_rays.append(r0 / nrm)
            rays = _dedupe(new_rays)
        else:
            s = np.array([a @ r for r in rays])
            keep = [rays[k] for k in range(len(rays)) if s[k] <= EPS_CONE]
            plus = [k for k in range(len(rays)) if s[k] > EPS_CONE]
            minus = [k for k in range(len(rays)) if s[k] < -EPS_CONE]
            combos = []
            for kp in plus:
                for km in minus:
                    w = s[kp] * rays[km] - s[km] * rays[kp]
                    w = _project_off(w, lineality)
                    nrm = np.linalg.norm(w)
                    if nrm > 1e-9:
                        combos.append(w / nrm)
            processed.append(a)
            rays = _dedupe(keep + [w for w in combos if extreme(w)])
            continue
        processed.append(a)

    rays = [r for r in rays if cone.contains(r)]
    order = np.lexsort(np.array(rays).T[::-1]) if rays else []
    rays = [rays[i] for i in order] if len(rays) else []
    lin = [l * (1.0 if _first_nonzero_sign(l) >= 0 else -1.0) for l in lineality]
    order = np.lexsort(np.array(lin).T[::-1]) if lin else []
    lin = [lin[i] for i in order] if len(lin) else []
    cone._gens = (rays, lin)
    return cone._gens


def _first_nonzero_sign(v: np.ndarray) -> float:
    for x in v:
        if abs(x) > 1e-12:
            return 1.0 if x > 0 else -1.0
    return 1.0


def _dedupe(rays: list) -> list:
    out: list = []
    for r in rays:
        if not any(r @ q >= 1.0 - 1e-9 for q in out):
            out.append(r)
    return out


def polar(cone: PolyhedralCone) -> PolyhedralCone:
    """Halfspace form of the polar: rows are the generators of the input."""
    rays, lin = generators(cone)
    eq = np.array(lin) if lin else np.zeros((0, cone.dim))
    le = np.array(rays) if rays else np.zeros((0, cone.dim))
    return PolyhedralCone.build(eq, le, cone.dim, label=f"polar({cone.label})")


def polar_union(union: ConeUnion, dim: Optional[int] = None) -> PolyhedralCone:
    """Polar of a finite union = intersection of the piece polars."""
    if not union.pieces:
        raise ValueError("empty union has no well-defined ambient dimension")
    dim = dim or union.pieces[0].dim
    eq_rows = []
    le_rows = []
    for c in union.pieces:
        rays, lin = generators(c)
        eq_rows.extend(lin)
        le_rows.extend(rays)
    return PolyhedralCone.build(
        np.array(eq_rows) if eq_rows else None,
        np.array(le_rows) if le_rows else None,
        dim,
        label="polar(union)",
    )


def cones_equal(a: PolyhedralCone, b: PolyhedralCone, tol: float = EPS_CONE) -> bool:
    """Mutual inclusion via generator membership (LP-free and exact)."""

    def inside(c: PolyhedralCone, other: PolyhedralCone) -> bool:
        rays, lin = generators(c)
        for r in rays:
            if not other.contains(r, tol):
                return False
        for l in lin:
            if not (other.contains(l, tol) and other.contains(-l, tol)):
                return False
        return True

    return inside(a, b) and inside(b, a)


def _union_generators(c: PolyhedralCone):
    rays, lin = generators(c)
    gens = list(rays)
    for l in lin:
        gens.append(l)
        gens.append(-l)
    return gens


def union_equals_cone(union: ConeUnion, cone: PolyhedralCone, tol: float = EPS_CONE):
    """(equal, flag): flag is "exact" unless acceptance relied on sampling.

    The cone is inside the union when each of its generators lands in some
    piece and, whenever generators straddle different pieces, no conic
    combination escapes: pairwise generator sums are probed exactly, then
    random conic combinations; a found violator refutes exactly, exhaustion
    accepts with the sampled flag.
    """
    for piece in union.pieces:
        for g in _union_generators(piece):
            if not cone.contains(g, tol):
                return False, EXACT

    gens = _union_generators(cone)
    if not gens:
        return True, EXACT
    homes = []
    for g in gens:
        home = {k for k, piece in enumerate(union.pieces) if piece.contains(g, tol)}
        if not home:
            return False, EXACT
        homes.append(home)
    common = set.intersection(*homes)
    if common:
        return True, EXACT

    for i, j in combinations(range(len(gens)), 2):
        v = gens[i] + gens[j]
        nrm = np.linalg.norm(v)
        if nrm < 1e-9:
            continue
        v = v / nrm
        if cone.contains(v, tol) and not union.contains(v, tol):
            return False, EXACT

    rng = np.random.default_rng(SAMPLE_SEED)
    gmat = np.array(gens)
    for _ in range(SAMPLE_COUNT):
        v = rng.random(len(gens)) @ gmat
        nrm = np.linalg.norm(v)
        if nrm < 1e-9:
            continue
        v = v / nrm
        if cone.contains(v, tol) and not union.contains(v, tol):
            return False, EXACT
    return True, SAMPLED


# ---------------------------------------------------------------------------
# affine sets with complementarity

@dataclass(frozen=True, eq=False)
class AffineComplementaritySet:
    """{(x, y) : A_eq z = b_eq, A_le z <= b_le, x_i y_i = 0}, z = (x, y)."""

    n: int
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_le: np.ndarray
    b_le: np.ndarray

    @staticmethod
    def build(n, a_eq=None, b_eq=None, a_le=None, b_le=None) -> "AffineComplementaritySet":
        def rows(a, b):
            if a is None:
                return np.zeros((0, 2 * n)), np.zeros(0)
            a = np.asarray(a, dtype=float).reshape(-1, 2 * n)
            return a, np.atleast_1d(np.asarray(b, dtype=float))

        a_eq, b_eq = rows(a_eq, b_eq)
        a_le, b_le = rows(a_le, b_le)
        return AffineComplementaritySet(n, a_eq, b_eq, a_le, b_le)

    @staticmethod
    def from_problem(p: Problem) -> "AffineComplementaritySet":
        """Relaxed feasible set of a problem whose g, h are affine."""
        if not p.x_affine():
            raise NonaffineError(
                "tangent-cone and ACQ/GCQ certification covers affine "
                "constraints only; this problem has a nonlinear row"
            )
        n, n2 = p.n, 2 * p.n
        zero = np.zeros(n2)
        eq_rows, eq_rhs = [], []
        for e in p.h:
            gr = np.zeros(n2)
            gr[:n] = ex.grad(e, np.zeros(n))
            eq_rows.append(gr)
            eq_rhs.append(-e.eval(np.zeros(n)))
        le_rows, le_rhs = [], []
        for e in p.g:
            gr = np.zeros(n2)
            gr[:n] = ex.grad(e, np.zeros(n))
            le_rows.append(gr)
            le_rhs.append(-e.eval(np.zeros(n)))
        theta = zero.copy()
        theta[n:] = -1.0
        le_rows.append(theta)
        le_rhs.append(-(float(p.n - p.alpha)))
        for i in range(n):
            row = np.zeros(n2)
            row[n + i] = -1.0
            le_rows.append(row)
            le_rhs.append(0.0)
        for i in range(n):
            row = np.zeros(n2)
            row[n + i] = 1.0
            le_rows.append(row)
            le_rhs.append(1.0)
        return AffineComplementaritySet.build(
            n, np.array(eq_rows) if eq_rows else None, np.array(eq_rhs),
            np.array(le_rows), np.array(le_rhs),
        )

    def separable(self) -> bool:
        """Every affine row touches only x-variables or only y-variables."""
        for rows in (self.a_eq, self.a_le):
            for r in rows:
                if np.abs(r[: self.n]).max(initial=0.0) > 0 and np.abs(
                    r[self.n :]
                ).max(initial=0.0) > 0:
                    return False
        return True

    def is_feasible(self, pt: PairPoint, tol: float = mo.TOL_FEAS) -> bool:
        z = pt.z()
        if self.a_eq.size and np.abs(self.a_eq @ z - self.b_eq).max() > tol:
            return False
        if self.a_le.size and (self.a_le @ z - self.b_le).max() > tol:
            return False
        return float(np.abs(z[: self.n] * z[self.n :]).max(initial=0.0)) <= tol


Target = Union[Problem, AffineComplementaritySet]


def _as_set(target: Target) -> AffineComplementaritySet:
    if isinstance(target, AffineComplementaritySet):
        return target
    return AffineComplementaritySet.from_problem(target)


def linearized_cone(target: Target, pt: PairPoint, tol: float = mo.TOL_FEAS) -> PolyhedralCone:
    """Gradient cone of the active constraints, complementarity included."""
    s = _as_set(target)
    _require_set_feasible(s, pt, tol)
    z = pt.z()
    n = s.n
    eq_rows = [r for r in s.a_eq]
    for i in range(n):
        row = np.zeros(2 * n)
        row[i] = z[n + i]  # y_i
        row[n + i] = z[i]  # x_i
        eq_rows.append(row)
    le_rows = [
        s.a_le[k]
        for k in range(s.a_le.shape[0])
        if s.a_le[k] @ z >= s.b_le[k] - tol
    ]
    return PolyhedralCone.build(
        np.array(eq_rows) if eq_rows else None,
        np.array(le_rows) if le_rows else None,
        2 * n,
        label="linearized",
    )


def _require_set_feasible(s: AffineComplementaritySet, pt: PairPoint, tol: float):
    if pt.y is None:
        raise ValueError("pair point needs a y component")
    if not s.is_feasible(pt, tol):
        raise ValueError("point is not feasible for the set")


def tangent_cone_pieces(
    target: Target,
    pt: PairPoint,
    cap: int = I00_CAP,
    tol: float = mo.TOL_FEAS,
    tau: float = mo.TAU_ZERO,
) -> ConeUnion:
    """One polyhedral piece per split of the biactive indices.

    Near the point, indices with y_i != 0 force x_i = 0 and vice versa; each
    biactive index branches into "freeze x_i" or "freeze y_i".  For affine
    data every piece is polyhedral, so its tangent cone is its own
    linearized cone and the union is the exact tangent cone.
    """
    s = _as_set(target)
    _require_set_feasible(s, pt, tol)
    z = pt.z()
    n = s.n
    sets = mo.index_sets(pt, tau)
    if len(sets.i00) > cap:
        raise ValueError(f"{len(sets.i00)} biactive indices exceed the cap {cap}")

    active_le = [
        s.a_le[k]
        for k in range(s.a_le.shape[0])
        if s.a_le[k] @ z >= s.b_le[k] - tol
    ]
    pieces = []
    labels = []
    subsets = []
    for size in range(len(sets.i00) + 1):
        subsets.extend(combinations(sets.i00, size))
    for zx in subsets:
        x_fixed = sorted(set(sets.i0pm) | set(zx))
        y_fixed = sorted(set(sets.i_pm0) | (set(sets.i00) - set(zx)))
        eq_rows = [r for r in s.a_eq]
        for i in x_fixed:
            row = np.zeros(2 * n)
            row[i - 1] = 1.0
            eq_rows.append(row)
        for i in y_fixed:
            row = np.zeros(2 * n)
            row[n + i - 1] = 1.0
            eq_rows.append(row)
        label = f"x0={list(x_fixed)};y0={list(y_fixed)}"
        pieces.append(
            PolyhedralCone.build(
                np.array(eq_rows) if eq_rows else None,
                np.array(active_le) if active_le else None,
                2 * n,
                label=label,
            )
        )
        labels.append(label)
    return ConeUnion(pieces, labels)


# ---------------------------------------------------------------------------
# constraint qualifications

@dataclass
class CqReport:
    which: str
    verdict: bool
    flag: str = EXACT
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format": "mpcac-report-1",
            "which": self.which,
            "verdict": "holds" if self.verdict else "fails",
            "flag": self.flag,
            "detail": self.detail,
        }


def _gen_lists(c: PolyhedralCone):
    rays, lin = generators(c)
    return {
        "rays": [[float(v) for v in r] for r in rays],
        "lineality": [[float(v) for v in l] for l in lin],
    }


def check_acq(target: Target, pt: PairPoint, cap: int = I00_CAP,
              tol: float = mo.TOL_FEAS, tau: float = mo.TAU_ZERO) -> CqReport:
    """Tangent cone equals linearized cone (exact union comparison)."""
    union = tangent_cone_pieces(target, pt, cap, tol, tau)
    dcone = linearized_cone(target, pt, tol)
    equal, flag = union_equals_cone(union, dcone)
    return CqReport(
        "acq",
        equal,
        flag,
        {
            "pieces": [_gen_lists(c) | {"label": c.label} for c in union.pieces],
            "linearized": _gen_lists(dcone),
        },
    )


def check_gcq(target: Target, pt: PairPoint, cap: int = I00_CAP,
              tol: float = mo.TOL_FEAS, tau: float = mo.TAU_ZERO) -> CqReport:
    """Polar of the tangent union equals polar of the linearized cone."""
    union = tangent_cone_pieces(target, pt, cap, tol, tau)
    dcone = linearized_cone(target, pt, tol)
    pu = polar_union(union)
    pd = polar(dcone)
    equal = cones_equal(pu, pd)
    return CqReport(
        "gcq",
        equal,
        EXACT,
        {"polar_tangent": _gen_lists(pu), "polar_linearized": _gen_lists(pd)},
    )


def _relaxed_active_gradients(p: Problem, pt: PairPoint, tol: float):
    rp = mo.build_relaxed(p)
    z = pt.z()
    eq_rows = [ex.grad(e, z) for e in rp.eq]
    le_rows = [ex.grad(e, z) for e in rp.ineq if e.eval(z) >= -tol]
    return eq_rows, le_rows


def check_licq(p: Problem, pt: PairPoint, tol: float = mo.TOL_FEAS) -> CqReport:
    """Active relaxed-problem gradients linearly independent."""
    if not mo.is_feasible_relaxed(p, pt, tol):
        raise ValueError("point is not feasible for the relaxed problem")
    eq_rows, le_rows = _relaxed_active_gradients(p, pt, tol)
    rows = np.array(eq_rows + le_rows)
    verdict = _rank(rows) == rows.shape[0]
    return CqReport("licq", verdict, EXACT, {"active_rows": int(rows.shape[0])})


def check_mfcq(p: Problem, pt: PairPoint, tol: float = mo.TOL_FEAS) -> CqReport:
    """Independent equality gradients plus a strict interior direction.

    The direction search maximizes a margin s with A d + s e <= 0, E d = 0,
    s <= 1; the condition holds when the optimum exceeds the LP tolerance.
    """
    if not mo.is_feasible_relaxed(p, pt, tol):
        raise ValueError("point is not feasible for the relaxed problem")
    eq_rows, le_rows = _relaxed_active_gradients(p, pt, tol)
    erows = np.array(eq_rows) if eq_rows else np.zeros((0, 2 * p.n))
    if _rank(erows) != erows.shape[0]:
        return CqReport("mfcq", False, EXACT, {"reason": "dependent equality gradients"})
    nvar = 2 * p.n + 1
    a_le = []
    b_le = []
    for r in le_rows:
        a_le.append(np.concatenate([r, [1.0]]))
        b_le.append(0.0)
    cap_row = np.zeros(nvar)
    cap_row[-1] = 1.0
    a_le.append(cap_row)
    b_le.append(1.0)
    a_eq = (
        np.hstack([erows, np.zeros((erows.shape[0], 1))])
        if erows.size
        else None
    )
    c = np.zeros(nvar)
    c[-1] = -1.0
    lp = lpmod.LinearProgram.build(
        c,
        a_eq=a_eq,
        b_eq=np.zeros(erows.shape[0]) if erows.size else None,
        a_le=np.array(a_le),
        b_le=np.array(b_le),
        nonneg=np.zeros(nvar, dtype=bool),
    )
    out = lpmod.lp_solve(lp)
    margin = float(out.x[-1]) if out.status == lpmod.OPTIMAL else 0.0
    return CqReport("mfcq", margin > lpmod.EPS_LP, EXACT, {"margin": margin})


def cq_chain(p: Problem, pt: PairPoint, cap: int = I00_CAP,
             tol: float = mo.TOL_FEAS, tau: float = mo.TAU_ZERO) -> dict:
    """All four verdicts where admissible; ACQ/GCQ are None when refused."""
    out = {
        "licq": check_licq(p, pt, tol).verdict,
        "mfcq": check_mfcq(p, pt, tol).verdict,
        "acq": None,
        "gcq": None,
        "acq_flag": None,
    }
    if p.x_affine() and 2 * p.n <= DIM_CAP:
        try:
            acq = check_acq(p, pt, cap, tol, tau)
            out["acq"] = acq.verdict
            out["acq_flag"] = acq.flag
            out["gcq"] = check_gcq(p, pt, cap, tol, tau).verdict
        except ValueError:
            pass
    return out
