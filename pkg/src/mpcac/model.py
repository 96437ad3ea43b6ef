"""Cardinality-constrained problem model and its mechanical reformulations.

A problem is  min f(x)  over  X = {g(x) <= 0, h(x) = 0}  with the sparsity
bound nnz(x) <= alpha, 0 < alpha < n.  The continuous reformulation pairs x
with auxiliary variables y in [0,1]^n, demands e'y >= n - alpha and the
complementarities x_i y_i = 0; the mixed-integer variant makes y binary;
the tightened variant (at a pair point, for an admissible index set I)
replaces the complementarities with coordinate equalities.

All reformulation rows are materialized as expressions over 2n variables
(y_i is variable n+i), so evaluation and gradients reuse the expr module
everywhere downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import expr as ex
from .expr import Affine, Expr, Prod, Var, affine

TAU_ZERO = 1e-9  # |value| <= tau counts as zero in classifications
TOL_FEAS = 1e-8  # constraint residual tolerance

FORMAT_PROBLEM = "mpcac-1"


class CardinalityError(ValueError):
    pass


class ComplementarityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Problem:
    name: str
    n: int
    alpha: int
    f: Expr
    g: tuple = ()
    h: tuple = ()

    def __post_init__(self):
        if not (0 < self.alpha < self.n):
            raise ValueError(
                f"alpha must satisfy 0 < alpha < n (got alpha={self.alpha}, n={self.n})"
            )
        for e in (self.f, *self.g, *self.h):
            if e.max_var() > self.n:
                raise ValueError(
                    f"expression uses x{e.max_var()} but the problem has n={self.n}"
                )

    @property
    def m(self) -> int:
        return len(self.g)

    @property
    def p(self) -> int:
        return len(self.h)

    def x_affine(self) -> bool:
        return all(e.degree() <= 1 for e in (*self.g, *self.h))


@dataclass(frozen=True, eq=False)
class PairPoint:
    x: np.ndarray
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        if self.y is not None:
            y = np.asarray(self.y, dtype=float)
            if y.shape != self.x.shape:
                raise ValueError("x and y must have the same dimension")
            object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return len(self.x)

    def z(self) -> np.ndarray:
        """Stacked (x, y) vector in R^{2n}."""
        if self.y is None:
            raise ValueError("pair point has no y component")
        return np.concatenate([self.x, self.y])


@dataclass(frozen=True)
class IndexSets:
    """Sign-pattern classification of (x_i, y_i); 1-based sorted tuples."""

    i00: tuple
    i_pm0: tuple
    i0pm: tuple
    i0plus: tuple
    i0gt: tuple
    i01: tuple
    i0: tuple

    def __post_init__(self):
        n = len(self.i00) + len(self.i_pm0) + len(self.i0pm)
        universe = sorted(self.i00 + self.i_pm0 + self.i0pm)
        if universe != list(range(1, n + 1)):
            raise ValueError("i00, i_pm0, i0pm must partition 1..n")
        if not (set(self.i0plus) | set(self.i01)) <= set(self.i0gt) <= set(self.i0pm):
            raise ValueError("i0plus/i01/i0gt nesting violated")
        if tuple(sorted(set(self.i00) | set(self.i0pm))) != self.i0:
            raise ValueError("i0 must equal i00 union i0pm")


def index_sets(pt: PairPoint, tau: float = TAU_ZERO) -> IndexSets:
    """Classify each index by the sign pattern of (x_i, y_i) at tolerance tau."""
    if pt.y is None:
        raise ValueError("index classification needs the y component")
    i00, i_pm0, i0pm, i0plus, i0gt, i01 = [], [], [], [], [], []
    for i in range(1, pt.n + 1):
        xz = abs(pt.x[i - 1]) <= tau
        yv = pt.y[i - 1]
        yz = abs(yv) <= tau
        if not xz and not yz:
            raise ComplementarityError(
                f"x_{i} and y_{i} both nonzero at tolerance {tau}; "
                "sign-pattern classification undefined"
            )
        if xz and yz:
            i00.append(i)
        elif xz:
            i0pm.append(i)
            if yv > tau:
                i0gt.append(i)
                if abs(yv - 1.0) <= tau:
                    i01.append(i)
                elif yv < 1.0:
                    i0plus.append(i)
        else:
            i_pm0.append(i)
    return IndexSets(
        tuple(i00),
        tuple(i_pm0),
        tuple(i0pm),
        tuple(i0plus),
        tuple(i0gt),
        tuple(i01),
        tuple(sorted(i00 + i0pm)),
    )


def norm0(x, tau: float = TAU_ZERO) -> int:
    """Number of components with |x_i| > tau."""
    return int(np.sum(np.abs(np.asarray(x, dtype=float)) > tau))


def companion_y(x, alpha: int, tau: float = TAU_ZERO):
    """Canonical binary companion: y_i = 1 exactly on the zero components.

    Returns (y, unique); the companion is the only feasible binary choice
    precisely when nnz(x) equals alpha.
    """
    x = np.asarray(x, dtype=float)
    nnz = norm0(x, tau)
    if nnz > alpha:
        raise CardinalityError(f"nnz(x) = {nnz} exceeds the bound alpha = {alpha}")
    y = np.where(np.abs(x) <= tau, 1.0, 0.0)
    return y, nnz == alpha


# ---------------------------------------------------------------------------
# reformulations

RELAXED = "relaxed"
MIXED_INTEGER = "mixed_integer"
TIGHTENED = "tightened"


@dataclass(frozen=True, eq=False)
class ReformulatedProblem:
    kind: str
    problem: Problem
    nvars: int
    objective: Expr
    ineq: tuple
    ineq_labels: tuple
    eq: tuple
    eq_labels: tuple
    binary: tuple = ()  # 1-based variable indices flagged binary
    point: Optional[PairPoint] = None  # tightening data
    index_set: tuple = ()  # I of the tightening

    def ineq_values(self, z) -> np.ndarray:
        return np.array([e.eval(z) for e in self.ineq])

    def eq_values(self, z) -> np.ndarray:
        return np.array([e.eval(z) for e in self.eq])

    def is_feasible(self, z, tol: float = TOL_FEAS) -> bool:
        z = np.asarray(z, dtype=float)
        if self.ineq and self.ineq_values(z).max() > tol:
            return False
        if self.eq and np.abs(self.eq_values(z)).max() > tol:
            return False
        for j in self.binary:
            v = z[j - 1]
            if min(abs(v), abs(v - 1.0)) > tol:
                return False
        return True

    def describe(self) -> str:
        n = self.problem.n
        lines = [f"minimize    {ex.render_infix(self.objective, n)}"]
        head = "subject to  "
        for label, e in zip(self.ineq_labels, self.ineq):
            lines.append(f"{head}{label}: {ex.render_infix(e, n)} <= 0")
            head = " " * len(head)
        for label, e in zip(self.eq_labels, self.eq):
            lines.append(f"{head}{label}: {ex.render_infix(e, n)} = 0")
            head = " " * len(head)
        if self.binary:
            names = ", ".join(f"y{j - n}" for j in self.binary)
            lines.append(f"{head}{names} binary")
        return "\n".join(lines)


def _theta_row(p: Problem) -> Affine:
    coefs = [0.0] * p.n + [-1.0] * p.n
    return affine(coefs, offset=float(p.n - p.alpha))


def _unit_row(n2: int, j: int, sign: float, offset: float = 0.0) -> Affine:
    coefs = [0.0] * n2
    coefs[j - 1] = sign
    return affine(coefs, offset=offset)


def build_relaxed(p: Problem) -> ReformulatedProblem:
    """Continuous reformulation: theta <= 0, x_i y_i = 0, 0 <= y <= 1."""
    n, n2 = p.n, 2 * p.n
    ineq = list(p.g) + [_theta_row(p)]
    labels = [f"g{i + 1}" for i in range(p.m)] + ["theta"]
    for i in range(1, n + 1):
        ineq.append(_unit_row(n2, n + i, -1.0))  # -y_i <= 0
        labels.append(f"H{i}")
    for i in range(1, n + 1):
        ineq.append(_unit_row(n2, n + i, 1.0, offset=-1.0))  # y_i - 1 <= 0
        labels.append(f"Ht{i}")
    eq = list(p.h) + [Prod((Var(i), Var(n + i))) for i in range(1, n + 1)]
    eq_labels = [f"h{i + 1}" for i in range(p.p)] + [
        f"xi{i}" for i in range(1, n + 1)
    ]
    return ReformulatedProblem(
        RELAXED, p, n2, p.f, tuple(ineq), tuple(labels), tuple(eq), tuple(eq_labels)
    )


def build_mixed_integer(p: Problem) -> ReformulatedProblem:
    """Binary reformulation: theta <= 0, x_i y_i = 0, y binary."""
    n, n2 = p.n, 2 * p.n
    ineq = list(p.g) + [_theta_row(p)]
    labels = [f"g{i + 1}" for i in range(p.m)] + ["theta"]
    eq = list(p.h) + [Prod((Var(i), Var(n + i))) for i in range(1, n + 1)]
    eq_labels = [f"h{i + 1}" for i in range(p.p)] + [
        f"xi{i}" for i in range(1, n + 1)
    ]
    return ReformulatedProblem(
        MIXED_INTEGER,
        p,
        n2,
        p.f,
        tuple(ineq),
        tuple(labels),
        tuple(eq),
        tuple(eq_labels),
        binary=tuple(range(n + 1, n2 + 1)),
    )


def relax_binary(rp: ReformulatedProblem) -> ReformulatedProblem:
    """Replace the binary flags of a mixed-integer build with [0,1] bounds."""
    if rp.kind != MIXED_INTEGER:
        raise ValueError("relax_binary applies to mixed-integer builds")
    return build_relaxed(rp.problem)


def admissible_I_range(pt: PairPoint, tau: float = TAU_ZERO):
    """(I_min, I_max) admissible for tightening; I_00 indices are free."""
    s = index_sets(pt, tau)
    i_min = tuple(sorted(set(s.i0plus) | set(s.i01)))
    return i_min, s.i0


def _check_I(pt: PairPoint, I, tau: float = TAU_ZERO):
    i_min, i_max = admissible_I_range(pt, tau)
    iset = set(I)
    if len(iset) != len(tuple(I)):
        raise ValueError("index set I has duplicates")
    if not set(i_min) <= iset:
        raise ValueError(f"I must contain {set(i_min)} (indices with x=0, y>0)")
    if not iset <= set(i_max):
        raise ValueError(f"I must be a subset of the zero set {set(i_max)}")
    return tuple(sorted(iset))


def build_tightened(
    p: Problem, pt: PairPoint, I, tau: float = TAU_ZERO, tol: float = TOL_FEAS
) -> ReformulatedProblem:
    """Tightened problem at pt: fixes y_i = 0 on I00 and the nonzero-x set,
    keeps y_i >= 0 only where y is positive, and fixes x_i = 0 on I."""
    if not is_feasible_relaxed(p, pt, tol):
        raise ValueError("point is not feasible for the relaxed problem")
    I = _check_I(pt, I, tau)
    s = index_sets(pt, tau)
    n, n2 = p.n, 2 * p.n

    ineq = list(p.g) + [_theta_row(p)]
    labels = [f"g{i + 1}" for i in range(p.m)] + ["theta"]
    for i in range(1, n + 1):
        ineq.append(_unit_row(n2, n + i, 1.0, offset=-1.0))
        labels.append(f"Ht{i}")
    for i in sorted(set(s.i0plus) | set(s.i01)):
        ineq.append(_unit_row(n2, n + i, -1.0))
        labels.append(f"H{i}")

    eq = list(p.h)
    eq_labels = [f"h{i + 1}" for i in range(p.p)]
    for i in sorted(set(s.i00) | set(s.i_pm0)):
        eq.append(_unit_row(n2, n + i, -1.0))
        eq_labels.append(f"H{i}")
    for i in I:
        eq.append(_unit_row(n2, i, 1.0))
        eq_labels.append(f"G{i}")

    return ReformulatedProblem(
        TIGHTENED,
        p,
        n2,
        p.f,
        tuple(ineq),
        tuple(labels),
        tuple(eq),
        tuple(eq_labels),
        point=pt,
        index_set=I,
    )


# ---------------------------------------------------------------------------
# feasibility

def is_feasible_mpcac(p: Problem, x, tol: float = TOL_FEAS, tau: float = TAU_ZERO) -> bool:
    x = np.asarray(x, dtype=float)
    if norm0(x, tau) > p.alpha:
        return False
    if any(e.eval(x) > tol for e in p.g):
        return False
    if any(abs(e.eval(x)) > tol for e in p.h):
        return False
    return True


def is_feasible_relaxed(p: Problem, pt: PairPoint, tol: float = TOL_FEAS) -> bool:
    if pt.y is None:
        return False
    return build_relaxed(p).is_feasible(pt.z(), tol)


# ---------------------------------------------------------------------------
# JSON interfaces

def problem_to_dict(p: Problem) -> dict:
    return {
        "format": FORMAT_PROBLEM,
        "name": p.name,
        "n": p.n,
        "alpha": p.alpha,
        "objective": ex.to_text(p.f),
        "g": [ex.to_text(e) for e in p.g],
        "h": [ex.to_text(e) for e in p.h],
    }


def problem_from_dict(d: dict) -> Problem:
    if d.get("format") != FORMAT_PROBLEM:
        raise ValueError(f"unsupported problem format {d.get('format')!r}")
    n = int(d["n"])
    return Problem(
        name=str(d.get("name", "unnamed")),
        n=n,
        alpha=int(d["alpha"]),
        f=ex.parse_expr(d["objective"], n),
        g=tuple(ex.parse_expr(s, n) for s in d.get("g", [])),
        h=tuple(ex.parse_expr(s, n) for s in d.get("h", [])),
    )


def load_problem(path) -> Problem:
    with open(path, "r", encoding="utf-8") as fh:
        return problem_from_dict(json.load(fh))


def save_problem(p: Problem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem_to_dict(p), fh, indent=2, sort_keys=True)
        fh.write("\n")


def point_to_dict(pt: PairPoint) -> dict:
    d = {"format": FORMAT_PROBLEM, "x": [float(v) for v in pt.x]}
    if pt.y is not None:
        d["y"] = [float(v) for v in pt.y]
    return d


def point_from_dict(d: dict) -> PairPoint:
    if d.get("format", FORMAT_PROBLEM) != FORMAT_PROBLEM:
        raise ValueError(f"unsupported point format {d.get('format')!r}")
    y = d.get("y")
    return PairPoint(np.asarray(d["x"], dtype=float), None if y is None else np.asarray(y, dtype=float))


def load_point(path) -> PairPoint:
    with open(path, "r", encoding="utf-8") as fh:
        return point_from_dict(json.load(fh))
