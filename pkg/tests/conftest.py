"""Shared instance generators for the property suites.

Random instances are built backwards from the certificate they are meant to
exercise: feasible pair points are assembled coordinate by coordinate, and
KKT instances plant a multiplier vector first and then solve for the
objective's linear term, so the expected verdict is known by construction.
"""

import numpy as np
import pytest

from mpcac import expr as ex
from mpcac import model as mo
from mpcac.model import PairPoint, Problem


def random_pair_state(rng, n, alpha, force_i00=None):
    """Feasible (x, y) for the relaxed constraints with a controllable
    biactive set.  x gets `k <= alpha` nonzeros; exactly n - alpha of the
    zero coordinates carry y = 1, the rest split between 0 and (0, 1)."""
    k = int(rng.integers(0, alpha + 1))
    support = rng.permutation(n)[:k]
    x = np.zeros(n)
    x[support] = rng.choice([-1.0, 1.0], k) * rng.uniform(0.5, 1.5, k)
    zeros = [i for i in range(n) if i not in set(support.tolist())]
    y = np.zeros(n)
    ones = rng.permutation(zeros)[: n - alpha]
    y[ones] = 1.0
    rest = [i for i in zeros if i not in set(ones.tolist())]
    for i in rest:
        mode = rng.integers(0, 3) if force_i00 is None else (0 if force_i00 else 1)
        if mode == 0:
            y[i] = 0.0
        elif mode == 1:
            y[i] = rng.uniform(0.1, 0.9)
        else:
            y[i] = 1.0
    return x, y


def random_affine_rows(rng, n, x, count, equality):
    """Affine expressions over x (x-separable) that hold at x.

    Inequalities are active with probability one half.
    """
    rows = []
    for _ in range(count):
        a = rng.integers(-2, 3, n).astype(float)
        if not np.any(a):
            a[int(rng.integers(0, n))] = 1.0
        val = float(a @ x)
        if equality:
            rows.append(ex.affine(a, offset=-val))
        else:
            slack = 0.0 if rng.random() < 0.5 else float(rng.uniform(0.3, 1.5))
            rows.append(ex.affine(a, offset=-(val + slack)))
    return tuple(rows)


def random_affine_instance(rng, n=None):
    """Separable affine-X problem with a feasible pair point."""
    n = n or int(rng.integers(2, 6))
    alpha = int(rng.integers(1, n))
    x, y = random_pair_state(rng, n, alpha)
    g = random_affine_rows(rng, n, x, int(rng.integers(0, 3)), equality=False)
    h = random_affine_rows(rng, n, x, int(rng.integers(0, 2)), equality=True)
    f = ex.parse_expr("(+ " + " ".join(f"(^ x{i} 2)" for i in range(1, n + 1)) + ")", n)
    p = Problem(f"random-affine-{n}", n, alpha, f, g, h)
    return p, PairPoint(x, y)


def free_x_instance(rng, n=None):
    """No classical constraints: only the sparsity machinery."""
    n = n or int(rng.integers(2, 6))
    alpha = int(rng.integers(1, n))
    x, y = random_pair_state(rng, n, alpha)
    coefs = rng.integers(-3, 4, n).astype(float)
    f = ex.affine(coefs)
    return Problem(f"free-{n}", n, alpha, f), PairPoint(x, y)


def planted_kkt_instance(rng):
    """Problem and pair point where relaxed-problem KKT holds by design.

    Multipliers are drawn first; the objective is a unit quadratic whose
    linear term is back-solved so the stationarity rows close exactly.
    """
    n = int(rng.integers(2, 5))
    alpha = int(rng.integers(1, n))
    x, y = random_pair_state(rng, n, alpha)
    g = random_affine_rows(rng, n, x, int(rng.integers(0, 3)), equality=False)
    h = random_affine_rows(rng, n, x, int(rng.integers(0, 2)), equality=True)

    r = np.zeros(n)
    for e in g:
        active = abs(e.eval(x)) <= 1e-12
        lam = float(rng.uniform(0.0, 2.0)) if active else 0.0
        r += lam * ex.grad(e, x)
    for e in h:
        r += float(rng.uniform(-2.0, 2.0)) * ex.grad(e, x)
    lam_xi = rng.uniform(-2.0, 2.0, n)
    for i in range(n):
        if abs(x[i]) > 1e-12:
            lam_xi[i] = float(rng.uniform(0.0, 2.0)) / x[i]
    r += lam_xi * y

    c = -r - x  # objective gradient x + c equals -r at the point
    terms = " ".join(f"(^ x{i} 2)" for i in range(1, n + 1))
    f = ex.parse_expr(f"(+ (* 0.5 (+ {terms})) {ex.to_text(ex.affine(c))})", n)
    p = Problem(f"planted-{n}", n, alpha, f, g, h)
    return p, PairPoint(x, y)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def corpus_problem_points():
    """(problem, pair point) for every problem-backed catalog case."""
    from mpcac import corpus

    out = []
    for case in corpus.cases():
        if case.problem is None:
            continue
        for pt in case.points.values():
            if mo.is_feasible_relaxed(case.problem, pt):
                out.append((case.problem, pt))
    return out
