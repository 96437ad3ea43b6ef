"""Acceptance gate: one test per criterion, each at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -rA` to see the per-criterion
pass lines.  Timing-sensitive criteria assume the compiled kernels; the
pure-Python fallback is correct but slower.
"""

import json
import subprocess
import sys
import time
from itertools import combinations

import numpy as np

from conftest import free_x_instance, planted_kkt_instance, random_affine_instance
from mpcac import cones as co
from mpcac import corpus
from mpcac import expr as ex
from mpcac import model as mo
from mpcac import solver as sv
from mpcac import stationarity as st
from mpcac.model import PairPoint, Problem


def _report(num, text):
    print(f"ACCEPTANCE {num}: PASS - {text}")


def _admissible_sets(pt):
    lo, _ = mo.admissible_I_range(pt)
    free = mo.index_sets(pt).i00
    for size in range(len(free) + 1):
        for sub in combinations(free, size):
            yield tuple(sorted(set(lo) | set(sub)))


def test_criterion_1_linear_parabola_reproduction():
    p = corpus.linear_parabola()
    pt = PairPoint([0.0, 0.0], [1.0, 0.0])
    t0 = time.perf_counter()
    rep = sv.solve_brute(p)
    kkt = st.check_kkt_relaxed(p, pt)
    m_cert = st.check_m_stationary(p, pt)
    s_cert = st.check_s_stationary(p, pt)
    prof = st.stationarity_profile(p, pt)
    elapsed = time.perf_counter() - t0

    assert float(np.abs(rep.best_x).max()) <= 1e-7
    assert abs(rep.best_objective) <= 1e-7
    assert kkt.verdict is False
    assert m_cert.verdict is True
    assert s_cert.verdict is False
    assert prof.minimal == [(1, 2)]
    assert m_cert.stationarity_residual <= 1e-7
    assert m_cert.complementarity_residual <= 1e-7
    assert elapsed < 1.0, f"took {elapsed:.2f}s"
    _report(1, f"solution pair verdicts and profile reproduced in {elapsed:.2f}s")


def test_criterion_2_chain_family_iff():
    t0 = time.perf_counter()
    checked = 0
    for n in (3, 4, 5, 6):
        p = corpus.sparse_chain(n)
        pt = PairPoint(np.zeros(n), np.eye(n)[0])
        free = mo.index_sets(pt).i00
        assert len(free) == n - 1
        for I in _admissible_sets(pt):
            holds = st.check_w_stationary(p, pt, I).verdict
            assert holds == (n in I), (n, I, holds)
            checked += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0, f"took {elapsed:.2f}s"
    _report(2, f"{checked} index sets over n=3..6, stationary iff n in I, {elapsed:.2f}s")


def test_criterion_3_tangent_vs_linearized_cones():
    s = corpus.crossing_bound_set()
    pt = PairPoint([0.0], [0.0])
    union = co.tangent_cone_pieces(s, pt)
    tangent_target = co.PolyhedralCone.build([[0.0, 1.0]], [[-1.0, 0.0]], 2)
    equal, flag = co.union_equals_cone(union, tangent_target)
    assert equal and flag == co.EXACT

    d = co.linearized_cone(s, pt)
    wedge = co.PolyhedralCone.build(None, [[0.0, -1.0], [-1.0, 1.0]], 2)
    assert co.cones_equal(d, wedge)

    assert co.check_gcq(s, pt).verdict is False

    rays, lin = co.generators(d)
    got = {tuple(np.round(r / np.abs(r).max(), 9)) for r in rays}
    assert got == {(1.0, 0.0), (1.0, 1.0)} and not lin
    t_rays = set()
    for piece in union.pieces:
        pr, pl = co.generators(piece)
        t_rays |= {tuple(np.round(r / np.abs(r).max(), 9)) for r in pr}
        assert not pl
    assert t_rays == {(1.0, 0.0)}
    _report(3, "tangent union, linearized wedge, generators, and GCQ failure exact")


def test_criterion_4_gcq_on_separable_affine_instances():
    failures = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        p, pt = random_affine_instance(rng, n=int(rng.integers(2, 6)))
        assert co.AffineComplementaritySet.from_problem(p).separable()
        assert len(mo.index_sets(pt).i00) <= 6
        if not co.check_gcq(p, pt).verdict:
            failures += 1
    assert failures == 0
    _report(4, "GCQ holds on all 50 separable affine instances")


def test_criterion_5_acq_iff_biactive_empty():
    failures = 0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        p, pt = free_x_instance(rng)
        expected = mo.index_sets(pt).i00 == ()
        if co.check_acq(p, pt).verdict != expected:
            failures += 1
    assert failures == 0
    _report(5, "ACQ equals empty-biactive-set on all 50 unconstrained instances")


def test_criterion_6_kkt_implies_weak_everywhere():
    failures = 0
    count = 0
    for seed in range(100):
        rng = np.random.default_rng(2000 + seed)
        p, pt = planted_kkt_instance(rng)
        kkt = st.check_kkt_relaxed(p, pt).verdict
        s_v = st.check_s_stationary(p, pt).verdict
        if not kkt or s_v != kkt:
            failures += 1
            continue
        for I in _admissible_sets(pt):
            count += 1
            if not st.check_w_stationary(p, pt, I).verdict:
                failures += 1
    assert failures == 0
    _report(6, f"100 planted KKT points: S equals KKT, all {count} weak checks hold")


def test_criterion_7_tightened_oracle_equivalence():
    disagreements = 0
    triples = []
    for case in corpus.cases():
        if case.problem is None:
            continue
        for pt in case.points.values():
            if not mo.is_feasible_relaxed(case.problem, pt):
                continue
            for I in _admissible_sets(pt):
                triples.append((case.problem, pt, I))
    rng = np.random.default_rng(3000)
    random_triples = []
    while len(random_triples) < 50:
        p, pt = planted_kkt_instance(rng)
        if rng.random() < 0.5:
            coefs = rng.integers(-3, 4, p.n).astype(float)
            p = Problem(p.name, p.n, p.alpha, ex.affine(coefs), p.g, p.h)
        options = list(_admissible_sets(pt))
        I = options[int(rng.integers(0, len(options)))]
        random_triples.append((p, pt, I))
    for p, pt, I in triples + random_triples:
        reduced = st.check_w_stationary(p, pt, I).verdict
        direct, _ = st.kkt_reformulated(mo.build_tightened(p, pt, I), pt.z())
        if reduced != direct:
            disagreements += 1
    assert disagreements == 0
    _report(
        7,
        f"{len(triples)} catalog and {len(random_triples)} random triples: "
        "reduced search equals tightened-problem KKT",
    )


def test_criterion_8_support_vs_binary_enumeration():
    problems = [
        corpus.quad_shifted(),
        corpus.quad_two_targets(),
        corpus.linear_parabola(),
        corpus.sparse_chain(3),
    ]
    for p in problems:
        brute = sv.solve_brute(p).best_objective
        binary = sv.solve_mixed_integer(p).best_objective
        assert abs(brute - binary) <= 1e-6, (p.name, brute, binary)
    _report(8, "optimal values agree within 1e-6 on all four catalog problems")


def test_criterion_9_gradient_integrity():
    rng = np.random.default_rng(4000)
    worst = 0.0
    count = 0
    for case in corpus.cases():
        if case.problem is None:
            continue
        p = case.problem
        for e in (p.f, *p.g, *p.h):
            for _ in range(100):
                x = rng.uniform(-2.0, 2.0, p.n)
                worst = max(worst, ex.grad_check(e, x, 1e-6))
                count += 1
    assert worst <= 1e-5, worst
    _report(9, f"{count} gradient checks, worst deviation {worst:.2e}")


def test_criterion_10_corpus_determinism():
    cmd = [sys.executable, "-m", "mpcac", "corpus", "--json"]
    first = subprocess.run(cmd, capture_output=True, check=True)
    second = subprocess.run(cmd, capture_output=True, check=True)
    assert first.stdout == second.stdout
    assert first.returncode == second.returncode == 0
    payload = json.loads(first.stdout)
    assert payload["pass"] is True
    _report(10, f"two corpus runs byte-identical ({len(first.stdout)} bytes)")
