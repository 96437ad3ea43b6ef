import json

import numpy as np
import pytest

from conftest import random_pair_state
from mpcac import corpus
from mpcac import expr as ex
from mpcac import model as mo
from mpcac.model import PairPoint


def test_alpha_bounds_enforced():
    f = ex.parse_expr("x1", 2)
    with pytest.raises(ValueError, match="alpha"):
        mo.Problem("bad", 2, 2, f)
    with pytest.raises(ValueError, match="alpha"):
        mo.Problem("bad", 2, 0, f)


def test_dimension_enforced():
    with pytest.raises(ValueError, match="x3"):
        mo.Problem("bad", 2, 1, ex.parse_expr("x1", 2), (ex.Var(3),))


def test_index_sets_solution_pair():
    s = mo.index_sets(PairPoint([0.0, 0.0], [1.0, 0.0]))
    assert s.i01 == (1,)
    assert s.i00 == (2,)
    assert s.i0plus == ()
    assert s.i_pm0 == ()
    assert s.i0 == (1, 2)


def test_index_sets_unit_vector():
    n = 5
    s = mo.index_sets(PairPoint(np.zeros(n), np.eye(n)[0]))
    assert s.i0 == tuple(range(1, n + 1))
    assert s.i01 == (1,)
    assert s.i00 == tuple(range(2, n + 1))
    assert s.i0plus == ()


def test_index_sets_no_zero_x():
    s = mo.index_sets(PairPoint([1.0, 1.0], [0.0, 0.0]))
    assert s.i_pm0 == (1, 2)
    assert s.i00 == () and s.i0pm == () and s.i0 == ()


def test_index_sets_requires_y():
    with pytest.raises(ValueError, match="y component"):
        mo.index_sets(PairPoint([1.0, 0.0]))


def test_index_sets_rejects_complementarity_violation():
    with pytest.raises(mo.ComplementarityError):
        mo.index_sets(PairPoint([1.0], [1.0]))


def test_index_sets_partition_property(rng):
    for _ in range(200):
        n = int(rng.integers(2, 7))
        alpha = int(rng.integers(1, n))
        x, y = random_pair_state(rng, n, alpha)
        s = mo.index_sets(PairPoint(x, y))
        assert sorted(s.i00 + s.i_pm0 + s.i0pm) == list(range(1, n + 1))
        assert set(s.i0plus) | set(s.i01) <= set(s.i0gt) <= set(s.i0pm)
        assert s.i0 == tuple(sorted(set(s.i00) | set(s.i0pm)))


def test_companion_examples():
    y, unique = mo.companion_y([0.0, 1.0, 0.0], 2)
    assert np.array_equal(y, [1.0, 0.0, 1.0]) and unique is False
    y, unique = mo.companion_y([3.0, 0.0], 1)
    assert np.array_equal(y, [0.0, 1.0]) and unique is True
    with pytest.raises(mo.CardinalityError):
        mo.companion_y([1.0, 1.0], 1)


def test_companion_roundtrip_feasibility(rng):
    """Feasible x always pairs into a relaxed-feasible point."""
    f = ex.parse_expr("(+ x1 x2 x3 x4)", 4)
    p = mo.Problem("free", 4, 2, f)
    for _ in range(200):
        k = int(rng.integers(0, p.alpha + 1))
        x = np.zeros(p.n)
        support = rng.permutation(p.n)[:k]
        x[support] = rng.uniform(-3.0, 3.0, k) + np.sign(rng.standard_normal(k)) * 0.1
        y, unique = mo.companion_y(x, p.alpha)
        assert mo.is_feasible_relaxed(p, PairPoint(x, y))
        assert unique == (mo.norm0(x) == p.alpha)


def test_full_cardinality_forces_binary_y(rng):
    """When x carries exactly alpha nonzeros, a relaxed-feasible partner has
    no biactive indices and is binary."""
    f = ex.parse_expr("(+ x1 x2 x3 x4)", 4)
    p = mo.Problem("free", 4, 3, f)
    rp = mo.build_relaxed(p)
    for _ in range(100):
        x = np.zeros(4)
        support = rng.permutation(4)[:3]
        x[support] = rng.choice([-1.0, 1.0], 3) * rng.uniform(0.5, 2.0, 3)
        y, unique = mo.companion_y(x, 3)
        assert unique
        pt = PairPoint(x, y)
        assert rp.is_feasible(pt.z())
        s = mo.index_sets(pt)
        assert s.i00 == ()
        assert all(min(abs(v), abs(v - 1.0)) <= mo.TAU_ZERO for v in y)


def test_build_relaxed_structure():
    p = corpus.linear_parabola()
    rp = mo.build_relaxed(p)
    assert rp.nvars == 2 * p.n
    assert len(rp.ineq) == p.m + 1 + 2 * p.n
    assert len(rp.eq) == p.p + p.n
    assert rp.ineq_labels[p.m] == "theta"
    # theta row encodes the cardinality budget: 1 - y1 - y2 at this size
    theta = rp.ineq[p.m]
    assert theta.eval([0, 0, 1, 0]) == 0.0
    assert theta.eval([0, 0, 0, 0]) == 1.0


def test_build_relaxed_trivial_counts():
    f = ex.parse_expr("x1", 3)
    p = mo.Problem("plain", 3, 2, f)
    rp = mo.build_relaxed(p)
    assert rp.nvars == 6
    # theta + 3 lower bounds + 3 upper bounds
    assert len(rp.ineq) == 7
    assert len(rp.eq) == 3


def test_mixed_integer_flags_and_relaxation():
    p = corpus.quad_shifted()
    mi = mo.build_mixed_integer(p)
    assert mi.binary == (4, 5, 6)
    assert len(mi.ineq) == p.m + 1
    relaxed = mo.relax_binary(mi)
    direct = mo.build_relaxed(p)
    assert [str(e) for e in relaxed.ineq] == [str(e) for e in direct.ineq]
    assert [str(e) for e in relaxed.eq] == [str(e) for e in direct.eq]
    assert relaxed.binary == ()


def test_mixed_integer_feasibility_needs_binary_y():
    p = corpus.quad_shifted()
    mi = mo.build_mixed_integer(p)
    assert mi.is_feasible([0.0, 1.0, 0.0, 1.0, 0.0, 1.0])
    assert not mi.is_feasible([0.0, 1.0, 0.0, 0.5, 0.0, 0.5])


def test_admissible_range_examples():
    lo, hi = mo.admissible_I_range(PairPoint([0.0, 0.0], [1.0, 0.0]))
    assert lo == (1,) and hi == (1, 2)
    n = 4
    lo, hi = mo.admissible_I_range(PairPoint(np.zeros(n), np.eye(n)[0]))
    assert lo == (1,) and hi == tuple(range(1, n + 1))
    lo, hi = mo.admissible_I_range(PairPoint([0.0, 1.0], [1.0, 0.0]))
    assert lo == hi == (1,)


def test_build_tightened_structure():
    p = corpus.linear_parabola()
    pt = PairPoint([0.0, 0.0], [1.0, 0.0])
    rp = mo.build_tightened(p, pt, (1, 2))
    assert rp.kind == mo.TIGHTENED
    assert rp.index_set == (1, 2)
    # inequalities: g, theta, upper bounds, and -y1 <= 0 (y1 positive here)
    assert rp.ineq_labels == ("g1", "theta", "Ht1", "Ht2", "H1")
    # equalities: y2 = 0 (biactive) and both x-fixings
    assert rp.eq_labels == ("H2", "G1", "G2")
    assert rp.is_feasible(pt.z())


def test_build_tightened_empty_biactive():
    p = corpus.quad_shifted()
    pt = PairPoint([0.0, 1.0, 0.0], [0.5, 0.0, 0.5])
    lo, hi = mo.admissible_I_range(pt)
    assert lo == hi == (1, 3)
    rp = mo.build_tightened(p, pt, lo)
    # only the nonzero-x index contributes an equality H row
    assert rp.eq_labels == ("H2", "G1", "G3")


def test_build_tightened_range_errors():
    p = corpus.linear_parabola()
    pt = PairPoint([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(ValueError, match="must contain"):
        mo.build_tightened(p, pt, (2,))
    with pytest.raises(ValueError, match="subset of the zero set"):
        mo.build_tightened(
            corpus.quad_shifted(),
            PairPoint([0.0, 1.0, 0.0], [0.5, 0.0, 0.5]),
            (1, 2, 3),
        )


def test_build_tightened_rejects_infeasible_point():
    p = corpus.linear_parabola()
    with pytest.raises(ValueError, match="not feasible"):
        mo.build_tightened(p, PairPoint([-1.0, 0.0], [0.0, 1.0]), (2,))


def test_tightened_feasible_points_are_relaxed_feasible(rng):
    """Sampled feasible points of the tightened problem stay feasible for
    the relaxed problem."""
    cases = [
        (corpus.quad_shifted(), PairPoint([0.0, 1.0, 0.0], [0.5, 0.0, 0.5])),
        (corpus.linear_parabola(), PairPoint([0.0, 0.0], [1.0, 0.0])),
        (corpus.sparse_chain(3), PairPoint(np.zeros(3), np.eye(3)[0])),
    ]
    for p, pt in cases:
        lo, hi = mo.admissible_I_range(pt)
        tight = mo.build_tightened(p, pt, hi)
        relaxed = mo.build_relaxed(p)
        found = 0
        for _ in range(300):
            z = pt.z() + rng.uniform(-0.4, 0.4, 2 * p.n)
            # project onto the tightening's coordinate fixings
            for label, e in zip(tight.eq_labels, tight.eq):
                if label.startswith("H"):
                    z[p.n + int(label[1:]) - 1] = 0.0
                if label.startswith("G"):
                    z[int(label[1:]) - 1] = 0.0
            z[2 * p.n - p.n :] = np.clip(z[p.n :], 0.0, 1.0)
            if tight.is_feasible(z):
                found += 1
                assert relaxed.is_feasible(z)
        assert found > 0


def test_feasibility_examples():
    p21 = corpus.quad_shifted()
    assert mo.is_feasible_relaxed(p21, PairPoint([0.0, 1.0, 0.0], [0.5, 0.0, 0.5]))
    p22 = corpus.quad_two_targets()
    assert mo.is_feasible_mpcac(p22, [0.0, 1.0, 0.0])
    assert not mo.is_feasible_mpcac(p22, [1.0, 1.0, 1.0])


def test_problem_json_roundtrip(tmp_path):
    p = corpus.linear_parabola()
    path = tmp_path / "p.json"
    mo.save_problem(p, path)
    back = mo.load_problem(path)
    assert back.name == p.name and back.n == p.n and back.alpha == p.alpha
    assert str(back.f) == str(p.f)
    assert [str(e) for e in back.g] == [str(e) for e in p.g]


def test_problem_json_rejects_bad_format(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"format": "nope", "n": 2, "alpha": 1, "objective": "x1"}))
    with pytest.raises(ValueError, match="format"):
        mo.load_problem(path)


def test_point_json_roundtrip(tmp_path):
    pt = PairPoint([0.0, 1.0], [1.0, 0.0])
    path = tmp_path / "pt.json"
    path.write_text(json.dumps(mo.point_to_dict(pt)))
    back = mo.load_point(path)
    assert np.array_equal(back.x, pt.x) and np.array_equal(back.y, pt.y)
