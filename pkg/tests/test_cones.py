import numpy as np
import pytest

from conftest import free_x_instance, random_affine_instance
from mpcac import cones as co
from mpcac import corpus
from mpcac import model as mo
from mpcac.model import PairPoint


def _ray_set(cone):
    rays, lin = co.generators(cone)
    normed = {tuple(np.round(r / np.abs(r).max(), 9)) for r in rays}
    return normed, len(lin)


def test_generators_wedge():
    cone = co.PolyhedralCone.build(None, [[0.0, -1.0], [-1.0, 1.0]], 2)
    rays, nlin = _ray_set(cone)
    assert rays == {(1.0, 0.0), (1.0, 1.0)}
    assert nlin == 0


def test_generators_full_space():
    cone = co.PolyhedralCone.build(None, None, 2)
    rays, lin = co.generators(cone)
    assert rays == []
    assert len(lin) == 2


def test_generators_origin_only():
    cone = co.PolyhedralCone.build([[1.0, 0.0], [0.0, 1.0]], None, 2)
    rays, lin = co.generators(cone)
    assert rays == [] and lin == []


def test_generators_dimension_cap():
    cone = co.PolyhedralCone.build(None, None, 13)
    with pytest.raises(co.ConeDimensionError):
        co.generators(cone)


def test_polar_halfline():
    cone = co.PolyhedralCone.build([[0.0, 1.0]], [[-1.0, 0.0]], 2)  # d1>=0, d2=0
    p = co.polar(cone)
    # polar is the halfplane p1 <= 0
    assert p.contains([-1.0, 5.0]) and p.contains([-1.0, -5.0]) and p.contains([0.0, 1.0])
    assert not p.contains([1.0, 0.0])


def test_polar_of_full_space_is_origin():
    full = co.PolyhedralCone.build(None, None, 2)
    p = co.polar(full)
    assert p.contains([0.0, 0.0])
    assert not p.contains([1e-3, 0.0])
    rays, lin = co.generators(p)
    assert rays == [] and lin == []


def test_polar_involution_random(rng):
    for _ in range(20):
        dim = int(rng.integers(1, 5))
        n_eq = int(rng.integers(0, 2))
        n_le = int(rng.integers(0, 4))
        cone = co.PolyhedralCone.build(
            rng.integers(-2, 3, (n_eq, dim)).astype(float) if n_eq else None,
            rng.integers(-2, 3, (n_le, dim)).astype(float) if n_le else None,
            dim,
        )
        back = co.polar(co.polar(cone))
        assert co.cones_equal(cone, back)


def test_cones_equal_identical_and_scaled():
    a = co.PolyhedralCone.build(None, [[0.0, -1.0], [-1.0, 1.0]], 2)
    b = co.PolyhedralCone.build(None, [[0.0, -2.0], [-3.0, 3.0]], 2)
    assert co.cones_equal(a, b)
    c = co.PolyhedralCone.build(None, [[0.0, -1.0]], 2)
    assert not co.cones_equal(a, c)


def test_crossing_set_cones_match_known_forms():
    s = corpus.crossing_bound_set()
    pt = PairPoint([0.0], [0.0])
    union = co.tangent_cone_pieces(s, pt)
    assert len(union.pieces) == 2  # one biactive index
    target_t = co.PolyhedralCone.build([[0.0, 1.0]], [[-1.0, 0.0]], 2)
    equal, flag = co.union_equals_cone(union, target_t)
    assert equal and flag == co.EXACT
    d = co.linearized_cone(s, pt)
    target_d = co.PolyhedralCone.build(None, [[0.0, -1.0], [-1.0, 1.0]], 2)
    assert co.cones_equal(d, target_d)
    assert not co.check_acq(s, pt).verdict
    assert not co.check_gcq(s, pt).verdict
    # the polars differ, witnessing the failure
    assert not co.cones_equal(co.polar_union(union), co.polar(d))


def test_pinned_x_box_acq_holds():
    s = corpus.pinned_x_box_set()
    pt = PairPoint([0.0], [0.0])
    rep = co.check_acq(s, pt)
    assert rep.verdict and rep.flag == co.EXACT
    assert co.check_gcq(s, pt).verdict


def test_unit_box_acq_fails_gcq_holds():
    s = corpus.unit_box_set()
    pt = PairPoint([0.0], [0.0])
    assert not co.check_acq(s, pt).verdict
    assert co.check_gcq(s, pt).verdict


def test_tangent_needs_feasible_point():
    s = corpus.crossing_bound_set()
    with pytest.raises(ValueError, match="not feasible"):
        co.tangent_cone_pieces(s, PairPoint([-1.0], [0.5]))


def test_tangent_strict_complementarity_single_piece():
    s = corpus.pinned_x_box_set()
    union = co.tangent_cone_pieces(s, PairPoint([0.0], [1.0]))
    assert len(union.pieces) == 1


def test_nonlinear_refused():
    p = corpus.linear_parabola()
    pt = PairPoint([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(co.NonaffineError):
        co.check_acq(p, pt)
    with pytest.raises(co.NonaffineError):
        co.check_gcq(p, pt)


def test_no_active_constraints_full_space():
    cone = co.linearized_cone(
        co.AffineComplementaritySet.build(1, a_le=[[-1.0, 0.0]], b_le=[1.0]),
        PairPoint([0.5], [0.0]),
    )
    # only the complementarity row is active: y du + x dv = 0 with y=0
    assert cone.contains([5.0, 0.0]) and cone.contains([-5.0, 0.0])
    assert not cone.contains([0.0, 1.0]) or cone.eq.size == 0


def test_licq_mfcq_fail_when_x_has_support():
    for p, pt in (
        (corpus.quad_shifted(), PairPoint([0.0, 1.0, 0.0], [0.5, 0.0, 0.5])),
        (corpus.quad_two_targets(), PairPoint([0.0, 1.0, 0.0], [0.5, 0.0, 0.5])),
    ):
        assert not co.check_mfcq(p, pt).verdict
        assert not co.check_licq(p, pt).verdict


def test_mfcq_holds_single_active_bound():
    import mpcac.expr as ex
    from mpcac.model import Problem

    # x = 0 with strictly positive y and slack everywhere: the only active
    # inequality is one upper bound on y, and d = -(its gradient) works
    p = Problem("no-rows", 2, 1, ex.parse_expr("x1", 2))
    pt = PairPoint([0.0, 0.0], [1.0, 0.5])
    rep = co.check_mfcq(p, pt)
    assert rep.verdict
    assert rep.detail["margin"] > 0


def test_random_mfcq_fails_with_nonzero_component(rng):
    hits = 0
    for _ in range(30):
        p, pt = random_affine_instance(rng)
        if np.abs(pt.x).max() > 0:
            hits += 1
            assert not co.check_mfcq(p, pt).verdict
            assert not co.check_licq(p, pt).verdict
    assert hits > 5


def test_acq_iff_no_biactive_for_free_x(rng):
    for _ in range(50):
        p, pt = free_x_instance(rng)
        sets = mo.index_sets(pt)
        assert co.check_acq(p, pt).verdict == (sets.i00 == ())


def test_gcq_always_holds_separable(rng):
    for _ in range(25):
        p, pt = random_affine_instance(rng, n=int(rng.integers(2, 5)))
        s = co.AffineComplementaritySet.from_problem(p)
        assert s.separable()
        assert co.check_gcq(p, pt).verdict


def test_acq_holds_at_full_cardinality(rng):
    """Solution-sized supports have no biactive pair, so the tangent and
    linearized cones agree."""
    for _ in range(10):
        p, pt = random_affine_instance(rng)
        if mo.norm0(pt.x) == p.alpha:
            assert co.check_acq(p, pt).verdict


def test_chain_consistency_on_affine_points(rng):
    """No stronger qualification may hold where a weaker one fails."""
    rank = {"licq": 3, "mfcq": 2, "acq": 1, "gcq": 0}
    for _ in range(20):
        p, pt = random_affine_instance(rng, n=int(rng.integers(2, 5)))
        chain = co.cq_chain(p, pt)
        for strong, weak in (("licq", "mfcq"), ("mfcq", "acq"), ("acq", "gcq")):
            if chain[strong] is None or chain[weak] is None:
                continue
            assert not (chain[strong] and not chain[weak]), (chain, p.name)


def test_tangent_pieces_inside_linearized(rng):
    """Every tangent piece generator satisfies the linearized cone."""
    targets = [
        (corpus.crossing_bound_set(), PairPoint([0.0], [0.0])),
        (corpus.unit_box_set(), PairPoint([0.0], [0.0])),
        (corpus.pinned_x_box_set(), PairPoint([0.0], [0.0])),
    ]
    for _ in range(10):
        p, pt = random_affine_instance(rng, n=3)
        targets.append((co.AffineComplementaritySet.from_problem(p), pt))
    for s, pt in targets:
        union = co.tangent_cone_pieces(s, pt)
        d = co.linearized_cone(s, pt)
        for piece in union.pieces:
            rays, lin = co.generators(piece)
            for r in rays:
                assert d.contains(r)
            for l in lin:
                assert d.contains(l) and d.contains(-l)


def test_cq_report_serialization():
    s = corpus.crossing_bound_set()
    d = co.check_acq(s, PairPoint([0.0], [0.0])).to_dict()
    assert d["format"] == "mpcac-report-1"
    assert d["which"] == "acq"
    assert d["verdict"] == "fails"
    assert d["flag"] in (co.EXACT, co.SAMPLED)
    assert "pieces" in d["detail"] and "linearized" in d["detail"]
