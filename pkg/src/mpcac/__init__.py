"""Toolkit for cardinality-constrained programs at desk scale.

Builds the continuous, mixed-integer, and tightened reformulations of
min f(x) s.t. x in X, nnz(x) <= alpha; certifies the stationarity ladder
(weak over an index set, strong, and the weakest zero-set variant, plus
relaxed-problem KKT) by linear-feasibility multiplier search; decides
LICQ/MFCQ and, for affine data, ACQ/GCQ through exact polyhedral tangent
cones; and solves small instances globally by support enumeration.
"""

from ._backend import backend_name
from .cones import (
    AffineComplementaritySet,
    ConeUnion,
    PolyhedralCone,
    check_acq,
    check_gcq,
    check_licq,
    check_mfcq,
    cones_equal,
    generators,
    linearized_cone,
    polar,
    polar_union,
    tangent_cone_pieces,
    union_equals_cone,
)
from .expr import Expr, ParseError, grad, grad_check, parse_expr, to_text
from .lp import LinearProgram, LpOutcome, linear_feasibility, lp_solve
from .model import (
    IndexSets,
    PairPoint,
    Problem,
    ReformulatedProblem,
    admissible_I_range,
    build_mixed_integer,
    build_relaxed,
    build_tightened,
    companion_y,
    index_sets,
    is_feasible_mpcac,
    is_feasible_relaxed,
    load_problem,
    load_point,
    save_problem,
)
from .solver import (
    SolveReport,
    point_report,
    solve_brute,
    solve_mixed_integer,
    solve_qp_affine,
    solve_reduced,
)
from .stationarity import (
    StationarityCertificate,
    StationarityProfile,
    check_kkt_relaxed,
    check_m_stationary,
    check_s_stationary,
    check_w_stationary,
    recover_full_multipliers,
    stationarity_profile,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
