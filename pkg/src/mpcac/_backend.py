"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the pure
Python twin is the fallback.  Set ``MPCAC_PURE_PYTHON=1`` to force the
fallback (used by the backend-equivalence tests and the benchmark).
"""

import os

from . import _pykern

if os.environ.get("MPCAC_PURE_PYTHON") == "1":
    kernels = _pykern
    BACKEND = "python"
else:
    try:
        from . import _fastkern as kernels  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        kernels = _pykern
        BACKEND = "python"

OP_CONST = _pykern.OP_CONST
OP_VAR = _pykern.OP_VAR
OP_SUM = _pykern.OP_SUM
OP_PROD = _pykern.OP_PROD
OP_POW = _pykern.OP_POW
OP_NEG = _pykern.OP_NEG

SIMPLEX_OPTIMAL = _pykern.SIMPLEX_OPTIMAL
SIMPLEX_UNBOUNDED = _pykern.SIMPLEX_UNBOUNDED
SIMPLEX_MAXITER = _pykern.SIMPLEX_MAXITER


def backend_name() -> str:
    return BACKEND
