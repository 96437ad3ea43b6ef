"""The compiled and pure kernels must agree bit for bit."""

import numpy as np
import pytest

from mpcac import _pykern
from mpcac import expr as ex
from mpcac._backend import backend_name

try:
    from mpcac import _fastkern
except ImportError:
    _fastkern = None

needs_ext = pytest.mark.skipif(_fastkern is None, reason="compiled kernels not built")


def _random_tree(rng, n, depth):
    kind = rng.integers(0, 6 if depth > 0 else 2)
    if kind == 0:
        return ex.Const(float(rng.uniform(-2, 2)))
    if kind == 1:
        return ex.Var(int(rng.integers(1, n + 1)))
    if kind == 2:
        k = int(rng.integers(1, 4))
        return ex.Sum(tuple(_random_tree(rng, n, depth - 1) for _ in range(k)))
    if kind == 3:
        k = int(rng.integers(1, 3))
        return ex.Prod(tuple(_random_tree(rng, n, depth - 1) for _ in range(k)))
    if kind == 4:
        return ex.Pow(_random_tree(rng, n, depth - 1), int(rng.integers(1, 5)))
    return ex.Neg(_random_tree(rng, n, depth - 1))


@needs_ext
def test_tape_eval_bit_identical(rng):
    for _ in range(200):
        n = int(rng.integers(1, 6))
        tree = _random_tree(rng, n, 4)
        tape = tree.tape()
        x = rng.uniform(-2.0, 2.0, n)
        stack1 = np.empty(tape.stack_size)
        stack2 = np.empty(tape.stack_size)
        a = _pykern.tape_eval(tape.code, tape.consts, x, stack1)
        b = _fastkern.tape_eval(tape.code, tape.consts, x, stack2)
        assert np.float64(a) == np.float64(b) or (np.isnan(a) and np.isnan(b))


@needs_ext
def test_tape_set_bit_identical(rng):
    trees = [_random_tree(rng, 3, 4) for _ in range(12)]
    ts = ex.TapeSet(trees)
    x = rng.uniform(-2.0, 2.0, 3)
    out1 = np.empty(ts.size)
    out2 = np.empty(ts.size)
    stack1 = np.empty(ts._stack.shape[0])
    stack2 = np.empty(ts._stack.shape[0])
    _pykern.tape_eval_set(ts.code, ts.starts, ts.ends, ts.consts, x, stack1, out1)
    _fastkern.tape_eval_set(ts.code, ts.starts, ts.ends, ts.consts, x, stack2, out2)
    assert np.array_equal(out1, out2)


def _random_tableau(rng):
    m = int(rng.integers(1, 8))
    n = int(rng.integers(m, 14))
    tab = np.zeros((m + 1, n + 1))
    tab[:m, :n] = rng.integers(-3, 4, (m, n)).astype(float)
    tab[:m, n] = rng.integers(0, 5, m).astype(float)
    basis = np.zeros(m, dtype=np.int64)
    # plant an identity block so the start is basic-feasible
    for i in range(m):
        col = n - m + i
        tab[:m, col] = 0.0
        tab[i, col] = 1.0
        basis[i] = col
    tab[m, :n] = rng.integers(-3, 4, n).astype(float)
    tab[m, n - m :] = 0.0
    return tab, basis


@needs_ext
def test_simplex_loop_bit_identical(rng):
    for _ in range(150):
        tab, basis = _random_tableau(rng)
        t1, b1 = tab.copy(), basis.copy()
        t2, b2 = tab.copy(), basis.copy()
        rc1 = _pykern.simplex_loop(t1, b1, 1e-9, 500)
        rc2 = _fastkern.simplex_loop(t2, b2, 1e-9, 500)
        assert rc1 == rc2
        assert np.array_equal(b1, b2)
        assert np.array_equal(t1, t2)


def test_backend_name_reports():
    assert backend_name() in ("cython", "python")


@needs_ext
def test_corpus_json_identical_across_backends():
    """The whole worked-case catalog serializes to the same bytes under
    either kernel backend."""
    import os
    import subprocess
    import sys

    outputs = []
    for flag in ("0", "1"):
        env = dict(os.environ)
        env["MPCAC_PURE_PYTHON"] = flag
        run = subprocess.run(
            [sys.executable, "-m", "mpcac", "corpus", "--json"],
            capture_output=True,
            env=env,
            check=True,
        )
        outputs.append(run.stdout)
    assert outputs[0] == outputs[1]


def test_pure_kernel_selected_by_env(tmp_path):
    import subprocess
    import sys

    code = (
        "from mpcac._backend import backend_name; print(backend_name())"
    )
    out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env={"PATH": "/usr/bin:/bin", "MPCAC_PURE_PYTHON": "1"},
    )
    assert out.stdout.strip() == "python"
