"""Benchmark the compiled kernels against the pure-Python twins.

Times raw tape evaluation, batched tape evaluation, the simplex loop, and
one end-to-end global solve per backend, asserting bit-identical results
along the way.  Run:  python benchmarks/bench_backends.py
"""

import os
import subprocess
import sys
import time

import numpy as np

from mpcac import _pykern
from mpcac import corpus
from mpcac import expr as ex

try:
    from mpcac import _fastkern
except ImportError:
    _fastkern = None


def time_fn(fn, repeat):
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def corpus_tapes():
    exprs = []
    for case in corpus.cases():
        if case.problem is None:
            continue
        p = case.problem
        exprs.extend([p.f, *p.g, *p.h])
        for e in (p.f, *p.g, *p.h):
            for i in range(1, p.n + 1):
                d = e.partial(i)
                if d is not None:
                    exprs.append(d)
    return exprs


def bench_tapes():
    exprs = corpus_tapes()
    ts = ex.TapeSet(exprs)
    x = np.linspace(-1.0, 1.0, 6)
    out_ref = np.empty(ts.size)
    stack = np.empty(ts._stack.shape[0])
    _pykern.tape_eval_set(ts.code, ts.starts, ts.ends, ts.consts, x, stack, out_ref)

    rows = []
    for name, mod in (("python", _pykern), ("cython", _fastkern)):
        if mod is None:
            continue
        out = np.empty(ts.size)
        per = time_fn(
            lambda: mod.tape_eval_set(
                ts.code, ts.starts, ts.ends, ts.consts, x, stack, out
            ),
            2000,
        )
        assert np.array_equal(out, out_ref), "backends disagree on tape batch"
        rows.append((name, per * 1e6, ts.size))
    print(f"tape batch ({ts.size} expressions per call):")
    for name, us, _ in rows:
        print(f"  {name:<7} {us:9.2f} us/call")
    if len(rows) == 2:
        print(f"  speedup {rows[0][1] / rows[1][1]:.1f}x")


def bench_simplex():
    rng = np.random.default_rng(7)
    tabs = []
    for _ in range(50):
        m, n = 10, 24
        tab = np.zeros((m + 1, n + 1))
        tab[:m, : n - m] = rng.integers(-3, 4, (m, n - m)).astype(float)
        tab[:m, n] = rng.integers(0, 5, m).astype(float)
        basis = np.arange(n - m, n, dtype=np.int64)
        tab[:m, n - m : n] = np.eye(m)
        tab[m, : n - m] = rng.integers(-3, 4, n - m).astype(float)
        tabs.append((tab, basis))

    results = {}
    rows = []
    for name, mod in (("python", _pykern), ("cython", _fastkern)):
        if mod is None:
            continue

        def run():
            outs = []
            for tab, basis in tabs:
                t, b = tab.copy(), basis.copy()
                rc = mod.simplex_loop(t, b, 1e-9, 2000)
                outs.append((rc, t, b))
            return outs

        per = time_fn(run, 5)
        results[name] = run()
        rows.append((name, per * 1e3))
    if len(results) == 2:
        for (rc1, t1, b1), (rc2, t2, b2) in zip(results["python"], results["cython"]):
            assert rc1 == rc2 and np.array_equal(t1, t2) and np.array_equal(b1, b2)
    print("simplex loop (50 tableaus, 10x24):")
    for name, ms in rows:
        print(f"  {name:<7} {ms:9.2f} ms/batch")
    if len(rows) == 2:
        print(f"  speedup {rows[0][1] / rows[1][1]:.1f}x")


def bench_solve():
    print("end-to-end solve of the two-variable linear/parabola case:")
    script = (
        "import time, json; from mpcac import corpus, solver; "
        "p = corpus.linear_parabola(); t0 = time.perf_counter(); "
        "r = solver.solve_brute(p); "
        "print(json.dumps({'t': time.perf_counter() - t0, 'f': r.best_objective}))"
    )
    for name, env_val in (("python", "1"), ("cython", "0")):
        if name == "cython" and _fastkern is None:
            continue
        env = dict(os.environ)
        env["MPCAC_PURE_PYTHON"] = env_val
        out = subprocess.run(
            [sys.executable, "-c", script], capture_output=True, text=True, env=env
        )
        import json

        data = json.loads(out.stdout.strip())
        print(f"  {name:<7} {data['t'] * 1e3:9.1f} ms  (f* = {data['f']:.2e})")


if __name__ == "__main__":
    from mpcac._backend import backend_name

    print(f"default backend: {backend_name()}")
    bench_tapes()
    bench_simplex()
    bench_solve()
