# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: expression-tape evaluation and the simplex pivot loop.

Mirror of ``_pykern`` with identical floating-point operation order, so the
two backends are bit-for-bit interchangeable.  Build with -ffp-contract=off
(see setup.py) to keep the compiler from fusing multiply-adds.
"""

import numpy as np

cimport numpy as cnp  # noqa: F401  (numpy headers for buffer protocol)

DEF OP_CONST = 0
DEF OP_VAR = 1
DEF OP_SUM = 2
DEF OP_PROD = 3
DEF OP_POW = 4
DEF OP_NEG = 5

SIMPLEX_OPTIMAL = 0
SIMPLEX_UNBOUNDED = 1
SIMPLEX_MAXITER = 2


cdef double _tape_eval(const long long[::1] code, Py_ssize_t start, Py_ssize_t end,
                       const double[::1] consts, const double[::1] x,
                       double[::1] stack) noexcept nogil:
    cdef Py_ssize_t ip = start
    cdef Py_ssize_t sp = 0
    cdef Py_ssize_t base, j
    cdef long long op, arg
    cdef double acc, v
    while ip < end:
        op = code[ip]
        arg = code[ip + 1]
        ip += 2
        if op == OP_CONST:
            stack[sp] = consts[arg]
            sp += 1
        elif op == OP_VAR:
            stack[sp] = x[arg]
            sp += 1
        elif op == OP_SUM:
            base = sp - arg
            acc = stack[base]
            for j in range(base + 1, sp):
                acc = acc + stack[j]
            stack[base] = acc
            sp = base + 1
        elif op == OP_PROD:
            base = sp - arg
            acc = stack[base]
            for j in range(base + 1, sp):
                acc = acc * stack[j]
            stack[base] = acc
            sp = base + 1
        elif op == OP_POW:
            v = stack[sp - 1]
            acc = v
            for j in range(arg - 1):
                acc = acc * v
            stack[sp - 1] = acc
        else:
            stack[sp - 1] = -stack[sp - 1]
    return stack[0]


def tape_eval(const long long[::1] code, const double[::1] consts,
              const double[::1] x, double[::1] stack):
    return _tape_eval(code, 0, code.shape[0], consts, x, stack)


def tape_eval_set(const long long[::1] code, const long long[::1] starts,
                  const long long[::1] ends, const double[::1] consts,
                  const double[::1] x, double[::1] stack, double[::1] out):
    cdef Py_ssize_t k
    for k in range(starts.shape[0]):
        out[k] = _tape_eval(code, starts[k], ends[k], consts, x, stack)


def simplex_loop(double[:, ::1] tab, long long[::1] basis, double eps,
                 long long max_iter):
    cdef Py_ssize_t m = tab.shape[0] - 1
    cdef Py_ssize_t n = tab.shape[1] - 1
    cdef Py_ssize_t it, i, j, enter, leave
    cdef double a, r, best, piv, f
    for it in range(max_iter):
        enter = -1
        for j in range(n):
            if tab[m, j] < -eps:
                enter = j
                break
        if enter < 0:
            return SIMPLEX_OPTIMAL
        leave = -1
        best = 0.0
        for i in range(m):
            a = tab[i, enter]
            if a > eps:
                r = tab[i, n] / a
                if leave < 0 or r < best:
                    best = r
                    leave = i
                elif r == best and basis[i] < basis[leave]:
                    leave = i
        if leave < 0:
            return SIMPLEX_UNBOUNDED
        piv = tab[leave, enter]
        for j in range(n + 1):
            tab[leave, j] = tab[leave, j] / piv
        for i in range(m + 1):
            if i != leave:
                f = tab[i, enter]
                if f != 0.0:
                    for j in range(n + 1):
                        tab[i, j] = tab[i, j] - f * tab[leave, j]
        basis[leave] = enter
    return SIMPLEX_MAXITER
