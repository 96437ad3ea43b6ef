"""Pure-Python kernels: expression-tape evaluation and the simplex pivot loop.

These are the reference implementations of the two hot loops.  The compiled
twin in ``_fastkern.pyx`` performs the *same floating-point operations in the
same order*, so both backends produce bit-identical results; tests assert
this whenever the compiled module is importable.

Tape format: ``code`` is a flat int64 array of (opcode, arg) pairs executed
as a stack machine.  ``consts`` holds all literal values; PUSH_CONST args
index into it.  SUM/PROD fold their operands left to right (bottom of the
stack first).  POW uses repeated multiplication, never libm pow().
"""

import numpy as np

OP_CONST = 0
OP_VAR = 1
OP_SUM = 2
OP_PROD = 3
OP_POW = 4
OP_NEG = 5

SIMPLEX_OPTIMAL = 0
SIMPLEX_UNBOUNDED = 1
SIMPLEX_MAXITER = 2


def tape_eval(code, consts, x, stack):
    """Run one tape and return its value.  ``stack`` is scratch space."""
    ip = 0
    sp = 0
    ncode = code.shape[0]
    while ip < ncode:
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
            for _ in range(arg - 1):
                acc = acc * v
            stack[sp - 1] = acc
        else:  # OP_NEG
            stack[sp - 1] = -stack[sp - 1]
    return stack[0]


def tape_eval_set(code, starts, ends, consts, x, stack, out):
    """Evaluate a batch of tapes sharing one code/consts pool into ``out``."""
    for k in range(starts.shape[0]):
        out[k] = tape_eval(code[starts[k]:ends[k]], consts, x, stack)


def simplex_loop(tab, basis, eps, max_iter):
    """Bland-rule primal simplex on a dense tableau, in place.

    ``tab`` is (m+1) x (n+1): m constraint rows, objective (reduced cost)
    row last, right-hand side in the last column.  ``basis`` maps rows to
    basic column indices.  Entering: lowest column index with reduced cost
    < -eps.  Leaving: minimum ratio, ties by lowest basic variable index.

    The pure twin uses numpy *elementwise* row updates only; elementwise
    operations round identically to the compiled scalar loops.
    """
    m = tab.shape[0] - 1
    n = tab.shape[1] - 1
    obj = tab[m]
    for _ in range(max_iter):
        neg = np.nonzero(obj[:n] < -eps)[0]
        if neg.shape[0] == 0:
            return SIMPLEX_OPTIMAL
        enter = int(neg[0])
        col = tab[:m, enter]
        pos = np.nonzero(col > eps)[0]
        if pos.shape[0] == 0:
            return SIMPLEX_UNBOUNDED
        ratios = tab[pos, n] / col[pos]
        best = ratios.min()
        tie = pos[ratios == best]
        leave = int(tie[np.argmin(basis[tie])])
        piv = tab[leave, enter]
        tab[leave, :] = tab[leave, :] / piv
        prow = tab[leave, :]
        for i in range(m + 1):
            if i != leave:
                f = tab[i, enter]
                if f != 0.0:
                    tab[i, :] = tab[i, :] - f * prow
        basis[leave] = enter
    return SIMPLEX_MAXITER
