"""Differentiable polynomial expressions over n real variables.

Node kinds: constant, variable (1-based), sum, product, integer power
(exponent >= 1), negation, and an affine shortcut (coefficient vector plus
offset) used for machine-built constraint rows.  Trees are immutable.

Evaluation is defined by a postfix tape executed by the selected kernel
backend; the tape linearizes the recursive rules (sums and products fold
left to right, powers multiply repeatedly), so identical trees at identical
points give bit-identical values.  Derivatives are built structurally, as
expression trees, once per (expression, variable) and then evaluated like
any other expression.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._backend import OP_CONST, OP_NEG, OP_POW, OP_PROD, OP_SUM, OP_VAR, kernels


class ParseError(ValueError):
    """Syntax or range error in expression text; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte {offset})")
        self.offset = offset


@dataclass(frozen=True)
class Tape:
    code: np.ndarray  # int64, flat (op, arg) pairs
    consts: np.ndarray  # float64
    stack_size: int


class Expr:
    """Base class; subclasses are frozen dataclasses."""

    def eval(self, x) -> float:
        x = np.asarray(x, dtype=float)
        tape = self.tape()
        stack = np.empty(tape.stack_size, dtype=float)
        return float(kernels.tape_eval(tape.code, tape.consts, x, stack))

    def tape(self) -> Tape:
        cached = getattr(self, "_tape", None)
        if cached is None:
            cached = _compile(self)
            object.__setattr__(self, "_tape", cached)
        return cached

    def partial(self, i: int) -> Optional["Expr"]:
        """Derivative with respect to x_i as a tree; None means zero."""
        cache = getattr(self, "_partials", None)
        if cache is None:
            cache = {}
            object.__setattr__(self, "_partials", cache)
        if i not in cache:
            cache[i] = _differentiate(self, i)
        return cache[i]

    def max_var(self) -> int:
        cached = getattr(self, "_max_var", None)
        if cached is None:
            cached = _max_var(self)
            object.__setattr__(self, "_max_var", cached)
        return cached

    def degree(self) -> int:
        """Structural upper bound on the polynomial degree."""
        return _degree(self)

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, eq=False)
class Const(Expr):
    value: float


@dataclass(frozen=True, eq=False)
class Var(Expr):
    index: int  # 1-based


@dataclass(frozen=True, eq=False)
class Sum(Expr):
    children: tuple = field(default_factory=tuple)


@dataclass(frozen=True, eq=False)
class Prod(Expr):
    children: tuple = field(default_factory=tuple)


@dataclass(frozen=True, eq=False)
class Pow(Expr):
    base: Expr = None  # type: ignore[assignment]
    exponent: int = 1


@dataclass(frozen=True, eq=False)
class Neg(Expr):
    child: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class Affine(Expr):
    """offset + sum of coefs[i] * x_{i+1}, accumulated in index order."""

    coefs: tuple = field(default_factory=tuple)
    offset: float = 0.0


ZERO = Const(0.0)


def affine(coefs, offset: float = 0.0) -> Affine:
    return Affine(tuple(float(c) for c in coefs), float(offset))


# ---------------------------------------------------------------------------
# parsing and printing

_TOKEN = re.compile(r"\(|\)|[^\s()]+")
_NUMBER = re.compile(r"-?\d+(\.\d+)?([eE][+-]?\d+)?$")
_VARIABLE = re.compile(r"x(\d+)$")
_INTEGER = re.compile(r"-?\d+$")


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


def parse_expr(text: str, n: int) -> Expr:
    """Parse prefix-grammar text; variable indices must lie in [1, n]."""
    tokens = [(m.group(0), m.start()) for m in _TOKEN.finditer(text)]
    pos = 0

    def fail(message, at):
        raise ParseError(message, _byte_offset(text, at))

    def peek():
        return tokens[pos] if pos < len(tokens) else (None, len(text))

    def advance():
        nonlocal pos
        tok = peek()
        pos += 1
        return tok

    def parse_one() -> Expr:
        tok, at = advance()
        if tok is None:
            fail("unexpected end of input", at)
        if tok == ")":
            fail("unexpected ')'", at)
        if tok != "(":
            return parse_atom(tok, at)
        op, op_at = advance()
        if op is None:
            fail("missing operator", op_at)
        if op == "^":
            base = parse_one()
            etok, eat = advance()
            if etok is None or not _INTEGER.match(etok):
                fail("power needs an integer exponent", eat)
            exponent = int(etok)
            if exponent < 1:
                fail("exponent must be >= 1", eat)
            close(")")
            return Pow(base, exponent)
        if op == "neg":
            child = parse_one()
            close(")")
            return Neg(child)
        if op in ("+", "*"):
            children = []
            while True:
                tok2, at2 = peek()
                if tok2 == ")":
                    advance()
                    break
                if tok2 is None:
                    fail("missing ')'", at2)
                children.append(parse_one())
            if not children:
                fail(f"'{op}' needs at least one operand", op_at)
            return Sum(tuple(children)) if op == "+" else Prod(tuple(children))
        fail(f"unknown operator '{op}'", op_at)

    def parse_atom(tok, at) -> Expr:
        m = _VARIABLE.match(tok)
        if m:
            idx = int(m.group(1))
            if not 1 <= idx <= n:
                fail(f"variable x{idx} out of range 1..{n}", at)
            return Var(idx)
        if _NUMBER.match(tok):
            return Const(float(tok))
        fail(f"unrecognized token '{tok}'", at)

    def close(expected):
        tok, at = advance()
        if tok != expected:
            fail(f"expected '{expected}'", at)

    root = parse_one()
    tok, at = peek()
    if tok is not None:
        fail(f"trailing input '{tok}'", at)
    return root


def _num_text(v: float) -> str:
    return str(int(v)) if v == int(v) and abs(v) < 1e15 else repr(v)


def to_text(e: Expr) -> str:
    """Canonical prefix form: single spaces, round-trips through parse."""
    if isinstance(e, Const):
        return _num_text(e.value)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Sum):
        return "(+ " + " ".join(to_text(c) for c in e.children) + ")"
    if isinstance(e, Prod):
        return "(* " + " ".join(to_text(c) for c in e.children) + ")"
    if isinstance(e, Pow):
        return f"(^ {to_text(e.base)} {e.exponent})"
    if isinstance(e, Neg):
        return f"(neg {to_text(e.child)})"
    if isinstance(e, Affine):
        terms = [
            f"(* {_num_text(c)} x{i + 1})" for i, c in enumerate(e.coefs) if c != 0.0
        ]
        if not terms:
            return _num_text(e.offset)
        return "(+ " + " ".join([_num_text(e.offset)] + terms) + ")"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# tape compilation

def _compile(e: Expr) -> Tape:
    code: list[int] = []
    consts: list[float] = []

    def const_ix(v: float) -> int:
        consts.append(v)
        return len(consts) - 1

    def emit(node: Expr) -> int:
        """Emit code, return stack cells consumed at peak relative to entry."""
        if isinstance(node, Const):
            code.extend((OP_CONST, const_ix(node.value)))
            return 1
        if isinstance(node, Var):
            code.extend((OP_VAR, node.index - 1))
            return 1
        if isinstance(node, (Sum, Prod)):
            opcode = OP_SUM if isinstance(node, Sum) else OP_PROD
            peak = 0
            for k, child in enumerate(node.children):
                peak = max(peak, k + emit(child))
            if len(node.children) > 1:
                code.extend((opcode, len(node.children)))
            return max(peak, 1)
        if isinstance(node, Pow):
            peak = emit(node.base)
            code.extend((OP_POW, node.exponent))
            return peak
        if isinstance(node, Neg):
            peak = emit(node.child)
            code.extend((OP_NEG, 0))
            return peak
        if isinstance(node, Affine):
            nonzero = [(i, c) for i, c in enumerate(node.coefs) if c != 0.0]
            code.extend((OP_CONST, const_ix(node.offset)))
            peak = 1
            for k, (i, c) in enumerate(nonzero):
                code.extend((OP_CONST, const_ix(c)))
                code.extend((OP_VAR, i))
                code.extend((OP_PROD, 2))
                peak = max(peak, k + 3)
            if nonzero:
                code.extend((OP_SUM, len(nonzero) + 1))
            return peak
        raise TypeError(f"not an expression: {node!r}")

    depth = emit(e)
    return Tape(
        np.asarray(code, dtype=np.int64),
        np.asarray(consts, dtype=float),
        max(depth, 1),
    )


class TapeSet:
    """A batch of expressions compiled into one shared code/consts pool."""

    def __init__(self, exprs):
        codes = []
        consts: list[float] = []
        starts = []
        ends = []
        depth = 1
        at = 0
        for e in exprs:
            t = (e if e is not None else ZERO).tape()
            shifted = t.code.copy()
            # PUSH_CONST args are pool-relative
            for k in range(0, len(shifted), 2):
                if shifted[k] == OP_CONST:
                    shifted[k + 1] += len(consts)
            consts.extend(t.consts.tolist())
            codes.append(shifted)
            starts.append(at)
            at += len(shifted)
            ends.append(at)
            depth = max(depth, t.stack_size)
        self.code = (
            np.concatenate(codes) if codes else np.empty(0, dtype=np.int64)
        )
        self.starts = np.asarray(starts, dtype=np.int64)
        self.ends = np.asarray(ends, dtype=np.int64)
        self.consts = np.asarray(consts, dtype=float)
        self._stack = np.empty(depth, dtype=float)
        self.size = len(starts)

    def eval_into(self, x: np.ndarray, out: np.ndarray, stack=None) -> np.ndarray:
        """Fast path reusing the owned scratch buffer; callers that share a
        TapeSet across workers must pass their own stack."""
        if stack is None:
            stack = self._stack
        kernels.tape_eval_set(
            self.code, self.starts, self.ends, self.consts, x, stack, out
        )
        return out

    def eval(self, x) -> np.ndarray:
        out = np.empty(self.size, dtype=float)
        stack = np.empty(self._stack.shape[0], dtype=float)
        return self.eval_into(np.asarray(x, dtype=float), out, stack)


# ---------------------------------------------------------------------------
# structural differentiation

def _differentiate(e: Expr, i: int) -> Optional[Expr]:
    if isinstance(e, Const):
        return None
    if isinstance(e, Var):
        return Const(1.0) if e.index == i else None
    if isinstance(e, Sum):
        parts = [d for d in (_differentiate(c, i) for c in e.children) if d is not None]
        if not parts:
            return None
        return parts[0] if len(parts) == 1 else Sum(tuple(parts))
    if isinstance(e, Prod):
        terms = []
        for j, c in enumerate(e.children):
            dc = _differentiate(c, i)
            if dc is None:
                continue
            rest = e.children[:j] + e.children[j + 1 :]
            if isinstance(dc, Const) and dc.value == 1.0:
                factors = rest
            else:
                factors = rest + (dc,)
            if not factors:
                terms.append(Const(1.0))
            elif len(factors) == 1:
                terms.append(factors[0])
            else:
                terms.append(Prod(factors))
        if not terms:
            return None
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))
    if isinstance(e, Pow):
        db = _differentiate(e.base, i)
        if db is None:
            return None
        if e.exponent == 1:
            return db
        lowered = e.base if e.exponent == 2 else Pow(e.base, e.exponent - 1)
        factors = [Const(float(e.exponent)), lowered]
        if not (isinstance(db, Const) and db.value == 1.0):
            factors.append(db)
        return Prod(tuple(factors))
    if isinstance(e, Neg):
        dc = _differentiate(e.child, i)
        return None if dc is None else Neg(dc)
    if isinstance(e, Affine):
        if i <= len(e.coefs) and e.coefs[i - 1] != 0.0:
            return Const(e.coefs[i - 1])
        return None
    raise TypeError(f"not an expression: {e!r}")


def _max_var(e: Expr) -> int:
    if isinstance(e, Const):
        return 0
    if isinstance(e, Var):
        return e.index
    if isinstance(e, (Sum, Prod)):
        return max((_max_var(c) for c in e.children), default=0)
    if isinstance(e, Pow):
        return _max_var(e.base)
    if isinstance(e, Neg):
        return _max_var(e.child)
    if isinstance(e, Affine):
        return max((i + 1 for i, c in enumerate(e.coefs) if c != 0.0), default=0)
    raise TypeError(f"not an expression: {e!r}")


def _degree(e: Expr) -> int:
    if isinstance(e, Const):
        return 0
    if isinstance(e, Var):
        return 1
    if isinstance(e, Sum):
        return max((_degree(c) for c in e.children), default=0)
    if isinstance(e, Prod):
        return sum(_degree(c) for c in e.children)
    if isinstance(e, Pow):
        return e.exponent * _degree(e.base)
    if isinstance(e, Neg):
        return _degree(e.child)
    if isinstance(e, Affine):
        return 1 if any(c != 0.0 for c in e.coefs) else 0
    raise TypeError(f"not an expression: {e!r}")


def gradient_set(e: Expr, n: int) -> TapeSet:
    """TapeSet of the n partial derivatives, cached on the node."""
    cache = getattr(e, "_gradsets", None)
    if cache is None:
        cache = {}
        object.__setattr__(e, "_gradsets", cache)
    if n not in cache:
        cache[n] = TapeSet([e.partial(i) for i in range(1, n + 1)])
    return cache[n]


def grad(e: Expr, x) -> np.ndarray:
    """Exact gradient at x by structural differentiation."""
    x = np.asarray(x, dtype=float)
    return gradient_set(e, len(x)).eval(x)


def eval_expr(e: Expr, x) -> float:
    return e.eval(x)


def _eval_recursive(e: Expr, x) -> float:
    """Reference evaluator (tests cross-check the tape backends against it)."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return float(x[e.index - 1])
    if isinstance(e, Sum):
        acc = _eval_recursive(e.children[0], x)
        for c in e.children[1:]:
            acc = acc + _eval_recursive(c, x)
        return acc
    if isinstance(e, Prod):
        acc = _eval_recursive(e.children[0], x)
        for c in e.children[1:]:
            acc = acc * _eval_recursive(c, x)
        return acc
    if isinstance(e, Pow):
        v = _eval_recursive(e.base, x)
        acc = v
        for _ in range(e.exponent - 1):
            acc = acc * v
        return acc
    if isinstance(e, Neg):
        return -_eval_recursive(e.child, x)
    if isinstance(e, Affine):
        acc = e.offset
        for i, c in enumerate(e.coefs):
            if c != 0.0:
                acc = acc + c * float(x[i])
        return acc
    raise TypeError(f"not an expression: {e!r}")


def grad_check(e: Expr, x, h: float) -> float:
    """Max-abs deviation between grad() and central differences of step h."""
    if h <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    g = grad(e, x)
    worst = 0.0
    for i in range(len(x)):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fd = (e.eval(xp) - e.eval(xm)) / (2.0 * h)
        worst = max(worst, abs(g[i] - fd))
    return worst


# ---------------------------------------------------------------------------
# infix rendering (display only; the round-trip form is to_text)

def render_infix(e: Expr, n: Optional[int] = None) -> str:
    """Human-readable rendering; indices above n display as y-variables."""

    def name(idx: int) -> str:
        if n is not None and idx > n:
            return f"y{idx - n}"
        return f"x{idx}"

    def walk(node: Expr, parent: str) -> str:
        if isinstance(node, Const):
            s = _num_text(node.value)
            return f"({s})" if node.value < 0 and parent in ("*", "^") else s
        if isinstance(node, Var):
            return name(node.index)
        if isinstance(node, Sum):
            s = " + ".join(walk(c, "+") for c in node.children)
            s = s.replace("+ -", "- ")
            return f"({s})" if parent in ("*", "^", "neg") else s
        if isinstance(node, Prod):
            return "*".join(walk(c, "*") for c in node.children)
        if isinstance(node, Pow):
            return f"{walk(node.base, '^')}^{node.exponent}"
        if isinstance(node, Neg):
            inner = walk(node.child, "neg")
            return f"-{inner}"
        if isinstance(node, Affine):
            parts = []
            for i, c in enumerate(node.coefs):
                if c == 0.0:
                    continue
                mag = "" if abs(c) == 1.0 else f"{_num_text(abs(c))}*"
                parts.append(("- " if c < 0 else "+ ") + mag + name(i + 1))
            if node.offset != 0.0 or not parts:
                parts.append(
                    ("- " if node.offset < 0 else "+ ") + _num_text(abs(node.offset))
                )
            s = " ".join(parts)
            s = s[2:] if s.startswith("+ ") else "-" + s[2:]
            return f"({s})" if parent in ("*", "^", "neg") else s
        raise TypeError(f"not an expression: {node!r}")

    return walk(e, "")
