"""Expression trees for Hamiltonians and coefficient functions.

Grammar (whitespace insignificant)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := atom ('^' factor)?
    atom   := number | ident | func '(' expr ')' | '(' expr ')' | '-' atom
    ident  := letter (letter|digit|'_')*
    func   in {sin, cos, exp, log, sqrt, abs}

Trees are immutable, structurally comparable, and evaluate on plain floats
or on numpy arrays (broadcasting).  First and second derivatives are exact,
computed by forward-mode dual numbers seeded per call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs")

Value = Union[float, np.ndarray]


class ExprError(ValueError):
    """Base class for all expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"syntax error at line {line}, column {col}: {message}")
        self.line = line
        self.col = col


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, line: int, col: int):
        super().__init__(
            f"unknown identifier '{name}' at line {line}, column {col}"
        )
        self.name = name
        self.line = line
        self.col = col


class UnboundVariableError(ExprError):
    def __init__(self, name: str):
        super().__init__(f"no value bound for variable '{name}'")
        self.name = name


class DomainError(ExprError):
    def __init__(self, message: str, node: "Expr"):
        super().__init__(f"{message} in subexpression '{to_source(node)}'")
        self.node = node


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


Expr = Union[Const, Var, Neg, BinOp, Call]


def variables(e: Expr) -> frozenset:
    """Names of all variables referenced in the tree."""
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Neg):
        return variables(e.arg)
    if isinstance(e, Call):
        return variables(e.arg)
    return variables(e.left) | variables(e.right)


# ---------------------------------------------------------------------------
# Tokenizer / parser

_NUMBER_START = set("0123456789.")


class _Tokenizer:
    def __init__(self, source: str):
        self.source = source
        self.pos = 0
        self.line = 1
        self.col = 1
        self.tokens: list[tuple[str, str, int, int]] = []
        self._run()

    def _advance(self, n: int):
        for _ in range(n):
            if self.pos < len(self.source) and self.source[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def _run(self):
        src = self.source
        while self.pos < len(src):
            ch = src[self.pos]
            if ch.isspace():
                self._advance(1)
                continue
            line, col = self.line, self.col
            if ch in "+-*/^()":
                self.tokens.append(("op", ch, line, col))
                self._advance(1)
            elif ch.isalpha():
                j = self.pos
                while j < len(src) and (src[j].isalnum() or src[j] == "_"):
                    j += 1
                self.tokens.append(("ident", src[self.pos : j], line, col))
                self._advance(j - self.pos)
            elif ch in _NUMBER_START:
                j = self.pos
                while j < len(src) and src[j].isdigit():
                    j += 1
                if j < len(src) and src[j] == ".":
                    j += 1
                    while j < len(src) and src[j].isdigit():
                        j += 1
                if j < len(src) and src[j] in "eE":
                    k = j + 1
                    if k < len(src) and src[k] in "+-":
                        k += 1
                    if k < len(src) and src[k].isdigit():
                        j = k
                        while j < len(src) and src[j].isdigit():
                            j += 1
                text = src[self.pos : j]
                try:
                    float(text)
                except ValueError:
                    raise ExprSyntaxError(f"malformed number '{text}'", line, col)
                self.tokens.append(("number", text, line, col))
                self._advance(j - self.pos)
            else:
                raise ExprSyntaxError(f"unexpected character '{ch}'", line, col)
        self.tokens.append(("eof", "", self.line, self.col))


class _Parser:
    def __init__(self, tokens, vocabulary):
        self.tokens = tokens
        self.i = 0
        self.vocabulary = vocabulary

    def _peek(self):
        return self.tokens[self.i]

    def _next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def _expect_op(self, op: str):
        kind, text, line, col = self._peek()
        if kind != "op" or text != op:
            raise ExprSyntaxError(f"expected '{op}'", line, col)
        self._next()

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, line, col = self._peek()
        if kind != "eof":
            raise ExprSyntaxError(f"unexpected token '{text}'", line, col)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while True:
            kind, text, _, _ = self._peek()
            if kind == "op" and text in "+-":
                self._next()
                left = BinOp(text, left, self.term())
            else:
                return left

    def term(self) -> Expr:
        left = self.factor()
        while True:
            kind, text, _, _ = self._peek()
            if kind == "op" and text in "*/":
                self._next()
                left = BinOp(text, left, self.factor())
            else:
                return left

    def factor(self) -> Expr:
        base = self.atom()
        kind, text, _, _ = self._peek()
        if kind == "op" and text == "^":
            self._next()
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Expr:
        kind, text, line, col = self._peek()
        if kind == "op" and text == "-":
            self._next()
            return Neg(self.atom())
        if kind == "op" and text == "(":
            self._next()
            e = self.expr()
            self._expect_op(")")
            return e
        if kind == "number":
            self._next()
            return Const(float(text))
        if kind == "ident":
            self._next()
            nk, nt, _, _ = self._peek()
            if nk == "op" and nt == "(":
                if text not in FUNCTIONS:
                    raise UnknownIdentifierError(text, line, col)
                self._next()
                arg = self.expr()
                self._expect_op(")")
                return Call(text, arg)
            if text in FUNCTIONS:
                raise ExprSyntaxError(
                    f"function name '{text}' used without arguments", line, col
                )
            if text not in self.vocabulary:
                raise UnknownIdentifierError(text, line, col)
            return Var(text)
        raise ExprSyntaxError(f"unexpected token '{text or kind}'", line, col)


def parse(source: str, vocabulary: Sequence[str]) -> Expr:
    """Parse ``source`` into an expression tree over the given coordinates.

    Every identifier must be declared in ``vocabulary``; function names are
    reserved.  Raises ExprSyntaxError / UnknownIdentifierError with 1-based
    line and column on malformed input.
    """
    vocab = list(vocabulary)
    if len(set(vocab)) != len(vocab):
        raise ValueError("vocabulary contains duplicate names")
    clash = set(vocab) & set(FUNCTIONS)
    if clash:
        raise ValueError(f"vocabulary clashes with function names: {sorted(clash)}")
    tokens = _Tokenizer(source).tokens
    return _Parser(tokens, frozenset(vocab)).parse()


# ---------------------------------------------------------------------------
# Printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def to_source(e: Expr) -> str:
    """Render a tree back to grammar text; parse(to_source(e)) == e."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.fn}({to_source(e.arg)})"
    if isinstance(e, Neg):
        inner = to_source(e.arg)
        if isinstance(e.arg, BinOp):
            inner = f"({inner})"
        return f"-{inner}"
    prec = _PREC[e.op]
    left = to_source(e.left)
    right = to_source(e.right)
    if e.op == "^":
        # right-associative; Neg binds below '^' on the left only when printed bare
        if isinstance(e.left, BinOp):
            left = f"({left})"
        if isinstance(e.right, BinOp) and _PREC[e.right.op] < prec:
            right = f"({right})"
    else:
        if isinstance(e.left, BinOp) and _PREC[e.left.op] < prec:
            left = f"({left})"
        if isinstance(e.right, BinOp) and _PREC[e.right.op] <= prec:
            right = f"({right})"
        if isinstance(e.right, Neg):
            right = f"({right})"
    return f"{left}{e.op}{right}"


# ---------------------------------------------------------------------------
# Plain evaluation


def _check(cond, message: str, node: Expr):
    if not cond:
        raise DomainError(message, node)


def _is_integral(x) -> bool:
    return bool(np.all(x == np.rint(x)))


def _pow_value(b, p, node: Expr):
    if _is_integral(p):
        if np.any(p < 0):
            _check(not np.any(b == 0.0), "zero base with negative exponent", node)
        return np.power(b, p)
    _check(np.all(b > 0.0), "non-integer power of non-positive base", node)
    return np.power(b, p)


def evaluate(e: Expr, bindings: Mapping[str, Value]) -> Value:
    """Evaluate on floats or numpy arrays; deterministic, no derivatives."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return bindings[e.name]
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if isinstance(e, Neg):
        return -evaluate(e.arg, bindings)
    if isinstance(e, Call):
        u = evaluate(e.arg, bindings)
        if e.fn == "sin":
            return np.sin(u)
        if e.fn == "cos":
            return np.cos(u)
        if e.fn == "exp":
            return np.exp(u)
        if e.fn == "log":
            _check(np.all(np.asarray(u) > 0.0), "log of non-positive value", e)
            return np.log(u)
        if e.fn == "sqrt":
            _check(np.all(np.asarray(u) >= 0.0), "sqrt of negative value", e)
            return np.sqrt(u)
        if e.fn == "abs":
            return np.abs(u)
        raise ExprError(f"unsupported function '{e.fn}'")
    a = evaluate(e.left, bindings)
    b = evaluate(e.right, bindings)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        _check(not np.any(np.asarray(b) == 0.0), "division by zero", e)
        return a / b
    if e.op == "^":
        return _pow_value(np.asarray(a, dtype=float), np.asarray(b, dtype=float), e)
    raise ExprError(f"unsupported operator '{e.op}'")


# ---------------------------------------------------------------------------
# Forward-mode dual numbers
#
# grad is None (meaning identically zero) or an array of shape val.shape+(m,);
# hess is None or val.shape+(m,m) and is built from symmetric terms only, so
# it is exactly symmetric by construction.


class DualValue:
    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad=None, hess=None):
        self.val = val
        self.grad = grad
        self.hess = hess


def _gadd(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _scale(g, s):
    # s has the value shape; g carries one (or two) trailing seed axes
    if g is None:
        return None
    s = np.asarray(s)
    extra = g.ndim - s.ndim
    return g * s.reshape(s.shape + (1,) * extra)


def _outer_sym(a, b):
    if a is None or b is None:
        return None
    ab = np.einsum("...i,...j->...ij", a, b)
    ba = np.einsum("...i,...j->...ij", b, a)
    return ab + ba


def _outer(a):
    if a is None:
        return None
    return np.einsum("...i,...j->...ij", a, a)


class _DualContext:
    def __init__(self, seeds: Sequence[str], want_hess: bool):
        self.index = {name: i for i, name in enumerate(seeds)}
        self.m = len(seeds)
        self.want_hess = want_hess


def _dual_unary(u: DualValue, fv, f1, f2, ctx) -> DualValue:
    grad = _scale(u.grad, f1)
    hess = None
    if ctx.want_hess:
        hess = _gadd(_scale(u.hess, f1), _scale(_outer(u.grad), f2))
    return DualValue(fv, grad, hess)


def _dual_mul(a: DualValue, b: DualValue, ctx) -> DualValue:
    val = a.val * b.val
    grad = _gadd(_scale(a.grad, b.val), _scale(b.grad, a.val))
    hess = None
    if ctx.want_hess:
        hess = _gadd(
            _gadd(_scale(a.hess, b.val), _scale(b.hess, a.val)),
            _outer_sym(a.grad, b.grad),
        )
    return DualValue(val, grad, hess)


def _dual_div(a: DualValue, b: DualValue, ctx, node) -> DualValue:
    _check(not np.any(np.asarray(b.val) == 0.0), "division by zero", node)
    inv = 1.0 / b.val
    val = a.val * inv
    grad = _gadd(_scale(a.grad, inv), _scale(b.grad, -val * inv))
    hess = None
    if ctx.want_hess:
        hess = _gadd(_scale(a.hess, inv), _scale(b.hess, -val * inv))
        cross = _outer_sym(a.grad, b.grad)
        if cross is not None:
            hess = _gadd(hess, _scale(cross, -inv * inv))
        sq = _outer(b.grad)
        if sq is not None:
            hess = _gadd(hess, _scale(sq, 2.0 * val * inv * inv))
    return DualValue(val, grad, hess)


def _dual_int_pow(u: DualValue, p, ctx, node) -> DualValue:
    if np.any(p < 0):
        _check(not np.any(np.asarray(u.val) == 0.0), "zero base with negative exponent", node)
    fv = np.power(u.val, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        f1 = np.where(p == 0, 0.0, p * np.power(u.val, np.where(p == 0, 0.0, p - 1)))
        f2 = 0.0
        if ctx.want_hess:
            c2 = p * (p - 1)
            f2 = np.where(c2 == 0, 0.0, c2 * np.power(u.val, np.where(c2 == 0, 0.0, p - 2)))
    return _dual_unary(u, fv, f1, f2, ctx)


def _eval_dual(e: Expr, bindings, ctx: _DualContext) -> DualValue:
    if isinstance(e, Const):
        return DualValue(e.value)
    if isinstance(e, Var):
        try:
            v = bindings[e.name]
        except KeyError:
            raise UnboundVariableError(e.name) from None
        idx = ctx.index.get(e.name)
        if idx is None:
            return DualValue(v)
        shape = np.shape(v)
        grad = np.zeros(shape + (ctx.m,))
        grad[..., idx] = 1.0
        return DualValue(v, grad, None)
    if isinstance(e, Neg):
        u = _eval_dual(e.arg, bindings, ctx)
        return DualValue(
            -u.val,
            None if u.grad is None else -u.grad,
            None if u.hess is None else -u.hess,
        )
    if isinstance(e, Call):
        u = _eval_dual(e.arg, bindings, ctx)
        x = u.val
        if e.fn == "sin":
            return _dual_unary(u, np.sin(x), np.cos(x), -np.sin(x), ctx)
        if e.fn == "cos":
            return _dual_unary(u, np.cos(x), -np.sin(x), -np.cos(x), ctx)
        if e.fn == "exp":
            ex = np.exp(x)
            return _dual_unary(u, ex, ex, ex, ctx)
        if e.fn == "log":
            _check(np.all(np.asarray(x) > 0.0), "log of non-positive value", e)
            return _dual_unary(u, np.log(x), 1.0 / x, -1.0 / (x * x), ctx)
        if e.fn == "sqrt":
            _check(np.all(np.asarray(x) >= 0.0), "sqrt of negative value", e)
            r = np.sqrt(x)
            return _dual_unary(u, r, 0.5 / r, -0.25 / (r * x), ctx)
        if e.fn == "abs":
            s = np.sign(x)
            return _dual_unary(u, np.abs(x), s, 0.0, ctx)
        raise ExprError(f"unsupported function '{e.fn}'")
    a = _eval_dual(e.left, bindings, ctx)
    if e.op == "+":
        b = _eval_dual(e.right, bindings, ctx)
        return DualValue(a.val + b.val, _gadd(a.grad, b.grad), _gadd(a.hess, b.hess))
    if e.op == "-":
        b = _eval_dual(e.right, bindings, ctx)
        nb = DualValue(
            -b.val,
            None if b.grad is None else -b.grad,
            None if b.hess is None else -b.hess,
        )
        return DualValue(a.val + nb.val, _gadd(a.grad, nb.grad), _gadd(a.hess, nb.hess))
    if e.op == "*":
        b = _eval_dual(e.right, bindings, ctx)
        return _dual_mul(a, b, ctx)
    if e.op == "/":
        b = _eval_dual(e.right, bindings, ctx)
        return _dual_div(a, b, ctx, e)
    if e.op == "^":
        b = _eval_dual(e.right, bindings, ctx)
        if b.grad is None and b.hess is None and _is_integral(b.val):
            return _dual_int_pow(a, np.asarray(b.val, dtype=float), ctx, e)
        _check(np.all(np.asarray(a.val) > 0.0), "non-integer power of non-positive base", e)
        # u^v = exp(v*log(u)) for positive base
        logu = _dual_unary(a, np.log(a.val), 1.0 / a.val, -1.0 / (a.val * a.val), ctx)
        w = _dual_mul(b, logu, ctx)
        ew = np.exp(w.val)
        return _dual_unary(w, ew, ew, ew, ctx)
    raise ExprError(f"unsupported operator '{e.op}'")


def _grad_or_zeros(d: DualValue, m: int):
    if d.grad is not None:
        return d.grad
    return np.zeros(np.shape(d.val) + (m,))


def _hess_or_zeros(d: DualValue, m: int):
    if d.hess is not None:
        return d.hess
    return np.zeros(np.shape(d.val) + (m, m))


def gradient(e: Expr, wrt: Sequence[str], bindings: Mapping[str, Value]) -> np.ndarray:
    """Exact forward-mode gradient with respect to the listed coordinates.

    Returns shape ``(m,)`` for scalar bindings, ``batch_shape + (m,)`` for
    array bindings.
    """
    ctx = _DualContext(wrt, want_hess=False)
    d = _eval_dual(e, bindings, ctx)
    return _grad_or_zeros(d, ctx.m)


def hessian(e: Expr, wrt: Sequence[str], bindings: Mapping[str, Value]) -> np.ndarray:
    """Exact symmetric matrix of second derivatives; shape ``(..., m, m)``."""
    ctx = _DualContext(wrt, want_hess=True)
    d = _eval_dual(e, bindings, ctx)
    return _hess_or_zeros(d, ctx.m)


def value_gradient(e: Expr, wrt, bindings):
    ctx = _DualContext(wrt, want_hess=False)
    d = _eval_dual(e, bindings, ctx)
    return d.val, _grad_or_zeros(d, ctx.m)


def value_grad_hess(e: Expr, wrt, bindings):
    ctx = _DualContext(wrt, want_hess=True)
    d = _eval_dual(e, bindings, ctx)
    return d.val, _grad_or_zeros(d, ctx.m), _hess_or_zeros(d, ctx.m)
