"""Symbolic expression trees: parsing, differentiation, evaluation.

Everything downstream (total derivatives, curvature, invariants) is built
on these immutable trees.  There is deliberately no canonical simplifier;
identities are decided semantically by guarded random sampling (see
:mod:`paracr.sampling`).  The only rewriting done here is local constant
folding at construction time, which keeps derivative trees from drowning
in zero branches.

Exact rational constants stay exact through differentiation and
substitution; numeric evaluation is IEEE double.
"""

from __future__ import annotations

from fractions import Fraction
import math
from typing import Iterable, Mapping, Union

Number = Union[int, float, Fraction]

__all__ = [
    "Expr", "Const", "Var", "Sum", "Prod", "Quot", "Pow", "Neg", "Fun",
    "ExprError", "ParseError", "EvalError", "UnboundVariableError",
    "NumericDomainError", "const", "var", "add", "mul", "sub", "div",
    "powi", "neg", "fun", "parse_expr", "differentiate", "substitute",
    "evaluate", "evaluate_scaled", "free_variables", "node_count",
    "to_string", "collect_guards",
]

FUNCTION_NAMES = ("exp", "log", "sqrt", "sin", "cos")

_TINY_DENOMINATOR = 1e-300


class ExprError(Exception):
    """Base class for expression-engine errors."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvalError(ExprError):
    pass


class UnboundVariableError(EvalError):
    pass


class NumericDomainError(EvalError):
    """Division by (numerically) zero, sqrt of a negative, log of <= 0."""


class Expr:
    """Immutable expression node.  Subclasses define ``children``."""

    __slots__ = ()

    children: tuple["Expr", ...] = ()

    # -- convenience operators -------------------------------------------
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, n):
        return powi(self, n)

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        return f"<{type(self).__name__} {to_string(self)}>"


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, Fraction)):
        return Const(Fraction(value))
    if isinstance(value, float):
        return Const(value)
    raise TypeError(f"cannot use {value!r} in an expression")


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: Number):
        if isinstance(value, (int, Fraction)):
            object.__setattr__(self, "value", Fraction(value))
        elif isinstance(value, float):
            object.__setattr__(self, "value", value)
        else:
            raise TypeError(f"bad constant {value!r}")

    def __setattr__(self, *a):  # pragma: no cover - immutability guard
        raise AttributeError("Expr nodes are immutable")

    @property
    def is_exact(self) -> bool:
        return isinstance(self.value, Fraction)

    def __eq__(self, other):
        return isinstance(other, Const) and type(self.value) is type(other.value) \
            and self.value == other.value

    def __hash__(self):
        return hash(("const", type(self.value).__name__, self.value))


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        if not name:
            raise ExprError("variable name must be nonempty")
        object.__setattr__(self, "name", name)

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("Expr nodes are immutable")

    def __eq__(self, other):
        return isinstance(other, Var) and self.name == other.name

    def __hash__(self):
        return hash(("var", self.name))


class _NAry(Expr):
    __slots__ = ("children",)

    def __init__(self, children: Iterable[Expr]):
        object.__setattr__(self, "children", tuple(children))

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("Expr nodes are immutable")

    def __eq__(self, other):
        return type(other) is type(self) and self.children == other.children

    def __hash__(self):
        return hash((type(self).__name__, self.children))


class Sum(_NAry):
    __slots__ = ()


class Prod(_NAry):
    __slots__ = ()


class Quot(_NAry):
    __slots__ = ()

    @property
    def num(self):
        return self.children[0]

    @property
    def den(self):
        return self.children[1]


class Neg(_NAry):
    __slots__ = ()

    @property
    def arg(self):
        return self.children[0]


class Pow(Expr):
    __slots__ = ("children", "exponent")

    def __init__(self, base: Expr, exponent: int):
        object.__setattr__(self, "children", (base,))
        object.__setattr__(self, "exponent", int(exponent))

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("Expr nodes are immutable")

    @property
    def base(self):
        return self.children[0]

    def __eq__(self, other):
        return isinstance(other, Pow) and self.exponent == other.exponent \
            and self.children == other.children

    def __hash__(self):
        return hash(("pow", self.exponent, self.children))


class Fun(Expr):
    __slots__ = ("children", "name")

    def __init__(self, name: str, arg: Expr):
        if name not in FUNCTION_NAMES:
            raise ExprError(f"unknown function {name!r}")
        object.__setattr__(self, "children", (arg,))
        object.__setattr__(self, "name", name)

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("Expr nodes are immutable")

    @property
    def arg(self):
        return self.children[0]

    def __eq__(self, other):
        return isinstance(other, Fun) and self.name == other.name \
            and self.children == other.children

    def __hash__(self):
        return hash(("fun", self.name, self.children))


# ---------------------------------------------------------------------------
# Smart constructors (local constant folding only -- no canonicalization)
# ---------------------------------------------------------------------------

def const(value: Number) -> Expr:
    return _coerce(value)


def var(name: str) -> Var:
    return Var(name)


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0


def _is_one(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 1


def _fold_const(acc, value):
    if isinstance(acc, Fraction) and isinstance(value, Fraction):
        return acc, value
    return float(acc), float(value)


def add(*terms) -> Expr:
    flat: list[Expr] = []
    acc: Number = Fraction(0)
    for t in map(_coerce, terms):
        parts = t.children if isinstance(t, Sum) else (t,)
        for p in parts:
            if isinstance(p, Const):
                acc, v = _fold_const(acc, p.value)
                acc = acc + v
            else:
                flat.append(p)
    if isinstance(acc, float) or acc != 0:
        flat.append(Const(acc))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Sum(flat)


def sub(a, b) -> Expr:
    return add(a, neg(b))


def mul(*factors) -> Expr:
    flat: list[Expr] = []
    acc: Number = Fraction(1)
    for f in map(_coerce, factors):
        parts = f.children if isinstance(f, Prod) else (f,)
        for p in parts:
            if isinstance(p, Const):
                if isinstance(p.value, Fraction) and p.value == 0:
                    return ZERO
                acc, v = _fold_const(acc, p.value)
                acc = acc * v
            else:
                flat.append(p)
    if isinstance(acc, float) or acc != 1:
        flat.insert(0, Const(acc))
    if not flat:
        return ONE
    if len(flat) == 1:
        return flat[0]
    return Prod(flat)


def div(num, den) -> Expr:
    num = _coerce(num)
    den = _coerce(den)
    if isinstance(den, Const):
        if den.value == 0:
            raise ExprError("literal division by zero")
        if _is_one(den):
            return num
        if isinstance(num, Const):
            a, b = _fold_const(num.value, den.value)
            return Const(a / b)
    if _is_zero(num):
        return ZERO
    return Quot((num, den))


def powi(base, exponent: int) -> Expr:
    base = _coerce(base)
    exponent = int(exponent)
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const):
        if isinstance(base.value, Fraction):
            if base.value == 0 and exponent < 0:
                raise ExprError("literal division by zero")
            return Const(base.value ** exponent)
        return Const(base.value ** exponent)
    return Pow(base, exponent)


def neg(e) -> Expr:
    e = _coerce(e)
    if isinstance(e, Const):
        return Const(-e.value)
    if isinstance(e, Neg):
        return e.arg
    return Neg((e,))


def fun(name: str, arg) -> Expr:
    return Fun(name, _coerce(arg))


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------

def differentiate(e: Expr, v: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to variable ``v``."""
    memo: dict[int, Expr] = {}

    def rec(node: Expr) -> Expr:
        key = id(node)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(node, Const):
            out = ZERO
        elif isinstance(node, Var):
            out = ONE if node.name == v else ZERO
        elif isinstance(node, Sum):
            out = add(*[rec(c) for c in node.children])
        elif isinstance(node, Prod):
            terms = []
            kids = node.children
            for i, c in enumerate(kids):
                dc = rec(c)
                if _is_zero(dc):
                    continue
                terms.append(mul(*kids[:i], dc, *kids[i + 1:]))
            out = add(*terms)
        elif isinstance(node, Quot):
            u, w = node.num, node.den
            du, dw = rec(u), rec(w)
            if _is_zero(dw):
                out = div(du, w)
            else:
                out = div(sub(mul(du, w), mul(u, dw)), powi(w, 2))
        elif isinstance(node, Pow):
            db = rec(node.base)
            out = mul(node.exponent, powi(node.base, node.exponent - 1), db)
        elif isinstance(node, Neg):
            out = neg(rec(node.arg))
        elif isinstance(node, Fun):
            da = rec(node.arg)
            if _is_zero(da):
                out = ZERO
            elif node.name == "exp":
                out = mul(node, da)
            elif node.name == "log":
                out = div(da, node.arg)
            elif node.name == "sqrt":
                out = div(da, mul(2, node))
            elif node.name == "sin":
                out = mul(fun("cos", node.arg), da)
            else:  # cos
                out = neg(mul(fun("sin", node.arg), da))
        else:  # pragma: no cover
            raise ExprError(f"cannot differentiate {node!r}")
        memo[key] = out
        return out

    return rec(e)


# ---------------------------------------------------------------------------
# Substitution (simultaneous, capture-free)
# ---------------------------------------------------------------------------

def substitute(e: Expr, bindings: Mapping[str, Expr | Number]) -> Expr:
    coerced = {k: _coerce(v) for k, v in bindings.items()}
    memo: dict[int, Expr] = {}

    def rec(node: Expr) -> Expr:
        key = id(node)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(node, Var):
            out = coerced.get(node.name, node)
        elif isinstance(node, Const):
            out = node
        elif isinstance(node, Sum):
            out = add(*[rec(c) for c in node.children])
        elif isinstance(node, Prod):
            out = mul(*[rec(c) for c in node.children])
        elif isinstance(node, Quot):
            out = div(rec(node.num), rec(node.den))
        elif isinstance(node, Pow):
            out = powi(rec(node.base), node.exponent)
        elif isinstance(node, Neg):
            out = neg(rec(node.arg))
        elif isinstance(node, Fun):
            out = fun(node.name, rec(node.arg))
        else:  # pragma: no cover
            raise ExprError(f"cannot substitute into {node!r}")
        memo[key] = out
        return out

    return rec(e)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def evaluate(e: Expr, point: Mapping[str, float]) -> float:
    """Evaluate at a point; deterministic IEEE double arithmetic."""
    return _eval(e, point, None)


def evaluate_scaled(e: Expr, point: Mapping[str, float]) -> tuple[float, float]:
    """Evaluate and also report max |value| over all subterms.

    The scale is what the semantic zero test uses to reject wild samples.
    """
    scale = [0.0]
    value = _eval(e, point, scale)
    return value, scale[0]


def _eval(e: Expr, point: Mapping[str, float], scale) -> float:
    memo: dict[int, float] = {}

    def rec(node: Expr) -> float:
        key = id(node)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(node, Const):
            out = float(node.value)
        elif isinstance(node, Var):
            try:
                out = float(point[node.name])
            except KeyError:
                raise UnboundVariableError(f"unbound variable {node.name!r}") from None
        elif isinstance(node, Sum):
            out = math.fsum(rec(c) for c in node.children)
        elif isinstance(node, Prod):
            out = 1.0
            for c in node.children:
                out *= rec(c)
        elif isinstance(node, Quot):
            den = rec(node.den)
            if abs(den) < _TINY_DENOMINATOR:
                raise NumericDomainError("division by (numerically) zero")
            out = rec(node.num) / den
        elif isinstance(node, Pow):
            base = rec(node.base)
            if node.exponent < 0 and abs(base) < _TINY_DENOMINATOR:
                raise NumericDomainError("division by (numerically) zero")
            try:
                out = base ** node.exponent
            except OverflowError:
                raise NumericDomainError("power overflow") from None
        elif isinstance(node, Neg):
            out = -rec(node.arg)
        else:  # Fun
            a = rec(node.arg)
            if node.name == "exp":
                try:
                    out = math.exp(a)
                except OverflowError:
                    raise NumericDomainError("exp overflow") from None
            elif node.name == "log":
                if a <= 0.0:
                    raise NumericDomainError("log of a nonpositive value")
                out = math.log(a)
            elif node.name == "sqrt":
                if a < 0.0:
                    raise NumericDomainError("sqrt of a negative value")
                out = math.sqrt(a)
            elif node.name == "sin":
                out = math.sin(a)
            else:
                out = math.cos(a)
        if math.isinf(out) or math.isnan(out):
            raise NumericDomainError("non-finite intermediate value")
        if scale is not None and abs(out) > scale[0]:
            scale[0] = abs(out)
        memo[key] = out
        return out

    return rec(e)


# ---------------------------------------------------------------------------
# Introspection
# ---------------------------------------------------------------------------

def free_variables(e: Expr) -> frozenset[str]:
    seen: set[int] = set()
    names: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if isinstance(node, Var):
            names.add(node.name)
        else:
            stack.extend(node.children)
    return frozenset(names)


def node_count(e: Expr) -> int:
    """Distinct node count (shared subtrees counted once)."""
    seen: set[int] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.extend(node.children)
    return len(seen)


def collect_guards(e: Expr) -> list[Expr]:
    """Denominators and function-domain arguments of ``e``.

    These are the expressions a sample domain must keep away from zero for
    the semantic zero test on ``e`` to be meaningful.
    """
    guards: list[Expr] = []
    seen_nodes: set[int] = set()
    seen_guards: set[Expr] = set()

    def push(g: Expr):
        if isinstance(g, Const):
            return
        if g not in seen_guards:
            seen_guards.add(g)
            guards.append(g)

    stack = [e]
    while stack:
        node = stack.pop()
        if id(node) in seen_nodes:
            continue
        seen_nodes.add(id(node))
        if isinstance(node, Quot):
            push(node.den)
        elif isinstance(node, Pow) and node.exponent < 0:
            push(node.base)
        elif isinstance(node, Fun) and node.name in ("log", "sqrt"):
            push(node.arg)
        stack.extend(node.children)
    return guards


# ---------------------------------------------------------------------------
# Printing (round-trips through the parser)
# ---------------------------------------------------------------------------

_PREC_SUM = 1
_PREC_PROD = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


def to_string(e: Expr) -> str:
    return _print(e, 0)


def _print(e: Expr, parent_prec: int) -> str:
    if isinstance(e, Const):
        v = e.value
        if isinstance(v, Fraction):
            if v.denominator == 1:
                text = str(v.numerator)
                prec = _PREC_NEG if v < 0 else _PREC_ATOM
            else:
                text = f"{v.numerator}/{v.denominator}"
                prec = _PREC_PROD
        else:
            text = repr(v)
            prec = _PREC_NEG if v < 0 else _PREC_ATOM
    elif isinstance(e, Var):
        text, prec = e.name, _PREC_ATOM
    elif isinstance(e, Sum):
        parts = [_print(e.children[0], _PREC_SUM)]
        for c in e.children[1:]:
            if isinstance(c, Neg):
                parts.append(" - " + _print(c.arg, _PREC_SUM + 1))
            elif isinstance(c, Const) and _const_is_negative(c):
                parts.append(" - " + _print(Const(-c.value), _PREC_SUM + 1))
            else:
                parts.append(" + " + _print(c, _PREC_SUM + 1))
        text, prec = "".join(parts), _PREC_SUM
    elif isinstance(e, Prod):
        text = "*".join(_print(c, _PREC_PROD + 1) for c in e.children)
        prec = _PREC_PROD
    elif isinstance(e, Quot):
        text = _print(e.num, _PREC_PROD + 1) + "/" + _print(e.den, _PREC_PROD + 1)
        prec = _PREC_PROD
    elif isinstance(e, Pow):
        exp = str(e.exponent) if e.exponent >= 0 else f"({e.exponent})"
        text = _print(e.base, _PREC_POW + 1) + "^" + exp
        prec = _PREC_POW
    elif isinstance(e, Neg):
        text, prec = "-" + _print(e.arg, _PREC_NEG + 1), _PREC_NEG
    else:  # Fun
        text, prec = f"{e.name}({_print(e.arg, 0)})", _PREC_ATOM
    if prec < parent_prec:
        return "(" + text + ")"
    return text


def _const_is_negative(c: Const) -> bool:
    return c.value < 0


# ---------------------------------------------------------------------------
# Parser: precedence climbing over a token stream
# ---------------------------------------------------------------------------

class _Token:
    __slots__ = ("kind", "text", "offset")

    def __init__(self, kind, text, offset):
        self.kind = kind
        self.text = text
        self.offset = offset


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            start = i
            while i < n and source[i].isdigit():
                i += 1
            is_decimal = False
            if i < n and source[i] == ".":
                is_decimal = True
                i += 1
                while i < n and source[i].isdigit():
                    i += 1
            if i < n and source[i] in "eE" and (
                i + 1 < n and (source[i + 1].isdigit()
                               or (source[i + 1] in "+-" and i + 2 < n and source[i + 2].isdigit()))):
                is_decimal = True
                i += 1
                if source[i] in "+-":
                    i += 1
                while i < n and source[i].isdigit():
                    i += 1
            tokens.append(_Token("decimal" if is_decimal else "integer",
                                 source[start:i], start))
            continue
        if c.isalpha():
            start = i
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
            tokens.append(_Token("ident", source[start:i], start))
            continue
        if c in "+-*/^()":
            tokens.append(_Token(c, c, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(f"expected {kind!r}, found {tok.text or 'end of input'!r}",
                             tok.offset)
        return self.advance()

    def parse(self) -> Expr:
        e = self.expression(0)
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected trailing token {tok.text!r}", tok.offset)
        return e

    def expression(self, min_prec: int) -> Expr:
        lhs = self.unary()
        while True:
            tok = self.peek()
            if tok.kind in ("+", "-") and min_prec <= _PREC_SUM:
                self.advance()
                rhs = self.expression(_PREC_SUM + 1)
                lhs = add(lhs, rhs) if tok.kind == "+" else sub(lhs, rhs)
            elif tok.kind in ("*", "/") and min_prec <= _PREC_PROD:
                self.advance()
                rhs = self.expression(_PREC_PROD + 1)
                lhs = mul(lhs, rhs) if tok.kind == "*" else div(lhs, rhs)
            else:
                return lhs

    def unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "-":
            self.advance()
            return neg(self.unary())
        if tok.kind == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().kind == "^":
            self.advance()
            return powi(base, self.integer_exponent())
        return base

    def integer_exponent(self) -> int:
        sign = 1
        tok = self.peek()
        if tok.kind == "-":
            self.advance()
            sign = -1
        paren = False
        if self.peek().kind == "(":
            self.advance()
            paren = True
            if self.peek().kind == "-":
                self.advance()
                sign = -sign
        tok = self.peek()
        if tok.kind != "integer":
            raise ParseError("exponent must be an integer literal", tok.offset)
        self.advance()
        n = int(tok.text)
        if paren:
            self.expect(")")
        if self.peek().kind == "^":  # right-associative exponent tower
            self.advance()
            n = n ** self.integer_exponent()
        return sign * n

    def atom(self) -> Expr:
        tok = self.advance()
        if tok.kind == "integer":
            return Const(Fraction(int(tok.text)))
        if tok.kind == "decimal":
            return Const(float(tok.text))
        if tok.kind == "ident":
            if self.peek().kind == "(":
                if tok.text not in FUNCTION_NAMES:
                    raise ParseError(f"unknown function {tok.text!r}", tok.offset)
                self.advance()
                arg = self.expression(0)
                self.expect(")")
                return fun(tok.text, arg)
            return Var(tok.text)
        if tok.kind == "(":
            e = self.expression(0)
            self.expect(")")
            return e
        raise ParseError(f"unexpected token {tok.text or 'end of input'!r}", tok.offset)


def parse_expr(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Grammar: identifiers ``[A-Za-z][A-Za-z0-9_]*``; integer, decimal and
    ``a/b`` rational literals; ``+ - * / ^`` with standard precedence and
    integer exponents; functions exp, log, sqrt, sin, cos; parentheses.
    """
    return _Parser(_tokenize(text)).parse()
