"""Expression trees for linear differential operators and a recursive-descent parser.

Grammar (whitespace-insensitive)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom (('^' | '**') unary)?
    atom    := number | 'x' | 'y' | 'u' | 'pi' | 'i'
             | func '(' expr ')'
             | 'diff' '(' expr [',' ('x' | 'y')] [',' integer] ')'
             | ('laplacian' | 'lap') '(' expr ')'
             | ('biharmonic' | 'biharm') '(' expr ')'
             | '(' expr ')'

With ``point_eval=True`` a ``u`` or ``diff(...)`` atom may be followed by
``'(' expr ')'`` to evaluate it at a point, e.g. ``u(-1)`` or
``diff(u,x,1)(1)``.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonlinearityError, ParseError

FUNCS = ("sin", "cos", "tan", "exp", "sinh", "cosh", "tanh", "sqrt", "log", "abs", "real", "imag")


class Node:
    __slots__ = ()

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __truediv__(self, other):
        return div(self, _lift(other))


def _lift(v):
    return v if isinstance(v, Node) else Const(complex(v))


@dataclass(frozen=True)
class U(Node):
    pass


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Const(Node):
    value: complex


@dataclass(frozen=True)
class Diff(Node):
    child: Node
    var: str | None
    order: int


@dataclass(frozen=True)
class Add(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Sub(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Mul(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Div(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Neg(Node):
    child: Node


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: Node


@dataclass(frozen=True)
class Func(Node):
    name: str
    child: Node


@dataclass(frozen=True)
class Laplacian(Node):
    child: Node


@dataclass(frozen=True)
class Biharmonic(Node):
    child: Node


@dataclass(frozen=True)
class At(Node):
    """A u-term evaluated at a point (1-D constraint strings only)."""

    child: Node
    point: Node


ZERO = Const(0j)
ONE = Const(1 + 0j)


def _is_const(n: Node, v=None) -> bool:
    return isinstance(n, Const) and (v is None or n.value == v)


def add(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    return Add(a, b)


def sub(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0):
        return a
    if _is_const(a, 0):
        return neg(b)
    return Sub(a, b)


def neg(a: Node) -> Node:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.child
    return Neg(a)


def mul(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0) or _is_const(b, 0):
        return ZERO
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    return Mul(a, b)


def div(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b) and b.value != 0:
        return Const(a.value / b.value)
    if _is_const(a, 0):
        return ZERO
    if _is_const(b, 1):
        return a
    return Div(a, b)


def power(a: Node, e: Node) -> Node:
    if _is_const(a) and _is_const(e):
        try:
            return Const(complex(a.value) ** e.value)
        except ZeroDivisionError:
            pass
    if _is_const(e, 0):
        return ONE
    if _is_const(e, 1):
        return a
    return Pow(a, e)


def func(name: str, a: Node) -> Node:
    if _is_const(a):
        return Const(complex(_SCALAR_FUNCS[name](a.value)))
    return Func(name, a)


def _cplx(f_real, f_cplx):
    def g(v):
        v = complex(v)
        if v.imag == 0:
            try:
                return f_real(v.real)
            except ValueError:
                pass
        return f_cplx(v)

    return g


_SCALAR_FUNCS = {
    "sin": _cplx(math.sin, cmath.sin),
    "cos": _cplx(math.cos, cmath.cos),
    "tan": _cplx(math.tan, cmath.tan),
    "exp": _cplx(math.exp, cmath.exp),
    "sinh": _cplx(math.sinh, cmath.sinh),
    "cosh": _cplx(math.cosh, cmath.cosh),
    "tanh": _cplx(math.tanh, cmath.tanh),
    "sqrt": _cplx(math.sqrt, cmath.sqrt),
    "log": _cplx(math.log, cmath.log),
    "abs": abs,
    "real": lambda v: complex(v).real,
    "imag": lambda v: complex(v).imag,
}

_ARRAY_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "sqrt": lambda v: np.sqrt(v) if np.iscomplexobj(v) or np.all(v >= 0) else np.sqrt(v + 0j),
    "log": lambda v: np.log(v) if np.iscomplexobj(v) or np.all(v > 0) else np.log(v + 0j),
    "abs": np.abs,
    "real": np.real,
    "imag": np.imag,
}


# ---------------------------------------------------------------- tokenizer

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(text: str):
    pos = 0
    toks = []
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", offset=_byte_offset(text, pos), text=text)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("end", "", n))
    return toks


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text: str, point_eval: bool):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.point_eval = point_eval

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return ParseError(msg, offset=_byte_offset(self.text, tok[2]), text=self.text)

    def expect(self, value):
        tok = self.next()
        if tok[1] != value:
            shown = tok[1] or "end of input"
            raise self.error(f"expected {value!r}, found {shown!r}", tok)
        return tok

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.next()[1]
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self) -> Node:
        if self.peek()[1] == "-":
            self.next()
            return Neg(self.unary())
        if self.peek()[1] == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.next()
            return Pow(base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.next()
        kind, val, _ = tok
        if kind == "num":
            return Const(complex(float(val)))
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind != "id":
            shown = val or "end of input"
            raise self.error(f"unexpected {shown!r}", tok)
        if val in ("x", "y"):
            return Var(val)
        if val == "u":
            return self._maybe_at(U())
        if val == "pi":
            return Const(complex(math.pi))
        if val == "i":
            return Const(1j)
        if val in FUNCS:
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Func(val, arg)
        if val in ("laplacian", "lap"):
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Laplacian(arg)
        if val in ("biharmonic", "biharm"):
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Biharmonic(arg)
        if val == "diff":
            return self._maybe_at(self._diff())
        raise self.error(f"unknown identifier {val!r}", tok)

    def _diff(self) -> Node:
        self.expect("(")
        child = self.expr()
        var, order = None, 1
        if self.peek()[1] == ",":
            self.next()
            tok = self.next()
            if tok[0] == "id" and tok[1] in ("x", "y"):
                var = tok[1]
                if self.peek()[1] == ",":
                    self.next()
                    tok = self.next()
                    order = self._order(tok)
            else:
                order = self._order(tok)
        self.expect(")")
        return Diff(child, var, order)

    def _order(self, tok) -> int:
        if tok[0] != "num" or not re.fullmatch(r"\d+", tok[1]):
            raise self.error("derivative order must be a non-negative integer", tok)
        return int(tok[1])

    def _maybe_at(self, node: Node) -> Node:
        if self.point_eval and self.peek()[1] == "(":
            self.next()
            pt = self.expr()
            self.expect(")")
            return At(node, pt)
        return node


def parse(text: str, point_eval: bool = False) -> Node:
    """Parse a string into an expression tree (no linearity check)."""
    if not text or not text.strip():
        raise ParseError("empty expression", offset=0, text=text)
    return _Parser(text, point_eval).parse()


def parse_pdo(text: str) -> Node:
    """Parse a PDO string and check that it is linear in ``u``."""
    node = parse(text)
    check_linear(node)
    if not contains_u(node):
        raise ParseError("operator does not involve u", offset=0, text=text)
    return node


# ---------------------------------------------------------------- analysis

def contains_u(n: Node) -> bool:
    if isinstance(n, U):
        return True
    if isinstance(n, (Var, Const)):
        return False
    if isinstance(n, (Add, Sub, Mul, Div)):
        return contains_u(n.left) or contains_u(n.right)
    if isinstance(n, Pow):
        return contains_u(n.base) or contains_u(n.exponent)
    if isinstance(n, (Neg, Func, Laplacian, Biharmonic, Diff)):
        return contains_u(n.child)
    if isinstance(n, At):
        return contains_u(n.child) or contains_u(n.point)
    raise TypeError(f"unknown node {n!r}")


def free_vars(n: Node) -> set:
    if isinstance(n, Var):
        return {n.name}
    if isinstance(n, (U, Const)):
        return set()
    if isinstance(n, (Add, Sub, Mul, Div)):
        return free_vars(n.left) | free_vars(n.right)
    if isinstance(n, Pow):
        return free_vars(n.base) | free_vars(n.exponent)
    if isinstance(n, (Neg, Func, Laplacian, Biharmonic, Diff)):
        return free_vars(n.child)
    if isinstance(n, At):
        return free_vars(n.child) | free_vars(n.point)
    raise TypeError(f"unknown node {n!r}")


def check_linear(n: Node) -> None:
    """Raise :class:`NonlinearityError` unless ``n`` is affine in ``u``."""
    if isinstance(n, (U, Var, Const)):
        return
    if isinstance(n, (Add, Sub)):
        check_linear(n.left)
        check_linear(n.right)
    elif isinstance(n, Mul):
        check_linear(n.left)
        check_linear(n.right)
        if contains_u(n.left) and contains_u(n.right):
            raise NonlinearityError("product of two u-terms")
    elif isinstance(n, Div):
        check_linear(n.left)
        if contains_u(n.right):
            raise NonlinearityError("division by a u-term")
    elif isinstance(n, Pow):
        if contains_u(n.base) or contains_u(n.exponent):
            raise NonlinearityError("power of a u-term")
    elif isinstance(n, Func):
        if contains_u(n.child):
            raise NonlinearityError(f"{n.name}() applied to a u-term")
    elif isinstance(n, (Diff, Laplacian, Biharmonic)):
        check_linear(n.child)
        if not contains_u(n.child):
            raise NonlinearityError("derivatives apply only to u-terms")
    elif isinstance(n, Neg):
        check_linear(n.child)
    elif isinstance(n, At):
        check_linear(n.child)
        if contains_u(n.point) or free_vars(n.point):
            raise ParseError("evaluation point must be a constant")
    else:
        raise TypeError(f"unknown node {n!r}")


def derivative(n: Node, var: str) -> Node:
    """Symbolic derivative of a u-free tree."""
    if isinstance(n, Const):
        return ZERO
    if isinstance(n, Var):
        return ONE if n.name == var else ZERO
    if isinstance(n, Add):
        return add(derivative(n.left, var), derivative(n.right, var))
    if isinstance(n, Sub):
        return sub(derivative(n.left, var), derivative(n.right, var))
    if isinstance(n, Neg):
        return neg(derivative(n.child, var))
    if isinstance(n, Mul):
        return add(mul(derivative(n.left, var), n.right), mul(n.left, derivative(n.right, var)))
    if isinstance(n, Div):
        num = sub(mul(derivative(n.left, var), n.right), mul(n.left, derivative(n.right, var)))
        return div(num, power(n.right, Const(2 + 0j)))
    if isinstance(n, Pow):
        db = derivative(n.base, var)
        de = derivative(n.exponent, var)
        term = mul(mul(n.exponent, power(n.base, sub(n.exponent, ONE))), db)
        if _is_const(de, 0):
            return term
        return add(term, mul(mul(n, func("log", n.base)), de))
    if isinstance(n, Func):
        a = n.child
        da = derivative(a, var)
        if _is_const(da, 0):
            return ZERO
        name = n.name
        if name == "sin":
            outer = func("cos", a)
        elif name == "cos":
            outer = neg(func("sin", a))
        elif name == "tan":
            outer = div(ONE, power(func("cos", a), Const(2 + 0j)))
        elif name == "exp":
            outer = n
        elif name == "sinh":
            outer = func("cosh", a)
        elif name == "cosh":
            outer = func("sinh", a)
        elif name == "tanh":
            outer = sub(ONE, power(n, Const(2 + 0j)))
        elif name == "sqrt":
            outer = div(Const(0.5 + 0j), n)
        elif name == "log":
            outer = div(ONE, a)
        elif name in ("real", "imag"):
            return func(name, da)
        else:
            raise ParseError(f"cannot differentiate {name}()")
        return mul(outer, da)
    raise ParseError("cannot differentiate a u-term as a coefficient")


def simplify(n: Node) -> Node:
    """Constant-fold a tree bottom-up."""
    if isinstance(n, (Const, Var, U)):
        return n
    if isinstance(n, Add):
        return add(simplify(n.left), simplify(n.right))
    if isinstance(n, Sub):
        return sub(simplify(n.left), simplify(n.right))
    if isinstance(n, Mul):
        return mul(simplify(n.left), simplify(n.right))
    if isinstance(n, Div):
        return div(simplify(n.left), simplify(n.right))
    if isinstance(n, Neg):
        return neg(simplify(n.child))
    if isinstance(n, Pow):
        return power(simplify(n.base), simplify(n.exponent))
    if isinstance(n, Func):
        return func(n.name, simplify(n.child))
    return n


def compile_free(n: Node) -> Callable:
    """Numpy callable ``f(x, y)`` for a u-free tree."""
    if contains_u(n):
        raise ParseError("expression depends on u where a plain function was expected")

    def build(m: Node):
        if isinstance(m, Const):
            v = m.value.real if m.value.imag == 0 else m.value
            return lambda x, y: v
        if isinstance(m, Var):
            return (lambda x, y: x) if m.name == "x" else (lambda x, y: y)
        if isinstance(m, Neg):
            f = build(m.child)
            return lambda x, y: -f(x, y)
        if isinstance(m, Func):
            f = build(m.child)
            g = _ARRAY_FUNCS[m.name]
            return lambda x, y: g(np.asarray(f(x, y)))
        if isinstance(m, Pow):
            f, e = build(m.base), build(m.exponent)
            return lambda x, y: _pow(f(x, y), e(x, y))
        f, g = build(m.left), build(m.right)
        if isinstance(m, Add):
            return lambda x, y: f(x, y) + g(x, y)
        if isinstance(m, Sub):
            return lambda x, y: f(x, y) - g(x, y)
        if isinstance(m, Mul):
            return lambda x, y: f(x, y) * g(x, y)
        if isinstance(m, Div):
            return lambda x, y: f(x, y) / g(x, y)
        raise TypeError(f"cannot compile {m!r}")

    return build(simplify(n))


def _pow(base, e):
    base = np.asarray(base)
    e = np.asarray(e)
    if np.iscomplexobj(e) and not np.any(np.imag(e)):
        e = np.real(e)
    if e.ndim == 0 and float(e) == int(float(e)) and not np.iscomplexobj(e):
        return base ** int(float(e))
    if not np.iscomplexobj(base) and np.any(base < 0):
        base = base + 0j
    return base**e


def const_value(n: Node) -> complex | None:
    n = simplify(n)
    return n.value if isinstance(n, Const) else None


# ---------------------------------------------------------------- forward-mode extraction

def linear_parts(n: Node, normal: str | None = None):
    """Split an affine-in-u tree into ``({(i, j): coeff_tree}, free_tree)``.

    Keys count derivatives: ``i`` in ``y``, ``j`` in ``x``.  Each coefficient
    is a u-free tree; derivatives of variable coefficients follow the
    product rule.  ``normal`` names the variable an unqualified ``diff``
    refers to (constraint strings).
    """
    if isinstance(n, U):
        return {(0, 0): ONE}, ZERO
    if not contains_u(n):
        return {}, n
    if isinstance(n, (Add, Sub)):
        ca, fa = linear_parts(n.left, normal)
        cb, fb = linear_parts(n.right, normal)
        op = add if isinstance(n, Add) else sub
        out = dict(ca)
        for k, v in cb.items():
            out[k] = op(out.get(k, ZERO), v)
        return out, op(fa, fb)
    if isinstance(n, Neg):
        c, f = linear_parts(n.child, normal)
        return {k: neg(v) for k, v in c.items()}, neg(f)
    if isinstance(n, Mul):
        if contains_u(n.left) and contains_u(n.right):
            raise NonlinearityError("product of two u-terms")
        scal, lin = (n.left, n.right) if not contains_u(n.left) else (n.right, n.left)
        c, f = linear_parts(lin, normal)
        return {k: mul(scal, v) for k, v in c.items()}, mul(scal, f)
    if isinstance(n, Div):
        if contains_u(n.right):
            raise NonlinearityError("division by a u-term")
        c, f = linear_parts(n.left, normal)
        return {k: div(v, n.right) for k, v in c.items()}, div(f, n.right)
    if isinstance(n, Diff):
        var = n.var or normal
        if var is None:
            raise ParseError("diff() needs an explicit variable, e.g. diff(u,x,2)")
        c, f = linear_parts(n.child, normal)
        for _ in range(n.order):
            c, f = _diff_once(c, var), derivative(f, var)
        return c, f
    if isinstance(n, Laplacian):
        c, f = linear_parts(n.child, normal)
        cx, fx = _diff_k(c, f, "x", 2)
        cy, fy = _diff_k(c, f, "y", 2)
        return _merge(cx, cy), add(fx, fy)
    if isinstance(n, Biharmonic):
        c, f = linear_parts(n.child, normal)
        c4x, f4x = _diff_k(c, f, "x", 4)
        c4y, f4y = _diff_k(c, f, "y", 4)
        c2, f2 = _diff_k(*_diff_k(c, f, "x", 2), "y", 2)
        c2 = {k: mul(Const(2 + 0j), v) for k, v in c2.items()}
        return _merge(_merge(c4x, c4y), c2), add(add(f4x, f4y), mul(Const(2 + 0j), f2))
    if isinstance(n, (Func, Pow)):
        raise NonlinearityError("nonlinear function of a u-term")
    if isinstance(n, At):
        raise ParseError("point evaluation is only allowed in 1-D constraints")
    raise TypeError(f"unknown node {n!r}")


def _diff_once(c: dict, var: str) -> dict:
    out = {}
    for (i, j), coef in c.items():
        dc = derivative(coef, var)
        if not _is_const(dc, 0):
            out[(i, j)] = add(out.get((i, j), ZERO), dc)
        key = (i + 1, j) if var == "y" else (i, j + 1)
        out[key] = add(out.get(key, ZERO), coef)
    return out


def _diff_k(c, f, var, k):
    for _ in range(k):
        c, f = _diff_once(c, var), derivative(f, var)
    return c, f


def _merge(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = add(out.get(k, ZERO), v)
    return out


def point_functionals(n: Node, var: str = "x"):
    """Split a 1-D constraint like ``u(1)/5 + diff(u,x,1)(1)`` into ``(combo, free)``.

    ``combo`` is a list of ``(coef, point, deriv)``; ``free`` the u-free part.
    """
    if isinstance(n, At):
        pt = const_value(n.point)
        if pt is None or pt.imag != 0:
            raise ParseError("evaluation point must be a real constant")
        c, f = linear_parts(n.child, var)
        if not _is_const(simplify(f), 0):
            raise ParseError("point evaluation applies to u-terms only")
        combo = []
        for (i, j), coef in c.items():
            if i:
                raise ParseError(f"derivative in a variable other than {var}")
            cv = const_value(coef)
            if cv is None:
                raise ParseError("constraint coefficients must be constants")
            combo.append((_real_if(cv), pt.real, j))
        return combo, ZERO
    if not contains_u(n):
        return [], n
    if isinstance(n, (Add, Sub)):
        ca, fa = point_functionals(n.left, var)
        cb, fb = point_functionals(n.right, var)
        if isinstance(n, Sub):
            cb = [(-c, p, d) for c, p, d in cb]
            return ca + cb, sub(fa, fb)
        return ca + cb, add(fa, fb)
    if isinstance(n, Neg):
        c, f = point_functionals(n.child, var)
        return [(-k, p, d) for k, p, d in c], neg(f)
    if isinstance(n, (Mul, Div)):
        if isinstance(n, Div):
            if contains_u(n.right):
                raise NonlinearityError("division by a u-term")
            lin, scal, inv = n.left, n.right, True
        else:
            if contains_u(n.left) and contains_u(n.right):
                raise NonlinearityError("product of two u-terms")
            lin, scal = (n.right, n.left) if not contains_u(n.left) else (n.left, n.right)
            inv = False
        s = const_value(scal)
        if s is None:
            raise ParseError("constraint coefficients must be constants")
        s = 1 / s if inv else s
        c, f = point_functionals(lin, var)
        return [(_real_if(k * s), p, d) for k, p, d in c], mul(Const(complex(s)), f)
    raise ParseError("constraint must be a linear combination of point values like u(-1)")


def _real_if(v: complex):
    v = complex(v)
    return v.real if v.imag == 0 else v
