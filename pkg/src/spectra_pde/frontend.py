"""From operator and constraint strings to coefficient arrays and edge constraints.

The coefficient array of a linear PDO ``sum l_ij(x, y) d^{i+j} u / dy^i dx^j``
is obtained by pushing ``(i, j) -> coefficient`` maps up the expression
tree (see :func:`spectra_pde.expr.linear_parts`) and sampling each
coefficient into a :class:`Cheb2`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import expr as E
from .chebcore import DEFAULT_TOL, UNIT, Cheb1, Cheb2, Interval, interp1_adaptive, interp2_adaptive
from .errors import ParseError
from .ultraops import LinearODO

EDGES = ("left", "right", "down", "up")
# edge -> (normal variable, tangential variable)
EDGE_VARS = {"left": ("x", "y"), "right": ("x", "y"), "down": ("y", "x"), "up": ("y", "x")}


def _interval(iv) -> Interval:
    return iv if isinstance(iv, Interval) else Interval(*iv)


@dataclass(frozen=True, eq=False)
class CoeffArray:
    """Variable coefficients ``l_ij`` keyed by ``(y-order, x-order)``; absent keys are zero."""

    entries: dict
    xinterval: Interval = UNIT
    yinterval: Interval = UNIT

    def __post_init__(self):
        xi, yi = _interval(self.xinterval), _interval(self.yinterval)
        object.__setattr__(self, "xinterval", xi)
        object.__setattr__(self, "yinterval", yi)
        ent = {}
        for (i, j), c in dict(self.entries).items():
            if not isinstance(c, Cheb2):
                c = Cheb2(np.atleast_2d(c), xi, yi)
            ent[(int(i), int(j))] = c
        object.__setattr__(self, "entries", dict(sorted(ent.items())))

    @property
    def Nx(self) -> int:
        return max((j for _, j in self.entries), default=0)

    @property
    def Ny(self) -> int:
        return max((i for i, _ in self.entries), default=0)

    @property
    def domain(self) -> tuple:
        return (self.xinterval.a, self.xinterval.b, self.yinterval.a, self.yinterval.b)

    def get(self, i: int, j: int) -> Cheb2 | None:
        return self.entries.get((i, j))

    def as_grid(self) -> np.ndarray:
        """``(Ny+1) x (Nx+1)`` object array with ``None`` for absent entries."""
        out = np.empty((self.Ny + 1, self.Nx + 1), dtype=object)
        for (i, j), c in self.entries.items():
            out[i, j] = c
        return out

    def is_constant(self) -> bool:
        return all(c.is_constant() for c in self.entries.values())

    def transposed(self) -> "CoeffArray":
        """Swap the roles of x and y."""
        ent = {(j, i): Cheb2(c.X.T, self.yinterval, self.xinterval) for (i, j), c in self.entries.items()}
        return CoeffArray(ent, self.yinterval, self.xinterval)

    def __repr__(self):
        keys = ", ".join(f"{k}: {c.shape}" for k, c in self.entries.items())
        return f"CoeffArray({{{keys}}})"


def _sample_coeff(node: E.Node, xi: Interval, yi: Interval, tol: float) -> Cheb2:
    v = E.const_value(node)
    if v is not None:
        val = v.real if v.imag == 0 else v
        return Cheb2(np.array([[val]]), xi, yi)
    return interp2_adaptive(E.compile_free(node), xi, yi, tol)


def extract_coeffs(e: E.Node | str, xinterval=UNIT, yinterval=UNIT, tol: float = DEFAULT_TOL) -> CoeffArray:
    """Coefficient array of a PDO given as a tree or a string.

    Entries whose largest Chebyshev coefficient is below ``tol`` times the
    largest over all entries are dropped.
    """
    if isinstance(e, str):
        e = E.parse_pdo(e)
    else:
        E.check_linear(e)
    xi, yi = _interval(xinterval), _interval(yinterval)
    coeffs, free = E.linear_parts(e)
    if not E._is_const(E.simplify(free), 0):
        raise ParseError("operator contains a term without u; put forcing terms in the right-hand side")
    sampled = {k: _sample_coeff(E.simplify(node), xi, yi, tol) for k, node in coeffs.items()}
    scale = max((np.abs(c.X).max() for c in sampled.values()), default=0.0)
    kept = {k: c.trim(tol) for k, c in sampled.items() if scale > 0 and np.abs(c.X).max() > tol * scale}
    return CoeffArray(kept, xi, yi)


def parse_function(text: str | float | Callable, variables=("x", "y")) -> Callable:
    """Compile a u-free expression string into a numpy callable of ``variables``."""
    if callable(text):
        return text
    if not isinstance(text, str):
        value = complex(text)
        value = value.real if value.imag == 0 else value
        return lambda *args: value
    node = E.parse(text)
    if E.contains_u(node):
        raise ParseError("u is not allowed here", offset=0, text=text)
    extra = E.free_vars(node) - set(variables)
    if extra:
        raise ParseError(f"unexpected variable(s) {sorted(extra)}; allowed: {list(variables)}", offset=0, text=text)
    f = E.compile_free(node)
    if tuple(variables) == ("x", "y"):
        return f
    if tuple(variables) == ("x",):
        return lambda x: f(x, 0.0)
    if tuple(variables) == ("y",):
        return lambda y: f(0.0, y)
    raise ValueError(f"unsupported variables {variables}")


# ---------------------------------------------------------------- boundary conditions

@dataclass(frozen=True, eq=False)
class Constraint:
    """``sum_k coef_k * d^{deriv_k} u / dn^{deriv_k} = data`` along one edge.

    ``n`` is the coordinate normal to the edge (``x`` for left/right edges,
    ``y`` for down/up), differentiated in its own direction rather than the
    outward normal.  ``data`` is a number, a callable of the tangential
    coordinate, or a u-free expression tree in ``x`` and ``y`` (the normal
    coordinate is then fixed at the edge).
    """

    combo: tuple
    data: object = 0.0

    def __post_init__(self):
        combo = tuple((c, int(d)) for c, d in self.combo)
        if not combo:
            raise ValueError("constraint has no terms")
        object.__setattr__(self, "combo", combo)

    @property
    def max_deriv(self) -> int:
        return max(d for _, d in self.combo)

    def data_function(self, edge: str, edge_coord: float) -> Callable:
        """Callable of the tangential coordinate."""
        data = self.data
        if isinstance(data, E.Node):
            f = E.compile_free(data)
            if EDGE_VARS[edge][0] == "x":
                return lambda t: f(edge_coord, t)
            return lambda t: f(t, edge_coord)
        if callable(data):
            return data
        value = complex(data)
        value = value.real if value.imag == 0 else value
        return lambda t: value


@dataclass(frozen=True, eq=False)
class BcSpec:
    """The constraints imposed on one edge (possibly none)."""

    constraints: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @property
    def K(self) -> int:
        return len(self.constraints)

    @classmethod
    def dirichlet(cls, data=0.0) -> "BcSpec":
        return cls((Constraint(((1.0, 0),), data),))

    @classmethod
    def neumann(cls, data=0.0) -> "BcSpec":
        return cls((Constraint(((1.0, 1),), data),))

    @classmethod
    def none(cls) -> "BcSpec":
        return cls(())

    def __add__(self, other: "BcSpec") -> "BcSpec":
        return BcSpec(self.constraints + other.constraints)

    def kind(self) -> str | None:
        """``"dirichlet"`` or ``"neumann"`` when every constraint is that pure type."""
        if self.K != 1:
            return None
        combo = self.constraints[0].combo
        if len(combo) == 1 and combo[0][0] != 0:
            return {0: "dirichlet", 1: "neumann"}.get(combo[0][1])
        return None


def _data_node(text: str, edge: str, offset: int) -> E.Node:
    try:
        node = E.parse(text)
    except ParseError as exc:
        raise exc.shifted(offset) from None
    if E.contains_u(node):
        raise ParseError("boundary data may not contain u", offset=offset)
    return node


def _split(text: str, sep: str):
    """Split on ``sep`` and keep the byte offset of each piece."""
    out, pos = [], 0
    for piece in text.split(sep):
        out.append((piece, len(text[:pos].encode("utf-8"))))
        pos += len(piece) + len(sep)
    return out


def _parse_constraint(text: str, edge: str, offset: int) -> Constraint:
    normal, tangential = EDGE_VARS[edge]
    if "=" in text:
        lhs_text, rhs_text = text.split("=", 1)
        rhs_off = offset + len(lhs_text.encode("utf-8")) + 1
        if "=" in rhs_text:
            raise ParseError("more than one '=' in a constraint", offset=rhs_off + rhs_text.index("="))
    else:
        lhs_text, rhs_text, rhs_off = text, None, 0
    try:
        lhs = E.parse(lhs_text)
        E.check_linear(lhs)
    except ParseError as exc:
        raise exc.shifted(offset) from None
    rhs = _data_node(rhs_text, edge, rhs_off) if rhs_text is not None else E.ZERO
    if not E.contains_u(lhs):
        if rhs_text is not None:
            raise ParseError("left-hand side of a constraint must involve u", offset=offset)
        return Constraint(((1.0, 0),), lhs)
    coeffs, free = E.linear_parts(lhs, normal=normal)
    combo = []
    for (i, j), node in coeffs.items():
        tang_order = i if normal == "x" else j
        norm_order = j if normal == "x" else i
        if tang_order:
            raise ParseError(f"derivatives along the edge ({tangential}) are not supported in constraints", offset=offset)
        v = E.const_value(node)
        if v is None:
            raise ParseError("constraint coefficients must be constants", offset=offset)
        if v != 0:
            combo.append((v.real if v.imag == 0 else v, norm_order))
    if not combo:
        raise ParseError("constraint has no u-terms after simplification", offset=offset)
    data = E.simplify(E.sub(rhs, free))
    return Constraint(tuple(sorted(combo, key=lambda t: t[1])), data)


def parse_bc(text: str, edge: str) -> BcSpec:
    """Parse the constraint string for one edge.

    Accepted forms::

        dirichlet: g         u = g on the edge (g defaults to 0)
        neumann: g           du/dn = g, n the normal coordinate
        g                    shorthand for dirichlet: g when g has no u
        u/5 + diff(u) = g    general combination; diff(u) and diff(u, k)
                             differentiate in the normal coordinate
        c1; c2               several constraints on one edge
    """
    if edge not in EDGE_VARS:
        raise ValueError(f"edge must be one of {EDGES}, got {edge!r}")
    if not isinstance(text, str):
        return BcSpec.dirichlet(text)
    stripped = text.strip()
    if not stripped:
        raise ParseError("empty boundary condition", offset=0, text=text)
    head, sep, rest = stripped.partition(":")
    tag = head.strip().lower()
    if sep or tag in ("dirichlet", "neumann"):
        if tag not in ("dirichlet", "neumann"):
            raise ParseError(f"unknown boundary condition type {head.strip()!r}", offset=0, text=text)
        off = len(text[: text.index(head) + len(head) + len(sep)].encode("utf-8"))
        data = _data_node(rest, edge, off) if rest.strip() else E.ZERO
        return BcSpec.dirichlet(data) if tag == "dirichlet" else BcSpec.neumann(data)
    return BcSpec(tuple(_parse_constraint(piece, edge, off) for piece, off in _split(text, ";") if piece.strip()))


# ---------------------------------------------------------------- one dimension

def parse_ode(text: str, interval=UNIT, tol: float = DEFAULT_TOL) -> LinearODO:
    """Linear ODO in ``x`` from a string such as ``"1e-3*diff(u,x,2) + x*diff(u,x,1)"``."""
    iv = _interval(interval)
    node = E.parse_pdo(text)
    if "y" in E.free_vars(node):
        raise ParseError("an ODE operator may only use x", offset=0, text=text)
    coeffs, free = E.linear_parts(node, normal="x")
    if not E._is_const(E.simplify(free), 0):
        raise ParseError("operator contains a term without u; put forcing terms in the right-hand side")
    terms = {}
    for (i, j), c in coeffs.items():
        if i:
            raise ParseError("y-derivative in an ODE operator", offset=0, text=text)
        c = E.simplify(c)
        v = E.const_value(c)
        if v is not None:
            terms[j] = Cheb1(np.array([v.real if v.imag == 0 else v]), iv)
        else:
            f = E.compile_free(c)
            terms[j] = interp1_adaptive(lambda x, f=f: f(x, 0.0), iv, tol)
    scale = max((np.abs(a.coeffs).max() for a in terms.values()), default=0.0)
    terms = {k: a for k, a in terms.items() if np.abs(a.coeffs).max() > tol * scale}
    return LinearODO(terms, iv)


def parse_ode_bcs(text, interval=UNIT):
    """Point constraints like ``"u(-1)=1; diff(u,x,1)(1) = 0"`` -> ``(functionals, values)``.

    ``text`` may be a single ``;``-separated string or a list of strings.
    """
    iv = _interval(interval)
    pieces = []
    for item in [text] if isinstance(text, str) else list(text):
        pieces.extend(_split(item, ";"))
    functionals, values = [], []
    for piece, off in pieces:
        if not piece.strip():
            continue
        lhs_text, eq, rhs_text = piece.partition("=")
        try:
            lhs = E.parse(lhs_text, point_eval=True)
            E.check_linear(lhs)
            combo, free = E.point_functionals(lhs, "x")
        except ParseError as exc:
            raise exc.shifted(off, text) from None
        if not combo:
            raise ParseError("constraint must involve u at a point, e.g. u(-1)=1", offset=off, text=text)
        rhs = E.ZERO
        if eq:
            rhs_off = off + len(lhs_text.encode("utf-8")) + 1
            try:
                rhs = E.parse(rhs_text)
            except ParseError as exc:
                raise exc.shifted(rhs_off, text) from None
        value = E.const_value(E.sub(rhs, free))
        if value is None:
            raise ParseError("constraint value must be a constant", offset=off, text=text)
        for _, p, _ in combo:
            iv.check(p)
        functionals.append(combo)
        values.append(value.real if value.imag == 0 else value)
    return functionals, np.array(values)
