"""Adaptive solver for linear PDEs on rectangles.

Pipeline: coefficient array -> separable representation -> for grids
``(n_x, n_y)`` in 9, 17, 33, ... build the constrained Sylvester system,
solve it, and stop once the trailing rows and columns of the coefficient
matrix are negligible.  Only the unresolved direction is refined.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .almost_banded import DEFAULT_MEMORY_CAP
from .chebcore import (
    DEFAULT_TOL,
    MAX_DEGREE_2D,
    Cheb1,
    Cheb2,
    Interval,
    interp1_adaptive,
    interp2_adaptive,
    tail_window,
)
from .errors import CompatibilityError, IllPosedError, UnresolvedError
from .frontend import EDGE_VARS, EDGES, BcSpec, CoeffArray, Constraint, extract_coeffs, parse_bc, parse_function
from .separable import DEFAULT_RANK_TOL, SeparableRep, splitting_rank
from .sylvester import (
    COMPAT_TOL,
    ConstrainedSylvester,
    SylvesterReport,
    choose_pivots,
    solve_sylvester,
    sylvester_residuals,
)
from .ultraops import convert_coeffs, functional_row, odo_sparse

logger = logging.getLogger(__name__)

DEFAULT_MAX_N = 2049


def _interval(iv) -> Interval:
    return iv if isinstance(iv, Interval) else Interval(*iv)


@dataclass(frozen=True, eq=False)
class PdeProblem:
    """A linear PDE ``L u = f`` on ``[a, b] x [c, d]`` with edge constraints.

    Parameters
    ----------
    operator : CoeffArray or str
        Variable coefficients, or an operator string for the expression frontend.
    domain : sequence of 4 floats
        ``(a, b, c, d)``: ``x`` in ``[a, b]``, ``y`` in ``[c, d]``.
    bcs : dict
        Edge name (``left``, ``right``, ``down``, ``up``) to :class:`BcSpec`
        or constraint string; missing edges carry no constraint.
    rhs : Cheb2, callable, str or number
        Forcing term.
    compat : {"error", "project"}
        What to do when the boundary data disagree at the corners:
        raise, or subtract a low-degree correction from the data.
    parity : bool
        Split into even/odd subproblems when eligible.
    """

    operator: object
    domain: tuple = (-1.0, 1.0, -1.0, 1.0)
    bcs: dict = field(default_factory=dict)
    rhs: object = 0.0
    tol: float = DEFAULT_TOL
    max_n: int = DEFAULT_MAX_N
    rank_tol: float = DEFAULT_RANK_TOL
    compat: str = "error"
    compat_tol: float = COMPAT_TOL
    parity: bool = True
    n0: int = 9
    memory_cap: int = DEFAULT_MEMORY_CAP

    def __post_init__(self):
        a, b, c, d = (float(v) for v in self.domain)
        xi, yi = Interval(a, b), Interval(c, d)
        object.__setattr__(self, "domain", (a, b, c, d))
        op = self.operator
        if isinstance(op, str):
            op = extract_coeffs(op, xi, yi, self.tol)
        elif not isinstance(op, CoeffArray):
            raise TypeError("operator must be a CoeffArray or an operator string")
        object.__setattr__(self, "operator", op)
        bcs = {}
        for edge, spec in dict(self.bcs).items():
            if edge not in EDGES:
                raise ValueError(f"unknown edge {edge!r}; expected one of {EDGES}")
            if isinstance(spec, str):
                spec = parse_bc(spec, edge)
            elif isinstance(spec, (list, tuple)):
                parts = [parse_bc(s, edge) if isinstance(s, str) else s for s in spec]
                spec = sum(parts[1:], parts[0]) if parts else BcSpec.none()
            elif not isinstance(spec, BcSpec):
                spec = BcSpec.dirichlet(spec)
            bcs[edge] = spec
        object.__setattr__(self, "bcs", bcs)
        if self.compat not in ("error", "project"):
            raise ValueError("compat must be 'error' or 'project'")

    @property
    def xinterval(self) -> Interval:
        return Interval(*self.domain[:2])

    @property
    def yinterval(self) -> Interval:
        return Interval(*self.domain[2:])

    def edge_coord(self, edge: str) -> float:
        a, b, c, d = self.domain
        return {"left": a, "right": b, "down": c, "up": d}[edge]

    def rhs_cheb2(self) -> Cheb2:
        f = self.rhs
        xi, yi = self.xinterval, self.yinterval
        if isinstance(f, Cheb2):
            return f
        if isinstance(f, str):
            f = parse_function(f, ("x", "y"))
        if callable(f):
            return interp2_adaptive(f, xi, yi, self.tol)
        return Cheb2(np.array([[f]]), xi, yi)


@dataclass
class Diagnostics:
    nx: int = 0
    ny: int = 0
    k: int = 0
    singular_values: list = field(default_factory=list)
    discarded: float = 0.0
    path: str = ""
    orientation: str | None = None
    subproblems: int = 1
    compat_defect: float = 0.0
    compat_projected: bool = False
    history: list = field(default_factory=list)
    residual: dict = field(default_factory=dict)
    resolved: bool = True
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "nx": self.nx,
            "ny": self.ny,
            "degree": [self.nx - 1, self.ny - 1],
            "splitting_rank": self.k,
            "singular_values": [float(s) for s in self.singular_values],
            "discarded_singular_mass": float(self.discarded),
            "solver_path": self.path,
            "orientation": self.orientation,
            "subproblems": self.subproblems,
            "compat_defect": float(self.compat_defect),
            "compat_projected": self.compat_projected,
            "history": self.history,
            "residual": self.residual,
            "resolved": self.resolved,
        }


@dataclass(frozen=True, eq=False)
class Solution:
    u: Cheb2
    diagnostics: Diagnostics

    def __call__(self, x, y):
        return self.u(x, y)


# ---------------------------------------------------------------- boundary data

@dataclass(frozen=True, eq=False)
class _EdgeRow:
    edge: str
    constraint: Constraint
    data: np.ndarray  # Chebyshev coefficients of the data along the edge


def _edge_rows(p: PdeProblem, edges) -> list[_EdgeRow]:
    out = []
    for edge in edges:
        spec = p.bcs.get(edge)
        if spec is None:
            continue
        tang = p.yinterval if EDGE_VARS[edge][0] == "x" else p.xinterval
        for con in spec.constraints:
            f = con.data_function(edge, p.edge_coord(edge))
            data = interp1_adaptive(f, tang, p.tol).coeffs
            out.append(_EdgeRow(edge, con, data))
    return out


def _rows_matrix(p: PdeProblem, rows: list[_EdgeRow], n: int, interval: Interval) -> np.ndarray:
    if not rows:
        return np.zeros((0, n))
    out = []
    for r in rows:
        point = p.edge_coord(r.edge)
        out.append(sum(c * functional_row(point, d, n, interval) for c, d in r.constraint.combo))
    M = np.array(out)
    return M.real.copy() if not np.any(np.imag(M)) else M


def _fit(c: np.ndarray, n: int) -> np.ndarray:
    """Pad with zeros or truncate along the last axis."""
    c = np.atleast_2d(c)
    out = np.zeros(c.shape[:-1] + (n,), dtype=c.dtype)
    m = min(n, c.shape[-1])
    out[..., :m] = c[..., :m]
    return out


def _stack_data(rows: list[_EdgeRow], n: int) -> np.ndarray:
    if not rows:
        return np.zeros((0, n))
    return np.vstack([_fit(r.data, n) for r in rows])


def discretize_bcs(p: PdeProblem, nx: int, ny: int, xrows=None, yrows=None):
    """``(B_x, G, B_y, H)`` at size ``(n_x, n_y)``.

    ``B_x`` rows come from the left then right constraints applied to
    ``T_0..T_{n_x-1}``; row ``r`` of ``G`` holds the first ``n_y``
    coefficients of the matching data in ``y``.  ``B_y``/``H`` likewise for
    the down and up edges.
    """
    xrows = _edge_rows(p, ("left", "right")) if xrows is None else xrows
    yrows = _edge_rows(p, ("down", "up")) if yrows is None else yrows
    Bx = _rows_matrix(p, xrows, nx, p.xinterval)
    By = _rows_matrix(p, yrows, ny, p.yinterval)
    G = _stack_data(xrows, ny)
    H = _stack_data(yrows, nx)
    return Bx, G, By, H


def _corner_defect(Bx, G, By, H) -> np.ndarray:
    if Bx.shape[0] == 0 or By.shape[0] == 0:
        return np.zeros((By.shape[0], Bx.shape[0]))
    return H @ Bx.T - By @ G.T


def _corner_correction(Bx, G, By, H):
    """Low-degree data corrections ``(dG, dH)`` that cancel the corner defect exactly.

    Half of the defect goes into each data set, supported on the pivot
    columns of the opposite constraint matrix.
    """
    D = _corner_defect(Bx, G, By, H)
    dG = np.zeros_like(G, dtype=np.result_type(G, D))
    dH = np.zeros_like(H, dtype=np.result_type(H, D))
    if D.size == 0 or not np.any(D):
        return dG, dH
    px = choose_pivots(Bx)
    py = choose_pivots(By)
    dH[:, px] = -0.5 * np.linalg.solve(Bx[:, px], D.T).T
    dG[:, py] = (0.5 * np.linalg.solve(By[:, py], D)).T
    return dG, dH


# ---------------------------------------------------------------- system assembly

@dataclass(frozen=True, eq=False)
class _Prepared:
    rep: SeparableRep
    F: np.ndarray            # master rhs coefficients converted to the range bases
    xrows: list
    yrows: list
    defect: float
    projected: bool


def _convert_rhs(F: np.ndarray, order_y: int, order_x: int) -> np.ndarray:
    F = np.asarray(F)
    F = np.pad(F, ((0, order_y + 2), (0, order_x + 2)))
    F = convert_coeffs(F, 0, order_y)
    F = convert_coeffs(F.T, 0, order_x).T
    return F


def prepare(p: PdeProblem) -> _Prepared:
    """Everything that does not depend on the grid size."""
    rep = splitting_rank(p.operator, p.rank_tol)
    F = _convert_rhs(p.rhs_cheb2().X, rep.Ny, rep.Nx)
    xrows = _edge_rows(p, ("left", "right"))
    yrows = _edge_rows(p, ("down", "up"))
    mx = max([len(r.data) for r in yrows] + [rep.Nx + 2, 2])
    my = max([len(r.data) for r in xrows] + [rep.Ny + 2, 2])
    Bx, G, By, H = discretize_bcs(p, mx, my, xrows, yrows)
    D = _corner_defect(Bx, G, By, H)
    defect = float(np.abs(D).max()) if D.size else 0.0
    ref = max(np.abs(G).max(initial=0.0), np.abs(H).max(initial=0.0), 1.0)
    projected = False
    if defect > p.compat_tol * ref:
        if p.compat == "error":
            raise CompatibilityError(
                f"boundary data disagree where constraints meet (compatibility defect {defect:.3e})",
                defect=defect,
            )
        dG, dH = _corner_correction(Bx, G, By, H)
        logger.warning("projecting boundary data onto the compatible set (defect %.3e)", defect)
        xrows = [_EdgeRow(r.edge, r.constraint, r.data + _fit(dG[i], r.data.size)[0])
                 for i, r in enumerate(xrows)]
        yrows = [_EdgeRow(r.edge, r.constraint, r.data + _fit(dH[i], r.data.size)[0])
                 for i, r in enumerate(yrows)]
        projected = True
    return _Prepared(rep, F, xrows, yrows, defect, projected)


def build_system(p: PdeProblem, prep: _Prepared, nx: int, ny: int) -> ConstrainedSylvester:
    """Discrete constrained Sylvester system at grid size ``(n_x, n_y)``.

    The truncated boundary data are adjusted in their lowest modes so that
    the corner conditions hold exactly at this size.
    """
    rep = prep.rep
    As = [odo_sparse(Ly, ny, rep.Ny) for Ly, _ in rep.terms]
    Cs = [odo_sparse(Lx, nx, rep.Nx) for _, Lx in rep.terms]
    F = _fit(_fit(prep.F, nx).T, ny).T
    Bx, G, By, H = discretize_bcs(p, nx, ny, prep.xrows, prep.yrows)
    dG, dH = _corner_correction(Bx, G, By, H)
    return ConstrainedSylvester(As, Cs, F, By, Bx, H + dH, G + dG)


def is_resolved(X: np.ndarray, tol: float = DEFAULT_TOL) -> tuple[bool, bool]:
    """``(x_ok, y_ok)``: trailing columns / rows below ``tol * max|X|``.

    The tail window never reaches the leading coefficient, so a dimension
    of size 1 is always resolved.
    """
    X = np.atleast_2d(np.asarray(X))
    if not np.any(X):
        return True, True
    mag = np.abs(X)
    vmax = mag.max()
    ny, nx = mag.shape
    wx, wy = min(nx - 1, tail_window(nx)), min(ny - 1, tail_window(ny))
    x_ok = wx == 0 or mag[:, nx - wx :].max() <= tol * vmax
    y_ok = wy == 0 or mag[ny - wy :, :].max() <= tol * vmax
    return bool(x_ok), bool(y_ok)


# ---------------------------------------------------------------- parity

def _parity_axis(p: PdeProblem, rep: SeparableRep, axis: str) -> bool:
    C = p.operator
    orders = {j for _, j in C.entries} if axis == "x" else {i for i, _ in C.entries}
    if len({o % 2 for o in orders}) != 1:
        return False
    edges = ("left", "right") if axis == "x" else ("down", "up")
    kinds = [p.bcs.get(e).kind() if p.bcs.get(e) is not None else None for e in edges]
    return kinds[0] is not None and kinds[0] == kinds[1]


def parity_eligibility(p: PdeProblem, rep: SeparableRep | None = None) -> tuple[bool, bool]:
    """Whether even and odd modes decouple in x and in y."""
    if not p.parity or not p.operator.is_constant():
        return False, False
    rep = rep or splitting_rank(p.operator, p.rank_tol)
    return _parity_axis(p, rep, "x"), _parity_axis(p, rep, "y")


def _null_mix(B: np.ndarray, other: np.ndarray) -> np.ndarray:
    """Orthonormal combinations ``W`` of the rows of ``B`` that vanish on columns ``other``."""
    M = B[:, other]
    if M.shape[1] == 0:
        return np.eye(B.shape[0])
    u, s, vh = np.linalg.svd(M.T, full_matrices=True)
    tol = max(M.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0) * 100
    rank = int(np.count_nonzero(s > tol))
    return vh[rank:].conj().T


def _split_axis(n: int, B: np.ndarray, order: int):
    """Per parity ``p``: (columns, equation rows, mixing matrix)."""
    parts = []
    for par in (0, 1):
        cols = np.arange(par, n, 2)
        other = np.arange(1 - par, n, 2)
        rows = np.arange((par - order) % 2, n, 2)
        parts.append((cols, rows, _null_mix(B, other)))
    return parts


def _square_rows(M, rows, cols):
    """``M[rows][:, cols]`` made square: extra rows dropped, missing rows zero."""
    import scipy.sparse as sp

    sub = M[rows][:, cols]
    k = len(cols)
    if sub.shape[0] >= k:
        return sub[:k]
    pad = sp.csr_matrix((k - sub.shape[0], k), dtype=sub.dtype)
    return sp.vstack([sub, pad]).tocsr()


def _square_F(F, ry, rx, ky, kx):
    sub = F[np.ix_(ry, rx)]
    out = np.zeros((ky, kx), dtype=F.dtype)
    a, b = min(ky, sub.shape[0]), min(kx, sub.shape[1])
    out[:a, :b] = sub[:a, :b]
    return out


def parity_split(S: ConstrainedSylvester, split_x: bool, split_y: bool, order_x: int, order_y: int):
    """Split a raw (non-canonical) system into decoupled parity subsystems.

    Returns a list of ``(rows_y, cols_x, subsystem)``; the sub-solution fills
    ``X[np.ix_(rows_y, cols_x)]``.  Returns ``None`` when the constraints do
    not separate by parity.
    """
    ny, nx = S.ny, S.nx
    xs = _split_axis(nx, S.Bx, order_x) if split_x else [(np.arange(nx), np.arange(nx), np.eye(S.Kx))]
    ys = _split_axis(ny, S.By, order_y) if split_y else [(np.arange(ny), np.arange(ny), np.eye(S.Ky))]
    if sum(W.shape[1] for *_, W in xs) != S.Kx or sum(W.shape[1] for *_, W in ys) != S.Ky:
        return None
    out = []
    for cy, ry, Wy in ys:
        for cx, rx, Wx in xs:
            if Wy.shape[1] >= len(cy) or Wx.shape[1] >= len(cx):
                return None
            As = [_square_rows(A, ry, cy) for A in S.As]
            Cs = [_square_rows(C, rx, cx) for C in S.Cs]
            F = _square_F(S.F, ry, rx, len(cy), len(cx))
            By = Wy.T @ S.By[:, cy]
            H = (Wy.T @ S.H)[:, cx]
            Bx = Wx.T @ S.Bx[:, cx]
            G = (Wx.T @ S.G)[:, cy]
            out.append((cy, cx, ConstrainedSylvester(As, Cs, F, By, Bx, H, G)))
    return out


# ---------------------------------------------------------------- driver

def _data_scale(S: ConstrainedSylvester) -> float:
    return max(np.abs(M).max(initial=0.0) for M in (S.F, S.H, S.G))


def _solve_level(S: ConstrainedSylvester, split, rep: SeparableRep, p: PdeProblem):
    subs = parity_split(S, split[0], split[1], rep.Nx, rep.Ny) if any(split) else None
    if subs is None:
        X, report = solve_sylvester(S, p.compat_tol, p.memory_cap)
        return X, report, 1
    X = np.zeros((S.ny, S.nx), dtype=S.dtype)
    ref = _data_scale(S)
    report = None
    for cy, cx, sub in subs:
        if _data_scale(sub) <= p.tol * ref:
            # rounding-level data: the sub-solution is below the resolution tolerance
            logger.debug("parity class (%d, %d) has negligible data; zero solution", cy[0], cx[0])
            continue
        Xs, report = solve_sylvester(sub, p.compat_tol, p.memory_cap)
        if np.iscomplexobj(Xs) and not np.iscomplexobj(X):
            X = X.astype(complex)
        X[np.ix_(cy, cx)] = Xs
    if report is None:
        path = "k1" if rep.k == 1 else "k2" if rep.k == 2 else "kge3"
        report = SylvesterReport(path=path, k=rep.k, shape=(S.ny, S.nx))
    return X, report, len(subs)


def _grow(n: int) -> int:
    return 2 * (n - 1) + 1


def solve_pde(p: PdeProblem, full_history: bool = False) -> Solution:
    """Adaptive solve.  Raises :class:`UnresolvedError` when ``max_n`` is reached."""
    t0 = time.perf_counter()
    prep = prepare(p)
    rep = prep.rep
    split = parity_eligibility(p, rep)
    diag = Diagnostics(k=rep.k, singular_values=list(rep.singular_values), discarded=rep.discarded,
                       compat_defect=prep.defect, compat_projected=prep.projected)
    Ky = sum(s.K for e, s in p.bcs.items() if e in ("down", "up"))
    Kx = sum(s.K for e, s in p.bcs.items() if e in ("left", "right"))
    nx = ny = p.n0
    while nx <= Kx + 1:
        nx = _grow(nx)
    while ny <= Ky + 1:
        ny = _grow(ny)
    while True:
        S = build_system(p, prep, nx, ny)
        try:
            X, report, nsub = _solve_level(S, split, rep, p)
        except IllPosedError as exc:
            exc.args = (f"{exc.args[0] if exc.args else exc} [at n_x={nx}, n_y={ny}]",) + exc.args[1:]
            exc.grid = (nx, ny)
            raise
        res = sylvester_residuals(S, X)
        x_ok, y_ok = is_resolved(X, p.tol)
        diag.history.append({"nx": nx, "ny": ny, "residual": res["equation"], "x_ok": x_ok, "y_ok": y_ok})
        logger.info("solve n_x=%d n_y=%d path=%s residual=%.2e resolved=(%s,%s)",
                    nx, ny, report.path, res["equation"], x_ok, y_ok)
        if x_ok and y_ok:
            break
        grow_x = not x_ok and nx < p.max_n
        grow_y = not y_ok and ny < p.max_n
        if not (grow_x or grow_y) or (not x_ok and not grow_x) or (not y_ok and not grow_y):
            raise UnresolvedError(
                f"solution not resolved at n_x={nx}, n_y={ny} (cap {p.max_n} per dimension)",
                cap=p.max_n,
                size=(nx, ny),
            )
        nx = min(_grow(nx), p.max_n) if grow_x else nx
        ny = min(_grow(ny), p.max_n) if grow_y else ny
    diag.nx, diag.ny = nx, ny
    diag.path = report.path
    diag.orientation = report.orientation
    diag.subproblems = nsub
    diag.residual = res
    u = Cheb2(X, p.xinterval, p.yinterval).trim(p.tol)
    diag.wall_time = time.perf_counter() - t0
    return Solution(u, diag)
