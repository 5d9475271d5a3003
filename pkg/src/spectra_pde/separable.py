"""Splitting rank and separable (tensor-product) representations of PDOs.

A PDO ``sum_ij l_ij(x, y) d^i/dy^i d^j/dx^j`` is rearranged into the
unfolding matrix ``M[(i, a), (j, b)] = X_ij[a, b]`` where ``X_ij`` holds the
bivariate Chebyshev coefficients of ``l_ij``.  Each rank-one term
``sigma_r u_r v_r^H`` of its SVD is a product ``L^y_r (x) L^x_r`` of two
ODOs, so the numerical rank of ``M`` is the splitting rank.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chebcore import DEFAULT_TOL, Cheb1, Cheb2, Interval
from .errors import ZeroOperatorError
from .frontend import CoeffArray
from .ultraops import LinearODO

DEFAULT_RANK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SeparableRep:
    """``sum_r ODO_y[r] (x) ODO_x[r]`` with diagnostics from the SVD."""

    terms: list
    xinterval: Interval
    yinterval: Interval
    singular_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tol: float = DEFAULT_RANK_TOL
    discarded: float = 0.0

    @property
    def k(self) -> int:
        return len(self.terms)

    @property
    def Nx(self) -> int:
        return max(Lx.order for _, Lx in self.terms)

    @property
    def Ny(self) -> int:
        return max(Ly.order for Ly, _ in self.terms)

    def summary(self) -> list[str]:
        lines = []
        for r, (Ly, Lx) in enumerate(self.terms):
            ys = ", ".join(f"d{i}:deg{a.degree}" for i, a in Ly.terms.items())
            xs = ", ".join(f"d{j}:deg{a.degree}" for j, a in Lx.terms.items())
            lines.append(f"term {r + 1}: y-ODO order {Ly.order} [{ys}] (x) x-ODO order {Lx.order} [{xs}]")
        return lines


def unfolding(C: CoeffArray):
    """Unfolding matrix plus the row/column block layouts ``{order: (start, size)}``."""
    py = {i: 0 for i, _ in C.entries}
    px = {j: 0 for _, j in C.entries}
    for (i, j), c in C.entries.items():
        py[i] = max(py[i], c.ny)
        px[j] = max(px[j], c.nx)
    rows, cols = {}, {}
    off = 0
    for i in sorted(py):
        rows[i] = (off, py[i])
        off += py[i]
    nrow = off
    off = 0
    for j in sorted(px):
        cols[j] = (off, px[j])
        off += px[j]
    dtype = np.result_type(float, *(c.X.dtype for c in C.entries.values()))
    M = np.zeros((nrow, off), dtype=dtype)
    for (i, j), c in C.entries.items():
        r0, c0 = rows[i][0], cols[j][0]
        M[r0 : r0 + c.ny, c0 : c0 + c.nx] = c.X
    return M, rows, cols


def _odo_from_blocks(vec: np.ndarray, layout: dict, interval: Interval, drop: float) -> LinearODO:
    scale = np.abs(vec).max()
    terms = {}
    for order, (start, size) in layout.items():
        c = vec[start : start + size]
        mag = np.abs(c)
        big = np.nonzero(mag > drop * scale)[0]
        if big.size == 0:
            continue
        c = c[: big[-1] + 1]
        if np.iscomplexobj(c) and not np.any(c.imag):
            c = c.real
        terms[order] = Cheb1(c.copy(), interval)
    return LinearODO(terms, interval)


def splitting_rank(C: CoeffArray, tol: float = DEFAULT_RANK_TOL, trim_tol: float = DEFAULT_TOL) -> SeparableRep:
    """Separable representation with the numerical splitting rank at relative tolerance ``tol``.

    Parameters
    ----------
    C : CoeffArray
        Variable coefficients of the operator.
    tol : float
        Singular values at or below ``tol * sigma_max`` are discarded.
    trim_tol : float
        Coefficients of each reconstituted ODO below ``trim_tol`` times the
        largest coefficient of that ODO are dropped.

    Returns
    -------
    SeparableRep
        ``k`` pairs ``(ODO in y, ODO in x)``; ``sqrt(sigma_r)`` is absorbed
        into each side.
    """
    if not C.entries:
        raise ZeroOperatorError("operator is identically zero")
    M, rows, cols = unfolding(C)
    if not np.any(M):
        raise ZeroOperatorError("operator is identically zero")
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    k = int(np.count_nonzero(s > tol * s[0]))
    terms = []
    for r in range(k):
        w = np.sqrt(s[r])
        Ly = _odo_from_blocks(U[:, r] * w, rows, C.yinterval, trim_tol)
        Lx = _odo_from_blocks(Vh[r, :] * w, cols, C.xinterval, trim_tol)
        terms.append((Ly, Lx))
    discarded = float(np.sqrt(np.sum(s[k:] ** 2)))
    return SeparableRep(terms, C.xinterval, C.yinterval, s, tol, discarded)


def reconstruct_symbol(S: SeparableRep) -> CoeffArray:
    """Expand ``sum_r ODO_y[r] (x) ODO_x[r]`` back into coefficient-array form."""
    acc: dict = {}
    for Ly, Lx in S.terms:
        for i, ay in Ly.terms.items():
            for j, ax in Lx.terms.items():
                X = np.outer(ay.coeffs, ax.coeffs)
                if (i, j) in acc:
                    A = acc[(i, j)]
                    ny, nx = max(A.shape[0], X.shape[0]), max(A.shape[1], X.shape[1])
                    out = np.zeros((ny, nx), dtype=np.result_type(A, X))
                    out[: A.shape[0], : A.shape[1]] += A
                    out[: X.shape[0], : X.shape[1]] += X
                    acc[(i, j)] = out
                else:
                    acc[(i, j)] = X
    return CoeffArray({k: Cheb2(v, S.xinterval, S.yinterval) for k, v in acc.items()}, S.xinterval, S.yinterval)
