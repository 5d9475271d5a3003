"""Constrained generalized Sylvester equations.

Solve ``sum_j A_j X C_j^T = F`` subject to ``B_y X = H`` and ``X B_x^T = G^T``.
The constraints are brought to the form ``[I | B2]`` by a column
permutation, used to eliminate the first ``K_y`` rows and ``K_x`` columns
of ``X``, and the reduced ``(n_y - K_y) x (n_x - K_x)`` equation is solved by
one of three direct methods depending on the number of terms ``k``:

* ``k = 1``: two sweeps of almost-banded solves,
* ``k = 2``: Bartels-Stewart on the generalized Schur (QZ) forms,
* ``k >= 3``: one almost-banded solve of the Kronecker-expanded system.

Only the leading ``n_y - K_y`` rows and ``n_x - K_x`` columns of the
equation are imposed; the trailing ones are replaced by the constraints.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .almost_banded import DEFAULT_MEMORY_CAP, AlmostBanded, almost_banded_solve
from .errors import (
    CompatibilityError,
    DependentConstraintsError,
    InternalConsistencyError,
    NonUniqueSolutionError,
    ResourceError,
)

logger = logging.getLogger(__name__)

COMPAT_TOL = 1e-10
PENCIL_RTOL = 1e-14
WINDOW_RTOL = 1e-6
DEPENDENT_RTOL = 1e-13


def _csr(A) -> sp.csr_matrix:
    return sp.csr_matrix(A)


@dataclass(frozen=True, eq=False)
class ConstrainedSylvester:
    """``sum_j A_j X C_j^T = F``, ``B_y X = H``, ``X B_x^T = G^T``.

    ``A_j`` is ``n_y x n_y`` and ``C_j`` is ``n_x x n_x`` (sparse or dense);
    ``F`` is ``n_y x n_x``, ``B_y`` is ``K_y x n_y``, ``B_x`` is ``K_x x n_x``,
    ``H`` is ``K_y x n_x`` and ``G`` is ``K_x x n_y``.  ``perm_y`` and
    ``perm_x`` record a column permutation of ``X`` (set by
    :func:`canonicalize`): the stored system is in terms of
    ``X[perm_y][:, perm_x]``.
    """

    As: list
    Cs: list
    F: np.ndarray
    By: np.ndarray
    Bx: np.ndarray
    H: np.ndarray
    G: np.ndarray
    perm_y: np.ndarray | None = None
    perm_x: np.ndarray | None = None
    canonical: bool = False
    pivots: tuple = ((), ())

    def __post_init__(self):
        As = [_csr(A) for A in self.As]
        Cs = [_csr(C) for C in self.Cs]
        if len(As) != len(Cs) or not As:
            raise ValueError("need the same positive number of A_j and C_j")
        F = np.atleast_2d(np.asarray(self.F))
        ny, nx = F.shape
        By = np.asarray(self.By).reshape(-1, ny)
        Bx = np.asarray(self.Bx).reshape(-1, nx)
        H = np.asarray(self.H).reshape(By.shape[0], nx)
        G = np.asarray(self.G).reshape(Bx.shape[0], ny)
        for A in As:
            if A.shape != (ny, ny):
                raise ValueError(f"A_j has shape {A.shape}, expected {(ny, ny)}")
        for C in Cs:
            if C.shape != (nx, nx):
                raise ValueError(f"C_j has shape {C.shape}, expected {(nx, nx)}")
        if By.shape[0] >= ny or Bx.shape[0] >= nx:
            raise ValueError("need fewer constraints than unknowns in each direction")
        object.__setattr__(self, "As", As)
        object.__setattr__(self, "Cs", Cs)
        for name, val in (("F", F), ("By", By), ("Bx", Bx), ("H", H), ("G", G)):
            object.__setattr__(self, name, val)
        if self.perm_y is None:
            object.__setattr__(self, "perm_y", np.arange(ny))
        if self.perm_x is None:
            object.__setattr__(self, "perm_x", np.arange(nx))

    @property
    def k(self) -> int:
        return len(self.As)

    @property
    def ny(self) -> int:
        return self.F.shape[0]

    @property
    def nx(self) -> int:
        return self.F.shape[1]

    @property
    def Ky(self) -> int:
        return self.By.shape[0]

    @property
    def Kx(self) -> int:
        return self.Bx.shape[0]

    @property
    def dtype(self):
        return np.result_type(float, self.F, self.By, self.Bx, self.H, self.G,
                              *(A.dtype for A in self.As), *(C.dtype for C in self.Cs))


@dataclass(frozen=True, eq=False)
class ReducedSylvester:
    """Eliminated system ``sum_j Ar_j X22 Cr_j^T = Ft`` plus what recovery needs."""

    At: list          # A~_j, (n_y-K_y) x n_y, zero in the first K_y columns
    Ct: list          # C~_j, (n_x-K_x) x n_x, zero in the first K_x columns
    Ft: np.ndarray
    By2: np.ndarray
    Bx2: np.ndarray
    H: np.ndarray
    G: np.ndarray
    source: ConstrainedSylvester

    @property
    def Ar(self) -> list:
        return [A[:, self.source.Ky :] for A in self.At]

    @property
    def Cr(self) -> list:
        return [C[:, self.source.Kx :] for C in self.Ct]


@dataclass
class SylvesterReport:
    path: str = ""
    k: int = 0
    shape: tuple = ()
    reduced_shape: tuple = ()
    compat_defect: float = 0.0
    x11_gap: float = 0.0
    orientation: str | None = None
    cost: dict = field(default_factory=dict)
    pivots_y: list = field(default_factory=list)
    pivots_x: list = field(default_factory=list)


# ---------------------------------------------------------------- canonicalization

def _greedy_pivots(B: np.ndarray, w: int):
    """Column-pivoted elimination on the first ``w`` columns; returns (pivots, min_pivot)."""
    R = np.array(B[:, :w], dtype=np.result_type(B, float))
    K = B.shape[0]
    piv = []
    smallest = np.inf
    for _ in range(K):
        norms = np.linalg.norm(R, axis=0)
        norms[piv] = -1.0
        best = norms.max()
        # lowest index among the (near-)largest columns keeps pivots deterministic
        p = int(np.nonzero(norms >= best * (1 - 1e-12))[0][0])
        piv.append(p)
        smallest = min(smallest, best)
        if best <= 0:
            break
        q = R[:, p] / best
        R = R - np.outer(q, q.conj() @ R)
    return piv, smallest


def choose_pivots(B: np.ndarray) -> list[int]:
    """Pivot columns for the canonical form ``B -> Bhat^{-1} B``.

    Column-pivoted elimination is run on the leading ``w`` columns with
    ``w = 2K+2, 2K+3, ...``; the first window whose smallest pivot exceeds
    ``1e-6 * |B|`` wins.  Keeping the pivots among low-degree columns keeps
    the eliminated operators almost banded, and the slack of ``K+2``
    columns lets the elimination skip a weak low column.
    """
    K, n = B.shape
    if K == 0:
        return []
    scale = np.abs(B).max()
    if scale == 0:
        raise DependentConstraintsError("constraint rows are identically zero")
    if np.array_equal(B[:, :K], np.eye(K)):
        return list(range(K))
    last = None
    for w in range(min(n, 2 * K + 2), n + 1):
        piv, smallest = _greedy_pivots(B, w)
        if smallest > WINDOW_RTOL * scale:
            return sorted(piv)
        last = (piv, smallest)
    piv, smallest = last
    if smallest > DEPENDENT_RTOL * scale:
        return sorted(piv)
    raise DependentConstraintsError(
        f"constraints are linearly dependent (smallest pivot {smallest:.2e} relative to {scale:.2e})"
    )


def _canon_side(B: np.ndarray, data: np.ndarray, pivots):
    K, n = B.shape
    piv = list(choose_pivots(B) if pivots is None else pivots)
    if len(piv) != K or len(set(piv)) != K:
        raise ValueError(f"need {K} distinct pivot columns, got {piv}")
    rest = [c for c in range(n) if c not in set(piv)]
    perm = np.array(piv + rest, dtype=int)
    if K == 0:
        return B, data, perm, piv
    Bhat = B[:, piv]
    try:
        Bc = np.linalg.solve(Bhat, B[:, perm])
        Dc = np.linalg.solve(Bhat, data)
    except np.linalg.LinAlgError as exc:
        raise DependentConstraintsError(f"pivot block is singular: {exc}") from None
    Bc[:, :K] = np.eye(K)
    return Bc, Dc, perm, piv


def canonicalize(S: ConstrainedSylvester, pivots_y=None, pivots_x=None) -> ConstrainedSylvester:
    """Equivalent system whose constraint matrices start with an identity block.

    The unknown is permuted to ``X[perm_y][:, perm_x]``: the columns of
    ``A_j`` / ``C_j`` and the data are permuted to match; the equation rows
    are untouched.
    """
    if S.canonical:
        return S
    By, H, py, piv_y = _canon_side(S.By, S.H, pivots_y)
    Bx, G, px, piv_x = _canon_side(S.Bx, S.G, pivots_x)
    H = H[:, px]
    G = G[:, py]
    As = [A[:, py] for A in S.As]
    Cs = [C[:, px] for C in S.Cs]
    return ConstrainedSylvester(As, Cs, S.F, By, Bx, H, G, perm_y=S.perm_y[py], perm_x=S.perm_x[px],
                                canonical=True, pivots=(tuple(piv_y), tuple(piv_x)))


def compatibility_defect(S: ConstrainedSylvester) -> np.ndarray:
    """``H B_x^T - B_y G^T`` (the corner-consistency matrix)."""
    return S.H @ S.Bx.T - S.By @ S.G.T


def check_compatibility(S: ConstrainedSylvester, tol: float = COMPAT_TOL) -> tuple[bool, float]:
    """Return ``(passed, defect)`` with ``defect = max |H B_x^T - B_y G^T|``."""
    D = compatibility_defect(S)
    defect = float(np.abs(D).max()) if D.size else 0.0
    ref = max(np.abs(S.H).max(initial=0.0), np.abs(S.G).max(initial=0.0), 1.0)
    return defect <= tol * ref, defect


# ---------------------------------------------------------------- elimination

def eliminate(S: ConstrainedSylvester) -> ReducedSylvester:
    """Remove the constrained unknowns from a canonical system."""
    if not S.canonical:
        raise ValueError("eliminate expects a canonical system (call canonicalize first)")
    Ky, Kx = S.Ky, S.Kx
    ry, rx = S.ny - Ky, S.nx - Kx
    By, Bx = S.By, S.Bx
    H, G = S.H, S.G
    F = S.F[:ry, :rx].astype(S.dtype)
    At, Ct = [], []
    for A, C in zip(S.As, S.Cs):
        A = A[:ry]
        C = C[:rx]
        A1 = A[:, :Ky].toarray()
        C1 = C[:, :Kx].toarray()
        Atil = (A - sp.csr_matrix(A1 @ By)).tocsr() if Ky else A.tocsr()
        Ctil = (C - sp.csr_matrix(C1 @ Bx)).tocsr() if Kx else C.tocsr()
        Atil.eliminate_zeros()
        Ctil.eliminate_zeros()
        if Ky and abs(Atil[:, :Ky]).max() != 0:
            raise InternalConsistencyError("eliminated A_j is not zero in its first K_y columns")
        if Kx and abs(Ctil[:, :Kx]).max() != 0:
            raise InternalConsistencyError("eliminated C_j is not zero in its first K_x columns")
        if Ky:
            F = F - A1 @ (C @ H.T).T
        if Kx:
            F = F - Atil @ (C1 @ G).T
        At.append(Atil)
        Ct.append(Ctil)
    return ReducedSylvester(At, Ct, F, By[:, Ky:], Bx[:, Kx:], H, G, S)


def recover(X22: np.ndarray, R: ReducedSylvester, tol: float = COMPAT_TOL) -> tuple[np.ndarray, float]:
    """Rebuild ``X`` from ``X22`` and the constraints; undo the permutation.

    Returns ``(X, gap)`` where ``gap`` is the difference between the two
    formulas for the corner block ``X11``.
    """
    S = R.source
    Ky, Kx = S.Ky, S.Kx
    H, G = R.H, R.G
    X21 = G.T[Ky:, :Kx] - X22 @ R.Bx2.T
    X12 = H[:, Kx:] - R.By2 @ X22
    Pa = R.By2 @ X21
    Pb = X12 @ R.Bx2.T
    X11a = H[:, :Kx] - Pa
    X11b = G.T[:Ky, :Kx] - Pb
    Xp = np.block([[X11a, X12], [X21, X22]]) if (Ky and Kx) else None
    if Xp is None:
        if Ky:
            Xp = np.vstack([X12, X22])
        elif Kx:
            Xp = np.hstack([X21, X22])
        else:
            Xp = X22
    scale = max(np.abs(Xp).max(initial=0.0), np.finfo(float).tiny)
    gap = float(np.abs(X11a - X11b).max()) if X11a.size else 0.0
    # in exact arithmetic the gap is the corner defect of the data; rounding
    # enters through By2 X22 Bx2^T, whose entries can cancel heavily
    # (derivative constraint rows grow like n^2), so measure against |By2||X22||Bx2|^T
    ref = max(scale, 1.0, np.abs(Pa).max(initial=0.0), np.abs(Pb).max(initial=0.0))
    if X11a.size:
        ref = max(ref, float((np.abs(R.By2) @ np.abs(X22) @ np.abs(R.Bx2).T).max(initial=0.0)))
    if gap > tol * ref:
        raise CompatibilityError(
            f"corner block mismatch {gap:.3e} relative to {ref:.3e}; boundary data are incompatible",
            defect=gap,
        )
    X = np.empty_like(Xp)
    X[np.ix_(S.perm_y, S.perm_x)] = Xp
    return X, gap


# ---------------------------------------------------------------- solvers

def auto_almost_banded(A) -> AlmostBanded:
    """Split a sparse square matrix into dense top rows and a band, minimizing the QR cost."""
    A = sp.csr_matrix(A)
    n = A.shape[0]
    rows = np.arange(n)
    lo = np.full(n, n, dtype=np.int64)
    hi = np.full(n, -1, dtype=np.int64)
    coo = A.tocoo()
    np.minimum.at(lo, coo.row, coo.col)
    np.maximum.at(hi, coo.row, coo.col)
    nz = hi >= 0
    low = np.where(nz, rows - lo, 0)
    up = np.where(nz, hi - rows, 0)
    # bandwidths of rows K..n-1 for every candidate border size K
    lb = np.maximum(np.maximum.accumulate(low[::-1])[::-1], 0)
    ub = np.maximum(np.maximum.accumulate(up[::-1])[::-1], 0)
    K = rows
    l = np.maximum(lb, K - 1)
    cost = (n * (lb + 1) + K * K / 2) * (2 * l + ub + 1 + K)
    Kb = int(np.argmin(cost))
    return AlmostBanded(A[:Kb].toarray(), A[Kb:])


def _dense_ok(M) -> np.ndarray:
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def solve_k1(A, C, F, memory_cap: int = DEFAULT_MEMORY_CAP) -> np.ndarray:
    """``A X C^T = F`` by ``A Y = F`` then ``C X^T = Y^T``."""
    Y = almost_banded_solve(auto_almost_banded(A), np.asarray(F), memory_cap)
    Xt = almost_banded_solve(auto_almost_banded(C), np.ascontiguousarray(np.asarray(Y).T), memory_cap)
    return np.asarray(Xt).T.copy()


@numba.njit(cache=True)
def _block_starts(S):
    """Start indices of the 1x1 / 2x2 diagonal blocks of a quasi-triangular matrix."""
    n = S.shape[0]
    out = np.empty(n + 1, np.int64)
    m = 0
    i = 0
    while i < n:
        out[m] = i
        m += 1
        if i + 1 < n and S[i + 1, i] != 0:
            i += 2
        else:
            i += 1
    out[m] = n
    return out[: m + 1]


@numba.njit(cache=True)
def _small_solve(M, r):
    """Gaussian elimination with partial pivoting; returns ``(x, min |pivot|)``."""
    m = M.shape[0]
    M = M.copy()
    r = r.copy()
    pmin = np.inf
    for k in range(m):
        p = k
        for i in range(k + 1, m):
            if abs(M[i, k]) > abs(M[p, k]):
                p = i
        if p != k:
            for j in range(m):
                t = M[k, j]
                M[k, j] = M[p, j]
                M[p, j] = t
            t = r[k]
            r[k] = r[p]
            r[p] = t
        piv = abs(M[k, k])
        if piv < pmin:
            pmin = piv
        if piv == 0:
            return r, 0.0
        for i in range(k + 1, m):
            f = M[i, k] / M[k, k]
            for j in range(k, m):
                M[i, j] -= f * M[k, j]
            r[i] -= f * r[k]
    for k in range(m - 1, -1, -1):
        acc = r[k]
        for j in range(k + 1, m):
            acc -= M[k, j] * r[j]
        r[k] = acc / M[k, k]
    return r, pmin


@numba.njit(cache=True)
def _qz_backsub(S1, T1, S2, T2, F, rtol):
    """Solve ``S1 Y S2^T + T1 Y T2^T = F`` for quasi-upper-triangular ``S``, upper-triangular ``T``.

    A pivot block whose smallest elimination pivot is at most ``rtol`` times
    its cancellation scale ``|S1 S2| + |T1 T2|`` marks a spectral collision.
    Returns ``(Y, bad_column)`` with ``bad_column = -1`` on success.
    """
    ny, nx = F.shape
    Y = np.zeros_like(F)
    W1 = np.zeros_like(F)  # columns of S1 @ Y
    W2 = np.zeros_like(F)  # columns of T1 @ Y
    S1t = np.ascontiguousarray(S1.T)
    T1t = np.ascontiguousarray(T1.T)
    bx = _block_starts(S2)
    by = _block_starts(S1)
    R = np.zeros((ny, 2), F.dtype)
    for J in range(bx.shape[0] - 2, -1, -1):
        j0, j1 = bx[J], bx[J + 1]
        m = j1 - j0
        for c in range(m):
            for i in range(ny):
                R[i, c] = F[i, j0 + c]
            for d in range(j1, nx):
                s = S2[j0 + c, d]
                t = T2[j0 + c, d]
                if s != 0 or t != 0:
                    for i in range(ny):
                        R[i, c] -= s * W1[i, d] + t * W2[i, d]
        for I in range(by.shape[0] - 2, -1, -1):
            i0, i1 = by[I], by[I + 1]
            q = i1 - i0
            M = np.zeros((q * m, q * m), F.dtype)
            rhs = np.zeros(q * m, F.dtype)
            for a in range(q):
                for c in range(m):
                    row = a * m + c
                    rhs[row] = R[i0 + a, c]
                    for b in range(q):
                        for d in range(m):
                            M[row, b * m + d] = (S1[i0 + a, i0 + b] * S2[j0 + c, j0 + d]
                                                 + T1[i0 + a, i0 + b] * T2[j0 + c, j0 + d])
            y, pmin = _small_solve(M, rhs)
            # cancellation scale of this pivot block: |S1 S2| + |T1 T2| entrywise
            loc = 0.0
            for a in range(q):
                for b in range(q):
                    for c in range(m):
                        for d in range(m):
                            v = (abs(S1[i0 + a, i0 + b] * S2[j0 + c, j0 + d])
                                 + abs(T1[i0 + a, i0 + b] * T2[j0 + c, j0 + d]))
                            if v > loc:
                                loc = v
            if pmin <= rtol * loc:
                return Y, j0
            for b in range(q):
                for d in range(m):
                    Y[i0 + b, j0 + d] = y[b * m + d]
            for b in range(q):
                e = i0 + b
                for c in range(m):
                    P = 0.0 * y[0]
                    Q = 0.0 * y[0]
                    for d in range(m):
                        P += Y[e, j0 + d] * S2[j0 + c, j0 + d]
                        Q += Y[e, j0 + d] * T2[j0 + c, j0 + d]
                    for r in range(i0):
                        R[r, c] -= S1t[e, r] * P + T1t[e, r] * Q
        for d in range(j0, j1):
            for e in range(ny):
                yv = Y[e, d]
                if yv != 0:
                    for r in range(min(e + 2, ny)):
                        W1[r, d] += S1t[e, r] * yv
                    for r in range(e + 1):
                        W2[r, d] += T1t[e, r] * yv
    return Y, -1


_PENCIL_CACHE: dict = {}
_PENCIL_CACHE_SIZE = 8


def _qz(A, B, output: str):
    """Cached generalized Schur form; parity subproblems reuse the same pencils."""
    key = (output, A.shape, A.dtype.str, hash(A.tobytes()), hash(B.tobytes()))
    hit = _PENCIL_CACHE.get(key)
    if hit is not None and np.array_equal(hit[0], A) and np.array_equal(hit[1], B):
        return hit[2]
    out = sla.qz(A, B, output=output, check_finite=False)
    if len(_PENCIL_CACHE) >= _PENCIL_CACHE_SIZE:
        _PENCIL_CACHE.pop(next(iter(_PENCIL_CACHE)))
    _PENCIL_CACHE[key] = (A.copy(), B.copy(), out)
    return out


def _equilibrate(A: np.ndarray, B: np.ndarray, sweeps: int = 3):
    """Power-of-two row and column scalings ``r, c`` that bring the pencil rows/columns to unit size.

    ``diag(r) (A, B) diag(c)`` has the same eigenvectors up to scaling;
    powers of two keep the scaling exact.
    """
    M = np.abs(A) + np.abs(B)
    r = np.ones(M.shape[0])
    c = np.ones(M.shape[1])

    def pow2(v):
        return np.exp2(np.round(np.log2(np.where(v > 0, v, 1.0))))

    for _ in range(sweeps):
        r /= pow2((M * c).max(axis=1) * r)
        c /= pow2((M * r[:, None]).max(axis=0) * c)
    return r, c


def solve_k2(A1, C1, A2, C2, F, rtol: float = PENCIL_RTOL) -> np.ndarray:
    """``A1 X C1^T + A2 X C2^T = F`` by generalized Bartels-Stewart.

    With ``(A1, A2) = Q1 (S1, T1) Z1^H`` and ``(C1, C2) = Q2 (S2, T2) Z2^H``,
    ``Y = Z1^H X conj(Z2)`` solves ``S1 Y S2^T + T1 Y T2^T = Q1^H F conj(Q2)``.
    Both pencils are equilibrated by exact power-of-two scalings first.
    Real data use the real QZ form (1x1 and 2x2 diagonal blocks) and stay
    real throughout; ``Y`` is found block column by block column from the
    last one.
    """
    A1, A2, C1, C2 = (_dense_ok(M) for M in (A1, A2, C1, C2))
    F = np.asarray(F)
    real = not any(np.iscomplexobj(M) for M in (A1, A2, C1, C2, F))
    dtype = float if real else complex
    # constraint elimination leaves rows and columns of very different size;
    # equilibrating first keeps the QZ rounding error at the level of the data
    ry, cy = _equilibrate(A1, A2)
    rx, cx = _equilibrate(C1, C2)
    A1, A2 = (ry[:, None] * M * cy for M in (A1, A2))
    C1, C2 = (rx[:, None] * M * cx for M in (C1, C2))
    F = ry[:, None] * F * rx
    A1, A2, C1, C2, F = (np.ascontiguousarray(M, dtype=dtype) for M in (A1, A2, C1, C2, F))
    output = "real" if real else "complex"
    S1, T1, Q1, Z1 = _qz(A1, A2, output)
    S2, T2, Q2, Z2 = _qz(C1, C2, output)
    Fp = np.ascontiguousarray(Q1.conj().T @ F @ Q2.conj())
    Y, bad = _qz_backsub(*(np.ascontiguousarray(M) for M in (S1, T1, S2, T2)), Fp, rtol)
    if bad >= 0:
        raise NonUniqueSolutionError(
            f"Sylvester pencils share an eigenvalue (vanishing pivot at column {bad}); "
            "the equation has no unique solution"
        )
    return cy[:, None] * (Z1 @ Y @ Z2.T) * cx


def kron_cost(nx: int, ny: int) -> dict:
    """Predicted work for the two vectorization orders of the Kronecker system."""
    return {"x-major": ny * nx**3, "y-major": nx * ny**3}


def solve_kge3(As, Cs, F, memory_cap: int = DEFAULT_MEMORY_CAP, orientation: str | None = None):
    """``sum_j A_j X C_j^T = F`` via the Kronecker-expanded almost-banded system.

    ``"x-major"`` orders unknowns with x fastest (``vec`` of ``X`` row by
    row, matrix ``sum_j A_j (x) C_j``) and costs about ``n_y n_x^3``;
    ``"y-major"`` uses ``sum_j C_j (x) A_j`` at about ``n_x n_y^3``.  The
    cheaper one is chosen unless ``orientation`` forces it.  Returns
    ``(X, orientation, cost)``.
    """
    F = np.asarray(F)
    ny, nx = F.shape
    cost = kron_cost(nx, ny)
    if orientation is None:
        orientation = "x-major" if cost["x-major"] <= cost["y-major"] else "y-major"
    if orientation not in cost:
        raise ValueError(f"orientation must be 'x-major' or 'y-major', got {orientation!r}")
    logger.info("kronecker solve %dx%d: cost x-major=%.3g y-major=%.3g -> %s",
                ny, nx, cost["x-major"], cost["y-major"], orientation)
    if orientation == "x-major":
        M = sum(sp.kron(_csr(A), _csr(C), format="csr") for A, C in zip(As, Cs))
        b = F.reshape(-1)
    else:
        M = sum(sp.kron(_csr(C), _csr(A), format="csr") for A, C in zip(As, Cs))
        b = F.reshape(-1, order="F")
    M = sp.csr_matrix(M)
    M.eliminate_zeros()
    AB = auto_almost_banded(M)
    est = AB.memory_estimate()
    if est > memory_cap:
        raise ResourceError(
            f"Kronecker system of size {M.shape[0]} needs about {est / 2**20:.0f} MiB "
            f"(cap {memory_cap / 2**20:.0f} MiB)"
        )
    x = almost_banded_solve(AB, b, memory_cap)
    X = x.reshape(ny, nx) if orientation == "x-major" else x.reshape(ny, nx, order="F")
    return X, orientation, cost


def solve_reduced(R: ReducedSylvester, memory_cap: int = DEFAULT_MEMORY_CAP, path: str | None = None,
                  orientation: str | None = None):
    """Dispatch on the number of terms; returns ``(X22, path, extra)``."""
    Ar, Cr = R.Ar, R.Cr
    k = len(Ar)
    path = path or ("k1" if k == 1 else "k2" if k == 2 else "kge3")
    extra = {}
    if R.Ft.size == 0:
        return np.zeros(R.Ft.shape, dtype=R.Ft.dtype), path, extra
    if path == "k1":
        if k != 1:
            raise ValueError("k1 path needs exactly one term")
        X22 = solve_k1(Ar[0], Cr[0], R.Ft, memory_cap)
    elif path == "k2":
        if k != 2:
            raise ValueError("k2 path needs exactly two terms")
        X22 = solve_k2(Ar[0], Cr[0], Ar[1], Cr[1], R.Ft)
    elif path == "kge3":
        X22, orient, cost = solve_kge3(Ar, Cr, R.Ft, memory_cap, orientation)
        extra = {"orientation": orient, "cost": cost}
    else:
        raise ValueError(f"unknown solver path {path!r}")
    return X22, path, extra


def solve_sylvester(
    S: ConstrainedSylvester,
    compat_tol: float = COMPAT_TOL,
    memory_cap: int = DEFAULT_MEMORY_CAP,
    path: str | None = None,
    pivots_y=None,
    pivots_x=None,
    orientation: str | None = None,
):
    """Canonicalize, check, eliminate, solve and recover.  Returns ``(X, SylvesterReport)``."""
    Sc = canonicalize(S, pivots_y, pivots_x)
    ok, defect = check_compatibility(Sc, compat_tol)
    if not ok:
        raise CompatibilityError(
            f"boundary data violate the compatibility condition (defect {defect:.3e})", defect=defect
        )
    R = eliminate(Sc)
    X22, used, extra = solve_reduced(R, memory_cap, path, orientation)
    X, gap = recover(X22, R, compat_tol)
    piv = Sc.pivots
    report = SylvesterReport(
        path=used,
        k=S.k,
        shape=(S.ny, S.nx),
        reduced_shape=R.Ft.shape,
        compat_defect=defect,
        x11_gap=gap,
        orientation=extra.get("orientation"),
        cost=extra.get("cost", {}),
        pivots_y=list(piv[0]),
        pivots_x=list(piv[1]),
    )
    return X, report


def sylvester_residuals(S: ConstrainedSylvester, X: np.ndarray) -> dict:
    """Residuals of the imposed equation rows/columns and of both constraints.

    ``equation`` is relative to ``|F| + sum_j |A_j X C_j^T|`` (max norms).
    """
    ry, rx = S.ny - S.Ky, S.nx - S.Kx
    Xp = X[np.ix_(S.perm_y, S.perm_x)] if S.canonical else X
    terms = [A @ (C @ Xp.T).T for A, C in zip(S.As, S.Cs)]
    lhs = sum(terms)
    F = S.F
    eq = np.abs(lhs[:ry, :rx] - F[:ry, :rx]).max(initial=0.0)
    # relative to the size of the individual terms, so a zero forcing is fine
    fscale = np.abs(F[:ry, :rx]).max(initial=0.0) + sum(np.abs(T[:ry, :rx]).max(initial=0.0) for T in terms)
    fscale = max(fscale, np.finfo(float).tiny)
    cy = np.abs(S.By @ Xp - S.H).max(initial=0.0)
    cx = np.abs(Xp @ S.Bx.T - S.G.T).max(initial=0.0)
    return {
        "equation": float(eq / fscale),
        "equation_abs": float(eq),
        "constraint_y": float(cy / (1 + np.abs(S.H).max(initial=0.0))),
        "constraint_x": float(cx / (1 + np.abs(S.G).max(initial=0.0))),
    }
