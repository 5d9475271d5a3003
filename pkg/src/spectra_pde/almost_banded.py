"""Almost-banded matrices and their O(n) Givens QR solver.

An almost-banded matrix is banded except for ``K`` dense rows at the top.
The factorization keeps each row as an explicit window of
``2*l + u + 1`` entries plus ``K`` weights on the original dense rows:

    row_r = window_r + coef_r @ border

Givens rotations act on windows and weights alike, so fill-in caused by the
dense rows never materializes and the work is ``O(n (l + u + K)^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp

from .errors import ResourceError, SingularSystemError

DEFAULT_MEMORY_CAP = 4 * 2**30
SINGULAR_RTOL = 1e-13


@dataclass(frozen=True, eq=False)
class AlmostBanded:
    """``K`` dense border rows stacked on top of an ``(n - K) x n`` banded block."""

    border: np.ndarray
    band: sp.csr_matrix

    def __post_init__(self):
        border = np.asarray(self.border)
        band = sp.csr_matrix(self.band)
        n = band.shape[1]
        border = border.reshape(-1, n) if border.size else np.zeros((0, n), dtype=band.dtype)
        if border.shape[0] + band.shape[0] != n:
            raise ValueError(
                f"almost-banded matrix must be square: {border.shape[0]} border rows + "
                f"{band.shape[0]} band rows != {n} columns"
            )
        object.__setattr__(self, "border", border)
        object.__setattr__(self, "band", band)

    @classmethod
    def from_dense(cls, A, K: int) -> "AlmostBanded":
        A = np.asarray(A)
        return cls(A[:K].copy(), sp.csr_matrix(A[K:]))

    @property
    def n(self) -> int:
        return self.band.shape[1]

    @property
    def K(self) -> int:
        return self.border.shape[0]

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def dtype(self):
        return np.result_type(self.border, self.band.dtype, float)

    def bandwidths(self) -> tuple[int, int]:
        """(lower, upper) bandwidths of the banded rows in global row numbering."""
        B = self.band.tocoo()
        mask = B.data != 0
        if not mask.any():
            return 0, 0
        r = B.row[mask] + self.K
        c = B.col[mask]
        return int(max(0, (r - c).max())), int(max(0, (c - r).max()))

    def toarray(self) -> np.ndarray:
        return np.vstack([self.border, self.band.toarray()]).astype(self.dtype)

    def __matmul__(self, x):
        x = np.asarray(x)
        return np.concatenate([self.border @ x, self.band @ x], axis=0)

    def memory_estimate(self, nrhs: int = 1) -> int:
        lb, ub = self.bandwidths()
        l = max(lb, self.K - 1, 0)
        width = 2 * l + ub + 1
        item = 16
        return item * (self.n * (width + self.K + 2 * nrhs) + self.K * self.n)


@numba.njit(cache=True)
def _abqr_solve(W, coef, Bd, rhs, l, ub, K, lb, thresh):
    n = W.shape[0]
    nrhs = rhs.shape[1]
    for j in range(n):
        qmax = j + lb
        if K - 1 > qmax:
            qmax = K - 1
        if qmax > n - 1:
            qmax = n - 1
        cend = j + l + ub
        if cend > n - 1:
            cend = n - 1
        for q in range(j + 1, qmax + 1):
            b = W[q, j - q + l]
            for k in range(K):
                b += coef[q, k] * Bd[k, j]
            if b == 0:
                continue
            a = W[j, l]
            for k in range(K):
                a += coef[j, k] * Bd[k, j]
            absa = abs(a)
            absb = abs(b)
            r = np.hypot(absa, absb)
            if absa == 0.0:
                c = 0.0
                s = np.conj(b) / absb
            else:
                c = absa / r
                s = (a / absa) * np.conj(b) / r
            sc = np.conj(s)
            for col in range(j, cend + 1):
                wj = W[j, col - j + l]
                wq = W[q, col - q + l]
                W[j, col - j + l] = c * wj + s * wq
                W[q, col - q + l] = -sc * wj + c * wq
            for k in range(K):
                cj = coef[j, k]
                cq = coef[q, k]
                coef[j, k] = c * cj + s * cq
                coef[q, k] = -sc * cj + c * cq
            for m in range(nrhs):
                rj = rhs[j, m]
                rq = rhs[q, m]
                rhs[j, m] = c * rj + s * rq
                rhs[q, m] = -sc * rj + c * rq
        d = W[j, l]
        for k in range(K):
            d += coef[j, k] * Bd[k, j]
        if abs(d) <= thresh:
            return j, rhs
    # back substitution; acc[k, m] = sum_{c > r} Bd[k, c] x[c, m]
    x = np.zeros_like(rhs)
    acc = np.zeros((K, nrhs), dtype=rhs.dtype)
    for r in range(n - 1, -1, -1):
        d = W[r, l]
        for k in range(K):
            d += coef[r, k] * Bd[k, r]
        cend = r + l + ub
        if cend > n - 1:
            cend = n - 1
        for m in range(nrhs):
            v = rhs[r, m]
            for col in range(r + 1, cend + 1):
                v -= W[r, col - r + l] * x[col, m]
            for k in range(K):
                v -= coef[r, k] * acc[k, m]
            x[r, m] = v / d
        for k in range(K):
            bk = Bd[k, r]
            if bk != 0:
                for m in range(nrhs):
                    acc[k, m] += bk * x[r, m]
    return -1, x


def almost_banded_solve(M: AlmostBanded, b, memory_cap: int = DEFAULT_MEMORY_CAP, rtol: float = SINGULAR_RTOL):
    """Solve ``M x = b`` by structured Givens QR; ``b`` may have several columns."""
    b = np.asarray(b)
    vector = b.ndim == 1
    B = b.reshape(M.n, -1)
    est = M.memory_estimate(B.shape[1])
    if est > memory_cap:
        raise ResourceError(
            f"almost-banded solve needs about {est / 2**20:.0f} MiB, above the cap of {memory_cap / 2**20:.0f} MiB"
        )
    dtype = np.result_type(M.dtype, B.dtype, float)
    n, K = M.n, M.K
    lb, ub = M.bandwidths()
    l = max(lb, K - 1, 0)
    width = 2 * l + ub + 1
    W = np.zeros((n, width), dtype=dtype)
    band = M.band.tocoo()
    rows = band.row + K
    W[rows, band.col - rows + l] = band.data
    coef = np.zeros((n, K), dtype=dtype)
    coef[np.arange(K), np.arange(K)] = 1.0
    Bd = np.ascontiguousarray(M.border, dtype=dtype)
    scale = max(np.abs(W).max(initial=0.0), np.abs(Bd).max(initial=0.0))
    if scale == 0.0:
        raise SingularSystemError("matrix is identically zero", column=0)
    rhs = np.array(B, dtype=dtype, order="C", copy=True)
    status, x = _abqr_solve(W, coef, Bd, rhs, l, ub, K, lb, rtol * scale)
    if status >= 0:
        raise SingularSystemError(
            f"almost-banded system is singular to working precision at column {status}",
            column=int(status),
        )
    return x[:, 0] if vector else x
