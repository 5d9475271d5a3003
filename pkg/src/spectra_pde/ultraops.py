"""Banded ultraspherical operators: differentiation, conversion, multiplication.

All operators act on coefficient vectors.  ``diff_op(k)`` maps Chebyshev
coefficients to ``C^(k)`` coefficients of the k-th derivative,
``conv_op(k)`` maps ``C^(k)`` to ``C^(k+1)`` (``k = 0`` meaning Chebyshev),
and ``mult_op(a, k)`` multiplies by ``a(x)`` inside the ``C^(k)`` basis.

Composite operators are formed from factors a few rows larger than the
requested size and truncated at the end, so that the leading ``n x n`` block
never sees truncation artefacts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .chebcore import UNIT, Cheb1, Interval, trim_coeffs
from .errors import IllPosedOperatorError


@dataclass(frozen=True, eq=False)
class BandedOp:
    """Square banded matrix in LAPACK diagonal-major storage.

    ``ab[upper + i - j, j] == A[i, j]`` for ``-lower <= j - i <= upper``.
    """

    n: int
    lower: int
    upper: int
    ab: np.ndarray

    @classmethod
    def from_sparse(cls, A) -> "BandedOp":
        A = sp.coo_matrix(A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"BandedOp must be square, got {A.shape}")
        mask = A.data != 0
        r, c, v = A.row[mask], A.col[mask], A.data[mask]
        lower = int(max(0, (r - c).max())) if v.size else 0
        upper = int(max(0, (c - r).max())) if v.size else 0
        dtype = np.result_type(v.dtype, float)
        ab = np.zeros((lower + upper + 1, n), dtype=dtype)
        np.add.at(ab, (upper + r - c, c), v)
        return cls(n, lower, upper, ab)

    @classmethod
    def identity(cls, n: int, scale=1.0) -> "BandedOp":
        return cls(n, 0, 0, np.full((1, n), scale, dtype=np.result_type(scale, float)))

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def dtype(self):
        return self.ab.dtype

    def tosparse(self) -> sp.csr_matrix:
        offsets = np.arange(self.upper, -self.lower - 1, -1)
        rows = []
        for k, off in enumerate(offsets):
            # ab row k holds diagonal `off`, aligned by column index
            rows.append(self.ab[k, max(off, 0) : self.n + min(off, 0)])
        return sp.diags(rows, offsets, shape=(self.n, self.n), format="csr", dtype=self.dtype)

    def toarray(self) -> np.ndarray:
        return self.tosparse().toarray()

    def __matmul__(self, other):
        if isinstance(other, BandedOp):
            return BandedOp.from_sparse(self.tosparse() @ other.tosparse())
        return self.tosparse() @ other

    def truncate(self, n: int) -> "BandedOp":
        return BandedOp.from_sparse(self.tosparse()[:n, :n])


def _csr_diag(values, offset: int, n: int) -> sp.csr_matrix:
    return sp.diags([values], [offset], shape=(n, n), format="csr")


def _diff_sparse(lam: int, n: int, scale: float = 1.0) -> sp.csr_matrix:
    if lam == 0:
        return sp.identity(n, format="csr")
    if lam >= n:
        return sp.csr_matrix((n, n))
    const = 2.0 ** (lam - 1) * math.factorial(lam - 1) * scale**lam
    vals = const * np.arange(lam, n, dtype=float)
    return _csr_diag(vals, lam, n)


def diff_op(lam: int, n: int, interval: Interval = UNIT) -> BandedOp:
    """Truncation of the differentiation operator ``D_lam`` (Chebyshev -> C^(lam))."""
    if lam < 0 or n < 1:
        raise ValueError("diff_op needs lam >= 0 and n >= 1")
    return BandedOp.from_sparse(_diff_sparse(lam, n, interval.scale))


def _conv_sparse(lam: int, n: int) -> sp.csr_matrix:
    j = np.arange(n, dtype=float)
    if lam == 0:
        d0 = np.full(n, 0.5)
        d0[0] = 1.0
        d2 = np.full(max(n - 2, 0), -0.5)
    else:
        d0 = lam / (lam + j)
        d2 = -lam / (lam + j[: max(n - 2, 0)] + 2)
    if n <= 2:
        return _csr_diag(d0, 0, n)
    return sp.diags([d0, d2], [0, 2], shape=(n, n), format="csr")


def conv_op(lam: int, n: int) -> BandedOp:
    """Conversion ``S_lam``: C^(lam) coefficients to C^(lam+1) (lam = 0: Chebyshev)."""
    if lam < 0 or n < 1:
        raise ValueError("conv_op needs lam >= 0 and n >= 1")
    return BandedOp.from_sparse(_conv_sparse(lam, n))


def _conv_stack_sparse(lo: int, hi: int, n: int) -> sp.csr_matrix:
    """``S_{hi-1} ... S_lo`` truncated to n x n (exact: S is upper triangular)."""
    S = sp.identity(n, format="csr")
    for lam in range(lo, hi):
        S = _conv_sparse(lam, n) @ S
    return S.tocsr()


def convert_coeffs(c: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Apply ``S_{hi-1}...S_lo`` to a coefficient vector (no truncation loss)."""
    c = np.asarray(c)
    if hi <= lo:
        return c.copy()
    return _conv_stack_sparse(lo, hi, c.shape[0]) @ c


def _mult0_sparse(a: np.ndarray, n: int) -> sp.csr_matrix:
    m = a.size - 1
    rows, cols, vals = [], [], []
    # Toeplitz part: diagonals +-k carry a_k / 2, main diagonal a_0
    for k in range(0, min(m, n - 1) + 1):
        idx = np.arange(n - k)
        if k == 0:
            rows.append(idx)
            cols.append(idx)
            vals.append(np.full(n, a[0]))
        else:
            half = np.full(n - k, 0.5 * a[k])
            rows += [idx, idx + k]
            cols += [idx + k, idx]
            vals += [half, half]
    # Hankel part: anti-diagonals i + j = s (s >= 1) with rows i >= 1
    for s in range(1, m + 1):
        i = np.arange(1, min(s, n - 1) + 1)
        j = s - i
        keep = j < n
        i, j = i[keep], j[keep]
        rows.append(i)
        cols.append(j)
        vals.append(np.full(i.size, 0.5 * a[s]))
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals).astype(a.dtype)
    return sp.csr_matrix((v, (r, c)), shape=(n, n))


def _x_mult_sparse(lam: int, n: int) -> sp.csr_matrix:
    # x C_j = (j+1)/(2(j+lam)) C_{j+1} + (j+2lam-1)/(2(j+lam)) C_{j-1}
    j = np.arange(n, dtype=float)
    sub = (j[:-1] + 1) / (2 * (j[:-1] + lam))
    sup = (j[1:] + 2 * lam - 1) / (2 * (j[1:] + lam))
    return sp.diags([sub, sup], [-1, 1], shape=(n, n), format="csr")


def _multL_sparse(a: np.ndarray, lam: int, n: int) -> sp.csr_matrix:
    m = a.size - 1
    N = n + m + 2
    c = convert_coeffs(a, 0, lam)
    X = _x_mult_sparse(lam, N)
    M_prev = sp.identity(N, format="csr", dtype=float)
    out = c[0] * M_prev
    if m >= 1:
        M_cur = (2.0 * lam) * X
        out = out + c[1] * M_cur
        for k in range(1, m):
            M_next = ((2.0 * (k + lam)) * (X @ M_cur) - (k + 2 * lam - 1) * M_prev) / (k + 1)
            M_prev, M_cur = M_cur, M_next
            out = out + c[k + 1] * M_cur
    return sp.csr_matrix(out)[:n, :n]


def _coeff_array(a) -> np.ndarray:
    if isinstance(a, Cheb1):
        return np.asarray(a.coeffs)
    arr = np.atleast_1d(np.asarray(a))
    return arr.astype(np.result_type(arr, float))


def mult_op0(a, n: int) -> BandedOp:
    """Chebyshev multiplication operator: Toeplitz plus Hankel, bandwidth deg(a)."""
    return BandedOp.from_sparse(_mult0_sparse(_coeff_array(a), n))


def mult_opL(a, lam: int, n: int) -> BandedOp:
    """Multiplication by ``a`` in the C^(lam) basis (lam >= 1) via the three-term recurrence."""
    if lam < 1:
        raise ValueError("mult_opL needs lam >= 1; use mult_op0 for the Chebyshev basis")
    return BandedOp.from_sparse(_multL_sparse(_coeff_array(a), lam, n))


def mult_op(a, lam: int, n: int) -> BandedOp:
    return mult_op0(a, n) if lam == 0 else mult_opL(a, lam, n)


def _mult_sparse(a: np.ndarray, lam: int, n: int) -> sp.csr_matrix:
    if a.size == 1:
        return sp.identity(n, format="csr", dtype=a.dtype) * a[0]
    return _mult0_sparse(a, n) if lam == 0 else _multL_sparse(a, lam, n)


@dataclass(frozen=True, eq=False)
class LinearODO:
    """``sum_k a_k(x) d^k/dx^k`` with Chebyshev-series coefficients on one interval."""

    terms: dict
    interval: Interval = UNIT

    def __post_init__(self):
        terms = {}
        for k, a in dict(self.terms).items():
            k = int(k)
            if k < 0:
                raise ValueError("derivative orders must be >= 0")
            if not isinstance(a, Cheb1):
                a = Cheb1(np.atleast_1d(a), self.interval)
            terms[k] = a
        object.__setattr__(self, "terms", dict(sorted(terms.items())))

    @property
    def order(self) -> int:
        return max(self.terms) if self.terms else 0

    @property
    def max_coeff_degree(self) -> int:
        return max((a.degree for a in self.terms.values()), default=0)

    def __call__(self, u: Cheb1) -> Cheb1:
        """Apply the operator to a Chebyshev series (result in the Chebyshev basis)."""
        from numpy.polynomial import chebyshev as npc

        s = self.interval.scale
        out = np.zeros(1, dtype=complex)
        for k, a in self.terms.items():
            du = npc.chebder(u.coeffs, k, scl=s) if k else u.coeffs
            out = npc.chebadd(out, npc.chebmul(a.coeffs, du))
        if not np.any(np.imag(out)):
            out = out.real
        return Cheb1(out, self.interval)

    def __repr__(self):
        parts = ", ".join(f"{k}: deg {a.degree}" for k, a in self.terms.items())
        return f"LinearODO({{{parts}}}, interval=[{self.interval.a}, {self.interval.b}])"


def _odo_sparse(L: LinearODO, n: int, order: int) -> sp.csr_matrix:
    m = L.max_coeff_degree
    N = n + 2 * order + m + 2
    s = L.interval.scale
    total = sp.csr_matrix((N, N), dtype=complex if any(
        np.iscomplexobj(a.coeffs) for a in L.terms.values()) else float)
    for lam, a in L.terms.items():
        coeffs = trim_coeffs(a.coeffs, 0.0)
        if not np.any(coeffs):
            continue
        term = _mult_sparse(coeffs, lam, N) @ _diff_sparse(lam, N, s)
        if order > lam:
            term = _conv_stack_sparse(lam, order, N) @ term
        total = total + term
    return sp.csr_matrix(total)[:n, :n]


def discretize_odo(L: LinearODO, n: int, order: int | None = None) -> BandedOp:
    """n x n discretization mapping Chebyshev coefficients to ``C^(order)`` coefficients.

    ``order`` defaults to the differential order of ``L``; a larger value
    lets several operators share one range basis.
    """
    N = L.order
    top = L.terms.get(N)
    if top is None or not np.any(top.coeffs):
        raise IllPosedOperatorError("highest-order coefficient is identically zero")
    order = N if order is None else int(order)
    if order < N:
        raise ValueError(f"range order {order} is below the differential order {N}")
    return BandedOp.from_sparse(_odo_sparse(L, n, order))


def odo_sparse(L: LinearODO, n: int, order: int | None = None) -> sp.csr_matrix:
    """Same as :func:`discretize_odo` but returns a CSR matrix and skips validation."""
    order = L.order if order is None else int(order)
    return _odo_sparse(L, n, order)


def _cheb_derivs_at(t: float, n: int, d: int) -> np.ndarray:
    """``T_j^{(d)}(t)`` for j < n on [-1, 1]."""
    j = np.arange(n, dtype=float)
    if t in (1.0, -1.0):
        v = np.ones(n)
        for k in range(d):
            v = v * (j**2 - k**2) / (2 * k + 1)
        if t == -1.0:
            v = v * (-1.0) ** (j + d)
        return v
    if d == 0:
        v = np.empty(n)
        v[0] = 1.0
        if n > 1:
            v[1] = t
        for k in range(2, n):
            v[k] = 2 * t * v[k - 1] - v[k - 2]
        return v
    # T_j^{(d)} = 2^{d-1} (d-1)! j C^{(d)}_{j-d}
    C = np.zeros(n)
    if n > d:
        C[0] = 1.0
        if n - d > 1:
            C[1] = 2 * d * t
        for k in range(1, n - d - 1):
            C[k + 1] = (2 * (k + d) * t * C[k] - (k + 2 * d - 1) * C[k - 1]) / (k + 1)
    v = np.zeros(n)
    v[d:] = 2.0 ** (d - 1) * math.factorial(d - 1) * j[d:] * C[: n - d]
    return v


def functional_row(point: float, deriv: int, n: int, interval: Interval = UNIT) -> np.ndarray:
    """Action of ``u -> u^{(deriv)}(point)`` on T_0..T_{n-1} mapped to ``interval``."""
    interval.check(point)
    if np.isclose(point, interval.a, rtol=0, atol=10 * np.finfo(float).eps * interval.length):
        t = -1.0
    elif np.isclose(point, interval.b, rtol=0, atol=10 * np.finfo(float).eps * interval.length):
        t = 1.0
    else:
        t = float(interval.to_unit(point))
    return _cheb_derivs_at(t, n, deriv) * interval.scale**deriv


@dataclass(frozen=True, eq=False)
class BoundaryRows:
    """K x n matrix of constraint functionals applied to the Chebyshev basis."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows))
        rows = rows.astype(np.result_type(rows, float))
        object.__setattr__(self, "rows", rows)

    @property
    def K(self) -> int:
        return self.rows.shape[0]

    @property
    def n(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def from_functionals(cls, functionals, n: int, interval: Interval = UNIT) -> "BoundaryRows":
        """``functionals``: iterable of ``[(coef, point, deriv), ...]`` linear combinations."""
        rows = []
        for combo in functionals:
            row = np.zeros(n, dtype=complex if any(np.iscomplexobj(c) for c, _, _ in combo) else float)
            for coef, point, deriv in combo:
                row = row + coef * functional_row(point, deriv, n, interval)
            rows.append(row)
        return cls(np.array(rows))

    @classmethod
    def dirichlet(cls, n: int) -> "BoundaryRows":
        return cls(np.vstack([_cheb_derivs_at(-1.0, n, 0), _cheb_derivs_at(1.0, n, 0)]))

    @classmethod
    def neumann(cls, n: int) -> "BoundaryRows":
        return cls(np.vstack([_cheb_derivs_at(-1.0, n, 1), _cheb_derivs_at(1.0, n, 1)]))


def assemble_system(Lmat, B: BoundaryRows, c, rhs: Cheb1, order: int):
    """Stack the constraint rows above the leading ``n - K`` operator rows.

    ``rhs`` holds Chebyshev coefficients; it is converted to the ``C^(order)``
    range basis before truncation.  Returns ``(AlmostBanded, rhs_vector)``.
    """
    from .almost_banded import AlmostBanded

    L = Lmat.tosparse() if isinstance(Lmat, BandedOp) else sp.csr_matrix(Lmat)
    n = L.shape[0]
    K = B.K
    if K > n:
        raise ValueError(f"{K} constraints exceed the system size {n}")
    if B.n != n:
        raise ValueError(f"constraint rows have {B.n} columns, operator has {n}")
    f = np.asarray(rhs.coeffs if isinstance(rhs, Cheb1) else rhs)
    fc = convert_coeffs(f, 0, order)
    fn = np.zeros(n - K, dtype=np.result_type(fc, np.asarray(c), float))
    m = min(n - K, fc.size)
    fn[:m] = fc[:m]
    b = np.concatenate([np.asarray(c, dtype=fn.dtype).reshape(K), fn])
    return AlmostBanded(B.rows, L[: n - K, :]), b
