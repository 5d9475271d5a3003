"""Chebyshev coefficient containers, transforms and adaptive interpolation.

Coefficients are stored in ascending degree: index ``j`` multiplies
``T_j``.  Bivariate coefficient matrices are indexed ``X[i, j]`` with ``i``
the degree in ``y`` and ``j`` the degree in ``x``.  Sample values are always
ordered along the second-kind points ``cos(k*pi/(n-1))``, ``k = 0..n-1``,
i.e. from the right end of the interval to the left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import fft

from .errors import DomainError, EmptyInputError, EvaluationError, UnresolvedError

DEFAULT_TOL = 1e-14
MAX_DEGREE = 2**17
MAX_DEGREE_2D = 2**12

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Interval:
    a: float = -1.0
    b: float = 1.0

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError(f"interval endpoints must be finite, got [{a}, {b}]")
        if not a < b:
            raise ValueError(f"interval requires a < b, got [{a}, {b}]")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def scale(self) -> float:
        """Chain-rule factor d(phi)/dx of the map onto [-1, 1]."""
        return 2.0 / (self.b - self.a)

    def to_unit(self, x):
        return (2.0 * (np.asarray(x, dtype=float) - self.a) / (self.b - self.a)) - 1.0

    def from_unit(self, t):
        return self.a + 0.5 * (np.asarray(t, dtype=float) + 1.0) * (self.b - self.a)

    def contains(self, x) -> np.ndarray:
        slack = 10 * _EPS * (self.b - self.a)
        x = np.asarray(x, dtype=float)
        return (x >= self.a - slack) & (x <= self.b + slack)

    def check(self, x):
        ok = self.contains(x)
        if not np.all(ok):
            bad = np.asarray(x, dtype=float)[~ok].ravel()[0]
            raise DomainError(f"point {bad!r} lies outside [{self.a}, {self.b}]")

    def __iter__(self):
        yield self.a
        yield self.b


UNIT = Interval(-1.0, 1.0)


def _as_coeff_array(c) -> np.ndarray:
    c = np.asarray(c)
    if c.dtype.kind in "biu":
        c = c.astype(float)
    elif c.dtype.kind == "c":
        c = c.astype(complex)
    else:
        c = c.astype(float)
    return np.atleast_1d(c)


def tail_window(n: int) -> int:
    return min(n, max(3, math.ceil(n / 32)))


def tail_resolved(coeffs, tol: float = DEFAULT_TOL) -> bool:
    """True when the trailing ``max(3, ceil(n/32))`` entries are negligible."""
    c = np.abs(np.asarray(coeffs))
    vmax = c.max() if c.size else 0.0
    w = tail_window(c.size)
    return bool(c[c.size - w :].max() <= tol * vmax)


def trim_coeffs(coeffs, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Drop the trailing coefficients below ``tol * max|c|``; keep at least one."""
    c = np.asarray(coeffs)
    mag = np.abs(c)
    big = np.nonzero(mag > tol * mag.max())[0] if c.size else []
    last = big[-1] + 1 if len(big) else 1
    return c[:last].copy()


@dataclass(frozen=True, eq=False)
class Cheb1:
    """A Chebyshev series ``sum_j coeffs[j] T_j(phi(x))`` on an interval."""

    coeffs: np.ndarray
    interval: Interval = UNIT

    def __post_init__(self):
        c = _as_coeff_array(self.coeffs)
        if c.size == 0:
            raise EmptyInputError("a Chebyshev series needs at least one coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __len__(self):
        return self.coeffs.size

    def __call__(self, x):
        return clenshaw_eval(self, x)

    def trim(self, tol: float = DEFAULT_TOL) -> "Cheb1":
        return Cheb1(trim_coeffs(self.coeffs, tol), self.interval)

    def is_constant(self, tol: float = 0.0) -> bool:
        c = np.abs(self.coeffs)
        return bool(c.size == 1 or c[1:].max() <= tol * max(c.max(), 1e-300))

    def padded(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=self.coeffs.dtype)
        m = min(n, self.coeffs.size)
        out[:m] = self.coeffs[:m]
        return out

    def __repr__(self):
        return f"Cheb1(degree={self.degree}, interval=[{self.interval.a}, {self.interval.b}])"


@dataclass(frozen=True, eq=False)
class Cheb2:
    """Bivariate coefficients: ``X[i, j]`` multiplies ``T_i(psi(y)) T_j(phi(x))``."""

    X: np.ndarray
    xinterval: Interval = UNIT
    yinterval: Interval = UNIT

    def __post_init__(self):
        X = _as_coeff_array(self.X)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.size == 0:
            raise EmptyInputError("Cheb2 needs a non-empty 2-D coefficient matrix")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)

    @property
    def shape(self):
        return self.X.shape

    @property
    def nx(self) -> int:
        return self.X.shape[1]

    @property
    def ny(self) -> int:
        return self.X.shape[0]

    @property
    def domain(self):
        return (self.xinterval.a, self.xinterval.b, self.yinterval.a, self.yinterval.b)

    def __call__(self, x, y):
        return eval2(self, x, y)

    def trim(self, tol: float = DEFAULT_TOL) -> "Cheb2":
        X = self.X
        mag = np.abs(X)
        vmax = mag.max()
        keep = mag > tol * vmax
        rows = np.nonzero(keep.any(axis=1))[0]
        cols = np.nonzero(keep.any(axis=0))[0]
        ny = rows[-1] + 1 if rows.size else 1
        nx = cols[-1] + 1 if cols.size else 1
        return Cheb2(X[:ny, :nx].copy(), self.xinterval, self.yinterval)

    def is_constant(self) -> bool:
        return self.X.shape == (1, 1)

    def padded(self, ny: int, nx: int) -> np.ndarray:
        out = np.zeros((ny, nx), dtype=self.X.dtype)
        my, mx = min(ny, self.ny), min(nx, self.nx)
        out[:my, :mx] = self.X[:my, :mx]
        return out

    def grid(self, xs, ys) -> np.ndarray:
        """Values on the tensor grid, shape ``(len(ys), len(xs))``."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        self.xinterval.check(xs)
        self.yinterval.check(ys)
        Tx = _cheb_vander(self.xinterval.to_unit(xs), self.nx)  # (len(xs), nx)
        Ty = _cheb_vander(self.yinterval.to_unit(ys), self.ny)
        return Ty @ self.X @ Tx.T

    def __repr__(self):
        return f"Cheb2(shape={self.X.shape}, domain={self.domain})"


def _clenshaw_unit(c: np.ndarray, t: np.ndarray) -> np.ndarray:
    # c may carry trailing axes; recurrence runs along axis 0
    bk1 = np.zeros(np.broadcast_shapes(t.shape, c.shape[1:]), dtype=np.result_type(c, t))
    bk2 = np.zeros_like(bk1)
    two_t = 2.0 * t
    for k in range(c.shape[0] - 1, 0, -1):
        bk1, bk2 = c[k] + two_t * bk1 - bk2, bk1
    return c[0] + t * bk1 - bk2


def clenshaw_eval(f: Cheb1, x):
    """Evaluate a Chebyshev series at ``x`` (scalar or array) by Clenshaw's recurrence."""
    f.interval.check(x)
    t = np.clip(f.interval.to_unit(x), -1.0, 1.0)
    out = _clenshaw_unit(f.coeffs, t)
    return out.item() if np.ndim(out) == 0 else out


def _cheb_vander(t: np.ndarray, n: int) -> np.ndarray:
    t = np.clip(t, -1.0, 1.0)
    V = np.empty((t.size, n))
    V[:, 0] = 1.0
    if n > 1:
        V[:, 1] = t
    for k in range(2, n):
        V[:, k] = 2.0 * t * V[:, k - 1] - V[:, k - 2]
    return V


def eval2(S: Cheb2, x, y):
    """Evaluate a bivariate series at matching arrays of points ``(x, y)``."""
    S.xinterval.check(x)
    S.yinterval.check(y)
    tx = np.clip(S.xinterval.to_unit(x), -1.0, 1.0)
    ty = np.clip(S.yinterval.to_unit(y), -1.0, 1.0)
    tx, ty = np.broadcast_arrays(tx, ty)
    shape = tx.shape
    rows = _clenshaw_unit(S.X.T, tx.ravel()[:, None])  # (npts, ny): x-sums per row
    out = _clenshaw_unit(rows.T, ty.ravel())
    return out.item() if len(shape) == 0 else out.reshape(shape)


def chebpts(n: int, interval: Interval = UNIT) -> np.ndarray:
    """Second-kind Chebyshev points ``cos(k*pi/(n-1))`` mapped to ``interval``."""
    if n < 1:
        raise EmptyInputError("need at least one point")
    if n == 1:
        t = np.zeros(1)
    else:
        k = np.arange(n)
        # sin form is symmetric to working precision
        t = np.sin(np.pi * (n - 1 - 2 * k) / (2 * (n - 1)))
    return interval.from_unit(t)


def _dct1(v: np.ndarray, axis: int) -> np.ndarray:
    if np.iscomplexobj(v):
        return fft.dct(v.real, type=1, axis=axis) + 1j * fft.dct(v.imag, type=1, axis=axis)
    return fft.dct(v, type=1, axis=axis)


def _vals2coeffs_axis(v: np.ndarray, axis: int) -> np.ndarray:
    n = v.shape[axis]
    if n == 1:
        return v.astype(np.result_type(v, float)).copy()
    c = _dct1(v, axis) / (n - 1)
    sl = [slice(None)] * v.ndim
    for end in (0, n - 1):
        sl[axis] = end
        c[tuple(sl)] /= 2.0
    return c


def _coeffs2vals_axis(c: np.ndarray, axis: int) -> np.ndarray:
    n = c.shape[axis]
    if n == 1:
        return c.astype(np.result_type(c, float)).copy()
    w = c.astype(np.result_type(c, float)).copy()
    sl = [slice(None)] * c.ndim
    sl[axis] = slice(1, n - 1)
    w[tuple(sl)] /= 2.0
    return _dct1(w, axis)


def vals_to_coeffs(values, interval: Interval = UNIT) -> Cheb1:
    """Coefficients of the interpolant through values at second-kind points."""
    v = _as_coeff_array(values)
    if v.size == 0:
        raise EmptyInputError("vals_to_coeffs needs at least one value")
    return Cheb1(_vals2coeffs_axis(v, 0), interval)


def coeffs_to_vals(f: Cheb1, n: int | None = None, truncate: bool = False) -> np.ndarray:
    """Values of ``f`` at ``n`` second-kind points (inverse of :func:`vals_to_coeffs`)."""
    c = f.coeffs
    n = c.size if n is None else int(n)
    if n < 1:
        raise EmptyInputError("need at least one point")
    if n < c.size:
        if not truncate:
            raise ValueError(f"{n} points cannot represent {c.size} coefficients; pass truncate=True")
        c = c[:n]
    else:
        c = np.concatenate([c, np.zeros(n - c.size, dtype=c.dtype)])
    return _coeffs2vals_axis(c, 0)


def vals_to_coeffs2(V: np.ndarray) -> np.ndarray:
    """2-D transform: values ``V[i, j] = f(x_j, y_i)`` to coefficients ``X[i, j]``."""
    return _vals2coeffs_axis(_vals2coeffs_axis(np.asarray(V), 0), 1)


def coeffs_to_vals2(X: np.ndarray) -> np.ndarray:
    return _coeffs2vals_axis(_coeffs2vals_axis(np.asarray(X), 0), 1)


def _sample(f, *pts):
    vals = np.asarray(f(*pts))
    shape = np.broadcast_shapes(*(p.shape for p in pts))
    vals = np.broadcast_to(vals, shape)
    if vals.dtype.kind == "c":
        vals = vals.astype(complex)
        if not np.any(vals.imag):
            vals = vals.real.copy()
    else:
        vals = vals.astype(float)
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("function returned a non-finite value at a sample point")
    return vals


def interp1_adaptive(
    f: Callable,
    interval: Interval = UNIT,
    tol: float = DEFAULT_TOL,
    max_degree: int = MAX_DEGREE,
) -> Cheb1:
    """Chebyshev interpolant of ``f`` at degrees 8, 16, 32, ... until the tail decays.

    ``f`` is called with a numpy array of points and must return an array of
    the same shape (or a scalar, broadcast).
    """
    if not isinstance(interval, Interval):
        interval = Interval(*interval)
    m = 8
    while True:
        pts = chebpts(m + 1, interval)
        c = _vals2coeffs_axis(_sample(f, pts), 0)
        if tail_resolved(c, tol):
            return Cheb1(trim_coeffs(c, tol), interval)
        if m >= max_degree:
            raise UnresolvedError(
                f"function not resolved at degree cap {max_degree}", cap=max_degree, size=m
            )
        m *= 2


def interp2_adaptive(
    f: Callable,
    xinterval: Interval = UNIT,
    yinterval: Interval = UNIT,
    tol: float = DEFAULT_TOL,
    max_degree: int = MAX_DEGREE_2D,
) -> Cheb2:
    """Tensor-product interpolant of ``f(x, y)``; each degree doubles independently."""
    if not isinstance(xinterval, Interval):
        xinterval = Interval(*xinterval)
    if not isinstance(yinterval, Interval):
        yinterval = Interval(*yinterval)
    mx = my = 8
    while True:
        xs = chebpts(mx + 1, xinterval)
        ys = chebpts(my + 1, yinterval)
        V = _sample(f, xs[None, :], ys[:, None])
        X = vals_to_coeffs2(V)
        x_ok, y_ok = resolved2(X, tol)
        if x_ok and y_ok:
            return Cheb2(X, xinterval, yinterval).trim(tol)
        if (not x_ok and mx >= max_degree) or (not y_ok and my >= max_degree):
            raise UnresolvedError(
                f"bivariate function not resolved at degree cap {max_degree}",
                cap=max_degree,
                size=(mx, my),
            )
        if not x_ok:
            mx *= 2
        if not y_ok:
            my *= 2


def resolved2(X: np.ndarray, tol: float = DEFAULT_TOL) -> tuple[bool, bool]:
    """Tail test on trailing columns (x) and trailing rows (y) of a coefficient matrix."""
    mag = np.abs(np.asarray(X))
    vmax = mag.max()
    ny, nx = mag.shape
    x_ok = mag[:, nx - tail_window(nx) :].max() <= tol * vmax
    y_ok = mag[ny - tail_window(ny) :, :].max() <= tol * vmax
    return bool(x_ok), bool(y_ok)
