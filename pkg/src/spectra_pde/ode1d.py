"""Adaptive boundary-value solver for linear ODEs with variable coefficients."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .almost_banded import almost_banded_solve
from .chebcore import DEFAULT_TOL, MAX_DEGREE, Cheb1, coeffs_to_vals, interp1_adaptive, tail_resolved, trim_coeffs
from .errors import UnresolvedError
from .ultraops import BoundaryRows, LinearODO, assemble_system, odo_sparse

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class OdeProblem:
    """``L u = f`` with ``K`` linear constraints ``functional_k(u) = values[k]``.

    Each functional is a list of ``(coef, point, deriv)`` triples meaning
    ``sum coef * u^{(deriv)}(point)``.
    """

    operator: LinearODO
    functionals: list
    values: np.ndarray
    rhs: Cheb1 | Callable | float = 0.0

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.values))
        object.__setattr__(self, "values", vals.astype(np.result_type(vals, float)))
        if len(self.functionals) != vals.size:
            raise ValueError(f"{len(self.functionals)} functionals but {vals.size} values")
        rhs = self.rhs
        interval = self.operator.interval
        if callable(rhs) and not isinstance(rhs, Cheb1):
            rhs = interp1_adaptive(rhs, interval)
        elif not isinstance(rhs, Cheb1):
            rhs = Cheb1(np.atleast_1d(rhs), interval)
        object.__setattr__(self, "rhs", rhs)

    @property
    def K(self) -> int:
        return len(self.functionals)

    @classmethod
    def dirichlet(cls, operator: LinearODO, left, right, rhs=0.0) -> "OdeProblem":
        a, b = operator.interval
        return cls(operator, [[(1.0, a, 0)], [(1.0, b, 0)]], [left, right], rhs)


@dataclass
class OdeInfo:
    n: int
    residual: float
    history: list = field(default_factory=list)
    wall_time: float = 0.0


def _trim_keeping_constraints(x: np.ndarray, rows: np.ndarray, tol: float) -> np.ndarray:
    """Trim the tail, but keep coefficients whose removal would disturb a constraint.

    Derivative functionals weigh mode j by about j^(2d), so a tail that is
    negligible in the coefficients can still matter at the boundary.
    """
    m = trim_coeffs(x, tol).size
    if m == x.size or rows.size == 0:
        return x[:m].copy()
    sup = np.abs(coeffs_to_vals(Cheb1(x))).max()
    # effect[r, k] = |sum_{j >= k} rows[r, j] x[j]|
    effect = np.abs(np.cumsum((rows * x)[:, ::-1], axis=1)[:, ::-1]).max(axis=0)
    ok = np.nonzero(effect <= tol * sup)[0]  # a factor 10 inside the contract
    ok = ok[ok >= m]
    k = ok[0] if ok.size else x.size
    return x[:k].copy()


def solve_ode(
    p: OdeProblem,
    tol: float = DEFAULT_TOL,
    n0: int = 17,
    max_degree: int = MAX_DEGREE,
    full_output: bool = False,
):
    """Solve on grids n = 17, 33, 65, ... until the solution's coefficients decay.

    Returns the trimmed :class:`Cheb1`; with ``full_output=True`` returns
    ``(u, OdeInfo)``.
    """
    t0 = time.perf_counter()
    L = p.operator
    N = L.order
    n = n0
    history = []
    while True:
        Lmat = odo_sparse(L, n)
        B = BoundaryRows.from_functionals(p.functionals, n, L.interval)
        M, b = assemble_system(Lmat, B, p.values, p.rhs, N)
        x = almost_banded_solve(M, b)
        res = float(np.linalg.norm(M @ x - b) / max(np.linalg.norm(b), np.finfo(float).tiny))
        history.append((n, res))
        logger.debug("ode solve n=%d residual=%.3e", n, res)
        if tail_resolved(x, tol):
            break
        if n - 1 >= max_degree:
            raise UnresolvedError(
                f"ODE solution not resolved at degree cap {max_degree}", cap=max_degree, size=n
            )
        n = 2 * (n - 1) + 1
    u = Cheb1(_trim_keeping_constraints(x, B.rows, tol), L.interval)
    if not full_output:
        return u
    return u, OdeInfo(n=n, residual=res, history=history, wall_time=time.perf_counter() - t0)
