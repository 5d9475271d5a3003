"""Spectral solvers for linear ODEs and linear PDEs on rectangles.

Functions are stored as Chebyshev coefficients, differential operators are
discretized with sparse ultraspherical operators, and PDEs are solved as
constrained generalized Sylvester matrix equations after splitting the
operator into a short sum of tensor products of ODOs.

Quick start::

    from spectra_pde import PdeProblem, solve_pde
    p = PdeProblem("lap(u) + 1000*u", bcs={e: "dirichlet: 1" for e in
                   ("left", "right", "down", "up")}, rhs="cos(10*x*y)")
    u = solve_pde(p)
    u(0.1, 0.2)
"""

from .almost_banded import AlmostBanded, almost_banded_solve
from .chebcore import (
    Cheb1,
    Cheb2,
    Interval,
    chebpts,
    clenshaw_eval,
    coeffs_to_vals,
    coeffs_to_vals2,
    eval2,
    interp1_adaptive,
    interp2_adaptive,
    vals_to_coeffs,
    vals_to_coeffs2,
)
from .errors import (
    CompatibilityError,
    DependentConstraintsError,
    DomainError,
    EmptyInputError,
    EvaluationError,
    IllPosedError,
    IllPosedOperatorError,
    InternalConsistencyError,
    NonlinearityError,
    NonUniqueSolutionError,
    ParseError,
    ResourceError,
    SchemaError,
    SingularSystemError,
    SpectraError,
    UnresolvedError,
    ZeroOperatorError,
)
from .expr import parse, parse_pdo
from .frontend import BcSpec, CoeffArray, Constraint, extract_coeffs, parse_bc, parse_ode, parse_ode_bcs
from .ode1d import OdeProblem, solve_ode
from .pde import Diagnostics, PdeProblem, Solution, solve_pde
from .separable import SeparableRep, splitting_rank
from .sylvester import ConstrainedSylvester, solve_sylvester
from .ultraops import LinearODO, conv_op, diff_op, discretize_odo, mult_op

__version__ = "0.1.0"

__all__ = [
    "AlmostBanded",
    "BcSpec",
    "Cheb1",
    "Cheb2",
    "CoeffArray",
    "CompatibilityError",
    "ConstrainedSylvester",
    "Constraint",
    "DependentConstraintsError",
    "Diagnostics",
    "DomainError",
    "EmptyInputError",
    "EvaluationError",
    "IllPosedError",
    "IllPosedOperatorError",
    "InternalConsistencyError",
    "Interval",
    "LinearODO",
    "NonUniqueSolutionError",
    "NonlinearityError",
    "OdeProblem",
    "ParseError",
    "PdeProblem",
    "ResourceError",
    "SchemaError",
    "SeparableRep",
    "SingularSystemError",
    "Solution",
    "SpectraError",
    "UnresolvedError",
    "ZeroOperatorError",
    "almost_banded_solve",
    "chebpts",
    "clenshaw_eval",
    "coeffs_to_vals",
    "coeffs_to_vals2",
    "conv_op",
    "diff_op",
    "discretize_odo",
    "eval2",
    "extract_coeffs",
    "interp1_adaptive",
    "interp2_adaptive",
    "mult_op",
    "parse",
    "parse_bc",
    "parse_ode",
    "parse_ode_bcs",
    "parse_pdo",
    "solve_ode",
    "solve_pde",
    "solve_sylvester",
    "splitting_rank",
    "vals_to_coeffs",
    "vals_to_coeffs2",
]
