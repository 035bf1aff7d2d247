"""Pricing engine for finite-maturity margin-call stock loans.

Solves the optimal exit boundary from its governing Volterra integral
equation and evaluates contract values, rebates and service fees from the
closed-form integral representation, with an independent binomial-lattice
oracle for validation.
"""

from ._backend import backend_name, set_backend
from .binomial_oracle import (
    TreeSpec,
    mc_tree_value,
    nr_tree_boundary_bracket,
    nr_tree_value,
)
from .errors import (
    BoundarySolveError,
    BracketNotFoundError,
    MarginCalledError,
    NewtonConvergenceError,
    ParameterError,
    SingularDerivativeError,
    SolverError,
    StockLoanError,
    UnboundedBoundaryError,
)
from .ie_solver import BoundaryCurve, ResidualProblem, newton_solve, solve_boundary
from .kernels import KernelContext, QuadratureRule, gauss_laguerre
from .margincall import (
    ExerciseState,
    MarginCallPricer,
    PriceQuote,
    mc_solve,
    mc_value,
    service_fee,
)
from .model import (
    DimensionlessConstants,
    GridSpec,
    LoanSpec,
    MarketParams,
    accrued_debt,
    dimensionless_constants,
    terminal_exit_price,
    validate_contract,
)
from .nonrecourse import NonRecoursePricer, RebateFunction, nr_solve, nr_value, rebate

__version__ = "0.1.0"

__all__ = [
    "BoundaryCurve",
    "BoundarySolveError",
    "BracketNotFoundError",
    "DimensionlessConstants",
    "ExerciseState",
    "GridSpec",
    "KernelContext",
    "LoanSpec",
    "MarginCallPricer",
    "MarginCalledError",
    "MarketParams",
    "NewtonConvergenceError",
    "NonRecoursePricer",
    "ParameterError",
    "PriceQuote",
    "QuadratureRule",
    "RebateFunction",
    "ResidualProblem",
    "SingularDerivativeError",
    "SolverError",
    "StockLoanError",
    "TreeSpec",
    "UnboundedBoundaryError",
    "accrued_debt",
    "backend_name",
    "dimensionless_constants",
    "gauss_laguerre",
    "mc_solve",
    "mc_tree_value",
    "mc_value",
    "newton_solve",
    "nr_solve",
    "nr_tree_boundary_bracket",
    "nr_tree_value",
    "nr_value",
    "rebate",
    "service_fee",
    "set_backend",
    "solve_boundary",
    "terminal_exit_price",
    "validate_contract",
]
