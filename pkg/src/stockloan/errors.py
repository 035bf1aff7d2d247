"""Exception types raised by the pricing engine."""

from __future__ import annotations


class StockLoanError(Exception):
    """Base class for all engine errors."""


class ParameterError(StockLoanError, ValueError):
    """A contract, market or grid parameter violates its constraints."""


class UnboundedBoundaryError(ParameterError):
    """Zero dividend yield with risk-free rate above the loan rate.

    In that regime the exit price just before expiry grows without bound,
    so the contract is rejected up front instead of overflowing later.
    """


class SolverError(StockLoanError):
    """Base class for root-finding and boundary-march failures."""


class NewtonConvergenceError(SolverError):
    """Newton-Raphson did not converge within the iteration budget."""

    def __init__(self, message: str, last_iterate: float, last_residual: float):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.last_residual = last_residual


class SingularDerivativeError(SolverError):
    """The finite-difference derivative vanished at a Newton iterate."""


class BoundarySolveError(SolverError):
    """A time-march step failed; carries the step index and its tau."""

    def __init__(self, message: str, step: int, tau: float):
        super().__init__(message)
        self.step = step
        self.tau = tau


class BracketNotFoundError(StockLoanError):
    """No exercise switch was found on the scanned lattice levels."""


class MarginCalledError(StockLoanError, ValueError):
    """Requested a quote below the debt curve, where the pre-margin-call
    contract does not exist."""
