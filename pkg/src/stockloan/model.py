"""Contract and market parameter containers, validation, and the handful of
closed-form quantities everything else is built from.

Conventions used across the package:

* Time is always time-to-maturity ``tau`` in ``[0, T]``; calendar time never
  appears in the API.
* Money and rates are plain double-precision reals. There is no currency or
  day-count handling; all rates are continuously compounded per year.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp

from .errors import ParameterError, UnboundedBoundaryError


@dataclass(frozen=True)
class LoanSpec:
    """Terms of a collateralized stock loan.

    principal: amount lent at inception (E > 0).
    loan_rate: continuously compounded rate charged on the loan.
    maturity: contract lifetime in years (T > 0).
    margin_fraction: fraction of the accrued debt that falls due when the
        stock price first touches the debt curve. Zero degenerates to a
        non-recourse loan; one would extinguish the loan and is rejected.
    """

    principal: float
    loan_rate: float
    maturity: float
    margin_fraction: float = 0.0

    def __post_init__(self) -> None:
        if not self.principal > 0.0:
            raise ParameterError(f"principal must be positive, got {self.principal}")
        if not self.maturity > 0.0:
            raise ParameterError(f"maturity must be positive, got {self.maturity}")
        if not 0.0 <= self.margin_fraction < 1.0:
            raise ParameterError(
                "margin_fraction must lie in [0, 1), got "
                f"{self.margin_fraction}"
            )

    def debt(self, tau: float) -> float:
        """Accrued debt at time-to-maturity ``tau`` (no range check)."""
        return self.principal * exp(self.loan_rate * (self.maturity - tau))


@dataclass(frozen=True)
class MarketParams:
    """Risk-neutral market parameters: rate, dividend yield, volatility."""

    risk_free: float
    dividend: float
    volatility: float

    def __post_init__(self) -> None:
        if not self.volatility > 0.0:
            raise ParameterError(f"volatility must be positive, got {self.volatility}")
        if self.risk_free < 0.0:
            raise ParameterError(f"risk_free must be nonnegative, got {self.risk_free}")
        if self.dividend < 0.0:
            raise ParameterError(f"dividend must be nonnegative, got {self.dividend}")


@dataclass(frozen=True)
class DimensionlessConstants:
    """Constants of the log-space reduction of the pricing PDE.

    With ``g = 2r/sigma^2``, ``q = 2*delta/sigma^2`` and loan rate ``eta``:
    ``k = g - q - 2*eta/sigma^2 - 1``, ``alpha = -k/2``,
    ``beta = -alpha^2 - g`` and ``lam = 2*alpha``.
    """

    gamma: float
    q: float
    k: float
    alpha: float
    beta: float
    lam: float


@dataclass(frozen=True)
class GridSpec:
    """Discretization controls for the boundary solve.

    time_steps: number of uniform panels over [0, T] (n >= 2).
    quadrature_order: Gauss-Laguerre order for the singular rebate integral.
    newton_tol: relative Newton tolerance (both residual and step).
    newton_max_iter: Newton iteration cap per time step.
    startup_split: fine sub-steps inside the first panel (1 disables the
        refined startup; the boundary leaves expiry too steeply for a
        single coarse panel otherwise).
    """

    time_steps: int = 50
    quadrature_order: int = 64
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    startup_split: int = 8

    def __post_init__(self) -> None:
        if self.time_steps < 2:
            raise ParameterError(f"time_steps must be >= 2, got {self.time_steps}")
        if self.quadrature_order < 4:
            raise ParameterError(
                f"quadrature_order must be >= 4, got {self.quadrature_order}"
            )
        if not self.newton_tol > 0.0:
            raise ParameterError(f"newton_tol must be positive, got {self.newton_tol}")
        if self.newton_max_iter < 1:
            raise ParameterError(
                f"newton_max_iter must be >= 1, got {self.newton_max_iter}"
            )
        if self.startup_split < 1:
            raise ParameterError(
                f"startup_split must be >= 1, got {self.startup_split}"
            )


def accrued_debt(spec: LoanSpec, tau: float) -> float:
    """Accrued debt ``E * exp(eta * (T - tau))`` at time-to-maturity tau.

    Strictly decreasing in tau for a positive loan rate; equals the
    principal at tau = T.
    """
    if not 0.0 <= tau <= spec.maturity:
        raise ParameterError(
            f"tau must lie in [0, {spec.maturity}], got {tau}"
        )
    return spec.debt(tau)


def dimensionless_constants(
    market: MarketParams, spec: LoanSpec
) -> DimensionlessConstants:
    """Constants of the dimensionless reduction for this contract/market."""
    sig2 = market.volatility * market.volatility
    gamma = 2.0 * market.risk_free / sig2
    q = 2.0 * market.dividend / sig2
    k = gamma - q - 2.0 * spec.loan_rate / sig2 - 1.0
    alpha = -0.5 * k
    beta = -alpha * alpha - gamma
    return DimensionlessConstants(gamma=gamma, q=q, k=k, alpha=alpha, beta=beta, lam=2.0 * alpha)


def validate_contract(market: MarketParams, spec: LoanSpec) -> None:
    """Reject parameter pairs for which the exit boundary is unbounded.

    When the dividend yield is zero and the risk-free rate exceeds the loan
    rate, the exit price just before expiry diverges; failing early beats a
    silent overflow during the march.
    """
    if market.dividend == 0.0 and market.risk_free > spec.loan_rate:
        raise UnboundedBoundaryError(
            "dividend = 0 with risk_free > loan_rate leaves the exit price "
            "unbounded near expiry"
        )


def terminal_exit_price(spec: LoanSpec, market: MarketParams) -> float:
    """Limit of the optimal exit price as tau -> 0+.

    Equals ``max(E*exp(eta*T), (r - eta)/delta * E*exp(eta*T))``. The second
    branch only wins when ``r > eta + delta``: near expiry the dividend
    earned plus the loan interest saved must cover the interest forgone on
    the repaid debt.
    """
    validate_contract(market, spec)
    debt_at_expiry = spec.debt(0.0)
    if market.dividend == 0.0:
        return debt_at_expiry
    factor = (market.risk_free - spec.loan_rate) / market.dividend
    return max(debt_at_expiry, factor * debt_at_expiry)
