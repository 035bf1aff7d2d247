"""Margin-call stock loan pricer: exit boundary, contract values, service fee.

The boundary solves the value-matching residual built from the reflected
kernels plus the transformed singular rebate term; values in the holding
region follow from the integral representation over the solved boundary.
The pricing domain is restricted to spots at or above the debt curve — the
pre-margin-call contract does not exist below it, and a quote there would
misstate the borrower's position.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _backend
from .errors import MarginCalledError, ParameterError
from .ie_solver import BoundaryCurve, ResidualProblem, solve_boundary, trapezoid_weights
from .kernels import (
    KernelContext,
    QuadratureRule,
    gauss_laguerre,
    k_integral,
    m_reflected,
    q_total_integral,
)
from .model import (
    GridSpec,
    LoanSpec,
    MarketParams,
    dimensionless_constants,
    terminal_exit_price,
    validate_contract,
)
from .nonrecourse import RebateFunction, rebate


class ExerciseState(str, Enum):
    HOLDING = "holding"
    EXIT_OPTIMAL = "exit_optimal"
    MARGIN_CALL_BOUNDARY = "margin_call_boundary"


@dataclass(frozen=True)
class PriceQuote:
    """Contract value at one (spot, tau) point with its exercise state."""

    value: float
    state: ExerciseState
    tau: float
    spot: float


@dataclass(frozen=True)
class MarginCallPricer:
    """Solved margin-call contract; immutable and safe to share."""

    market: MarketParams
    spec: LoanSpec
    grid: GridSpec
    boundary: BoundaryCurve
    rebate: RebateFunction
    context: KernelContext
    rule: QuadratureRule

    def quote(self, spot: float, tau: float) -> PriceQuote:
        """Quote at one point of the pricing domain ``spot >= debt(tau)``.

        Spots at or above the boundary earn the exit payoff; a spot exactly
        on the debt curve earns the rebate; interior spots evaluate the
        integral representation.
        """
        spec = self.spec
        if not 0.0 <= tau <= spec.maturity * (1.0 + 1e-12):
            raise ParameterError(f"tau={tau} outside [0, {spec.maturity}]")
        debt = spec.debt(tau)
        if spot < debt * (1.0 - 1e-12):
            raise MarginCalledError(
                f"spot {spot} lies below the debt {debt} at tau={tau}; the "
                "contract has already been margin-called there"
            )
        if tau <= 0.0:
            return PriceQuote(max(spot - debt, 0.0), ExerciseState.EXIT_OPTIMAL, tau, spot)
        if spot >= self.boundary.value_at(tau) * (1.0 - 1e-12):
            return PriceQuote(spot - debt, ExerciseState.EXIT_OPTIMAL, tau, spot)
        if spot <= debt * (1.0 + 1e-15):
            return PriceQuote(
                float(self.rebate(tau)), ExerciseState.MARGIN_CALL_BOUNDARY, tau, spot
            )
        value = m_reflected(spot, tau, spec.debt(0.0), self.context) + q_total_integral(
            spot, tau, self.boundary, self.context, self.rule
        )
        # exit rights floor the value at the payoff; the representation can
        # undershoot it by discretization noise near the boundary
        value = max(value, spot - debt, 0.0)
        return PriceQuote(value, ExerciseState.HOLDING, tau, spot)

    def value(self, spot: float, tau: float) -> float:
        return self.quote(spot, tau).value

    def service_fee(self, spot: float) -> float:
        """Upfront fee making the contract fair at inception:
        value(spot, T) - spot + principal."""
        return self.quote(spot, self.spec.maturity).value - spot + self.spec.principal


def mc_solve(market: MarketParams, spec: LoanSpec, grid: GridSpec) -> MarginCallPricer:
    """Solve the margin-call exit boundary on the grid.

    Builds the rebate first (one embedded non-recourse solve), then marches
    the boundary with the reflected-kernel residual.
    """
    validate_contract(market, spec)
    reb = rebate(market, spec, grid)
    constants = dimensionless_constants(market, spec)
    ctx = KernelContext(market=market, spec=spec, constants=constants, rebate=reb)
    rule = gauss_laguerre(grid.quadrature_order)
    a0 = spec.debt(0.0)
    core_args = (
        market.risk_free,
        market.dividend,
        market.volatility,
        spec.loan_rate,
        spec.principal,
        spec.maturity,
    )
    lam = constants.lam

    def residual(s: float, j: int, taus: np.ndarray, values: np.ndarray) -> float:
        tau = taus[j]
        debt = spec.debt(tau)
        # keep wild Newton trial points inside the kernel domain; the linear
        # term keeps its slope so no spurious root appears below the debt
        s_eval = s if s > debt * (1.0 + 1e-12) else debt * (1.0 + 1e-12)
        us = taus[: j + 1]
        bs = np.empty(j + 1)
        bs[:j] = values[:j]
        bs[j] = s_eval
        ws = trapezoid_weights(us)
        end_scale = market.volatility * np.sqrt(0.5 * (us[-1] - us[-2]))
        smooth = _backend.core.q_smooth_sum(
            s_eval, tau, us, ws, bs, *core_args, lam, end_scale
        )
        singular = k_integral(s_eval, tau, ctx, rule)
        return s - debt - m_reflected(s_eval, tau, a0, ctx) - smooth - singular

    problem = ResidualProblem(
        residual=residual,
        initial_value=terminal_exit_price(spec, market),
        maturity=spec.maturity,
        scale=spec.principal,
        lower_bound=spec.debt,
        label="margin-call boundary",
        params={
            "product": "margincall",
            "principal": spec.principal,
            "loan_rate": spec.loan_rate,
            "maturity": spec.maturity,
            "margin_fraction": spec.margin_fraction,
            "risk_free": market.risk_free,
            "dividend": market.dividend,
            "volatility": market.volatility,
            "time_steps": grid.time_steps,
        },
    )
    curve = solve_boundary(problem, grid)
    return MarginCallPricer(market, spec, grid, curve, reb, ctx, rule)


def mc_value(pricer: MarginCallPricer, spot: float, tau: float) -> PriceQuote:
    """Quote at one (spot, tau) point."""
    return pricer.quote(spot, tau)


def service_fee(
    market: MarketParams, spec: LoanSpec, grid: GridSpec, spot: float
) -> float:
    """Fair upfront fee at inception for a fresh contract."""
    return mc_solve(market, spec, grid).service_fee(spot)
