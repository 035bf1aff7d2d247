"""Non-recourse stock loan pricer.

Economically an American call with an accruing strike: the exit boundary
solves the value-matching residual built from the plain (unreflected)
kernels, and values follow from the integral representation over the solved
boundary. The margin-call rebate is built on top: a margin call converts
the contract into a non-recourse loan on ``(1 - margin_fraction)`` of the
debt, and because that embedded loan's own debt curve is proportional to
the original one, a single embedded boundary solve serves every possible
margin-call time.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _backend
from .errors import ParameterError
from .ie_solver import BoundaryCurve, ResidualProblem, solve_boundary, trapezoid_weights
from .kernels import KernelContext, m1
from .model import (
    GridSpec,
    LoanSpec,
    MarketParams,
    dimensionless_constants,
    terminal_exit_price,
    validate_contract,
)


@dataclass(frozen=True)
class NonRecoursePricer:
    """Solved non-recourse contract; immutable and safe to share."""

    market: MarketParams
    spec: LoanSpec
    grid: GridSpec
    boundary: BoundaryCurve

    def value(self, spot: float, tau: float) -> float:
        return float(self.value_many([spot], [tau])[0])

    def value_many(self, spots, taus) -> np.ndarray:
        """Values at many (spot, tau) points; spots at or above the
        boundary earn the exit payoff, tau = 0 the expiry payoff."""
        spots = np.ascontiguousarray(spots, dtype=np.float64)
        taus = np.ascontiguousarray(taus, dtype=np.float64)
        if np.any(spots <= 0.0):
            raise ParameterError("spots must be positive")
        if np.any(taus < 0.0) or np.any(taus > self.spec.maturity * (1 + 1e-12)):
            raise ParameterError(f"taus must lie in [0, {self.spec.maturity}]")
        return _backend.core.nr_values(
            spots,
            taus,
            self.boundary.taus,
            self.boundary.values,
            self.market.risk_free,
            self.market.dividend,
            self.market.volatility,
            self.spec.loan_rate,
            self.spec.principal,
            self.spec.maturity,
        )


def nr_solve(market: MarketParams, spec: LoanSpec, grid: GridSpec) -> NonRecoursePricer:
    """Solve the non-recourse exit boundary on the grid."""
    validate_contract(market, spec)
    constants = dimensionless_constants(market, spec)
    ctx = KernelContext(market=market, spec=spec, constants=constants)
    a0 = spec.debt(0.0)
    core_args = (
        market.risk_free,
        market.dividend,
        market.volatility,
        spec.loan_rate,
        spec.principal,
        spec.maturity,
    )

    def residual(s: float, j: int, taus: np.ndarray, values: np.ndarray) -> float:
        tau = taus[j]
        us = taus[: j + 1]
        bs = np.empty(j + 1)
        bs[:j] = values[:j]
        bs[j] = s
        ws = trapezoid_weights(us)
        end_scale = market.volatility * np.sqrt(0.5 * (us[-1] - us[-2]))
        premium = _backend.core.q1_sum(s, tau, us, ws, bs, *core_args, end_scale)
        return s - spec.debt(tau) - m1(s, tau, a0, ctx) - premium

    problem = ResidualProblem(
        residual=residual,
        initial_value=terminal_exit_price(spec, market),
        maturity=spec.maturity,
        scale=spec.principal,
        lower_bound=spec.debt,
        label="non-recourse boundary",
        params={
            "product": "nonrecourse",
            "principal": spec.principal,
            "loan_rate": spec.loan_rate,
            "maturity": spec.maturity,
            "risk_free": market.risk_free,
            "dividend": market.dividend,
            "volatility": market.volatility,
            "time_steps": grid.time_steps,
        },
    )
    return NonRecoursePricer(market, spec, grid, solve_boundary(problem, grid))


def nr_value(pricer: NonRecoursePricer, spot: float, tau: float) -> float:
    """Contract value at one (spot, tau) point."""
    return pricer.value(spot, tau)


class RebateFunction:
    """Value delivered at the margin-call boundary as a function of tau.

    Built from one embedded non-recourse pricer with principal
    ``(1 - margin_fraction) * E``: its accrued debt is then exactly
    ``(1 - margin_fraction)`` times the original debt at every tau, so the
    post-call contract evaluated along the debt curve is a single fixed
    contract. Vanishes at tau = 0 and is nonnegative everywhere (the
    embedded value dominates its intrinsic margin). Safe to call
    concurrently.
    """

    def __init__(self, market: MarketParams, spec: LoanSpec, grid: GridSpec):
        embedded_spec = replace(
            spec,
            principal=(1.0 - spec.margin_fraction) * spec.principal,
            margin_fraction=0.0,
        )
        self.spec = spec
        self.embedded = nr_solve(market, embedded_spec, grid)

    def __call__(self, tau: float) -> float:
        return float(self.many(np.array([tau]))[0])

    def many(self, taus) -> np.ndarray:
        taus = np.ascontiguousarray(taus, dtype=np.float64)
        debt = self.spec.principal * np.exp(
            self.spec.loan_rate * (self.spec.maturity - taus)
        )
        values = self.embedded.value_many(debt, taus)
        # the embedded value can undershoot its intrinsic floor by rounding;
        # the rebate is nonnegative analytically
        return np.maximum(values - self.spec.margin_fraction * debt, 0.0)


def rebate(market: MarketParams, spec: LoanSpec, grid: GridSpec) -> RebateFunction:
    """Build the margin-call rebate function for this contract."""
    return RebateFunction(market, spec, grid)
