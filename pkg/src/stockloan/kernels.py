"""Closed-form pricing kernels and quadrature machinery.

The holding-region value of a margin-call stock loan decomposes into a
European-style leg, a reflected (image) correction that enforces the debt
boundary, and a singular kernel that delivers the rebate paid there. The
singular part is integrated after the substitution
``v = K2 * (sqrt(y/(y - z)) - 1)``, ``K2 = ln(x/a(y)) / (sigma*sqrt(2y))``,
which maps it onto the Gauss-Laguerre weight ``exp(-v)`` on ``[0, inf)``.

Scalar kernels here define the semantics and serve as oracles for the
vectorized backend sums used on the hot paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import erfc, exp, log, pi, sqrt
from typing import Callable, Optional

import numpy as np

from . import _backend
from .errors import ParameterError
from .model import DimensionlessConstants, LoanSpec, MarketParams

_TWO_OVER_SQRT_PI = 2.0 / sqrt(pi)
_INV_SQRT2 = 1.0 / sqrt(2.0)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Laguerre nodes and weights for ``exp(-v)`` on ``[0, inf)``.

    Exact for polynomial integrands of degree <= 2*order - 1. Nodes and
    weights come from the Golub-Welsch eigen-solve of the three-term
    recurrence and are verified against the first two moments on
    construction.
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray


def gauss_laguerre(order: int) -> QuadratureRule:
    """Build the Gauss-Laguerre rule of the given order (4..128)."""
    if not 4 <= order <= 128:
        raise ParameterError(f"quadrature order must lie in [4, 128], got {order}")
    nodes, weights = np.polynomial.laguerre.laggauss(order)
    nodes = np.ascontiguousarray(nodes, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if abs(weights.sum() - 1.0) > 1e-12:
        raise ParameterError(f"Gauss-Laguerre weights of order {order} failed the zeroth-moment check")
    if abs(weights @ nodes - 1.0) > 1e-10:
        raise ParameterError(f"Gauss-Laguerre rule of order {order} failed the first-moment check")
    if not (np.all(nodes > 0.0) and np.all(np.diff(nodes) > 0.0)):
        raise ParameterError(f"Gauss-Laguerre nodes of order {order} are not increasing and positive")
    return QuadratureRule(order=order, nodes=nodes, weights=weights)


@dataclass(frozen=True)
class KernelContext:
    """Immutable bundle of everything the kernels need.

    ``rebate`` is the value delivered at the debt boundary as a function of
    tau; it is only required for the margin-call kernels and must satisfy
    rebate(0) = 0. It may expose a vectorized ``many(taus)`` method.
    """

    market: MarketParams
    spec: LoanSpec
    constants: DimensionlessConstants
    rebate: Optional[Callable[[float], float]] = None

    def __post_init__(self) -> None:
        if self.rebate is not None and abs(self.rebate(0.0)) > 1e-10:
            raise ParameterError("rebate(0) must vanish")

    def debt(self, y: float) -> float:
        return self.spec.debt(y)

    def rebate_many(self, taus: np.ndarray) -> np.ndarray:
        if self.rebate is None:
            raise ParameterError("this context has no rebate function")
        many = getattr(self.rebate, "many", None)
        if many is not None:
            return np.asarray(many(taus), dtype=np.float64)
        return np.array([self.rebate(float(t)) for t in taus], dtype=np.float64)


def norm_cdf(x: float) -> float:
    """Standard normal CDF, accurate in both tails."""
    return 0.5 * erfc(-x * _INV_SQRT2)


def _unit_step(t: float) -> float:
    """Unit step with the midpoint convention: 1/2 at the discontinuity."""
    if t > 0.0:
        return 1.0
    if t < 0.0:
        return 0.0
    return 0.5


def d12(x: float, y: float, z: float, market: MarketParams) -> tuple[float, float]:
    """The pair (d1, d2) for spot x, time gap y and strike z.

    Callers must handle the y -> 0 limit themselves.
    """
    if y <= 0.0:
        raise ParameterError(f"time gap must be positive, got {y}")
    if x <= 0.0 or z <= 0.0:
        raise ParameterError("spot and strike must be positive")
    sq = market.volatility * sqrt(y)
    d1 = (
        log(x / z)
        + (market.risk_free - market.dividend + 0.5 * market.volatility**2) * y
    ) / sq
    return d1, d1 - sq


def m1(x: float, y: float, z: float, ctx: KernelContext) -> float:
    """European-call-style leg: ``x e^{-qy} N(d1) - z e^{-ry} N(d2)``.

    At y = 0 this degenerates to the payoff ``(x - z) * H(ln(x/z))`` with
    the midpoint convention at x = z.
    """
    if y < 0.0:
        raise ParameterError(f"time gap must be nonnegative, got {y}")
    if y == 0.0:
        return (x - z) * _unit_step(log(x / z))
    d1, d2 = d12(x, y, z, ctx.market)
    return x * exp(-ctx.market.dividend * y) * norm_cdf(d1) - z * exp(
        -ctx.market.risk_free * y
    ) * norm_cdf(d2)


def m_reflected(x: float, y: float, z: float, ctx: KernelContext) -> float:
    """Image-corrected leg ``m1(x) - (x/a(y))^lam * m1(a(y)^2/x)``.

    Vanishes identically at the reflection point x = a(y).
    """
    ay = ctx.debt(y)
    if x < ay * (1.0 - 1e-12):
        raise ParameterError(f"spot {x} lies below the debt level {ay}")
    fac = (x / ay) ** ctx.constants.lam
    return m1(x, y, z, ctx) - fac * m1(ay * ay / x, y, z, ctx)


def q1(x: float, y: float, z: float, w: float, ctx: KernelContext) -> float:
    """Flow kernel at spot x, evaluation time y, source time z, strike w.

    At z = y both normal factors collapse to the unit step in ln(x/w),
    giving ``(q x - a(y)(r - eta)) * H(ln(x/w))``.
    """
    if x <= 0.0 or w <= 0.0:
        raise ParameterError("spot and strike must be positive")
    if not 0.0 <= z <= y:
        raise ParameterError(f"source time {z} must lie in [0, {y}]")
    mkt = ctx.market
    ay = ctx.debt(y)
    gap = y - z
    if gap == 0.0:
        return (x * mkt.dividend - ay * (mkt.risk_free - ctx.spec.loan_rate)) * _unit_step(
            log(x / w)
        )
    d1, d2 = d12(x, gap, w, mkt)
    re = mkt.risk_free - ctx.spec.loan_rate
    return x * mkt.dividend * exp(-mkt.dividend * gap) * norm_cdf(d1) - ay * re * exp(
        -re * gap
    ) * norm_cdf(d2)


def q_smooth(x: float, y: float, z: float, w: float, ctx: KernelContext) -> float:
    """Reflected flow kernel ``q1(x) - (x/a(y))^lam * q1(a(y)^2/x)``.

    This is the smooth part of the full kernel (everything except the
    singular rebate term); it cancels exactly at x = a(y).
    """
    ay = ctx.debt(y)
    if x < ay * (1.0 - 1e-12):
        raise ParameterError(f"spot {x} lies below the debt level {ay}")
    fac = (x / ay) ** ctx.constants.lam
    return q1(x, y, z, w, ctx) - fac * q1(ay * ay / x, y, z, w, ctx)


def k_integral(x: float, y: float, ctx: KernelContext, rule: QuadratureRule) -> float:
    """Singular rebate term of the kernel integral, fully transformed.

    Returns the complete contribution
    ``(x/a(y))^{lam/2} * integral_0^y K(x, y, z) dz`` evaluated as
    ``(2/sqrt(pi)) * sum_i w_i K3(x, y, v_i)`` on the Gauss-Laguerre rule;
    the prefactor is absorbed into K3 (lam/2 equals alpha). As
    x -> a(y)+ the value tends to rebate(y).
    """
    ay = ctx.debt(y)
    if x < ay * (1.0 - 1e-12):
        raise ParameterError(f"spot {x} lies below the debt level {ay}")
    if y <= 0.0:
        return 0.0
    b = max(log(x / ay), 0.0)
    k2 = b / (ctx.market.volatility * sqrt(2.0 * y))
    g = rule.nodes + k2
    z = np.maximum(y * (1.0 - (k2 * k2) / (g * g)), 0.0)
    rvals = ctx.rebate_many(z)
    beta = ctx.constants.beta
    expo = beta * b * b / (4.0 * g * g) - g * g + rule.nodes
    return _TWO_OVER_SQRT_PI * exp(ctx.constants.alpha * b) * float(
        rule.weights @ (rvals * np.exp(expo))
    )


def q_total_integral(x, y, boundary, ctx: KernelContext, rule: QuadratureRule) -> float:
    """Full kernel integral over [0, y]: trapezoid of the smooth part over
    the boundary grid plus the transformed singular rebate term."""
    if y <= 0.0:
        return 0.0
    us, ws, bs = boundary.integration_nodes(y)
    mkt = ctx.market
    end_scale = mkt.volatility * sqrt(0.5 * (us[-1] - us[-2]))
    smooth = _backend.core.q_smooth_sum(
        x,
        y,
        us,
        ws,
        bs,
        mkt.risk_free,
        mkt.dividend,
        mkt.volatility,
        ctx.spec.loan_rate,
        ctx.spec.principal,
        ctx.spec.maturity,
        ctx.constants.lam,
        end_scale,
    )
    return smooth + k_integral(x, y, ctx, rule)
