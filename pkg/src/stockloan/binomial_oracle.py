"""Cox-Ross-Rubinstein lattice valuation, used as an independent oracle.

The non-recourse loan prices as an American call with a time-dependent
strike (the accrued debt); the margin-call loan adds a trigger: any node at
or below the debt curve collects the rebate for that time, and backward
induction realizes the first touch from above automatically. The rebate fed
to the margin-call tree comes from the integral-equation non-recourse
pricer, which is itself validated against its own tree, keeping the oracle
chain sound.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, sqrt
from typing import Callable

import numpy as np

from . import _backend
from .errors import BracketNotFoundError, ParameterError
from .model import LoanSpec, MarketParams


@dataclass(frozen=True)
class TreeSpec:
    """Lattice geometry: step count plus the derived CRR quantities."""

    steps: int
    dt: float
    up: float
    down: float
    prob_up: float
    discount: float

    @classmethod
    def build(cls, steps: int, market: MarketParams, spec: LoanSpec) -> "TreeSpec":
        if steps < 1:
            raise ParameterError(f"steps must be >= 1, got {steps}")
        dt = spec.maturity / steps
        up = exp(market.volatility * sqrt(dt))
        down = 1.0 / up
        prob_up = (exp((market.risk_free - market.dividend) * dt) - down) / (up - down)
        if not 0.0 < prob_up < 1.0:
            raise ParameterError(
                f"risk-neutral probability {prob_up:.6g} outside (0, 1); "
                "increase the step count or adjust parameters"
            )
        return cls(
            steps=steps,
            dt=dt,
            up=up,
            down=down,
            prob_up=prob_up,
            discount=exp(-market.risk_free * dt),
        )


def _debt_levels(spec: LoanSpec, tree: TreeSpec) -> np.ndarray:
    """Accrued debt at each lattice level (level 0 = inception)."""
    i = np.arange(tree.steps + 1, dtype=np.float64)
    return np.ascontiguousarray(spec.principal * np.exp(spec.loan_rate * i * tree.dt))


def _tau_levels(spec: LoanSpec, tree: TreeSpec) -> np.ndarray:
    i = np.arange(tree.steps + 1, dtype=np.float64)
    return np.ascontiguousarray(spec.maturity - i * tree.dt)


def nr_tree_value(
    spot: float, market: MarketParams, spec: LoanSpec, tree: TreeSpec
) -> float:
    """Non-recourse loan value at inception by backward induction."""
    if spot <= 0.0:
        raise ParameterError("spot must be positive")
    return _backend.core.tree_value_nr(
        spot, _debt_levels(spec, tree), tree.up, tree.prob_up, tree.discount
    )


_TRIGGER_BAND = 6  # rows kept around the debt curve: 4 below the cut, 2 above


def _trigger_band(
    spot: float,
    spec: LoanSpec,
    tree: TreeSpec,
    debt: np.ndarray,
    taus: np.ndarray,
    rebate: Callable[[float], float],
) -> tuple[np.ndarray, np.ndarray]:
    """Absorbed-node values for lattice rows adjacent to the debt curve.

    Live nodes only ever reference triggered rows within a couple of steps
    of the curve, so a narrow band suffices. When the rebate carries its
    embedded non-recourse pricer the assigned value is the post-call
    contract at the node's actual spot (the discrete first touch overshoots
    the curve by up to one row; valuing the overshoot removes the lattice
    displacement bias). A plain callable falls back to the curve rebate at
    the node's time.
    """
    n_steps = tree.steps
    lnu = np.log(tree.up)
    i_arr = np.arange(n_steps + 1)
    # count of rows with price <= debt at each level
    cut = np.floor((i_arr + np.log(debt / spot) / lnu) / 2.0).astype(np.int64) + 1
    cut = np.clip(cut, 0, i_arr + 1)
    trig_lo = np.maximum(cut - (_TRIGGER_BAND - 2), 0)
    trig_hi = np.minimum(cut + 2, i_arr + 1)  # exclusive, cushion above the cut
    trig_vals = np.zeros((n_steps + 1, _TRIGGER_BAND))

    embedded = getattr(rebate, "embedded", None)
    rows_i = []
    rows_j = []
    for i in range(1, n_steps):  # terminal level keeps the expiry payoff
        if trig_hi[i] > trig_lo[i]:
            js = np.arange(trig_lo[i], trig_hi[i])
            rows_i.append(np.full(js.size, i))
            rows_j.append(js)
    if not rows_i:
        return trig_lo, trig_vals
    rows_i = np.concatenate(rows_i)
    rows_j = np.concatenate(rows_j)
    if embedded is not None:
        prices = spot * tree.up ** (2.0 * rows_j - rows_i)
        values = embedded.value_many(prices, taus[rows_i])
        values = values - spec.margin_fraction * debt[rows_i]
    else:
        many = getattr(rebate, "many", None)
        if many is not None:
            values = np.asarray(many(taus[rows_i]), dtype=np.float64)
        else:
            values = np.array([rebate(float(t)) for t in taus[rows_i]])
    trig_vals[rows_i, rows_j - trig_lo[rows_i]] = values
    return trig_lo, trig_vals


def mc_tree_value(
    spot: float,
    market: MarketParams,
    spec: LoanSpec,
    tree: TreeSpec,
    rebate: Callable[[float], float],
) -> float:
    """Margin-call loan value at inception by backward induction.

    Any node at or below the debt curve is absorbed at the post-call value
    (see :func:`_trigger_band`); all other nodes take
    ``max(exit payoff, continuation)``. ``rebate`` is either the engine's
    rebate object (preferred: its embedded pricer values the discrete
    overshoot) or a plain tau -> rebate callable.
    """
    if spot <= spec.debt(spec.maturity):
        raise ParameterError(
            "spot must start above the debt at inception for a live contract"
        )
    debt = _debt_levels(spec, tree)
    taus = _tau_levels(spec, tree)
    trig_lo, trig_vals = _trigger_band(spot, spec, tree, debt, taus, rebate)
    return _backend.core.tree_value_mc(
        spot,
        debt,
        np.ascontiguousarray(trig_lo, dtype=np.int64),
        np.ascontiguousarray(trig_vals),
        tree.up,
        tree.prob_up,
        tree.discount,
    )


def nr_tree_boundary_bracket(
    market: MarketParams,
    spec: LoanSpec,
    tree: TreeSpec,
    spot_hint: float | None = None,
    scan_levels: int = 512,
) -> tuple[float, float]:
    """Adjacent lattice prices bracketing the inception exit boundary.

    Scans the earliest lattice levels (times within ``scan_levels * dt`` of
    inception, a negligible tau offset for large trees) and merges their
    node grids — the union lattice has one-up-step spacing. Returns the
    highest non-exercised price and the lowest exercised price directly
    above it. The lattice is anchored at ``spot_hint`` (default twice the
    principal), which only shifts node placement, not the decision rule.
    """
    anchor = 2.0 * spec.principal if spot_hint is None else float(spot_hint)
    if anchor <= 0.0:
        raise ParameterError("spot_hint must be positive")
    scan = min(scan_levels, tree.steps)
    _, flags = _backend.core.tree_exercise_scan(
        anchor, _debt_levels(spec, tree), tree.up, tree.prob_up, tree.discount, scan
    )
    # node j of level i sits at anchor * up**(2j - i); integer exponents make
    # cross-level merging exact, keeping the shallowest level's flag
    merged: dict[int, int] = {}
    for i in range(1, scan + 1):
        for j in range(i + 1):
            flag = int(flags[i, j])
            if flag < 0:
                continue
            merged.setdefault(2 * j - i, flag)
        exps = sorted(merged)
        for lo_e, hi_e in zip(exps, exps[1:]):
            if hi_e == lo_e + 1 and merged[lo_e] == 0 and merged[hi_e] == 1:
                return anchor * tree.up**lo_e, anchor * tree.up**hi_e
    raise BracketNotFoundError(
        f"no exercise switch within {scan} lattice levels of inception; "
        "try a different spot_hint or a deeper scan"
    )
