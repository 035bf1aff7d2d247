"""NumPy implementation of the numerical core.

This module and its compiled twin (``_core_cy.pyx``) expose the same
functions; ``stockloan._backend`` picks one at import time. Array arguments
must be contiguous float64.

Shared conventions:

* The flow kernel at a gap ``s = y - z > 0`` is
  ``x*q*exp(-q*s)*N(d1(x, s, w)) - a(y)*(r - eta)*exp(-(r - eta)*s)*N(d2)``
  with ``a(y) = E*exp(eta*(T - y))``. At ``s = 0`` both normal factors
  collapse to a step in ``ln(x/w)``: the quadrature endpoint smears it as
  ``N(ln(x/w)/end_scale)`` with ``end_scale = sigma*sqrt(panel/2)`` so the
  integral stays continuous through the boundary while keeping the exact
  midpoint value 1/2 on the diagonal; ``end_scale = 0`` selects the hard
  step.
* Boundary curves are interpolated log-linearly over their uniform tau grid.
* ``tree_*`` functions run Cox-Ross-Rubinstein backward induction on a
  recombining lattice; ``debt[i]`` is the accrued debt at level ``i``
  (level 0 = inception, level N = expiry).
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr


def _step(x, w, end_scale):
    """Endpoint step in ln(x/w), smeared over the final panel."""
    if end_scale > 0.0:
        return ndtr(np.log(x / w) / end_scale)
    return np.where(x > w, 1.0, np.where(x < w, 0.0, 0.5))


def _q1_vec(x, y, us, bs, ay, r, q, sigma, eta, end_scale):
    """Flow-kernel values at integration nodes ``us`` with strikes ``bs``."""
    gap = y - us
    out = np.empty_like(gap)
    pos = gap > 0.0
    if pos.any():
        g = gap[pos]
        w = bs[pos]
        sq = sigma * np.sqrt(g)
        d1 = (np.log(x / w) + (r - q + 0.5 * sigma * sigma) * g) / sq
        d2 = d1 - sq
        out[pos] = x * q * np.exp(-q * g) * ndtr(d1) - ay * (r - eta) * np.exp(
            -(r - eta) * g
        ) * ndtr(d2)
    if not pos.all():
        out[~pos] = (x * q - ay * (r - eta)) * _step(x, bs[~pos], end_scale)
    return out


def q1_sum(x, y, us, ws, bs, r, q, sigma, eta, principal, maturity, end_scale=0.0):
    """Weighted sum of the plain flow kernel over integration nodes."""
    ay = principal * np.exp(eta * (maturity - y))
    return float(ws @ _q1_vec(x, y, us, bs, ay, r, q, sigma, eta, end_scale))


def q_smooth_sum(
    x, y, us, ws, bs, r, q, sigma, eta, principal, maturity, lam, end_scale=0.0
):
    """Weighted sum of the reflected (image-corrected) flow kernel."""
    ay = principal * np.exp(eta * (maturity - y))
    base = _q1_vec(x, y, us, bs, ay, r, q, sigma, eta, end_scale)
    refl = _q1_vec(ay * ay / x, y, us, bs, ay, r, q, sigma, eta, end_scale)
    fac = (x / ay) ** lam
    return float(ws @ (base - fac * refl))


def nr_values(spots, taus, grid_taus, grid_vals, r, q, sigma, eta, principal, maturity):
    """Non-recourse loan values at many (spot, tau) points.

    Evaluates the integral representation over the solved exit boundary
    ``grid_vals`` (trapezoid plus a partial final panel) and floors it at
    the exit payoff: deep in the money the representation's normal factors
    saturate and it coincides with the payoff analytically, so the floor
    only smooths discretization error — values stay continuous through the
    boundary, which downstream root-finding relies on. tau = 0 earns the
    expiry payoff.
    """
    spots = np.asarray(spots, dtype=np.float64)
    taus = np.asarray(taus, dtype=np.float64)
    n = grid_taus.size - 1
    a0 = principal * np.exp(eta * maturity)
    out = np.where(taus <= 0.0, np.maximum(spots - a0, 0.0), 0.0)
    live = taus > 0.0
    if not live.any():
        return out

    s = spots[live]
    t = taus[live]
    k = np.searchsorted(grid_taus, t, side="right") - 1
    k = np.clip(k, 0, n)
    lnv = np.log(grid_vals)
    k_lo = np.minimum(k, n - 1)
    frac = (t - grid_taus[k_lo]) / (grid_taus[k_lo + 1] - grid_taus[k_lo])
    bf = np.exp((1.0 - frac) * lnv[k_lo] + frac * lnv[k_lo + 1])
    a_t = principal * np.exp(eta * (maturity - t))

    sq = sigma * np.sqrt(t)
    d1 = (np.log(s / a0) + (r - q + 0.5 * sigma * sigma) * t) / sq
    value = s * np.exp(-q * t) * ndtr(d1) - a0 * np.exp(-r * t) * ndtr(d1 - sq)

    # trapezoid weights over nodes 0..k of the (possibly non-uniform) grid,
    # plus a partial final panel of width d
    widths = np.diff(grid_taus)
    left_half = np.concatenate(([0.0], 0.5 * widths))
    right_half = np.concatenate((0.5 * widths, [0.0]))
    idx = np.arange(n + 1)[None, :]
    kcol = k[:, None]
    d = t - grid_taus[k]
    w = left_half[None, :] * ((idx >= 1) & (idx <= kcol))
    w = w + right_half[None, :] * (idx <= kcol - 1)
    w = w + 0.5 * d[:, None] * (idx == kcol)

    active = w > 0.0
    gap = t[:, None] - grid_taus[None, :]
    gap_safe = np.where(active & (gap > 0.0), gap, 1.0)
    sqg = sigma * np.sqrt(gap_safe)
    d1g = (np.log(s[:, None] / grid_vals[None, :]) + (r - q + 0.5 * sigma * sigma) * gap_safe) / sqg
    integ = s[:, None] * q * np.exp(-q * gap_safe) * ndtr(d1g) - a_t[:, None] * (
        r - eta
    ) * np.exp(-(r - eta) * gap_safe) * ndtr(d1g - sqg)
    zero_gap = active & (gap <= 0.0)
    if zero_gap.any():
        # on-grid endpoint: step smeared over the node's own panel
        panel = left_half[np.maximum(k, 1)]
        step = ndtr(
            np.log(s[:, None] / grid_vals[None, :]) / (sigma * np.sqrt(panel)[:, None])
        )
        limit = (s[:, None] * q - a_t[:, None] * (r - eta)) * step
        integ = np.where(zero_gap, limit, integ)
    value = value + np.sum(np.where(active, w * integ, 0.0), axis=1)

    # partial final panel endpoint at u = t, smeared over that panel
    d_safe = np.maximum(d, 1e-300)
    step_end = ndtr(np.log(s / bf) / (sigma * np.sqrt(0.5 * d_safe)))
    value = value + 0.5 * d * (s * q - a_t * (r - eta)) * step_end

    out[live] = np.maximum(np.maximum(value, s - a_t), 0.0)
    return out


def tree_value_nr(s0, debt, up, prob_up, discount):
    """Root value of the non-recourse loan on a CRR lattice."""
    n_steps = debt.size - 1
    j = np.arange(n_steps + 1, dtype=np.float64)
    prices = s0 * up ** (2.0 * j - n_steps)
    vals = np.maximum(prices - debt[n_steps], 0.0)
    q = 1.0 - prob_up
    for i in range(n_steps - 1, -1, -1):
        prices = prices[: i + 1] * up
        vals = discount * (prob_up * vals[1 : i + 2] + q * vals[: i + 1])
        np.maximum(vals, prices - debt[i], out=vals)
    return float(vals[0])


def tree_value_mc(s0, debt, trig_lo, trig_vals, up, prob_up, discount):
    """Root value of the margin-call loan on a CRR lattice.

    Nodes at or below the debt curve are absorbed at precomputed values:
    row j of level i reads ``trig_vals[i, j - trig_lo[i]]`` (zero outside
    the band — only rows adjacent to the curve are ever referenced by live
    nodes). Backward induction realizes the first touch from above
    automatically.
    """
    n_steps = debt.size - 1
    band = trig_vals.shape[1]
    j = np.arange(n_steps + 1, dtype=np.float64)
    prices = s0 * up ** (2.0 * j - n_steps)
    vals = np.maximum(prices - debt[n_steps], 0.0)
    q = 1.0 - prob_up
    for i in range(n_steps - 1, -1, -1):
        prices = prices[: i + 1] * up
        cont = discount * (prob_up * vals[1 : i + 2] + q * vals[: i + 1])
        vals = np.maximum(cont, prices - debt[i])
        trig = prices <= debt[i]
        if trig.any():
            jj = np.nonzero(trig)[0]
            m = jj - trig_lo[i]
            inside = (m >= 0) & (m < band)
            vals[jj] = np.where(inside, trig_vals[i, np.where(inside, m, 0)], 0.0)
    return float(vals[0])


def tree_exercise_scan(s0, debt, up, prob_up, discount, scan_levels):
    """Non-recourse lattice value plus exercise flags for early levels.

    Returns ``(root_value, flags)`` where ``flags[i, j]`` is 1 if exercise
    is optimal at node j of level i (i <= scan_levels), 0 if not, and -1
    for unused slots.
    """
    n_steps = debt.size - 1
    scan = int(min(scan_levels, n_steps))
    flags = np.full((scan + 1, scan + 1), -1, dtype=np.int8)
    scale = max(float(debt[0]), float(s0))

    j = np.arange(n_steps + 1, dtype=np.float64)
    prices = s0 * up ** (2.0 * j - n_steps)
    vals = np.maximum(prices - debt[n_steps], 0.0)
    if n_steps <= scan:
        flags[n_steps, : n_steps + 1] = (prices - debt[n_steps] > 0.0).astype(np.int8)
    q = 1.0 - prob_up
    for i in range(n_steps - 1, -1, -1):
        prices = prices[: i + 1] * up
        cont = discount * (prob_up * vals[1 : i + 2] + q * vals[: i + 1])
        ex = prices - debt[i]
        if i <= scan:
            flags[i, : i + 1] = ((ex > 0.0) & (ex + 1e-12 * scale >= cont)).astype(
                np.int8
            )
        vals = np.maximum(cont, ex)
    return float(vals[0]), flags
