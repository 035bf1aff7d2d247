"""Recursive solver for the exit-boundary integral equation.

The boundary is marched forward in tau: the node at tau = 0 is set
analytically from the terminal exit-price limit, and each later node is
the root of a residual supplied by the product module, found by
Newton-Raphson warm-started from the previous node. The trapezoid inside
each residual uses all previously solved nodes plus the current unknown at
the upper endpoint.

The grid is uniform except for a refined startup prefix: the boundary
leaves expiry with a square-root-type profile that a single coarse panel
cannot resolve, so the first panel is marched in ``startup_split`` fine
sub-steps and the curve keeps those sub-nodes. All downstream integration
stencils share the same partition, which keeps value matching exact at
every node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import (
    BoundarySolveError,
    NewtonConvergenceError,
    ParameterError,
    SingularDerivativeError,
    SolverError,
)
from .model import GridSpec


class NewtonResult(NamedTuple):
    root: float
    residual: float
    iterations: int


def newton_solve(
    f: Callable[[float], float],
    x0: float,
    tol: float,
    max_iter: int,
    f_scale: float = 1.0,
) -> NewtonResult:
    """Newton-Raphson with a central finite-difference derivative.

    Converges when both the residual (relative to ``f_scale``) and the last
    step (relative to the iterate) fall below ``tol``; a residual three
    orders below tolerance is accepted on its own. The derivative step is
    ``max(1e-6*|x|, 1e-9)``.
    """
    x = float(x0)
    fx = f(x)
    steps = 0
    while True:
        if abs(fx) <= 1e-3 * tol * f_scale:
            return NewtonResult(x, fx, steps)
        if steps >= max_iter:
            raise NewtonConvergenceError(
                f"no convergence after {max_iter} iterations "
                f"(x={x!r}, residual={fx!r})",
                last_iterate=x,
                last_residual=fx,
            )
        h = max(1e-6 * abs(x), 1e-9)
        fp = (f(x + h) - f(x - h)) / (2.0 * h)
        if abs(fp) < 1e-14:
            raise SingularDerivativeError(
                f"derivative magnitude {abs(fp):.3e} below 1e-14 at x={x!r}"
            )
        dx = fx / fp
        x -= dx
        fx = f(x)
        steps += 1
        if abs(fx) <= tol * f_scale and abs(dx) <= tol * max(abs(x), 1e-12):
            return NewtonResult(x, fx, steps)


def _bisect(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float,
    max_iter: int = 200,
) -> Optional[NewtonResult]:
    """Bisection fallback; returns None without a sign change.

    Once a sign change is bracketed the collapsed interval is accepted as
    the root regardless of the residual magnitude there: near-degenerate
    steps can leave the residual floor above the Newton tolerance, and the
    per-node diagnostics record it honestly.
    """
    f_lo = f(lo)
    f_hi = f(hi)
    if f_lo == 0.0:
        return NewtonResult(lo, f_lo, 0)
    if f_hi == 0.0:
        return NewtonResult(hi, f_hi, 0)
    if f_lo * f_hi > 0.0:
        return None
    mid = 0.5 * (lo + hi)
    f_mid = f(mid)
    for it in range(1, max_iter + 1):
        if f_mid == 0.0 or hi - lo <= tol * max(abs(mid), 1e-12):
            return NewtonResult(mid, f_mid, it)
        if f_lo * f_mid <= 0.0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
    return NewtonResult(mid, f_mid, max_iter)


@dataclass(frozen=True)
class ResidualProblem:
    """Residual whose root in s at each grid time is the boundary value.

    residual: callable ``(s, j, taus, values) -> float`` where
        ``values[:j]`` holds the already-solved nodes and s is the
        candidate for node j.
    initial_value: boundary value for tau -> 0+ (the march start).
    maturity: grid endpoint T.
    scale: money scale for residual tolerances (typically the principal).
    lower_bound: optional tau -> lowest admissible boundary value (the
        debt curve); used by the bisection fallback and jump detection.
    """

    residual: Callable[[float, int, np.ndarray, np.ndarray], float]
    initial_value: float
    maturity: float
    scale: float = 1.0
    lower_bound: Optional[Callable[[float], float]] = None
    label: str = "boundary"
    params: dict = field(default_factory=dict)


def trapezoid_weights(us: np.ndarray) -> np.ndarray:
    """Composite trapezoid weights for an increasing (possibly non-uniform)
    partition."""
    ws = np.zeros(us.size)
    widths = np.diff(us)
    ws[:-1] += 0.5 * widths
    ws[1:] += 0.5 * widths
    return ws


@dataclass(frozen=True)
class BoundaryCurve:
    """Discretized optimal exit boundary.

    The grid is uniform with step ``T / time_steps`` apart from a refined
    startup prefix inside the first panel (``prefix_size`` extra sub-nodes
    after tau = 0). ``values[0]`` holds the tau -> 0+ limit used by the
    march; when that limit exceeds the expiry debt the jump is recorded in
    ``terminal_jump``. ``residuals`` and ``newton_iterations`` are
    per-node solve diagnostics (zero at the analytic first node).
    """

    taus: np.ndarray
    values: np.ndarray
    terminal_jump: Optional[float]
    residuals: np.ndarray
    newton_iterations: np.ndarray
    prefix_size: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.taus.shape != self.values.shape or self.taus.ndim != 1:
            raise ParameterError("taus and values must be 1-d arrays of equal length")
        if self.taus.size < 2 or self.taus[0] != 0.0:
            raise ParameterError("grid must start at tau = 0 with at least two nodes")
        if not np.all(np.diff(self.taus) > 0.0):
            raise ParameterError("grid must be strictly increasing")
        if not np.all(self.values > 0.0):
            raise ParameterError("boundary values must be positive")

    @property
    def maturity(self) -> float:
        return float(self.taus[-1])

    @property
    def step(self) -> float:
        """Step of the uniform part of the grid."""
        return float(self.taus[-1] - self.taus[-2])

    @property
    def average_newton_iterations(self) -> float:
        return float(self.newton_iterations[1:].mean())

    @property
    def uniform_taus(self) -> np.ndarray:
        """The requested uniform grid nodes (startup sub-nodes dropped)."""
        return np.concatenate((self.taus[:1], self.taus[self.prefix_size + 1 :]))

    @property
    def uniform_values(self) -> np.ndarray:
        return np.concatenate((self.values[:1], self.values[self.prefix_size + 1 :]))

    @property
    def uniform_residuals(self) -> np.ndarray:
        return np.concatenate(
            (self.residuals[:1], self.residuals[self.prefix_size + 1 :])
        )

    def _locate(self, tau: float) -> int:
        k = int(np.searchsorted(self.taus, tau, side="right")) - 1
        return min(max(k, 0), self.taus.size - 2)

    def value_at(self, tau: float) -> float:
        """Boundary value at tau, log-linearly interpolated between nodes."""
        if not -1e-12 <= tau <= self.maturity * (1.0 + 1e-12):
            raise ParameterError(f"tau={tau} outside [0, {self.maturity}]")
        tau = min(max(tau, 0.0), self.maturity)
        k = self._locate(tau)
        frac = (tau - self.taus[k]) / (self.taus[k + 1] - self.taus[k])
        return float(
            np.exp(
                (1.0 - frac) * np.log(self.values[k])
                + frac * np.log(self.values[k + 1])
            )
        )

    def integration_nodes(self, tau: float):
        """Trapezoid nodes, weights and boundary values covering [0, tau].

        On-grid taus reuse the grid nodes; off-grid taus append a partial
        final panel ending exactly at tau with the interpolated boundary
        value (kernels treat a node at the upper endpoint via the step
        limit).
        """
        if not 0.0 < tau <= self.maturity * (1.0 + 1e-12):
            raise ParameterError(f"tau={tau} outside the boundary domain (0, {self.maturity}]")
        tau = min(tau, self.maturity)
        k = self._locate(tau)
        if tau - self.taus[k] <= 0.0:
            us = self.taus[: k + 1]
            bs = self.values[: k + 1]
        else:
            k += 1
            us = np.append(self.taus[:k], tau)
            bs = np.append(self.values[:k], self.value_at(tau))
        return us, trapezoid_weights(us), bs


def solve_boundary(problem: ResidualProblem, grid: GridSpec) -> BoundaryCurve:
    """March the boundary over the grid, solving one node per step.

    The first uniform panel is marched in ``grid.startup_split`` fine
    sub-steps (the boundary's steep start near expiry dominates the grid
    error otherwise); the sub-nodes stay part of the curve. Each step
    warm-starts Newton from the previous node; on Newton failure one
    bisection pass over ``[lower_bound*(1+1e-8), 5*previous]`` is attempted
    before the failure is re-raised annotated with the step.
    """
    n = grid.time_steps
    split = grid.startup_split
    h = problem.maturity / n
    uniform = np.linspace(0.0, problem.maturity, n + 1)
    prefix = h * np.arange(1, split) / split
    taus = np.concatenate((uniform[:1], prefix, uniform[1:]))
    total = taus.size
    values = np.empty(total)
    residuals = np.zeros(total)
    iterations = np.zeros(total, dtype=np.int64)
    values[0] = problem.initial_value

    for j in range(1, total):
        guess = values[j - 1]

        def f(s: float, _j: int = j) -> float:
            return problem.residual(s, _j, taus, values)

        try:
            result = newton_solve(
                f, guess, grid.newton_tol, grid.newton_max_iter, f_scale=problem.scale
            )
        except SolverError as exc:
            result = None
            if problem.lower_bound is not None:
                lo = problem.lower_bound(float(taus[j])) * (1.0 + 1e-8)
                result = _bisect(f, lo, 5.0 * guess, grid.newton_tol)
                if result is None:
                    # no sign change above the debt curve: when the residual
                    # there is only discretization noise the boundary has
                    # collapsed onto the curve (exit at first touch)
                    f_lo = f(lo)
                    if abs(f_lo) <= 1e-4 * problem.scale:
                        result = NewtonResult(lo, f_lo, 0)
            if result is None:
                raise BoundarySolveError(
                    f"{problem.label} solve failed at step {j} (tau={taus[j]:.6g}): {exc}",
                    step=j,
                    tau=float(taus[j]),
                ) from exc
        values[j] = result.root
        residuals[j] = result.residual
        iterations[j] = result.iterations

    terminal_jump = None
    if problem.lower_bound is not None:
        debt0 = problem.lower_bound(0.0)
        if problem.initial_value > debt0 * (1.0 + 1e-12):
            terminal_jump = problem.initial_value

    return BoundaryCurve(
        taus=taus,
        values=values,
        terminal_jump=terminal_jump,
        residuals=residuals,
        newton_iterations=iterations,
        prefix_size=split - 1,
        params=dict(problem.params),
    )
