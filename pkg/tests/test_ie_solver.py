import numpy as np
import pytest

from stockloan.errors import (
    BoundarySolveError,
    NewtonConvergenceError,
    SingularDerivativeError,
)
from stockloan.ie_solver import ResidualProblem, newton_solve, solve_boundary
from stockloan.model import GridSpec, LoanSpec, MarketParams, terminal_exit_price
from stockloan.nonrecourse import nr_solve


class TestNewton:
    def test_quadratic_root(self):
        result = newton_solve(lambda x: x * x - 4.0, 3.0, 1e-10, 50)
        assert result.root == pytest.approx(2.0, rel=1e-10)
        assert abs(result.residual) <= 1e-10

    def test_affine_converges_in_one_step(self):
        result = newton_solve(lambda x: x - 1.7, 40.0, 1e-10, 50)
        assert result.root == pytest.approx(1.7, rel=1e-14)
        assert result.iterations <= 2

    def test_warm_start_costs_nothing(self):
        result = newton_solve(lambda x: x * x - 4.0, 2.0, 1e-10, 50)
        assert result.iterations == 0

    def test_singular_derivative(self):
        with pytest.raises(SingularDerivativeError):
            newton_solve(lambda x: 1.0, 1.0, 1e-10, 50)

    def test_non_convergence_carries_state(self):
        # Newton on the cube root diverges geometrically
        with pytest.raises(NewtonConvergenceError) as info:
            newton_solve(lambda x: np.cbrt(x), 1.0, 1e-12, 8)
        assert abs(info.value.last_residual) >= 1.0
        assert abs(info.value.last_iterate) > 1.0

    def test_limit_consistency_with_terminal_price(self, market_low, grid50):
        # the product residual at a vanishing tau roots at the analytic
        # tau -> 0+ exit price
        spec = LoanSpec(principal=0.7, loan_rate=0.1, maturity=5.0)
        pricer = nr_solve(market_low, spec, grid50)
        s0plus = terminal_exit_price(spec, market_low)

        from math import exp

        from stockloan import _backend
        from stockloan.kernels import KernelContext, m1
        from stockloan.model import dimensionless_constants

        ctx = KernelContext(
            market=market_low, spec=spec, constants=dimensionless_constants(market_low, spec)
        )
        tiny = 1e-4

        def residual(s):
            us = np.array([0.0, tiny])
            ws = np.array([tiny / 2, tiny / 2])
            bs = np.array([s0plus, s])
            prem = _backend.core.q1_sum(
                s, tiny, us, ws, bs,
                market_low.risk_free, market_low.dividend, market_low.volatility,
                spec.loan_rate, spec.principal, spec.maturity,
                market_low.volatility * np.sqrt(0.5 * tiny),
            )
            return s - spec.debt(tiny) - m1(s, tiny, spec.debt(0.0), ctx) - prem

        result = newton_solve(residual, s0plus * 1.001, 1e-10, 50, f_scale=spec.principal)
        assert result.root == pytest.approx(s0plus, rel=5e-3)


class TestSolveBoundary:
    def test_degenerate_residual_tracks_debt(self):
        spec = LoanSpec(principal=0.7, loan_rate=0.1, maturity=2.0)
        problem = ResidualProblem(
            residual=lambda s, j, taus, values: s - spec.debt(float(taus[j])),
            initial_value=spec.debt(0.0),
            maturity=2.0,
            scale=spec.principal,
            lower_bound=None,
        )
        curve = solve_boundary(problem, GridSpec(time_steps=10))
        for tau, value in zip(curve.taus, curve.values):
            assert value == pytest.approx(spec.debt(float(tau)), rel=1e-10)

    def test_failure_annotated_with_step(self):
        problem = ResidualProblem(
            residual=lambda s, j, taus, values: 1.0,
            initial_value=1.0,
            maturity=1.0,
            lower_bound=lambda tau: 0.5,
        )
        with pytest.raises(BoundarySolveError) as info:
            solve_boundary(problem, GridSpec(time_steps=4))
        assert info.value.step == 1
        assert info.value.tau == pytest.approx(0.25)

    def test_reference_boundary_at_inception(self, market_low, grid50):
        spec = LoanSpec(principal=0.7, loan_rate=0.1, maturity=1.0)
        pricer = nr_solve(market_low, spec, grid50)
        assert pricer.boundary.values[-1] == pytest.approx(1.168, abs=0.005)

    def test_node_residuals_below_tolerance(self, nr_t5):
        limit = 1e-8 * nr_t5.spec.principal
        assert np.max(np.abs(nr_t5.boundary.residuals)) <= limit

    def test_boundary_strictly_above_debt(self, nr_t5):
        curve = nr_t5.boundary
        for tau, value in zip(curve.taus[1:], curve.values[1:]):
            assert value > nr_t5.spec.debt(float(tau))

    def test_grid_refinement_self_convergence(self, market_low):
        spec = LoanSpec(principal=0.7, loan_rate=0.1, maturity=5.0)
        coarse = nr_solve(market_low, spec, GridSpec(time_steps=50)).boundary
        fine = nr_solve(market_low, spec, GridSpec(time_steps=100)).boundary
        rel = np.abs(fine.uniform_values[::2] - coarse.uniform_values) / coarse.uniform_values
        assert np.max(rel) < 0.005

    def test_warm_started_newton_is_cheap(self, nr_t5, mc_t5):
        assert nr_t5.boundary.average_newton_iterations <= 10
        assert mc_t5.boundary.average_newton_iterations <= 10


class TestBoundaryCurve:
    def test_interpolation_hits_nodes(self, nr_t5):
        curve = nr_t5.boundary
        for j in (0, 7, 25, 50):
            assert curve.value_at(float(curve.taus[j])) == pytest.approx(
                float(curve.values[j]), rel=1e-12
            )

    def test_interpolation_between_nodes_is_bounded(self, nr_t5):
        curve = nr_t5.boundary
        tau = 0.5 * (curve.taus[10] + curve.taus[11])
        value = curve.value_at(float(tau))
        low, high = sorted((curve.values[10], curve.values[11]))
        assert low <= value <= high

    def test_integration_nodes_measure_the_interval(self, nr_t5):
        curve = nr_t5.boundary
        for tau in (curve.step, 1.0, 2.37, 4.999, 5.0):
            us, ws, bs = curve.integration_nodes(float(tau))
            assert ws.sum() == pytest.approx(tau, rel=1e-12)
            assert us[0] == 0.0
            assert us[-1] == pytest.approx(tau)
            assert bs.shape == us.shape

    def test_terminal_jump_recorded_when_limit_exceeds_debt(self):
        market = MarketParams(risk_free=0.20, dividend=0.05, volatility=0.4)
        spec = LoanSpec(principal=1.0, loan_rate=0.05, maturity=1.0)
        pricer = nr_solve(market, spec, GridSpec(time_steps=20))
        assert pricer.boundary.terminal_jump == pytest.approx(
            terminal_exit_price(spec, market)
        )
        assert pricer.boundary.terminal_jump > spec.debt(0.0)

    def test_no_jump_for_usual_rates(self, nr_t5):
        assert nr_t5.boundary.terminal_jump is None
