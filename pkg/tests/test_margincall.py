import numpy as np
import pytest

from stockloan.errors import MarginCalledError, ParameterError
from stockloan.margincall import ExerciseState, mc_solve, mc_value, service_fee
from stockloan.model import GridSpec, LoanSpec, MarketParams

REFERENCE_BOUNDARY = {1.0: 1.043, 5.0: 1.358, 10.0: 1.509}

REFERENCE_VALUES = {
    (95.0, 80.0): 15.291,
    (100.0, 80.0): 20.062,
    (105.0, 80.0): 25.000,
    (110.0, 80.0): 30.000,
    (100.0, 85.0): 15.373,
    (110.0, 90.0): 20.159,
}


class TestBoundary:
    @pytest.mark.parametrize("maturity", [1.0, 5.0, 10.0])
    def test_reference_inception_prices(self, market_low, grid50, maturity):
        spec = LoanSpec(
            principal=0.7, loan_rate=0.1, maturity=maturity, margin_fraction=0.1
        )
        pricer = mc_solve(market_low, spec, grid50)
        assert pricer.boundary.values[-1] == pytest.approx(
            REFERENCE_BOUNDARY[maturity], abs=0.015
        )

    def test_expiry_limit_is_debt(self, mc_t5):
        a0 = mc_t5.spec.debt(0.0)
        assert float(mc_t5.boundary.values[0]) == pytest.approx(a0, rel=1e-12)
        assert mc_t5.boundary.terminal_jump is None

    def test_node_residuals_below_tolerance(self, mc_t5, mc_e80):
        for pricer in (mc_t5, mc_e80):
            limit = 1e-8 * pricer.spec.principal
            assert np.max(np.abs(pricer.boundary.residuals)) <= limit

    def test_boundary_strictly_above_debt(self, mc_t5):
        curve = mc_t5.boundary
        for tau, value in zip(curve.taus[1:], curve.values[1:]):
            assert value > mc_t5.spec.debt(float(tau))


class TestQuote:
    def test_reference_value_grid(self, market_grid, grid50, mc_e80):
        pricers = {80.0: mc_e80}
        for (spot, principal), target in REFERENCE_VALUES.items():
            if principal not in pricers:
                spec = LoanSpec(
                    principal=principal, loan_rate=0.05, maturity=1.0, margin_fraction=0.1
                )
                pricers[principal] = mc_solve(market_grid, spec, grid50)
            value = pricers[principal].quote(spot, 1.0).value
            assert value == pytest.approx(target, abs=0.01)

    def test_exit_clamp_state(self, mc_e80):
        quote = mc_e80.quote(105.0, 1.0)
        assert quote.state is ExerciseState.EXIT_OPTIMAL
        assert quote.value == pytest.approx(25.0)

    def test_holding_state(self, mc_e80):
        assert mc_e80.quote(95.0, 1.0).state is ExerciseState.HOLDING

    def test_debt_curve_pays_rebate(self, mc_t5):
        tau = 2.0
        debt = mc_t5.spec.debt(tau)
        quote = mc_t5.quote(debt, tau)
        assert quote.state is ExerciseState.MARGIN_CALL_BOUNDARY
        assert quote.value == pytest.approx(float(mc_t5.rebate(tau)))

    def test_expiry_payoff(self, mc_t5):
        a0 = mc_t5.spec.debt(0.0)
        assert mc_t5.quote(a0, 0.0).value == 0.0
        assert mc_t5.quote(a0 + 0.3, 0.0).value == pytest.approx(0.3)

    def test_below_debt_rejected(self, mc_t5):
        with pytest.raises(MarginCalledError):
            mc_t5.quote(0.5 * mc_t5.spec.debt(3.0), 3.0)

    def test_tau_out_of_range(self, mc_t5):
        with pytest.raises(ParameterError):
            mc_t5.quote(1.3, 7.0)

    def test_mc_value_alias(self, mc_t5):
        assert mc_value(mc_t5, 1.3, 3.0) == mc_t5.quote(1.3, 3.0)


class TestInvariants:
    def test_value_matching_at_grid_nodes(self, mc_t5):
        spec = mc_t5.spec
        curve = mc_t5.boundary
        for j in range(1, curve.taus.size):
            tau = float(curve.taus[j])
            bf = float(curve.values[j])
            inside = mc_t5.quote(bf * (1 - 1e-8), tau).value
            payoff = bf - spec.debt(tau)
            assert abs(inside - payoff) <= 1e-4 * spec.principal

    def test_smooth_pasting_slope(self, mc_t5):
        for j in (10, 30, 50):
            tau = float(mc_t5.boundary.taus[j])
            bf = float(mc_t5.boundary.values[j])
            v_hi = bf - mc_t5.spec.debt(tau)
            v_lo = mc_t5.quote(bf * (1 - 1e-4), tau).value
            slope = (v_hi - v_lo) / (1e-4 * bf)
            assert 0.98 <= slope <= 1.02

    def test_continuity_to_the_margin_call_boundary(self, mc_t5):
        spec = mc_t5.spec
        curve = mc_t5.boundary
        for j in range(1, curve.taus.size - 1):
            tau = float(curve.taus[j])
            target = float(mc_t5.rebate(tau))
            near = mc_t5.quote(spec.debt(tau) * (1 + 1e-6), tau).value
            assert abs(near - target) <= 1e-3 * max(target, 1e-6 * spec.principal)

    def test_arbitrage_bounds(self, mc_t5):
        rng = np.random.default_rng(31)
        spec = mc_t5.spec
        for _ in range(200):
            tau = float(rng.uniform(1e-3, spec.maturity))
            debt = spec.debt(tau)
            spot = float(rng.uniform(debt, mc_t5.boundary.value_at(tau)))
            value = mc_t5.quote(spot, tau).value
            assert value <= spot + 1e-12
            assert value >= max(spot - debt, 0.0) - 1e-9


class TestServiceFee:
    def test_reference_fee(self, mc_e80):
        fee = mc_e80.service_fee(100.0)
        assert fee == pytest.approx(0.062, abs=0.01)

    def test_fee_vanishes_in_exit_region(self, mc_e80):
        # inception value clamps to spot - principal, cancelling the fee
        assert mc_e80.service_fee(140.0) == pytest.approx(0.0, abs=1e-12)

    def test_module_level_entry_point(self, market_grid, grid50, mc_e80):
        spec = LoanSpec(principal=80.0, loan_rate=0.05, maturity=1.0, margin_fraction=0.1)
        fee = service_fee(market_grid, spec, grid50, 100.0)
        assert fee == pytest.approx(mc_e80.service_fee(100.0), rel=1e-12)

    def test_fee_decreases_with_margin_fraction(self, market_grid, grid50):
        fees = []
        for frac in (0.05, 0.1, 0.3):
            spec = LoanSpec(
                principal=80.0, loan_rate=0.05, maturity=1.0, margin_fraction=frac
            )
            fees.append(mc_solve(market_grid, spec, grid50).service_fee(100.0))
        assert fees[0] >= fees[1] >= fees[2] - 1e-12
