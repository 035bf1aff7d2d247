from math import exp

import numpy as np
import pytest

from stockloan.errors import ParameterError, UnboundedBoundaryError
from stockloan.model import (
    GridSpec,
    LoanSpec,
    MarketParams,
    accrued_debt,
    dimensionless_constants,
    terminal_exit_price,
    validate_contract,
)


class TestValidation:
    def test_principal_must_be_positive(self):
        with pytest.raises(ParameterError):
            LoanSpec(principal=0.0, loan_rate=0.1, maturity=1.0)

    def test_maturity_must_be_positive(self):
        with pytest.raises(ParameterError):
            LoanSpec(principal=1.0, loan_rate=0.1, maturity=0.0)

    @pytest.mark.parametrize("frac", [-0.1, 1.0, 1.5])
    def test_margin_fraction_range(self, frac):
        with pytest.raises(ParameterError):
            LoanSpec(principal=1.0, loan_rate=0.1, maturity=1.0, margin_fraction=frac)

    def test_margin_fraction_zero_is_fine(self):
        LoanSpec(principal=1.0, loan_rate=0.1, maturity=1.0, margin_fraction=0.0)

    def test_volatility_must_be_positive(self):
        with pytest.raises(ParameterError):
            MarketParams(risk_free=0.05, dividend=0.0, volatility=0.0)

    def test_negative_rates_rejected(self):
        with pytest.raises(ParameterError):
            MarketParams(risk_free=-0.01, dividend=0.0, volatility=0.2)
        with pytest.raises(ParameterError):
            MarketParams(risk_free=0.01, dividend=-0.01, volatility=0.2)

    def test_grid_spec_bounds(self):
        with pytest.raises(ParameterError):
            GridSpec(time_steps=1)
        with pytest.raises(ParameterError):
            GridSpec(quadrature_order=3)
        with pytest.raises(ParameterError):
            GridSpec(newton_tol=0.0)

    def test_zero_dividend_high_rate_rejected(self):
        market = MarketParams(risk_free=0.1, dividend=0.0, volatility=0.2)
        spec = LoanSpec(principal=1.0, loan_rate=0.05, maturity=1.0)
        with pytest.raises(UnboundedBoundaryError):
            validate_contract(market, spec)

    def test_zero_dividend_low_rate_accepted(self):
        market = MarketParams(risk_free=0.05, dividend=0.0, volatility=0.2)
        spec = LoanSpec(principal=1.0, loan_rate=0.05, maturity=1.0)
        validate_contract(market, spec)


class TestAccruedDebt:
    def test_equals_principal_at_maturity(self):
        spec = LoanSpec(principal=0.7, loan_rate=0.1, maturity=5.0)
        assert accrued_debt(spec, 5.0) == pytest.approx(0.7, abs=0.0)

    def test_expiry_values(self):
        assert accrued_debt(
            LoanSpec(principal=0.7, loan_rate=0.1, maturity=5.0), 0.0
        ) == pytest.approx(1.154, abs=5e-4)
        assert accrued_debt(
            LoanSpec(principal=0.7, loan_rate=0.1, maturity=1.0), 0.0
        ) == pytest.approx(0.774, abs=5e-4)

    def test_domain_errors(self):
        spec = LoanSpec(principal=0.7, loan_rate=0.1, maturity=5.0)
        with pytest.raises(ParameterError):
            accrued_debt(spec, -0.01)
        with pytest.raises(ParameterError):
            accrued_debt(spec, 5.01)

    def test_monotone_decreasing_for_positive_rate(self):
        spec = LoanSpec(principal=2.0, loan_rate=0.07, maturity=3.0)
        taus = np.linspace(0.0, 3.0, 40)
        debts = [accrued_debt(spec, float(t)) for t in taus]
        assert all(a > b for a, b in zip(debts, debts[1:]))

    def test_constant_for_zero_rate(self):
        spec = LoanSpec(principal=2.0, loan_rate=0.0, maturity=3.0)
        for tau in np.linspace(0.0, 3.0, 7):
            assert accrued_debt(spec, float(tau)) == 2.0


class TestDimensionlessConstants:
    def test_gamma(self):
        market = MarketParams(risk_free=0.06, dividend=0.03, volatility=0.4)
        spec = LoanSpec(principal=0.7, loan_rate=0.1, maturity=5.0)
        assert dimensionless_constants(market, spec).gamma == pytest.approx(0.75)

    def test_k_and_alpha(self):
        market = MarketParams(risk_free=0.06, dividend=0.03, volatility=0.4)
        spec = LoanSpec(principal=0.7, loan_rate=0.1, maturity=5.0)
        consts = dimensionless_constants(market, spec)
        assert consts.k == pytest.approx(0.75 - 0.375 - 1.25 - 1.0)
        assert consts.alpha == pytest.approx(0.9375)

    def test_identities_hold_at_machine_precision(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            market = MarketParams(
                risk_free=float(rng.uniform(0, 0.2)),
                dividend=float(rng.uniform(0, 0.2)),
                volatility=float(rng.uniform(0.05, 0.8)),
            )
            spec = LoanSpec(
                principal=float(rng.uniform(0.1, 100)),
                loan_rate=float(rng.uniform(0, 0.2)),
                maturity=float(rng.uniform(0.1, 20)),
            )
            consts = dimensionless_constants(market, spec)
            scale = 1.0 + consts.alpha**2 + abs(consts.gamma)
            assert consts.beta + consts.alpha**2 + consts.gamma == pytest.approx(
                0.0, abs=1e-13 * scale
            )
            assert consts.lam == 2.0 * consts.alpha


class TestTerminalExitPrice:
    def test_low_rate_branch(self):
        market = MarketParams(risk_free=0.06, dividend=0.03, volatility=0.4)
        spec = LoanSpec(principal=0.7, loan_rate=0.1, maturity=5.0)
        assert terminal_exit_price(spec, market) == pytest.approx(0.7 * exp(0.5))

    def test_high_rate_branch(self):
        market = MarketParams(risk_free=0.20, dividend=0.05, volatility=0.4)
        spec = LoanSpec(principal=1.0, loan_rate=0.05, maturity=1.0)
        assert terminal_exit_price(spec, market) == pytest.approx(3.0 * exp(0.05))

    def test_tie_case(self):
        market = MarketParams(risk_free=0.10, dividend=0.05, volatility=0.4)
        spec = LoanSpec(principal=80.0, loan_rate=0.05, maturity=1.0)
        assert terminal_exit_price(spec, market) == pytest.approx(80.0 * exp(0.05))

    def test_unbounded_case_raises(self):
        market = MarketParams(risk_free=0.1, dividend=0.0, volatility=0.4)
        spec = LoanSpec(principal=1.0, loan_rate=0.05, maturity=1.0)
        with pytest.raises(UnboundedBoundaryError):
            terminal_exit_price(spec, market)

    def test_never_below_expiry_debt(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            market = MarketParams(
                risk_free=float(rng.uniform(0, 0.25)),
                dividend=float(rng.uniform(0.001, 0.2)),
                volatility=float(rng.uniform(0.05, 0.8)),
            )
            spec = LoanSpec(
                principal=float(rng.uniform(0.1, 50)),
                loan_rate=float(rng.uniform(0, 0.2)),
                maturity=float(rng.uniform(0.1, 10)),
            )
            assert terminal_exit_price(spec, market) >= accrued_debt(spec, 0.0) - 1e-12
