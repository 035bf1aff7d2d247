import pytest

from stockloan.margincall import mc_solve
from stockloan.model import GridSpec, LoanSpec, MarketParams
from stockloan.nonrecourse import nr_solve


@pytest.fixture(scope="session")
def market_low():
    """Low-rate parameter set used for the boundary references."""
    return MarketParams(risk_free=0.06, dividend=0.03, volatility=0.4)


@pytest.fixture(scope="session")
def market_grid():
    """Parameter set of the inception value grid."""
    return MarketParams(risk_free=0.1, dividend=0.05, volatility=0.2)


@pytest.fixture(scope="session")
def grid50():
    return GridSpec(time_steps=50)


@pytest.fixture(scope="session")
def nr_t5(market_low, grid50):
    return nr_solve(market_low, LoanSpec(principal=0.7, loan_rate=0.1, maturity=5.0), grid50)


@pytest.fixture(scope="session")
def mc_t5(market_low, grid50):
    spec = LoanSpec(principal=0.7, loan_rate=0.1, maturity=5.0, margin_fraction=0.1)
    return mc_solve(market_low, spec, grid50)


@pytest.fixture(scope="session")
def mc_e80(market_grid, grid50):
    spec = LoanSpec(principal=80.0, loan_rate=0.05, maturity=1.0, margin_fraction=0.1)
    return mc_solve(market_grid, spec, grid50)
