"""Command-line front end.

Subcommands: ``boundary``, ``price``, ``fee``, ``rebate``, ``validate`` and
``tables``. Configuration comes from an optional JSON file (``--config``)
with every field overridable by a flag; flags win. Results are CSV on
stdout or ``--out``, with a ``#``-prefixed header echoing the resolved
parameters so outputs are self-describing. Diagnostics go to stderr.

Exit codes: 0 success, 1 validation failure, 2 usage/config error,
3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from typing import IO, Optional

import numpy as np

from .binomial_oracle import TreeSpec, mc_tree_value, nr_tree_boundary_bracket
from .errors import MarginCalledError, ParameterError, SolverError, StockLoanError
from .margincall import mc_solve
from .model import GridSpec, LoanSpec, MarketParams
from .nonrecourse import nr_solve, rebate

_USAGE_ERROR = 2
_VALIDATION_FAILURE = 1
_SOLVER_FAILURE = 3


@dataclass
class RunConfig:
    market: MarketParams
    loan: LoanSpec
    grid: GridSpec
    tree_steps: Optional[int] = None
    product: str = "margincall"
    spots: list[float] = field(default_factory=list)
    taus: list[float] = field(default_factory=list)
    maturities: list[float] = field(default_factory=list)
    e_values: list[float] = field(default_factory=list)
    delta_values: list[float] = field(default_factory=list)
    s0: Optional[float] = None
    tol: float = 0.01
    out: str = "-"
    digits: int = 6


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stockloan",
        description="Margin-call stock loan pricing engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--principal", type=float, help="loan principal E")
    common.add_argument("--loan-rate", type=float, help="loan interest rate eta")
    common.add_argument("-T", "--maturity", type=float, help="maturity in years")
    common.add_argument(
        "--delta-frac", type=float, help="margin-call fraction of the debt"
    )
    common.add_argument("--risk-free", type=float, help="risk-free rate r")
    common.add_argument("--dividend", type=float, help="dividend yield")
    common.add_argument("--sigma", type=float, help="volatility")
    common.add_argument("--steps", type=int, help="time steps of the boundary grid")
    common.add_argument("--quad-order", type=int, help="Gauss-Laguerre order")
    common.add_argument("--newton-tol", type=float, help="Newton tolerance")
    common.add_argument("--tree-steps", type=int, help="binomial lattice steps")
    common.add_argument("--out", help="output path ('-' for stdout)")
    common.add_argument("--digits", type=int, help="significant digits (default 6)")

    p = sub.add_parser("boundary", parents=[common], help="emit the exit boundary grid")
    p.add_argument("--product", choices=("nonrecourse", "margincall"))

    p = sub.add_parser("price", parents=[common], help="quote spot/tau combinations")
    p.add_argument("--spots", type=_float_list, help="comma-separated spot list")
    p.add_argument("--taus", type=_float_list, help="comma-separated tau list")

    p = sub.add_parser("fee", parents=[common], help="service fees over E/margin sweeps")
    p.add_argument("--s0", type=float, help="inception stock price")
    p.add_argument("--e-values", type=_float_list, help="principal sweep")
    p.add_argument("--delta-values", type=_float_list, help="margin-fraction sweep")

    sub.add_parser("rebate", parents=[common], help="emit the rebate tau grid")

    p = sub.add_parser(
        "validate", parents=[common], help="compare the engine against the lattice oracle"
    )
    p.add_argument("--spots", type=_float_list, help="value cells: spot list")
    p.add_argument("--e-values", type=_float_list, help="value cells: principal sweep")
    p.add_argument(
        "--maturities", type=_float_list, help="bracket rows: maturity sweep"
    )
    p.add_argument("--tol", type=float, help="pass/fail tolerance (default 0.01)")

    sub.add_parser(
        "tables", parents=[common], help="emit the built-in reference scenario set"
    )
    return parser


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ParameterError(f"config {path} must hold a JSON object")
    return data


def _resolve(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, the config file and flags (flags win)."""
    data: dict = {}
    if getattr(args, "config", None):
        data = _load_config_file(args.config)
    market_d = dict(data.get("market", {}))
    loan_d = dict(data.get("loan", {}))
    grid_d = dict(data.get("grid", {}))
    tree_d = dict(data.get("tree", {}))
    run_d = dict(data.get("run", {}))

    def pick(flag_name, section, key, default=None):
        value = getattr(args, flag_name, None)
        if value is not None:
            return value
        return section.get(key, default)

    try:
        market = MarketParams(
            risk_free=float(pick("risk_free", market_d, "risk_free", 0.06)),
            dividend=float(pick("dividend", market_d, "dividend", 0.03)),
            volatility=float(pick("sigma", market_d, "volatility", 0.4)),
        )
        loan = LoanSpec(
            principal=float(pick("principal", loan_d, "principal", 0.7)),
            loan_rate=float(pick("loan_rate", loan_d, "loan_rate", 0.1)),
            maturity=float(pick("maturity", loan_d, "maturity", 1.0)),
            margin_fraction=float(pick("delta_frac", loan_d, "margin_fraction", 0.1)),
        )
        grid = GridSpec(
            time_steps=int(pick("steps", grid_d, "time_steps", 50)),
            quadrature_order=int(pick("quad_order", grid_d, "quadrature_order", 32)),
            newton_tol=float(pick("newton_tol", grid_d, "newton_tol", 1e-10)),
            newton_max_iter=int(grid_d.get("newton_max_iter", 50)),
        )
        tree_steps = pick("tree_steps", tree_d, "steps")
        config = RunConfig(
            market=market,
            loan=loan,
            grid=grid,
            tree_steps=int(tree_steps) if tree_steps is not None else None,
            product=pick("product", run_d, "product", "margincall"),
            spots=list(pick("spots", run_d, "spots", []) or []),
            taus=list(pick("taus", run_d, "taus", []) or []),
            maturities=list(pick("maturities", run_d, "maturities", []) or []),
            e_values=list(pick("e_values", run_d, "e_values", []) or []),
            delta_values=list(pick("delta_values", run_d, "delta_values", []) or []),
            s0=pick("s0", run_d, "s0"),
            tol=float(pick("tol", run_d, "tol", 0.01)),
            out=pick("out", run_d, "out", "-") or "-",
            digits=int(pick("digits", run_d, "digits", 6)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"bad configuration value: {exc}") from exc
    if config.s0 is not None:
        config.s0 = float(config.s0)
    return config


class _Output:
    """CSV sink with '#' headers and fixed significant digits."""

    def __init__(self, stream: IO[str], digits: int):
        self.stream = stream
        self.digits = digits

    def fmt(self, value: float) -> str:
        return format(value, f".{self.digits}g")

    def comment(self, text: str) -> None:
        self.stream.write(f"# {text}\n")

    def header(self, config: RunConfig, command: str) -> None:
        loan, market, grid = config.loan, config.market, config.grid
        self.comment(f"stockloan {command}")
        self.comment(
            f"principal={loan.principal!r} loan_rate={loan.loan_rate!r} "
            f"maturity={loan.maturity!r} margin_fraction={loan.margin_fraction!r}"
        )
        self.comment(
            f"risk_free={market.risk_free!r} dividend={market.dividend!r} "
            f"volatility={market.volatility!r}"
        )
        self.comment(
            f"time_steps={grid.time_steps} quadrature_order={grid.quadrature_order} "
            f"newton_tol={grid.newton_tol!r}"
        )
        if config.tree_steps:
            self.comment(f"tree_steps={config.tree_steps}")

    def row(self, *cells) -> None:
        text = ",".join(
            cell if isinstance(cell, str) else self.fmt(float(cell)) for cell in cells
        )
        self.stream.write(text + "\n")


def _cmd_boundary(config: RunConfig, out: _Output) -> int:
    if config.product == "nonrecourse":
        pricer = nr_solve(config.market, config.loan, config.grid)
    elif config.product == "margincall":
        pricer = mc_solve(config.market, config.loan, config.grid)
    else:
        raise ParameterError(f"unknown product {config.product!r}")
    out.header(config, f"boundary product={config.product}")
    curve = pricer.boundary
    out.row("tau", "S_f", "a_tau", "residual")
    for tau, value, residual in zip(
        curve.uniform_taus, curve.uniform_values, curve.uniform_residuals
    ):
        out.row(tau, value, config.loan.debt(float(tau)), residual)
    return 0


def _cmd_price(config: RunConfig, out: _Output) -> int:
    if not config.spots or not config.taus:
        raise ParameterError("price needs non-empty --spots and --taus")
    pricer = mc_solve(config.market, config.loan, config.grid)
    out.header(config, "price")
    out.row("S", "tau", "value", "state", "error")
    failures = 0
    total = 0
    for tau in config.taus:
        for spot in config.spots:
            total += 1
            try:
                quote = pricer.quote(float(spot), float(tau))
            except (MarginCalledError, ParameterError) as exc:
                failures += 1
                out.row(spot, tau, "", "error", str(exc).replace(",", ";"))
                continue
            out.row(spot, tau, quote.value, quote.state.value, "")
    return _VALIDATION_FAILURE if failures == total else 0


def _cmd_fee(config: RunConfig, out: _Output) -> int:
    if config.s0 is None:
        raise ParameterError("fee needs --s0 (inception stock price)")
    e_values = config.e_values or [config.loan.principal]
    delta_values = config.delta_values or [config.loan.margin_fraction]
    out.header(config, "fee")
    out.row("E", "Delta", "S0", "V0", "fee")
    from dataclasses import replace

    for principal in e_values:
        for margin in delta_values:
            loan = replace(
                config.loan, principal=float(principal), margin_fraction=float(margin)
            )
            pricer = mc_solve(config.market, loan, config.grid)
            value = pricer.quote(config.s0, loan.maturity).value
            out.row(principal, margin, config.s0, value, value - config.s0 + principal)
    return 0


def _cmd_rebate(config: RunConfig, out: _Output) -> int:
    reb = rebate(config.market, config.loan, config.grid)
    taus = np.linspace(0.0, config.loan.maturity, config.grid.time_steps + 1)
    values = reb.many(taus)
    out.header(config, "rebate")
    out.row("tau", "R")
    for tau, value in zip(taus, values):
        out.row(tau, value)
    return 0


def _cmd_validate(config: RunConfig, out: _Output) -> int:
    if config.tree_steps is None:
        raise ParameterError("validate needs --tree-steps")
    out.header(config, f"validate tol={config.tol!r}")
    out.row("case", "ie", "bt", "abs_diff", "status")
    failures = 0
    rows = 0

    if config.spots:
        e_values = config.e_values or [config.loan.principal]
        from dataclasses import replace

        for principal in e_values:
            loan = replace(config.loan, principal=float(principal))
            pricer = mc_solve(config.market, loan, config.grid)
            tree = TreeSpec.build(config.tree_steps, config.market, loan)
            for spot in config.spots:
                ie = pricer.quote(float(spot), loan.maturity).value
                bt = mc_tree_value(
                    float(spot), config.market, loan, tree, pricer.rebate
                )
                diff = abs(ie - bt)
                ok = diff <= config.tol
                failures += 0 if ok else 1
                rows += 1
                out.row(
                    f"value:E={out.fmt(principal)}:S={out.fmt(spot)}",
                    ie,
                    bt,
                    diff,
                    "pass" if ok else "FAIL",
                )

    for maturity in config.maturities:
        from dataclasses import replace

        loan = replace(config.loan, maturity=float(maturity), margin_fraction=0.0)
        pricer = nr_solve(config.market, loan, config.grid)
        tree = TreeSpec.build(config.tree_steps, config.market, loan)
        low, high = nr_tree_boundary_bracket(config.market, loan, tree)
        ie = float(pricer.boundary.values[-1])
        outside = max(low - ie, ie - high, 0.0)
        ok = outside <= config.tol
        failures += 0 if ok else 1
        rows += 1
        out.row(
            f"bracket:T={out.fmt(maturity)}",
            ie,
            0.5 * (low + high),
            outside,
            "pass" if ok else "FAIL",
        )

    if rows == 0:
        raise ParameterError("validate needs --spots and/or --maturities")
    out.comment(f"summary: {rows - failures}/{rows} passed")
    return _VALIDATION_FAILURE if failures else 0


def _cmd_tables(config: RunConfig, out: _Output) -> int:
    """Built-in reference scenarios: non-recourse and margin-call boundaries
    plus the inception value grid used throughout the test suite."""
    digits = out.digits
    out.header(config, "tables")

    out.comment("section 1: non-recourse inception boundary")
    market = MarketParams(risk_free=0.06, dividend=0.03, volatility=0.4)
    out.row("T", "S_f_inception", "bracket_low", "bracket_high")
    for maturity in (1.0, 5.0, 20.0):
        loan = LoanSpec(principal=0.7, loan_rate=0.1, maturity=maturity)
        pricer = nr_solve(market, loan, config.grid)
        if config.tree_steps:
            tree = TreeSpec.build(config.tree_steps, market, loan)
            low, high = nr_tree_boundary_bracket(market, loan, tree)
            out.row(maturity, pricer.boundary.values[-1], low, high)
        else:
            out.row(maturity, pricer.boundary.values[-1], "", "")

    out.comment("section 2: margin-call inception values")
    market = MarketParams(risk_free=0.1, dividend=0.05, volatility=0.2)
    out.row("S", "E", "ie", "bt")
    for principal in (80.0, 85.0, 90.0):
        loan = LoanSpec(
            principal=principal, loan_rate=0.05, maturity=1.0, margin_fraction=0.1
        )
        pricer = mc_solve(market, loan, config.grid)
        tree = (
            TreeSpec.build(config.tree_steps, market, loan)
            if config.tree_steps
            else None
        )
        for spot in (95.0, 100.0, 105.0, 110.0):
            ie = pricer.quote(spot, 1.0).value
            if tree is not None:
                bt = mc_tree_value(spot, market, loan, tree, pricer.rebate)
                out.row(spot, principal, ie, bt)
            else:
                out.row(spot, principal, ie, "")

    out.comment("section 3: margin-call boundary endpoints")
    market = MarketParams(risk_free=0.06, dividend=0.03, volatility=0.4)
    out.row("T", "S_f_inception", "S_f_expiry")
    for maturity in (1.0, 5.0, 10.0):
        loan = LoanSpec(
            principal=0.7, loan_rate=0.1, maturity=maturity, margin_fraction=0.1
        )
        pricer = mc_solve(market, loan, config.grid)
        out.row(maturity, pricer.boundary.values[-1], loan.debt(0.0))
    return 0


_COMMANDS = {
    "boundary": _cmd_boundary,
    "price": _cmd_price,
    "fee": _cmd_fee,
    "rebate": _cmd_rebate,
    "validate": _cmd_validate,
    "tables": _cmd_tables,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        config = _resolve(args)
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _USAGE_ERROR

    command = _COMMANDS[args.command]
    try:
        if config.out == "-":
            return command(config, _Output(sys.stdout, config.digits))
        with open(config.out, "w", encoding="utf-8") as handle:
            return command(config, _Output(handle, config.digits))
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _USAGE_ERROR
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return _SOLVER_FAILURE
    except StockLoanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _VALIDATION_FAILURE


if __name__ == "__main__":
    sys.exit(main())
