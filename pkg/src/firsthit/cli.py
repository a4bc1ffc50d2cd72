"""
Command line entry point: ``firsthit {solve,validate,sweep,eds} --config FILE``.

Exit codes: 0 success, 2 config error, 3 numerical/arbitrage error,
4 validation breach.  Errors are also written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from firsthit import config as cfgmod
from firsthit.errors import FirstHitError, InputDomainError
from firsthit.kernel import BsQuote, digital_put_flat
from firsthit.market import DerivedFromSpot
from firsthit.montecarlo import McConfig, mc_first_passage
from firsthit.records import describe, dumps
from firsthit.scenarios import (
    SweepSpec,
    flat_market,
    price_eds,
    run_ladder,
    run_sweep,
)
from firsthit.solver import (
    BarrierContract,
    am_dip_direct_flat,
    am_dip_price,
    density_csv,
    solve_density,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BREACH = 0, 2, 3, 4

DEFAULT_GRID = {
    "spot": 100.0,
    "sigmas": [0.10, 0.20, 0.40],
    "barrier_fractions": [0.7, 0.9],
    "maturities": [0.5, 1.0],
    "n_paths": 1_000_000,
    "n_steps_per_year": 50,
    "seed": 20091215,
    "tolerance": 0.005,
    "mc_sigmas": 3.0,
    "monte_carlo": True,
}


def _write_all(out_dir: Path, files: dict[str, str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        tmp = out_dir / f".{name}.tmp"
        tmp.write_text(text)
        os.replace(tmp, out_dir / name)


def _require(config, *keys):
    missing = [k for k in keys if k not in config]
    if missing:
        raise cfgmod.ConfigError(f"config is missing section(s): {', '.join(missing)}")


def _inputs(market, fwd_spec, contract, solver):
    return {"market": describe(market), "fwd_spec": describe(fwd_spec),
            "contract": describe(contract), "solver": describe(solver)}


def cmd_solve(config: dict, args) -> tuple[dict[str, str], int]:
    _require(config, "market", "contract")
    market = cfgmod.build_market(config["market"])
    contract = cfgmod.build_contract(config["contract"], market.spot)
    fwd_spec = cfgmod.build_fwd_spec(config.get("forward_skew"), contract.barrier)
    solver = cfgmod.build_solver(config.get("solver"), args.steps, args.clamp_density)
    density = solve_density(market, fwd_spec, contract, solver)
    price = am_dip_price(density, contract, market.discount)
    inputs = _inputs(market, fwd_spec, contract, solver)
    summary = {
        "command": "solve",
        "am_dip_price": price,
        "price_on_notional": price * contract.notional,
        "cumulative_at_maturity": density.total,
        "clamp_events": density.clamp_events,
        "day_count": config["market"].get("day_count", "ACT/365"),
        "inputs": inputs,
    }
    files = {"density.csv": density_csv(density, {"inputs": inputs}),
             "summary.json": dumps(summary)}
    return files, EXIT_OK


def cmd_validate(config: dict, args) -> tuple[dict[str, str], int]:
    grid = {**DEFAULT_GRID, **config.get("validate", {})}
    if args.seed is not None:
        grid["seed"] = args.seed
    solver = cfgmod.build_solver(config.get("solver"), args.steps, args.clamp_density)
    S = grid["spot"]
    rows = []
    for sigma in grid["sigmas"]:
        for frac in grid["barrier_fractions"]:
            for T in grid["maturities"]:
                B = frac * S
                market = flat_market(S, sigma)
                contract = BarrierContract(B, T)
                density = solve_density(market, DerivedFromSpot(), contract, solver)
                closed = am_dip_direct_flat(S, B, sigma, 0.0, T)
                row = {"sigma": sigma, "barrier_fraction": frac, "maturity": T,
                       "solver": density.total, "closed_form": closed,
                       "solver_error": density.total - closed}
                breaches = []
                if abs(row["solver_error"]) > grid["tolerance"]:
                    breaches.append("solver_vs_closed_form")
                if grid["monte_carlo"]:
                    mc = mc_first_passage(
                        S, B, sigma, market.discount, market.dividends, T,
                        McConfig(grid["n_paths"], grid["n_steps_per_year"], grid["seed"],
                                 True, args.workers),
                    )
                    row["mc"] = mc.hit_probability
                    row["mc_standard_error"] = mc.standard_error
                    if abs(mc.hit_probability - closed) > grid["mc_sigmas"] * mc.standard_error:
                        breaches.append("mc_vs_closed_form")
                # zero log-drift twin: the reflection-symmetric case of Am ~ 2 Eur
                sym = flat_market(S, sigma, dividend_yield=-0.5 * sigma * sigma,
                                  horizon=max(2 * T, 1.0))
                sym_density = solve_density(sym, DerivedFromSpot(), contract, solver)
                fwd = sym.forward(S, 0.0, T)
                two_eur = 2.0 * digital_put_flat(BsQuote(fwd, B, sigma, T))
                row["symmetric_am"] = sym_density.total
                row["two_eur_dip"] = two_eur
                row["heuristic_deviation"] = (
                    abs(sym_density.total - two_eur) / sym_density.total
                    if sym_density.total > 0 else 0.0
                )
                row["breaches"] = breaches
                rows.append(row)
    report = {"command": "validate", "grid": grid, "solver": describe(solver), "rows": rows,
              "passed": not any(r["breaches"] for r in rows)}
    buf = io.StringIO()
    fields = ["sigma", "barrier_fraction", "maturity", "solver", "closed_form", "solver_error",
              "mc", "mc_standard_error", "symmetric_am", "two_eur_dip", "heuristic_deviation",
              "breaches"]
    w = csv.DictWriter(buf, fields, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (";".join(v) if isinstance(v, list) else repr(v) if isinstance(v, float)
                        else v) for k, v in r.items()})
    code = EXIT_OK if report["passed"] else EXIT_BREACH
    return {"validate.csv": buf.getvalue(), "validate.json": dumps(report)}, code


def cmd_sweep(config: dict, args) -> tuple[dict[str, str], int]:
    _require(config, "market", "contract", "sweep")
    market = cfgmod.build_market(config["market"])
    contract = cfgmod.build_contract(config["contract"], market.spot)
    fwd_spec = cfgmod.build_fwd_spec(config.get("forward_skew"), contract.barrier)
    solver = cfgmod.build_solver(config.get("solver"), args.steps, args.clamp_density)
    sw = config["sweep"]
    spec = SweepSpec(sw["axis"], sw["values"], market, fwd_spec, contract, solver,
                     sw.get("spot_skew_pivot", "atm"))
    result = run_sweep(spec, strict=False, workers=args.workers)
    files = {"sweep.csv": result.table_csv(), "sweep_curves.csv": result.curves_csv(),
             "sweep.json": dumps(result.record())}
    return files, (EXIT_NUMERIC if result.failed else EXIT_OK)


def cmd_eds(config: dict, args) -> tuple[dict[str, str], int]:
    _require(config, "market", "eds")
    eds = config["eds"]
    market = cfgmod.build_market(config["market"])
    trade = cfgmod.build_trade(eds["trade"])
    fwd_spec = cfgmod.build_fwd_spec(config.get("forward_skew"),
                                     trade.barrier_fraction * market.spot)
    solver = cfgmod.build_solver(config.get("solver"), args.steps, args.clamp_density)
    ladder = cfgmod.build_ladder(eds)
    assumptions = {"day_count": config["market"].get("day_count", "ACT/365"),
                   **eds.get("assumptions", {})}
    quote = price_eds(trade, market, fwd_spec, solver, assumptions)
    result = run_ladder(trade, market, fwd_spec, ladder, solver, strict=False,
                        workers=args.workers, assumptions=assumptions)
    record = {"command": "eds", "base_price_bp": quote.price_bp,
              "base_price_on_notional": quote.price, "base": quote.metadata,
              **result.record()}
    files = {"ladder.csv": result.table_csv(), "eds.json": dumps(record),
             "density.csv": density_csv(quote.density, {"inputs": quote.metadata})}
    return files, (EXIT_NUMERIC if result.failed else EXIT_OK)


COMMANDS = {"solve": cmd_solve, "validate": cmd_validate, "sweep": cmd_sweep, "eds": cmd_eds}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="firsthit",
        description="American digital put and EDS pricing from first-hitting-time densities.",
    )
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out-dir", default=".", help="directory for CSV/JSON outputs")
    p.add_argument("--steps", type=int, default=None, help="override solver n_steps")
    p.add_argument("--seed", type=int, default=None, help="override Monte Carlo seed")
    p.add_argument("--clamp-density", action="store_true",
                   help="clamp negative densities to zero instead of failing")
    p.add_argument("--workers", type=int, default=1, help="parallel workers (output unchanged)")
    return p


def _fail(code: int, exc: Exception) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = cfgmod.load(args.config)
        if args.steps is not None and args.steps < 2:
            raise cfgmod.ConfigError("--steps must be >= 2")
    except InputDomainError as exc:
        return _fail(EXIT_CONFIG, exc)
    try:
        files, code = COMMANDS[args.command](config, args)
    except InputDomainError as exc:
        return _fail(EXIT_CONFIG, exc)
    except FirstHitError as exc:
        return _fail(EXIT_NUMERIC, exc)
    _write_all(Path(args.out_dir), files)
    if code == EXIT_BREACH:
        sys.stderr.write(json.dumps({"error": "ValidationBreach", "exit_code": code}) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
