"""
JSON run configuration: schema validation and object construction.

Every slope in a config declares its unit; values are converted to
dsigma/d(ln K) on ingestion.  Unknown keys are rejected.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from firsthit.errors import InputDomainError
from firsthit.kernel import SLOPE_UNITS, to_log_strike_slope
from firsthit.market import (
    DEFAULT_VOL_FLOOR,
    CashDividends,
    DerivedFromSpot,
    DiscountCurve,
    ExplicitTable,
    MarketState,
    ParametricSkew,
    ProportionalDividends,
    StrikeGrid,
    TermStructure,
)
from firsthit.scenarios import AXES, Bump, EdsTrade, StressLadder
from firsthit.solver import BarrierContract, SolverConfig


class ConfigError(InputDomainError):
    """Config failed schema validation or could not be turned into objects."""


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_PAIRS = {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
          "minItems": 1}
_CURVE_OR_NUM = {"oneOf": [_NUM, _PAIRS]}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


DIVIDENDS_SCHEMA = {
    "oneOf": [
        _obj({"type": {"const": "none"}}, ["type"]),
        _obj({"type": {"const": "proportional"}, "yield": _NUM,
              "breaks": {"type": "array", "items": _POS},
              "yields": {"type": "array", "items": _NUM}}, ["type"]),
        _obj({"type": {"const": "cash"}, "payments": _PAIRS}, ["type", "payments"]),
    ]
}

SURFACE_SCHEMA = {
    "oneOf": [
        _obj({"type": {"const": "parametric"}, "atm_vol": _CURVE_OR_NUM, "slope": _CURVE_OR_NUM,
              "slope_unit": {"enum": list(SLOPE_UNITS)}, "slope_reference": _POS,
              "vol_floor": _POS}, ["type", "atm_vol", "slope", "slope_unit"]),
        _obj({"type": {"const": "anchored"}, "atm_vol": _POS, "anchor_strike_fraction": _POS,
              "anchor_vol": _POS, "vol_floor": _POS},
             ["type", "atm_vol", "anchor_strike_fraction", "anchor_vol"]),
        _obj({"type": {"const": "grid"}, "strikes": {"type": "array", "items": _POS},
              "maturities": {"type": "array", "items": _POS},
              "vols": {"type": "array", "items": {"type": "array", "items": _POS}},
              "vol_floor": _POS}, ["type", "strikes", "maturities", "vols"]),
    ]
}

MARKET_SCHEMA = _obj(
    {
        "spot": _POS,
        "discount": {"oneOf": [_obj({"flat_rate": _NUM, "horizon": _POS}, ["flat_rate"]),
                               _obj({"nodes": _PAIRS}, ["nodes"])]},
        "dividends": DIVIDENDS_SCHEMA,
        "surface": SURFACE_SCHEMA,
        "day_count": {"type": "string"},
    },
    ["spot", "surface"],
)

FWD_SCHEMA = {
    "oneOf": [
        _obj({"type": {"const": "derived"}, "vol_factor": {"type": "number", "minimum": 0},
              "skew_factor": {"type": "number", "minimum": 0}, "vol_shift": _NUM}, ["type"]),
        _obj({"type": {"const": "table"}, "hit_times": {"type": "array", "items": _NUM},
              "remaining": {"type": "array", "items": _POS},
              "vols": {"type": "array", "items": {"type": "array", "items": _POS}},
              "slopes": {"type": "array", "items": {"type": "array", "items": _NUM}},
              "slope_unit": {"enum": list(SLOPE_UNITS)}, "vol_floor": _POS},
             ["type", "hit_times", "remaining", "vols", "slopes", "slope_unit"]),
    ]
}

BUMP_PROPS = {
    "name": {"type": "string"},
    "spot_skew_factor": {"type": "number", "minimum": 0},
    "fwd_skew_factor": {"type": "number", "minimum": 0},
    "fwd_vol_factor": {"type": "number", "minimum": 0},
    "barrier_vol_shift": _NUM,
    "fwd_vol_shift": _NUM,
    "barrier_shift": _NUM,
    "dividends": DIVIDENDS_SCHEMA,
}

RUN_SCHEMA = _obj(
    {
        "market": MARKET_SCHEMA,
        "market_file": {"type": "string"},
        "contract": _obj({"barrier": _POS, "barrier_fraction": _POS, "maturity": _POS,
                          "payout": {"enum": ["at-hit", "at-maturity"]}, "notional": _POS},
                         ["maturity"]),
        "forward_skew": FWD_SCHEMA,
        "solver": _obj({"n_steps": {"type": "integer", "minimum": 2},
                        "negativity_policy": {"enum": ["error", "clamp"]},
                        "kernel_floor": _POS}),
        "validate": _obj({
            "spot": _POS,
            "sigmas": {"type": "array", "items": _POS, "minItems": 1},
            "barrier_fractions": {"type": "array", "items": _POS, "minItems": 1},
            "maturities": {"type": "array", "items": _POS, "minItems": 1},
            "n_paths": {"type": "integer", "minimum": 1000},
            "n_steps_per_year": {"type": "integer", "minimum": 50},
            "seed": {"type": "integer", "minimum": 0},
            "tolerance": _POS,
            "mc_sigmas": _POS,
            "monte_carlo": {"type": "boolean"},
        }),
        "sweep": _obj({"axis": {"enum": sorted(AXES)},
                       "values": {"type": "array", "items": _NUM, "minItems": 1},
                       "spot_skew_pivot": {"enum": ["atm", "barrier"]}},
                      ["axis", "values"]),
        "eds": _obj({
            "trade": _obj({"notional": _POS, "barrier_fraction": _POS, "maturity": _POS,
                           "payout": {"enum": ["at-hit", "at-maturity"]}},
                          ["barrier_fraction", "maturity"]),
            "ladder": {"type": "array", "items": _obj(BUMP_PROPS, ["name"])},
            "cumulative": {"type": "boolean"},
            "spot_skew_pivot": {"enum": ["atm", "barrier"]},
            "assumptions": {"type": "object"},
        }, ["trade"]),
    },
)


def validate(config: dict) -> None:
    try:
        jsonschema.validate(config, RUN_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None


def load(path) -> dict:
    """Read, resolve ``market_file`` and validate a run config."""
    path = Path(path)
    try:
        config = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    validate(config)
    if "market_file" in config:
        if "market" in config:
            raise ConfigError("give either 'market' or 'market_file', not both")
        mpath = path.parent / config.pop("market_file")
        try:
            config["market"] = json.loads(mpath.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read market file {mpath}: {exc}") from None
        validate(config)
    return config


def _term(value) -> TermStructure:
    if isinstance(value, (int, float)):
        return TermStructure.flat(value)
    times, vals = zip(*value)
    return TermStructure(times, vals)


def build_dividends(cfg: dict | None):
    if not cfg or cfg["type"] == "none":
        return ProportionalDividends()
    if cfg["type"] == "proportional":
        if "yields" in cfg:
            return ProportionalDividends(cfg.get("breaks", ()), cfg["yields"])
        return ProportionalDividends.flat(cfg.get("yield", 0.0))
    return CashDividends(tuple(map(tuple, cfg["payments"])))


def _forward_term(base: MarketState, horizon: float) -> TermStructure:
    carry_free = (isinstance(base.dividends, ProportionalDividends)
                  and set(base.dividends.yields) == {0.0} and set(base.discount.dfs) == {1.0})
    if carry_free:
        return TermStructure.flat(base.spot)
    ts = np.linspace(0.0, horizon, 601)
    return TermStructure(ts, base.forward(base.spot, 0.0, ts))


def build_market(cfg: dict) -> MarketState:
    disc = cfg.get("discount", {"flat_rate": 0.0})
    if "nodes" in disc:
        times, dfs = zip(*disc["nodes"])
        discount = DiscountCurve(times, dfs)
    else:
        discount = DiscountCurve.flat(disc["flat_rate"], disc.get("horizon", 100.0))
    base = MarketState(cfg["spot"], discount, build_dividends(cfg.get("dividends")))
    s = cfg["surface"]
    floor = s.get("vol_floor", DEFAULT_VOL_FLOOR)
    fwd = _forward_term(base, min(discount.horizon, 30.0))
    if s["type"] == "grid":
        surface = StrikeGrid(s["strikes"], s["maturities"], s["vols"], fwd, floor)
    elif s["type"] == "anchored":
        # linear in ln K through the ATM vol and one anchor strike
        slope = (s["anchor_vol"] - s["atm_vol"]) / math.log(s["anchor_strike_fraction"])
        surface = ParametricSkew(TermStructure.flat(s["atm_vol"]), TermStructure.flat(slope),
                                 fwd, floor)
    else:
        ref = s.get("slope_reference", base.spot)
        slope = _term(s["slope"])
        converted = [to_log_strike_slope(v, s["slope_unit"], ref, base.spot)
                     for v in slope.values]
        surface = ParametricSkew(_term(s["atm_vol"]), TermStructure(slope.times, converted),
                                 fwd, floor)
    return base.replace(surface=surface)


def build_fwd_spec(cfg: dict | None, barrier: float | None = None):
    if not cfg or cfg["type"] == "derived":
        cfg = cfg or {}
        return DerivedFromSpot(cfg.get("vol_factor", 1.0), cfg.get("skew_factor", 1.0),
                               cfg.get("vol_shift", 0.0))
    slopes = np.asarray(cfg["slopes"], float)
    if cfg["slope_unit"] != "per_log_strike":
        if barrier is None:
            raise ConfigError("table slopes in absolute units need a barrier level")
        # at the hit the ATM strike is the barrier
        slopes = np.vectorize(lambda v: to_log_strike_slope(v, cfg["slope_unit"], barrier,
                                                            barrier))(slopes)
    return ExplicitTable(cfg["hit_times"], cfg["remaining"], cfg["vols"], slopes,
                         cfg.get("vol_floor", DEFAULT_VOL_FLOOR))


def build_contract(cfg: dict, spot: float) -> BarrierContract:
    if ("barrier" in cfg) == ("barrier_fraction" in cfg):
        raise ConfigError("contract needs exactly one of 'barrier' or 'barrier_fraction'")
    barrier = cfg["barrier"] if "barrier" in cfg else cfg["barrier_fraction"] * spot
    return BarrierContract(barrier, cfg["maturity"], cfg.get("payout", "at-maturity"),
                           cfg.get("notional", 1.0))


def build_solver(cfg: dict | None, steps: int | None = None, clamp: bool = False) -> SolverConfig:
    cfg = dict(cfg or {})
    if steps is not None:
        cfg["n_steps"] = steps
    if clamp:
        cfg["negativity_policy"] = "clamp"
    return SolverConfig(**cfg)


def build_trade(cfg: dict) -> EdsTrade:
    return EdsTrade(cfg.get("notional", 1.0), cfg["barrier_fraction"], cfg["maturity"],
                    cfg.get("payout", "at-hit"))


def build_ladder(cfg: dict) -> StressLadder:
    rungs = []
    for item in cfg.get("ladder", []):
        item = dict(item)
        if "dividends" in item:
            item["dividends"] = build_dividends(item["dividends"])
        rungs.append(Bump(**item))
    return StressLadder(tuple(rungs), cfg.get("cumulative", True),
                        cfg.get("spot_skew_pivot", "barrier"))
