"""
JSON round-trip for the library's frozen dataclasses.

``describe`` turns an object graph into plain JSON data tagged with type
names; ``rebuild`` reverses it.  Run records embed the described inputs so a
result can be recomputed from its own output file.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

_REGISTRY: dict[str, type] = {}


def register(cls):
    _REGISTRY[cls.__name__] = cls
    return cls


def _ensure_registry():
    if _REGISTRY:
        return
    from firsthit import market, scenarios, solver

    for cls in (
        market.TermStructure, market.DiscountCurve, market.ProportionalDividends,
        market.CashDividends, market.ParametricSkew, market.StrikeGrid, market.BumpedSurface,
        market.MarketState, market.DerivedFromSpot, market.ExplicitTable,
        solver.BarrierContract, solver.SolverConfig,
        scenarios.EdsTrade, scenarios.Bump, scenarios.StressLadder,
    ):
        register(cls)


def describe(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {"type": type(obj).__name__}
        for f in dataclasses.fields(obj):
            if f.init:
                out[f.name] = describe(getattr(obj, f.name))
        return out
    if isinstance(obj, (tuple, list)):
        return [describe(v) for v in obj]
    if isinstance(obj, dict):
        return {k: describe(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def rebuild(data):
    _ensure_registry()
    if isinstance(data, dict):
        if "type" in data and data["type"] in _REGISTRY:
            cls = _REGISTRY[data["type"]]
            kwargs = {k: rebuild(v) for k, v in data.items() if k != "type"}
            return cls(**kwargs)
        return {k: rebuild(v) for k, v in data.items()}
    if isinstance(data, list):
        return tuple(rebuild(v) for v in data)
    return data


def dumps(data) -> str:
    """Deterministic JSON: sorted keys, round-trip float repr."""
    return json.dumps(describe(data), sort_keys=True, indent=2, allow_nan=False) + "\n"
