"""
Skew sweeps and conservative stress ladders for American digital puts and
equity default swaps.

Spot-surface bumps never leak into the hit-time conditions: before a bump is
applied, a ``DerivedFromSpot`` spec is pinned to the unbumped surface, so the
spot skew and the forward skew move independently.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from firsthit.errors import FirstHitError, InputDomainError
from firsthit.market import (
    BumpedSurface,
    DerivedFromSpot,
    DiscountCurve,
    ExplicitTable,
    MarketState,
    ParametricSkew,
    ProportionalDividends,
    TermStructure,
)
from firsthit.records import describe
from firsthit.solver import (
    BarrierContract,
    HittingDensity,
    SolverConfig,
    am_dip_price,
    solve_density,
)

__all__ = [
    "AXES",
    "Bump",
    "StressLadder",
    "SweepSpec",
    "SweepRow",
    "SweepResult",
    "EdsTrade",
    "EdsQuote",
    "LadderRow",
    "LadderResult",
    "ScenarioError",
    "apply_bump",
    "run_sweep",
    "price_eds",
    "run_ladder",
    "commerzbank_eds_setup",
    "conservative_ladder",
    "flat_market",
]

Pivot = Literal["atm", "barrier"]

# sweep axis -> Bump field it drives
AXES = {
    "spot_skew": "spot_skew_factor",
    "fwd_skew": "fwd_skew_factor",
    "fwd_vol": "fwd_vol_factor",
    "barrier_vol_shift": "barrier_vol_shift",
    "barrier_shift": "barrier_shift",
}
_FACTOR_AXES = {"spot_skew", "fwd_skew", "fwd_vol"}


class ScenarioError(FirstHitError):
    def __init__(self, rung, cause: Exception):
        self.rung = rung
        self.cause = cause
        super().__init__(f"rung {rung!r} failed: {type(cause).__name__}: {cause}")


@dataclass(frozen=True)
class Bump:
    """
    One stress step.  Factors multiply, shifts add.

    ``barrier_shift`` is a fraction of spot; ``dividends`` replaces the
    dividend model when given.
    """

    name: str = "bump"
    spot_skew_factor: float = 1.0
    fwd_skew_factor: float = 1.0
    fwd_vol_factor: float = 1.0
    barrier_vol_shift: float = 0.0
    fwd_vol_shift: float = 0.0
    barrier_shift: float = 0.0
    dividends: object | None = None

    def __post_init__(self):
        if min(self.spot_skew_factor, self.fwd_skew_factor, self.fwd_vol_factor) < 0.0:
            raise InputDomainError("bump factors must be >= 0")

    def then(self, other: "Bump") -> "Bump":
        """Compose: ``other`` applied on top of ``self``."""
        return Bump(
            name=other.name,
            spot_skew_factor=self.spot_skew_factor * other.spot_skew_factor,
            fwd_skew_factor=self.fwd_skew_factor * other.fwd_skew_factor,
            fwd_vol_factor=self.fwd_vol_factor * other.fwd_vol_factor,
            barrier_vol_shift=self.barrier_vol_shift + other.barrier_vol_shift,
            fwd_vol_shift=self.fwd_vol_shift + other.fwd_vol_shift,
            barrier_shift=self.barrier_shift + other.barrier_shift,
            dividends=other.dividends if other.dividends is not None else self.dividends,
        )


@dataclass(frozen=True)
class StressLadder:
    rungs: tuple[Bump, ...] = ()
    cumulative: bool = True
    spot_skew_pivot: Pivot = "barrier"

    def __post_init__(self):
        object.__setattr__(self, "rungs", tuple(self.rungs))
        if self.spot_skew_pivot not in ("atm", "barrier"):
            raise InputDomainError(f"unknown pivot {self.spot_skew_pivot!r}")


def _bump_fwd_spec(spec, bump: Bump, base_surface):
    if isinstance(spec, DerivedFromSpot):
        return dataclasses.replace(
            spec,
            vol_factor=spec.vol_factor * bump.fwd_vol_factor,
            skew_factor=spec.skew_factor * bump.fwd_skew_factor,
            vol_shift=spec.vol_shift + bump.fwd_vol_shift,
            surface=spec.surface if spec.surface is not None else base_surface,
        )
    if isinstance(spec, ExplicitTable):
        vols = np.asarray(spec.vols) * bump.fwd_vol_factor + bump.fwd_vol_shift
        if np.any(vols <= 0.0):
            raise InputDomainError("forward vol is non-positive after bump")
        return ExplicitTable(spec.hit_times, spec.remaining, vols,
                             np.asarray(spec.slopes) * bump.fwd_skew_factor, spec.vol_floor)
    raise InputDomainError(f"unsupported forward-skew spec {type(spec).__name__}")


def apply_bump(
    market: MarketState,
    fwd_spec,
    contract: BarrierContract,
    bump: Bump,
    spot_skew_pivot: Pivot = "atm",
):
    """
    Return bumped ``(market, fwd_spec, contract)``.

    The spot-skew factor rotates today's surface around the ATM vol
    (``"atm"``) or around the barrier vol (``"barrier"``); the barrier-vol
    shift is a parallel shift of today's surface.
    """
    barrier = contract.barrier + bump.barrier_shift * market.spot
    if not 0.0 < barrier < market.spot:
        raise InputDomainError(f"shifted barrier {barrier!r} is not in (0, spot)")
    new_contract = dataclasses.replace(contract, barrier=barrier)
    surface = market.surface
    new_spec = _bump_fwd_spec(fwd_spec, bump, surface)
    if bump.spot_skew_factor != 1.0 or bump.barrier_vol_shift != 0.0:
        pivot = barrier if spot_skew_pivot == "barrier" else None
        surface = BumpedSurface(surface, bump.spot_skew_factor, bump.barrier_vol_shift, pivot)
    new_market = market.replace(surface=surface)
    if bump.dividends is not None:
        new_market = new_market.replace(dividends=bump.dividends)
    return new_market, new_spec, new_contract


def _json_float(x: float) -> float | None:
    # failed rows carry NaN; strict JSON has no NaN
    return None if math.isnan(x) else x


def _solve_priced(market, fwd_spec, contract, config):
    density = solve_density(market, fwd_spec, contract, config)
    return density, am_dip_price(density, contract, market.discount)


def _run_all(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple[float, ...]
    market: MarketState
    fwd_spec: object
    contract: BarrierContract
    config: SolverConfig = SolverConfig()
    spot_skew_pivot: Pivot = "atm"

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.axis not in AXES:
            raise InputDomainError(f"unknown sweep axis {self.axis!r}; expected {sorted(AXES)}")
        if not self.values:
            raise InputDomainError("sweep needs at least one value")
        if self.axis in _FACTOR_AXES and min(self.values) < 0.0:
            raise InputDomainError("sweep factors must be >= 0")


@dataclass(frozen=True)
class SweepRow:
    value: float
    price: float
    cumulative: np.ndarray | None = field(default=None, repr=False)
    error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    times: np.ndarray = field(repr=False)
    rows: tuple[SweepRow, ...]

    @property
    def prices(self) -> list[float]:
        return [r.price for r in self.rows]

    @property
    def failed(self) -> bool:
        return any(r.error for r in self.rows)

    def table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([self.spec.axis, "am_dip_price", "error"])
        for r in self.rows:
            w.writerow([repr(r.value), repr(r.price), r.error or ""])
        return buf.getvalue()

    def curves_csv(self) -> str:
        """Cumulative hitting probability per sweep value, one column each."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"{self.spec.axis}={r.value!r}" for r in self.rows])
        dt = self.times[1] - self.times[0] if len(self.times) > 1 else 0.0
        for i, t in enumerate(self.times):
            w.writerow([repr(float(t + dt))] + [
                repr(float(r.cumulative[i])) if r.cumulative is not None else ""
                for r in self.rows
            ])
        return buf.getvalue()

    def record(self) -> dict:
        return {
            "kind": "sweep",
            "inputs": {
                "axis": self.spec.axis,
                "values": list(self.spec.values),
                "spot_skew_pivot": self.spec.spot_skew_pivot,
                "market": describe(self.spec.market),
                "fwd_spec": describe(self.spec.fwd_spec),
                "contract": describe(self.spec.contract),
                "solver": describe(self.spec.config),
            },
            "rows": [
                {"value": r.value, "price": _json_float(r.price), "error": r.error,
                 "cumulative_at_maturity": (float(r.cumulative[-1])
                                            if r.cumulative is not None else None)}
                for r in self.rows
            ],
        }


def run_sweep(spec: SweepSpec, strict: bool = True, workers: int = 1) -> SweepResult:
    """
    One solve per sweep value, in the order given.

    With ``strict=False`` failing values are recorded (price NaN, error text)
    instead of raising :class:`ScenarioError`.
    """
    field_name = AXES[spec.axis]

    def one(value):
        try:
            bump = Bump(name=f"{spec.axis}={value!r}", **{field_name: value})
            m, f, c = apply_bump(spec.market, spec.fwd_spec, spec.contract, bump,
                                 spec.spot_skew_pivot)
            density, price = _solve_priced(m, f, c, spec.config)
            return SweepRow(value, price, density.cumulative)
        except FirstHitError as exc:
            if strict:
                raise ScenarioError(value, exc) from exc
            return SweepRow(value, math.nan, None, f"{type(exc).__name__}: {exc}")

    rows = tuple(_run_all(one, spec.values, workers))
    dt = spec.contract.maturity / spec.config.n_steps
    return SweepResult(spec, dt * np.arange(spec.config.n_steps), rows)


@dataclass(frozen=True)
class EdsTrade:
    notional: float = 1.0
    barrier_fraction: float = 0.30
    maturity: float = 0.5
    payout: Literal["at-hit", "at-maturity"] = "at-hit"

    def __post_init__(self):
        if not 0.0 < self.barrier_fraction < 1.0:
            raise InputDomainError("barrier_fraction must lie strictly between 0 and 1")
        if not self.maturity > 0.0:
            raise InputDomainError("maturity must be positive")

    def contract(self, spot: float) -> BarrierContract:
        return BarrierContract(self.barrier_fraction * spot, self.maturity, self.payout,
                               self.notional)


@dataclass(frozen=True)
class EdsQuote:
    price_bp: float
    density: HittingDensity = field(repr=False)
    metadata: dict = field(repr=False, default_factory=dict)
    notional: float = 1.0

    @property
    def price(self) -> float:
        """Currency amount on the trade notional."""
        return self.notional * self.price_bp / 1e4


def price_eds(
    trade: EdsTrade,
    market: MarketState,
    fwd_spec,
    config: SolverConfig = SolverConfig(),
    assumptions: dict | None = None,
) -> EdsQuote:
    contract = trade.contract(market.spot)
    density, price = _solve_priced(market, fwd_spec, contract, config)
    metadata = {
        "trade": describe(trade),
        "contract": describe(contract),
        "market": describe(market),
        "fwd_spec": describe(fwd_spec),
        "solver": describe(config),
        "clamp_events": density.clamp_events,
        "assumptions": dict(assumptions or {}),
    }
    return EdsQuote(1e4 * price, density, metadata, trade.notional)


@dataclass(frozen=True)
class LadderRow:
    name: str
    price_bp: float
    applied: Bump
    error: str | None = None


@dataclass(frozen=True)
class LadderResult:
    rows: tuple[LadderRow, ...]
    metadata: dict = field(repr=False, default_factory=dict)

    @property
    def prices_bp(self) -> list[float]:
        return [r.price_bp for r in self.rows]

    @property
    def failed(self) -> bool:
        return any(r.error for r in self.rows)

    def table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rung", "name", "price_bp", "error"])
        for i, r in enumerate(self.rows):
            w.writerow([i, r.name, repr(r.price_bp), r.error or ""])
        return buf.getvalue()

    def record(self) -> dict:
        return {
            "kind": "ladder",
            "metadata": self.metadata,
            "rows": [
                {"rung": i, "name": r.name, "price_bp": _json_float(r.price_bp), "error": r.error,
                 "applied": describe(r.applied)}
                for i, r in enumerate(self.rows)
            ],
        }


def run_ladder(
    trade: EdsTrade,
    market: MarketState,
    fwd_spec,
    ladder: StressLadder,
    config: SolverConfig = SolverConfig(),
    strict: bool = True,
    workers: int = 1,
    assumptions: dict | None = None,
) -> LadderResult:
    """
    Price the base trade (rung 0) and each rung of the ladder.

    Rungs compose cumulatively in listed order unless ``ladder.cumulative``
    is False, in which case each rung is applied to the base alone.
    """
    base_contract = trade.contract(market.spot)
    applied = [Bump(name="base")]
    for rung in ladder.rungs:
        applied.append(applied[-1].then(rung) if ladder.cumulative else rung)

    def one(bump):
        try:
            m, f, c = apply_bump(market, fwd_spec, base_contract, bump, ladder.spot_skew_pivot)
            _, price = _solve_priced(m, f, c, config)
            return LadderRow(bump.name, 1e4 * price, bump)
        except FirstHitError as exc:
            if strict:
                raise ScenarioError(bump.name, exc) from exc
            return LadderRow(bump.name, math.nan, bump, f"{type(exc).__name__}: {exc}")

    rows = tuple(_run_all(one, applied, workers))
    metadata = {
        "trade": describe(trade),
        "market": describe(market),
        "fwd_spec": describe(fwd_spec),
        "solver": describe(config),
        "ladder": describe(ladder),
        "assumptions": dict(assumptions or {}),
    }
    return LadderResult(rows, metadata)


# Commerzbank EDS of 15-Dec-2009: spot 5.945, 70% down barrier, 6 months,
# ATM vol about 52%, vol at the barrier about 80%.
CBK_SPOT = 5.945
CBK_ATM_VOL = 0.52
CBK_BARRIER_VOL = 0.80
CBK_BARRIER_FRACTION = 0.30
CBK_MATURITY = 0.5


def commerzbank_eds_setup(n_steps: int = 500):
    """
    ``(trade, market, fwd_spec, config, assumptions)`` for the Commerzbank EDS
    with every unstated input fixed to a documented default.
    """
    slope = (CBK_BARRIER_VOL - CBK_ATM_VOL) / math.log(CBK_BARRIER_FRACTION)
    surface = ParametricSkew(
        atm_vol=TermStructure.flat(CBK_ATM_VOL),
        slope=TermStructure.flat(slope),
        forward=TermStructure.flat(CBK_SPOT),
    )
    market = MarketState(CBK_SPOT, DiscountCurve.flat(0.0), ProportionalDividends(), surface)
    trade = EdsTrade(1.0, CBK_BARRIER_FRACTION, CBK_MATURITY, "at-hit")
    assumptions = {
        "rates": "zero",
        "dividends": "none",
        "surface": "linear in ln(K/F), flat in maturity, through ATM 52% and 80% at the barrier",
        "slope_unit": "per_log_strike",
        "slope_per_log_strike": slope,
        "day_count": "ACT/365 year fractions",
        "payout": "at-hit",
        "forward_skew": "identity DerivedFromSpot",
        "n_steps": n_steps,
    }
    return trade, market, DerivedFromSpot(), SolverConfig(n_steps), assumptions


def conservative_ladder() -> StressLadder:
    """Conservative bumps in narrative order, composed cumulatively."""
    return StressLadder(
        rungs=(
            Bump("spot skew x0.8", spot_skew_factor=0.8),
            Bump("fwd skew x2", fwd_skew_factor=2.0),
            Bump("barrier vol 86%, fwd vol -5%", barrier_vol_shift=0.06, fwd_vol_shift=-0.05),
        ),
        cumulative=True,
        spot_skew_pivot="barrier",
    )


def flat_market(spot: float, vol: float, slope: float = 0.0, rate: float = 0.0,
                dividend_yield: float = 0.0, horizon: float = 100.0) -> MarketState:
    """Convenience market with a flat-in-maturity parametric skew."""
    discount = DiscountCurve.flat(rate, horizon)
    divs = ProportionalDividends.flat(dividend_yield)
    base = MarketState(spot, discount, divs)
    if rate == 0.0 and dividend_yield == 0.0:
        fwd = TermStructure.flat(spot)
    else:
        ts = np.linspace(0.0, min(horizon, 30.0), 601)
        fwd = TermStructure(ts, base.forward(spot, 0.0, ts))
    surface = ParametricSkew(TermStructure.flat(vol), TermStructure.flat(slope), fwd)
    return base.replace(surface=surface)
