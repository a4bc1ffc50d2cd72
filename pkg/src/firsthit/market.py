"""
Market inputs: discount curve, dividend models, spot vol surfaces and the
forward-skew specification that fixes the hedge-unwind conditions at the
barrier.

Every object here is an immutable dataclass holding plain floats/tuples, so
:func:`firsthit.records.describe` can dump it to JSON for run metadata.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from firsthit.errors import ExtrapolationError, InputDomainError, NegativeForwardError

__all__ = [
    "TermStructure",
    "DiscountCurve",
    "ProportionalDividends",
    "CashDividends",
    "ParametricSkew",
    "StrikeGrid",
    "BumpedSurface",
    "MarketState",
    "DerivedFromSpot",
    "ExplicitTable",
    "DEFAULT_VOL_FLOOR",
    "discount",
    "forward",
    "spot_vol",
    "spot_slope",
    "barrier_conditions",
]

DEFAULT_VOL_FLOOR = 0.01
_SLOPE_FD_STEP = 1e-3
_T_TOL = 1e-12


def _floats(values) -> tuple[float, ...]:
    return tuple(float(v) for v in np.ravel(values))


def _strictly_increasing(xs) -> bool:
    return all(b > a for a, b in zip(xs, xs[1:]))


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class TermStructure:
    """Piecewise-linear function of maturity with flat extrapolation."""

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "times", _floats(self.times))
        object.__setattr__(self, "values", _floats(self.values))
        if len(self.times) == 0 or len(self.times) != len(self.values):
            raise InputDomainError("term structure needs matching non-empty times/values")
        if not _strictly_increasing(self.times):
            raise InputDomainError("term structure times must be strictly increasing")

    @classmethod
    def flat(cls, value: float) -> "TermStructure":
        return cls((1.0,), (value,))

    def __call__(self, t):
        return _out(np.interp(t, self.times, self.values))

    def scaled(self, factor: float) -> "TermStructure":
        return TermStructure(self.times, tuple(factor * v for v in self.values))


@dataclass(frozen=True)
class DiscountCurve:
    """Discount factors at node times, log-linear in between, no extrapolation."""

    times: tuple[float, ...]
    dfs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "times", _floats(self.times))
        object.__setattr__(self, "dfs", _floats(self.dfs))
        if len(self.times) < 2 or len(self.times) != len(self.dfs):
            raise InputDomainError("discount curve needs at least two (t, df) nodes")
        if self.times[0] != 0.0 or self.dfs[0] != 1.0:
            raise InputDomainError("discount curve must start at (0, 1)")
        if not _strictly_increasing(self.times):
            raise InputDomainError("discount curve times must be strictly increasing")
        if min(self.dfs) <= 0.0:
            raise InputDomainError("discount factors must be positive")

    @classmethod
    def flat(cls, rate: float = 0.0, horizon: float = 100.0) -> "DiscountCurve":
        return cls((0.0, horizon), (1.0, math.exp(-rate * horizon)))

    @property
    def horizon(self) -> float:
        return self.times[-1]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < -_T_TOL) or np.any(t > self.horizon + _T_TOL):
            raise ExtrapolationError(
                f"discount curve queried outside [0, {self.horizon}]"
            )
        log_df = np.interp(t, self.times, np.log(self.dfs))
        return _out(np.exp(log_df))


@dataclass(frozen=True)
class ProportionalDividends:
    """
    Continuous dividend yield, piecewise constant.

    ``yields[i]`` applies up to ``breaks[i]``; the last yield applies beyond
    the last break.
    """

    breaks: tuple[float, ...] = ()
    yields: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "breaks", _floats(self.breaks))
        object.__setattr__(self, "yields", _floats(self.yields))
        if len(self.yields) != len(self.breaks) + 1:
            raise InputDomainError("need exactly one more yield than break times")
        if not _strictly_increasing(self.breaks) or (self.breaks and self.breaks[0] <= 0):
            raise InputDomainError("yield break times must be positive and increasing")

    @classmethod
    def flat(cls, q: float) -> "ProportionalDividends":
        return cls((), (q,))

    def integrated(self, t):
        """Cumulative yield int_0^t q(s) ds."""
        t = np.asarray(t, dtype=float)
        edges = np.concatenate(([0.0], self.breaks))
        total = np.zeros_like(t)
        for i, q in enumerate(self.yields):
            lo = edges[i]
            hi = edges[i + 1] if i + 1 < len(edges) else np.inf
            total = total + q * np.clip(np.minimum(t, hi) - lo, 0.0, None)
        return total


@dataclass(frozen=True)
class CashDividends:
    """Fixed cash amounts paid at known times, independent of the spot level."""

    payments: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        pays = tuple((float(t), float(a)) for t, a in self.payments)
        object.__setattr__(self, "payments", pays)
        times = [t for t, _ in pays]
        if not _strictly_increasing(times):
            raise InputDomainError("dividend payment times must be strictly increasing")
        if any(a < 0.0 for _, a in pays) or any(t <= 0.0 for t in times):
            raise InputDomainError("dividend amounts must be >= 0 and times > 0")


DividendModel = Union[ProportionalDividends, CashDividends]


@dataclass(frozen=True)
class ParametricSkew:
    """
    vol(K, T) = max(atm_vol(T) + slope(T) * ln(K / forward(T)), vol_floor)

    ``slope`` is dsigma/d(ln K); ``forward`` is today's forward term structure
    used to measure moneyness.
    """

    atm_vol: TermStructure
    slope: TermStructure
    forward: TermStructure
    vol_floor: float = DEFAULT_VOL_FLOOR

    def __post_init__(self):
        if self.vol_floor <= 0.0:
            raise InputDomainError("vol_floor must be positive")

    def _raw(self, strike, T):
        return self.atm_vol(T) + self.slope(T) * np.log(strike / self.forward(T))

    def vol(self, strike, T):
        return np.maximum(self._raw(strike, T), self.vol_floor)

    def slope_at(self, strike, T):
        raw = self._raw(strike, T)
        return np.where(raw < self.vol_floor, 0.0, self.slope(T) + 0.0 * raw)

    def atm(self, T):
        return np.maximum(self.atm_vol(T), self.vol_floor)


@dataclass(frozen=True)
class StrikeGrid:
    """Vol matrix (maturities x strikes), bilinear in (ln K, T), flat outside."""

    strikes: tuple[float, ...]
    maturities: tuple[float, ...]
    vols: tuple[tuple[float, ...], ...]
    forward: TermStructure | None = None
    vol_floor: float = DEFAULT_VOL_FLOOR
    _interp: RegularGridInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "strikes", _floats(self.strikes))
        object.__setattr__(self, "maturities", _floats(self.maturities))
        mat = np.asarray(self.vols, dtype=float)
        if mat.shape != (len(self.maturities), len(self.strikes)):
            raise InputDomainError(
                f"vols must have shape (n_maturities, n_strikes), got {mat.shape}"
            )
        if not (_strictly_increasing(self.strikes) and _strictly_increasing(self.maturities)):
            raise InputDomainError("grid strikes and maturities must be strictly increasing")
        if min(self.strikes) <= 0.0 or min(self.maturities) <= 0.0:
            raise InputDomainError("grid strikes and maturities must be positive")
        object.__setattr__(self, "vols", tuple(tuple(float(v) for v in row) for row in mat))
        axes = (np.array(self.maturities), np.log(self.strikes))
        # a single maturity or strike collapses that axis to a constant
        if len(self.maturities) == 1:
            axes = (np.array([0.0, 1.0]), axes[1])
            mat = np.vstack([mat, mat])
        if len(self.strikes) == 1:
            axes = (axes[0], np.array([0.0, 1.0]))
            mat = np.hstack([mat, mat])
        object.__setattr__(self, "_interp", RegularGridInterpolator(axes, mat))

    def _raw(self, strike, T):
        strike, T = np.broadcast_arrays(np.asarray(strike, float), np.asarray(T, float))
        axes = self._interp.grid
        t = np.clip(T, axes[0][0], axes[0][-1])
        x = np.clip(np.log(strike), axes[1][0], axes[1][-1])
        pts = np.stack([t.ravel(), x.ravel()], axis=-1)
        return self._interp(pts).reshape(t.shape)

    def vol(self, strike, T):
        return np.maximum(self._raw(strike, T), self.vol_floor)

    def slope_at(self, strike, T):
        h = _SLOPE_FD_STEP
        up = self.vol(strike * math.exp(h), T)
        dn = self.vol(strike * math.exp(-h), T)
        return (up - dn) / (2.0 * h)

    def atm(self, T):
        if self.forward is None:
            raise InputDomainError("StrikeGrid needs a forward term structure for ATM vols")
        return self.vol(self.forward(T), T)


@dataclass(frozen=True)
class BumpedSurface:
    """
    Skew rotation and parallel shift of a base surface.

    vol(K, T) = pivot_vol(T) + skew_factor * (base(K, T) - pivot_vol(T)) + vol_shift

    The pivot is the ATM vol when ``pivot_strike`` is None, otherwise the base
    vol at ``pivot_strike`` (which keeps that strike's vol unchanged).
    """

    base: "Surface"
    skew_factor: float = 1.0
    vol_shift: float = 0.0
    pivot_strike: float | None = None

    def __post_init__(self):
        if self.skew_factor < 0.0:
            raise InputDomainError("skew_factor must be >= 0")

    @property
    def vol_floor(self) -> float:
        return self.base.vol_floor

    @property
    def forward(self):
        return self.base.forward

    def _pivot(self, T):
        if self.pivot_strike is None:
            return self.base.atm(T)
        return self.base.vol(self.pivot_strike, T)

    def _raw(self, strike, T):
        pv = self._pivot(T)
        return pv + self.skew_factor * (self.base.vol(strike, T) - pv) + self.vol_shift

    def vol(self, strike, T):
        return np.maximum(self._raw(strike, T), self.vol_floor)

    def slope_at(self, strike, T):
        raw = self._raw(strike, T)
        return np.where(raw < self.vol_floor, 0.0, self.skew_factor * self.base.slope_at(strike, T))

    def atm(self, T):
        if self.pivot_strike is None:
            return np.maximum(self.base.atm(T) + self.vol_shift, self.vol_floor)
        return self.vol(self.forward(T), T)


Surface = Union[ParametricSkew, StrikeGrid, BumpedSurface]


@dataclass(frozen=True)
class MarketState:
    spot: float
    discount: DiscountCurve
    dividends: DividendModel = field(default_factory=ProportionalDividends)
    surface: Surface | None = None

    def __post_init__(self):
        if not self.spot > 0.0:
            raise InputDomainError(f"spot must be positive, got {self.spot!r}")

    def forward(self, spot_at_t, t, T):
        return forward(self, spot_at_t, t, T)

    def replace(self, **changes) -> "MarketState":
        return dataclasses.replace(self, **changes)


def discount(curve: DiscountCurve, t):
    return curve(t)


def forward(market: MarketState, spot_at_t, t, T):
    """
    Forward for delivery at ``T`` seen from time ``t`` given spot ``spot_at_t``.

    Proportional dividends scale with the spot; cash dividends paid in
    ``(t, T]`` are subtracted at their present value.  Broadcasts over arrays.
    """
    spot_at_t, t, T = np.broadcast_arrays(*(np.asarray(a, float) for a in (spot_at_t, t, T)))
    if np.any(spot_at_t <= 0.0):
        raise InputDomainError("spot_at_t must be positive")
    if np.any(T < t):
        raise InputDomainError("forward needs t <= T")
    df_t = market.discount(t)
    df_T = market.discount(T)
    divs = market.dividends
    if isinstance(divs, ProportionalDividends):
        carry = np.exp(-(divs.integrated(T) - divs.integrated(t)))
        return _out(spot_at_t * carry * df_t / df_T)
    pv = np.zeros_like(spot_at_t)
    for ti, amount in divs.payments:
        if ti > market.discount.horizon:
            continue
        paid = (t < ti) & (ti <= T)
        pv = pv + np.where(paid, amount * market.discount(ti) / df_t, 0.0)
    net = spot_at_t - pv
    if np.any(net <= 0.0):
        raise NegativeForwardError("cash dividends exceed the spot: negative forward")
    return _out(net * df_t / df_T)


def _check_surface_args(strike, T):
    if np.any(np.asarray(strike) <= 0.0):
        raise InputDomainError("strike must be positive")
    if np.any(np.asarray(T) <= 0.0):
        raise InputDomainError("maturity must be positive")


def spot_vol(surface: Surface, strike, T):
    _check_surface_args(strike, T)
    return _out(surface.vol(strike, T))


def spot_slope(surface: Surface, strike, T):
    """dsigma/d(ln K) of today's surface; zero where the vol floor binds."""
    _check_surface_args(strike, T)
    return _out(surface.slope_at(strike, T))


@dataclass(frozen=True)
class DerivedFromSpot:
    """
    Hit-time conditions read off today's surface at the barrier strike and the
    remaining maturity, then scaled/shifted.

    ``surface`` pins the reference surface; when None the market's surface is
    used.  Scenario code pins it so spot-surface bumps leave the forward skew
    untouched.
    """

    vol_factor: float = 1.0
    skew_factor: float = 1.0
    vol_shift: float = 0.0
    surface: Surface | None = None

    def __post_init__(self):
        if self.vol_factor < 0.0 or self.skew_factor < 0.0:
            raise InputDomainError("forward vol/skew factors must be >= 0")


@dataclass(frozen=True)
class ExplicitTable:
    """
    Trader-supplied hit-time conditions on a (hit time, remaining maturity)
    grid, linear in both directions and flat outside the grid.
    """

    hit_times: tuple[float, ...]
    remaining: tuple[float, ...]
    vols: tuple[tuple[float, ...], ...]
    slopes: tuple[tuple[float, ...], ...]
    vol_floor: float = DEFAULT_VOL_FLOOR
    _interp: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "hit_times", _floats(self.hit_times))
        object.__setattr__(self, "remaining", _floats(self.remaining))
        shape = (len(self.hit_times), len(self.remaining))
        vols = np.asarray(self.vols, float)
        slopes = np.asarray(self.slopes, float)
        if vols.shape != shape or slopes.shape != shape:
            raise InputDomainError(f"table values must have shape {shape}")
        if not (_strictly_increasing(self.hit_times) and _strictly_increasing(self.remaining)):
            raise InputDomainError("table axes must be strictly increasing")
        if np.any(vols <= 0.0):
            raise InputDomainError("table vols must be positive")
        object.__setattr__(self, "vols", tuple(map(tuple, vols.tolist())))
        object.__setattr__(self, "slopes", tuple(map(tuple, slopes.tolist())))
        axes = [np.array(self.hit_times), np.array(self.remaining)]
        for i in range(2):
            if len(axes[i]) == 1:
                axes[i] = np.array([axes[i][0], axes[i][0] + 1.0])
                vols = np.repeat(vols, 2, axis=i)
                slopes = np.repeat(slopes, 2, axis=i)
        object.__setattr__(
            self,
            "_interp",
            (RegularGridInterpolator(axes, vols), RegularGridInterpolator(axes, slopes)),
        )

    @classmethod
    def sample(cls, spec, market: MarketState, barrier: float, hit_times, remaining):
        """Tabulate another spec on a grid (round-trip / export helper)."""
        tau, rem = np.meshgrid(np.asarray(hit_times, float), np.asarray(remaining, float),
                               indexing="ij")
        vols, slopes = barrier_conditions(spec, market, barrier, tau, rem)
        floor = getattr(spec, "vol_floor", None) or _surface_of(spec, market).vol_floor
        return cls(hit_times, remaining, vols, slopes, vol_floor=floor)

    def lookup(self, tau, rem):
        tau, rem = np.broadcast_arrays(np.asarray(tau, float), np.asarray(rem, float))
        vol_i, slope_i = self._interp
        g = vol_i.grid
        pts = np.stack(
            [np.clip(tau, g[0][0], g[0][-1]).ravel(), np.clip(rem, g[1][0], g[1][-1]).ravel()],
            axis=-1,
        )
        return vol_i(pts).reshape(tau.shape), slope_i(pts).reshape(tau.shape)


ForwardSkewSpec = Union[DerivedFromSpot, ExplicitTable]


def _surface_of(spec, market):
    surface = getattr(spec, "surface", None) or market.surface
    if surface is None:
        raise InputDomainError("market has no vol surface")
    return surface


def barrier_conditions(spec: ForwardSkewSpec, market: MarketState, barrier: float, tau, rem):
    """
    Forward vol and forward ATM slope (per ln K) prevailing when the barrier
    is first hit at ``tau`` with ``rem`` years left.  Broadcasts over arrays.
    """
    tau = np.asarray(tau, float)
    rem = np.asarray(rem, float)
    if np.any(tau < 0.0) or np.any(rem <= 0.0):
        raise InputDomainError("barrier conditions need tau >= 0 and rem > 0")
    if isinstance(spec, ExplicitTable):
        vol, slope = spec.lookup(tau, rem)
        floor = spec.vol_floor
    else:
        surface = _surface_of(spec, market)
        floor = surface.vol_floor
        raw = spec.vol_factor * surface.vol(barrier, rem) + spec.vol_shift
        if np.any(raw <= 0.0):
            raise InputDomainError("forward vol is non-positive after factor/shift")
        vol = raw
        slope = spec.skew_factor * surface.slope_at(barrier, rem)
    vol, slope = np.broadcast_arrays(np.maximum(vol, floor), slope)
    return _out(vol), _out(np.array(slope, dtype=float))
