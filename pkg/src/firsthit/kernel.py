"""
Black-Scholes building blocks and the skew-corrected European digital put.

All prices are undiscounted forward prices multiplied by ``df``.  Skew slopes
are carried internally as dsigma/d(ln K); use :func:`to_log_strike_slope` to
convert other conventions on ingestion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from firsthit.errors import ArbitrageError, DegenerateDiffusionError, InputDomainError

__all__ = [
    "BsQuote",
    "SLOPE_UNITS",
    "norm_cdf",
    "norm_pdf",
    "d1_d2",
    "bs_put",
    "bs_put_vega",
    "digital_put_flat",
    "digital_call_flat",
    "eur_dip",
    "eur_dip_array",
    "to_log_strike_slope",
]

SLOPE_UNITS = ("per_log_strike", "per_strike", "per_moneyness")

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class BsQuote:
    forward: float
    strike: float
    vol: float
    ttm: float
    df: float = 1.0

    def __post_init__(self):
        if not (self.forward > 0.0 and math.isfinite(self.forward)):
            raise InputDomainError(f"forward must be positive, got {self.forward!r}")
        if not (self.strike > 0.0 and math.isfinite(self.strike)):
            raise InputDomainError(f"strike must be positive, got {self.strike!r}")
        if not self.vol >= 0.0:
            raise InputDomainError(f"vol must be non-negative, got {self.vol!r}")
        if not self.ttm >= 0.0:
            raise InputDomainError(f"ttm must be non-negative, got {self.ttm!r}")
        if not 0.0 < self.df <= 1.0:
            raise InputDomainError(f"df must lie in (0, 1], got {self.df!r}")

    @property
    def total_vol(self) -> float:
        return self.vol * math.sqrt(self.ttm)

    @property
    def degenerate(self) -> bool:
        return self.total_vol == 0.0


def norm_cdf(x):
    """Standard normal CDF (Cephes ``ndtr``, absolute error well below 1e-12)."""
    out = ndtr(x)
    return float(out) if np.ndim(out) == 0 else out


def norm_pdf(x):
    out = _INV_SQRT_2PI * np.exp(-0.5 * np.square(x))
    return float(out) if np.ndim(out) == 0 else out


def d1_d2(forward: float, strike: float, vol: float, ttm: float) -> tuple[float, float]:
    if forward <= 0.0 or strike <= 0.0:
        raise InputDomainError("forward and strike must be positive")
    if vol < 0.0 or ttm < 0.0:
        raise InputDomainError("vol and ttm must be non-negative")
    total_vol = vol * math.sqrt(ttm)
    if total_vol == 0.0:
        raise DegenerateDiffusionError("degenerate diffusion: vol * sqrt(ttm) == 0")
    d1 = (math.log(forward / strike) + 0.5 * total_vol * total_vol) / total_vol
    return d1, d1 - total_vol


def bs_put(q: BsQuote) -> float:
    """Black-Scholes put on the forward; discounted intrinsic when degenerate."""
    if q.degenerate:
        return q.df * max(q.strike - q.forward, 0.0)
    d1, d2 = d1_d2(q.forward, q.strike, q.vol, q.ttm)
    price = q.df * (q.strike * norm_cdf(-d2) - q.forward * norm_cdf(-d1))
    return min(max(price, 0.0), q.df * q.strike)


def bs_put_vega(q: BsQuote) -> float:
    """dPut/dsigma.  Returns 0.0 for a degenerate quote (check ``q.degenerate``)."""
    if q.degenerate:
        return 0.0
    d1, _ = d1_d2(q.forward, q.strike, q.vol, q.ttm)
    return q.df * q.forward * norm_pdf(d1) * math.sqrt(q.ttm)


def digital_put_flat(q: BsQuote) -> float:
    """df * N(-d2): the strike derivative of the put with the vol held fixed."""
    if q.degenerate:
        return q.df if q.forward < q.strike else 0.0
    _, d2 = d1_d2(q.forward, q.strike, q.vol, q.ttm)
    return q.df * norm_cdf(-d2)


def digital_call_flat(q: BsQuote) -> float:
    if q.degenerate:
        return q.df if q.forward > q.strike else 0.0
    _, d2 = d1_d2(q.forward, q.strike, q.vol, q.ttm)
    return q.df * norm_cdf(d2)


def to_log_strike_slope(
    value: float, unit: str, strike: float, reference: float | None = None
) -> float:
    """
    Convert a skew slope to dsigma/d(ln K) at ``strike``.

    ``per_strike`` is dsigma/dK, ``per_moneyness`` is dsigma/d(K/reference).
    """
    if unit == "per_log_strike":
        return value
    if unit == "per_strike":
        return value * strike
    if unit == "per_moneyness":
        if reference is None or reference <= 0.0:
            raise InputDomainError("per_moneyness slope needs a positive reference level")
        return value * strike / reference
    raise InputDomainError(f"unknown slope unit {unit!r}; expected one of {SLOPE_UNITS}")


def eur_dip_array(forward, strike, vol, ttm, slope, df=1.0):
    """
    Vectorised skew-corrected European digital put.

    price = df * N(-d2) + vega * dsigma/dK,  with dsigma/dK = slope / strike.

    Inputs broadcast against each other.  Entries with vol * sqrt(ttm) == 0
    fall back to the step function ``df * 1{F < K}``.  No range check is
    done here; see :func:`eur_dip`.
    """
    forward, strike, vol, ttm, slope, df = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (forward, strike, vol, ttm, slope, df))
    )
    total_vol = vol * np.sqrt(ttm)
    live = total_vol > 0.0
    safe_tv = np.where(live, total_vol, 1.0)
    d1 = (np.log(forward / strike) + 0.5 * safe_tv * safe_tv) / safe_tv
    d2 = d1 - safe_tv
    vega = df * forward * norm_pdf(d1) * np.sqrt(ttm)
    price = df * ndtr(-d2) + vega * slope / strike
    step = np.where(forward < strike, df, 0.0)
    return np.where(live, price, step)


def eur_dip(q: BsQuote, slope: float = 0.0) -> float:
    """
    European digital put including the skew (vega) correction.

    Parameters
    ----------
    q : BsQuote
        Forward, strike, Black-Scholes vol at the strike, time to maturity, df.
    slope : float
        dsigma/d(ln K) at the strike.  A slope of ``s`` per absolute strike
        corresponds to ``s * q.strike`` here.

    Raises
    ------
    ArbitrageError
        If the corrected price leaves ``[0, df]``.
    """
    if q.degenerate:
        return digital_put_flat(q)
    price = float(eur_dip_array(q.forward, q.strike, q.vol, q.ttm, slope, q.df))
    if price < 0.0 or price > q.df:
        raise ArbitrageError(
            "arbitrage-violating skew input",
            forward=q.forward, strike=q.strike, vol=q.vol, ttm=q.ttm, slope=slope, df=q.df,
            price=price,
        )
    return price
