"""
First-hitting-time density from European digital put prices.

The terminal digital seen today decomposes over the first hitting time:

    EurDIP_0(T) = int_0^T rho(tau) * EurDIP_tau(F_tau(T), B, T - tau) dtau

where the inner digital is struck at the barrier and priced with the forward
vol and forward skew prevailing at the hit.  On a uniform grid with
left-endpoint weights the last term isolates rho(T_n), so the system is
solved forward in time one step at a time.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from firsthit.errors import (
    ArbitrageError,
    InputDomainError,
    IntegrityError,
    NegativeDensityError,
    NonInvertibleKernelError,
)
from firsthit.kernel import eur_dip_array, norm_cdf
from firsthit.market import (
    DiscountCurve,
    ForwardSkewSpec,
    MarketState,
    barrier_conditions,
    forward,
)

__all__ = [
    "BarrierContract",
    "SolverConfig",
    "HittingDensity",
    "solve_density",
    "am_dip_price",
    "am_dip_direct_flat",
    "density_csv",
    "write_density_csv",
    "read_density_csv",
]

Payout = Literal["at-hit", "at-maturity"]
CUMULATIVE_TOL = 1e-8
# negatives this small (in probability mass) are rounding noise, not model output
_ROUNDOFF_MASS = 1e-14


@dataclass(frozen=True)
class BarrierContract:
    barrier: float
    maturity: float
    payout: Payout = "at-maturity"
    notional: float = 1.0

    def __post_init__(self):
        if not self.barrier > 0.0:
            raise InputDomainError("barrier must be positive")
        if not self.maturity > 0.0:
            raise InputDomainError("maturity must be positive")
        if self.payout not in ("at-hit", "at-maturity"):
            raise InputDomainError(f"unknown payout {self.payout!r}")


@dataclass(frozen=True)
class SolverConfig:
    n_steps: int = 500
    negativity_policy: Literal["error", "clamp"] = "error"
    kernel_floor: float = 1e-6

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise InputDomainError("n_steps must be an integer >= 2")
        if self.negativity_policy not in ("error", "clamp"):
            raise InputDomainError(f"unknown negativity policy {self.negativity_policy!r}")
        if self.kernel_floor <= 0.0:
            raise InputDomainError("kernel_floor must be positive")


@dataclass(frozen=True)
class HittingDensity:
    """rho(T_n) per unit time on T_n = n * dt, n = 0..N-1."""

    dt: float
    rho: np.ndarray = field(repr=False)
    clamp_events: int = 0

    @property
    def n_steps(self) -> int:
        return len(self.rho)

    @property
    def maturity(self) -> float:
        return self.dt * self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps)

    @property
    def cell_mass(self) -> np.ndarray:
        return self.dt * self.rho

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.cell_mass)

    @property
    def total(self) -> float:
        return float(self.cumulative[-1])


def _lhs_digitals(market: MarketState, barrier: float, maturities: np.ndarray) -> np.ndarray:
    surface = market.surface
    fwd = forward(market, market.spot, 0.0, maturities)
    vol = surface.vol(barrier, maturities)
    slope = surface.slope_at(barrier, maturities)
    return eur_dip_array(fwd, barrier, vol, maturities, slope)


def _kernel_matrix(market, fwd_spec, barrier, dt, n):
    """K[i, k] = unwind value at T_{i+1} of a hit at T_k (k <= i), discount-free."""
    idx = np.arange(n)
    tau = dt * idx[None, :]
    T = dt * (idx[:, None] + 1)
    lower = idx[None, :] <= idx[:, None]
    # upper triangle is never used; give it a harmless positive maturity
    rem = np.where(lower, T - tau, dt)
    T_eval = np.where(lower, T, tau + dt)
    fwd = forward(market, barrier, tau + 0.0 * T, T_eval)
    vol, slope = barrier_conditions(fwd_spec, market, barrier, tau + 0.0 * T, rem)
    kern = eur_dip_array(fwd, barrier, vol, rem, slope)
    return np.where(lower, kern, 0.0), fwd, vol, slope


def solve_density(
    market: MarketState,
    fwd_spec: ForwardSkewSpec,
    contract: BarrierContract,
    config: SolverConfig = SolverConfig(),
) -> HittingDensity:
    """
    Solve the discretised hitting-time integral equation for rho.

    Raises
    ------
    ArbitrageError
        A today's digital or an unwind value lies outside [0, 1].
    NonInvertibleKernelError
        The diagonal unwind value is below ``config.kernel_floor``.
    NegativeDensityError
        rho(T_n) < 0 under the ``"error"`` negativity policy.
    """
    B = contract.barrier
    if not B < market.spot:
        raise InputDomainError("barrier must lie below the spot")
    n = int(config.n_steps)
    dt = contract.maturity / n
    T_grid = dt * np.arange(1, n + 1)

    lhs = _lhs_digitals(market, B, T_grid)
    bad = np.flatnonzero((lhs < 0.0) | (lhs > 1.0))
    if bad.size:
        i = int(bad[0])
        raise ArbitrageError(
            "today's skewed digital outside [0, 1]", maturity=float(T_grid[i]),
            price=float(lhs[i]),
        )

    kern, fwd, vol, slope = _kernel_matrix(market, fwd_spec, B, dt, n)
    lower = np.tri(n, dtype=bool)
    bad = np.argwhere(lower & ((kern < 0.0) | (kern > 1.0)))
    if bad.size:
        i, k = map(int, bad[0])
        raise ArbitrageError(
            "arbitrage-violating forward skew: unwind value outside [0, 1]",
            hit_time=k * dt, maturity=(i + 1) * dt, forward=float(fwd[i, k]),
            vol=float(vol[i, k]), slope=float(slope[i, k]), price=float(kern[i, k]),
        )
    diag = np.diagonal(kern)
    bad = np.flatnonzero(diag < config.kernel_floor)
    if bad.size:
        i = int(bad[0])
        raise NonInvertibleKernelError(
            "non-invertible kernel / arbitrage-violating forward skew",
            step=i, unwind_value=float(diag[i]), kernel_floor=config.kernel_floor,
        )

    rho = np.zeros(n)
    clamps = 0
    for i in range(n):
        resid = lhs[i] - dt * np.dot(kern[i, :i], rho[:i])
        value = resid / (dt * diag[i])
        if value < 0.0:
            if value * dt >= -_ROUNDOFF_MASS:
                value = 0.0
            elif config.negativity_policy == "error":
                raise NegativeDensityError(i, float(value))
            else:
                value = 0.0
                clamps += 1
        rho[i] = value

    density = HittingDensity(dt=dt, rho=rho, clamp_events=clamps)
    if density.total > 1.0 + CUMULATIVE_TOL:
        raise IntegrityError(f"cumulative hitting probability {density.total!r} exceeds 1")
    return density


def am_dip_price(
    density: HittingDensity, contract: BarrierContract, discount_curve: DiscountCurve
) -> float:
    """
    Price per unit notional of the American digital put.

    At maturity: Df(T) * sum(dt * rho).  At hit: each cell's mass is
    discounted from its midpoint.
    """
    total = density.total
    if total > 1.0 + CUMULATIVE_TOL:
        raise IntegrityError(f"cumulative hitting probability {total!r} exceeds 1")
    if contract.payout == "at-maturity":
        return float(discount_curve(contract.maturity)) * total
    mid = density.times + 0.5 * density.dt
    return float(np.dot(density.cell_mass, discount_curve(mid)))


def am_dip_direct_flat(S: float, B: float, sigma: float, drift: float, T: float) -> float:
    """
    Probability that geometric Brownian motion started at ``S`` touches
    ``B < S`` before ``T`` (reflection principle).  ``drift`` is the drift of
    dS/S, e.g. r - q.
    """
    if S <= 0.0 or B <= 0.0:
        raise InputDomainError("S and B must be positive")
    if B >= S:
        return 1.0
    if T <= 0.0:
        return 0.0
    if sigma <= 0.0:
        raise InputDomainError("sigma must be positive")
    b = math.log(B / S)
    m = drift - 0.5 * sigma * sigma
    sd = sigma * math.sqrt(T)
    first = norm_cdf((b - m * T) / sd)
    if m == 0.0:
        return min(2.0 * first, 1.0)
    expo = 2.0 * m * b / (sigma * sigma)
    second = math.exp(expo) * norm_cdf((b + m * T) / sd) if expo < 700 else math.inf
    return min(first + second, 1.0)


def _format_float(x: float) -> str:
    return repr(float(x))


def density_csv(density: HittingDensity, metadata: dict | None = None) -> str:
    """
    ``t, rho, cumulative`` rows as text.  Metadata goes in a leading
    ``# {json}`` comment line.
    """
    meta = {"dt": density.dt, "n_steps": density.n_steps, "clamp_events": density.clamp_events}
    meta.update(metadata or {})
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "rho", "cumulative"])
    for t, r, c in zip(density.times, density.rho, density.cumulative):
        writer.writerow([_format_float(t), _format_float(r), _format_float(c)])
    return buf.getvalue()


def write_density_csv(density: HittingDensity, path, metadata: dict | None = None) -> None:
    Path(path).write_text(density_csv(density, metadata))


def read_density_csv(path) -> tuple[HittingDensity, dict]:
    lines = Path(path).read_text().splitlines()
    meta = json.loads(lines[0][2:]) if lines and lines[0].startswith("# ") else {}
    body = [ln for ln in lines if not ln.startswith("#")]
    rows = list(csv.DictReader(body))
    rho = np.array([float(r["rho"]) for r in rows])
    dt = meta.get("dt")
    if dt is None:
        dt = float(rows[1]["t"]) - float(rows[0]["t"])
    clamps = int(meta.get("clamp_events", 0))
    return HittingDensity(dt=float(dt), rho=rho, clamp_events=clamps), meta
