"""
Monte Carlo first-passage estimates under flat volatility.

Paths are generated in fixed-size blocks; block ``j`` draws from
``SeedSequence(seed, spawn_key=(j,))``, so path ``i`` depends only on
``(seed, i)`` and the result does not depend on how blocks are spread over
workers.  Block partial sums are combined in block order.

With ``bridge=True`` each path contributes its conditional hit probability
1 - prod(1 - p_i), where p_i is the Brownian-bridge probability of crossing
inside step i.  That is unbiased for continuous monitoring under GBM.

Reported standard errors are floored at ``1 / n_paths``: an n-path estimate
cannot resolve events rarer than that, and the sample variance of such an
event is driven by at most a handful of paths.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from firsthit.errors import InputDomainError
from firsthit.market import CashDividends, DiscountCurve, MarketState, ProportionalDividends

__all__ = ["McConfig", "McResult", "mc_first_passage", "BLOCK_SIZE"]

BLOCK_SIZE = 1 << 15


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 1_000_000
    n_steps_per_year: int = 50
    seed: int = 20091215
    bridge: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.n_paths < 1000:
            raise InputDomainError("n_paths must be >= 1000")
        if self.n_steps_per_year < 50:
            raise InputDomainError("n_steps_per_year must be >= 50")
        if not 0 <= self.seed < 2**64:
            raise InputDomainError("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise InputDomainError("workers must be >= 1")


@dataclass(frozen=True)
class McResult:
    hit_probability: float
    standard_error: float
    hit_time_histogram: np.ndarray = field(repr=False)
    cell_standard_error: np.ndarray = field(repr=False)
    cell_dt: float = 0.0
    n_paths: int = 0


@dataclass(frozen=True)
class _Plan:
    S: float
    B: float
    vol: float
    dt: float
    drift: np.ndarray  # log growth of the forward per step, before the -vol^2/2 term
    cash: np.ndarray  # cash dividend paid at the end of each step
    steps_per_cell: int
    n_cells: int
    bridge: bool


def _step_drifts(S, rate_curve, dividends, T, n_steps):
    times = np.linspace(0.0, T, n_steps + 1)
    market = MarketState(S, rate_curve, ProportionalDividends())
    carry = market.forward(1.0, times[:-1], times[1:])
    if isinstance(dividends, ProportionalDividends):
        q = dividends.integrated(times)
        carry = carry * np.exp(-(q[1:] - q[:-1]))
        cash = np.zeros(n_steps)
    else:
        cash = np.zeros(n_steps)
        for t, amount in dividends.payments:
            if t <= T:
                # paid at the end of the step containing t
                cash[min(max(math.ceil(t / T * n_steps) - 1, 0), n_steps - 1)] += amount
    return np.log(carry), cash


def _simulate_block(plan: _Plan, seed: int, block: int, n: int):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))
    lb = math.log(plan.B)
    x = np.full(n, math.log(plan.S))
    surv = np.ones(n)
    sd = plan.vol * math.sqrt(plan.dt)
    var = sd * sd
    cell_sum = np.zeros(plan.n_cells)
    cell_sq = np.zeros(plan.n_cells)
    cell_mass = np.zeros(n)
    for i in range(len(plan.drift)):
        z = rng.standard_normal(n)
        x_new = x + plan.drift[i] - 0.5 * var + sd * z
        below = x_new <= lb
        if plan.bridge and var > 0.0:
            a = np.maximum(x - lb, 0.0)
            b = np.maximum(x_new - lb, 0.0)
            p = np.where(below, 1.0, np.exp(-2.0 * a * b / var))
        else:
            p = below.astype(float)
        if plan.cash[i] > 0.0:
            s_after = np.exp(x_new) - plan.cash[i]
            dropped = s_after <= plan.B
            p = np.where(dropped, 1.0, p)
            x_new = np.log(np.maximum(s_after, plan.B * 1e-12))
        cell_mass += surv * p
        surv = surv * (1.0 - p)
        x = x_new
        if (i + 1) % plan.steps_per_cell == 0:
            c = (i + 1) // plan.steps_per_cell - 1
            cell_sum[c] = cell_mass.sum()
            cell_sq[c] = np.dot(cell_mass, cell_mass)
            cell_mass[:] = 0.0
    hit = 1.0 - surv
    return hit.sum(), np.dot(hit, hit), cell_sum, cell_sq


def mc_first_passage(
    S: float,
    B: float,
    vol: float,
    rate_curve: DiscountCurve,
    dividend_model,
    T: float,
    cfg: McConfig = McConfig(),
    n_cells: int | None = None,
) -> McResult:
    """
    Probability of touching ``B`` before ``T`` for GBM with flat ``vol``.

    Parameters
    ----------
    n_cells : int, optional
        Histogram the hit mass on ``n_cells`` equal cells (the solver grid).
        The MC step count is rounded up to a multiple of ``n_cells``.
    """
    if S <= 0.0 or B <= 0.0 or T <= 0.0 or vol < 0.0:
        raise InputDomainError("need S, B, T > 0 and vol >= 0")
    n_cells = int(n_cells or 1)
    if B >= S:
        hist = np.zeros(n_cells)
        hist[0] = 1.0
        return McResult(1.0, 0.0, hist, np.zeros(n_cells), T / n_cells, cfg.n_paths)
    if dividend_model is None:
        dividend_model = ProportionalDividends()
    if not isinstance(dividend_model, (ProportionalDividends, CashDividends)):
        raise InputDomainError("unsupported dividend model")

    n_steps = max(math.ceil(cfg.n_steps_per_year * T), 1)
    n_steps = math.ceil(n_steps / n_cells) * n_cells
    drift, cash = _step_drifts(S, rate_curve, dividend_model, T, n_steps)
    plan = _Plan(S, B, float(vol), T / n_steps, drift, cash, n_steps // n_cells, n_cells,
                 cfg.bridge)

    sizes = [min(BLOCK_SIZE, cfg.n_paths - j) for j in range(0, cfg.n_paths, BLOCK_SIZE)]
    jobs = [(plan, cfg.seed, j, n) for j, n in enumerate(sizes)]
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(lambda a: _simulate_block(*a), jobs))
    else:
        parts = [_simulate_block(*a) for a in jobs]

    n = cfg.n_paths
    hit_sum = math.fsum(p[0] for p in parts)
    hit_sq = math.fsum(p[1] for p in parts)
    cell_sum = np.array([math.fsum(c) for c in zip(*(p[2] for p in parts))])
    cell_sq = np.array([math.fsum(c) for c in zip(*(p[3] for p in parts))])

    mean = hit_sum / n
    var = max(hit_sq / n - mean * mean, 0.0) * n / (n - 1)
    hist = cell_sum / n
    cell_var = np.maximum(cell_sq / n - hist * hist, 0.0) * n / (n - 1)
    return McResult(
        hit_probability=mean,
        standard_error=max(math.sqrt(var / n), 1.0 / n),
        hit_time_histogram=hist,
        cell_standard_error=np.maximum(np.sqrt(cell_var / n), 1.0 / n),
        cell_dt=T / n_cells,
        n_paths=n,
    )
