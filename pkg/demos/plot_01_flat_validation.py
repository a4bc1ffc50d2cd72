"""
Flat volatility: solver against reflection and Monte Carlo
==========================================================

With no skew the hitting probability has a closed form, so the integral
equation solver can be checked directly.  A Monte Carlo run with a
Brownian-bridge correction gives a third, independent estimate.
"""

import numpy as np

from firsthit import BarrierContract, DerivedFromSpot, McConfig, SolverConfig
from firsthit import am_dip_direct_flat, flat_market, mc_first_passage, solve_density

S, B, sigma, T = 100.0, 90.0, 0.20, 1.0

# zero rates and dividends: S is a martingale, log-drift is -sigma^2/2
market = flat_market(S, sigma)
density = solve_density(market, DerivedFromSpot(), BarrierContract(B, T))
exact = am_dip_direct_flat(S, B, sigma, 0.0, T)
print(f"solver C(T) = {density.total:.6f}   reflection = {exact:.6f}")

# the classic 2N(b / sigma sqrt T) value belongs to zero log-drift
sym = flat_market(S, sigma, dividend_yield=-0.5 * sigma**2, horizon=5.0)
zero_drift = solve_density(sym, DerivedFromSpot(), BarrierContract(B, T))
print(f"zero log-drift: solver {zero_drift.total:.6f}")

# first-order convergence: the error halves as the grid doubles
for n in (125, 250, 500, 1000):
    d = solve_density(market, DerivedFromSpot(), BarrierContract(B, T), SolverConfig(n))
    print(f"N = {n:5d}   error = {d.total - exact:+.2e}")

# Monte Carlo on the solver grid
mc = mc_first_passage(S, B, sigma, market.discount, market.dividends, T,
                      McConfig(n_paths=200_000, workers=4), n_cells=density.n_steps)
print(f"MC = {mc.hit_probability:.5f} +/- {mc.standard_error:.5f}")

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, ax = plt.subplots()
    t = density.times + density.dt
    ax.plot(t, density.cumulative, label="integral equation")
    ax.plot(t, np.cumsum(mc.hit_time_histogram), "--", label="Monte Carlo")
    ax.set_xlabel("T")
    ax.set_ylabel("P(hit before T)")
    ax.legend()
    fig.savefig("flat_validation.png", dpi=120)
