"""
Spot skew: an American digital put is short skew
================================================

Steepening today's skew (pivoting around the ATM vol) lowers the vol at a
near barrier relative to the wings and, through the vega term in the
digital, lowers the hitting probability.  Forward conditions at the hit are
left untouched.
"""

from firsthit import BarrierContract, DerivedFromSpot, SweepSpec, flat_market, run_sweep

market = flat_market(100.0, 0.25, slope=-0.25)
spec = SweepSpec("spot_skew", [0.5, 1.0, 1.5, 2.0], market, DerivedFromSpot(),
                 BarrierContract(90.0, 0.5), spot_skew_pivot="atm")
result = run_sweep(spec)

for row in result.rows:
    print(f"spot skew x{row.value:<4}  Am-DIP = {row.price:.4f}")

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, ax = plt.subplots()
    for row in result.rows:
        ax.plot(result.times + result.times[1], row.cumulative, label=f"x{row.value}")
    ax.set_xlabel("T")
    ax.set_ylabel("P(hit before T)")
    ax.legend(title="spot skew")
    fig.savefig("spot_skew.png", dpi=120)
