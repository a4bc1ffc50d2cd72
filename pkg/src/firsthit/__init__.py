"""First-hitting-time densities implied by European digital puts."""

from firsthit.errors import (
    ArbitrageError,
    FirstHitError,
    InputDomainError,
    NegativeDensityError,
)
from firsthit.kernel import BsQuote, bs_put, bs_put_vega, digital_put_flat, eur_dip
from firsthit.market import (
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
from firsthit.montecarlo import McConfig, mc_first_passage
from firsthit.scenarios import (
    Bump,
    EdsTrade,
    StressLadder,
    SweepSpec,
    flat_market,
    price_eds,
    run_ladder,
    run_sweep,
)
from firsthit.solver import (
    BarrierContract,
    HittingDensity,
    SolverConfig,
    am_dip_direct_flat,
    am_dip_price,
    solve_density,
)

__version__ = "0.1.0"
