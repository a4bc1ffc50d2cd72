import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from firsthit.errors import ExtrapolationError, InputDomainError, NegativeForwardError
from firsthit.market import (
    BumpedSurface,
    CashDividends,
    DerivedFromSpot,
    DiscountCurve,
    ExplicitTable,
    MarketState,
    ParametricSkew,
    ProportionalDividends,
    StrikeGrid,
    TermStructure,
    barrier_conditions,
    discount,
    forward,
    spot_slope,
    spot_vol,
)
from firsthit.records import describe, rebuild

# log-linear midpoint of (1, 0.98) and (2, 0.95): sqrt(0.98 * 0.95)
DF_MID = 0.9648834126463155
# 100 * exp(-0.02)
FWD_Q2 = 98.01986733067552
# (0.80 - 0.52) / ln(0.30)
ANCHOR_SLOPE = -0.23256339262311046


def parametric(spot=100.0, atm=0.25, slope=-0.25, floor=0.01):
    return ParametricSkew(TermStructure.flat(atm), TermStructure.flat(slope),
                          TermStructure.flat(spot), floor)


def market(spot=100.0, surface=None, dividends=None, rate=0.0):
    return MarketState(spot, DiscountCurve.flat(rate), dividends or ProportionalDividends(),
                       surface or parametric(spot))


class TestDiscountCurve:
    def test_origin(self):
        curve = DiscountCurve((0.0, 1.0, 2.0), (1.0, 0.98, 0.95))
        assert discount(curve, 0.0) == 1.0

    def test_zero_rate(self):
        curve = DiscountCurve.flat(0.0, 10.0)
        assert np.all(curve(np.linspace(0, 10, 11)) == 1.0)

    def test_log_linear(self):
        curve = DiscountCurve((0.0, 1.0, 2.0), (1.0, 0.98, 0.95))
        assert discount(curve, 1.5) == pytest.approx(DF_MID, rel=1e-14)

    def test_no_extrapolation(self):
        curve = DiscountCurve((0.0, 1.0, 2.0), (1.0, 0.98, 0.95))
        with pytest.raises(ExtrapolationError):
            curve(2.5)

    @pytest.mark.parametrize("times,dfs", [((0.0,), (1.0,)), ((0.5, 1.0), (1.0, 0.9)),
                                           ((0.0, 1.0), (0.99, 0.9)), ((0.0, 1.0), (1.0, -0.1)),
                                           ((0.0, 1.0, 1.0), (1.0, 0.9, 0.8))])
    def test_invariants(self, times, dfs):
        with pytest.raises(InputDomainError):
            DiscountCurve(times, dfs)


class TestForward:
    def test_no_carry(self):
        m = market()
        assert np.all(forward(m, 100.0, 0.0, np.array([0.1, 1.0, 5.0])) == 100.0)

    def test_proportional_yield(self):
        m = market(dividends=ProportionalDividends.flat(0.02))
        assert forward(m, 100.0, 0.0, 1.0) == pytest.approx(FWD_Q2, rel=1e-14)

    def test_rates(self):
        m = market(rate=0.03)
        assert forward(m, 100.0, 0.5, 1.5) == pytest.approx(100.0 * math.exp(0.03), rel=1e-12)

    def test_piecewise_yield(self):
        divs = ProportionalDividends(breaks=(0.5,), yields=(0.01, 0.03))
        m = market(dividends=divs)
        expected = 100.0 * math.exp(-(0.01 * 0.5 + 0.03 * 0.5))
        assert forward(m, 100.0, 0.0, 1.0) == pytest.approx(expected, rel=1e-14)

    def test_proportional_beats_cash_at_the_barrier(self):
        # both models agree on F_0(1); the cash amount is fixed, the yield scales with spot
        q = 0.04
        prop = market(dividends=ProportionalDividends.flat(q))
        cash = market(dividends=CashDividends(((0.5, 100.0 * (1 - math.exp(-q))),)))
        assert forward(prop, 100.0, 0.0, 1.0) == pytest.approx(forward(cash, 100.0, 0.0, 1.0))
        assert forward(prop, 80.0, 0.25, 1.0) > forward(cash, 80.0, 0.25, 1.0)

    def test_cash_dividends_paid_only_inside_window(self):
        m = market(dividends=CashDividends(((0.5, 2.0), (1.5, 3.0))))
        assert forward(m, 100.0, 0.0, 1.0) == pytest.approx(98.0)
        assert forward(m, 100.0, 0.6, 1.0) == pytest.approx(100.0)
        assert forward(m, 100.0, 0.0, 2.0) == pytest.approx(95.0)

    def test_negative_forward(self):
        m = market(dividends=CashDividends(((0.5, 50.0),)))
        with pytest.raises(NegativeForwardError):
            forward(m, 40.0, 0.0, 1.0)

    @given(st.floats(0.1, 1000.0), st.floats(0.0, 2.0), st.floats(0.0, 3.0),
           st.floats(-0.05, 0.1), st.floats(-0.02, 0.08))
    def test_multiplicative(self, s, t, dT, r, q):
        m = market(rate=r, dividends=ProportionalDividends.flat(q))
        assert forward(m, s, t, t + dT) == pytest.approx(s * forward(m, 1.0, t, t + dT),
                                                         rel=1e-12)

    def test_continuous_in_t(self):
        m = market(rate=0.02, dividends=CashDividends(((0.5, 2.0),)))
        ts = np.linspace(0.0, 0.45, 50)
        f = forward(m, 100.0, ts, 1.0)
        # carry drift alone moves F by ~0.02 per grid step; a dividend jump would be ~2
        assert np.max(np.abs(np.diff(f))) < 0.03


class TestSurfaces:
    def test_atm_exact(self):
        s = parametric(atm=0.3, slope=-0.4)
        assert spot_vol(s, 100.0, 0.5) == pytest.approx(0.3, abs=1e-15)

    def test_anchor_slope(self):
        s = parametric(spot=5.945, atm=0.52, slope=ANCHOR_SLOPE)
        assert spot_vol(s, 0.30 * 5.945, 0.5) == pytest.approx(0.80, abs=1e-14)
        assert spot_slope(s, 0.30 * 5.945, 0.5) == ANCHOR_SLOPE

    def test_floor_binds(self):
        s = parametric(atm=0.2, slope=0.3)
        deep = 100.0 * math.exp(-1.0)
        assert spot_vol(s, deep, 1.0) == 0.01
        assert spot_slope(s, deep, 1.0) == 0.0

    @given(st.floats(1.0, 1000.0), st.floats(0.01, 5.0))
    def test_floor_everywhere(self, k, T):
        s = parametric(atm=0.2, slope=0.5)
        v, sl = spot_vol(s, k, T), spot_slope(s, k, T)
        assert v >= 0.01
        if v == 0.01:
            assert sl == 0.0

    def test_domain(self):
        with pytest.raises(InputDomainError):
            spot_vol(parametric(), -1.0, 1.0)
        with pytest.raises(InputDomainError):
            spot_slope(parametric(), 90.0, 0.0)

    def test_strike_grid_bilinear(self):
        g = StrikeGrid((80.0, 100.0), (0.5, 1.0), ((0.30, 0.20), (0.26, 0.18)))
        k_mid = math.sqrt(80.0 * 100.0)
        assert spot_vol(g, k_mid, 0.75) == pytest.approx((0.30 + 0.20 + 0.26 + 0.18) / 4)
        # flat outside the grid
        assert spot_vol(g, 50.0, 0.1) == pytest.approx(0.30)
        assert spot_vol(g, 200.0, 3.0) == pytest.approx(0.18)

    def test_strike_grid_slope(self):
        strikes = (60.0, 80.0, 100.0, 120.0)
        vols = [[0.25 - 0.2 * math.log(k / 100.0) for k in strikes]] * 2
        g = StrikeGrid(strikes, (0.5, 1.0), vols)
        assert spot_slope(g, 90.0, 0.7) == pytest.approx(-0.2, abs=1e-9)

    def test_bumped_atm_pivot_keeps_atm(self):
        base = parametric(atm=0.25, slope=-0.25)
        b = BumpedSurface(base, skew_factor=2.0)
        assert spot_vol(b, 100.0, 1.0) == pytest.approx(0.25)
        assert spot_slope(b, 90.0, 1.0) == pytest.approx(-0.5)

    def test_bumped_barrier_pivot_keeps_barrier_vol(self):
        base = parametric(atm=0.25, slope=-0.25)
        b = BumpedSurface(base, skew_factor=0.8, vol_shift=0.06, pivot_strike=60.0)
        assert spot_vol(b, 60.0, 1.0) == pytest.approx(spot_vol(base, 60.0, 1.0) + 0.06)
        assert spot_slope(b, 60.0, 1.0) == pytest.approx(0.8 * -0.25)


class TestBarrierConditions:
    def test_identity_matches_today(self):
        m = market(surface=parametric(atm=0.3, slope=-0.3))
        vol, slope = barrier_conditions(DerivedFromSpot(), m, 80.0, 0.0, 1.0)
        assert vol == spot_vol(m.surface, 80.0, 1.0)
        assert slope == spot_slope(m.surface, 80.0, 1.0)

    def test_flat_forward_skew(self):
        m = market()
        _, slope = barrier_conditions(DerivedFromSpot(skew_factor=0.0), m, 80.0,
                                      np.linspace(0, 0.9, 10), 0.1)
        assert np.all(slope == 0.0)

    def test_doubled_forward_skew(self):
        m = market(spot=5.945, surface=parametric(5.945, 0.52, ANCHOR_SLOPE))
        _, slope = barrier_conditions(DerivedFromSpot(skew_factor=2.0), m, 1.7835, 0.1, 0.4)
        assert slope == pytest.approx(2 * ANCHOR_SLOPE)

    def test_shift_below_zero(self):
        with pytest.raises(InputDomainError):
            barrier_conditions(DerivedFromSpot(vol_shift=-1.0), market(), 80.0, 0.0, 0.5)

    def test_shift_floored(self):
        vol, _ = barrier_conditions(DerivedFromSpot(vol_factor=0.01), market(), 90.0, 0.0, 0.5)
        assert vol == 0.01

    def test_table_round_trip(self):
        surface = ParametricSkew(TermStructure((0.25, 1.0, 2.0), (0.35, 0.25, 0.22)),
                                 TermStructure((0.25, 2.0), (-0.4, -0.2)),
                                 TermStructure.flat(100.0))
        m = market(surface=surface)
        spec = DerivedFromSpot(vol_factor=1.1, skew_factor=1.5, vol_shift=-0.01)
        taus, rems = (0.0, 0.5, 1.0), (0.1, 0.25, 0.5, 1.0, 2.0)
        table = ExplicitTable.sample(spec, m, 80.0, taus, rems)
        tt, rr = np.meshgrid(taus, rems, indexing="ij")
        for a, b in zip(barrier_conditions(table, m, 80.0, tt, rr),
                        barrier_conditions(spec, m, 80.0, tt, rr)):
            assert np.array_equal(a, b)
        off_t, off_r = np.meshgrid(np.linspace(0, 1, 7), np.linspace(0.1, 2.0, 23), indexing="ij")
        for a, b in zip(barrier_conditions(table, m, 80.0, off_t, off_r),
                        barrier_conditions(spec, m, 80.0, off_t, off_r)):
            assert np.max(np.abs(a - b)) < 0.02

    def test_table_rejects_bad_shape(self):
        with pytest.raises(InputDomainError):
            ExplicitTable((0.0, 1.0), (0.5,), ((0.2,),), ((0.0,), (0.0,)))


def test_describe_rebuild_round_trip():
    m = MarketState(100.0, DiscountCurve((0.0, 1.0, 5.0), (1.0, 0.97, 0.85)),
                    CashDividends(((0.5, 1.0), (1.5, 1.2))),
                    BumpedSurface(parametric(), 0.8, 0.01, 70.0))
    again = rebuild(describe(m))
    assert again == m
    assert forward(again, 90.0, 0.2, 2.0) == forward(m, 90.0, 0.2, 2.0)
    assert spot_vol(again.surface, 75.0, 0.4) == spot_vol(m.surface, 75.0, 0.4)
