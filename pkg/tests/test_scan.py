import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import REFERENCE_FITS, calibrated
from oracles import density_sign
from svi_guard import (
    D1Limit,
    DomainError,
    ForwardContext,
    Interval,
    ScanGrid,
    SlopeBoundConfig,
    SviParams,
    TotalVarianceCurve,
    full_report,
    g_denominator,
    grid_profile,
    price_argmax_moneyness,
    scan_butterfly,
    scan_call_monotonicity,
)
from svi_guard.scan import MONOTONICITY_TOL, call_prices

UNIT = ForwardContext(forward=1.0, maturity=1.0)
BOUND = SlopeBoundConfig.relative(UNIT)
FLAT = SviParams(a=0.04, b=0.0, s=0.1, rho=0.0, m=0.0)
RIGHT_WING = ScanGrid(min_moneyness=1.0, max_moneyness=1e7)


def curve(p, maturity=1.0):
    return TotalVarianceCurve(p, maturity)


def assert_well_formed(intervals):
    for iv in intervals:
        assert iv.lo <= iv.hi
    for a, b in zip(intervals, intervals[1:]):
        assert a.hi < b.lo


class TestGrid:
    def test_log_uniform(self):
        x = ScanGrid(1e-2, 1e7, 64).moneyness()
        assert x[0] == pytest.approx(1e-2) and x[-1] == pytest.approx(1e7)
        assert len(x) == 9 * 64 + 1
        ratios = x[1:] / x[:-1]
        np.testing.assert_allclose(ratios, ratios[0], rtol=1e-12)

    def test_short_grid_has_two_points(self):
        assert len(ScanGrid(1.0, 1.001, 16).moneyness()) >= 2

    @pytest.mark.parametrize(
        "kwargs", [{"min_moneyness": 0.0}, {"min_moneyness": 10.0, "max_moneyness": 5.0}, {"points_per_decade": 8}]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(DomainError):
            ScanGrid(**kwargs)

    def test_interval_membership(self):
        iv = Interval(lo=1.5, hi=3.0)
        assert 2.0 in iv and 1.5 in iv and 3.5 not in iv


class TestMonotonicity:
    def test_flat_smile_has_no_violation(self):
        assert scan_call_monotonicity(curve(FLAT), UNIT, ScanGrid()) == []

    def test_slope_1_95_rises_beyond_a_million(self):
        intervals = scan_call_monotonicity(curve(REFERENCE_FITS["slope_1_95"]), UNIT, RIGHT_WING)
        assert any(1e6 in iv for iv in intervals)
        (iv,) = intervals
        assert iv.extends_above and not iv.negligible
        assert 1.0 < iv.lo < 10.0

    def test_slope_3_95_rises_too(self):
        assert scan_call_monotonicity(curve(REFERENCE_FITS["slope_3_95"]), UNIT, RIGHT_WING)

    def test_endpoints_stable_under_refinement(self):
        c = curve(REFERENCE_FITS["slope_1_95"])
        coarse = scan_call_monotonicity(c, UNIT, RIGHT_WING)
        fine = scan_call_monotonicity(c, UNIT, ScanGrid(1.0, 1e7, 128))
        assert len(coarse) == len(fine)
        for a, b in zip(coarse, fine):
            assert b.lo == pytest.approx(a.lo, rel=1e-3)
            assert b.hi == pytest.approx(a.hi, rel=1e-3)

    def test_refined_start_is_a_price_minimum(self):
        c = curve(REFERENCE_FITS["slope_1_95"])
        (iv,) = scan_call_monotonicity(c, UNIT, RIGHT_WING)
        around = call_prices(c, UNIT, np.array([iv.lo * 0.99, iv.lo, iv.lo * 1.01]))
        assert around[1] <= around[0] and around[1] <= around[2]

    def test_listed_intervals_clear_the_negligible_threshold(self):
        # a rising cell gains more than 1e-16 B F, so its peak is far above 1e-18 B F
        for row in ("slope_3_95", "slope_1_95", "slope_1_00"):
            c = curve(REFERENCE_FITS[row])
            for iv in scan_call_monotonicity(c, UNIT, RIGHT_WING):
                assert call_prices(c, UNIT, np.array([iv.hi]))[0] > MONOTONICITY_TOL
                assert not iv.negligible

    def test_underflowed_wing_is_not_reported(self):
        # the price is exactly zero long before this wing turns up
        b, rho, s = 0.1 / 1.99, 0.99, 0.05
        p = SviParams(a=1e-4 - b * s * math.sqrt(1 - rho * rho), b=b, s=s, rho=rho, m=10.0)
        assert scan_call_monotonicity(curve(p), UNIT, RIGHT_WING) == []

    def test_maturity_mismatch(self):
        with pytest.raises(DomainError):
            scan_call_monotonicity(curve(FLAT, 2.0), UNIT, ScanGrid())

    def test_nonpositive_variance(self):
        p = SviParams(a=-(0.1 * 0.2), b=0.1, s=0.2, rho=0.0, m=0.0)
        with pytest.raises(DomainError):
            scan_call_monotonicity(curve(p), UNIT, ScanGrid(0.5, 2.0, 16 * 7))


class TestPriceArgmax:
    def test_unit_slope_peaks_near_nineteen(self):
        x = price_argmax_moneyness(curve(REFERENCE_FITS["slope_1_00"]), UNIT, ScanGrid())
        assert x == pytest.approx(19.0, rel=0.1)

    def test_no_rebound_returns_forward(self):
        assert price_argmax_moneyness(curve(FLAT), UNIT, ScanGrid()) == pytest.approx(1.0)

    def test_grid_below_forward(self):
        assert price_argmax_moneyness(curve(FLAT), UNIT, ScanGrid(0.01, 0.5)) is None


class TestButterfly:
    def test_flat_smile(self):
        assert scan_butterfly(curve(FLAT), ScanGrid()) == []

    def test_capped_fit_has_one_interval(self):
        fit = calibrated(0.19)
        (iv,) = scan_butterfly(curve(fit.params), ScanGrid())
        assert iv.lo == pytest.approx(1.90, rel=0.15)
        assert iv.hi == pytest.approx(3.20, rel=0.15)
        assert not (iv.extends_below or iv.extends_above)

    def test_g_changes_sign_at_endpoints(self):
        c = curve(calibrated(0.19).params)
        (iv,) = scan_butterfly(c, ScanGrid())
        for edge in (iv.lo, iv.hi):
            y = math.log(edge)
            assert g_denominator(c, y - 1e-9) * g_denominator(c, y + 1e-9) < 0

    def test_positive_beyond_interval(self):
        c = curve(calibrated(0.19).params)
        (iv,) = scan_butterfly(c, ScanGrid())
        x = ScanGrid().moneyness()
        assert np.all(np.asarray(g_denominator(c, np.log(x[x > iv.hi * 1.0001]))) > 0)

    def test_overlaps_negative_density(self):
        p = calibrated(0.19).params
        (iv,) = scan_butterfly(curve(p), ScanGrid())
        inside = np.geomspace(iv.lo, iv.hi, 7)[1:-1]
        assert all(density_sign(p, 1.0, math.log(k)) == -1 for k in inside)
        assert density_sign(p, 1.0, math.log(iv.hi * 1.5)) == 1

    def test_endpoints_stable_under_refinement(self):
        c = curve(calibrated(0.19).params)
        coarse = scan_butterfly(c, ScanGrid(points_per_decade=64))
        fine = scan_butterfly(c, ScanGrid(points_per_decade=128))
        assert len(coarse) == len(fine) == 1
        assert fine[0].lo == pytest.approx(coarse[0].lo, rel=1e-3)
        assert fine[0].hi == pytest.approx(coarse[0].hi, rel=1e-3)


class TestFarWing:
    @pytest.mark.parametrize("cap", [0.19, 0.5])
    def test_price_decays_for_gentle_slopes(self, cap):
        fit = calibrated(cap)
        assert fit.params.max_wing_slope <= 0.5 + 1e-12
        prices = call_prices(curve(fit.params), UNIT, np.array([10.0, 1e8]))
        assert prices[1] < prices[0]


@st.composite
def smiles(draw):
    b = draw(st.floats(0.01, 2.5))
    rho = draw(st.floats(-0.95, 0.95))
    s = draw(st.floats(0.02, 0.8))
    floor = draw(st.floats(0.005, 0.2))
    m = draw(st.floats(-0.3, 0.6))
    return SviParams(a=floor - b * s * math.sqrt(1 - rho * rho), b=b, s=s, rho=rho, m=m)


class TestReport:
    def test_flat(self):
        report = full_report(FLAT, UNIT, ScanGrid(), BOUND)
        assert report.monotonicity_violations == [] and report.negative_g_intervals == []
        v = report.verdict
        assert v.passes_gatheral and v.passes_lee and v.passes_practical
        assert v.d1_limit_class is D1Limit.MINUS_INFINITY
        assert not report.arbitrage_detected

    def test_slope_3_95(self):
        report = full_report(REFERENCE_FITS["slope_3_95"], UNIT, ScanGrid(), BOUND)
        assert report.verdict.passes_gatheral and not report.verdict.passes_lee
        assert report.verdict.d1_limit_class is D1Limit.PLUS_INFINITY
        assert report.arbitrage_detected

    def test_slope_1_95_lee_compliant_yet_rising(self):
        report = full_report(REFERENCE_FITS["slope_1_95"], UNIT, ScanGrid(), BOUND)
        assert report.verdict.passes_lee
        assert report.monotonicity_violations
        assert report.arbitrage_detected

    def test_deterministic(self):
        a = full_report(REFERENCE_FITS["slope_1_95"], UNIT, ScanGrid(), BOUND)
        b = full_report(REFERENCE_FITS["slope_1_95"], UNIT, ScanGrid(), BOUND)
        assert a == b

    @settings(max_examples=60, deadline=None)
    @given(smiles())
    def test_empty_lists_mean_clean_grid(self, p):
        grid = ScanGrid(1e-2, 1e7, 32)
        report = full_report(p, UNIT, grid, BOUND)
        assert_well_formed(report.monotonicity_violations)
        assert_well_formed(report.negative_g_intervals)
        profile = grid_profile(curve(p), UNIT, grid)
        if not report.monotonicity_violations:
            assert np.all(np.diff(profile["call_price"]) <= MONOTONICITY_TOL)
        if not report.negative_g_intervals:
            assert np.all(profile["g"] >= 0)

    def test_grid_profile_columns(self):
        profile = grid_profile(curve(REFERENCE_FITS["slope_1_00"]), UNIT, ScanGrid(points_per_decade=16))
        assert set(profile) == {"moneyness", "implied_vol", "call_price", "g"}
        assert len({len(col) for col in profile.values()}) == 1
