import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eopanel.errors import AlignmentError, ClimatologyError, MetricError
from eopanel.metrics import (
    Climatology, MetricConfig, RAINFALL_METRICS, TEMPERATURE_METRICS,
    build_climatology, rainfall_base, rainfall_metrics, temperature_base,
    temperature_metrics,
)
from eopanel.seasons import SeasonSlice

from helpers import two_pass_moments


def slice_of(values, year=2015, hid="H1", product="P1"):
    return SeasonSlice(hid, product, year, dt.date(year, 6, 1), np.asarray(values, float))


def clim_for(value, sd=1.0, metric="total"):
    return {metric: Climatology("H1", "P1", metric, value, sd, 5)}


class TestRainfallBase:
    def test_threshold_counting(self):
        base = rainfall_base(np.array([0.0, 0.5, 1.0, 2.0, 0.0]))
        assert base["rain_days"] == 2
        assert base["no_rain_days"] == 3
        assert base["share_rain_days"] == pytest.approx(0.4)
        assert base["total"] == pytest.approx(3.5)
        assert base["max_dry_spell"] == 2

    def test_constant_series(self):
        base = rainfall_base(np.full(10, 2.0))
        assert base["variance"] == 0.0
        assert base["skew"] == 0.0
        assert base["max_dry_spell"] == 0
        assert base["total"] == pytest.approx(20.0)

    def test_all_nan_errors(self):
        with pytest.raises(MetricError):
            rainfall_base(np.full(5, np.nan))

    def test_gap_tolerance(self):
        vals = np.ones(100)
        vals[:6] = np.nan  # 6% > 5% tolerance
        with pytest.raises(MetricError):
            rainfall_base(vals)
        vals = np.ones(100)
        vals[:5] = np.nan  # exactly at tolerance: allowed
        base = rainfall_base(vals)
        assert base["season_length_days"] == 95
        assert base["rain_days"] + base["no_rain_days"] == 95

    def test_nan_counts_as_dry_flag(self):
        vals = np.array([2.0, np.nan, 2.0, 0.0] + [2.0] * 96)
        cfg = MetricConfig(max_gap_fraction=0.1, nan_counts_as_dry=True)
        base = rainfall_base(vals, cfg)
        assert base["season_length_days"] == 100
        assert base["no_rain_days"] == 2
        assert base["max_dry_spell"] == 1


class TestDeviationMetrics:
    def test_deviation_identity(self):
        vals = np.full(10, 2.0)
        base = rainfall_base(vals)
        clim = {
            "total": Climatology("H1", "P1", "total", base["total"], 3.0, 5),
            "rain_days": Climatology("H1", "P1", "rain_days", 10.0, 1.0, 5),
            "no_rain_days": Climatology("H1", "P1", "no_rain_days", 0.0, 1.0, 5),
            "share_rain_days": Climatology("H1", "P1", "share_rain_days", 1.0, 0.1, 5),
        }
        out = rainfall_metrics(slice_of(vals), clim)
        assert out["dev_total"] == pytest.approx(0.0)
        assert out["z_total"] == pytest.approx(0.0)
        assert set(RAINFALL_METRICS) <= set(out)

    def test_zero_sd_gives_missing_z(self):
        vals = np.full(10, 2.0)
        clim = {
            "total": Climatology("H1", "P1", "total", 20.0, 0.0, 5),
            "rain_days": Climatology("H1", "P1", "rain_days", 10.0, 1.0, 5),
            "no_rain_days": Climatology("H1", "P1", "no_rain_days", 0.0, 1.0, 5),
            "share_rain_days": Climatology("H1", "P1", "share_rain_days", 1.0, 0.1, 5),
        }
        out = rainfall_metrics(slice_of(vals), clim)
        assert np.isnan(out["z_total"])
        assert out["dev_total"] == pytest.approx(0.0)  # raw deviation still defined


class TestTemperature:
    def test_gdd_single_day(self):
        sm = slice_of([25.0])
        sx = slice_of([31.0])
        base = temperature_base(sm, sx)
        assert base["gdd"] == pytest.approx(15.0)

    def test_gdd_capped(self):
        base = temperature_base(slice_of([35.0]), slice_of([40.0]))
        assert base["gdd"] == pytest.approx(20.0)

    def test_gdd_below_base(self):
        base = temperature_base(slice_of([5.0]), slice_of([12.0]))
        assert base["gdd"] == 0.0

    def test_constant_100_days(self):
        base = temperature_base(slice_of([20.0] * 100), slice_of([26.0] * 100))
        assert base["gdd"] == pytest.approx(1000.0)
        assert base["t_variance"] == 0.0
        assert base["mean_tmax"] == pytest.approx(26.0)

    def test_count_mode(self):
        cfg = MetricConfig(gdd_mode="count_days_in_bound")
        base = temperature_base(slice_of([5.0, 20.0, 35.0, 10.0, 30.0]),
                                slice_of([9.0] * 5), cfg)
        assert base["gdd"] == 3.0  # 20, 10, 30 inside [10, 30]

    def test_misaligned_slices(self):
        with pytest.raises(AlignmentError):
            temperature_base(slice_of([20.0, 21.0]), slice_of([25.0]))

    def test_gdd_monotone_in_tmean(self):
        rng = np.random.default_rng(0)
        base_vals = rng.uniform(5, 35, 50)
        tmax = base_vals + 5
        g0 = temperature_base(slice_of(base_vals), slice_of(tmax))["gdd"]
        for i in range(0, 50, 7):
            bumped = base_vals.copy()
            if bumped[i] < 30:
                bumped[i] += 1.0
                g1 = temperature_base(slice_of(bumped), slice_of(tmax))["gdd"]
                assert g1 >= g0

    def test_full_vector(self):
        clim = {"gdd": Climatology("H1", "P1", "gdd", 900.0, 100.0, 5)}
        out = temperature_metrics(slice_of([20.0] * 100), slice_of([26.0] * 100), clim)
        assert set(TEMPERATURE_METRICS) <= set(out)
        assert out["dev_gdd"] == pytest.approx(100.0)
        assert out["z_gdd"] == pytest.approx(1.0)


class TestClimatology:
    def test_textbook_sample_sd(self):
        c = build_climatology(
            [(dt.date(2000 + i, 6, 1), v) for i, v in enumerate([100.0, 200.0, 300.0])],
            "H1", "P1", "total",
        )
        assert c.long_run_mean == pytest.approx(200.0)
        assert c.long_run_sd == pytest.approx(100.0)
        assert c.n_seasons == 3

    def test_degenerate_flag(self):
        c = build_climatology(
            [(dt.date(2000, 6, 1), 5.0), (dt.date(2001, 6, 1), 5.0)], "H1", "P1", "total"
        )
        assert c.long_run_sd == 0.0
        assert c.degenerate

    def test_pre_1983_excluded(self):
        seasons = [(dt.date(1979, 6, 1), 1000.0), (dt.date(1982, 6, 1), 1000.0),
                   (dt.date(1990, 6, 1), 100.0), (dt.date(1991, 6, 1), 300.0)]
        c = build_climatology(seasons, "H1", "P1", "total")
        assert c.n_seasons == 2
        assert c.long_run_mean == pytest.approx(200.0)

    def test_too_few_seasons(self):
        with pytest.raises(ClimatologyError):
            build_climatology([(dt.date(1990, 6, 1), 1.0)], "H1", "P1", "total")


@given(st.lists(st.floats(min_value=0.0, max_value=200.0), min_size=1, max_size=400))
@settings(max_examples=200, deadline=None)
def test_threshold_duality(values):
    base = rainfall_base(np.asarray(values))
    assert base["rain_days"] + base["no_rain_days"] == base["season_length_days"]
    assert base["max_dry_spell"] <= base["no_rain_days"]
    assert 0.0 <= base["share_rain_days"] <= 1.0
    assert base["total"] == pytest.approx(base["mean"] * base["season_length_days"], rel=1e-6)


@given(st.lists(st.floats(min_value=0.0, max_value=500.0), min_size=2, max_size=1000))
@settings(max_examples=100, deadline=None)
def test_moment_oracle(values):
    base = rainfall_base(np.asarray(values))
    mean, med, var, skew = two_pass_moments(values)
    assert base["mean"] == pytest.approx(mean, rel=1e-10, abs=1e-12)
    assert base["median"] == pytest.approx(med, rel=1e-10, abs=1e-12)
    assert base["variance"] == pytest.approx(var, rel=1e-10, abs=1e-9)
    assert base["skew"] == pytest.approx(skew, rel=1e-8, abs=1e-8)


def test_z_total_affine_invariance():
    rng = np.random.default_rng(11)
    length = 183
    seasons_a = [rng.gamma(0.9, 8.0, length) for _ in range(8)]
    a, b = 2.3, 4.0
    seasons_b = [a * s + b for s in seasons_a]

    def z_totals(seasons):
        totals = [(dt.date(2000 + i, 6, 1), float(s.sum())) for i, s in enumerate(seasons)]
        clim = build_climatology(totals, "H1", "P1", "total")
        return [(t - clim.long_run_mean) / clim.long_run_sd for _, t in totals]

    za = z_totals(seasons_a)
    zb = z_totals(seasons_b)
    np.testing.assert_allclose(za, zb, rtol=1e-10, atol=1e-10)
