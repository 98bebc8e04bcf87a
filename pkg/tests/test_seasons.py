import datetime as dt

import numpy as np
import pytest

from eopanel.errors import ConfigurationError
from eopanel.grid import Coordinate, SiteSeries
from eopanel.seasons import (
    NORTH, SOUTH, Region, SeasonWindow, builtin_calendar, load_calendar_file,
    load_wave_map, resolve_region, season_dates, slice_seasons,
)


def inclusive_days(start: dt.date, end: dt.date) -> int:
    # calendar oracle: walk day by day
    n, d = 0, start
    while d <= end:
        n += 1
        d += dt.timedelta(days=1)
    return n


def make_series(start: dt.date, n_days: int, fill=1.0) -> SiteSeries:
    return SiteSeries("H1", "P1", "precip", start, np.full(n_days, fill))


class TestBuiltinCalendar:
    def test_malawi_spans(self):
        w = builtin_calendar("Malawi")
        region = w.regions[0]
        assert region.start == (10, 1) and region.end == (4, 30)
        assert region.spans_year

    def test_niger(self):
        w = builtin_calendar("Niger")
        region = w.regions[0]
        assert region.start == (6, 1) and region.end == (11, 30)
        assert not region.spans_year

    def test_uganda_bimodal(self):
        w = builtin_calendar("Uganda")
        assert w.modality == "bimodal"
        assert w.regions[NORTH] == Region((4, 1), (9, 30))
        assert w.regions[SOUTH] == Region((2, 1), (7, 31))

    def test_ethiopia_tanzania_nigeria(self):
        assert builtin_calendar("Ethiopia").regions[0] == Region((3, 1), (11, 30))
        assert builtin_calendar("Tanzania").regions[0] == Region((11, 1), (4, 30))
        assert builtin_calendar("Tanzania").regions[0].spans_year
        assert builtin_calendar("Nigeria").regions[NORTH] == Region((5, 1), (9, 30))
        assert builtin_calendar("Nigeria").regions[SOUTH] == Region((3, 1), (8, 31))

    def test_unknown_country(self):
        with pytest.raises(ConfigurationError):
            builtin_calendar("Atlantis")


class TestResolveRegion:
    def test_unimodal_single_region(self):
        w = builtin_calendar("Niger")
        assert resolve_region(w, Coordinate(13.0, 8.0)) == 0

    def test_north_of_boundary(self):
        w = builtin_calendar("Nigeria", boundary_lat=9.0)
        assert resolve_region(w, Coordinate(10.2, 8.0)) == NORTH

    def test_on_boundary_goes_north(self):
        w = builtin_calendar("Nigeria", boundary_lat=9.0)
        assert resolve_region(w, Coordinate(9.0, 8.0)) == NORTH
        assert resolve_region(w, Coordinate(8.999, 8.0)) == SOUTH

    def test_missing_boundary_errors(self):
        w = builtin_calendar("Uganda")
        with pytest.raises(ConfigurationError):
            resolve_region(w, Coordinate(1.0, 32.0))


class TestSliceSeasons:
    def test_malawi_2024_length_212(self):
        w = builtin_calendar("Malawi")
        series = make_series(dt.date(2024, 10, 1), 212)
        slices = slice_seasons(series, w)
        assert len(slices) == 1
        assert slices[0].season_label_year == 2024
        expected = inclusive_days(dt.date(2024, 10, 1), dt.date(2025, 4, 30))
        assert expected == 212
        assert slices[0].season_length_days == expected

    def test_niger_2014_length_183(self):
        w = builtin_calendar("Niger")
        series = make_series(dt.date(2014, 6, 1), 183)
        slices = slice_seasons(series, w)
        assert len(slices) == 1
        assert slices[0].season_label_year == 2014
        assert slices[0].season_length_days == inclusive_days(
            dt.date(2014, 6, 1), dt.date(2014, 11, 30)
        ) == 183

    def test_incomplete_season_dropped(self):
        w = builtin_calendar("Malawi")
        # ends 15 Apr 2025: the 2024 season is incomplete
        start = dt.date(2024, 1, 1)
        n = (dt.date(2025, 4, 15) - start).days + 1
        slices = slice_seasons(make_series(start, n), w)
        assert [s.season_label_year for s in slices] == []

    def test_no_complete_season_is_empty_not_error(self):
        w = builtin_calendar("Niger")
        assert slice_seasons(make_series(dt.date(2014, 7, 1), 30), w) == []

    def test_leap_day_changes_spanning_length_by_one(self):
        w = builtin_calendar("Malawi")
        start = dt.date(2022, 1, 1)
        n = (dt.date(2026, 12, 31) - start).days + 1
        slices = slice_seasons(make_series(start, n), w)
        lengths = {s.season_label_year: s.season_length_days for s in slices}
        # 2023 season contains 29 Feb 2024
        assert lengths[2023] == lengths[2022] + 1
        assert lengths[2024] == lengths[2022]

    def test_slices_ordered_and_disjoint(self):
        w = builtin_calendar("Niger")
        start = dt.date(2010, 1, 1)
        n = (dt.date(2016, 12, 31) - start).days + 1
        slices = slice_seasons(make_series(start, n), w)
        assert [s.season_label_year for s in slices] == list(range(2010, 2017))
        for a, b in zip(slices, slices[1:]):
            a_end = a.start_date + dt.timedelta(days=a.season_length_days - 1)
            assert a_end < b.start_date

    def test_value_invariance(self):
        w = builtin_calendar("Niger")
        start = dt.date(2012, 1, 1)
        n = 3 * 365
        a = slice_seasons(make_series(start, n, fill=0.0), w)
        b = slice_seasons(make_series(start, n, fill=99.0), w)
        assert [(s.season_label_year, s.season_length_days) for s in a] == [
            (s.season_label_year, s.season_length_days) for s in b
        ]

    def test_slice_values_match_dates(self):
        w = builtin_calendar("Niger")
        start = dt.date(2015, 1, 1)
        n = 365
        vals = np.arange(n, dtype=float)
        series = SiteSeries("H1", "P1", "precip", start, vals)
        (s,) = slice_seasons(series, w)
        i0 = (dt.date(2015, 6, 1) - start).days
        np.testing.assert_array_equal(s.values, vals[i0 : i0 + 183])


class TestConfigFiles:
    def test_calendar_file_roundtrip(self, tmp_path):
        path = tmp_path / "cal.json"
        path.write_text(
            '[{"country_id": "X", "modality": "bimodal", "boundary_lat": 2.5,'
            ' "regions": [{"start": [4, 1], "end": [9, 30]},'
            ' {"start": [2, 1], "end": [7, 31]}]}]'
        )
        cal = load_calendar_file(path)
        assert cal["X"].boundary_lat == 2.5
        assert cal["X"].regions[0] == Region((4, 1), (9, 30))

    def test_wave_map(self, tmp_path):
        path = tmp_path / "waves.csv"
        path.write_text("country,survey_year,season_label_year\nMalawi,2016,2015\n")
        assert load_wave_map(path) == {("Malawi", 2016): 2015}


def test_season_dates_spanning():
    start, end = season_dates(Region((10, 1), (4, 30)), 2024)
    assert (start, end) == (dt.date(2024, 10, 1), dt.date(2025, 4, 30))
