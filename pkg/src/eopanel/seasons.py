"""Growing-season calendars and season slicing.

Built-in windows cover the six study countries; bimodal countries (Nigeria,
Uganda) split into North/South at a configured boundary latitude. Seasons may
span calendar years (Malawi, Tanzania) and are labeled by the year in which
they start.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .errors import ConfigurationError, DataError
from .grid import Coordinate, SiteSeries


@dataclass(frozen=True)
class Region:
    start: tuple[int, int]  # (month, day)
    end: tuple[int, int]

    @property
    def spans_year(self) -> bool:
        return self.end < self.start


@dataclass(frozen=True)
class SeasonWindow:
    country_id: str
    modality: str  # "unimodal" | "bimodal"
    regions: tuple[Region, ...]
    boundary_lat: float | None = None  # bimodal only; North is lat >= boundary

    def __post_init__(self):
        if self.modality == "unimodal" and len(self.regions) != 1:
            raise ConfigurationError("unimodal window needs exactly one region")
        if self.modality == "bimodal" and len(self.regions) != 2:
            raise ConfigurationError("bimodal window needs exactly two regions")


_BUILTIN = {
    "Ethiopia": SeasonWindow("Ethiopia", "unimodal", (Region((3, 1), (11, 30)),)),
    "Malawi": SeasonWindow("Malawi", "unimodal", (Region((10, 1), (4, 30)),)),
    "Niger": SeasonWindow("Niger", "unimodal", (Region((6, 1), (11, 30)),)),
    "Nigeria": SeasonWindow(
        "Nigeria", "bimodal", (Region((5, 1), (9, 30)), Region((3, 1), (8, 31)))
    ),
    "Tanzania": SeasonWindow("Tanzania", "unimodal", (Region((11, 1), (4, 30)),)),
    "Uganda": SeasonWindow(
        "Uganda", "bimodal", (Region((4, 1), (9, 30)), Region((2, 1), (7, 31)))
    ),
}

NORTH, SOUTH = 0, 1


def builtin_calendar(country_id: str, boundary_lat: float | None = None) -> SeasonWindow:
    """FAO crop-calendar growing seasons for the six study countries.

    Bimodal countries require ``boundary_lat`` before region resolution; there
    is deliberately no default boundary.
    """
    try:
        window = _BUILTIN[country_id]
    except KeyError:
        raise ConfigurationError(
            f"no built-in calendar for {country_id!r}; supply a calendar file"
        ) from None
    if boundary_lat is not None:
        window = replace(window, boundary_lat=boundary_lat)
    return window


def resolve_region(window: SeasonWindow, point: Coordinate) -> int:
    if window.modality == "unimodal":
        return 0
    if window.boundary_lat is None:
        raise ConfigurationError(
            f"{window.country_id}: bimodal window has no boundary latitude configured"
        )
    return NORTH if point.lat >= window.boundary_lat else SOUTH


@dataclass
class SeasonSlice:
    household_id: str
    product_id: str
    season_label_year: int
    start_date: dt.date
    values: np.ndarray

    @property
    def season_length_days(self) -> int:
        return len(self.values)


def season_dates(region: Region, label_year: int) -> tuple[dt.date, dt.date]:
    start = dt.date(label_year, *region.start)
    end_year = label_year + 1 if region.spans_year else label_year
    return start, dt.date(end_year, *region.end)


def slice_seasons(series: SiteSeries, window: SeasonWindow, region_id: int = 0) -> list[SeasonSlice]:
    """One slice per season fully covered by the series; partial seasons drop."""
    region = window.regions[region_id]
    slices = []
    for year in range(series.start_date.year - 1, series.end_date.year + 1):
        start, end = season_dates(region, year)
        if start < series.start_date or end > series.end_date:
            continue
        i0 = (start - series.start_date).days
        i1 = (end - series.start_date).days + 1
        slices.append(
            SeasonSlice(
                household_id=series.household_id,
                product_id=series.product_id,
                season_label_year=year,
                start_date=start,
                values=series.values[i0:i1],
            )
        )
    return slices


# ---------------------------------------------------------------------------
# config files

def load_calendar_file(path) -> dict[str, SeasonWindow]:
    """JSON array of season-window records overriding/extending the built-ins."""
    with open(path) as fh:
        records = json.load(fh)
    out = {}
    for rec in records:
        regions = tuple(
            Region(tuple(r["start"]), tuple(r["end"])) for r in rec["regions"]
        )
        out[rec["country_id"]] = SeasonWindow(
            country_id=rec["country_id"],
            modality=rec["modality"],
            regions=regions,
            boundary_lat=rec.get("boundary_lat"),
        )
    return out


def load_wave_map(path) -> dict[tuple[str, int], int]:
    """CSV ``country,survey_year,season_label_year`` pairing waves to seasons."""
    df = pd.read_csv(path)
    required = {"country", "survey_year", "season_label_year"}
    if not required.issubset(df.columns):
        raise DataError(f"{path}: expected columns {sorted(required)}")
    return {
        (str(r.country), int(r.survey_year)): int(r.season_label_year)
        for r in df.itertuples(index=False)
    }
