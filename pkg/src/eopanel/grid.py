"""Gridded daily weather products: loading, unit normalization, point extraction.

A product is stored as a flat stack: ``<name>.hdr.json`` holding the scalar
fields and ``<name>.f32`` holding raw little-endian float32 values, day-major
and row-major within each day. NaN marks missing days/cells.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .errors import ConfigurationError, CoverageError, DataError, OutOfBoundsError

VARIABLES = ("precip", "temp_mean", "temp_max")
PRECIP_UNITS = ("mm", "m", "kg_m2_s")
TEMP_UNITS = ("celsius", "kelvin")

SECONDS_PER_DAY = 86_400.0
KELVIN_OFFSET = 273.15
KM_PER_DEG = 111.32

#: long-run statistics never reach before this date
CLIMATOLOGY_FLOOR = dt.date(1983, 1, 1)


@dataclass(frozen=True)
class Coordinate:
    lat: float
    lon: float
    urban_flag: bool = False

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0) or not (-180.0 <= self.lon <= 180.0):
            raise DataError(f"coordinate out of range: ({self.lat}, {self.lon})")


@dataclass
class GridDataset:
    """One product's daily gridded field.

    Row 0 is the northernmost row (latitude decreases with row index),
    column 0 the westernmost column. ``lat0``/``lon0`` are cell centers.
    """

    product_id: str
    variable: str
    lat0: float
    lon0: float
    cell_size: float
    n_rows: int
    n_cols: int
    start_date: dt.date
    n_days: int
    values: np.ndarray  # (n_days, n_rows, n_cols) float32
    input_units: str
    aggregation_rule: str = ""  # free-text note on daily pre-aggregation

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ConfigurationError(f"unknown variable {self.variable!r}")
        if self.cell_size <= 0:
            raise ConfigurationError("cell_size must be positive")
        self.values = np.asarray(self.values, dtype=np.float32).reshape(
            self.n_days, self.n_rows, self.n_cols
        )

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=self.n_days - 1)

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return (self.lat0 - row * self.cell_size, self.lon0 + col * self.cell_size)


@dataclass
class SiteSeries:
    """Daily values at one household's location, already unit-normalized."""

    household_id: str
    product_id: str
    variable: str
    start_date: dt.date
    values: np.ndarray  # 1-d float64, mm/day or degC

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self.values) - 1)


def normalize_units(dataset: GridDataset) -> GridDataset:
    """Convert a dataset to canonical units (precip mm/day, temp degC).

    Idempotent: already-canonical data comes back unchanged (new object).
    Negative precipitation is clamped to zero and temperatures outside
    [-90, 60] degC are set missing, so the canonical invariants always hold.
    """
    vals = dataset.values.astype(np.float32, copy=True)
    if dataset.variable == "precip":
        if dataset.input_units == "mm":
            pass
        elif dataset.input_units == "m":
            vals *= 1000.0
        elif dataset.input_units == "kg_m2_s":
            vals *= SECONDS_PER_DAY
        else:
            raise ConfigurationError(
                f"unknown precip units {dataset.input_units!r} for {dataset.product_id}"
            )
        np.maximum(vals, 0.0, out=vals, where=~np.isnan(vals))
        units = "mm"
    else:
        if dataset.input_units == "celsius":
            pass
        elif dataset.input_units == "kelvin":
            vals -= KELVIN_OFFSET
        else:
            raise ConfigurationError(
                f"unknown temperature units {dataset.input_units!r} for {dataset.product_id}"
            )
        with np.errstate(invalid="ignore"):
            vals[(vals < -90.0) | (vals > 60.0)] = np.nan
        units = "celsius"
    return replace(dataset, values=vals, input_units=units)


def _nearest_index(offset: float, cell_size: float) -> int:
    # round-half-down so a point on the midline goes to the lower index
    return int(math.ceil(offset / cell_size - 0.5))


def extract_site(
    dataset: GridDataset,
    point: Coordinate,
    date_range: tuple[dt.date, dt.date] | None = None,
    household_id: str = "",
    method: str = "nearest",
) -> SiteSeries:
    """Pull the daily series at ``point`` for ``date_range`` (inclusive).

    Default is the nearest-cell rule (no interpolation); ``method="bilinear"``
    is available but never the default.
    """
    if date_range is None:
        date_range = (dataset.start_date, dataset.end_date)
    d0, d1 = date_range
    if d0 < dataset.start_date or d1 > dataset.end_date or d1 < d0:
        raise CoverageError(
            f"{dataset.product_id}: range {d0}..{d1} outside coverage "
            f"{dataset.start_date}..{dataset.end_date}"
        )
    i0 = (d0 - dataset.start_date).days
    i1 = (d1 - dataset.start_date).days + 1

    row_f = (dataset.lat0 - point.lat) / dataset.cell_size
    col_f = (point.lon - dataset.lon0) / dataset.cell_size
    if method == "nearest":
        row = _nearest_index(dataset.lat0 - point.lat, dataset.cell_size)
        col = _nearest_index(point.lon - dataset.lon0, dataset.cell_size)
        if not (0 <= row < dataset.n_rows and 0 <= col < dataset.n_cols):
            raise OutOfBoundsError(
                f"point ({point.lat}, {point.lon}) outside grid {dataset.product_id}"
            )
        series = dataset.values[i0:i1, row, col].astype(np.float64)
    elif method == "bilinear":
        r0 = min(max(int(math.floor(row_f)), 0), dataset.n_rows - 2)
        c0 = min(max(int(math.floor(col_f)), 0), dataset.n_cols - 2)
        if not (-0.5 <= row_f <= dataset.n_rows - 0.5 and -0.5 <= col_f <= dataset.n_cols - 0.5):
            raise OutOfBoundsError(
                f"point ({point.lat}, {point.lon}) outside grid {dataset.product_id}"
            )
        wr = min(max(row_f - r0, 0.0), 1.0)
        wc = min(max(col_f - c0, 0.0), 1.0)
        block = dataset.values[i0:i1, r0 : r0 + 2, c0 : c0 + 2].astype(np.float64)
        series = (
            block[:, 0, 0] * (1 - wr) * (1 - wc)
            + block[:, 0, 1] * (1 - wr) * wc
            + block[:, 1, 0] * wr * (1 - wc)
            + block[:, 1, 1] * wr * wc
        )
    else:
        raise ConfigurationError(f"unknown extraction method {method!r}")

    return SiteSeries(
        household_id=household_id,
        product_id=dataset.product_id,
        variable=dataset.variable,
        start_date=d0,
        values=series,
    )


def _displacement_radius_km(urban: bool, rng: np.random.Generator) -> float:
    if urban:
        return 2.0
    return 10.0 if rng.random() < 0.01 else 5.0


def displace_coordinate(point: Coordinate, rng_seed) -> Coordinate:
    """DHS-style random displacement: urban within 2 km, rural within 5 km,
    1% of rural within 10 km. Uniform over the disk; deterministic per seed."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    radius_km = _displacement_radius_km(point.urban_flag, rng)
    dist = radius_km * math.sqrt(rng.random())
    theta = rng.random() * 2.0 * math.pi
    dlat = dist * math.cos(theta) / KM_PER_DEG
    dlon = dist * math.sin(theta) / (KM_PER_DEG * math.cos(math.radians(point.lat)))
    return Coordinate(point.lat + dlat, point.lon + dlon, point.urban_flag)


# ---------------------------------------------------------------------------
# flat stack I/O

def save_grid(dataset: GridDataset, path_prefix) -> None:
    header = {
        "product_id": dataset.product_id,
        "variable": dataset.variable,
        "lat0": dataset.lat0,
        "lon0": dataset.lon0,
        "cell_size": dataset.cell_size,
        "n_rows": dataset.n_rows,
        "n_cols": dataset.n_cols,
        "start_date": dataset.start_date.isoformat(),
        "n_days": dataset.n_days,
        "input_units": dataset.input_units,
        "aggregation_rule": dataset.aggregation_rule,
        "byte_order": "little",
    }
    with open(f"{path_prefix}.hdr.json", "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")
    dataset.values.astype("<f4").tofile(f"{path_prefix}.f32")


def load_grid(path_prefix) -> GridDataset:
    with open(f"{path_prefix}.hdr.json") as fh:
        h = json.load(fh)
    raw = np.fromfile(f"{path_prefix}.f32", dtype="<f4")
    expected = h["n_days"] * h["n_rows"] * h["n_cols"]
    if raw.size != expected:
        raise DataError(
            f"{path_prefix}.f32 holds {raw.size} values, header implies {expected}"
        )
    return GridDataset(
        product_id=h["product_id"],
        variable=h["variable"],
        lat0=h["lat0"],
        lon0=h["lon0"],
        cell_size=h["cell_size"],
        n_rows=h["n_rows"],
        n_cols=h["n_cols"],
        start_date=dt.date.fromisoformat(h["start_date"]),
        n_days=h["n_days"],
        values=raw,
        input_units=h["input_units"],
        aggregation_rule=h.get("aggregation_rule", ""),
    )


def load_coordinates(csv_path) -> dict[str, Coordinate]:
    """Read the ``household_id,lat,lon,urban`` coordinates file."""
    df = pd.read_csv(csv_path, dtype={"household_id": str})
    required = {"household_id", "lat", "lon", "urban"}
    if not required.issubset(df.columns):
        raise DataError(f"{csv_path}: expected columns {sorted(required)}")
    out: dict[str, Coordinate] = {}
    for rec in df.itertuples(index=False):
        out[rec.household_id] = Coordinate(
            float(rec.lat), float(rec.lon), bool(int(rec.urban))
        )
    return out


def save_coordinates(coords: dict[str, Coordinate], csv_path) -> None:
    rows = [
        {"household_id": hid, "lat": c.lat, "lon": c.lon, "urban": int(c.urban_flag)}
        for hid, c in sorted(coords.items())
    ]
    pd.DataFrame(rows).to_csv(csv_path, index=False)
