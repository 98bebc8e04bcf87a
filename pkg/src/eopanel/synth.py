"""Desk-scale synthetic weather products and household panels with known truth.

Rain is a Markov wet/dry chain with gamma wet-day amounts and a seasonal
wet-probability sinusoid, so dry spells and every seasonal metric have real
variance. Temperature is a seasonal sinusoid plus AR(1) noise. Each product
applies one distortion (affine, multiplicative noise, censoring, or spatial
smoothing) to the shared latent truth.

The panel outcome is built on the IHS scale as
``intercept + household effect + year effect + beta_true * W + noise`` where
``W`` is a chosen metric of the undistorted product; outcomes are stored
after the inverse transform so the pipeline's IHS recovers the linear model.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import ndimage

from .errors import ConfigurationError
from .grid import Coordinate, GridDataset, extract_site
from .metrics import MetricConfig, build_climatology, rainfall_base, temperature_base
from .seasons import Region, SeasonWindow, slice_seasons


@dataclass
class WeatherParams:
    wet_prob: float = 0.35
    wet_prob_amplitude: float = 0.25
    wet_phase: float = -1.5
    wet_persistence: float = 0.35
    rain_gamma_shape: float = 0.9
    rain_gamma_scale: float = 9.0
    temp_mean_c: float = 24.0
    temp_amplitude_c: float = 4.0
    temp_phase: float = 0.0
    temp_ar1_rho: float = 0.7
    temp_noise_sd: float = 1.5
    tmax_offset_c: float = 6.0
    cell_heterogeneity_sd: float = 0.15


@dataclass
class ProductSpec:
    product_id: str
    variable: str  # "precip" or "temp"
    distortion: dict = field(default_factory=lambda: {"kind": "identity"})


@dataclass
class SynthConfig:
    seed: int = 7
    n_countries: int = 2
    n_households: int = 100
    n_years: int = 5
    start_year: int = 2010
    grid_rows: int = 6
    grid_cols: int = 6
    cell_size: float = 0.25
    urban_share: float = 0.3
    season_start: tuple[int, int] = (6, 1)
    season_end: tuple[int, int] = (11, 30)
    weather: WeatherParams = field(default_factory=WeatherParams)
    products: list[ProductSpec] = field(default_factory=lambda: [
        ProductSpec("synth-ident", "precip"),
        ProductSpec("synth-affine", "precip", {"kind": "affine", "a": 2.0, "b": 5.0}),
        ProductSpec("synth-tident", "temp"),
        ProductSpec("synth-tnoise", "temp", {"kind": "noise", "sigma": 0.5}),
    ])
    beta_true: float = 0.8
    driving_metric: str = "z_total"
    driving_product: str = ""  # default: first precip product
    intercept: float = 2.0
    household_sd: float = 0.5
    year_sd: float = 0.2
    noise_sd: float = 0.01

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        if "weather" in d:
            d["weather"] = WeatherParams(**d["weather"])
        if "products" in d:
            d["products"] = [
                ProductSpec(p["product_id"], p["variable"], p.get("distortion", {"kind": "identity"}))
                for p in d["products"]
            ]
        if "season_start" in d:
            d["season_start"] = tuple(d["season_start"])
        if "season_end" in d:
            d["season_end"] = tuple(d["season_end"])
        return cls(**d)

    def country_ids(self) -> list[str]:
        return [f"C{i + 1:02d}" for i in range(self.n_countries)]

    def season_window(self, country_id: str) -> SeasonWindow:
        return SeasonWindow(
            country_id=country_id,
            modality="unimodal",
            regions=(Region(self.season_start, self.season_end),),
        )

    def rain_products(self) -> list[str]:
        return [p.product_id for p in self.products if p.variable == "precip"]

    def temp_products(self) -> list[str]:
        return [p.product_id for p in self.products if p.variable == "temp"]

    def resolve_driving_product(self) -> str:
        if self.driving_product:
            return self.driving_product
        rains = self.rain_products()
        if not rains:
            raise ConfigurationError("no precip product to drive the outcome")
        return rains[0]


def _date_span(config: SynthConfig) -> tuple[dt.date, int]:
    start = dt.date(config.start_year, 1, 1)
    # one extra year so year-spanning seasons of the last label year close
    end = dt.date(config.start_year + config.n_years, 12, 31)
    return start, (end - start).days + 1


def _seasonal(doy: np.ndarray, amplitude: float, phase: float) -> np.ndarray:
    return amplitude * np.sin(2.0 * math.pi * doy / 365.25 + phase)


def gen_latent(config: SynthConfig, country_index: int):
    """Latent daily precip / temp-mean / temp-max fields for one country."""
    wp = config.weather
    start, n_days = _date_span(config)
    doy = np.array([
        (start + dt.timedelta(days=i)).timetuple().tm_yday for i in range(n_days)
    ], dtype=np.float64)
    rows, cols = config.grid_rows, config.grid_cols
    n_cells = rows * cols

    rng = np.random.default_rng([config.seed, country_index, 0])
    cell_factor = np.exp(rng.normal(0.0, wp.cell_heterogeneity_sd, size=n_cells))
    cell_temp_offset = rng.normal(0.0, 0.8, size=n_cells)

    p_base = np.clip(
        wp.wet_prob + _seasonal(doy, wp.wet_prob_amplitude, wp.wet_phase), 0.02, 0.98
    )
    precip = np.zeros((n_days, n_cells), dtype=np.float64)
    wet_prev = rng.random(n_cells) < p_base[0]
    for t in range(n_days):
        p_t = p_base[t] + wp.wet_persistence * (wet_prev.astype(np.float64) - p_base[t])
        wet = rng.random(n_cells) < np.clip(p_t, 0.01, 0.99)
        amounts = rng.gamma(wp.rain_gamma_shape, wp.rain_gamma_scale, size=n_cells)
        precip[t] = np.where(wet, amounts * cell_factor, 0.0)
        wet_prev = wet

    temp_season = wp.temp_mean_c + _seasonal(doy, wp.temp_amplitude_c, wp.temp_phase)
    innovations = rng.normal(
        0.0, wp.temp_noise_sd * math.sqrt(1.0 - wp.temp_ar1_rho**2), size=(n_days, n_cells)
    )
    ar = np.zeros((n_days, n_cells))
    ar[0] = rng.normal(0.0, wp.temp_noise_sd, size=n_cells)
    for t in range(1, n_days):
        ar[t] = wp.temp_ar1_rho * ar[t - 1] + innovations[t]
    tmean = temp_season[:, None] + cell_temp_offset[None, :] + ar
    tmax = tmean + wp.tmax_offset_c + np.abs(rng.normal(0.0, 1.0, size=(n_days, n_cells)))

    shape = (n_days, rows, cols)
    return start, precip.reshape(shape), tmean.reshape(shape), tmax.reshape(shape)


def apply_distortion(values: np.ndarray, distortion: dict, variable: str, rng: np.random.Generator) -> np.ndarray:
    kind = distortion.get("kind", "identity")
    if kind == "identity":
        return values.copy()
    if kind == "affine":
        a = float(distortion["a"])
        if a <= 0:
            raise ConfigurationError("affine distortion needs a > 0")
        return a * values + float(distortion.get("b", 0.0))
    if kind == "noise":
        sigma = float(distortion["sigma"])
        if variable == "precip":
            return values * np.exp(rng.normal(0.0, sigma, size=values.shape))
        return values + rng.normal(0.0, sigma, size=values.shape)
    if kind == "censor":
        threshold = float(distortion["threshold"])
        out = values.copy()
        out[out < threshold] = 0.0
        return out
    if kind == "smooth":
        radius = int(distortion["radius"])
        return ndimage.uniform_filter(
            values, size=(1, 2 * radius + 1, 2 * radius + 1), mode="nearest"
        )
    raise ConfigurationError(f"unknown distortion kind {kind!r}")


def _country_origin(config: SynthConfig, country_index: int) -> tuple[float, float]:
    # well-separated grids so no household can straddle countries
    return (-2.0 - 8.0 * country_index, 28.0 + 8.0 * country_index)


def gen_weather(config: SynthConfig) -> dict[tuple[str, str, str], GridDataset]:
    """All (country, product, variable) grids, canonical units, deterministic."""
    grids: dict[tuple[str, str, str], GridDataset] = {}
    for ci, country in enumerate(config.country_ids()):
        start, precip, tmean, tmax = gen_latent(config, ci)
        lat0, lon0 = _country_origin(config, ci)
        for pi, product in enumerate(config.products):
            rng = np.random.default_rng([config.seed, ci, 1 + pi])
            if product.variable == "precip":
                channels = {"precip": np.maximum(
                    apply_distortion(precip, product.distortion, "precip", rng), 0.0
                )}
                units = {"precip": "mm"}
            else:
                channels = {
                    "temp_mean": apply_distortion(tmean, product.distortion, "temp", rng),
                    "temp_max": apply_distortion(tmax, product.distortion, "temp", rng),
                }
                units = {"temp_mean": "celsius", "temp_max": "celsius"}
            for variable, vals in channels.items():
                grids[(country, product.product_id, variable)] = GridDataset(
                    product_id=product.product_id,
                    variable=variable,
                    lat0=lat0,
                    lon0=lon0,
                    cell_size=config.cell_size,
                    n_rows=config.grid_rows,
                    n_cols=config.grid_cols,
                    start_date=start,
                    n_days=vals.shape[0],
                    values=vals.astype(np.float32),
                    input_units=units[variable],
                    aggregation_rule="synthetic daily truth",
                )
    return grids


def gen_households(config: SynthConfig) -> dict[str, tuple[str, Coordinate]]:
    """household_id -> (country_id, coordinate), inside each country grid."""
    out: dict[str, tuple[str, Coordinate]] = {}
    for ci, country in enumerate(config.country_ids()):
        rng = np.random.default_rng([config.seed, ci, 999])
        lat0, lon0 = _country_origin(config, ci)
        lat_span = (config.grid_rows - 1) * config.cell_size
        lon_span = (config.grid_cols - 1) * config.cell_size
        for h in range(config.n_households):
            hid = f"{country}-H{h + 1:04d}"
            lat = lat0 - rng.random() * lat_span
            lon = lon0 + rng.random() * lon_span
            out[hid] = (country, Coordinate(lat, lon, rng.random() < config.urban_share))
    return out


def _driving_values(
    config: SynthConfig,
    grids: dict[tuple[str, str, str], GridDataset],
    households: dict[str, tuple[str, Coordinate]],
) -> dict[tuple[str, int], float]:
    """(household, season_year) -> the metric value that drives the outcome."""
    product = config.resolve_driving_product()
    metric_cfg = MetricConfig()
    out: dict[tuple[str, int], float] = {}
    is_temp_metric = config.driving_metric in ("gdd", "z_gdd", "dev_gdd", "t_mean")
    for hid, (country, coord) in households.items():
        window = config.season_window(country)
        if is_temp_metric:
            ds_mean = grids[(country, product, "temp_mean")]
            ds_max = grids[(country, product, "temp_max")]
            series_m = extract_site(ds_mean, coord, household_id=hid)
            series_x = extract_site(ds_max, coord, household_id=hid)
            slices_m = slice_seasons(series_m, window)
            slices_x = slice_seasons(series_x, window)
            per_season = {
                sm.season_label_year: (sm.start_date, temperature_base(sm, sx, metric_cfg))
                for sm, sx in zip(slices_m, slices_x)
            }
        else:
            ds = grids[(country, product, "precip")]
            series = extract_site(ds, coord, household_id=hid)
            per_season = {
                s.season_label_year: (s.start_date, rainfall_base(s.values, metric_cfg))
                for s in slice_seasons(series, window)
            }
        metric = config.driving_metric
        if metric in ("z_total", "dev_total", "z_gdd", "dev_gdd"):
            base_id = "gdd" if metric.endswith("gdd") else "total"
            clim = build_climatology(
                [(start, vals[base_id]) for start, vals in per_season.values()],
                hid, product, base_id,
            )
            for year, (start, vals) in per_season.items():
                if metric.startswith("z_"):
                    out[(hid, year)] = (vals[base_id] - clim.long_run_mean) / clim.long_run_sd
                else:
                    out[(hid, year)] = vals[base_id] - clim.long_run_mean
        else:
            for year, (start, vals) in per_season.items():
                out[(hid, year)] = vals[metric]
    return out


def gen_panel(
    config: SynthConfig,
    grids: dict[tuple[str, str, str], GridDataset],
    households: dict[str, tuple[str, Coordinate]],
) -> pd.DataFrame:
    """Household-year panel whose IHS-scale outcome embeds beta_true."""
    driving = _driving_values(config, grids, households)
    years = list(range(config.start_year, config.start_year + config.n_years))
    country_ids = config.country_ids()

    rng = np.random.default_rng([config.seed, 777])
    hh_ids = sorted(households)
    alpha = dict(zip(hh_ids, rng.normal(0.0, config.household_sd, size=len(hh_ids))))
    gamma = {
        (c, y): g
        for c in country_ids
        for y, g in zip(years, rng.normal(0.0, config.year_sd, size=len(years)))
    }

    rows = []
    for hid in hh_ids:
        country, _ = households[hid]
        for year in years:
            w = driving.get((hid, year))
            if w is None:
                continue
            base = config.intercept + alpha[hid] + gamma[(country, year)] + config.beta_true * w
            y_value = base + rng.normal(0.0, config.noise_sd)
            y_yield = base + rng.normal(0.0, config.noise_sd)
            rows.append({
                "household_id": hid,
                "country_id": country,
                "year": year,
                "outcome_value_usd_ha": math.sinh(y_value),
                "outcome_yield_kg_ha": math.sinh(y_yield),
                "fert_kg_ha": float(rng.lognormal(2.0, 0.8)),
                "labor_days_ha": float(rng.lognormal(3.0, 0.5)),
                "pesticide": int(rng.random() < 0.3),
                "herbicide": int(rng.random() < 0.3),
                "irrigation": int(rng.random() < 0.1),
            })
    return pd.DataFrame(rows)


def truth_payload(config: SynthConfig) -> dict:
    return {
        "seed": config.seed,
        "beta_true": config.beta_true,
        "driving_metric": config.driving_metric,
        "driving_product": config.resolve_driving_product(),
        "intercept": config.intercept,
        "household_sd": config.household_sd,
        "year_sd": config.year_sd,
        "noise_sd": config.noise_sd,
        "products": [
            {"product_id": p.product_id, "variable": p.variable, "distortion": p.distortion}
            for p in config.products
        ],
    }


def save_truth(config: SynthConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(truth_payload(config), fh, indent=2, sort_keys=True)
        fh.write("\n")
