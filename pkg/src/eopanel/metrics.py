"""The 22 per-season weather metrics and their long-run climatologies.

Rainfall (14): mean, median, variance, skew, total, dev_total, z_total,
rain_days, dev_rain_days, no_rain_days, dev_no_rain_days, share_rain_days,
dev_share_rain_days, max_dry_spell.

Temperature (8): t_mean, t_median, t_variance, t_skew, gdd, dev_gdd, z_gdd,
mean_tmax.

``dev_*`` is the raw difference from the long-run mean; ``z_*`` is the
z-score against the long-run mean and sd. Long-run statistics use every
season starting on or after 1983-01-01.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, ClimatologyError, MetricError
from .grid import CLIMATOLOGY_FLOOR
from .seasons import SeasonSlice

RAINFALL_METRICS = (
    "mean", "median", "variance", "skew", "total", "dev_total", "z_total",
    "rain_days", "dev_rain_days", "no_rain_days", "dev_no_rain_days",
    "share_rain_days", "dev_share_rain_days", "max_dry_spell",
)
TEMPERATURE_METRICS = (
    "t_mean", "t_median", "t_variance", "t_skew", "gdd", "dev_gdd", "z_gdd",
    "mean_tmax",
)
ALL_METRICS = RAINFALL_METRICS + TEMPERATURE_METRICS

#: base statistic backing each deviation/z metric
CLIMATOLOGY_BASE = {
    "dev_total": "total",
    "z_total": "total",
    "dev_rain_days": "rain_days",
    "dev_no_rain_days": "no_rain_days",
    "dev_share_rain_days": "share_rain_days",
    "dev_gdd": "gdd",
    "z_gdd": "gdd",
}
CLIMATOLOGY_BASES = ("total", "rain_days", "no_rain_days", "share_rain_days", "gdd")


@dataclass(frozen=True)
class MetricConfig:
    rain_threshold_mm: float = 1.0
    gdd_base_c: float = 10.0
    gdd_cap_c: float = 30.0
    gdd_mode: str = "degree_days"  # or "count_days_in_bound"
    max_gap_fraction: float = 0.05
    nan_counts_as_dry: bool = False

    def to_dict(self) -> dict:
        return {
            "rain_threshold_mm": self.rain_threshold_mm,
            "gdd_base_c": self.gdd_base_c,
            "gdd_cap_c": self.gdd_cap_c,
            "gdd_mode": self.gdd_mode,
            "max_gap_fraction": self.max_gap_fraction,
            "nan_counts_as_dry": self.nan_counts_as_dry,
        }


@dataclass
class Climatology:
    household_id: str
    product_id: str
    metric_id: str
    long_run_mean: float
    long_run_sd: float
    n_seasons: int

    @property
    def degenerate(self) -> bool:
        return self.long_run_sd == 0.0


def _moments(x: np.ndarray) -> tuple[float, float, float, float]:
    """mean, median, sample variance (n-1), Fisher-Pearson g1 skew."""
    n = x.size
    mean = float(x.mean())
    median = float(np.median(x))
    variance = float(x.var(ddof=1)) if n > 1 else 0.0
    centered = x - mean
    m2 = float(np.mean(centered**2))
    # g1 = m3 / m2^1.5, computed on standardized values so a tiny m2
    # cannot underflow the denominator
    skew = 0.0 if m2 == 0.0 else float(np.mean((centered / np.sqrt(m2)) ** 3))
    return mean, median, variance, skew


def _longest_run(mask: np.ndarray) -> int:
    if not mask.any():
        return 0
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return int((edges[1::2] - edges[::2]).max())


def _valid(values: np.ndarray, config: MetricConfig, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    nan = np.isnan(values)
    if nan.all():
        raise MetricError(f"{what}: all days missing")
    if nan.mean() > config.max_gap_fraction:
        raise MetricError(
            f"{what}: {nan.mean():.1%} missing exceeds "
            f"{config.max_gap_fraction:.0%} tolerance"
        )
    return values


def rainfall_base(values: np.ndarray, config: MetricConfig = MetricConfig()) -> dict[str, float]:
    """Season-level rainfall statistics that need no climatology."""
    values = _valid(values, config, "rainfall slice")
    nan = np.isnan(values)
    wet_full = np.zeros(values.size, dtype=bool)
    wet_full[~nan] = values[~nan] >= config.rain_threshold_mm
    if config.nan_counts_as_dry:
        length = values.size
        rain_days = int(wet_full.sum())
        dry_full = ~wet_full
    else:
        length = int((~nan).sum())
        rain_days = int(wet_full.sum())
        dry_full = ~wet_full & ~nan  # missing days break dry runs
    obs = values[~nan]
    mean, median, variance, skew = _moments(obs)
    return {
        "mean": mean,
        "median": median,
        "variance": variance,
        "skew": skew,
        "total": float(obs.sum()),
        "rain_days": float(rain_days),
        "no_rain_days": float(length - rain_days),
        "share_rain_days": rain_days / length,
        "max_dry_spell": float(_longest_run(dry_full)),
        "season_length_days": float(length),
    }


def temperature_base(
    slice_mean: SeasonSlice,
    slice_max: SeasonSlice,
    config: MetricConfig = MetricConfig(),
) -> dict[str, float]:
    """Season-level temperature statistics from aligned mean/max slices."""
    if (
        slice_mean.start_date != slice_max.start_date
        or slice_mean.season_length_days != slice_max.season_length_days
    ):
        raise AlignmentError(
            f"temp slices misaligned for household {slice_mean.household_id}: "
            f"{slice_mean.start_date}/{slice_mean.season_length_days} vs "
            f"{slice_max.start_date}/{slice_max.season_length_days}"
        )
    tmean = _valid(slice_mean.values, config, "temp-mean slice")
    tmax = _valid(slice_max.values, config, "temp-max slice")
    obs = tmean[~np.isnan(tmean)]
    mean, median, variance, skew = _moments(obs)
    if config.gdd_mode == "degree_days":
        gdd = float(np.sum(np.maximum(0.0, np.minimum(obs, config.gdd_cap_c) - config.gdd_base_c)))
    elif config.gdd_mode == "count_days_in_bound":
        gdd = float(np.sum((obs >= config.gdd_base_c) & (obs <= config.gdd_cap_c)))
    else:
        raise MetricError(f"unknown gdd_mode {config.gdd_mode!r}")
    return {
        "t_mean": mean,
        "t_median": median,
        "t_variance": variance,
        "t_skew": skew,
        "gdd": gdd,
        "mean_tmax": float(np.nanmean(tmax)),
    }


def build_climatology(
    season_values: list[tuple[dt.date, float]],
    household_id: str,
    product_id: str,
    metric_id: str,
) -> Climatology:
    """Long-run mean/sd of one base metric over seasons starting >= 1983."""
    usable = [v for start, v in season_values if start >= CLIMATOLOGY_FLOOR]
    if len(usable) < 2:
        raise ClimatologyError(
            f"{household_id}/{product_id}/{metric_id}: "
            f"{len(usable)} usable seasons, need >= 2"
        )
    arr = np.asarray(usable, dtype=np.float64)
    return Climatology(
        household_id=household_id,
        product_id=product_id,
        metric_id=metric_id,
        long_run_mean=float(arr.mean()),
        long_run_sd=float(arr.std(ddof=1)),
        n_seasons=len(usable),
    )


def _with_deviations(base: dict[str, float], clim: dict[str, Climatology], ids) -> dict[str, float]:
    out = {k: base[k] for k in ids if k in base}
    for metric_id in ids:
        base_id = CLIMATOLOGY_BASE.get(metric_id)
        if base_id is None:
            continue
        c = clim[base_id]
        if metric_id.startswith("dev_"):
            out[metric_id] = base[base_id] - c.long_run_mean
        else:  # z_*
            if c.degenerate:
                out[metric_id] = float("nan")  # undefined z, row drops downstream
            else:
                out[metric_id] = (base[base_id] - c.long_run_mean) / c.long_run_sd
    return out


def rainfall_metrics(
    slice_: SeasonSlice,
    clim: dict[str, Climatology],
    config: MetricConfig = MetricConfig(),
) -> dict[str, float]:
    """All 14 rainfall metrics for one season slice."""
    base = rainfall_base(slice_.values, config)
    out = _with_deviations(base, clim, RAINFALL_METRICS)
    out["season_length_days"] = base["season_length_days"]
    return out


def temperature_metrics(
    slice_mean: SeasonSlice,
    slice_max: SeasonSlice,
    clim: dict[str, Climatology],
    config: MetricConfig = MetricConfig(),
) -> dict[str, float]:
    """All 8 temperature metrics for one aligned pair of season slices."""
    base = temperature_base(slice_mean, slice_max, config)
    return _with_deviations(base, clim, TEMPERATURE_METRICS)
