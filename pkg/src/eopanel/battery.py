"""Battery enumeration, blinding, and execution.

The paper-scale configuration (3 models x 2 outcomes x 6 countries x
(14 rainfall metrics x 6 products + 8 temperature metrics x 3 products))
enumerates to exactly 3,888 specs over 648 distinct data versions.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigurationError, EopanelError, IntegrityError
from .metrics import RAINFALL_METRICS, TEMPERATURE_METRICS
from .regress import MODELS, OUTCOMES, RegressionResult, RegressionSpec, fit


@dataclass
class BatteryConfig:
    countries: list[str]
    rain_products: list[str]
    temp_products: list[str]
    rain_metrics: list[str] = field(default_factory=lambda: list(RAINFALL_METRICS))
    temp_metrics: list[str] = field(default_factory=lambda: list(TEMPERATURE_METRICS))
    models: list[str] = field(default_factory=lambda: list(MODELS))
    outcomes: list[str] = field(default_factory=lambda: list(OUTCOMES))
    quadratic: bool = False  # True adds a quadratic variant of every spec
    blind_seed: int | None = None

    def __post_init__(self):
        bad_rain = set(self.rain_metrics) - set(RAINFALL_METRICS)
        bad_temp = set(self.temp_metrics) - set(TEMPERATURE_METRICS)
        if bad_rain or bad_temp:
            raise ConfigurationError(
                f"metric/product type mismatch: rainfall {sorted(bad_rain)}, "
                f"temperature {sorted(bad_temp)}"
            )
        if set(self.rain_products) & set(self.temp_products):
            raise ConfigurationError("a product cannot be both rainfall and temperature")

    @classmethod
    def from_dict(cls, d: dict) -> "BatteryConfig":
        kwargs = {k: d[k] for k in (
            "countries", "rain_products", "temp_products", "rain_metrics",
            "temp_metrics", "models", "outcomes", "quadratic", "blind_seed",
        ) if k in d}
        return cls(**kwargs)

    def data_versions(self) -> list[tuple[str, str, str]]:
        """Distinct (country, metric, product) datasets the battery touches."""
        versions = []
        for country in self.countries:
            for metric in self.rain_metrics:
                for product in self.rain_products:
                    versions.append((country, metric, product))
            for metric in self.temp_metrics:
                for product in self.temp_products:
                    versions.append((country, metric, product))
        return versions


def enumerate_specs(config: BatteryConfig) -> list[RegressionSpec]:
    """Deterministic, sorted list of every battery cell."""
    quad_variants = (False, True) if config.quadratic else (False,)
    specs = []
    for country, metric, product in config.data_versions():
        for model in config.models:
            for outcome in config.outcomes:
                for quad in quad_variants:
                    specs.append(RegressionSpec(
                        model=model,
                        outcome=outcome,
                        metric_id=metric,
                        product_id=product,
                        country_id=country,
                        quadratic=quad,
                    ))
    return sorted(specs, key=lambda s: s.spec_id)


# ---------------------------------------------------------------------------
# blinding

@dataclass
class BlindingMap:
    seed: int
    mapping: dict[str, str]  # product_id -> anonymous label
    config_sha256: str

    def reverse(self) -> dict[str, str]:
        return {v: k for k, v in self.mapping.items()}


def config_hash(config: BatteryConfig) -> str:
    payload = json.dumps({
        "countries": config.countries,
        "rain_products": config.rain_products,
        "temp_products": config.temp_products,
        "rain_metrics": config.rain_metrics,
        "temp_metrics": config.temp_metrics,
        "models": config.models,
        "outcomes": config.outcomes,
        "quadratic": config.quadratic,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def blind(config: BatteryConfig, seed: int) -> BlindingMap:
    """Seeded bijection product_id <-> "EO-n" label, stable under the seed."""
    products = sorted(config.rain_products) + sorted(config.temp_products)
    if not products:
        raise ConfigurationError("cannot blind an empty product list")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(products))
    mapping = {products[i]: f"EO-{rank + 1}" for rank, i in enumerate(order)}
    return BlindingMap(seed=seed, mapping=mapping, config_sha256=config_hash(config))


def save_blindmap(bmap: BlindingMap, path) -> None:
    with open(path, "w") as fh:
        json.dump({
            "seed": bmap.seed,
            "config_sha256": bmap.config_sha256,
            "map": bmap.mapping,
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_blindmap(path) -> BlindingMap:
    with open(path) as fh:
        d = json.load(fh)
    return BlindingMap(seed=d["seed"], mapping=d["map"], config_sha256=d["config_sha256"])


def unblind_records(records: list[dict], bmap: BlindingMap, config: BatteryConfig) -> list[dict]:
    """Restore real product ids; refuses a map minted for a different config."""
    if bmap.config_sha256 != config_hash(config):
        raise IntegrityError("blinding map does not match this battery config")
    reverse = bmap.reverse()
    out = []
    for rec in records:
        rec = dict(rec)
        label = rec["product"]
        real = reverse.get(label, label)
        rec["product"] = real
        rec["spec_id"] = _rewrite_spec_id(rec["spec_id"], label, real)
        out.append(rec)
    return out


def _rewrite_spec_id(spec_id: str, old_product: str, new_product: str) -> str:
    parts = spec_id.split(".")
    idx = 4  # country.model.outcome.metric.product[.quad]
    if parts[idx] == old_product:
        parts[idx] = new_product
    return ".".join(parts)


# ---------------------------------------------------------------------------
# execution

def result_record(result: RegressionResult, label: str, input_hash: str) -> dict:
    s = result.spec
    return {
        "spec_id": _rewrite_spec_id(s.spec_id, s.product_id, label),
        "country": s.country_id,
        "model": s.model,
        "outcome": s.outcome,
        "metric": s.metric_id,
        "product": label,
        "quadratic": s.quadratic,
        "beta1": result.beta1,
        "se_beta1": result.se_beta1,
        "t_stat": result.t_stat,
        "p_value": result.p_value,
        "ci_low": result.ci_low,
        "ci_high": result.ci_high,
        "loglik": result.loglik,
        "n_obs": result.n_obs,
        "n_clusters": result.n_clusters,
        "n_params": result.n_params,
        "n_dropped": result.n_dropped,
        "input_hash": input_hash,
    }


def build_spec_frames(
    config: BatteryConfig,
    panel: pd.DataFrame,
    metrics_wide: pd.DataFrame,
    wave_map: dict[tuple[str, int], int] | None = None,
) -> dict[tuple[str, str], pd.DataFrame]:
    """One merged frame per (country, product): panel rows joined to the
    product's wide metric columns on (household, season year)."""
    frames: dict[tuple[str, str], pd.DataFrame] = {}
    for country in config.countries:
        cpanel = panel[panel["country_id"] == country].copy()
        if wave_map:
            cpanel["season_year"] = [
                wave_map.get((country, int(y)), int(y)) for y in cpanel["year"]
            ]
        else:
            cpanel["season_year"] = cpanel["year"].astype(int)
        for product in list(config.rain_products) + list(config.temp_products):
            pm = metrics_wide[
                (metrics_wide["country"] == country)
                & (metrics_wide["product_id"] == product)
            ]
            merged = cpanel.merge(
                pm.drop(columns=["country", "product_id"]),
                left_on=["household_id", "season_year"],
                right_on=["household_id", "season_year"],
                how="inner",
            )
            frames[(country, product)] = merged
    return frames


def run_battery(
    config: BatteryConfig,
    panel: pd.DataFrame,
    metrics_wide: pd.DataFrame,
    wave_map: dict[tuple[str, int], int] | None = None,
    workers: int = 1,
    blinding: BlindingMap | None = None,
    input_hash: str = "",
    previous: list[dict] | None = None,
) -> tuple[list[dict], list[dict]]:
    """Execute every spec; per-spec failures are recorded, never fatal.

    Returns (result records sorted by spec id, failure records). ``previous``
    records whose input hash matches are reused without recomputation.
    """
    specs = enumerate_specs(config)
    frames = build_spec_frames(config, panel, metrics_wide, wave_map)
    labels = blinding.mapping if blinding else {}

    done: dict[str, dict] = {}
    if previous:
        for rec in previous:
            if rec.get("input_hash") == input_hash:
                done[rec["spec_id"]] = rec

    def run_one(spec: RegressionSpec):
        label = labels.get(spec.product_id, spec.product_id)
        blinded_id = _rewrite_spec_id(spec.spec_id, spec.product_id, label)
        if blinded_id in done:
            return ("cached", done[blinded_id])
        frame = frames[(spec.country_id, spec.product_id)]
        frame = frame.rename(columns={spec.metric_id: "W"})
        try:
            result = fit(spec, frame)
        except EopanelError as exc:
            return ("failed", {
                "spec_id": blinded_id,
                "country": spec.country_id,
                "model": spec.model,
                "outcome": spec.outcome,
                "metric": spec.metric_id,
                "product": label,
                "error": type(exc).__name__,
                "message": str(exc).replace(spec.product_id, label),
            })
        return ("ok", result_record(result, label, input_hash))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_one, specs))
    else:
        outcomes = [run_one(s) for s in specs]

    results = [rec for status, rec in outcomes if status in ("ok", "cached")]
    failures = [rec for status, rec in outcomes if status == "failed"]
    results.sort(key=lambda r: r["spec_id"])
    failures.sort(key=lambda r: r["spec_id"])
    return results, failures


def save_results_jsonl(records: list[dict], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True))
            fh.write("\n")


def load_results_jsonl(path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
