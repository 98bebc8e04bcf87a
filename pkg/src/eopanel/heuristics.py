"""Heuristic summaries and presentation documents built from battery results.

Produces: significance shares and mean log-likelihoods per (product, metric,
model) group; specification-chart documents (coefficient + CI per regression,
sorted within model region, red/white/blue class); bumpline rank tables
(product rank by signed coefficient across model x outcome columns); and
per-year descriptive means with normal 95% CIs.
"""

from __future__ import annotations

import json
import math
import warnings

import numpy as np
import pandas as pd

SCHEMA_VERSION = 1
SIG_LEVELS = (0.01, 0.05, 0.10)
DEFAULT_ALPHA = 0.05

#: relative tolerance under which two coefficients count as tied for ranking
RANK_TIE_RTOL = 1e-7


def results_frame(records: list[dict]) -> pd.DataFrame:
    df = pd.DataFrame(records)
    if df.empty:
        df = pd.DataFrame(columns=[
            "spec_id", "country", "model", "outcome", "metric", "product",
            "quadratic", "beta1", "se_beta1", "t_stat", "p_value",
            "ci_low", "ci_high", "loglik", "n_obs", "n_clusters",
        ])
    return df


def significance_shares(
    df: pd.DataFrame,
    levels: tuple[float, ...] = SIG_LEVELS,
    failures: pd.DataFrame | None = None,
) -> pd.DataFrame:
    """Share of specs with p below each level, per (product, metric, model).

    Degenerate (failed) specs never enter the denominator; their count is
    reported separately.
    """
    if df.empty:
        warnings.warn("no results to summarize")
        return pd.DataFrame()
    keys = ["product", "metric", "model"]
    rows = []
    for key, grp in df.groupby(keys, sort=True):
        row = dict(zip(keys, key))
        row["n"] = len(grp)
        for level in levels:
            row[f"share_p_lt_{level:g}"] = float((grp["p_value"] < level).mean())
        row["mean_loglik"] = float(grp["loglik"].mean())
        rows.append(row)
    out = pd.DataFrame(rows)
    if failures is not None and not failures.empty:
        fcounts = failures.groupby(keys).size().rename("n_degenerate").reset_index()
        out = out.merge(fcounts, on=keys, how="left")
        out["n_degenerate"] = out["n_degenerate"].fillna(0).astype(int)
    else:
        out["n_degenerate"] = 0
    return out


def mean_loglik(df: pd.DataFrame) -> pd.DataFrame:
    """Mean log-likelihood over each (product, metric, model) group."""
    keys = ["product", "metric", "model"]
    g = df.groupby(keys, sort=True)["loglik"]
    out = g.mean().rename("mean_loglik").reset_index()
    out["n"] = g.size().values
    return out


def _sig_class(beta: float, p: float, alpha: float) -> str:
    if p < alpha:
        return "neg_sig" if beta < 0 else "pos_sig"
    return "insig"


def spec_chart(
    df: pd.DataFrame,
    country: str,
    metric: str,
    alpha: float = DEFAULT_ALPHA,
    model_order: tuple[str, ...] = ("M1_weather_only", "M2_fe", "M3_fe_inputs"),
) -> dict:
    """Renderer-ready specification chart document for one (country, metric)."""
    block = df[(df["country"] == country) & (df["metric"] == metric)]
    if block.empty:
        warnings.warn(f"no results for {country}/{metric}")
    regions = []
    position = 0
    for model in model_order:
        cells = []
        sub = block[block["model"] == model]
        # stable sort: equal betas keep input order
        sub = sub.sort_values("beta1", kind="stable")
        for rec in sub.itertuples(index=False):
            cells.append({
                "spec_id": rec.spec_id,
                "beta1": float(rec.beta1),
                "ci_low": float(rec.ci_low),
                "ci_high": float(rec.ci_high),
                "model": rec.model,
                "outcome": rec.outcome,
                "product": rec.product,
                "sig_class": _sig_class(rec.beta1, rec.p_value, alpha),
                "position": position,
            })
            position += 1
        regions.append({"model": model, "cells": cells})
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "spec_chart",
        "country": country,
        "metric": metric,
        "alpha": alpha,
        "regions": regions,
    }


def _rank_products(pairs: list[tuple[str, float]]) -> dict[str, int]:
    """Ranks 1..P by signed beta descending; near-equal betas (RANK_TIE_RTOL)
    are tied and broken by product label."""
    ordered = sorted(pairs, key=lambda pb: (-pb[1], pb[0]))
    # regroup near-ties lexicographically so float dust cannot flip an order
    out: list[tuple[str, float]] = []
    i = 0
    while i < len(ordered):
        j = i + 1
        while j < len(ordered):
            scale = max(1.0, abs(ordered[i][1]), abs(ordered[j][1]))
            if abs(ordered[i][1] - ordered[j][1]) <= RANK_TIE_RTOL * scale:
                j += 1
            else:
                break
        out.extend(sorted(ordered[i:j], key=lambda pb: pb[0]))
        i = j
    return {product: rank + 1 for rank, (product, _) in enumerate(out)}


def bumpline(
    df: pd.DataFrame,
    country: str,
    metric: str,
    model_order: tuple[str, ...] = ("M1_weather_only", "M2_fe", "M3_fe_inputs"),
    outcome_order: tuple[str, ...] = ("farm_value", "primary_yield"),
    use_absolute: bool = False,
) -> dict:
    """Rank-table document across the model x outcome columns."""
    block = df[(df["country"] == country) & (df["metric"] == metric)]
    if "quadratic" in block.columns and len(block):
        block = block[~block["quadratic"].astype(bool)]
    products = sorted(block["product"].unique())
    columns = []
    for outcome in outcome_order:
        for model in model_order:
            sub = block[(block["model"] == model) & (block["outcome"] == outcome)]
            betas = {
                rec.product: (abs(rec.beta1) if use_absolute else rec.beta1)
                for rec in sub.itertuples(index=False)
            }
            partial = set(betas) != set(products)
            ranks = _rank_products(sorted(betas.items()))
            columns.append({
                "model": model,
                "outcome": outcome,
                "partial": partial,
                "ranks": ranks,
            })
    paths = {
        p: [col["ranks"].get(p) for col in columns] for p in products
    }
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "bumpline",
        "country": country,
        "metric": metric,
        "products": products,
        "columns": columns,
        "paths": paths,
    }


def descriptives(
    metrics_long: pd.DataFrame,
    metric_id: str,
    z: float = 1.96,
) -> pd.DataFrame:
    """Per-year cross-household mean of one metric with a normal 95% CI,
    by country and product."""
    sub = metrics_long[metrics_long["metric_id"] == metric_id]
    rows = []
    for (country, product, year), grp in sub.groupby(
        ["country", "product_id", "season_year"], sort=True
    ):
        vals = grp["value"].to_numpy(dtype=np.float64)
        vals = vals[~np.isnan(vals)]
        n = len(vals)
        if n == 0:
            continue
        mean = float(vals.mean())
        half = z * float(vals.std(ddof=1)) / math.sqrt(n) if n > 1 else 0.0
        rows.append({
            "country": country,
            "product_id": product,
            "season_year": int(year),
            "n": n,
            "mean": mean,
            "ci_low": mean - half,
            "ci_high": mean + half,
        })
    return pd.DataFrame(rows)


def save_document(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
