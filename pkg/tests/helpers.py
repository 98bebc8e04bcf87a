"""Independent reference implementations used as oracles.

These deliberately use brute-force formulations (full dummy matrices,
O(N^2) sandwich loops, two-pass moments) and must stay independent of the
library code paths they check.
"""

import numpy as np
import pandas as pd
from scipy import stats


def lsdv_fit(frame: pd.DataFrame, outcome_col: str, extra_cols=()):
    """Full dummy-variable fixed-effects fit with CR1 clustered SE on W.

    Returns (beta_W, se_W). Household dummies span the intercept; year
    dummies drop the first year.
    """
    y = np.arcsinh(frame[outcome_col].to_numpy(dtype=float))
    w = frame["W"].to_numpy(dtype=float)
    hh = frame["household_id"].to_numpy()
    years = np.sort(frame["year"].unique())
    hh_groups = np.unique(hh)

    cols = [w]
    for yr in years[1:]:
        cols.append((frame["year"].to_numpy() == yr).astype(float))
    for c in extra_cols:
        cols.append(frame[c].to_numpy(dtype=float))
    for g in hh_groups:
        cols.append((hh == g).astype(float))
    X = np.column_stack(cols)

    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    cov = grouped_cluster_sandwich(X, resid, hh, n_params=X.shape[1])
    return float(beta[0]), float(np.sqrt(cov[0, 0]))


def grouped_cluster_sandwich(X, resid, cluster_ids, n_params=None):
    """Textbook per-cluster score-sum sandwich (explicit loop over clusters)."""
    X = np.asarray(X, dtype=float)
    u = np.asarray(resid, dtype=float)
    ids = np.asarray(cluster_ids)
    n, k = X.shape
    if n_params is None:
        n_params = k
    meat = np.zeros((k, k))
    for g in np.unique(ids):
        sel = ids == g
        s = X[sel].T @ u[sel]
        meat += np.outer(s, s)
    bread = np.linalg.inv(X.T @ X)
    g = len(np.unique(ids))
    c = (g / (g - 1)) * ((n - 1) / (n - n_params))
    return c * bread @ meat @ bread


def naive_cluster_sandwich(X, resid, cluster_ids, n_params=None):
    """O(N^2) clustered sandwich: sum over all same-cluster (i, j) pairs."""
    X = np.asarray(X, dtype=float)
    u = np.asarray(resid, dtype=float)
    ids = np.asarray(cluster_ids)
    n, k = X.shape
    if n_params is None:
        n_params = k
    meat = np.zeros((k, k))
    for i in range(n):
        for j in range(n):
            if ids[i] == ids[j]:
                meat += u[i] * u[j] * np.outer(X[i], X[j])
    bread = np.linalg.inv(X.T @ X)
    g = len(np.unique(ids))
    c = (g / (g - 1)) * ((n - 1) / (n - n_params))
    return c * bread @ meat @ bread


def two_pass_moments(x):
    """Naive two-pass mean/median/sample-variance/g1-skew."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    mean = sum(x) / n
    med = float(np.median(x))
    var = sum((v - mean) ** 2 for v in x) / (n - 1) if n > 1 else 0.0
    m2 = sum((v - mean) ** 2 for v in x) / n
    skew = 0.0 if m2 == 0 else sum(((v - mean) / m2**0.5) ** 3 for v in x) / n
    return mean, med, var, skew


def make_panel(rng, n_households=20, n_years=4, beta=0.5, hh_sd=1.0,
               year_sd=0.5, noise_sd=0.3, unbalanced=False):
    """Small synthetic panel with known beta on W, IHS scale."""
    years = list(range(2010, 2010 + n_years))
    alpha = rng.normal(0, hh_sd, n_households)
    gamma = rng.normal(0, year_sd, n_years)
    rows = []
    for h in range(n_households):
        hid = f"H{h:03d}"
        keep_years = years
        if unbalanced and rng.random() < 0.3:
            keep_years = years[: max(2, int(rng.integers(2, n_years + 1)))]
        for t, yr in enumerate(years):
            if yr not in keep_years:
                continue
            w = rng.normal(0, 1)
            y_ihs = 1.0 + alpha[h] + gamma[t] + beta * w + rng.normal(0, noise_sd)
            rows.append({
                "household_id": hid,
                "year": yr,
                "W": w,
                "outcome_value_usd_ha": np.sinh(y_ihs),
                "outcome_yield_kg_ha": np.sinh(y_ihs + rng.normal(0, noise_sd)),
                "fert_kg_ha": float(rng.lognormal(1, 0.5)),
                "labor_days_ha": float(rng.lognormal(2, 0.5)),
                "pesticide": int(rng.random() < 0.5),
                "herbicide": int(rng.random() < 0.5),
                "irrigation": int(rng.random() < 0.2),
            })
    return pd.DataFrame(rows)
