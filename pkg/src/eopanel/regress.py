"""Panel estimators for the regression battery.

Three models on IHS-transformed outcomes:

* M1 "weather only": pooled OLS on [1, W].
* M2 "weather with fixed effects": household FE absorbed by within-demeaning,
  year FE as dummies (first year dropped).
* M3: M2 plus the five input covariates.

Standard errors are cluster-robust (household clusters) with the CR1
small-sample factor c = [G/(G-1)] * [(N-1)/(N-K)], where K counts absorbed
household effects; t and CI reference Student-t with G-1 degrees of freedom.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

from .errors import DataError, InferenceError, SingularityError

MODELS = ("M1_weather_only", "M2_fe", "M3_fe_inputs")
OUTCOMES = ("farm_value", "primary_yield")
OUTCOME_COLUMNS = {
    "farm_value": "outcome_value_usd_ha",
    "primary_yield": "outcome_yield_kg_ha",
}
INPUT_COLUMNS = ("fert_kg_ha", "labor_days_ha", "pesticide", "herbicide", "irrigation")

PANEL_COLUMNS = (
    "household_id", "country_id", "year",
    "outcome_value_usd_ha", "outcome_yield_kg_ha",
) + INPUT_COLUMNS

_RCOND = 1e-10


@dataclass(frozen=True)
class RegressionSpec:
    model: str
    outcome: str
    metric_id: str
    product_id: str
    country_id: str
    quadratic: bool = False

    @property
    def spec_id(self) -> str:
        parts = [self.country_id, self.model, self.outcome, self.metric_id, self.product_id]
        if self.quadratic:
            parts.append("quad")
        return ".".join(parts)


@dataclass
class RegressionResult:
    spec: RegressionSpec
    beta1: float
    se_beta1: float
    t_stat: float
    p_value: float
    ci_low: float
    ci_high: float
    loglik: float
    n_obs: int
    n_clusters: int
    n_params: int
    n_dropped: int = 0  # listwise deletions


def ihs(y):
    """Inverse hyperbolic sine, ln(y + sqrt(y^2 + 1)); exact at 0, odd."""
    return np.arcsinh(y)


def load_panel(csv_path) -> pd.DataFrame:
    df = pd.read_csv(csv_path, dtype={"household_id": str, "country_id": str})
    missing = set(PANEL_COLUMNS) - set(df.columns)
    if missing:
        raise DataError(f"{csv_path}: panel is missing columns {sorted(missing)}")
    return df


def _qr_solve(X: np.ndarray, y: np.ndarray, context: str) -> tuple[np.ndarray, np.ndarray]:
    """Least squares via QR; returns (beta, XtX_inverse)."""
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag.min() <= _RCOND * max(diag.max(), 1.0):
        raise SingularityError(f"singular design: {context}")
    beta = np.linalg.solve(r, q.T @ y)
    rinv = np.linalg.solve(r, np.eye(r.shape[0]))
    return beta, rinv @ rinv.T


def cluster_sandwich(
    design: np.ndarray,
    residuals: np.ndarray,
    cluster_ids: np.ndarray,
    n_params: int | None = None,
) -> np.ndarray:
    """CR1 clustered covariance (X'X)^-1 [sum_g X_g'u_g u_g'X_g] (X'X)^-1 * c.

    ``n_params`` is K in the finite-sample factor; defaults to the design's
    column count, callers absorbing fixed effects pass the larger count.
    """
    X = np.asarray(design, dtype=np.float64)
    u = np.asarray(residuals, dtype=np.float64)
    ids = np.asarray(cluster_ids)
    if ids.size != X.shape[0]:
        raise DataError("cluster id length does not match design rows")
    n_obs, k_cols = X.shape
    if n_params is None:
        n_params = k_cols
    groups, inverse = np.unique(ids, return_inverse=True)
    n_clusters = len(groups)
    if n_clusters < 2:
        raise InferenceError(f"need >= 2 clusters, got {n_clusters}")

    _, xtx_inv = _qr_solve(X, u * 0.0, "cluster_sandwich bread")
    # per-cluster score sums via one grouped accumulation
    scores = np.zeros((n_clusters, k_cols))
    np.add.at(scores, inverse, X * u[:, None])
    meat = scores.T @ scores
    c = (n_clusters / (n_clusters - 1)) * ((n_obs - 1) / (n_obs - n_params))
    return c * (xtx_inv @ meat @ xtx_inv)


def _demean_within(df_values: np.ndarray, group_codes: np.ndarray, n_groups: int) -> np.ndarray:
    sums = np.zeros((n_groups, df_values.shape[1]))
    np.add.at(sums, group_codes, df_values)
    counts = np.bincount(group_codes, minlength=n_groups).astype(np.float64)
    return df_values - (sums / counts[:, None])[group_codes]


def fit(spec: RegressionSpec, frame: pd.DataFrame) -> RegressionResult:
    """Estimate one battery cell.

    ``frame`` must hold one row per household-year with columns
    ``household_id``, ``year``, ``W`` (the weather metric), the outcome
    column for ``spec.outcome``, and the input columns for M3. Rows with any
    missing regressor or outcome are dropped listwise.
    """
    outcome_col = OUTCOME_COLUMNS[spec.outcome]
    needed = ["household_id", "year", "W", outcome_col]
    if spec.model == "M3_fe_inputs":
        needed += list(INPUT_COLUMNS)
    data = frame.loc[:, needed].copy()
    n_before = len(data)
    data = data.dropna()
    n_dropped = n_before - len(data)
    if data.empty:
        raise DataError(f"{spec.spec_id}: no complete rows after listwise deletion")

    y = ihs(data[outcome_col].to_numpy(dtype=np.float64))
    w = data["W"].to_numpy(dtype=np.float64)
    cols = [w]
    names = ["W"]
    if spec.quadratic:
        wc = w - w.mean()  # centered before squaring for conditioning
        cols.append(wc * wc)
        names.append("W2")

    hh = data["household_id"].to_numpy()
    hh_groups, hh_codes = np.unique(hh, return_inverse=True)
    n_clusters = len(hh_groups)
    if n_clusters < 2:
        raise InferenceError(f"{spec.spec_id}: {n_clusters} cluster(s)")

    if spec.model == "M1_weather_only":
        X = np.column_stack([np.ones(len(y))] + cols)
        n_params = X.shape[1]
    elif spec.model in ("M2_fe", "M3_fe_inputs"):
        years = np.sort(data["year"].unique())
        for yr in years[1:]:  # first year dropped
            cols.append((data["year"].to_numpy() == yr).astype(np.float64))
        if spec.model == "M3_fe_inputs":
            for c in INPUT_COLUMNS:
                cols.append(data[c].to_numpy(dtype=np.float64))
        X = np.column_stack(cols)
        X = _demean_within(X, hh_codes, n_clusters)
        y = _demean_within(y[:, None], hh_codes, n_clusters)[:, 0]
        n_params = X.shape[1] + n_clusters  # absorbed household effects count
    else:
        raise DataError(f"unknown model {spec.model!r}")

    n_obs = len(y)
    if n_obs <= n_params:
        raise SingularityError(
            f"{spec.spec_id}: n_obs {n_obs} <= n_params {n_params}"
        )

    beta, xtx_inv = _qr_solve(X, y, spec.spec_id)
    resid = y - X @ beta
    cov = cluster_sandwich(X, resid, hh_codes, n_params=n_params)

    iw = 0  # W is always the first design column (after intercept for M1)
    if spec.model == "M1_weather_only":
        iw = 1
    beta1 = float(beta[iw])
    se = float(np.sqrt(cov[iw, iw]))
    dof = n_clusters - 1
    t_stat = beta1 / se
    p_value = float(2.0 * stats.t.sf(abs(t_stat), dof))
    t_crit = float(stats.t.ppf(0.975, dof))
    rss = float(resid @ resid)
    loglik = -n_obs / 2.0 * (np.log(2.0 * np.pi) + np.log(rss / n_obs) + 1.0)

    return RegressionResult(
        spec=spec,
        beta1=beta1,
        se_beta1=se,
        t_stat=float(t_stat),
        p_value=p_value,
        ci_low=beta1 - t_crit * se,
        ci_high=beta1 + t_crit * se,
        loglik=float(loglik),
        n_obs=n_obs,
        n_clusters=n_clusters,
        n_params=n_params,
        n_dropped=n_dropped,
    )
