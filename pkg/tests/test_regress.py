import math

import numpy as np
import pandas as pd
import pytest

from eopanel.errors import InferenceError, SingularityError
from eopanel.regress import (
    RegressionSpec, cluster_sandwich, fit, ihs,
)

from helpers import lsdv_fit, make_panel, naive_cluster_sandwich


def spec(model="M2_fe", outcome="farm_value", quad=False):
    return RegressionSpec(
        model=model, outcome=outcome, metric_id="total",
        product_id="P1", country_id="X", quadratic=quad,
    )


class TestIhs:
    def test_zero(self):
        assert ihs(0.0) == 0.0

    def test_unit(self):
        assert ihs(1.0) == pytest.approx(math.log(1 + math.sqrt(2)), rel=1e-12)
        assert ihs(1.0) == pytest.approx(0.881374, abs=1e-6)

    def test_odd(self):
        for y in (0.5, 3.0, 100.0):
            assert ihs(-y) == pytest.approx(-ihs(y), rel=1e-12)

    def test_monotone(self):
        ys = np.linspace(0, 50, 200)
        assert (np.diff(ihs(ys)) > 0).all()


class TestFitRecovery:
    def test_m2_recovers_known_beta(self):
        rng = np.random.default_rng(0)
        frame = make_panel(rng, n_households=80, n_years=5, beta=0.8, noise_sd=0.01)
        res = fit(spec(), frame)
        assert res.beta1 == pytest.approx(0.8, abs=0.01)

    def test_spec_id_format(self):
        assert spec().spec_id == "X.M2_fe.farm_value.total.P1"
        assert spec(quad=True).spec_id == "X.M2_fe.farm_value.total.P1.quad"


class TestLsdvEquivalence:
    @pytest.mark.parametrize("seed", range(10))
    def test_m2_matches_lsdv(self, seed):
        rng = np.random.default_rng(seed)
        frame = make_panel(
            rng,
            n_households=int(rng.integers(5, 50)),
            n_years=int(rng.integers(2, 6)),
            beta=float(rng.normal()),
            unbalanced=True,
        )
        res = fit(spec(), frame)
        beta_o, se_o = lsdv_fit(frame, "outcome_value_usd_ha")
        assert res.beta1 == pytest.approx(beta_o, rel=1e-8)
        assert res.se_beta1 == pytest.approx(se_o, rel=1e-8)

    def test_m3_matches_lsdv_with_inputs(self):
        rng = np.random.default_rng(123)
        frame = make_panel(rng, n_households=30, n_years=4)
        res = fit(spec("M3_fe_inputs"), frame)
        inputs = ("fert_kg_ha", "labor_days_ha", "pesticide", "herbicide", "irrigation")
        beta_o, se_o = lsdv_fit(frame, "outcome_value_usd_ha", extra_cols=inputs)
        assert res.beta1 == pytest.approx(beta_o, rel=1e-8)
        assert res.se_beta1 == pytest.approx(se_o, rel=1e-8)


class TestDegenerate:
    def test_single_obs_per_household_m2(self):
        rng = np.random.default_rng(1)
        frame = make_panel(rng, n_households=30, n_years=1)
        with pytest.raises(SingularityError):
            fit(spec(), frame)

    def test_constant_metric_m1(self):
        rng = np.random.default_rng(2)
        frame = make_panel(rng, n_households=30, n_years=3)
        frame["W"] = 1.0
        with pytest.raises(SingularityError):
            fit(spec("M1_weather_only"), frame)

    def test_single_cluster(self):
        rng = np.random.default_rng(3)
        frame = make_panel(rng, n_households=1, n_years=5)
        with pytest.raises(InferenceError):
            fit(spec("M1_weather_only"), frame)


class TestClusterSandwich:
    def test_matches_naive_reference(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            n, k = int(rng.integers(20, 60)), int(rng.integers(1, 4))
            X = rng.normal(size=(n, k))
            u = rng.normal(size=n)
            ids = rng.integers(0, 7, size=n)
            got = cluster_sandwich(X, u, ids)
            want = naive_cluster_sandwich(X, u, ids)
            np.testing.assert_allclose(got, want, rtol=1e-10)

    def test_singleton_clusters_reduce_to_hc1_scaling(self):
        rng = np.random.default_rng(5)
        n = 40
        X = np.column_stack([np.ones(n), rng.normal(size=n)])
        u = rng.normal(size=n)
        ids = np.arange(n)  # every obs its own cluster
        got = cluster_sandwich(X, u, ids)
        bread = np.linalg.inv(X.T @ X)
        hc0 = bread @ (X * (u**2)[:, None]).T @ X @ bread
        c = (n / (n - 1)) * ((n - 1) / (n - 2))
        np.testing.assert_allclose(got, c * hc0, rtol=1e-10)

    def test_homoskedastic_close_to_classical(self):
        rng = np.random.default_rng(6)
        n_clusters, per = 200, 3
        n = n_clusters * per
        X = np.column_stack([np.ones(n), rng.normal(size=n)])
        beta = np.array([1.0, 0.5])
        u = rng.normal(size=n)
        y = X @ beta + u
        bhat, *_ = np.linalg.lstsq(X, y, rcond=None)
        resid = y - X @ bhat
        ids = np.repeat(np.arange(n_clusters), per)
        clustered = np.sqrt(cluster_sandwich(X, resid, ids)[1, 1])
        s2 = resid @ resid / (n - 2)
        classical = np.sqrt(s2 * np.linalg.inv(X.T @ X)[1, 1])
        assert clustered == pytest.approx(classical, rel=0.15)


class TestInvariances:
    def test_scaling_covariance(self):
        rng = np.random.default_rng(7)
        frame = make_panel(rng, n_households=40, n_years=4)
        a = 3.7
        scaled = frame.copy()
        scaled["W"] = a * scaled["W"]
        for model in ("M1_weather_only", "M2_fe", "M3_fe_inputs"):
            r1 = fit(spec(model), frame)
            r2 = fit(spec(model), scaled)
            assert r2.beta1 == pytest.approx(r1.beta1 / a, rel=1e-10)
            assert r2.se_beta1 == pytest.approx(r1.se_beta1 / a, rel=1e-10)
            assert r2.t_stat == pytest.approx(r1.t_stat, rel=1e-10)
            assert r2.p_value == pytest.approx(r1.p_value, rel=1e-9, abs=1e-12)
            assert r2.loglik == pytest.approx(r1.loglik, rel=1e-10)

    def test_constant_shift_absorbed(self):
        rng = np.random.default_rng(8)
        frame = make_panel(rng, n_households=40, n_years=4)
        shifted = frame.copy()
        shifted["W"] = shifted["W"] + 100.0
        for model in ("M1_weather_only", "M2_fe", "M3_fe_inputs"):
            r1 = fit(spec(model), frame)
            r2 = fit(spec(model), shifted)
            assert r2.beta1 == pytest.approx(r1.beta1, rel=1e-6)

    def test_loglik_matches_direct_gaussian(self):
        rng = np.random.default_rng(9)
        frame = make_panel(rng, n_households=30, n_years=4)
        res = fit(spec("M1_weather_only"), frame)
        # recompute residuals independently: OLS of ihs(y) on [1, W]
        y = np.arcsinh(frame["outcome_value_usd_ha"].to_numpy())
        X = np.column_stack([np.ones(len(y)), frame["W"].to_numpy()])
        b, *_ = np.linalg.lstsq(X, y, rcond=None)
        u = y - X @ b
        sigma2 = u @ u / len(y)
        direct = float(
            np.sum(-0.5 * np.log(2 * np.pi * sigma2) - u**2 / (2 * sigma2))
        )
        assert res.loglik == pytest.approx(direct, rel=1e-10)

    def test_p_value_monotone_in_t(self):
        from scipy import stats
        dof = 30
        ts = np.linspace(0, 5, 50)
        ps = 2 * stats.t.sf(ts, dof)
        assert (np.diff(ps) < 0).all()

    def test_quadratic_reports_linear_term(self):
        rng = np.random.default_rng(10)
        frame = make_panel(rng, n_households=60, n_years=4, beta=0.8, noise_sd=0.01)
        res = fit(spec(quad=True), frame)
        # generator is linear, so the linear term still carries the truth
        assert res.beta1 == pytest.approx(0.8, abs=0.02)

    def test_listwise_deletion_counted(self):
        rng = np.random.default_rng(11)
        frame = make_panel(rng, n_households=40, n_years=4)
        frame.loc[frame.index[:7], "W"] = np.nan
        res = fit(spec(), frame)
        assert res.n_dropped == 7
        assert res.n_obs == len(frame) - 7
