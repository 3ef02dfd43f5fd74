import json
import math

import numpy as np
import pytest
from scipy import stats

from foulab.errors import ConfigurationError, DomainError
from foulab.fou_model import build_fou
from foulab.fracgauss import GridSpec, sample_fbm
from foulab.drift_estimators import theta_tilde
from foulab.mc_harness import (
    KS_CRITICAL_1PCT,
    McExperimentConfig,
    McParams,
    ks_test,
    rate_fit,
    replicate,
    run_experiment,
)


def config(target, replications=100, seed=3, **params):
    return McExperimentConfig(target, McParams(**params), replications, seed)


class TestKs:
    def test_normal_passes(self):
        x = np.random.default_rng(0).normal(0, 2, 2000)
        D, ok = ks_test(x, 4.0)
        assert ok and D < 0.04

    def test_matches_scipy(self):
        x = np.random.default_rng(1).normal(0.1, 1.0, 500)
        D, _ = ks_test(x, 1.0)
        assert D == pytest.approx(stats.kstest(x, "norm").statistic, rel=1e-10)

    def test_zero_samples_fail(self):
        D, ok = ks_test(np.zeros(200), 1.0)
        assert D == pytest.approx(0.5) and not ok

    def test_uniform_far_from_normal(self):
        x = np.random.default_rng(2).uniform(0, 1, 1000)
        D, ok = ks_test(x, 1.0)
        assert D > 0.3 and not ok

    def test_bad_input(self):
        with pytest.raises(DomainError):
            ks_test(np.ones(10), 1.0)
        with pytest.raises(DomainError):
            ks_test(np.ones(200), 0.0)
        with pytest.raises(DomainError):
            ks_test(np.r_[np.ones(199), np.nan], 1.0)

    def test_null_rejection_rate(self):
        # under the null the 1% test rejects about 1% of the time
        rng = np.random.default_rng(7)
        trials = 500
        rejections = sum(not ks_test(rng.normal(size=400), 1.0)[1] for _ in range(trials))
        lo, hi = stats.binom.ppf([0.0005, 0.9995], trials, 0.01)
        assert lo <= rejections <= hi

    def test_critical_value(self):
        # asymptotic Kolmogorov quantile at 99%
        assert stats.kstwobign.ppf(0.99) == pytest.approx(KS_CRITICAL_1PCT, abs=1e-3)


class TestRateFit:
    def test_exact_slopes(self):
        T = [100.0, 200.0, 400.0, 800.0]
        assert rate_fit(T, [1 / t for t in T]) == pytest.approx(-1.0)
        assert rate_fit(T, [3.0] * 4) == pytest.approx(0.0, abs=1e-12)

    def test_errors(self):
        with pytest.raises(DomainError):
            rate_fit([1, 2], [1, 1])
        with pytest.raises(DomainError):
            rate_fit([100, 150, 200], [1, 1, 1])
        with pytest.raises(DomainError):
            rate_fit([1, 4, 16], [1, 0, 1])


class TestConfig:
    def test_pv_clt_needs_finite_variance(self):
        cfg = config("PV_CLT", H=0.85, k=1, p=2, n=256)
        with pytest.raises(ConfigurationError):
            run_experiment(cfg)

    def test_too_few_replications(self):
        with pytest.raises(ConfigurationError):
            config("PV_LLN", replications=99, H=0.5, n=64)

    def test_unknown_target_and_keys(self):
        with pytest.raises(ConfigurationError):
            config("NOPE", H=0.5)
        with pytest.raises(ConfigurationError):
            McExperimentConfig("PV_LLN", McParams(0.5, n=64), 100, 1, tolerance={"bogus": 1})
        with pytest.raises(ConfigurationError):
            McExperimentConfig.from_dict({"target": "PV_LLN", "params": {"H": 0.5, "m": 3},
                                          "replications": 100, "seed": 1})

    def test_regime_guards(self):
        with pytest.raises(ConfigurationError):
            run_experiment(config("ROSENBLATT", H=0.7, T=10, h=0.1))
        with pytest.raises(ConfigurationError):
            run_experiment(config("ETE_CLT", H=0.8, T=10, h=0.1))
        with pytest.raises(ConfigurationError):
            run_experiment(config("ETE_CLT", H=0.6, T=10))
        with pytest.raises(ConfigurationError):
            run_experiment(config("PV_LLN", H=0.6, T=1.0, n=10.5))

    def test_theta_bar_refuses_violations(self):
        # n h^p = 1e4 * 0.01^1.5 = 10 is not small
        with pytest.raises(ConfigurationError, match="step conditions"):
            run_experiment(config("THETA_BAR", H=0.6, T=100, h=0.01, p=1.5))
        with pytest.raises(ConfigurationError):
            run_experiment(config("THETA_BAR", H=0.8, T=100, h=0.01, p=1.9))

    def test_round_trip(self):
        cfg = config("ETE_CLT", H=0.6, T=20, h=0.1)
        again = McExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert again.to_dict() == cfg.to_dict()


class TestReplication:
    def test_matches_scalar_reference(self):
        cfg = config("ETE_CLT", seed=19, H=0.6, theta=1.2, T=50, h=0.05)
        for r in (0, 5):
            path = build_fou(sample_fbm(0.6, GridSpec.from_horizon(50, 0.05), 19, r), 1.2, 1.0)
            ref = math.sqrt(50) * (theta_tilde(path, 1.0, 0.6).value - 1.2)
            assert replicate(cfg, r) == pytest.approx(ref, rel=1e-12)

    def test_pv_lln(self):
        rep = run_experiment(config("PV_LLN", H=0.7, theta=1.0, sigma=1.5, n=2048))
        assert rep.passed and abs(rep.empirical_mean) < 0.05

    def test_deterministic_across_threads(self):
        cfg = config("SIGMA_CLT", H=0.4, n=512)
        one = run_experiment(McExperimentConfig(cfg.target, cfg.params, 100, 3, threads=1))
        again = run_experiment(McExperimentConfig(cfg.target, cfg.params, 100, 3, threads=1))
        many = run_experiment(McExperimentConfig(cfg.target, cfg.params, 100, 3, threads=4))
        assert one.to_json() == again.to_json() == many.to_json()

    def test_seed_changes_samples(self):
        a = run_experiment(config("PV_LLN", seed=1, H=0.5, n=128))
        b = run_experiment(config("PV_LLN", seed=2, H=0.5, n=128))
        assert a.to_json() != b.to_json()

    def test_thread_env(self, monkeypatch):
        monkeypatch.setenv("FOU_LAB_THREADS", "x")
        with pytest.raises(ConfigurationError):
            run_experiment(config("PV_LLN", H=0.5, n=64))

    def test_report_fields(self):
        rep = run_experiment(config("SIGMA_CLT", H=0.3, n=1024))
        d = json.loads(rep.to_json())
        assert {"samples", "empirical_mean", "empirical_variance", "theoretical_variance",
                "ks_statistic", "ks_pass", "skewness", "rate_fit", "verdict"} <= set(d)
        assert len(d["samples"]) == 100 and "threads" not in json.dumps(d["config"])

    def test_rate_fit_rosenblatt(self):
        # Var(theta_tilde - theta) ~ T^{-2(2-2H)} = T^{-0.6} at H = 0.85
        cfg = McExperimentConfig("ROSENBLATT", McParams(0.85, T=250, h=0.05), 200, 9,
                                 rate_T=(250, 500, 1000, 2000))
        rep = run_experiment(cfg)
        assert rep.rate_fit == pytest.approx(-0.6, abs=0.15)
