"""
Monte Carlo replication engine for the limit theorems.

Replication r draws its fBm from seed stream (seed, r), so a report is a
pure function of its config: thread count and scheduling only decide when
a slot of the preallocated result array gets filled, never what goes in it.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .asymptotics import drift_clt_variance, nu_squared_normalized
from .drift_estimators import check_step_conditions, theta_bar, theta_hat_lse_sim, theta_tilde
from .errors import ConfigurationError, DivergenceError, DomainError
from .fou_model import build_fou
from .fracgauss import GridSpec, sample_fbm
from .power_variation import PowerVariationConfig, integrated_volatility, sigma_hat

__all__ = [
    "TARGETS",
    "McParams",
    "McExperimentConfig",
    "McReport",
    "run_experiment",
    "replicate",
    "ks_test",
    "rate_fit",
    "KS_CRITICAL_1PCT",
]

TARGETS = ("PV_LLN", "PV_CLT", "SIGMA_CLT", "ETE_CLT", "LSE_CLT", "ROSENBLATT", "THETA_BAR")
KS_CRITICAL_1PCT = 1.628
MIN_REPLICATIONS = 100

# per-target defaults; a config may override any key
DEFAULT_TOLERANCE = {
    "PV_LLN": {"mean_abs": 0.05},
    "PV_CLT": {"variance_rel": 0.2, "ks": True},
    "SIGMA_CLT": {"variance_rel": 0.2, "ks": True},
    "ETE_CLT": {"variance_rel": 0.15, "ks": True},
    "LSE_CLT": {"variance_rel": 0.2, "ks": True},
    "ROSENBLATT": {"variance_rel": 0.3, "min_abs_skew": 0.3},
    "THETA_BAR": {"variance_rel": 0.2, "ks": True},
}


@dataclass(frozen=True)
class McParams:
    """
    Model and sampling parameters. Drift targets use the horizon T and step h;
    power-variation targets sample at frequency n on [0, T] (step 1/n).
    """

    H: float
    theta: float = 1.0
    sigma: float = 1.0
    k: int = 2
    p: float = 2.0
    T: float = 1.0
    n: int | None = None
    h: float | None = None

    def to_dict(self):
        return {"H": self.H, "theta": self.theta, "sigma": self.sigma, "k": self.k,
                "p": self.p, "T": self.T, "n": self.n, "h": self.h}


@dataclass(frozen=True)
class McExperimentConfig:
    target: str
    params: McParams
    replications: int
    seed: int
    tolerance: dict = field(default_factory=dict)
    threads: int | None = None
    rate_T: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ConfigurationError(f"unknown target {self.target!r}; expected one of {TARGETS}")
        if int(self.replications) != self.replications or self.replications < MIN_REPLICATIONS:
            raise ConfigurationError(f"need at least {MIN_REPLICATIONS} replications, got {self.replications!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        unknown = set(self.tolerance) - {"mean_abs", "variance_rel", "ks", "min_abs_skew"}
        if unknown:
            raise ConfigurationError(f"unknown tolerance keys {sorted(unknown)}")
        if self.rate_T is not None:
            object.__setattr__(self, "rate_T", tuple(float(t) for t in self.rate_T))

    @property
    def effective_tolerance(self) -> dict:
        tol = dict(DEFAULT_TOLERANCE[self.target])
        tol.update(self.tolerance)
        return tol

    @classmethod
    def from_dict(cls, d: dict) -> "McExperimentConfig":
        d = dict(d)
        try:
            params = McParams(**d.pop("params"))
            return cls(params=params, **d)
        except (TypeError, KeyError) as exc:
            raise ConfigurationError(f"malformed experiment config: {exc}") from None

    def to_dict(self):
        return {"target": self.target, "params": self.params.to_dict(),
                "replications": self.replications, "seed": self.seed,
                "tolerance": self.effective_tolerance,
                "rate_T": list(self.rate_T) if self.rate_T else None}


@dataclass
class McReport:
    config: dict
    samples: np.ndarray
    empirical_mean: float
    empirical_variance: float
    theoretical_variance: float | None
    ks_statistic: float | None
    ks_pass: bool | None
    skewness: float
    rate_fit: float | None
    passed: bool
    reasons: list

    def to_dict(self):
        return {
            "config": self.config,
            "samples": [float(x) for x in self.samples],
            "empirical_mean": self.empirical_mean,
            "empirical_variance": self.empirical_variance,
            "theoretical_variance": self.theoretical_variance,
            "ks_statistic": self.ks_statistic,
            "ks_pass": self.ks_pass,
            "skewness": self.skewness,
            "rate_fit": self.rate_fit,
            "verdict": {"pass": self.passed, "reasons": list(self.reasons)},
        }

    def to_json(self) -> str:
        # thread count is an execution detail and stays out of the report
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, allow_nan=False)


def ks_test(samples, target_variance: float) -> tuple[float, bool]:
    """
    One-sample KS distance of samples / sqrt(target_variance) to N(0, 1).

    Passes at the 1% level iff sqrt(N) D_N < 1.628.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or x.size < MIN_REPLICATIONS:
        raise DomainError(f"KS test needs at least {MIN_REPLICATIONS} samples")
    if not np.all(np.isfinite(x)):
        raise DomainError("KS test got non-finite samples")
    if not target_variance > 0:
        raise DomainError(f"target variance must be positive, got {target_variance!r}")
    z = np.sort(x / math.sqrt(target_variance))
    cdf = np.array([0.5 * (1.0 + math.erf(v / math.sqrt(2.0))) for v in z])
    N = z.size
    i = np.arange(1, N + 1)
    D = float(max(np.max(i / N - cdf), np.max(cdf - (i - 1) / N)))
    return D, bool(math.sqrt(N) * D < KS_CRITICAL_1PCT)


def rate_fit(T_values, variances) -> float:
    """Least squares slope of log variance against log T."""
    T = np.asarray(T_values, dtype=np.float64)
    v = np.asarray(variances, dtype=np.float64)
    if T.shape != v.shape or T.size < 3:
        raise DomainError("rate fit needs at least 3 (T, variance) pairs")
    if not np.all(T > 0) or T.max() / T.min() < 4:
        raise DomainError("T values must be positive and span a factor of at least 4")
    if not np.all(v > 0):
        raise DomainError("variances must be positive for a log-log fit")
    slope, _ = np.polyfit(np.log(T), np.log(v), 1)
    return float(slope)


def _drift_grid(prm: McParams, T: float | None = None) -> GridSpec:
    if prm.h is None:
        raise ConfigurationError("drift targets need the step h")
    return GridSpec.from_horizon(prm.T if T is None else T, prm.h)


def _pv_grid(prm: McParams) -> GridSpec:
    if prm.n is None:
        raise ConfigurationError("power-variation targets need the frequency n")
    steps = prm.n * prm.T
    if abs(steps - round(steps)) > 1e-9 * steps:
        raise ConfigurationError(f"n*T = {steps} must be an integer number of steps")
    return GridSpec(int(round(steps)), 1.0 / prm.n)


def _validate(cfg: McExperimentConfig):
    """Check the target theorem's hypotheses; return the limit variance (or None)."""
    prm, target = cfg.params, cfg.target
    try:
        if not 0 < prm.H < 1:
            raise DomainError(f"Hurst index must lie in (0, 1), got {prm.H!r}")
        if not prm.sigma > 0:
            raise DomainError(f"sigma must be positive, got {prm.sigma!r}")
        if target.startswith(("PV_", "SIGMA")):
            PowerVariationConfig(prm.k, prm.p, prm.H)
            if prm.theta < 0:
                raise DomainError("theta must be >= 0")
            grid = _pv_grid(prm)
            if grid.n < prm.k + 2:
                raise ConfigurationError(f"n*T must be at least k+2 = {prm.k + 2}")
            if target == "PV_LLN":
                return None
            try:
                nu = nu_squared_normalized(prm.H, prm.k, prm.p).value
            except DivergenceError as exc:
                raise ConfigurationError(
                    f"{target} needs k >= 2 or H < 3/4 (finite limiting variance): {exc}") from None
            if target == "SIGMA_CLT":
                return nu * prm.sigma ** (2 * prm.p) / prm.T
            return nu * prm.sigma ** (2 * prm.p) * prm.T
        if not prm.theta > 0:
            raise DomainError(f"theta must be positive, got {prm.theta!r}")
        grid = _drift_grid(prm)
        if target == "ROSENBLATT":
            if not prm.H > 0.75:
                raise ConfigurationError("ROSENBLATT needs H > 3/4; use ETE_CLT below that")
            return drift_clt_variance("ETE", prm.H, prm.theta).variance
        if prm.H > 0.75:
            raise ConfigurationError(f"{target} needs H <= 3/4 (Gaussian limit); use ROSENBLATT")
        if target == "THETA_BAR":
            report = check_step_conditions(prm.H, grid.n, grid.h, prm.p)
            if not report.satisfied:
                raise ConfigurationError(
                    "THETA_BAR step conditions violated: " + "; ".join(report.reasons))
            return drift_clt_variance("ETE", prm.H, prm.theta).variance
        estimator = "ETE" if target == "ETE_CLT" else "LSE"
        return drift_clt_variance(estimator, prm.H, prm.theta).variance
    except DomainError as exc:
        raise ConfigurationError(str(exc)) from None


def _drift_error(target: str, prm: McParams, path) -> float:
    if target == "LSE_CLT":
        return theta_hat_lse_sim(path, prm.sigma, prm.H, prm.theta).value - prm.theta
    if target == "THETA_BAR":
        return theta_bar(path.values, path.grid, prm.sigma, prm.H, prm.p).value - prm.theta
    return theta_tilde(path, prm.sigma, prm.H).value - prm.theta


def replicate(cfg: McExperimentConfig, r: int, T: float | None = None,
              stream: int | tuple[int, int] | None = None) -> float:
    """Statistic of replication r (raw estimation error when T is given)."""
    prm, target = cfg.params, cfg.target
    stream = r if stream is None else stream
    if target.startswith(("PV_", "SIGMA")):
        grid = _pv_grid(prm)
        path = build_fou(sample_fbm(prm.H, grid, cfg.seed, stream), prm.theta, prm.sigma)
        pv = PowerVariationConfig(prm.k, prm.p, prm.H)
        if target == "PV_LLN":
            return integrated_volatility(path, pv) / (prm.sigma ** prm.p * prm.T) - 1.0
        if target == "PV_CLT":
            return math.sqrt(prm.n) * (integrated_volatility(path, pv) - prm.sigma ** prm.p * prm.T)
        return math.sqrt(prm.n) * (sigma_hat(path, pv) ** prm.p - prm.sigma ** prm.p)
    horizon = prm.T if T is None else T
    grid = _drift_grid(prm, horizon)
    path = build_fou(sample_fbm(prm.H, grid, cfg.seed, stream), prm.theta, prm.sigma)
    err = _drift_error(target, prm, path)
    if T is not None:
        return err
    return _scale(target, prm, horizon) * err


def _scale(target: str, prm: McParams, T: float) -> float:
    est = "LSE" if target == "LSE_CLT" else "ETE"
    law = drift_clt_variance(est, prm.H, prm.theta)
    return law.rate_value(T)


def _threads(cfg: McExperimentConfig) -> int:
    if cfg.threads is not None:
        return max(1, int(cfg.threads))
    env = os.environ.get("FOU_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"FOU_LAB_THREADS must be an integer, got {env!r}") from None
    return 1


def _fill(out: np.ndarray, fn, count: int, threads: int) -> None:
    def work(i):
        out[i] = fn(i)

    if threads == 1:
        for i in range(count):
            work(i)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for _ in pool.map(work, range(count)):
            pass


def run_experiment(cfg: McExperimentConfig) -> McReport:
    target_var = _validate(cfg)
    tol = cfg.effective_tolerance
    R = cfg.replications
    threads = _threads(cfg)

    samples = np.empty(R)
    _fill(samples, lambda r: replicate(cfg, r), R, threads)
    if not np.all(np.isfinite(samples)):
        raise DomainError("non-finite statistic in a replication")

    # np.sum reduces pairwise over the fixed index order
    mean = float(np.sum(samples) / R)
    var = float(np.sum((samples - mean) ** 2) / (R - 1))
    skew = float(stats.skew(samples))

    reasons = []
    ks_stat = ks_ok = None
    if cfg.target == "PV_LLN":
        if abs(mean) >= tol["mean_abs"]:
            reasons.append(f"mean relative error {mean:.4g} exceeds {tol['mean_abs']}")
    else:
        rel = abs(var - target_var) / target_var
        if rel > tol["variance_rel"]:
            reasons.append(f"variance {var:.6g} is {rel:.1%} from {target_var:.6g} "
                           f"(tolerance {tol['variance_rel']:.0%})")
        if tol.get("ks"):
            ks_stat, ks_ok = ks_test(samples, target_var)
            if not ks_ok:
                reasons.append(f"KS sqrt(N)D = {math.sqrt(R) * ks_stat:.4f} >= {KS_CRITICAL_1PCT}")
        if "min_abs_skew" in tol and not abs(skew) > tol["min_abs_skew"]:
            reasons.append(f"|skewness| {abs(skew):.4f} not above {tol['min_abs_skew']}")

    slope = None
    if cfg.rate_T:
        slope = _rate_study(cfg, threads)

    return McReport(cfg.to_dict(), samples, mean, var, target_var, ks_stat, ks_ok, skew,
                    slope, not reasons, reasons)


def _rate_study(cfg: McExperimentConfig, threads: int) -> float:
    if cfg.target.startswith(("PV_", "SIGMA")):
        raise ConfigurationError("rate fits apply to drift targets only")
    variances = []
    R = cfg.replications
    for j, T in enumerate(cfg.rate_T):
        _drift_grid(cfg.params, T)
        errs = np.empty(R)
        _fill(errs, lambda r: replicate(cfg, r, T=T, stream=(r, j + 1)), R, threads)
        m = float(np.sum(errs) / R)
        variances.append(float(np.sum((errs - m) ** 2) / (R - 1)))
    return rate_fit(cfg.rate_T, variances)
