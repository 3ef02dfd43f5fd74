"""
Drift estimators for the fractional OU process with known H and sigma.

theta_tilde and theta_bar are the practical estimators: both invert the
stationary second moment sigma^2 theta^{-2H} H Gamma(2H), from a continuous
record and from discrete observations respectively. theta_hat_lse_sim is the
least squares estimator written through its divergence-integral correction,
which depends on the true theta; it exists to check the limit theory by
simulation and is not usable on data.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .asymptotics import drift_clt_variance
from .errors import DegeneratePathError, DomainError
from .fou_model import FouPath, ell_T
from .fracgauss import GridSpec

__all__ = [
    "DriftEstimate",
    "StepConditionReport",
    "theta_tilde",
    "theta_bar",
    "theta_hat_lse_sim",
    "check_step_conditions",
    "admissible_p_interval",
]

ESTIMATORS = ("LSE_SIM", "ETE", "DISCRETE")


@dataclass(frozen=True)
class StepConditionReport:
    H: float
    n: int
    h: float
    p: float | None
    interval: tuple[float, float]
    criterion: str
    criterion_value: float | None
    nh: float
    p_in_interval: bool | None
    satisfied: bool | None
    reasons: tuple[str, ...] = ()

    def to_dict(self):
        d = asdict(self)
        d["interval"] = list(self.interval)
        d["reasons"] = list(self.reasons)
        return d


@dataclass(frozen=True)
class DriftEstimate:
    estimator: str
    value: float
    rate: str
    asymptotic: dict | None
    diagnostics: dict
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise DomainError(f"unknown estimator {self.estimator!r}")
        if not math.isfinite(self.value):
            raise DegeneratePathError(f"{self.estimator} estimate is not finite")
        if self.estimator == "DISCRETE" and "condition_report" not in self.diagnostics:
            raise DomainError("discrete estimates carry a condition report")

    def to_dict(self):
        return {
            "estimator": self.estimator,
            "value": self.value,
            "rate": self.rate,
            "asymptotic": self.asymptotic,
            "diagnostics": self.diagnostics,
            "flags": list(self.flags),
        }


def _check(sigma, H):
    if not (sigma > 0) or not math.isfinite(sigma):
        raise DomainError(f"sigma must be positive, got {sigma!r}")
    if not 0 < H < 1:
        raise DomainError(f"Hurst index must lie in (0, 1), got {H!r}")


def _limit_law(estimator, H, theta):
    # the law is evaluated at the estimate when the true value is unknown
    if not (theta > 0):
        return None
    return drift_clt_variance(estimator, H, theta).to_dict()


def _invert_second_moment(mean_square, sigma, H):
    return (mean_square / (sigma ** 2 * H * math.gamma(2 * H))) ** (-1.0 / (2 * H))


def theta_tilde(path: FouPath, sigma: float, H: float) -> DriftEstimate:
    """Ergodic-type estimator from (1/T) int_0^T X_t^2 dt (trapezoid rule)."""
    _check(sigma, H)
    X = path.values
    T = path.T
    integral = float(trapezoid(X * X, dx=path.grid.h))
    if not integral > 0:
        raise DegeneratePathError("int X^2 dt is zero; the path carries no drift information")
    value = _invert_second_moment(integral / T, sigma, H)
    law = _limit_law("ETE", H, value)
    flags = ("x0_nonzero",) if path.x0 != 0 else ()
    diag = {"T": T, "n": path.grid.n, "h": path.grid.h, "used_sigma": sigma, "used_H": H,
            "condition_report": None}
    return DriftEstimate("ETE", value, law["rate"], law, diag, flags)


def admissible_p_interval(H: float) -> tuple[float, float]:
    if not 0 < H < 1:
        raise DomainError(f"Hurst index must lie in (0, 1), got {H!r}")
    if H < 0.75:
        return (1.0, min((3 + 2 * H) / (1 + 2 * H), 1 + 2 * H))
    if H == 0.75:
        return (1.0, 9 / 5)
    return (1.0, (3 - H) / (2 - H))


def check_step_conditions(H: float, n: int, h: float, p: float | None = None) -> StepConditionReport:
    """
    Report whether (n, h, p) fits the high-frequency regime behind theta_bar.

    The asymptotic requirement n h^p -> 0 (n h^p / log(nh) -> 0 at H = 3/4)
    is read at finite n as: the criterion is below 1 and nh > 1. With p
    omitted only the interval and nh are reported.
    """
    lo, hi = admissible_p_interval(H)
    nh = n * h
    criterion = "n*h^p/log(n*h)" if H == 0.75 else "n*h^p"
    reasons = []
    if not nh > 1:
        reasons.append(f"observation span nh = {nh:.6g} must exceed 1")
    if p is None:
        return StepConditionReport(H, n, h, None, (lo, hi), criterion, None, nh, None, None,
                                   tuple(reasons))
    inside = lo < p < hi
    if not inside:
        reasons.append(f"p = {p} outside admissible interval ({lo:.6g}, {hi:.6g})")
    value = n * h ** p
    if H == 0.75:
        value = value / math.log(nh) if nh > 1 else math.inf
    if not value < 1:
        reasons.append(f"{criterion} = {value:.6g} is not small (needs < 1)")
    return StepConditionReport(H, n, h, p, (lo, hi), criterion, value, nh, inside,
                               not reasons, tuple(reasons))


def theta_bar(observations, grid: GridSpec, sigma: float, H: float,
              p: float | None = None) -> DriftEstimate:
    """
    Discrete-observation estimator from (1/n) sum_{k=1..n} X_{kh}^2.

    ``observations`` holds X_0..X_n; X_0 does not enter the sum.
    """
    _check(sigma, H)
    x = np.asarray(observations, dtype=np.float64)
    if x.size == 0:
        raise DomainError("no observations")
    if x.shape != (grid.n + 1,):
        raise DomainError(f"got {x.size} observations, grid needs {grid.n + 1}")
    if not np.all(np.isfinite(x)):
        raise DomainError("observations contain non-finite values")
    s = float(np.sum(x[1:] ** 2))
    if not s > 0:
        raise DegeneratePathError("sum of squared observations is zero")
    value = _invert_second_moment(s / grid.n, sigma, H)
    report = check_step_conditions(H, grid.n, grid.h, p)
    law = _limit_law("ETE", H, value)
    # the discrete estimator follows the ergodic laws with T = nh
    rate = law["rate"].replace("T", "nh")
    flags = ()
    if report.satisfied is False:
        flags = ("step_conditions_violated",)
    diag = {"T": grid.T, "n": grid.n, "h": grid.h, "used_sigma": sigma, "used_H": H,
            "condition_report": report.to_dict()}
    return DriftEstimate("DISCRETE", value, rate, law, diag, flags)


def theta_hat_lse_sim(path: FouPath, sigma: float, H: float, true_theta: float) -> DriftEstimate:
    """
    Least squares estimator in simulation mode:
    (sigma * ell_T(true_theta) - X_T^2 / 2) / int_0^T X_t^2 dt.
    """
    _check(sigma, H)
    if not true_theta > 0:
        raise DomainError(f"true_theta must be positive, got {true_theta!r}")
    X = path.values
    T = path.T
    denom = float(trapezoid(X * X, dx=path.grid.h))
    if not denom > 0:
        raise DegeneratePathError("int X^2 dt is zero; the path carries no drift information")
    value = (sigma * ell_T(true_theta, sigma, H, T) - 0.5 * X[-1] ** 2) / denom
    law = drift_clt_variance("LSE", H, true_theta).to_dict()
    flags = []
    if value <= 0:
        flags.append("nonpositive")
    if path.x0 != 0:
        flags.append("x0_nonzero")
    diag = {"T": T, "n": path.grid.n, "h": path.grid.h, "used_sigma": sigma, "used_H": H,
            "true_theta": true_theta, "condition_report": None}
    return DriftEstimate("LSE_SIM", value, law["rate"], law, diag, tuple(flags))
