"""
Fractional Ornstein-Uhlenbeck paths and the deterministic functions of T
that the drift estimators need.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError
from .fracgauss import FbmPath, GridSpec, _frozen, write_path_csv

__all__ = [
    "VolatilitySpec",
    "FouPath",
    "build_fou",
    "lower_incomplete_gamma",
    "m_T",
    "ell_T",
    "stationary_variance",
]


@dataclass(frozen=True)
class VolatilitySpec:
    """Constant volatility or a deterministic function of time."""

    kind: str
    value: float | Callable[[np.ndarray], np.ndarray] | np.ndarray
    holder_exponent_hint: float | None = None

    def __post_init__(self):
        if self.kind == "constant":
            v = float(self.value)
            if not math.isfinite(v) or v < 0:
                raise DomainError(f"constant volatility must be finite and >= 0, got {self.value!r}")
            object.__setattr__(self, "value", v)
        elif self.kind == "function":
            if not callable(self.value):
                arr = _frozen(self.value)
                if not np.all(np.isfinite(arr)):
                    raise DomainError("tabulated volatility contains non-finite samples")
                object.__setattr__(self, "value", arr)
        else:
            raise DomainError(f"unknown volatility kind {self.kind!r}")

    @classmethod
    def constant(cls, sigma: float) -> "VolatilitySpec":
        return cls("constant", sigma, None)

    @classmethod
    def from_function(cls, fn, holder_exponent_hint: float | None = None) -> "VolatilitySpec":
        return cls("function", fn, holder_exponent_hint)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def on_grid(self, grid: GridSpec) -> np.ndarray:
        if self.kind == "constant":
            return np.full(grid.n + 1, self.value)
        if callable(self.value):
            out = np.asarray(self.value(grid.times), dtype=np.float64)
            out = np.broadcast_to(out, (grid.n + 1,)).copy()
        else:
            out = np.array(self.value)
            if out.shape != (grid.n + 1,):
                raise DomainError(
                    f"tabulated volatility has {out.size} samples, grid needs {grid.n + 1}")
        if not np.all(np.isfinite(out)):
            raise DomainError("volatility function returned non-finite values")
        return out

    def describe(self):
        if self.kind == "constant":
            return self.value
        return "function"


@dataclass(frozen=True)
class FouPath:
    theta: float
    sigma: VolatilitySpec
    hurst: float
    grid: GridSpec
    values: np.ndarray = field(repr=False)
    x0: float = 0.0
    seed: int | None = None
    source: str = ""

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != (self.grid.n + 1,):
            raise DomainError(
                f"path has {values.size} values, grid needs {self.grid.n + 1}")
        if values[0] != self.x0:
            raise DomainError("first path value must equal x0")
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def T(self) -> float:
        return self.grid.T

    def coarsen(self, factor: int) -> "FouPath":
        """Keep every ``factor``-th observation (same underlying trajectory)."""
        sigma = self.sigma
        if not sigma.is_constant and not callable(sigma.value):
            sigma = VolatilitySpec("function", sigma.value[::factor], sigma.holder_exponent_hint)
        return FouPath(self.theta, sigma, self.hurst, self.grid.coarsen(factor),
                       self.values[::factor], self.x0, self.seed, self.source)

    def params(self) -> dict:
        return {
            "theta": self.theta,
            "sigma": self.sigma.describe(),
            "hurst": self.hurst,
            "h": self.grid.h,
            "n": self.grid.n,
            "seed": self.seed,
            "x0": self.x0,
            "source": self.source,
        }

    def write(self, csv_path, sidecar_path=None) -> None:
        """CSV of ``t,value`` plus a JSON sidecar of generating parameters."""
        write_path_csv(csv_path, self.times, self.values)
        if sidecar_path is not None:
            with open(sidecar_path, "w") as fh:
                json.dump(self.params(), fh, indent=2, sort_keys=True)
                fh.write("\n")


def build_fou(fbm: FbmPath, theta: float, sigma: VolatilitySpec | float,
              x0: float = 0.0) -> FouPath:
    """
    Solve dX = -theta X dt + sigma(t) dB^H on the grid of ``fbm``.

    Constant sigma advances X_{i+1} = e^{-theta h} X_i + sigma w dB_i with
    w = (1 - e^{-theta h}) / (theta h): the exact convolution of the
    exponential kernel with B interpolated linearly inside each step. Its
    error does not grow with |B_t|, unlike a trapezoid rule applied to
    int B(s) e^{-theta(t-s)} ds after integration by parts. A time-varying
    sigma falls back to the Euler scheme, which is first order.
    """
    if not isinstance(sigma, VolatilitySpec):
        sigma = VolatilitySpec.constant(sigma)
    if not math.isfinite(theta) or theta < 0:
        raise DomainError(f"theta must be finite and >= 0, got {theta!r}")
    if not math.isfinite(x0):
        raise DomainError("x0 must be finite")
    B = fbm.values
    if not np.all(np.isfinite(B)):
        raise DomainError("fBm path contains non-finite values")
    h = fbm.grid.h
    n = fbm.grid.n
    t = fbm.grid.times

    if sigma.is_constant:
        if theta == 0.0:
            X = x0 + sigma.value * B
        else:
            X = x0 * np.exp(-theta * t) + sigma.value * _exp_increments(B, theta, h)
    else:
        s = sigma.on_grid(fbm.grid)
        dB = np.diff(B)
        X = np.empty(n + 1)
        X[0] = x0
        x = x0
        for i in range(n):
            x = x - theta * x * h + s[i] * dB[i]
            X[i + 1] = x
    X[0] = x0
    return FouPath(theta, sigma, fbm.hurst, fbm.grid, X, x0, fbm.seed, fbm.source_id)


def _exp_increments(B: np.ndarray, theta: float, h: float) -> np.ndarray:
    # Y[i+1] = decay*Y[i] + w*(B[i+1] - B[i]), Y[0] = 0, as a linear filter
    decay = math.exp(-theta * h)
    w = -math.expm1(-theta * h) / (theta * h)
    Y = np.empty_like(B)
    Y[0] = 0.0
    Y[1:] = lfilter([w], [1.0, -decay], np.diff(B))
    return Y


_GAMMA_EPS = 1e-15
_GAMMA_MAXIT = 10_000


def lower_incomplete_gamma(alpha: float, T: float) -> float:
    """gamma(alpha, T) = int_0^T e^{-x} x^{alpha-1} dx (not regularized)."""
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha!r}")
    if T < 0:
        raise DomainError(f"upper limit must be >= 0, got {T!r}")
    if T == 0:
        return 0.0
    if math.isinf(T):
        return math.gamma(alpha)
    log_pref = -T + alpha * math.log(T)
    if T < alpha + 1.0:
        # series: e^{-T} T^a sum_n T^n / (a (a+1) ... (a+n))
        term = 1.0 / alpha
        total = term
        ap = alpha
        for _ in range(_GAMMA_MAXIT):
            ap += 1.0
            term *= T / ap
            total += term
            if abs(term) < abs(total) * _GAMMA_EPS:
                break
        return total * math.exp(log_pref)
    # modified Lentz continued fraction for the upper function
    tiny = 1e-300
    b = T + 1.0 - alpha
    c = 1.0 / tiny
    d = 1.0 / b
    frac = d
    for i in range(1, _GAMMA_MAXIT):
        an = -i * (i - alpha)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        frac *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    upper = math.exp(log_pref) * frac
    return math.gamma(alpha) - upper


def _check_drift_args(theta, sigma, H, T):
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta!r}")
    if sigma < 0:
        raise DomainError(f"sigma must be >= 0, got {sigma!r}")
    if not 0 < H < 1:
        raise DomainError(f"Hurst index must lie in (0, 1), got {H!r}")
    if not T > 0:
        raise DomainError(f"horizon must be positive, got {T!r}")


def m_T(theta: float, sigma: float, H: float, T: float) -> float:
    """H theta sigma int_0^T int_0^t e^{-theta(t-s)} (t^{2H-1} - (t-s)^{2H-1}) ds dt."""
    _check_drift_args(theta, sigma, H, T)
    x = theta * T
    return (0.5 * sigma * lower_incomplete_gamma(1.0, x) * T ** (2 * H)
            + sigma * theta ** (-2 * H) * lower_incomplete_gamma(2 * H + 1, x) * (H - 0.5)
            - T * H * sigma * theta ** (1 - 2 * H) * lower_incomplete_gamma(2 * H, x))


def ell_T(theta: float, sigma: float, H: float, T: float) -> float:
    """
    Trace term E int_0^T X_t o dB^H_t separating the Stratonovich and
    divergence integrals; grows like H sigma theta^{1-2H} Gamma(2H) T.
    """
    return 0.5 * sigma * T ** (2 * H) - m_T(theta, sigma, H, T)


def stationary_variance(theta: float, sigma: float, H: float) -> float:
    """Limit of (1/T) int_0^T X_t^2 dt: sigma^2 theta^{-2H} H Gamma(2H)."""
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta!r}")
    if not 0 < H < 1:
        raise DomainError(f"Hurst index must lie in (0, 1), got {H!r}")
    return sigma ** 2 * theta ** (-2 * H) * H * math.gamma(2 * H)
