"""
Higher order power variations and the volatility estimators built on them.

Observations on a grid with step h are treated as sampled at frequency
n = 1/h, so V^n_{k,p}(Z)_t sums over the first [t/h] - k + 1 differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePathError, DomainError
from .fou_model import FouPath
from .fracgauss import apply_difference, rho_k

__all__ = [
    "PowerVariationConfig",
    "c_kp",
    "v_kp",
    "v_kp_path",
    "integrated_volatility",
    "sigma_hat",
    "sigma_hat_from_values",
]


@dataclass(frozen=True)
class PowerVariationConfig:
    k: int
    p: float
    H: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"difference order k must be a positive integer, got {self.k!r}")
        if not self.p > 0:
            raise DomainError(f"power p must be positive, got {self.p!r}")
        if not 0 < self.H < 1:
            raise DomainError(f"Hurst index must lie in (0, 1), got {self.H!r}")
        object.__setattr__(self, "k", int(self.k))

    @property
    def clt_available(self) -> bool:
        """False for k = 1 with H >= 3/4, where only the LLN holds."""
        return self.k >= 2 or self.H < 0.75


def c_kp(H: float, k: int, p: float) -> float:
    """E|Delta_k B^H_n|^p for unit-step differences."""
    if not p > 0:
        raise DomainError(f"power p must be positive, got {p!r}")
    r0 = rho_k(H, k, 0)
    return 2 ** (p / 2) * math.gamma((p + 1) / 2) / math.gamma(0.5) * r0 ** (p / 2)


def _count(n: float, t: float) -> int:
    # [n t] with a guard against representation error in n*t
    return int(math.floor(n * t + 1e-9))


def v_kp(values, k: int, p: float, t: float, n: float) -> float:
    """
    V^n_{k,p}(Z)_t for Z sampled at i/n, i = 0, 1, ...

    Zero when fewer than one full difference fits in [0, t].
    """
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t!r}")
    z = np.asarray(values, dtype=np.float64)
    m = _count(n, t)
    terms = m - k + 1
    if terms < 1:
        return 0.0
    if m + 1 > z.size:
        raise DomainError(f"t={t} needs {m + 1} observations, path has {z.size}")
    d = apply_difference(z[: m + 1], k)
    return float(np.sum(np.abs(d) ** p))


def v_kp_path(values, k: int, p: float, n: float) -> np.ndarray:
    """V^n_{k,p}(Z) at every grid time i/n, i = 0..len(values)-1."""
    z = np.asarray(values, dtype=np.float64)
    out = np.zeros(z.size)
    if z.size >= k + 1:
        out[k:] = np.cumsum(np.abs(apply_difference(z, k)) ** p)
    return out


def integrated_volatility(path: FouPath, cfg: PowerVariationConfig, t: float | None = None) -> float:
    """PV_{k,p}(X)_t, consistent for int_0^t |sigma_s|^p ds."""
    if t is None:
        t = path.T
    n = 1.0 / path.grid.h
    v = v_kp(path.values, cfg.k, cfg.p, t, n)
    return n ** (-1 + cfg.p * cfg.H) * v / c_kp(cfg.H, cfg.k, cfg.p)


def sigma_hat_from_values(values, h: float, cfg: PowerVariationConfig) -> float:
    """Positive p-th root of |sigma_hat|^p for observations with step h."""
    z = np.asarray(values, dtype=np.float64)
    if z.size < cfg.k + 2:
        raise DomainError(f"need at least {cfg.k + 2} observations for k={cfg.k}")
    n = 1.0 / h
    T = (z.size - 1) * h
    v = v_kp(z, cfg.k, cfg.p, T, n)
    if not v > 0:
        raise DegeneratePathError("power variation is zero; path carries no volatility information")
    sp = n ** (-1 + cfg.p * cfg.H) * v / (c_kp(cfg.H, cfg.k, cfg.p) * T)
    return sp ** (1.0 / cfg.p)


def sigma_hat(path: FouPath, cfg: PowerVariationConfig) -> float:
    return sigma_hat_from_values(path.values, path.grid.h, cfg)
