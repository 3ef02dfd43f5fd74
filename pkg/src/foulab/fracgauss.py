"""
Fractional Gaussian noise and fractional Brownian motion.

Exact sampling on a uniform grid via circulant embedding of the fGn
autocovariance, plus the deterministic kernels behind the power-variation
estimators: the fBm covariance, the k-th order difference filter and the
autocovariance of k-th order differences of fBm.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Sequence

import numpy as np

from .errors import DomainError, EmbeddingError

__all__ = [
    "GridSpec",
    "FbmPath",
    "DifferenceKernel",
    "fbm_covariance",
    "fgn_autocovariance",
    "rho_k",
    "difference_kernel",
    "apply_difference",
    "circulant_eigenvalues",
    "make_rng",
    "sample_fgn",
    "sample_fbm",
    "write_path_csv",
    "read_path_csv",
]

log = logging.getLogger(__name__)

# relative threshold below which negative circulant eigenvalues are rounding noise
EIGEN_CLIP_TOL = 1e-9

_clip_events = 0


def clip_events() -> int:
    """Number of embeddings so far that needed eigenvalue clipping."""
    return _clip_events


def _check_hurst(H: float) -> None:
    if not (0.0 < H < 1.0) or not np.isfinite(H):
        raise DomainError(f"Hurst index must lie in (0, 1), got {H!r}")


@dataclass(frozen=True)
class GridSpec:
    """Uniform observation grid t_i = i*h, i = 0..n."""

    n: int
    h: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"grid needs n >= 1 steps, got {self.n!r}")
        if not (self.h > 0) or not np.isfinite(self.h):
            raise DomainError(f"grid step must be positive, got {self.h!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "h", float(self.h))

    @property
    def T(self) -> float:
        return self.n * self.h

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h

    @classmethod
    def from_horizon(cls, T: float, h: float) -> "GridSpec":
        n = int(round(T / h))
        if abs(n * h - T) > 1e-9 * max(T, 1.0):
            raise DomainError(f"horizon {T} is not a multiple of step {h}")
        return cls(n, h)

    def coarsen(self, factor: int) -> "GridSpec":
        if factor < 1 or self.n % factor:
            raise DomainError(f"cannot coarsen {self.n} steps by {factor}")
        return GridSpec(self.n // factor, self.h * factor)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FbmPath:
    hurst: float
    grid: GridSpec
    values: np.ndarray = field(repr=False)
    seed: int | None = None
    stream: int | tuple[int, ...] | None = None

    def __post_init__(self):
        _check_hurst(self.hurst)
        values = _frozen(self.values)
        if values.shape != (self.grid.n + 1,):
            raise DomainError(
                f"path has {values.size} values, grid needs {self.grid.n + 1}")
        if values[0] != 0.0:
            raise DomainError("fBm path must start at 0")
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    @property
    def source_id(self) -> str:
        return f"fbm(H={self.hurst!r},n={self.grid.n},h={self.grid.h!r},seed={self.seed},stream={self.stream})"

    def coarsen(self, factor: int) -> "FbmPath":
        """Restrict the path to every ``factor``-th grid point."""
        grid = self.grid.coarsen(factor)
        return FbmPath(self.hurst, grid, self.values[::factor], self.seed, self.stream)


@dataclass(frozen=True)
class DifferenceKernel:
    k: int
    coefficients: tuple[int, ...]

    def __post_init__(self):
        if len(self.coefficients) != self.k + 1:
            raise DomainError("kernel needs k+1 coefficients")


def fbm_covariance(H: float, t: float, s: float) -> float:
    """Covariance E[B_t B_s] of fBm with Hurst index H."""
    _check_hurst(H)
    a = 2.0 * H
    return 0.5 * (abs(t) ** a + abs(s) ** a - abs(t - s) ** a)


def fgn_autocovariance(H: float, lags, h: float = 1.0) -> np.ndarray:
    """Autocovariance of fBm increments over steps of length h at integer lags."""
    _check_hurst(H)
    j = np.abs(np.asarray(lags, dtype=np.float64))
    a = 2.0 * H
    return 0.5 * h ** a * ((j + 1.0) ** a + np.abs(j - 1.0) ** a - 2.0 * j ** a)


def _binomial_tail(a, coeffs, j, order):
    # sum_i c_i (1 - i/j)^a truncated at the given order of the binomial series;
    # c_i = c_{-i}, so only even orders survive and each pair contributes twice
    out = np.zeros_like(j)
    if j.size == 0:
        return out
    k = max(i for i, _ in coeffs)
    weights = {i: 2.0 * c for i, c in coeffs if i > 0}
    u2 = {i: (i / j) ** 2 for i in weights}
    powers = {i: np.ones_like(j) for i in weights}
    binom = 1.0
    for r in range(1, order + 1):
        binom *= (a - r + 1) / r
        if r % 2:
            continue
        for i in weights:
            powers[i] = powers[i] * u2[i]
        if r >= 2 * k:
            out = out + binom * sum(w * powers[i] for i, w in weights.items())
    return out


def rho_k(H: float, k: int, j) -> np.ndarray | float:
    """
    Unit-step autocovariance of the k-th order difference of fBm at lag j.

    Accepts a scalar or an array of lags (symmetric in j). Uses 0**(2H) = 0.
    """
    _check_hurst(H)
    if k < 1:
        raise DomainError(f"difference order must be >= 1, got {k}")
    jj = np.abs(np.asarray(j, dtype=np.float64))
    a = 2.0 * H
    coeffs = [(i, (-1.0 if (1 - i) % 2 else 1.0) * comb(2 * k, k - i)) for i in range(-k, k + 1)]
    near = np.zeros_like(jj)
    for i, c in coeffs:
        near = near + c * np.abs(jj - i) ** a
    # beyond lag k the coefficients sum to zero and direct evaluation cancels
    # O(j^{2H}) terms down to O(j^{2H-2k}); expand (1 - i/j)^{2H} in powers of
    # i/j instead, where all terms below order 2k vanish identically
    big = jj > k
    far = np.zeros_like(jj)
    if np.any(big):
        jb = jj[big]
        close = jb < 3 * k
        acc = np.empty_like(jb)
        acc[~close] = _binomial_tail(a, coeffs, jb[~close], 2 * k + 64)
        acc[close] = _binomial_tail(a, coeffs, jb[close], 2 * k + 320)
        far[big] = jb ** a * acc
    out = 0.5 * np.where(big, far, near)
    if np.ndim(j) == 0:
        return float(out)
    return out


def difference_kernel(k: int) -> DifferenceKernel:
    if k < 1:
        raise DomainError(f"difference order must be >= 1, got {k}")
    coeffs = tuple((-1) ** (k - j) * comb(k, j) for j in range(k + 1))
    return DifferenceKernel(k, coeffs)


def apply_difference(x, k: int) -> np.ndarray:
    """k-th forward difference; output has len(x) - k entries."""
    kernel = difference_kernel(k)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < k + 1:
        raise DomainError(f"need at least {k + 1} values for a difference of order {k}")
    m = x.size - k
    out = np.zeros(m)
    for j, c in enumerate(kernel.coefficients):
        out += c * x[j:j + m]
    return out


@lru_cache(maxsize=32)
def _eigenvalues_cached(H: float, n: int) -> tuple[np.ndarray, int]:
    global _clip_events
    gamma = fgn_autocovariance(H, np.arange(n + 1))
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    eig = np.fft.fft(row).real
    lo = eig.min()
    nclip = 0
    if lo < 0:
        if lo < -EIGEN_CLIP_TOL * eig.max():
            raise EmbeddingError(
                f"circulant embedding failed for H={H}, n={n}: eigenvalue {lo:.3e}")
        nclip = int(np.count_nonzero(eig < 0))
        _clip_events += 1
        log.warning("clipped %d slightly negative eigenvalues (H=%s, n=%d)", nclip, H, n)
        eig = np.where(eig < 0, 0.0, eig)
    eig.setflags(write=False)
    return eig, nclip


def circulant_eigenvalues(H: float, n: int) -> np.ndarray:
    """Eigenvalues of the size-2n circulant embedding of unit-step fGn."""
    _check_hurst(H)
    return _eigenvalues_cached(float(H), int(n))[0]


def make_rng(seed: int, stream: int | tuple[int, ...] | None = None) -> np.random.Generator:
    """
    PCG64 generator for ``seed``; ``stream`` selects an independent child.

    Streams are derived through SeedSequence spawn keys, so stream r does not
    depend on how many other streams were drawn before it. A tuple addresses
    a nested child, e.g. (replication, horizon index).
    """
    if stream is None:
        ss = np.random.SeedSequence(seed)
    else:
        key = tuple(int(s) for s in stream) if isinstance(stream, tuple) else (int(stream),)
        ss = np.random.SeedSequence(seed, spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def sample_fgn(H: float, n: int, rng: np.random.Generator, h: float = 1.0) -> np.ndarray:
    """n exact fGn increments for step h."""
    eig = circulant_eigenvalues(H, n)
    m = eig.size
    z = rng.standard_normal(2 * m)
    w = z[:m] + 1j * z[m:]
    y = np.fft.fft(np.sqrt(eig / m) * w)
    return y.real[:n] * h ** H


def sample_fbm(H: float, grid: GridSpec, seed: int,
               stream: int | tuple[int, ...] | None = None) -> FbmPath:
    _check_hurst(H)
    rng = make_rng(seed, stream)
    inc = sample_fgn(H, grid.n, rng, grid.h)
    values = np.concatenate([[0.0], np.cumsum(inc)])
    return FbmPath(H, grid, values, seed, stream)


def write_path_csv(path, times: Sequence[float], values: Sequence[float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "value"])
        for t, v in zip(times, values):
            w.writerow([repr(float(t)), repr(float(v))])


def read_path_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a ``t,value`` CSV; the header row is mandatory."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["t", "value"]:
            raise DomainError(f"{path}: expected header 't,value', got {header!r}")
        t, v = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DomainError(f"{path}:{lineno}: expected 2 columns")
            try:
                t.append(float(row[0]))
                v.append(float(row[1]))
            except ValueError as exc:
                raise DomainError(f"{path}:{lineno}: {exc}") from None
    return np.array(t), np.array(v)
