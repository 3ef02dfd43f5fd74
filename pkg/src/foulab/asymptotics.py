"""
Closed-form asymptotic constants.

Covers the Hermite expansion of |x|^p, the limiting variances of the power
variation (v_1^2 and the normalized nu^2), the drift-estimator limit laws
and the quadrature of the double integrals A_{1,H}, A_{2,H} that drive the
H >= 3/4 regime.

Hermite polynomials use the normalization H_m = He_m / m!, so that
E[H_m(N)^2] = 1/m!.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import DivergenceError, DomainError
from .fracgauss import rho_k
from .power_variation import c_kp

__all__ = [
    "abs_moment",
    "hermite_abs_moment",
    "hermite_abs_moment_quadrature",
    "SeriesValue",
    "v1_squared",
    "nu_squared_normalized",
    "converged_nu_squared",
    "Table1",
    "table1",
    "TABLE1_H",
    "TABLE1_K",
    "sigma_H_squared",
    "LimitLaw",
    "drift_clt_variance",
    "rosenblatt_r1_variance",
    "ft_variance_limit",
    "lemma_at_pair",
    "lemma_at_quadrature",
    "lemma_at_limit",
    "figure1_data",
    "AsymptoticConstants",
    "asymptotic_constants",
]

DEFAULT_M = 60
DEFAULT_J = 100_000
# lag cutoff behind the published table; its k=1 entries near H=3/4 are not converged
TABLE1_MAX_LAG = 10_000
TABLE1_H = (0.1, 0.3, 0.5, 0.6, 0.7, 0.8, 0.9)
TABLE1_K = (1, 2, 3, 4, 5)


def abs_moment(p: float) -> float:
    """E|N|^p for standard normal N."""
    return 2 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)


def hermite_abs_moment(m: int, p: float) -> float:
    """
    E[H_m(N) |N|^p].

    Zero for odd m. For m = 2q Gaussian integration by parts gives
    E|N|^p * p (p-2) ... (p-2q+2) / (2q)!, valid for every p > 0.
    """
    if m < 0 or int(m) != m:
        raise DomainError(f"Hermite order must be a nonnegative integer, got {m!r}")
    if not p > 0:
        raise DomainError(f"power p must be positive, got {p!r}")
    if m % 2:
        return 0.0
    q = m // 2
    # product and factorial in log space keep m ~ 100s finite
    sign = 1.0
    log_prod = 0.0
    for l in range(q):
        f = p - 2 * l
        if f == 0.0:
            return 0.0
        if f < 0:
            sign = -sign
        log_prod += math.log(abs(f))
    return sign * abs_moment(p) * math.exp(log_prod - math.lgamma(m + 1))


def hermite_abs_moment_quadrature(m: int, p: float, nodes: int = 200) -> float:
    """
    Same quantity by generalized Gauss-Laguerre quadrature.

    With u = x^2/2 the integral becomes 2^{p/2} pi^{-1/2} int_0^inf
    H_m(sqrt(2u)) u^{(p-1)/2} e^{-u} du, exact for polynomial degree m/2 < 2*nodes.
    Loses accuracy from cancellation once m grows past ~20.
    """
    if m % 2:
        return 0.0
    u, w = special.roots_genlaguerre(nodes, (p - 1) / 2)
    x = np.sqrt(2.0 * u)
    hm = special.eval_hermitenorm(m, x) / math.factorial(m)
    return float(np.sum(w * hm) * 2 ** (p / 2) / math.sqrt(math.pi))


@dataclass(frozen=True)
class SeriesValue:
    """Truncated series with the size of what was left out."""

    value: float
    tail_bound: float
    M: int
    J: int

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "tail_bound", float(self.tail_bound))

    def __float__(self):
        return self.value


def _check_series_domain(H, k, p):
    if not 0 < H < 1:
        raise DomainError(f"Hurst index must lie in (0, 1), got {H!r}")
    if int(k) != k or k < 1:
        raise DomainError(f"difference order must be a positive integer, got {k!r}")
    if not p > 0:
        raise DomainError(f"power p must be positive, got {p!r}")
    if k == 1 and H >= 0.75:
        raise DivergenceError(
            "sum of squared first-difference covariances diverges for k=1 and H >= 3/4")


def _lag_sums(r: np.ndarray, orders, beta_unit: float, tail_correction: bool):
    """
    For each even order m: sum_{j>=1} r_j^m with an Euler-Maclaurin tail from a
    power law C x^{m*beta_unit} fitted at the last lag, plus an error bound for
    that extrapolation from the fit mismatch at half the lag range.
    """
    J = r.size
    sums, bounds = {}, {}
    r2 = r * r
    rm = np.ones_like(r)
    last = 0
    for m in orders:
        for _ in range((m - last) // 2):
            rm = rm * r2
        last = m
        partial = float(np.sum(rm))
        tail, bound = 0.0, 0.0
        fJ = rm[-1]
        beta = m * beta_unit
        if tail_correction and fJ != 0.0 and J >= 4:
            if beta >= -1:
                raise DivergenceError(f"lag series of order {m} does not converge")
            # power law C x^beta through (J, fJ), written without J^beta to avoid underflow
            tail = -fJ * J / (beta + 1) - fJ / 2 - beta * fJ / (12 * J)
            half = J // 2
            fh = rm[half - 1]
            mismatch = abs(fh - fJ * (half / J) ** beta) / abs(fh) if fh else 1.0
            bound = 2 * abs(tail) * mismatch + 1e-15 * abs(partial)
        sums[m] = partial + tail
        bounds[m] = bound
    return sums, bounds


def _chaos_terms(H, k, p, M, J, tail_correction=True):
    """
    Per-order pieces m! E^2[H_m |N|^p] (1 + 2 S_m) of the nu^2 series, summed,
    together with an estimate and bound for orders above M.
    """
    _check_series_domain(H, k, p)
    if M < 2 or J < 1:
        raise DomainError("need M >= 2 and J >= 1")
    r0 = rho_k(H, k, 0)
    r = rho_k(H, k, np.arange(1, J + 1, dtype=np.float64)) / r0
    orders = list(range(2, M + 1, 2))
    m_next = orders[-1] + 2
    sums, lag_bounds = _lag_sums(r, orders + [m_next], 2 * H - 2 * k, tail_correction)

    total = 0.0
    bound = 0.0
    mass = abs_moment(2 * p) - abs_moment(p) ** 2
    for m in orders:
        a = hermite_abs_moment(m, p)
        w = math.exp(math.lgamma(m + 1) + 2 * math.log(abs(a))) if a else 0.0
        mass -= w
        total += w * (1 + 2 * sums[m])
        bound += w * 2 * lag_bounds[m]
    # orders > M: weights sum to the leftover mass, each lag factor lies in [1, 1 + 2 S_next]
    mass = max(mass, 0.0) + 1e-15 * abs_moment(2 * p)
    s_next = abs(sums[m_next]) + lag_bounds[m_next]
    total += mass * (1 + s_next)
    bound += mass * s_next
    # floor for accumulated rounding in the lag and chaos sums
    bound += 1e-13 * abs(total)
    return total, bound, r0


def v1_squared(H: float, k: int, p: float, M: int = DEFAULT_M, J: int = DEFAULT_J,
               tail_correction: bool = True) -> SeriesValue:
    """Limiting variance v_1^2 of the normalized k-th order p-variation of fBm."""
    total, bound, r0 = _chaos_terms(H, k, p, M, J, tail_correction)
    scale = r0 ** p
    return SeriesValue(total * scale, bound * scale, M, J)


def nu_squared_normalized(H: float, k: int, p: float, M: int = DEFAULT_M, J: int = DEFAULT_J,
                          tail_correction: bool = True) -> SeriesValue:
    """nu^2 T / sigma^{2p}: limiting variance of sqrt(n)(|sigma_hat|^p - |sigma|^p)."""
    total, bound, _ = _chaos_terms(H, k, p, M, J, tail_correction)
    scale = math.pi / (2 ** p * math.gamma((p + 1) / 2) ** 2)
    return SeriesValue(total * scale, bound * scale, M, J)


def converged_nu_squared(H, k, p, rel_tol=1e-7, max_doublings=4) -> SeriesValue:
    """Double (M, J) from the defaults until the bound drops below rel_tol."""
    M, J = DEFAULT_M, DEFAULT_J
    out = nu_squared_normalized(H, k, p, M, J)
    for _ in range(max_doublings):
        if out.tail_bound <= rel_tol * abs(out.value):
            break
        M, J = 2 * M, 2 * J
        out = nu_squared_normalized(H, k, p, M, J)
    return out


@dataclass(frozen=True)
class Table1:
    p: float
    hursts: tuple[float, ...]
    ks: tuple[int, ...]
    values: np.ndarray = field(repr=False)  # NaN marks an undefined cell
    max_lag: int
    tail_correction: bool

    def cell(self, H: float, k: int) -> float | None:
        v = self.values[self.hursts.index(H), self.ks.index(k)]
        return None if np.isnan(v) else float(v)

    def rows(self):
        for i, H in enumerate(self.hursts):
            yield H, [None if np.isnan(v) else float(v) for v in self.values[i]]


def table1(p: float = 2.0, hursts=TABLE1_H, ks=TABLE1_K, max_lag: int = TABLE1_MAX_LAG,
           tail_correction: bool = False) -> Table1:
    """
    Normalized asymptotic variance grid over (H, k).

    Defaults reproduce the published layout: lag sums stopped at j = 10^4
    without tail correction. Pass ``max_lag=DEFAULT_J, tail_correction=True``
    for converged values (they differ visibly at k = 1, H = 0.7).
    """
    vals = np.full((len(hursts), len(ks)), np.nan)
    for i, H in enumerate(hursts):
        for j, k in enumerate(ks):
            try:
                vals[i, j] = nu_squared_normalized(H, k, p, DEFAULT_M, max_lag, tail_correction).value
            except DivergenceError:
                pass
    vals.setflags(write=False)
    return Table1(p, tuple(hursts), tuple(ks), vals, max_lag, tail_correction)


def sigma_H_squared(H: float) -> float:
    """Variance factor of the least squares drift CLT, defined for 0 < H < 3/4."""
    if not 0 < H < 0.75:
        raise DomainError(f"sigma_H^2 is defined for H in (0, 3/4), got {H!r}")
    return _sigma_H_sq_low(H) if H < 0.5 else _sigma_H_sq_high(H)


# the two branches are one analytic function written around the poles of
# Gamma(1 - 2H) and Gamma(4H - 1) respectively; each is finite on both sides of 1/2
def _sigma_H_sq_low(H):
    g = math.gamma
    return (4 * H - 1) + 2 * g(2 - 4 * H) * g(4 * H) / (g(2 * H) * g(1 - 2 * H))


def _sigma_H_sq_high(H):
    g = math.gamma
    return (4 * H - 1) * (1 + g(3 - 4 * H) * g(4 * H - 1) / (g(2 - 2 * H) * g(2 * H)))


def rosenblatt_r1_variance(H: float) -> float:
    """E R_1^2 = 4 alpha_H^2 / ((4H-3)(4H-2)), alpha_H = H(2H-1)."""
    if not 0.75 < H < 1:
        raise DomainError(f"Rosenblatt variable needs H in (3/4, 1), got {H!r}")
    alpha = H * (2 * H - 1)
    return 4 * alpha ** 2 / ((4 * H - 3) * (4 * H - 2))


def ft_variance_limit(H: float, theta: float) -> float:
    """lim E(F_T^2 / T) for the double integral F_T when H < 1/2."""
    if not 0 < H < 0.5:
        raise DomainError(f"defined for H in (0, 1/2), got {H!r}")
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta!r}")
    return 4 * H ** 2 * theta ** (1 - 4 * H) * math.gamma(2 * H) ** 2 * _sigma_H_sq_low(H)


@dataclass(frozen=True)
class LimitLaw:
    """Rate and limit of a drift estimator: rate * (estimate - theta) -> law."""

    estimator: str
    H: float
    theta: float
    rate: str
    law: str  # "normal" or "rosenblatt"
    variance: float
    coefficient: float | None = None  # multiplies R_1 when law == "rosenblatt"

    def rate_value(self, T: float) -> float:
        H = self.H
        return {
            "sqrt(T)": math.sqrt(T),
            "sqrt(T)/sqrt(log T)": math.sqrt(T / math.log(T)),
            "sqrt(T)/log T": math.sqrt(T) / math.log(T),
            "T^(2-2H)": T ** (2 - 2 * H),
        }[self.rate]

    def to_dict(self):
        return asdict(self)


_ESTIMATORS = ("LSE", "ETE", "MLE")


def drift_clt_variance(estimator: str, H: float, theta: float) -> LimitLaw:
    estimator = estimator.upper()
    if estimator not in _ESTIMATORS:
        raise DomainError(f"estimator must be one of {_ESTIMATORS}, got {estimator!r}")
    if not 0 < H < 1:
        raise DomainError(f"Hurst index must lie in (0, 1), got {H!r}")
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta!r}")
    if estimator == "MLE":
        return LimitLaw("MLE", H, theta, "sqrt(T)", "normal", 2 * theta)
    if H < 0.75:
        v = theta * sigma_H_squared(H)
        if estimator == "ETE":
            v /= (2 * H) ** 2
        return LimitLaw(estimator, H, theta, "sqrt(T)", "normal", v)
    if H == 0.75:
        if estimator == "LSE":
            return LimitLaw("LSE", H, theta, "sqrt(T)/sqrt(log T)", "normal", 4 * theta / math.pi)
        # the ergodic estimator's rate carries log T, not sqrt(log T)
        return LimitLaw("ETE", H, theta, "sqrt(T)/log T", "normal", 16 * theta / (9 * math.pi))
    g = math.gamma(2 * H) if estimator == "LSE" else math.gamma(2 * H + 1)
    coef = -theta ** (2 * H - 1) / (H * g)
    return LimitLaw(estimator, H, theta, "T^(2-2H)", "rosenblatt",
                    coef ** 2 * rosenblatt_r1_variance(H), coef)


def figure1_data(theta: float = 1.0, hursts=None) -> list[tuple[float, float, float, float]]:
    """(H, LSE, ETE, MLE) asymptotic variances over H in [0.01, 0.74]."""
    if hursts is None:
        hursts = [i / 100 for i in range(1, 75)]
    rows = []
    for H in hursts:
        rows.append((H,
                     drift_clt_variance("LSE", H, theta).variance,
                     drift_clt_variance("ETE", H, theta).variance,
                     drift_clt_variance("MLE", H, theta).variance))
    return rows


def _check_lemma_args(n, H, theta, T):
    if n < 0 or int(n) != n:
        raise DomainError(f"n must be a nonnegative integer, got {n!r}")
    if not 0.75 <= H < 1:
        raise DomainError(f"defined for H in [3/4, 1), got {H!r}")
    if not theta > 0 or not T > 0:
        raise DomainError("theta and T must be positive")


def _lemma_inner(n, H, theta, t, upper):
    # int_0^upper s^n e^{-theta s} (s+t)^{2H-2} ds, truncated where e^{-theta s} s^n is negligible;
    # v = (s+t)^{2H-1} absorbs the near-singular factor when t is small
    cut = (n + 60 + 10 * math.sqrt(n)) / theta
    b = min(upper, cut)
    if b <= 0:
        return 0.0
    e = 1.0 / (2 * H - 1)
    v0, v1 = t ** (2 * H - 1), (b + t) ** (2 * H - 1)

    def f(v):
        s = max(v ** e - t, 0.0)
        return s ** n * math.exp(-theta * s)

    pts = [(x + t) ** (2 * H - 1) for x in (n / theta, 1.0 / theta) if 0 < x < b]
    val, _ = integrate.quad(f, v0, v1, points=pts or None, epsabs=0.0, epsrel=1e-10, limit=400)
    return val * e


def _lemma_outer(n, H, theta, T, bounded: bool):
    # t = u^{1/(2H-1)} turns t^{2H-2} dt into du / (2H-1)
    e = 1.0 / (2 * H - 1)
    U = T ** (2 * H - 1)

    def g(u):
        t = u ** e
        upper = T - t if bounded else T
        return _lemma_inner(n, H, theta, t, upper)

    edges = [0.0]
    x = min(1e-3, U / 2)
    while x < U:
        edges.append(x)
        x *= 4.0
    edges.append(U)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, _ = integrate.quad(g, a, b, epsabs=0.0, epsrel=1e-9, limit=200)
        total += v
    return T ** (3 - 4 * H) * total * e


def lemma_at_pair(n: int, H: float, theta: float, T: float) -> tuple[float, float]:
    """(A_{1,H}(T), A_{2,H}(T)); the bounded-domain integral never exceeds the full one."""
    _check_lemma_args(n, H, theta, T)
    a1 = _lemma_outer(n, H, theta, T, bounded=True)
    a2 = _lemma_outer(n, H, theta, T, bounded=False)
    if a1 > a2 * (1 + 1e-9):
        raise AssertionError(f"quadrature ordering violated: A1={a1!r} > A2={a2!r}")
    return a1, a2


def lemma_at_quadrature(n: int, H: float, theta: float, T: float, which: str = "A1") -> float:
    key = which.upper()
    if key not in ("A1", "A2"):
        raise DomainError(f"which must be 'A1' or 'A2', got {which!r}")
    _check_lemma_args(n, H, theta, T)
    return _lemma_outer(n, H, theta, T, bounded=key == "A1")


def lemma_at_limit(n: int, H: float, theta: float) -> float:
    """Limit of A_{i,H}(T) for H > 3/4, or of A_{i,H}(T)/log T at H = 3/4."""
    _check_lemma_args(n, H, theta, 1.0)
    base = math.gamma(n + 1) * theta ** (-(n + 1))
    return base if H == 0.75 else base / (4 * H - 3)


@dataclass(frozen=True)
class AsymptoticConstants:
    H: float
    k: int
    p: float
    theta: float
    sigma: float
    c_kp: float
    rho0: float
    v1_sq: float | None
    nu_sq_normalized: float | None
    nu_sq: float | None  # nu^2 for horizon T = 1
    sigma_H_sq: float | None
    lse_variance: dict
    ete_variance: dict
    mle_variance: dict
    truncation: dict
    notes: list

    def to_dict(self):
        return asdict(self)


def asymptotic_constants(H: float, k: int, p: float, theta: float = 1.0,
                         sigma: float = 1.0) -> AsymptoticConstants:
    notes = []
    rho0 = rho_k(H, k, 0)
    ckp = c_kp(H, k, p)
    try:
        nu = converged_nu_squared(H, k, p)
        v1 = v1_squared(H, k, p, nu.M, nu.J)
        v1_sq, nu_norm = v1.value, nu.value
        # v1^2 / c_kp^2 must reproduce the normalized nu^2
        if not math.isclose(v1_sq / ckp ** 2, nu_norm, rel_tol=1e-10):
            raise AssertionError("v1^2 / c_kp^2 disagrees with normalized nu^2")
        truncation = {"M_max": nu.M, "J_max": nu.J, "tail_bound": nu.tail_bound}
        nu_sq = nu_norm * abs(sigma) ** (2 * p)
    except DivergenceError as exc:
        v1_sq = nu_norm = nu_sq = None
        truncation = {"M_max": None, "J_max": None, "tail_bound": None}
        notes.append(f"no CLT for the power variation: {exc}")
    sH = sigma_H_squared(H) if H < 0.75 else None
    return AsymptoticConstants(
        H=H, k=k, p=p, theta=theta, sigma=sigma, c_kp=ckp, rho0=rho0,
        v1_sq=v1_sq, nu_sq_normalized=nu_norm, nu_sq=nu_sq, sigma_H_sq=sH,
        lse_variance=drift_clt_variance("LSE", H, theta).to_dict(),
        ete_variance=drift_clt_variance("ETE", H, theta).to_dict(),
        mle_variance=drift_clt_variance("MLE", H, theta).to_dict(),
        truncation=truncation, notes=notes)
