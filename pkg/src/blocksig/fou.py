"""Stationary fractional Ornstein-Uhlenbeck covariance model.

Two independent routes to the autocovariance R(tau) are provided:

* ``autocovariance`` integrates the spectral density
  ``f(l) = l^(1-2H) / (theta^2 + l^2)`` against ``cos(l tau)``. The range is
  split at ``max(theta, pi/tau)``; the head is done by QUADPACK's algebraic
  weight rule (the ``l^(1-2H)`` endpoint singularity is absorbed exactly),
  the tail by QUADPACK's Fourier-integral rule, which integrates cycle by
  cycle and extrapolates the partial sums.

* ``autocov_closed`` evaluates the time-domain identity

      R(t) = s^2 / (4 theta^2H) * int e^{-|u|} (|x+u|^{2H} - |x|^{2H}) du,  x = theta t,

  written through a Tricomi U function and a confluent hypergeometric
  function. It is vectorized and is what covariance tables use. Tests pin
  the two routes against each other.

Coordinates are 0-based here (words use letters 1..d).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate, special


class QuadratureError(ArithmeticError):
    """Raised when an oscillatory quadrature fails to reach its tolerance."""


@dataclass(frozen=True)
class FouParams:
    """Law of a d-dimensional stationary fOU with independent coordinates.

    ``theta`` and ``sigma`` may be scalars (shared by every coordinate) or
    length-d sequences. The mean is fixed at zero.
    """

    H: float
    theta: tuple = (1.0,)
    sigma: tuple = (1.0,)
    d: int = 2
    delta: float = 0.1

    def __post_init__(self):
        if not 0.25 < self.H < 1.0:
            raise ValueError(f"H must lie in (1/4, 1), got {self.H}")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        for name in ("theta", "sigma"):
            raw = getattr(self, name)
            vals = tuple(float(v) for v in np.atleast_1d(raw))
            if len(vals) == 1:
                vals = vals * self.d
            if len(vals) != self.d:
                raise ValueError(f"{name} needs 1 or d={self.d} entries, got {len(vals)}")
            if any(not v > 0 for v in vals):
                raise ValueError(f"{name} entries must be positive")
            object.__setattr__(self, name, vals)

    @property
    def is_ou(self) -> bool:
        return self.H == 0.5

    def coord(self, i: int) -> tuple[float, float]:
        return self.theta[i], self.sigma[i]


def stationary_variance(p: FouParams, i: int) -> float:
    theta, sigma = p.coord(i)
    return sigma**2 * math.gamma(2 * p.H + 1) / (2 * theta ** (2 * p.H))


def spectral_normalization(p: FouParams, i: int) -> float:
    """zeta = sigma^2 Gamma(2H+1) sin(pi H) / (2 pi)."""
    _, sigma = p.coord(i)
    return sigma**2 * math.gamma(2 * p.H + 1) * math.sin(math.pi * p.H) / (2 * math.pi)


def spectral_density(p: FouParams, i: int, lam):
    theta, _ = p.coord(i)
    lam = np.asarray(lam, dtype=np.float64)
    return lam ** (1 - 2 * p.H) / (theta**2 + lam**2)


def _fourier_integral(p: FouParams, i: int, tau: float, kind: str, tol: float) -> float:
    """int_0^inf trig(l tau) l^power / (theta^2 + l^2) dl, with absolute tol."""
    theta, _ = p.coord(i)
    H = p.H
    power = 1 - 2 * H if kind == "cos" else 2 - 2 * H
    split = max(theta, math.pi / tau)
    trig = math.cos if kind == "cos" else math.sin

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        head, head_err, info_h = integrate.quad(
            lambda lam: trig(lam * tau) / (theta**2 + lam**2),
            0.0, split, weight="alg", wvar=(power, 0.0),
            epsabs=tol / 4, epsrel=1e-13, limit=500, full_output=1,
        )[:3]
        tail_out = integrate.quad(
            lambda lam: lam**power / (theta**2 + lam**2),
            split, np.inf, weight=kind, wvar=tau,
            epsabs=tol / 4, limlst=200, limit=500, full_output=1,
        )
    tail, tail_err = tail_out[0], tail_out[1]
    err = head_err + tail_err
    if not np.isfinite(head + tail) or err > tol:
        raise QuadratureError(
            f"{kind}-transform at tau={tau!r} (H={H}, theta={theta}) did not converge: "
            f"head={head!r}±{head_err:.2e}, tail={tail!r}±{tail_err:.2e}, tol={tol:.2e}"
        )
    return head + tail


def autocovariance(p: FouParams, i: int, tau: float, *, method: str = "spectral",
                   rel_tol: float = 1e-10, force_spectral: bool = False) -> float:
    """R_i(tau) = Cov(X^i_t, X^i_{t+tau}).

    ``rel_tol`` is an absolute tolerance in units of R(0). At H = 1/2 the OU
    closed form is used unless ``force_spectral`` is set.
    """
    tau = abs(float(tau))
    theta, sigma = p.coord(i)
    if p.is_ou and not force_spectral:
        return sigma**2 / (2 * theta) * math.exp(-theta * tau)
    if tau == 0.0:
        return stationary_variance(p, i)
    if method == "closed":
        return float(autocov_closed(p.H, theta, sigma, tau))
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    zeta = spectral_normalization(p, i)
    tol = rel_tol * stationary_variance(p, i) / (2 * zeta)
    return 2 * zeta * _fourier_integral(p, i, tau, "cos", tol)


def autocov_derivative(p: FouParams, i: int, tau: float, *, method: str = "spectral",
                       rel_tol: float = 1e-10, force_spectral: bool = False) -> float:
    """R_i'(tau) for tau > 0 (at tau = 0 only defined when H > 1/2, where it is 0)."""
    tau = float(tau)
    theta, sigma = p.coord(i)
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if tau == 0.0:
        if p.H > 0.5:
            return 0.0
        raise ValueError(f"R'(0) is not defined for H={p.H} <= 1/2")
    if p.is_ou and not force_spectral:
        return -(sigma**2) / 2 * math.exp(-theta * tau)
    if method == "closed":
        return float(autocov_derivative_closed(p.H, theta, sigma, tau))
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    zeta = spectral_normalization(p, i)
    # scale: |R'| ~ R(0)/tau near the origin, R(0)*theta further out
    scale = stationary_variance(p, i) * max(theta, 1.0 / tau) * min(1.0, (theta * tau) ** (2 * p.H - 1))
    tol = rel_tol * scale / (2 * zeta)
    return -2 * zeta * _fourier_integral(p, i, tau, "sin", tol)


# ---------------------------------------------------------------------------
# closed-form kernel (vectorized)
# ---------------------------------------------------------------------------

def _upper_part(H: float, x: np.ndarray) -> np.ndarray:
    # e^x Gamma(2H+1, x) = U(-2H, -2H, x)
    return special.hyperu(-2 * H, -2 * H, x)


def _lower_part(H: float, x: np.ndarray) -> np.ndarray:
    # e^-x int_0^x e^u u^2H du = x^a/a 1F1(1; a+1; -x), a = 2H+1
    a = 2 * H + 1
    return x**a / a * special.hyp1f1(1.0, a + 1.0, -x)


def autocov_closed(H: float, theta: float, sigma: float, tau) -> np.ndarray:
    tau = np.abs(np.asarray(tau, dtype=np.float64))
    x = theta * tau
    if H == 0.5:
        return sigma**2 / (2 * theta) * np.exp(-x)
    g = math.gamma(2 * H + 1)
    bracket = _upper_part(H, x) + _lower_part(H, x) - 2 * x ** (2 * H) + g * np.exp(-x)
    return sigma**2 / (4 * theta ** (2 * H)) * bracket


def autocov_derivative_closed(H: float, theta: float, sigma: float, tau) -> np.ndarray:
    """R'(tau) for tau > 0; at tau = 0 returns the one-sided limit (inf for H < 1/2)."""
    tau = np.asarray(tau, dtype=np.float64)
    x = theta * tau
    if H == 0.5:
        return -(sigma**2) / 2 * np.exp(-x)
    g = math.gamma(2 * H + 1)
    with np.errstate(divide="ignore"):
        bracket = (_upper_part(H, x) - _lower_part(H, x)
                   - 4 * H * x ** (2 * H - 1) - g * np.exp(-x))
    return sigma**2 * theta ** (1 - 2 * H) / 4 * bracket


def derivative_at_zero(p: FouParams, i: int) -> float:
    """One-sided limit R'(0+): 0 for H > 1/2, -sigma^2/2 for H = 1/2."""
    if p.H > 0.5:
        return 0.0
    if p.is_ou:
        return -(p.sigma[i] ** 2) / 2
    return -math.inf


# ---------------------------------------------------------------------------
# grid tables and increments
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CovarianceTable:
    """R_i(k h) for k = 0..L and every coordinate i (rows)."""

    h: float
    values: np.ndarray = field(repr=False)
    tolerance: float = 1e-12

    @property
    def n_lags(self) -> int:
        return self.values.shape[1]

    def increment_cov(self, i: int) -> np.ndarray:
        """Lag-k covariance of consecutive increments, k = 0..L-1."""
        r = self.values[i]
        out = np.empty(len(r) - 1)
        out[0] = 2 * (r[0] - r[1])
        out[1:] = 2 * r[1:-1] - r[:-2] - r[2:]
        return out

    def to_csv(self) -> str:
        d = self.values.shape[0]
        lines = ["lag,tau," + ",".join(f"R{i + 1}" for i in range(d))]
        for k in range(self.n_lags):
            vals = ",".join(repr(float(v)) for v in self.values[:, k])
            lines.append(f"{k},{repr(k * self.h)},{vals}")
        return "\n".join(lines) + "\n"


def covariance_table(p: FouParams, h: float, n_lags: int) -> CovarianceTable:
    """Tabulate R at lags 0..n_lags-1 on spacing h (closed-form route)."""
    k = np.arange(n_lags, dtype=np.float64)
    rows = []
    cache = {}
    for i in range(p.d):
        key = p.coord(i)
        if key not in cache:
            cache[key] = autocov_closed(p.H, key[0], key[1], k * h)
        rows.append(cache[key])
    values = np.vstack(rows)
    values.setflags(write=False)
    return CovarianceTable(h=h, values=values)


def increment_covariance(p: FouParams, i: int, h: float, lag: int, *,
                         method: str = "closed") -> float:
    """Cov(X_{(a+1)h} - X_{ah}, X_{(b+1)h} - X_{bh}) with lag = |b - a|."""
    if h <= 0:
        raise ValueError("h must be positive")
    lag = abs(int(lag))

    def R(t):
        return autocovariance(p, i, t, method=method)

    if lag == 0:
        return 2 * (R(0.0) - R(h))
    return 2 * R(lag * h) - R((lag - 1) * h) - R((lag + 1) * h)


def increment_variance_parameter(p: FouParams, i: int) -> float:
    """v_i = R_i(0) - R_i(Delta)."""
    theta, sigma = p.coord(i)
    return float(autocov_closed(p.H, theta, sigma, 0.0) - autocov_closed(p.H, theta, sigma, p.delta))


# ---------------------------------------------------------------------------
# rate exponents
# ---------------------------------------------------------------------------

class Exponents(NamedTuple):
    gamma: float
    eta: float
    nu: float
    combined: float


def theory_exponents(H: float, gamma: float | None = None, eta: float | None = None) -> Exponents:
    """Heuristic bias/variance rate exponents for fOU at Hurst index H.

    gamma = min(4H-1, 2H) with epsilon-losses dropped; nu = 2-2H off the OU
    point (inf at H = 1/2, where mixing is exponential); eta = 1 when the
    covariance decay is summable, else nu. ``gamma``/``eta`` overrides let
    callers plug in other regimes.
    """
    if not 0.25 < H < 1.0:
        raise ValueError(f"H must lie in (1/4, 1), got {H}")
    nu = math.inf if H == 0.5 else 2 - 2 * H
    g = min(4 * H - 1, 2 * H) if gamma is None else float(gamma)
    e = (1.0 if (H == 0.5 or nu > 1) else nu) if eta is None else float(eta)
    return Exponents(g, e, nu, g * e / (g + e))


def optimal_allocation(N: int, gamma: float, eta: float) -> tuple[int, int]:
    """Budget split n* = ceil(N^(eta/(gamma+eta))), K* = floor(N/n*)."""
    if N < 4:
        raise ValueError("budget N must be >= 4")
    if gamma <= 0 or eta <= 0:
        raise ValueError("exponents must be positive")
    n_star = max(2, int(math.ceil(N ** (eta / (gamma + eta)) - 1e-12)))
    k_star = max(1, int(N // n_star))
    return n_star, k_star

