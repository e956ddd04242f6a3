"""Heat-kernel family on H^d and the special functions around it.

The heat kernels are for Brownian motion (generator Delta/2) in curvature
-1.  Up to t-dependent constants they are given by the h-forms

    h^d_t(rho) = D^{(d-1)/2} exp(-rho^2 / 2t)                      (d odd)
    h^d_t(rho) = int_rho^inf sinh s (cosh s - cosh rho)^{-1/2}
                 D^{d/2} exp(-s^2 / 2t) ds                          (d even)

with ``D = -(1/sinh rho) d/drho``.  Both satisfy ``h^{d+2} = D h^d`` exactly,
so ``-d/drho log p^d = sinh(rho) h^{d+2} / h^d`` with no constants.

Everything is evaluated in log space so that rho in the hundreds does not
underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import mpmath
import numpy as np
from numpy.polynomial import polynomial as P
from scipy.special import gammaln

from .errors import NumericalFailure

__all__ = [
    "kcal",
    "log_h",
    "h_odd",
    "h_even",
    "grad_log_heat",
    "heat_kernel",
    "log_heat_kernel",
    "EnvelopeParams",
    "dm_envelope",
    "log_dm_envelope",
    "fit_envelope",
    "hyp2f1",
    "JacobiQuery",
    "laplace_fpt",
    "sqbessel_density",
]

_SERIES_TERMS = 48
_RHO_SWITCH = 1.0  # below: power series in rho^2, above: closed-form terms


def kcal(a, c=1.0):
    """Concentration rate ``(2/c) log cosh(c sqrt(a))``."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0) or c <= 0:
        raise ValueError("need a >= 0 and c > 0")
    x = c * np.sqrt(a)
    return 2.0 / c * _log_cosh(x)


def _log_cosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2.0 * x)) - math.log(2.0)


def _log_sinh(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        small = np.log(np.sinh(np.minimum(x, 20.0)))
    big = x - math.log(2.0) + np.log1p(-np.exp(-2.0 * np.maximum(x, 20.0)))
    return np.where(x < 20.0, small, big)


# ------------------------------------------------------- D^n exp(-rho^2/2t)
#
# Small rho: with x = rho^2, D = -2 S(x) d/dx where S = rho/sinh(rho) is a
# power series in x.  Writing D^n E = E P_n(x) gives
#     P_{n+1} = -2 S (P_n' - P_n / 2t).
# Large rho: D^n E = E * sum c_{jmk} rho^j cosh^m(rho) sinh^{-k}(rho), m in {0,1}.


@lru_cache(maxsize=None)
def _inv_sinhc_series(N):
    f = np.array([1.0 / math.factorial(2 * k + 1) for k in range(N)])
    # reciprocal power series
    g = np.zeros(N)
    g[0] = 1.0
    for k in range(1, N):
        g[k] = -np.dot(f[1 : k + 1], g[k - 1 :: -1][:k])
    return g


@lru_cache(maxsize=None)
def _small_series(n, t):
    N = _SERIES_TERMS
    S = _inv_sinhc_series(N)
    p = np.zeros(N)
    p[0] = 1.0
    for _ in range(n):
        dp = np.zeros(N)
        dp[: N - 1] = P.polyder(p)[: N - 1]
        p = (-2.0 * P.polymul(S, dp - p / (2.0 * t)))[:N]
    return p


@lru_cache(maxsize=None)
def _terms(n, t):
    terms = {(0, 0, 0): 1.0}
    for _ in range(n):
        new: dict = {}

        def add(key, v):
            new[key] = new.get(key, 0.0) + v

        for (j, m, k), c in terms.items():
            # d/drho of rho^j cosh^m sinh^-k exp(-rho^2/2t), then times -1/sinh
            if j:
                add((j - 1, m, k + 1), -c * j)
            if m:
                add((j, 0, k), -c)
            if k:
                if m == 0:
                    add((j, 1, k + 2), c * k)
                else:
                    add((j, 0, k + 2), c * k)
                    add((j, 0, k), c * k)
            add((j + 1, m, k + 1), c / t)
        terms = {key: v for key, v in new.items() if v != 0.0}
    return tuple(sorted(terms.items()))


def _log_q(n, t, rho):
    """``log`` and sign of ``D^n E / E`` at ``rho`` (array)."""
    rho = np.asarray(rho, dtype=float)
    logq = np.empty_like(rho)
    sign = np.ones_like(rho)
    small = rho < _RHO_SWITCH
    if np.any(small):
        x = rho[small] ** 2
        v = P.polyval(x, _small_series(n, float(t)))
        logq[small] = np.log(np.abs(v))
        sign[small] = np.sign(v)
    big = ~small
    if np.any(big):
        r = rho[big]
        lr, lc, ls = np.log(r), _log_cosh(r), _log_sinh(r)
        items = _terms(n, float(t))
        parts = np.array([math.log(abs(c)) + j * lr + m * lc - k * ls for (j, m, k), c in items])
        sg = np.array([math.copysign(1.0, c) for _, c in items])[:, None]
        top = parts.max(axis=0)
        s = np.sum(sg * np.exp(parts - top), axis=0)
        logq[big] = top + np.log(np.abs(s))
        sign[big] = np.sign(s)
    return logq, sign


# ----------------------------------------------------------------- h-forms


def _check(d, t, rho):
    if int(d) != d or d < 1:
        raise ValueError("dimension must be a positive integer")
    if np.any(np.asarray(t) <= 0):
        raise ValueError("t must be positive")
    if np.any(np.asarray(rho) < 0):
        raise ValueError("rho must be nonnegative")


def _log_h_odd(d, t, rho):
    logq, sign = _log_q((d - 1) // 2, t, rho)
    if np.any(sign <= 0):
        raise NumericalFailure("odd h-form lost its sign")
    return logq - np.asarray(rho) ** 2 / (2.0 * t)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_TAIL_CUT = 40.0


def _log_h_even(d, t, rho, tol=1e-11):
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    n = d // 2
    # integrate in u with s = rho + u^2; the inverse square-root singularity is gone
    dmax = -rho + np.sqrt(rho * rho + 2.0 * _TAIL_CUT * t)
    umax = np.sqrt(dmax)
    prev = None
    for panels in (8, 16, 32, 64):
        edges = np.linspace(0.0, 1.0, panels + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1] - edges[0])
        nodes = (mid[:, None] + half * _GL_NODES[None, :]).ravel()
        wts = np.tile(half * _GL_WEIGHTS, panels)
        u = umax[:, None] * nodes[None, :]
        delta = u * u
        s = rho[:, None] + delta
        logq, sign = _log_q(n, t, s)
        y = 0.5 * delta
        lj = (
            math.log(2.0)
            + 0.5 * np.where(y > 0, np.log(np.maximum(y, 1e-300)) - _log_sinh(np.maximum(y, 1e-300)), 0.0)
            + _log_sinh(s)
            - 0.5 * _log_sinh(rho[:, None] + y)
            - (2.0 * rho[:, None] * delta + delta * delta) / (2.0 * t)
            + logq
        )
        top = lj.max(axis=1, keepdims=True)
        integral = np.sum(sign * np.exp(lj - top) * wts[None, :], axis=1)
        if np.any(integral <= 0):
            raise NumericalFailure("even h-form quadrature is not positive")
        val = top[:, 0] + np.log(integral * umax)
        if prev is not None and np.max(np.abs(val - prev)) < tol:
            return val - rho * rho / (2.0 * t)
        prev = val
    raise NumericalFailure("even h-form quadrature did not converge")


def log_h(d: int, t, rho):
    """``log h^d_t(rho)`` for any dimension ``d >= 1`` (broadcasts over rho)."""
    _check(d, t, rho)
    t = float(t)
    rho_a = np.asarray(rho, dtype=float)
    if d % 2:
        out = _log_h_odd(d, t, rho_a.ravel())
    else:
        out = _log_h_even(d, t, rho_a.ravel())
    return out.reshape(rho_a.shape) if rho_a.ndim else float(out[0])


def h_odd(d: int, t, rho):
    if d % 2 == 0:
        raise ValueError("h_odd needs an odd dimension")
    return np.exp(log_h(d, t, rho))


def h_even(d: int, t, rho):
    if d % 2:
        raise ValueError("h_even needs an even dimension")
    return np.exp(log_h(d, t, rho))


def grad_log_heat(d: int, c: float, t, rho):
    """Radial log-derivative of the heat kernel, positive toward the pole.

    Equals ``sinh(rho) h^{d+2}_t(rho) / h^d_t(rho)`` in curvature -1 and uses
    ``p^{d,c}_t(rho) = p^{d,1}_{c^2 t}(c rho)`` otherwise.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    rho = np.asarray(rho, dtype=float)
    tt, rr = c * c * float(t), c * rho
    _check(d, tt, rr)
    pos = rr > 0
    out = np.zeros_like(rr)
    if np.any(pos):
        r = rr[pos] if rr.ndim else rr
        out_pos = np.exp(_log_sinh(r) + log_h(d + 2, tt, r) - log_h(d, tt, r))
        if rr.ndim:
            out[pos] = out_pos
        else:
            out = np.asarray(out_pos)
    out = c * out
    return out if out.ndim else float(out)


def log_heat_kernel(d: int, t, rho):
    """Log of the normalized heat kernel on H^d, curvature -1, d in {2, 3}."""
    rho = np.asarray(rho, dtype=float)
    if d == 3:
        with np.errstate(invalid="ignore"):
            lr = np.where(rho > 0, np.log(np.where(rho > 0, rho, 1.0)) - _log_sinh(np.where(rho > 0, rho, 1.0)), 0.0)
        return -1.5 * math.log(2 * math.pi * t) + lr - t / 2 - rho**2 / (2 * t)
    if d == 2:
        return 0.5 * math.log(2.0) - t / 8 + math.log(t) - 1.5 * math.log(2 * math.pi * t) + log_h(2, t, rho)
    raise ValueError("normalized kernel available for d in {2, 3}")


def heat_kernel(d: int, t, rho):
    """Normalized heat kernel of Brownian motion on H^d, curvature -1, d in {2, 3}."""
    return np.exp(log_heat_kernel(d, t, rho))


# ----------------------------------------------------------------- envelopes


@dataclass(frozen=True)
class EnvelopeParams:
    K: float
    k1: float
    k2: float
    d: int

    def __post_init__(self):
        if not self.K > 1 and not self.K == 1:
            raise ValueError("K must be >= 1")
        if not (self.k2 >= self.k1 > 0):
            raise ValueError("need k2 >= k1 > 0")

    @property
    def nu_exp(self) -> float:
        return (self.d - 1) / 2


def log_dm_envelope(side: Literal["lower", "upper"], params: EnvelopeParams, t, rho):
    """``-+log K - (d/2) log t + nu log(1+rho) - k rho - rho^2/2t``."""
    rho = np.asarray(rho, dtype=float)
    if side == "upper":
        lk, k = math.log(params.K), params.k1
    elif side == "lower":
        lk, k = -math.log(params.K), params.k2
    else:
        raise ValueError(f"unknown side {side!r}")
    return lk - (params.d / 2) * math.log(t) + params.nu_exp * np.log1p(rho) - (k * rho + rho**2 / (2 * t))


def dm_envelope(side: Literal["lower", "upper"], params: EnvelopeParams, t, rho):
    """``K^{-+1} t^{-d/2} (1+rho)^nu exp(-(k rho + rho^2/2t))``."""
    return np.exp(log_dm_envelope(side, params, t, rho))


def fit_envelope(d: int, ts, rhos, margin: float = 1e-9) -> EnvelopeParams:
    """Fit ``(K, k1, k2)`` so the envelopes sandwich the exact kernel on a grid.

    The decay rate ``k1 = k2`` is the least-squares slope of the log residual
    against rho (pooled over ``ts``); ``log K`` is the largest remaining
    deviation, so both sides hold on the grid.
    """
    rhos = np.asarray(rhos, dtype=float)
    nu = (d - 1) / 2
    res = []
    for t in ts:
        lp = log_heat_kernel(d, t, rhos)
        res.append(lp + (d / 2) * math.log(t) + rhos**2 / (2 * t) - nu * np.log1p(rhos))
    res = np.array(res)
    slope = -np.polyfit(np.tile(rhos, len(ts)), res.ravel(), 1)[0]
    r = res + slope * rhos
    logK = max(r.max(), -r.min()) + margin
    return EnvelopeParams(K=math.exp(logK), k1=slope, k2=slope, d=d)


# ------------------------------------------------------------------ 2F1


def hyp2f1(a: float, b: float, c: float, z: float, max_terms: int = 200_000) -> float:
    """Gauss hypergeometric function for ``|z| < 1`` (real arguments).

    Term-ratio recursion with the running term kept in log form and exact
    ``math.fsum`` summation.  Negative ``z`` below -1/2 goes through the Pfaff
    transformation.  When cancellation among terms costs more than five digits
    the value is recomputed at extended precision.
    """
    if c <= 0 and float(c).is_integer():
        raise ValueError("c must not be a nonpositive integer")
    if not -1.0 < z < 1.0:
        raise ValueError("|z| < 1 required")
    if z < -0.5:
        w = z / (z - 1.0)
        return (1.0 - z) ** (-a) * hyp2f1(a, c - b, c, w, max_terms)
    if z == 0.0:
        return 1.0
    logt, sign = 0.0, 1.0
    logs, signs = [0.0], [1.0]
    lz, sz = math.log(abs(z)), math.copysign(1.0, z)
    for n in range(max_terms):
        num = (a + n) * (b + n)
        if num == 0.0:
            break
        ratio = num / ((c + n) * (n + 1))
        logt += math.log(abs(ratio)) + lz
        sign *= math.copysign(1.0, ratio) * sz
        if logt > 690.0:
            raise NumericalFailure("2F1 series terms exceed the overflow budget")
        logs.append(logt)
        signs.append(sign)
        if n > abs(a) + abs(b) + 2 and logt < math.log(1e-18) + max(logs):
            break
    else:
        raise NumericalFailure("2F1 series did not converge")
    top = max(logs)
    scaled = [s * math.exp(l - top) for s, l in zip(signs, logs)]
    total = math.fsum(scaled)
    mag = math.fsum(abs(x) for x in scaled)
    if total == 0.0 or mag / abs(total) > 1e5:
        digits = 30 + int(math.log10(mag / abs(total))) if total else 60
        with mpmath.workdps(digits):
            return float(mpmath.hyp2f1(a, b, c, z))
    return total * math.exp(top)


@dataclass(frozen=True)
class JacobiQuery:
    """Start ``x`` and barrier ``a`` are squared levels (the diffusion runs from sqrt(x))."""

    nu: float
    q: float
    lam: float
    x: float
    a: float

    def __post_init__(self):
        if self.nu < 0 or self.q < 0 or self.lam <= 0:
            raise ValueError("need nu >= 0, q >= 0, lambda > 0")
        if not 0 < self.x < self.a:
            raise ValueError("need 0 < x < a")

    @property
    def mu(self) -> float:
        return math.sqrt((self.nu - self.q) ** 2 + 2 * self.lam)


def laplace_fpt(query: JacobiQuery) -> float:
    """``E[exp(-lambda T)]`` for ``dY = dB - nu tanh Y dt + q coth Y dt`` hitting sqrt(a)."""
    nu, q, mu = query.nu, query.q, query.mu
    A = (q - nu - mu) / 2
    B = (q + 1 + nu - mu) / 2
    C = q + 0.5
    rx, ra = math.sqrt(query.x), math.sqrt(query.a)
    fx = hyp2f1(A, B, C, math.tanh(rx) ** 2)
    fa = hyp2f1(A, B, C, math.tanh(ra) ** 2)
    expo = (nu + mu - q) * (float(_log_cosh(rx)) - float(_log_cosh(ra)))
    return math.exp(expo) * fx / fa


def sqbessel_density(k: float, x):
    """Density of a dimension-k squared Bessel process at time 1 started at 0."""
    if k <= 0:
        raise ValueError("k must be positive")
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logd = -math.log(2.0) - gammaln(k / 2) + (k / 2 - 1) * np.log(x / 2) - x / 2
        out = np.exp(logd)
    if k == 2:
        out = np.where(x == 0, 0.5, out)
    out = np.where(x < 0, 0.0, out)
    return out if out.ndim else float(out)
