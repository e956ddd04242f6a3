"""Square-root diffusions, their first passages and the Girsanov sampler.

The main process is

    dY = 2 sqrt(Y) dB - 2 nu sqrt(Y) (tanh(c sqrt(Y)) + alpha) dt + k dt,

the squared distance to a geodesic seen from far away.  Paths are simulated
by full-truncation Euler: drift and diffusion use ``Y+ = max(Y, 0)`` while
the internal state may dip below zero; stored values are clipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import map_blocks

__all__ = [
    "CirSpec",
    "PathSample",
    "HitRecord",
    "TimeChangeSpec",
    "ComparisonResult",
    "time_grid",
    "simulate_cir",
    "simulate_linear_drift",
    "first_passage",
    "first_passage_girsanov",
    "girsanov_log_weight_terms",
    "cir_via_timechange",
    "jacobi_first_passage",
    "comparison_check",
]


@dataclass(frozen=True)
class CirSpec:
    nu: float
    alpha: float = 0.0
    c: float = 1.0
    k: float = 1.0
    y0: float = 0.0

    def __post_init__(self):
        if self.c <= 0 or self.k <= 0 or self.y0 < 0:
            raise ValueError("need c > 0, k > 0 and y0 >= 0")

    def drift(self, yp):
        r = np.sqrt(yp)
        return -2.0 * self.nu * r * (np.tanh(self.c * r) + self.alpha) + self.k


@dataclass
class PathSample:
    """Discretized trajectories on a shared time grid.

    ``values`` has shape ``(n_paths, len(times))`` for scalar processes and
    ``(n_paths, len(times), d)`` for points of H^d.
    """

    times: np.ndarray
    values: np.ndarray
    seed: int
    scheme: str
    step: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise ValueError("times must start at 0 and increase")
        if self.values.shape[1] != self.times.shape[0]:
            raise ValueError("values do not match the time grid")

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def path(self, i: int) -> np.ndarray:
        return self.values[i]


@dataclass
class HitRecord:
    """Per-path first-passage outcome: hit flag, grid time (nan if none), weight."""

    hit: np.ndarray
    time: np.ndarray
    weight: np.ndarray
    log_weight: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.log_weight is None:
            with np.errstate(divide="ignore"):
                self.log_weight = np.log(self.weight)

    @property
    def n(self) -> int:
        return self.hit.shape[0]

    @staticmethod
    def concat(records: list["HitRecord"]) -> "HitRecord":
        return HitRecord(
            np.concatenate([r.hit for r in records]),
            np.concatenate([r.time for r in records]),
            np.concatenate([r.weight for r in records]),
            np.concatenate([r.log_weight for r in records]),
        )


def time_grid(T: float, h: float) -> np.ndarray:
    """Uniform grid on ``[0, T]`` with step at most ``h``."""
    if T <= 0 or h <= 0:
        raise ValueError("need T > 0 and h > 0")
    n = max(1, math.ceil(T / h - 1e-9))
    return np.linspace(0.0, T, n + 1)


def _euler(y, drift, dt, xi):
    yp = np.maximum(y, 0.0)
    return y + drift(yp) * dt + 2.0 * np.sqrt(yp * dt) * xi


def simulate_cir(spec: CirSpec, T: float, h: float, seed: int, n_paths: int = 1, threads=None) -> PathSample:
    times = time_grid(T, h)
    dts = np.diff(times)

    def block(rng, n):
        y = np.full(n, float(spec.y0))
        out = np.empty((n, times.size))
        out[:, 0] = y
        for i, dt in enumerate(dts):
            y = _euler(y, spec.drift, dt, rng.standard_normal(n))
            out[:, i + 1] = np.maximum(y, 0.0)
        return out

    vals = np.concatenate(map_blocks(block, n_paths, seed, threads))
    return PathSample(times, vals, seed, "full-truncation-euler", h)


def simulate_linear_drift(k: float, beta: float, T: float, h: float, seed: int, n_paths: int = 1, y0=0.0, threads=None):
    """Full-truncation Euler for ``dX = 2 sqrt(X) dB + (2 beta X + k) dt``."""
    times = time_grid(T, h)
    dts = np.diff(times)

    def drift(yp):
        return 2.0 * beta * yp + k

    def block(rng, n):
        y = np.full(n, float(y0))
        out = np.empty((n, times.size))
        out[:, 0] = y
        for i, dt in enumerate(dts):
            y = _euler(y, drift, dt, rng.standard_normal(n))
            out[:, i + 1] = np.maximum(y, 0.0)
        return out

    vals = np.concatenate(map_blocks(block, n_paths, seed, threads))
    return PathSample(times, vals, seed, "full-truncation-euler", h)


# ------------------------------------------------------------ first passage


def _hit_loop(rng, n, y0, a, times, drift, integrand=None):
    """Run paths until they reach ``a`` or the grid ends.

    Returns hit flags, grid hitting times, the state at the hitting time, the
    trapezoid integral of ``integrand`` up to it and the driving Brownian
    motion ``B`` at that time.
    """
    hit = np.zeros(n, dtype=bool)
    when = np.full(n, np.nan)
    final = np.full(n, np.nan)
    acc = np.zeros(n)
    bsum = np.zeros(n)
    if y0 >= a:
        hit[:] = True
        when[:] = 0.0
        final[:] = y0
        return hit, when, final, acc, bsum
    idx = np.arange(n)
    y = np.full(n, float(y0))
    f_prev = integrand(np.maximum(y, 0.0)) if integrand is not None else None
    run = np.zeros(n)
    bm = np.zeros(n)
    for i in range(times.size - 1):
        dt = times[i + 1] - times[i]
        xi = rng.standard_normal(idx.size)
        y = _euler(y, drift, dt, xi)
        if integrand is not None:
            f_new = integrand(np.maximum(y, 0.0))
            run += 0.5 * (f_prev + f_new) * dt
            f_prev = f_new
            bm += math.sqrt(dt) * xi
        crossed = y >= a
        if np.any(crossed):
            j = idx[crossed]
            hit[j] = True
            when[j] = times[i + 1]
            final[j] = y[crossed]
            if integrand is not None:
                acc[j] = run[crossed]
                bsum[j] = bm[crossed]
            keep = ~crossed
            idx, y = idx[keep], y[keep]
            if integrand is not None:
                run, bm, f_prev = run[keep], bm[keep], f_prev[keep]
            if idx.size == 0:
                break
    return hit, when, final, acc, bsum


def first_passage(spec: CirSpec, a: float, t: float, h: float, seed: int, n_paths: int = 1, threads=None) -> HitRecord:
    """Grid first passage of level ``a`` before ``t`` under the plain law."""
    times = time_grid(t, h)

    def block(rng, n):
        hit, when, _, _, _ = _hit_loop(rng, n, spec.y0, a, times, spec.drift)
        return HitRecord(hit, when, np.ones(n), np.zeros(n))

    return HitRecord.concat(map_blocks(block, n_paths, seed, threads))


def girsanov_log_weight_terms(spec: CirSpec):
    """``(ell, J)`` for the likelihood ratio of the target law against the
    proposal (``nu -> -(nu+1)``) on paths stopped at ``tau``:

        log L = -m [ell(Y_tau) - ell(y0)] + m int_0^tau J(Y_s) ds - m alpha B_tau,

    with ``m = 2 nu + 1``, ``r = sqrt(y)``, ``phi = tanh(c r) + alpha``,
    ``ell = log cosh(c r) / c`` and

        J = c sech^2(c r)/2 + phi^2/2 + (k-1) tanh(c r)/(2r) - alpha (nu+1) phi.

    ``B`` is the driving Brownian motion.  Writing the ``alpha`` part through
    ``B`` instead of ``alpha sqrt(Y)`` keeps the formula valid at ``k = 1``,
    where ``sqrt(Y)`` picks up local time at 0.  For ``alpha = 0``, ``c = 1``
    the integrand is ``(1 + (k-1) tanh(r)/r)/2``.
    """
    c, al, k, nu = spec.c, spec.alpha, spec.k, spec.nu

    def ell(y):
        x = c * np.sqrt(y)
        return (x + np.log1p(np.exp(-2 * x)) - math.log(2.0)) / c

    def integrand(y):
        r = np.sqrt(y)
        th = np.tanh(c * r)
        phi = th + al
        out = 0.5 * c * (1.0 - th * th) + 0.5 * phi * phi - al * (nu + 1.0) * phi
        if k != 1.0:
            safe = np.where(r > 0, r, 1.0)
            out = out + 0.5 * (k - 1.0) * np.where(r > 0, th / safe, c)
        return out

    return ell, integrand


def first_passage_girsanov(
    spec: CirSpec, a: float, t: float, h: float, seed: int, n_paths: int = 1, threads=None
) -> HitRecord:
    """Importance-sampled first passage: simulate with the drift reversed.

    Paths follow ``nu -> -(nu+1)``, where hitting ``a`` is likely, and each hit
    carries the change-of-measure weight of the stopped path.  The weight is
    evaluated at the grid hitting state, so the estimator targets the same
    grid event as :func:`first_passage`.
    """
    if spec.k < 1:
        raise ValueError("the Girsanov sampler requires k >= 1")
    if a <= spec.y0:
        return HitRecord(np.ones(n_paths, bool), np.zeros(n_paths), np.ones(n_paths), np.zeros(n_paths))
    prop = CirSpec(-(spec.nu + 1.0), spec.alpha, spec.c, spec.k, spec.y0)
    ell, integrand = girsanov_log_weight_terms(spec)
    m = 2.0 * spec.nu + 1.0
    times = time_grid(t, h)
    ell0 = float(ell(spec.y0))

    def block(rng, n):
        hit, when, final, acc, bsum = _hit_loop(rng, n, spec.y0, a, times, prop.drift, integrand)
        logw = -m * (ell(np.where(hit, final, a)) - ell0) + m * acc - m * spec.alpha * bsum
        logw = np.where(hit, logw, -np.inf)
        return HitRecord(hit, when, np.exp(logw), logw)

    return HitRecord.concat(map_blocks(block, n_paths, seed, threads))


# ------------------------------------------------------------- time change


@dataclass(frozen=True)
class TimeChangeSpec:
    a: float
    nu: float

    @property
    def c_a(self) -> float:
        r = math.sqrt(self.a)
        return math.tanh(r) / r if r > 0 else 1.0

    @property
    def c_nu(self) -> float:
        return (self.nu + 1.0) * self.c_a

    def psi(self, t):
        t = np.asarray(t, dtype=float)
        b = self.c_nu
        if b == 0.0:
            return t
        return -np.expm1(-2.0 * b * t) / (2.0 * b)

    @property
    def psi_inf(self) -> float:
        return 1.0 / (2.0 * self.c_nu) if self.c_nu > 0 else math.inf


def cir_via_timechange(k: float, a: float, nu: float, T: float, h: float, seed: int, n_paths: int = 1, threads=None):
    """``X_t = exp(2 c_nu t) X^k_{psi(t)}`` with ``X^k`` a squared Bessel process from 0.

    ``X^k`` is sampled exactly on the deformed grid through its noncentral
    chi-square transitions, so the only approximation is the grid itself.
    """
    tc = TimeChangeSpec(a, nu)
    times = time_grid(T, h)
    s = tc.psi(times)
    ds = np.diff(s)
    scale = np.exp(2.0 * tc.c_nu * times)

    def block(rng, n):
        x = np.zeros(n)
        out = np.empty((n, times.size))
        out[:, 0] = 0.0
        for i, d in enumerate(ds):
            x = d * rng.noncentral_chisquare(k, x / d)
            out[:, i + 1] = x
        return out * scale

    vals = np.concatenate(map_blocks(block, n_paths, seed, threads))
    return PathSample(times, vals, seed, "timechange-exact-sqbessel", h)


# ------------------------------------------------- Jacobi-type first passage


def jacobi_first_passage(
    nu: float,
    q: float,
    x: float,
    a: float,
    t_max: float,
    h: float,
    seed: int,
    n_paths: int = 1,
    crossing: str = "bridge",
    threads=None,
) -> HitRecord:
    """First passage of ``sqrt(a)`` by ``dY = dB - nu tanh Y dt + q coth Y dt`` from ``sqrt(x)``.

    With ``crossing="bridge"`` a step that ends below the barrier still counts
    as a hit with the Brownian-bridge crossing probability
    ``exp(-2 (b - Y_n)(b - Y_{n+1}) / h)``; ``"grid"`` only checks grid values.
    Reflection at 0 keeps the Euler state positive.
    """
    if crossing not in ("grid", "bridge"):
        raise ValueError(f"unknown crossing rule {crossing!r}")
    b = math.sqrt(a)
    times = time_grid(t_max, h)

    def block(rng, n):
        hit = np.zeros(n, dtype=bool)
        when = np.full(n, np.nan)
        idx = np.arange(n)
        y = np.full(n, math.sqrt(x))
        for i in range(times.size - 1):
            dt = times[i + 1] - times[i]
            xi = rng.standard_normal(idx.size)
            yn = np.abs(y + (q / np.tanh(y) - nu * np.tanh(y)) * dt + math.sqrt(dt) * xi)
            crossed = yn >= b
            if crossing == "bridge":
                u = rng.random(idx.size)
                gap = np.maximum(b - y, 0.0) * np.maximum(b - yn, 0.0)
                crossed |= u < np.exp(-2.0 * gap / dt)
            if np.any(crossed):
                j = idx[crossed]
                hit[j] = True
                when[j] = times[i + 1]
                keep = ~crossed
                idx, yn = idx[keep], yn[keep]
                if idx.size == 0:
                    break
            y = yn
        return HitRecord(hit, when, np.ones(n), np.zeros(n))

    return HitRecord.concat(map_blocks(block, n_paths, seed, threads))


# --------------------------------------------------------- pathwise ordering


@dataclass(frozen=True)
class ComparisonResult:
    nu_prime: float
    upper: np.ndarray
    lower: np.ndarray

    @property
    def holds(self) -> np.ndarray:
        return self.upper & self.lower


def comparison_check(
    nu: float, q: float, alpha0: float, T: float, h: float, seed: int, n_paths: int = 1, threads=None
) -> ComparisonResult:
    """Check ``X^{nu,0} <= X^{nu,q} <= X^{nu',0} + alpha0`` along shared-noise paths.

    ``X^{nu,q}`` solves ``dX = dB - nu tanh X dt + q/X dt`` and is stepped with
    the drift-implicit scheme ``X' = (b + sqrt(b^2 + 4 q dt)) / 2``, where
    ``b = X + sqrt(dt) xi - nu tanh(X) dt``.  The ``q = 0`` processes use the
    same ``b`` with Skorokhod reflection ``max(b, 0)``.  The update is monotone
    in ``b``, so the lower ordering holds exactly on the grid; the upper one is
    checked with a one-step slack ``2 sqrt(h)``.
    """
    if alpha0 <= 0:
        raise ValueError("alpha0 must be positive")
    nu_p = nu - q / (alpha0 * math.tanh(alpha0))
    if nu_p <= 0:
        raise ValueError(f"nu' = {nu_p:.4g} must be positive")
    times = time_grid(T, h)
    tol = 2.0 * math.sqrt(h)

    def block(rng, n):
        xq = np.zeros(n)
        xp = np.zeros(n)
        x0 = np.zeros(n)
        up = np.ones(n, dtype=bool)
        lo = np.ones(n, dtype=bool)
        for i in range(times.size - 1):
            dt = times[i + 1] - times[i]
            sq = math.sqrt(dt) * rng.standard_normal(n)
            b = xq - nu * np.tanh(xq) * dt + sq
            xq = 0.5 * (b + np.sqrt(b * b + 4.0 * q * dt))
            xp = np.maximum(xp - nu_p * np.tanh(xp) * dt + sq, 0.0)
            x0 = np.maximum(x0 - nu * np.tanh(x0) * dt + sq, 0.0)
            up &= xq <= xp + alpha0 + tol
            lo &= x0 <= xq + tol
        return up, lo

    res = map_blocks(block, n_paths, seed, threads)
    return ComparisonResult(nu_p, np.concatenate([r[0] for r in res]), np.concatenate([r[1] for r in res]))
