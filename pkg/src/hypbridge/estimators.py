"""Monte Carlo estimates with errors, rate regressions and distribution tests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .sde import CirSpec, first_passage, first_passage_girsanov, jacobi_first_passage

__all__ = [
    "EstimateCI",
    "RateFit",
    "KSResult",
    "TailFit",
    "hit_prob",
    "proportion",
    "mc_laplace",
    "rate_fit",
    "ks_two_sample",
    "subgaussian_tail_fit",
    "overlap",
]


@dataclass(frozen=True)
class EstimateCI:
    mean: float
    stderr: float
    n: int
    method: str = "naive"
    flagged: bool = False
    bias_bound: float = 0.0

    def __post_init__(self):
        if self.stderr < 0 or self.n < 1:
            raise ValueError("need stderr >= 0 and n >= 1")

    def ci(self, z: float = 1.96) -> tuple[float, float]:
        return self.mean - z * self.stderr, self.mean + z * self.stderr

    @classmethod
    def from_samples(cls, x, method="naive", bias_bound=0.0) -> "EstimateCI":
        x = np.asarray(x, dtype=float)
        se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
        return cls(float(x.mean()), se, int(x.size), method, False, bias_bound)


def overlap(a: EstimateCI, b: EstimateCI, z: float = 3.0) -> bool:
    """``|a - b| <= z * sqrt(se_a^2 + se_b^2)``."""
    return abs(a.mean - b.mean) <= z * math.hypot(a.stderr, b.stderr)


def proportion(hits, n: int | None = None, method: str = "naive") -> EstimateCI:
    """Fraction of true entries (or ``hits`` out of ``n``).

    The standard error uses ``(hits + 1/2) / (n + 1)`` in place of the raw
    fraction so it never collapses to zero when every or no path hits; a run
    without hits is flagged.
    """
    if n is None:
        arr = np.asarray(hits, dtype=bool).ravel()
        hits, n = int(arr.sum()), arr.size
    if n < 1 or not 0 <= hits <= n:
        raise ValueError("need 0 <= hits <= n and n >= 1")
    p_adj = (hits + 0.5) / (n + 1.0)
    se = math.sqrt(p_adj * (1.0 - p_adj) / n)
    return EstimateCI(hits / n, se, int(n), method, hits == 0)


def hit_prob(
    spec: CirSpec, a: float, t: float, n_paths: int, h: float, seed: int, method: str = "naive", threads=None
) -> EstimateCI:
    """``P[T_a < t]`` by plain simulation or by the reversed-drift Girsanov sampler.

    A naive run without hits returns mean 0 with the rule-of-three bound
    ``3/n`` as its error and ``flagged=True``.
    """
    if method == "naive":
        rec = first_passage(spec, a, t, h, seed, n_paths, threads)
        hits = int(rec.hit.sum())
        if hits == 0:
            return EstimateCI(0.0, 3.0 / n_paths, n_paths, "naive", True)
        return EstimateCI.from_samples(rec.hit.astype(float), "naive")
    if method == "girsanov":
        rec = first_passage_girsanov(spec, a, t, h, seed, n_paths, threads)
        return EstimateCI.from_samples(np.where(rec.hit, rec.weight, 0.0), "girsanov")
    raise ValueError(f"unknown method {method!r}")


def mc_laplace(
    nu: float,
    q: float,
    lam,
    x: float,
    a: float,
    n_paths: int,
    h: float,
    seed: int,
    t_max: float | None = None,
    crossing: str = "bridge",
    threads=None,
):
    """Monte Carlo ``E[exp(-lam T)]`` for the Jacobi-type diffusion; one simulation serves every ``lam``.

    Paths still running at ``t_max`` contribute 0, which biases the estimate
    down by at most ``exp(-lam t_max)``; that bound is reported.
    """
    if q < 0.5:
        raise ValueError("q >= 1/2 required (entrance boundary at 0)")
    lams = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(lams <= 0):
        raise ValueError("lambda must be positive")
    if t_max is None:
        t_max = 10.0 / float(lams.min())
    rec = jacobi_first_passage(nu, q, x, a, t_max, h, seed, n_paths, crossing, threads)
    times = np.where(rec.hit, rec.time, np.inf)
    out = [
        EstimateCI.from_samples(np.exp(-lm * times), "naive", bias_bound=math.exp(-lm * t_max)) for lm in lams
    ]
    return out if np.ndim(lam) else out[0]


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    r2: float
    points: tuple

    def __post_init__(self):
        if len(self.points) < 3:
            raise ValueError("a rate fit needs at least three points")

    def slope_ci(self, z: float = 1.96) -> tuple[float, float]:
        return self.slope - z * self.slope_stderr, self.slope + z * self.slope_stderr


def rate_fit(points: Sequence[tuple[float, EstimateCI]]) -> RateFit:
    """Weighted least squares of ``log(mean)`` on scale, weights ``(mean/stderr)^2``.

    The weights are inverse delta-method variances of ``log(mean)``, so the
    reported standard errors use them as known variances (no rescaling by the
    residuals).
    """
    if len(points) < 3:
        raise ValueError("need at least three scales")
    xs, ys, ws = [], [], []
    for scale, est in points:
        if not est.mean > 0 or est.flagged:
            raise ValueError(f"nonpositive or flagged estimate at scale {scale}")
        if not est.stderr > 0:
            raise ValueError(f"zero standard error at scale {scale}")
        xs.append(float(scale))
        ys.append(math.log(est.mean))
        ws.append((est.mean / est.stderr) ** 2)
    x, y, w = np.array(xs), np.array(ys), np.array(ws)
    X = np.column_stack([np.ones_like(x), x])
    A = X.T @ (w[:, None] * X)
    cov = np.linalg.inv(A)
    beta = cov @ (X.T @ (w * y))
    resid = y - X @ beta
    ybar = np.sum(w * y) / np.sum(w)
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - float(np.sum(w * resid**2)) / ss_tot if ss_tot > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    pts = tuple((float(a), float(b), float(c)) for a, b, c in zip(x, y, w))
    return RateFit(float(beta[1]), float(beta[0]), math.sqrt(cov[1, 1]), math.sqrt(cov[0, 0]), r2, pts)


@dataclass(frozen=True)
class KSResult:
    statistic: float
    n: int
    m: int
    critical_1pct: float

    @property
    def passed(self) -> bool:
        return self.statistic < self.critical_1pct


def ks_two_sample(A, B) -> KSResult:
    A = np.asarray(A, dtype=float).ravel()
    B = np.asarray(B, dtype=float).ravel()
    n, m = A.size, B.size
    if n < 100 or m < 100:
        raise ValueError("both samples need at least 100 points")
    stat = float(stats.ks_2samp(A, B).statistic)
    return KSResult(stat, n, m, 1.628 * math.sqrt((n + m) / (n * m)))


@dataclass(frozen=True)
class TailFit:
    c_hat: float
    K_hat: float
    r2: float
    residual: float
    slope: float


def subgaussian_tail_fit(sups, lo: float = 0.5, hi: float = 0.99, n_points: int = 50) -> TailFit:
    """Fit ``P[sup >= u] ~ K exp(-c u^2)`` over the empirical lo..hi quantile range."""
    x = np.sort(np.asarray(sups, dtype=float).ravel())
    if x.size < 100 or x[0] == x[-1]:
        raise ValueError("degenerate sample")
    us = np.quantile(x, np.linspace(lo, hi, n_points))
    surv = 1.0 - np.searchsorted(x, us, side="left") / x.size
    res = stats.linregress(us**2, np.log(surv))
    fitted = res.intercept + res.slope * us**2
    resid = float(np.sqrt(np.mean((np.log(surv) - fitted) ** 2)))
    return TailFit(-float(res.slope), math.exp(res.intercept), float(res.rvalue**2), resid, float(res.slope))
