"""Brownian motion and Brownian bridges on H^d by geodesic Euler steps.

A step from ``z`` is ``z <- exp_z(sqrt(h) F(z) xi + h V)`` with ``F(z) = c z_d I``
the orthonormal half-space frame.  For the bridge to ``y`` in time 1 the
drift is ``V = G(1 - t, rho(z, y)) * (unit vector toward y)`` with ``G`` the
radial log-derivative of the heat kernel.  Near ``t = 1`` the step shrinks to
``(1 - t)/20``; integration stops at ``1 - end_cut`` and the path is snapped
to ``y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import NumericalFailure
from .geometry import (
    GeodesicSpec,
    bidisk_dist_to_diag_many,
    dist_to_geodesic,
    distance,
    exp_map,
    inner,
    log_map,
    norm,
)
from .kernels import grad_log_heat, log_h
from .rng import map_blocks
from .sde import PathSample, time_grid

__all__ = [
    "BridgeSpec",
    "DriftTable",
    "bridge_times",
    "simulate_hyp_bm",
    "simulate_hyp_bridge",
    "observe_bridge",
    "bridge_sup_f",
    "bridge_sup_track",
    "SandwichResult",
    "sandwich_check",
    "simulate_bidisk_bridge",
    "bidisk_sup_dist",
]


@dataclass(frozen=True)
class BridgeSpec:
    """Bridge from ``x`` to ``y = exp_x(s v)`` in unit time; ``v`` has unit c-norm."""

    x: np.ndarray
    v: np.ndarray
    s: float
    c: float = 1.0
    step: float = 5e-4
    end_cut: float = 1e-3

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.v, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)
        if x.ndim != 1 or x.shape != v.shape or x[-1] <= 0:
            raise ValueError("x must be a point of H^d and v a tangent vector of the same size")
        if abs(float(norm(x, v, self.c)) - 1.0) > 1e-9:
            raise ValueError("v must have unit length")
        if self.s < 0 or self.c <= 0 or self.step <= 0:
            raise ValueError("need s >= 0, c > 0 and a positive step")
        if not 0 < self.end_cut < 1:
            raise ValueError("end_cut must lie in (0, 1)")

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    @property
    def y(self) -> np.ndarray:
        return exp_map(self.x, self.s * self.v, self.c)

    @classmethod
    def standard(cls, d: int, s: float, c: float = 1.0, **kw) -> "BridgeSpec":
        """From ``(0, ..., 0, 1)`` straight up the ``z_d``-axis."""
        x = np.zeros(d)
        x[-1] = 1.0
        v = np.zeros(d)
        v[-1] = c
        return cls(x, v, s, c, **kw)

    def geodesic(self, kind: str = "line") -> GeodesicSpec:
        """Line or segment through ``x`` and ``y``; for ``s = 0`` the line follows ``v``."""
        if self.s == 0:
            if kind == "segment":
                return GeodesicSpec(self.dim, "segment", 0.0, GeodesicSpec.through(self.x, exp_map(self.x, self.v, self.c)).iso)
            return GeodesicSpec.through(self.x, exp_map(self.x, self.v, self.c), "line")
        return GeodesicSpec.through(self.x, self.y, kind)

    def point_on_geodesic(self, u) -> np.ndarray:
        """Point at c-arclength ``u`` from ``x`` toward ``y``."""
        return exp_map(self.x, np.multiply.outer(np.asarray(u, dtype=float), self.v), self.c)


def bridge_times(step: float, end_cut: float) -> np.ndarray:
    """Time grid with ``h' = min(h, (1 - t)/20)``, ending exactly at ``1 - end_cut``."""
    stop = 1.0 - end_cut
    n_uni = max(0, math.floor((1.0 - 20.0 * step) / step + 1e-9))
    out = list(np.arange(n_uni + 1) * step)
    out = [t for t in out if t < stop - 1e-15]
    t = out[-1]
    while t < stop - 1e-15:
        t = min(t + min(step, (1.0 - t) / 20.0), stop)
        out.append(t)
    return np.array(out)


# --------------------------------------------------------------- drift table


class DriftTable:
    """Radial drift ``G_c(tau, rho)`` for ``tau`` in ``[tau_min, 1]``.

    For ``d = 3`` the closed form ``rho/tau + coth rho - 1/rho`` (curvature -1)
    is used.  Otherwise ``R = tau G / rho`` is tabulated on a log-tau by rho
    grid and interpolated with a bicubic spline; the spline is sliced once per
    time step and the slice is linearly interpolated on a fine rho mesh.
    Distances beyond the table are evaluated directly.
    """

    def __init__(self, d: int, c: float, tau_min: float, rho_max: float, n_tau: int = 48, d_rho: float = 0.05):
        if d < 2:
            raise ValueError("bridges need d >= 2")
        self.d, self.c = d, float(c)
        self.tau_min, self.rho_max = float(tau_min), float(rho_max)
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
        if d == 3:
            self.spline = None
            return
        c2 = self.c * self.c
        # c = 1 units: tau1 = c^2 tau, rho1 = c rho
        taus = np.geomspace(c2 * self.tau_min * 0.5, c2, n_tau)
        rmax1 = self.c * self.rho_max
        rhos = np.concatenate([[1e-3], np.arange(d_rho, rmax1 + d_rho, d_rho)])
        R = np.empty((taus.size, rhos.size))
        for i, tau in enumerate(taus):
            G = np.exp(np.log(np.sinh(rhos)) + log_h(d + 2, tau, rhos) - log_h(d, tau, rhos))
            R[i] = tau * G / rhos
        if not np.all(np.isfinite(R)):
            raise NumericalFailure("drift table has non-finite entries")
        self._taus, self._rhos = taus, rhos
        self.spline = RectBivariateSpline(np.log(taus), rhos, R, kx=3, ky=3)
        self._fine = np.linspace(rhos[0], rhos[-1], 4 * rhos.size)

    def _slice(self, tau1: float):
        hit = self._cache.get(tau1)
        if hit is None:
            lt = min(max(math.log(tau1), math.log(self._taus[0])), math.log(self._taus[-1]))
            vals = self.spline(lt, self._fine, grid=True)[0]
            hit = (self._fine, vals)
            if len(self._cache) < 8192:
                self._cache[tau1] = hit
        return hit

    def __call__(self, tau: float, rho) -> np.ndarray:
        """``G_c(tau, rho)`` for a common ``tau`` and an array of c-distances."""
        rho = np.asarray(rho, dtype=float)
        c = self.c
        tau1, rho1 = c * c * tau, c * rho
        if self.d == 3:
            with np.errstate(divide="ignore", invalid="ignore"):
                small = rho1 < 1e-4
                corr = np.where(small, rho1 / 3.0, 1.0 / np.tanh(np.where(small, 1.0, rho1)) - 1.0 / np.where(small, 1.0, rho1))
            return c * (rho1 / tau1 + corr)
        xs, ys = self._slice(tau1)
        R = np.interp(np.maximum(rho1, xs[0]), xs, ys)
        out = c * R * rho1 / tau1
        far = rho1 > xs[-1]
        if np.any(far):
            out[far] = grad_log_heat(self.d, c, tau, rho[far])
        return out

    def exact(self, tau: float, rho) -> np.ndarray:
        return np.asarray(grad_log_heat(self.d, self.c, tau, rho))


# --------------------------------------------------------- Brownian motion


def simulate_hyp_bm(d: int, c: float, z0, T: float, h: float, seed: int, n_paths: int = 1, threads=None) -> PathSample:
    """Geodesic random walk ``z <- exp_z(sqrt(h) F(z) xi)``, generator Delta/2."""
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (d,) or z0[-1] <= 0:
        raise ValueError("z0 must be a point of H^d")
    times = time_grid(T, h)
    dts = np.diff(times)

    def block(rng, n):
        z = np.tile(z0, (n, 1))
        out = np.empty((n, times.size, d))
        out[:, 0] = z
        for i, dt in enumerate(dts):
            xi = rng.standard_normal((n, d))
            z = exp_map(z, math.sqrt(dt) * c * z[:, -1:] * xi, c)
            out[:, i + 1] = z
        return out

    vals = np.concatenate(map_blocks(block, n_paths, seed, threads))
    return PathSample(times, vals, seed, "geodesic-euler", h)


# ------------------------------------------------------------------ bridges


@lru_cache(maxsize=16)
def _cached_table(d: int, c: float, tau_min: float, rho_max: float) -> DriftTable:
    return DriftTable(d, c, tau_min, rho_max)


def _table_for(spec: BridgeSpec) -> DriftTable:
    # round the range up so nearby separations share one table
    rho_max = 10.0 * math.ceil((spec.s + 10.0 * math.sqrt(max(spec.s, 1.0)) + 5.0) / 10.0)
    return _cached_table(spec.dim, float(spec.c), float(spec.end_cut), rho_max)


class _BridgeStepper:
    def __init__(self, spec: BridgeSpec, table: DriftTable, n: int):
        self.spec, self.table = spec, table
        self.y = spec.y
        self.z = np.tile(spec.x, (n, 1))

    def drift(self, t: float) -> np.ndarray:
        c = self.spec.c
        rho = distance(self.z, self.y, c)
        G = self.table(1.0 - t, rho)
        lg = log_map(self.z, self.y, c)
        scale = np.where(rho > 0, G / np.where(rho > 0, rho, 1.0), 0.0)
        return lg * scale[:, None]

    def step(self, t: float, dt: float, xi: np.ndarray, V: np.ndarray | None = None) -> None:
        if V is None:
            V = self.drift(t)
        c = self.spec.c
        self.z = exp_map(self.z, math.sqrt(dt) * c * self.z[:, -1:] * xi + dt * V, c)


Observer = Callable[[float, np.ndarray, np.ndarray | None], None]


def observe_bridge(
    spec: BridgeSpec,
    seed: int,
    n_paths: int,
    make_observers: Callable[[int], dict[str, Callable]],
    threads=None,
    table: DriftTable | None = None,
) -> dict[str, np.ndarray]:
    """Run bridges and feed every grid state to per-block observers.

    ``make_observers(n)`` returns ``{name: obj}`` where each ``obj`` is called
    as ``obj(t, z, V)`` at every grid time (``V`` is ``None`` at the snapped
    endpoint) and exposes ``result()``.  Results are concatenated over blocks.
    """
    table = table or _table_for(spec)
    times = bridge_times(spec.step, spec.end_cut)
    d = spec.dim

    def block(rng, n):
        obs = make_observers(n)
        st = _BridgeStepper(spec, table, n)
        for t, dt in zip(times[:-1], np.diff(times)):
            V = st.drift(t)
            for o in obs.values():
                o(t, st.z, V)
            st.step(t, dt, rng.standard_normal((n, d)), V)
        for o in obs.values():
            o(times[-1], st.z, None)
        st.z = np.tile(st.y, (n, 1))
        for o in obs.values():
            o(1.0, st.z, None)
        return {k: o.result() for k, o in obs.items()}

    parts = map_blocks(block, n_paths, seed, threads)
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


class _Recorder:
    def __init__(self):
        self.rows = []

    def __call__(self, t, z, V):
        self.rows.append(z.copy())

    def result(self):
        return np.stack(self.rows, axis=1)


def simulate_hyp_bridge(spec: BridgeSpec, seed: int, n_paths: int = 1, threads=None) -> PathSample:
    """Store full bridge paths; the last two grid times are ``1 - end_cut`` and 1."""
    if spec.dim not in (2, 3):
        raise ValueError("bridges are supported for d in {2, 3}")
    out = observe_bridge(spec, seed, n_paths, lambda n: {"z": _Recorder()}, threads)
    times = np.append(bridge_times(spec.step, spec.end_cut), 1.0)
    return PathSample(times, out["z"], seed, "geodesic-euler-bridge", spec.step)


class _RunningMax:
    def __init__(self, n, fn, t_max=1.0):
        self.best = np.zeros(n)
        self.fn, self.t_max = fn, t_max

    def __call__(self, t, z, V):
        if t <= self.t_max + 1e-12:
            np.maximum(self.best, self.fn(t, z), out=self.best)

    def result(self):
        return self.best


def _sq_dist_fn(spec: BridgeSpec, kind: str):
    c = spec.c
    geo = spec.geodesic(kind)
    iso = geo.iso

    def f(t, z):
        w = iso(z)
        r = np.linalg.norm(w[:, :-1], axis=1)
        g = np.arcsinh(r / w[:, -1])
        if kind == "segment":
            u = np.log(np.linalg.norm(w, axis=1))
            uc = np.clip(u, 0.0, geo.length)
            out = (u < 0) | (u > geo.length)
            if np.any(out):
                foot = np.zeros((int(out.sum()), w.shape[1]))
                foot[:, -1] = np.exp(uc[out])
                g[out] = distance(w[out], foot)
        g = g / c
        return g * g

    return f


def bridge_sup_f(
    spec: BridgeSpec, seed: int, n_paths: int = 1, kinds: Iterable[str] = ("line", "segment"), threads=None
) -> dict[str, np.ndarray]:
    """Grid supremum over ``[0, 1]`` of the squared distance to the line and/or segment through x, y."""
    if spec.dim not in (2, 3):
        raise ValueError("bridges are supported for d in {2, 3}")
    fns = {k: _sq_dist_fn(spec, k) for k in kinds}
    return observe_bridge(spec, seed, n_paths, lambda n: {k: _RunningMax(n, f) for k, f in fns.items()}, threads)


def bridge_sup_track(spec: BridgeSpec, seed: int, n_paths: int = 1, threads=None) -> np.ndarray:
    """Grid supremum of ``rho(X_t, gamma(t))`` with ``gamma`` the unit-time geodesic from x to y."""
    c = spec.c

    def f(t, z):
        return distance(z, spec.point_on_geodesic(spec.s * t), c)

    return observe_bridge(spec, seed, n_paths, lambda n: {"sup": _RunningMax(n, f)}, threads)["sup"]


@dataclass(frozen=True)
class SandwichResult:
    n_steps: int
    n_inside: int
    fraction: float
    alpha: float


def sandwich_check(spec: BridgeSpec, seed: int, n_paths: int, alpha: float = 0.1, threads=None) -> SandwichResult:
    """Fraction of steps on ``t <= 1/2`` with ``|<n, V>/s + tanh(c g)| < alpha``.

    ``n`` is the unit outward normal of the distance to the line through x and
    y, ``g`` that distance and ``V`` the bridge drift; only states in the event
    ``rho(X_t, gamma(s t)) <= s^{3/4}`` are counted.
    """
    if spec.s <= 0:
        raise ValueError("the sandwich check needs s > 0")
    c, s = spec.c, spec.s
    geo = spec.geodesic("line")

    class Obs:
        def __init__(self, n):
            self.total = 0
            self.good = 0

        def __call__(self, t, z, V):
            if V is None or t > 0.5 + 1e-12:
                return
            inside = distance(z, spec.point_on_geodesic(s * t), c) <= s**0.75
            g, nvec = dist_to_geodesic(z, geo, c)
            val = np.abs(inner(z, nvec, V, c) / s + np.tanh(c * g))
            self.total += int(inside.sum())
            self.good += int((inside & (val < alpha)).sum())

        def result(self):
            return np.array([self.total, self.good])

    res = observe_bridge(spec, seed, n_paths, lambda n: {"cnt": Obs(n)}, threads)["cnt"].reshape(-1, 2).sum(axis=0)
    total, good = int(res[0]), int(res[1])
    return SandwichResult(total, good, good / total if total else float("nan"), alpha)


# ------------------------------------------------------------------ bidisk


def _bidisk_run(s, h, seed, n_paths, end_cut, make_obs, threads):
    spec = BridgeSpec.standard(2, s, 1.0, step=h, end_cut=end_cut)
    table = _table_for(spec)
    times = bridge_times(h, end_cut)

    def block(rng, n):
        r1, r2 = rng.spawn(2)
        a = _BridgeStepper(spec, table, n)
        b = _BridgeStepper(spec, table, n)
        obs = make_obs(n)
        for t, dt in zip(times[:-1], np.diff(times)):
            obs(t, a.z, b.z)
            a.step(t, dt, r1.standard_normal((n, 2)))
            b.step(t, dt, r2.standard_normal((n, 2)))
        obs(times[-1], a.z, b.z)
        y = np.tile(spec.y, (n, 1))
        obs(1.0, y, y)
        return obs.result()

    return map_blocks(block, n_paths, seed, threads), times


def simulate_bidisk_bridge(s: float, h: float, seed: int, n_paths: int = 1, end_cut: float = 1e-3, threads=None) -> PathSample:
    """Bridge on H^2 x H^2 from ((0,1),(0,1)) to ((0,e^s),(0,e^s)); values are (p1, p2) stacked as 4-vectors."""

    class Rec:
        def __init__(self, n):
            self.rows = []

        def __call__(self, t, z1, z2):
            self.rows.append(np.concatenate([z1, z2], axis=1))

        def result(self):
            return np.stack(self.rows, axis=1)

    parts, times = _bidisk_run(s, h, seed, n_paths, end_cut, Rec, threads)
    return PathSample(np.append(times, 1.0), np.concatenate(parts), seed, "bidisk-product-bridge", h)


def bidisk_sup_dist(s: float, h: float, seed: int, n_paths: int = 1, end_cut: float = 1e-3, threads=None) -> dict[str, np.ndarray]:
    """Grid supremum of the distance to the diagonal geodesic, plus each component's own sup distance to its axis."""

    class Obs:
        def __init__(self, n):
            self.sup = np.zeros(n)
            self.c1 = np.zeros(n)
            self.c2 = np.zeros(n)

        def __call__(self, t, z1, z2):
            np.maximum(self.sup, bidisk_dist_to_diag_many(z1, z2), out=self.sup)
            np.maximum(self.c1, np.arcsinh(np.abs(z1[:, 0]) / z1[:, 1]), out=self.c1)
            np.maximum(self.c2, np.arcsinh(np.abs(z2[:, 0]) / z2[:, 1]), out=self.c2)

        def result(self):
            return np.stack([self.sup, self.c1, self.c2])

    parts, _ = _bidisk_run(s, h, seed, n_paths, end_cut, Obs, threads)
    arr = np.concatenate(parts, axis=1)
    return {"sup": arr[0], "component1": arr[1], "component2": arr[2]}
