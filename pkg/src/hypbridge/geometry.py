"""Half-space model of real hyperbolic space.

Points of H^d are arrays whose last axis holds ``(x_1, ..., x_{d-1}, z_d)``
with ``z_d > 0``.  Tangent vectors are stored by their Euclidean coordinate
components at the base point.

Curvature convention: the metric is ``|dz|^2 / (c^2 z_d^2)``, so sectional
curvature equals ``-c**2`` and distances scale as ``rho_c = rho_1 / c``.
Geodesics (as point sets) and the exponential map in coordinates do not
depend on ``c``; only lengths and inner products do.

All functions broadcast over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = [
    "HPoint",
    "Isometry",
    "GeodesicSpec",
    "FermiCoords",
    "BidiskPoint",
    "distance",
    "inner",
    "norm",
    "exp_map",
    "log_map",
    "frame",
    "fermi",
    "from_fermi",
    "dist_to_geodesic",
    "laplacian_f",
    "bidisk_distance",
    "bidisk_dist_to_diag_geodesic",
    "bidisk_dist_to_diag_many",
]


def _points(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] < 2:
        raise ValueError("points of H^d need d >= 2 coordinates")
    if np.any(p[..., -1] <= 0):
        raise ValueError("last half-space coordinate must be positive")
    return p


@dataclass(frozen=True)
class HPoint:
    """A single point of H^d in half-space coordinates."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(-1)
        object.__setattr__(self, "coords", _points(c))
        c.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)

    @classmethod
    def origin(cls, d: int) -> "HPoint":
        c = np.zeros(d)
        c[-1] = 1.0
        return cls(c)


def distance(p, q, c: float = 1.0) -> np.ndarray:
    """Riemannian distance; ``cosh(c rho) = 1 + |p-q|^2 / (2 p_d q_d)``."""
    p, q = _points(p), _points(q)
    if p.shape[-1] != q.shape[-1]:
        raise ValueError("dimension mismatch")
    if c <= 0:
        raise ValueError("c must be positive")
    e = np.linalg.norm(p - q, axis=-1)
    # arcsinh form stays accurate for nearby points
    return 2.0 * np.arcsinh(e / (2.0 * np.sqrt(p[..., -1] * q[..., -1]))) / c


def inner(z, u, v, c: float = 1.0) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return np.sum(np.asarray(u) * np.asarray(v), axis=-1) / (c * z[..., -1]) ** 2


def norm(z, v, c: float = 1.0) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return np.linalg.norm(v, axis=-1) / (c * z[..., -1])


def frame(z, c: float = 1.0) -> np.ndarray:
    """Scale of the orthonormal frame ``F(z) = c z_d I`` (returned as ``c z_d``)."""
    return c * np.asarray(z, dtype=float)[..., -1]


def _exp_origin(w):
    """Exponential map at ``o = (0, ..., 0, 1)`` for a c=1 tangent vector."""
    L = np.linalg.norm(w, axis=-1)
    safe = np.where(L > 0, L, 1.0)
    u = w / safe[..., None]
    ud = u[..., -1]
    # cosh L - u_d sinh L, written without cancellation
    den = 0.5 * ((1.0 - ud) * np.exp(L) + (1.0 + ud) * np.exp(-L))
    out = np.empty_like(w)
    out[..., :-1] = u[..., :-1] * (np.sinh(L) / den)[..., None]
    out[..., -1] = 1.0 / den
    zero = L == 0
    if np.any(zero):
        out[zero] = 0.0
        out[zero, -1] = 1.0
    return out


def exp_map(p, v, c: float = 1.0) -> np.ndarray:
    """Exponential map at ``p`` of the coordinate tangent vector ``v``."""
    p = _points(p)
    v = np.asarray(v, dtype=float)
    pd = p[..., -1:]
    w = v / pd
    q = _exp_origin(w)
    out = np.empty(np.broadcast_shapes(p.shape, v.shape))
    out[..., :-1] = p[..., :-1] + pd * q[..., :-1]
    out[..., -1] = pd[..., 0] * q[..., -1]
    return out


def log_map(p, q, c: float = 1.0) -> np.ndarray:
    """Inverse of :func:`exp_map`; zero vector when ``q == p``."""
    p, q = _points(p), _points(q)
    pd = p[..., -1:]
    qq = (q - p) / pd
    qq[..., -1] = q[..., -1] / pd[..., 0]
    xh = qq[..., :-1]
    yd = qq[..., -1]
    r2 = np.sum(xh * xh, axis=-1)
    L = distance(np.broadcast_to(_origin_like(qq), qq.shape), qq)
    sL = np.sinh(L)
    safe = np.where(L > 0, yd * sL, 1.0)
    w = np.empty_like(qq)
    w[..., :-1] = xh / safe[..., None]
    w[..., -1] = (r2 + (yd - 1.0) * (yd + 1.0)) / (2.0 * safe)
    w *= L[..., None]
    w[L == 0] = 0.0
    return pd * w


def _origin_like(a):
    o = np.zeros(a.shape[-1])
    o[-1] = 1.0
    return o


# ---------------------------------------------------------------- isometries


@dataclass(frozen=True)
class Isometry:
    """Composition of horizontal translations, dilations and the unit inversion.

    ``ops`` is applied left to right.  Each op is ``("t", vector)``,
    ``("s", factor)`` or ``("i", None)`` for ``z -> z / |z|^2``.
    """

    ops: tuple = ()

    def __call__(self, z) -> np.ndarray:
        z = np.array(z, dtype=float)
        for kind, arg in self.ops:
            z = _apply(kind, arg, z)
        return z

    def inverse(self) -> "Isometry":
        inv = []
        for kind, arg in reversed(self.ops):
            if kind == "t":
                inv.append(("t", -np.asarray(arg)))
            elif kind == "s":
                inv.append(("s", 1.0 / arg))
            else:
                inv.append(("i", None))
        return Isometry(tuple(inv))

    def push(self, z, v) -> tuple[np.ndarray, np.ndarray]:
        """Image of the point ``z`` and of the tangent vector ``v`` at ``z``."""
        z = np.array(z, dtype=float)
        v = np.array(v, dtype=float)
        for kind, arg in self.ops:
            if kind == "s":
                v = v * arg
            elif kind == "i":
                n2 = np.sum(z * z, axis=-1, keepdims=True)
                v = v / n2 - 2.0 * z * np.sum(z * v, axis=-1, keepdims=True) / n2**2
            z = _apply(kind, arg, z)
        return z, v

    def then(self, other: "Isometry") -> "Isometry":
        return Isometry(self.ops + other.ops)


def _apply(kind, arg, z):
    if kind == "t":
        z = z.copy()
        z[..., :-1] += arg
        return z
    if kind == "s":
        return z * arg
    return z / np.sum(z * z, axis=-1, keepdims=True)


# ----------------------------------------------------------------- geodesics


@dataclass(frozen=True)
class GeodesicSpec:
    """An oriented geodesic line or segment.

    ``iso`` maps the geodesic onto the ``z_d``-axis with the start point at
    ``(0, ..., 0, 1)`` and the orientation pointing up.  ``length`` is the
    c=1 arclength of a segment (``None`` for a line).
    """

    dim: int
    kind: Literal["line", "segment"] = "line"
    length: float | None = None
    iso: Isometry = field(default_factory=Isometry)

    def __post_init__(self):
        if self.kind not in ("line", "segment"):
            raise ValueError(f"unknown geodesic kind {self.kind!r}")
        if self.kind == "segment" and (self.length is None or self.length < 0):
            raise ValueError("segments need a nonnegative length")

    @classmethod
    def axis(cls, d: int, kind="line", length=None) -> "GeodesicSpec":
        return cls(d, kind, length, Isometry())

    @classmethod
    def through(cls, x, y, kind="line") -> "GeodesicSpec":
        """Geodesic from ``x`` through ``y`` (segment ``[x, y]`` if requested)."""
        x, y = _points(x), _points(y)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("need two points of the same dimension")
        if np.allclose(x, y, rtol=0, atol=1e-15):
            raise ValueError("segment endpoints must be distinct")
        d = x.shape[0]
        xh, yh = x[:-1], y[:-1]
        D = np.linalg.norm(yh - xh)
        ops: list = []
        if D == 0.0:
            ops.append(("t", -xh))
            if y[-1] < x[-1]:
                ops.append(("i", None))
        else:
            e = (yh - xh) / D
            xd, yd = x[-1], y[-1]
            m = (D * D + yd * yd - xd * xd) / (2 * D)
            R = np.hypot(m, xd)
            # endpoints on the boundary, computed without cancellation
            plus = m + R if m >= 0 else xd * xd / (R - m)
            minus = m - R if m <= 0 else -xd * xd / (m + R)
            xi_plus = xh + plus * e
            xi_minus = xh + minus * e
            ops.append(("t", -xi_plus))
            ops.append(("i", None))
            b = xi_minus - xi_plus
            ops.append(("t", -b / np.dot(b, b)))
        iso = Isometry(tuple(ops))
        xs = iso(x)
        iso = iso.then(Isometry((("t", -xs[:-1]), ("s", 1.0 / xs[-1]))))
        length = float(distance(x, y)) if kind == "segment" else None
        return cls(d, kind, length, iso)

    def point(self, u, c: float = 1.0) -> np.ndarray:
        """Point at signed arclength ``u`` (c-units) from the start."""
        u = np.asarray(u, dtype=float)
        z = np.zeros(u.shape + (self.dim,))
        z[..., -1] = np.exp(c * u)
        return self.iso.inverse()(z)


@dataclass(frozen=True)
class FermiCoords:
    u: np.ndarray
    h: np.ndarray
    theta: np.ndarray


def fermi(z, geo: GeodesicSpec, c: float = 1.0) -> FermiCoords:
    """Fermi coordinates (arclength, distance, transverse direction) of ``z``."""
    w = geo.iso(_points(z))
    xh = w[..., :-1]
    r = np.linalg.norm(xh, axis=-1)
    u = np.log(np.linalg.norm(w, axis=-1)) / c
    h = np.arcsinh(r / w[..., -1]) / c
    theta = np.zeros_like(xh)
    theta[..., 0] = 1.0
    pos = r > 0
    theta[pos] = xh[pos] / r[pos][..., None]
    return FermiCoords(u, h, theta)


def from_fermi(fc: FermiCoords, geo: GeodesicSpec, c: float = 1.0) -> np.ndarray:
    u, h = np.asarray(fc.u), np.asarray(fc.h)
    theta = np.asarray(fc.theta)
    ch = c * h
    rad = np.exp(c * u)
    w = np.empty(theta.shape[:-1] + (geo.dim,))
    w[..., :-1] = (rad * np.tanh(ch))[..., None] * theta
    w[..., -1] = rad / np.cosh(ch)
    return geo.iso.inverse()(w)


def _pull_vector(geo: GeodesicSpec, w, vw):
    """Map a tangent vector at ``w`` in normalized coordinates back to ``z``."""
    _, v = geo.iso.inverse().push(w, vw)
    return v


def dist_to_geodesic(z, geo: GeodesicSpec, c: float = 1.0):
    """Distance ``g`` from ``z`` to a line or segment, and the unit outward gradient.

    The returned direction has unit length in the c-metric.  On the line
    itself the direction is the canonical ``theta = e_1`` normal.
    """
    z = _points(z)
    w = geo.iso(z)
    xh = w[..., :-1]
    wd = w[..., -1]
    r = np.linalg.norm(xh, axis=-1)
    rd = np.linalg.norm(w, axis=-1)
    g = np.arcsinh(r / wd) / c
    theta = np.zeros_like(xh)
    theta[..., 0] = 1.0
    pos = r > 0
    theta[pos] = xh[pos] / r[pos][..., None]
    # unit (c=1) gradient of the distance to the axis
    gw = np.empty_like(w)
    gw[..., :-1] = (wd * wd / rd)[..., None] * theta
    gw[..., -1] = -wd * r / rd
    if geo.kind == "segment":
        u = np.log(rd)
        uc = np.clip(u, 0.0, geo.length)
        out = (u < 0) | (u > geo.length)
        if np.any(out):
            foot = np.zeros_like(w)
            foot[..., -1] = np.exp(uc)
            de = distance(w, foot)
            g = np.where(out, de / c, g)
            lg = -log_map(w, foot)
            nrm = np.linalg.norm(lg, axis=-1) / wd
            nrm = np.where(nrm > 0, nrm, 1.0)
            gw = np.where(out[..., None], lg / nrm[..., None], gw)
    v = _pull_vector(geo, w, gw) * c
    return g, v


def laplacian_f(z, geo: GeodesicSpec, c: float = 1.0) -> np.ndarray:
    """Laplace-Beltrami of the squared distance to a geodesic line.

    With ``h = c g`` the distance in unit curvature,
    ``Delta f = 2 + 2 h (tanh h + (d - 2) coth h)``; the value is the same
    for every ``c``.  On the axis the limit ``2 (d - 1)`` is returned.
    """
    if geo.kind != "line":
        raise ValueError("closed form only for geodesic lines")
    z = _points(z)
    d = z.shape[-1]
    w = geo.iso(z)
    r = np.linalg.norm(w[..., :-1], axis=-1)
    h = np.arcsinh(r / w[..., -1])
    with np.errstate(divide="ignore", invalid="ignore"):
        hcoth = np.where(h > 0, h / np.tanh(h), 1.0)
    return 2.0 + 2.0 * (h * np.tanh(h) + (d - 2) * hcoth)


# --------------------------------------------------------------------- bidisk


@dataclass(frozen=True)
class BidiskPoint:
    p1: np.ndarray
    p2: np.ndarray

    def __post_init__(self):
        for p in (self.p1, self.p2):
            a = _points(p)
            if a.shape[-1] != 2:
                raise ValueError("bidisk components live in H^2")


def bidisk_distance(u: BidiskPoint, v: BidiskPoint) -> np.ndarray:
    return np.hypot(distance(u.p1, v.p1), distance(u.p2, v.p2))


def _diag_point(t):
    t = np.asarray(t, dtype=float)
    p = np.zeros(t.shape + (2,))
    p[..., 1] = np.exp(t)
    return p


def bidisk_dist_to_diag_geodesic(u: BidiskPoint, tol: float = 1e-8) -> float:
    """Distance from ``u`` to ``{((0, e^t), (0, e^t))}`` by 1-D minimization."""
    p1, p2 = _points(u.p1), _points(u.p2)

    def obj(t):
        q = _diag_point(t)
        return distance(p1, q) ** 2 + distance(p2, q) ** 2

    # along the axis each squared distance is convex in t; start from the midpoint
    t0 = 0.5 * (np.log(np.linalg.norm(p1)) + np.log(np.linalg.norm(p2)))
    res = minimize_scalar(obj, bracket=(t0 - 1.0, t0 + 1.0), tol=tol)
    return float(np.sqrt(max(res.fun, 0.0)))


def bidisk_dist_to_diag_many(p1, p2, iters: int = 40) -> np.ndarray:
    """Vectorized distance to the diagonal geodesic for arrays of H^2 points.

    A point with Fermi coordinates ``(a, h)`` relative to the axis satisfies
    ``cosh rho = C cosh(a - t)``, ``C = cosh h``, against ``(0, e^t)``.  The sum
    of the two squared distances is convex in ``t`` with its minimizer between
    ``a1`` and ``a2``; Newton steps on its derivative, with bisection when a
    step leaves the bracket, run until the update is below 1e-13.
    """
    p1, p2 = np.broadcast_arrays(_points(p1), _points(p2))
    shape = p1.shape[:-1]
    p1, p2 = p1.reshape(-1, 2), p2.reshape(-1, 2)
    a = np.stack([np.log(np.linalg.norm(p1, axis=-1)), np.log(np.linalg.norm(p2, axis=-1))])
    C = np.stack([np.hypot(p1[..., 0], p1[..., 1]) / p1[..., 1], np.hypot(p2[..., 0], p2[..., 1]) / p2[..., 1]])
    lo, hi = a.min(axis=0), a.max(axis=0)
    t = 0.5 * (lo + hi)

    def parts(t, a, C):
        A = C * np.cosh(a - t)
        r = np.arccosh(np.maximum(A, 1.0))
        sh = np.sinh(r)
        ratio = np.where(sh > 1e-300, r / np.where(sh > 1e-300, sh, 1.0), 1.0)
        den = A * A - 1.0
        rp2 = np.where(den > 1e-14, (A * A - C * C) / np.where(den > 1e-14, den, 1.0), 1.0)
        rp2 = np.clip(rp2, 0.0, 1.0)
        dF = -2.0 * np.sum(C * np.sinh(a - t) * ratio, axis=0)
        d2F = 2.0 * np.sum(rp2 + ratio * A * (1.0 - rp2), axis=0)
        return r, dF, d2F

    # iterate only on points that have not converged yet
    act = np.arange(t.size)
    for _ in range(iters):
        ta, la, ha = t[act], lo[act], hi[act]
        _, dF, d2F = parts(ta, a[:, act], C[:, act])
        ha = np.where(dF > 0, ta, ha)
        la = np.where(dF < 0, ta, la)
        step = ta - dF / d2F
        bad = ~((step >= la) & (step <= ha))
        new = np.where(bad, 0.5 * (la + ha), step)
        t[act], lo[act], hi[act] = new, la, ha
        act = act[np.abs(new - ta) >= 1e-13]
        if act.size == 0:
            break
    r, _, _ = parts(t, a, C)
    return np.sqrt(np.sum(r * r, axis=0)).reshape(shape)
