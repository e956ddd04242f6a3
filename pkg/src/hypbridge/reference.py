"""Deterministic reference values for first-passage probabilities.

For ``R = sqrt(Y)`` the square-root diffusion becomes

    dR = dB + [(k-1)/(2R) - nu (tanh(c R) + alpha)] dt,

reflected at 0 when ``k = 1``.  ``u(t, r) = P_r[T < t]`` solves the backward
equation ``u_t = u''/2 + b(r) u'`` on ``[0, sqrt(a)]`` with ``u = 1`` at the
barrier and ``u'(0) = 0``; at ``r = 0`` the generator's limit is ``(k/2) u''``.
Crank-Nicolson in time, centered differences in space.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.sparse import diags, identity
from scipy.sparse.linalg import splu

from .sde import CirSpec

__all__ = ["hit_prob_reference"]


def hit_prob_reference(spec: CirSpec, a: float, t: float, n_space: int = 2000, n_time: int = 8000) -> float:
    """``P[T_a < t]`` for the continuous-time square-root diffusion."""
    if a <= spec.y0:
        return 1.0
    b = math.sqrt(a)
    r = np.linspace(0.0, b, n_space + 1)
    dr = r[1]
    ri = r[:-1]  # unknowns; u(b) = 1 is the boundary
    with np.errstate(divide="ignore"):
        drift = np.where(ri > 0, (spec.k - 1.0) / (2.0 * np.where(ri > 0, ri, 1.0)), 0.0)
    drift = drift - spec.nu * (np.tanh(spec.c * ri) + spec.alpha)
    lower = 0.5 / dr**2 - drift / (2 * dr)
    upper = 0.5 / dr**2 + drift / (2 * dr)
    main = np.full(n_space, -1.0 / dr**2)
    # r = 0: ghost node u(-dr) = u(dr) and generator (k/2) u''
    main[0] = -spec.k / dr**2
    up = upper[:-1].copy()
    up[0] = spec.k / dr**2
    L = diags([lower[1:], main, up], [-1, 0, 1], format="csc")
    src = np.zeros(n_space)
    src[-1] = upper[-1]
    dt = t / n_time
    I = identity(n_space, format="csc")
    lhs = splu((I - 0.5 * dt * L).tocsc())
    rhs = (I + 0.5 * dt * L).tocsr()
    u = np.zeros(n_space)
    for _ in range(n_time):
        u = lhs.solve(rhs @ u + dt * src)
    full = np.append(u, 1.0)
    return float(np.interp(math.sqrt(spec.y0), r, full))
