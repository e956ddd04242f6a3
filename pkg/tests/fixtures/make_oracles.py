"""Regenerate oracles.json with arbitrary-precision mpmath (run once, results checked in)."""

import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 40


def kcal(a, c):
    return 2 / mp.mpf(c) * mp.log(mp.cosh(mp.mpf(c) * mp.sqrt(a)))


def sqbessel(k, x):
    k, x = mp.mpf(k), mp.mpf(x)
    return (x / 2) ** (k / 2 - 1) * mp.exp(-x / 2) / (2 * mp.gamma(k / 2))


def D(f):
    return lambda r: -mp.diff(f, r) / mp.sinh(r)


def h_odd(d, t, rho):
    t = mp.mpf(t)
    f = lambda r: mp.exp(-r * r / (2 * t))
    for _ in range((d - 1) // 2):
        f = D(f)
    return f(mp.mpf(rho))


def h_even(d, t, rho):
    t, rho = mp.mpf(t), mp.mpf(rho)
    # first application of D in closed form, further ones numerically
    g = lambda s: s / (t * mp.sinh(s)) * mp.exp(-s * s / (2 * t)) if s != 0 else 1 / t
    for _ in range(d // 2 - 1):
        g = D(g)
    # s = rho + w, cosh s - cosh rho = 2 sinh(rho + w/2) sinh(w/2)
    f = lambda w: mp.sinh(rho + w) * g(rho + w) / mp.sqrt(2 * mp.sinh(rho + w / 2) * mp.sinh(w / 2))
    return mp.quad(f, [0, 1, 4, 12, mp.inf])


def laplace_fpt(nu, q, lam, x, a):
    nu, q, lam, x, a = map(mp.mpf, (nu, q, lam, x, a))
    mu = mp.sqrt((nu - q) ** 2 + 2 * lam)
    A, B, C = (q - nu - mu) / 2, (q + 1 + nu - mu) / 2, q + mp.mpf(1) / 2
    rx, ra = mp.sqrt(x), mp.sqrt(a)
    F = lambda r: mp.hyp2f1(A, B, C, mp.tanh(r) ** 2)
    return (mp.cosh(rx) / mp.cosh(ra)) ** (nu + mu - q) * F(rx) / F(ra)


def main():
    out = {
        "kcal": [[a, c, str(kcal(a, c))] for a, c in [(1, 1), (0.25, 1), (0.25, 2), (4, 0.5), (0.01, 3)]],
        "hyp2f1": [
            [a, b, c, z, str(mp.hyp2f1(a, b, c, z))]
            for a, b, c, z in [
                (1, 1, 2, 0.5),
                (0.5, 0.5, 1.5, 0.25),
                (2.3, -1.7, 3.1, 0.9),
                (0.5, 1.5, 2.5, -0.7),
                (-4.0, 3.0, 1.5, 0.58),
                (-2.8, 3.7, 1.5, float(mp.tanh(1) ** 2)),
                (-2.8, 3.7, 1.5, float(mp.tanh(0.25) ** 2)),
            ]
        ],
        "sqbessel": [[k, x, str(sqbessel(k, x))] for k, x in [(2, 2), (0.5, 0.3), (1, 1.5), (3, 4), (5, 0.1)]],
        "h_odd": [[d, t, r, str(h_odd(d, t, r))] for d, t, r in [(3, 1, 1), (3, 0.25, 0.3), (5, 1, 1), (5, 0.7, 5), (7, 1, 2), (7, 0.5, 0.5)]],
        "h_even": [[d, t, r, str(h_even(d, t, r))] for d, t, r in [(2, 1, 0), (2, 1, 1), (2, 0.5, 3), (2, 0.25, 0.5), (4, 1, 2)]],
        "laplace_fpt": [[5, 1, lam, 0.0625, 1, str(laplace_fpt(5, 1, lam, 0.0625, 1))] for lam in (0.5, 1, 2)],
    }
    Path(__file__).with_name("oracles.json").write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()
