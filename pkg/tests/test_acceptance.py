"""Acceptance gate: one PASS/FAIL line per criterion at full size.

Several criteria cannot pass as stated (see the notes in README); they run
faithfully and report FAIL.
"""

import math

import pytest

from hypbridge import kernels as K
from hypbridge.estimators import hit_prob, overlap
from hypbridge.experiments import ExperimentConfig, execute, sub_seed
from hypbridge.rng import default_threads
from hypbridge.sde import CirSpec

THREADS = default_threads()
K_TARGET = -0.2402690


def run(name, seed=2024, **params):
    out = execute(ExperimentConfig.from_dict({"experiment": name, "seed": seed, "params": params}), THREADS)
    return {r.quantity: r for r in out.rows}


def fmt(v):
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(fmt(x) for x in v) + "]"
    return f"{v:.5g}" if isinstance(v, float) else str(v)


@pytest.mark.slow
def test_01_cir_rate(gate):
    rows = run("cir-rate")
    slope = rows["slope"].value
    ok = abs(slope - K_TARGET) <= 0.15 * abs(K_TARGET)
    ref = rows["reference_slope"].value
    gate(1, ok, f"CIR rate slope {slope:.4f} vs {K_TARGET} (15%); exact-probability slope {ref:.4f}")


@pytest.mark.slow
def test_02_perturbed_bracketing(gate):
    rows = run("cir-rate-perturbed")
    keys = ["bracket at |alpha|=0.1", "monotone approach, alpha < 0", "monotone approach, alpha > 0"]
    ok = all(rows[k].passed for k in keys)
    slopes = [rows[f"slope alpha={a:g}"].value for a in (-0.2, -0.1, 0.0, 0.1, 0.2)]
    gate(2, ok, "perturbed slopes alpha=-.2..+.2 " + fmt(slopes) + " " + ", ".join(f"{k}: {rows[k].passed}" for k in keys))


def test_03_laplace(gate):
    rows = run("laplace-check")
    ok = all(r.passed for r in rows.values())
    gate(3, ok, "Laplace transform within 3 SE: " + ", ".join(f"{k} {r.note}" for k, r in rows.items()))


def test_04_timechange(gate):
    r = run("timechange-ks")["ks_statistic"]
    gate(4, r.passed, f"time change KS {r.value:.4f} < {r.target:.4f}")


def test_05_gradlog(gate):
    rows = run("gradlog-limit")
    ok = all(r.passed for r in rows.values())
    devs = [fmt(r.value) for k, r in rows.items() if k.startswith("deviation")]
    gate(5, ok, "grad-log deviation at rho=40 " + ", ".join(devs) + " (<= 0.05, decreasing in rho)")


def test_06_descent(gate):
    rows = run("kernel-descent")
    worst = max(r.value for r in rows.values())
    gate(6, all(r.passed for r in rows.values()), f"descent ratio max spread {worst:.3g} < 1e-4")


def test_07_laplacian(gate):
    rows = run("laplacian-bounds")
    ok = all(r.passed for r in rows.values())
    bad = [k for k, r in rows.items() if not r.passed]
    fd = max(r.value for k, r in rows.items() if k.startswith("finite"))
    gate(7, ok, f"Laplacian bounds; FD rel err {fd:.2g}; failing: {', '.join(bad) or 'none'}")


@pytest.mark.slow
def test_08_bridge_concentration(gate):
    rows = run("bridge-concentration")
    ok = all(r.passed for r in rows.values())
    gate(8, ok, f"bridge slopes line {rows['line slope'].value:.4f}, segment {rows['segment slope'].value:.4f} "
                f"vs {rows['line slope'].target:.4f} (25%); dominance {rows['segment >= line pathwise'].passed}")


def test_09_bridge_tail(gate):
    rows = run("bridge-tail")
    ok = rows["r2"].passed and rows["slope"].passed
    gate(9, ok, f"bridge tail r2 {rows['r2'].value:.4f} > 0.9, slope {rows['slope'].value:.4g} < 0")


def test_10_bidisk(gate):
    r = run("bidisk-counterexample")["slope"]
    gate(10, r.passed, f"bidisk slope {r.value:.4g}, {r.note}")


CONFIGS = [
    CirSpec(2.0),
    CirSpec(4.0),
    CirSpec(6.0),
    CirSpec(3.0, k=2.0),
    CirSpec(4.0, alpha=0.1, c=1.2, k=1.5),
]
BARRIERS = [1.0, 1.0, 0.5, 1.0, 0.8]


@pytest.mark.slow
def test_11_girsanov_vs_naive(gate):
    n, t, seed = 100_000, 1.0, 11
    overlaps, moves = [], []
    for i, (spec, a) in enumerate(zip(CONFIGS, BARRIERS)):
        est = {}
        for j, h in enumerate((1e-3, 5e-4)):
            for m, method in enumerate(("naive", "girsanov")):
                est[method, h] = hit_prob(spec, a, t, n, h, sub_seed(seed, i, j, m), method, THREADS)
            overlaps.append(overlap(est["naive", h], est["girsanov", h], 3.0))
        for method in ("naive", "girsanov"):
            e1, e2 = est[method, 1e-3], est[method, 5e-4]
            moves.append((e2.mean - e1.mean) / math.hypot(e1.stderr, e2.stderr))
    halving = all(abs(z) < 2.0 for z in moves)
    gate(11, all(overlaps) and halving,
         f"naive/IS overlap at 3 SE {sum(overlaps)}/{len(overlaps)}; halving moves (joint SE) {fmt(moves)} (< 2)")


def test_12_golden(gate, oracles):
    rel = lambda x, v: abs(x - float(v)) / abs(float(v))
    errs = [rel(K.kcal(a, c), v) for a, c, v in oracles["kcal"]]
    errs += [rel(K.hyp2f1(a, b, c, z), v) for a, b, c, z, v in oracles["hyp2f1"]]
    errs += [rel(K.sqbessel_density(k, x), v) for k, x, v in oracles["sqbessel"]]
    errs += [rel(K.h_odd(d, t, r), v) for d, t, r, v in oracles["h_odd"]]
    errs += [rel(K.h_even(d, t, r), v) for d, t, r, v in oracles["h_even"]]
    errs += [rel(K.laplace_fpt(K.JacobiQuery(*q)), v) for *q, v in oracles["laplace_fpt"]]
    worst = max(errs)
    gate(12, worst < 1e-8, f"{len(errs)} golden values, worst relative error {worst:.2g} < 1e-8")
