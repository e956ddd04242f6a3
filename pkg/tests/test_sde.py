import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from hypbridge import sde
from hypbridge.estimators import hit_prob, overlap
from hypbridge.reference import hit_prob_reference
from hypbridge.sde import CirSpec


def test_spec_validation():
    with pytest.raises(ValueError):
        CirSpec(1.0, c=0.0)
    with pytest.raises(ValueError):
        CirSpec(1.0, k=-1.0)
    with pytest.raises(ValueError):
        CirSpec(1.0, y0=-0.1)


def test_drift_at_zero_is_k():
    assert CirSpec(7.0, 0.3, 2.0, 1.5).drift(0.0) == pytest.approx(1.5)


@given(st.floats(0.05, 3.0), st.floats(1e-4, 0.05))
def test_time_grid(T, h):
    g = sde.time_grid(T, h)
    assert g[0] == 0.0 and g[-1] == pytest.approx(T, abs=1e-15)
    assert np.all(np.diff(g) > 0) and np.diff(g).max() <= h * (1 + 1e-9)


def test_paths_nonnegative_and_deterministic():
    spec = CirSpec(3.0, 0.1, 1.0, 1.0)
    a = sde.simulate_cir(spec, 0.5, 1e-2, 5, 100)
    b = sde.simulate_cir(spec, 0.5, 1e-2, 5, 100)
    assert a.values.shape == (100, 51)
    assert np.all(a.values >= 0)
    np.testing.assert_array_equal(a.values, b.values)
    c = sde.simulate_cir(spec, 0.5, 1e-2, 6, 100)
    assert not np.array_equal(a.values, c.values)


def test_thread_count_does_not_change_results():
    spec = CirSpec(4.0)
    r1 = sde.first_passage(spec, 1.0, 1.0, 1e-2, 9, 20000, threads=1)
    r3 = sde.first_passage(spec, 1.0, 1.0, 1e-2, 9, 20000, threads=3)
    np.testing.assert_array_equal(r1.hit, r3.hit)
    np.testing.assert_array_equal(r1.time, r3.time)
    g1 = sde.first_passage_girsanov(spec, 1.0, 1.0, 1e-2, 9, 20000, threads=1)
    g3 = sde.first_passage_girsanov(spec, 1.0, 1.0, 1e-2, 9, 20000, threads=3)
    np.testing.assert_array_equal(g1.weight, g3.weight)


def test_squared_bessel_two_is_exponential():
    # nu = 0, k = 2 from 0: Y_1 ~ Exp(mean 2)
    y = sde.simulate_cir(CirSpec(0.0, k=2.0), 1.0, 1e-3, 1, 10000).values[:, -1]
    assert stats.kstest(y, "expon", args=(0, 2.0)).pvalue > 0.01


def test_squared_bessel_mean():
    y = sde.simulate_cir(CirSpec(0.0, k=3.0), 1.0, 1e-2, 2, 20000).values[:, -1]
    assert abs(y.mean() - 3.0) < 4 * y.std() / math.sqrt(y.size)


def test_scaling_law_pathwise():
    # c^2 Y^{nu,c,k}_{t/c^2} equals Y^{nu/c,1,k}_t under matched noise
    c, nu = 1.7, 5.0
    a = sde.simulate_cir(CirSpec(nu, 0.2, c, 1.5), 0.4, 1e-3, 3, 50)
    b = sde.simulate_cir(CirSpec(nu / c, 0.2, 1.0, 1.5), 0.4 * c * c, 1e-3 * c * c, 3, 50)
    np.testing.assert_allclose(c * c * a.values, b.values, rtol=1e-8, atol=1e-10)


def test_linear_drift_mean():
    k, beta, T = 2.0, 1.5, 1.0
    x = sde.simulate_linear_drift(k, beta, T, 1e-3, 4, 20000).values[:, -1]
    want = k * math.expm1(2 * beta * T) / (2 * beta)
    assert abs(x.mean() - want) < 4 * x.std() / math.sqrt(x.size) + 0.01 * want


def test_timechange_degenerates_to_squared_bessel():
    tc = sde.TimeChangeSpec(1.0, -1.0)
    assert tc.c_nu == 0.0
    np.testing.assert_array_equal(tc.psi(np.array([0.0, 0.3, 1.0])), [0.0, 0.3, 1.0])
    x = sde.cir_via_timechange(2.0, 1.0, -1.0, 1.0, 0.1, 3, 10000).values[:, -1]
    assert stats.kstest(x, "expon", args=(0, 2.0)).pvalue > 0.01


def test_timechange_psi_limit():
    tc = sde.TimeChangeSpec(1.0, 3.0)
    assert float(tc.psi(60.0)) == pytest.approx(tc.psi_inf, abs=1e-12)
    assert tc.c_a == pytest.approx(math.tanh(1.0))


def test_timechange_matches_direct_simulation():
    tc = sde.TimeChangeSpec(1.0, 3.0)
    A = sde.cir_via_timechange(2.0, 1.0, 3.0, 1.0, 1e-3, 1, 5000).values[:, -1]
    B = sde.simulate_linear_drift(2.0, tc.c_nu, 1.0, 1e-3, 2, 5000).values[:, -1]
    assert stats.ks_2samp(A, B).pvalue > 0.01


def test_hit_record_concat_and_log_weight():
    r = sde.HitRecord(np.array([True, False]), np.array([0.1, np.nan]), np.array([0.5, 0.0]))
    assert r.log_weight[0] == pytest.approx(math.log(0.5))
    assert r.log_weight[1] == -np.inf
    assert sde.HitRecord.concat([r, r]).n == 4


def test_first_passage_start_above_barrier():
    rec = sde.first_passage(CirSpec(2.0, y0=2.0), 1.0, 1.0, 1e-2, 1, 10)
    assert rec.hit.all() and np.all(rec.time == 0.0)


def test_naive_converges_toward_reference():
    spec = CirSpec(4.0)
    ref = hit_prob_reference(spec, 1.0, 1.0)
    coarse = hit_prob(spec, 1.0, 1.0, 20000, 1e-2, 3)
    fine = hit_prob(spec, 1.0, 1.0, 20000, 2.5e-4, 3)
    # grid monitoring misses crossings: estimates sit below the truth and approach it
    assert coarse.mean < fine.mean + 2 * fine.stderr
    assert fine.mean <= ref + 3 * fine.stderr
    assert ref - fine.mean < 0.02


@pytest.mark.parametrize(
    "spec,a",
    [(CirSpec(4.0), 1.0), (CirSpec(3.0, alpha=0.1, c=1.5, k=2.0), 0.8), (CirSpec(3.0, alpha=-0.1, c=0.7), 0.6)],
)
def test_girsanov_agrees_with_naive(spec, a):
    n = hit_prob(spec, a, 1.0, 20000, 1e-3, 11)
    g = hit_prob(spec, a, 1.0, 20000, 1e-3, 12, "girsanov")
    assert overlap(n, g, 3.0)


def test_girsanov_needs_k_at_least_one():
    with pytest.raises(ValueError):
        sde.first_passage_girsanov(CirSpec(2.0, k=0.5), 1.0, 1.0, 1e-2, 1, 10)


def test_girsanov_weight_terms():
    ell, integrand = sde.girsanov_log_weight_terms(CirSpec(3.0, 0.0, 1.0, 1.0))
    assert ell(0.0) == 0.0
    assert ell(1.0) == pytest.approx(math.log(math.cosh(1.0)))
    # at r = 0: c sech^2 / 2 + tanh^2/2 + (k-1)/2 c = 1/2
    assert integrand(np.array([0.0]))[0] == pytest.approx(0.5)


def test_reference_solver_refines():
    spec = CirSpec(6.0, 0.1, 1.2, 1.5)
    a = hit_prob_reference(spec, 0.8, 1.0, 1000, 4000)
    b = hit_prob_reference(spec, 0.8, 1.0, 2000, 8000)
    assert abs(a - b) < 1e-5
    assert hit_prob_reference(CirSpec(2.0, y0=1.0), 0.5, 1.0) == 1.0


def test_reference_matches_bessel_exit_series():
    # nu = 0, k = 3: R is a 3-d Bessel process, exit of the ball of radius b:
    # P[T < t] = 1 - 2 sum_n (-1)^{n+1} exp(-n^2 pi^2 t / 2b^2)
    b, t = 1.0, 0.4
    series = 1 - 2 * sum((-1) ** (n + 1) * math.exp(-(n * math.pi / b) ** 2 * t / 2) for n in range(1, 60))
    assert hit_prob_reference(CirSpec(0.0, k=3.0), b * b, t) == pytest.approx(series, abs=2e-6)


def test_jacobi_first_passage_rules():
    with pytest.raises(ValueError):
        sde.jacobi_first_passage(5, 1, 0.0625, 1.0, 1.0, 1e-2, 1, 10, crossing="exact")
    g = sde.jacobi_first_passage(5, 1, 0.0625, 1.0, 2.0, 1e-2, 1, 4000, "grid")
    b = sde.jacobi_first_passage(5, 1, 0.0625, 1.0, 2.0, 1e-2, 1, 4000, "bridge")
    # the crossing correction only adds hits
    assert b.hit.mean() >= g.hit.mean()


def test_comparison_orderings_hold():
    res = sde.comparison_check(10.0, 1.0, 0.5, 1.0, 1e-3, 3, 2000)
    assert res.lower.all()
    assert res.holds.mean() >= 0.999
    assert res.nu_prime == pytest.approx(10 - 1 / (0.5 * math.tanh(0.5)))
    with pytest.raises(ValueError):
        sde.comparison_check(1.0, 1.0, 0.5, 1.0, 1e-3, 3, 10)
