import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hypbridge import geometry as G


def point(d):
    coords = st.lists(st.floats(-3, 3), min_size=d - 1, max_size=d - 1)
    height = st.floats(-2, 2).map(math.exp)
    return st.tuples(coords, height).map(lambda p: np.array(p[0] + [p[1]]))


def vector(d):
    return arrays(float, d, elements=st.floats(-2, 2))


dims = st.sampled_from([2, 3, 4])
curv = st.floats(0.3, 3.0)


@st.composite
def pts(draw, n=2):
    d = draw(dims)
    return d, [draw(point(d)) for _ in range(n)]


def random_isometry(rng, d):
    ops = (("t", rng.normal(size=d - 1)), ("s", math.exp(rng.normal())), ("i", None), ("t", rng.normal(size=d - 1)))
    return G.Isometry(ops)


# ---------------------------------------------------------------- distance


def test_distance_simple():
    assert G.distance([0, 1], [0, math.e]) == pytest.approx(1.0)
    assert G.distance([0, 1], [0, math.e], c=2.0) == pytest.approx(0.5)
    assert G.distance([0.3, 2.0], [0.3, 2.0]) == 0.0


@given(pts(3), curv)
def test_distance_metric_axioms(data, c):
    _, (p, q, r) = data
    dpq = G.distance(p, q, c)
    assert dpq == pytest.approx(G.distance(q, p, c))
    assert dpq >= 0
    assert G.distance(p, r, c) <= dpq + G.distance(q, r, c) + 1e-9


@given(pts(2), curv)
def test_distance_isometry_invariant(data, c):
    d, (p, q) = data
    iso = random_isometry(np.random.default_rng(0), d)
    assert G.distance(iso(p), iso(q), c) == pytest.approx(G.distance(p, q, c), rel=1e-7, abs=1e-9)


def test_distance_close_points_accurate():
    p = np.array([0.0, 1.0])
    q = p + np.array([1e-9, 0.0])
    assert G.distance(p, q) == pytest.approx(1e-9, rel=1e-6)


def test_invalid_points():
    with pytest.raises(ValueError):
        G.distance([0.0, -1.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        G.HPoint([1.0])


# ---------------------------------------------------------- exp/log maps


@given(pts(2), curv)
def test_log_then_exp(data, c):
    _, (p, q) = data
    v = G.log_map(p, q, c)
    np.testing.assert_allclose(G.exp_map(p, v, c), q, rtol=1e-7, atol=1e-8)
    assert G.norm(p, v, c) == pytest.approx(G.distance(p, q, c), rel=1e-7, abs=1e-9)


@given(dims.flatmap(lambda d: st.tuples(point(d), vector(d))), curv)
def test_exp_then_log(data, c):
    p, v = data
    q = G.exp_map(p, v, c)
    np.testing.assert_allclose(G.log_map(p, q, c), v, rtol=1e-6, atol=1e-7)
    assert G.distance(p, q, c) == pytest.approx(G.norm(p, v, c), rel=1e-7, abs=1e-9)


def test_exp_zero_vector():
    p = np.array([0.2, -0.1, 1.5])
    np.testing.assert_array_equal(G.exp_map(p, np.zeros(3)), p)


@given(pts(1), curv)
def test_frame_orthonormal(data, c):
    d, (p,) = data
    F = float(G.frame(p, c)) * np.eye(d)
    gram = np.array([[G.inner(p, F[:, i], F[:, j], c) for j in range(d)] for i in range(d)])
    np.testing.assert_allclose(gram, np.eye(d), atol=1e-12)


def test_push_preserves_norm_and_exp():
    rng = np.random.default_rng(3)
    iso = random_isometry(rng, 3)
    p, v = np.array([0.1, 0.4, 0.7]), np.array([0.3, -0.2, 0.5])
    z, w = iso.push(p, v)
    assert G.norm(z, w) == pytest.approx(G.norm(p, v), rel=1e-12)
    np.testing.assert_allclose(G.exp_map(z, w), iso(G.exp_map(p, v)), rtol=1e-9)


def test_isometry_inverse():
    rng = np.random.default_rng(4)
    iso = random_isometry(rng, 3)
    p = np.array([0.1, 0.4, 0.7])
    np.testing.assert_allclose(iso.inverse()(iso(p)), p, rtol=1e-12)


# ----------------------------------------------------------- geodesics


def test_through_maps_to_axis():
    x, y = np.array([0.3, 1.2]), np.array([-1.0, 0.4])
    geo = G.GeodesicSpec.through(x, y)
    np.testing.assert_allclose(geo.iso(x), [0.0, 1.0], atol=1e-12)
    wy = geo.iso(y)
    assert abs(wy[0]) < 1e-12 and wy[1] > 1
    np.testing.assert_allclose(geo.point(G.distance(x, y)), y, rtol=1e-10)


def test_segment_requires_distinct_points():
    with pytest.raises(ValueError):
        G.GeodesicSpec.through([0.0, 1.0], [0.0, 1.0], "segment")


@given(pts(1), st.floats(-2, 2), st.floats(0, 3), curv)
def test_fermi_roundtrip(data, u, h, c):
    d, (x,) = data
    y = x.copy()
    y[-1] *= 3.0
    geo = G.GeodesicSpec.through(x, y)
    rng = np.random.default_rng(1)
    th = rng.normal(size=d - 1)
    th /= np.linalg.norm(th)
    z = G.from_fermi(G.FermiCoords(np.array(u), np.array(h), th), geo, c)
    fc = G.fermi(z, geo, c)
    assert float(fc.u) == pytest.approx(u, abs=1e-8)
    assert float(fc.h) == pytest.approx(h, abs=1e-8)
    assert float(G.dist_to_geodesic(z, geo, c)[0]) == pytest.approx(h, abs=1e-8)


def test_dist_to_line_is_minimum_over_points():
    rng = np.random.default_rng(2)
    x, y = np.array([0.2, -0.3, 1.0]), np.array([1.0, 0.5, 2.0])
    geo = G.GeodesicSpec.through(x, y)
    s = np.linspace(-12, 12, 200001)
    line = geo.point(s)
    for _ in range(5):
        z = np.append(rng.normal(size=2), math.exp(rng.normal()))
        g = float(G.dist_to_geodesic(z, geo)[0])
        assert g == pytest.approx(G.distance(z, line).min(), abs=1e-6)


def test_dist_to_segment_at_least_line():
    x, y = np.array([0.0, 1.0]), np.array([0.0, math.e])
    line = G.GeodesicSpec.through(x, y)
    seg = G.GeodesicSpec.through(x, y, "segment")
    z = np.array([[0.5, 0.2], [0.1, 1.5], [3.0, 5.0], [-0.2, 10.0]])
    gl = G.dist_to_geodesic(z, line)[0]
    gs = G.dist_to_geodesic(z, seg)[0]
    assert np.all(gs >= gl - 1e-12)
    # beyond the far endpoint the segment distance is the endpoint distance
    assert gs[3] == pytest.approx(G.distance(z[3], y))
    # inside the slab both agree
    assert gs[1] == pytest.approx(gl[1])


def test_gradient_of_distance_is_unit_and_correct():
    geo = G.GeodesicSpec.axis(3)
    z = np.array([0.4, -0.3, 1.2])
    g, n = G.dist_to_geodesic(z, geo, 1.5)
    assert float(G.norm(z, n, 1.5)) == pytest.approx(1.0, rel=1e-10)
    e = 1e-6
    step = G.exp_map(z, e * n, 1.5)
    assert float(G.dist_to_geodesic(step, geo, 1.5)[0]) - float(g) == pytest.approx(e, rel=1e-4)


# ------------------------------------------------------------ Laplacian


def fd_laplacian(F, z, c, rel=1e-3):
    d = z.shape[-1]
    hz = rel * z[-1]
    f0 = F(z)
    second, first = 0.0, 0.0
    for i in range(d):
        e = np.zeros(d)
        e[i] = hz
        fp, fm = F(z + e), F(z - e)
        second += (fp - 2 * f0 + fm) / hz**2
        if i == d - 1:
            first = (fp - fm) / (2 * hz)
    return c * c * z[-1] ** 2 * second - (d - 2) * c * c * z[-1] * first


@pytest.mark.parametrize("d", [2, 3, 5])
@pytest.mark.parametrize("c", [1.0, 0.6])
def test_laplacian_matches_finite_differences(d, c):
    rng = np.random.default_rng(d)
    x = np.append(rng.normal(size=d - 1), 1.0)
    y = np.append(rng.normal(size=d - 1), 2.5)
    geo = G.GeodesicSpec.through(x, y)
    F = lambda w: float(G.dist_to_geodesic(w, geo, c)[0]) ** 2
    for _ in range(10):
        z = np.append(rng.normal(size=d - 1), math.exp(rng.normal()))
        if float(G.dist_to_geodesic(z, geo, c)[0]) < 0.05:
            continue
        assert fd_laplacian(F, z, c) == pytest.approx(float(G.laplacian_f(z, geo, c)), rel=1e-4)


def test_laplacian_closed_form_and_axis_value():
    geo = G.GeodesicSpec.axis(2)
    assert float(G.laplacian_f([1.0, 1.0], geo)) == pytest.approx(3.2464505, abs=1e-7)
    for d in (2, 3, 5):
        axis = G.GeodesicSpec.axis(d)
        z = np.zeros(d)
        z[-1] = 2.0
        assert float(G.laplacian_f(z, axis)) == pytest.approx(2.0 * (d - 1))


@given(st.sampled_from([2, 3, 4, 5]), st.floats(0.0, 6.0))
def test_laplacian_lower_bound_and_growth(d, h):
    geo = G.GeodesicSpec.axis(d)
    th = np.zeros(d - 1)
    th[0] = 1.0
    z = G.from_fermi(G.FermiCoords(np.array(0.0), np.array(h), th), geo)
    lap = float(G.laplacian_f(z, geo))
    assert lap >= 2.0 - 1e-12
    # a valid upper bound: 2 + 2h + 2(d-2)(1+h)
    assert lap <= 2 + 2 * h + 2 * (d - 2) * (1 + h) + 1e-9


def test_laplacian_segment_rejected():
    seg = G.GeodesicSpec.axis(2, "segment", 1.0)
    with pytest.raises(ValueError):
        G.laplacian_f([0.0, 1.0], seg)


# ---------------------------------------------------------------- bidisk


def test_bidisk_distance_product():
    u = G.BidiskPoint(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
    v = G.BidiskPoint(np.array([0.0, math.e]), np.array([0.0, math.e**2]))
    assert float(G.bidisk_distance(u, v)) == pytest.approx(math.sqrt(5.0))


def test_bidisk_diag_distance_vectorized_matches_scalar():
    rng = np.random.default_rng(7)
    p1 = np.column_stack([rng.normal(size=50) * 2, np.exp(rng.normal(size=50))])
    p2 = np.column_stack([rng.normal(size=50) * 2, np.exp(rng.normal(size=50) * 2)])
    many = G.bidisk_dist_to_diag_many(p1, p2)
    one = [G.bidisk_dist_to_diag_geodesic(G.BidiskPoint(a, b), tol=1e-12) for a, b in zip(p1, p2)]
    np.testing.assert_allclose(many, one, rtol=1e-7, atol=1e-9)


def test_bidisk_on_diagonal_is_zero():
    p = np.array([[0.0, 3.0]])
    assert G.bidisk_dist_to_diag_many(p, p)[0] == pytest.approx(0.0, abs=1e-10)
    # one component off-axis: distance from that component alone
    q = np.array([[0.0, 1.0]])
    assert G.bidisk_dist_to_diag_many(np.array([[1.0, 1.0]]), q)[0] <= float(G.distance([1.0, 1.0], [0, 1])) + 1e-12
