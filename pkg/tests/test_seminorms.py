import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracspde.fields import GridSpec, field_from_function
from fracspde.seminorms import (
    DomainSpec,
    ParabolicPoint,
    atype_constant,
    campanato_at,
    campanato_holder_ratio,
    campanato_seminorm,
    cylinder,
    diverges,
    embedding_gamma,
    holder_at,
    holder_seminorm,
    parabolic_dist,
    parabolic_dist_array,
    spatial_holder_seminorm,
)


def unit_field(func, n):
    return field_from_function(func, GridSpec(1.0, n, 1.0, n, 0.0))


def abs_power(gamma, n):
    return field_from_function(lambda t, x: np.abs(x) ** gamma + 0 * t, GridSpec(1.0, n, 2.0, n, -1.0))


# ---------------------------------------------------------------- metric


def test_parabolic_dist_examples():
    assert parabolic_dist((0, 0), (0, 1)) == 1
    assert parabolic_dist((0, 0), (0.25, 0.3)) == pytest.approx(0.5)
    assert parabolic_dist(ParabolicPoint(1.0, (0.0, 0.0)), ParabolicPoint(1.0, (3.0, 4.0))) == 5.0


def test_parabolic_point_rejects_nan():
    with pytest.raises(ValueError):
        ParabolicPoint(float("nan"), 0.0)


def test_triangle_bound_random_triples(rng):
    t = rng.uniform(0, 2, (3, 10_000))
    x = rng.uniform(-2, 2, (3, 10_000))
    dxy = parabolic_dist_array(t[0], x[0], t[1], x[1])
    dyz = parabolic_dist_array(t[1], x[1], t[2], x[2])
    dxz = parabolic_dist_array(t[0], x[0], t[2], x[2])
    assert np.all(dxz <= dxy + dyz + 1e-12)
    assert np.array_equal(dxy, parabolic_dist_array(t[1], x[1], t[0], x[0]))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6))
def test_metric_properties(c):
    X, Y, Z = (c[0], c[1]), (c[2], c[3]), (c[4], c[5])
    assert parabolic_dist(X, Y) == parabolic_dist(Y, X) >= 0
    assert parabolic_dist(X, X) == 0
    assert parabolic_dist(X, Z) <= parabolic_dist(X, Y) + parabolic_dist(Y, Z) + 1e-12


def test_cylinder_examples():
    q = cylinder((0.0, 0.0), 0.8)
    assert q.contains((0.16, 0.0)) and q.contains((0.0, 0.4))  # delta = c/2
    assert q.measure == pytest.approx(4 * 0.8**3)
    with pytest.raises(ValueError):
        cylinder((0, 0), 0.0)


def test_cylinder_membership_matches_box(rng):
    n = 100_000
    X = rng.uniform(-1, 1, (n, 2))
    Y = rng.uniform(-1, 1, (n, 2))
    c = rng.uniform(0.05, 1.0, n)
    box = (np.abs(Y[:, 0] - X[:, 0]) < c**2) & (np.abs(Y[:, 1] - X[:, 1]) < c)
    metric = parabolic_dist_array(X[:, 0], X[:, 1], Y[:, 0], Y[:, 1]) < c
    assert np.array_equal(box, metric)
    for k in range(200):
        assert cylinder(tuple(X[k]), c[k]).contains(tuple(Y[k])) == box[k]


# ---------------------------------------------------------------- Campanato


@pytest.mark.parametrize("p,theta", [(1, 0.5), (2, 1.0), (4, 1.7)])
def test_campanato_constant_zero(p, theta):
    rep = campanato_seminorm(unit_field(lambda t, x: 3.0 + 0 * (t + x), 32), None, p, theta)
    assert rep.value == 0.0


def test_campanato_linear_field_refinement():
    # oracle: the largest cylinder covers the box, value = std of x = 1/sqrt(12)
    vals = [campanato_seminorm(unit_field(lambda t, x: x + 0 * t, n), None, 2, 1.0).value for n in (64, 128)]
    assert vals[1] == pytest.approx(vals[0], rel=0.05)
    assert vals[1] == pytest.approx(1 / math.sqrt(12), rel=0.05)


def test_campanato_finite_at_embedding_exponent():
    vals = [campanato_seminorm(abs_power(0.5, n), None, 2, 4 / 3).value for n in (64, 128, 256)]
    assert np.all(np.isfinite(vals))
    assert not diverges(vals)


def test_campanato_grows_above_embedding_exponent():
    # theta = 1.5 corresponds to gamma = 0.75 > 1/2: the value grows like
    # 2^((theta - 4/3)(d + 2)/p) = 2^(1/4) per doubling
    vals = np.array([campanato_seminorm(abs_power(0.5, n), None, 2, 1.5).value for n in (64, 128, 256)])
    growth = vals[1:] / vals[:-1]
    assert np.all(growth > 1.0)
    np.testing.assert_allclose(growth, 2**0.25, rtol=0.05)
    steep = [campanato_seminorm(abs_power(0.5, n), None, 2, 2.0).value for n in (64, 128, 256)]
    assert diverges(steep)


def test_campanato_witness_and_scaling():
    u = abs_power(0.5, 64)
    rep = campanato_seminorm(u, None, 2, 4 / 3)
    assert campanato_at(u, None, 2, 4 / 3, rep.witness) == rep.value
    scaled = campanato_seminorm(u.scaled(-2.5), None, 2, 4 / 3)
    assert scaled.value == pytest.approx(2.5 * rep.value, rel=1e-13)
    assert rep.summary()["value"] == rep.value


def test_campanato_monotone_in_sample_set():
    u = abs_power(0.3, 64)
    dom = DomainSpec.from_field(u)
    few = campanato_seminorm(u, dom, 2, 1.2, center_stride=8)
    many = campanato_seminorm(u, dom, 2, 1.2, center_stride=4)
    assert many.value >= few.value
    radii = dom.diameter * 2.0 ** -np.arange(3)
    assert campanato_seminorm(u, dom, 2, 1.2, radii=radii[:2]).value <= campanato_seminorm(u, dom, 2, 1.2,
                                                                                          radii=radii).value


def test_campanato_skips_empty_intersections():
    u = unit_field(lambda t, x: x + 0 * t, 16)
    rep = campanato_seminorm(u, None, 2, 1.0, centers=[(0.5, 5.0)], radii=[0.1])
    assert rep.skipped == 1 and rep.value == 0.0


def test_campanato_rejects_large_radius():
    u = unit_field(lambda t, x: x + 0 * t, 16)
    with pytest.raises(ValueError):
        campanato_seminorm(u, None, 2, 1.0, radii=[5.0])


@pytest.mark.parametrize("gamma", [0.3, 0.5, 0.7])
def test_campanato_holder_ratio_bounded(gamma):
    ratio, camp, hold = campanato_holder_ratio(abs_power(gamma, 64), None, 2, gamma)
    assert 0.1 <= ratio <= 10


# ---------------------------------------------------------------- Hölder


def test_holder_linear_in_space():
    u = unit_field(lambda t, x: x + 0 * t, 32)
    rep = holder_seminorm(u, None, 1.0)
    assert rep.value == pytest.approx(1.0, rel=1e-12)
    (t1, _), (t2, _) = rep.witness["X"], rep.witness["Y"]
    assert t1 == t2
    assert holder_at(u, 1.0, rep.witness) == pytest.approx(rep.value, rel=1e-14)


def test_holder_constant_zero():
    assert holder_seminorm(unit_field(lambda t, x: 0 * (t + x) - 1, 16), None, 0.5).value == 0.0


def test_holder_linear_in_time():
    # sup |t - s| / |t - s|^(1/2) at x = y is attained at |t - s| = 1
    rep = holder_seminorm(unit_field(lambda t, x: t + 0 * x, 64), None, 1.0)
    assert rep.value == pytest.approx(1.0, rel=1e-12)


def test_holder_scaling_and_range():
    u = abs_power(0.5, 64)
    a = holder_seminorm(u, None, 0.5).value
    b = holder_seminorm(u.scaled(-3.0), None, 0.5).value
    assert b == pytest.approx(3 * a, rel=1e-13)
    with pytest.raises(ValueError):
        holder_seminorm(u, None, 1.5)


def test_spatial_holder_seminorm_power():
    x = np.linspace(-1, 1, 257)
    val = spatial_holder_seminorm(np.abs(x) ** 0.5, x[1] - x[0], 0.5, periodic=False)
    assert val == pytest.approx(1.0, rel=1e-6)


# ---------------------------------------------------------------- A-type


def test_atype_interior():
    dom = DomainSpec(1.0, ((0.0, 1.0),))
    assert atype_constant(dom, [(0.5, 0.5)], [0.05, 0.1]) == pytest.approx(1.0)
    assert dom.atype_constant_hat == pytest.approx(1.0)


def test_atype_corner():
    dom = DomainSpec(1.0, ((0.0, 1.0),))
    assert atype_constant(dom, [(0.0, 0.0)], [0.1, 0.3]) == pytest.approx(0.25)


def _brute_measure(dom, center, rho, n=400):
    t = np.linspace(center[0] - rho**2, center[0] + rho**2, n, endpoint=False) + rho**2 / n
    x = np.linspace(center[1] - rho, center[1] + rho, n, endpoint=False) + rho / n
    T, X = np.meshgrid(t, x, indexing="ij")
    inside = (T > dom.t_min) & (T < dom.t_max) & (X > dom.box[0][0]) & (X < dom.box[0][1])
    return inside.mean()


@pytest.mark.parametrize("box,T", [(((0.0, 1.0),), 1.0), (((-2.0, 1.0),), 9.0), (((0.0, 0.5),), 0.5)])
def test_atype_lower_bound_scan(box, T):
    dom = DomainSpec(T, box)
    lo, hi = box[0]
    centers = [(t, x) for t in (0.0, T / 2, T) for x in (lo, (lo + hi) / 2, hi)]
    radii = dom.diameter * 2.0 ** -np.arange(5)
    a = atype_constant(dom, centers, radii)
    assert a >= 2.0 ** -3 - 1e-12
    for c in centers[:3]:
        assert atype_constant(DomainSpec(T, box), [c], [radii[2]]) == pytest.approx(
            _brute_measure(dom, c, radii[2]), abs=5e-3)


def test_atype_two_dimensional_square():
    dom = DomainSpec(2.0, ((0.0, 1.0), (0.0, 1.0)))
    corner = atype_constant(dom, [(0.0, (0.0, 0.0))], [0.2])
    # half the time extent times a quarter disc
    assert corner == pytest.approx(0.125)
    assert atype_constant(dom, [(1.0, (0.5, 0.5))], [0.1]) == pytest.approx(1.0)


# ---------------------------------------------------------------- embedding


def test_embedding_gamma_examples():
    assert embedding_gamma(3, 1.3, 1) == pytest.approx(0.3)
    assert embedding_gamma(3, 2.0, 1) == pytest.approx(1.0)
    assert embedding_gamma(3, 1 + 1e-9, 1) < 1e-8
    for theta in (1.0, 2.5):
        with pytest.raises(ValueError):
            embedding_gamma(3, theta, 1)


@settings(max_examples=100, deadline=None)
@given(p=st.floats(1, 40), frac=st.floats(1e-6, 1.0), d=st.sampled_from([1, 2]))
def test_embedding_gamma_range(p, frac, d):
    theta = 1 + frac * p / (d + 2)
    g = embedding_gamma(p, theta, d)
    assert 0 < g <= 1
    assert g == pytest.approx(frac, rel=1e-9)
