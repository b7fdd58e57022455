import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from bm_lab.body import (
    BodyFamily,
    SupportFunction,
    ball,
    ellipse,
    family_at,
    log_sum,
    lp_sum,
    translate,
    validate_in_S,
)
from bm_lab.errors import NotConvexError, OriginOutsideError, UsageError
from bm_lab.phispec import field_from_terms, format_phi, parse_phi
from bm_lab.spherical import FieldOnSphere, build_grid


def ellipsoid(a, b, c, res):
    g = build_grid(3, res)
    x, y, z = g.nodes.T
    return SupportFunction(g, np.sqrt(a * a * x * x + b * b * y * y + c * c * z * z))


@pytest.mark.parametrize("n,res", [(2, 64), (3, 16)])
def test_unit_ball_geometry(n, res):
    geo = validate_in_S(ball(n, res))
    eye = np.broadcast_to(np.eye(n - 1), geo.Q.shape)
    assert_allclose(geo.Q, eye, atol=1e-12)
    assert_allclose(geo.kappa, 1.0, atol=1e-12)
    assert_allclose(geo.F, geo.grid.nodes, atol=1e-12)


@pytest.mark.parametrize("n,res", [(2, 64), (3, 16)])
def test_homothetic_ball(n, res):
    r = 1.7
    geo = validate_in_S(ball(n, res, r))
    assert_allclose(geo.Q, r * np.broadcast_to(np.eye(n - 1), geo.Q.shape), atol=1e-10)
    assert_allclose(geo.kappa, r ** (-(n - 1)), rtol=1e-10)


def test_ellipse_reverse_weingarten_at_zero():
    geo = validate_in_S(ellipse(1.5, 1.0, 64))
    assert_allclose(geo.Q[0, 0, 0], 1.0 / 1.5, rtol=1e-9)


def test_ellipse_boundary_and_curvature():
    a, b = 1.5, 1.0
    h = ellipse(a, b, 64)
    geo = validate_in_S(h)
    x, y = geo.F.T
    assert_allclose(x**2 / a**2 + y**2 / b**2, 1.0, atol=1e-11)
    # curvature of an ellipse in terms of its support function
    # spectral truncation of the non-polynomial h limits this to ~1e-10
    assert_allclose(geo.kappa, h.values**3 / (a * b) ** 2, rtol=1e-9)
    assert_allclose(np.sum(geo.grid.nodes * geo.F, axis=1), h.values, atol=1e-12)
    assert_allclose(geo.kappa * geo.surface_density, 1.0, atol=1e-12)


def test_ellipsoid_curvature_and_boundary():
    a, b, c = 1.3, 1.0, 0.8
    h = ellipsoid(a, b, c, 28)
    geo = validate_in_S(h)
    x, y, z = geo.F.T
    assert_allclose(x**2 / a**2 + y**2 / b**2 + z**2 / c**2, 1.0, atol=1e-9)
    assert_allclose(geo.kappa, h.values**4 / (a * b * c) ** 2, rtol=1e-7)
    assert_allclose(geo.Q, np.swapaxes(geo.Q, 1, 2))
    assert_allclose(np.sum(geo.grid.nodes * geo.F, axis=1), h.values, atol=1e-12)
    # tr(cofactor) = sum of principal radii of curvature = tr Q
    assert_allclose(geo.trace_cofactor, np.trace(geo.Q, axis1=1, axis2=2), rtol=1e-12)


def test_not_convex_reports_worst_node():
    g = build_grid(2, 64)
    h = SupportFunction(g, 1 + 0.2 * np.cos(2 * g.theta))  # h''+h = 1 - 0.6 cos 2t
    geo = validate_in_S(h)
    assert geo.min_eigenvalue.min() > 0
    bad = SupportFunction(g, 1 + 0.5 * np.cos(2 * g.theta))  # 1 - 1.5 cos 2t < 0 at t=0
    with pytest.raises(NotConvexError) as err:
        validate_in_S(bad)
    assert err.value.node in (0, 32)
    assert_allclose(err.value.eigenvalue, -0.5, rtol=1e-10)


@pytest.mark.parametrize("n,res", [(2, 64), (3, 16)])
def test_translation_leaves_Q_unchanged(n, res):
    h = ellipse(1.5, 1.0, 64) if n == 2 else ellipsoid(1.2, 1.0, 0.9, res)
    v = np.array([0.3, -0.1] if n == 2 else [0.1, 0.2, -0.15])
    g0 = validate_in_S(h)
    g1 = validate_in_S(translate(h, v))
    assert np.max(np.abs(g1.Q - g0.Q)) < 1e-10
    assert_allclose(g1.F, g0.F + v, atol=1e-10)


def test_translate_examples():
    h = ball(2, 32)
    assert translate(h, [0.0, 0.0]).values is not None
    assert_allclose(translate(h, [0, 0]).values, h.values)
    t = translate(h, [0.3, 0.0])
    assert_allclose(t.values, 1 + 0.3 * np.cos(h.grid.theta), atol=1e-15)
    assert t.parity == "none"
    with pytest.raises(OriginOutsideError):
        translate(h, [1.2, 0.0])


@pytest.mark.parametrize("n,res", [(2, 64), (3, 16)])
def test_scaling_of_geometry(n, res):
    h = ellipse(1.5, 1.0, 64) if n == 2 else ellipsoid(1.2, 1.0, 0.9, res)
    m = 2.5
    g0, g1 = validate_in_S(h), validate_in_S(h.scaled(m))
    assert_allclose(g1.Q, m * g0.Q, rtol=1e-12, atol=1e-13)
    assert_allclose(g1.kappa, g0.kappa * m ** (-(n - 1)), rtol=1e-12)
    assert_allclose(g1.surface_density, g0.surface_density * m ** (n - 1), rtol=1e-12)


def test_lp_sum_examples():
    h1, h2 = ball(2, 32, 1.0), ball(2, 32, 2.0)
    mid = lp_sum(h1, h2, 0.5, 0.5)
    assert_allclose(mid.values, ((1 + math.sqrt(2)) / 2) ** 2, rtol=1e-14)
    assert_allclose(((1 + math.sqrt(2)) / 2) ** 2, 1.45711, rtol=1e-5)
    assert lp_sum(h1, h2, 0.5, 0.0) is h1
    e = ellipse(1.5, 1.0, 32)
    for p in (0.5, 1.0, 3.0):
        for s in (0.2, 0.7):
            assert_allclose(lp_sum(e, e, p, s).values, e.values, rtol=1e-14)


def test_log_sum_examples():
    h1, h2 = ball(2, 32, 1.0), ball(2, 32, math.e)
    assert_allclose(log_sum(h1, h2, 0.5).values, math.exp(0.5), rtol=1e-14)
    assert log_sum(h1, h2, 1.0) is h2
    e = ellipse(1.5, 1.0, 32)
    assert_allclose(log_sum(e, e, 0.3).values, e.values, rtol=1e-14)


def test_lp_sum_monotone_in_s():
    h1 = ellipse(1.2, 1.0, 32)
    h2 = h1.scaled(1.5)
    prev = h1.values
    for s in np.linspace(0.1, 1.0, 10):
        cur = lp_sum(h1, h2, 0.7, float(s)).values
        assert np.all(cur >= prev - 1e-14)
        prev = cur


def test_lp_sum_outside_class_is_rejected():
    # two orthogonal 3:1 ellipses; their L_0.05 midpoint is not a support function
    g = build_grid(2, 64)
    h1 = ellipse(3.0, 1.0, 64)
    h2 = SupportFunction(g, np.sqrt(np.cos(g.theta) ** 2 + 9.0 * np.sin(g.theta) ** 2))
    validate_in_S(h1)
    validate_in_S(h2)
    with pytest.raises(NotConvexError):
        lp_sum(h1, h2, 0.05, 0.5)
    lp_sum(h1, h2, 1.0, 0.5)


def _random_body(seed, res=32):
    rng = np.random.default_rng(seed)
    g = build_grid(2, res)
    t = g.theta
    vals = 1.0 + sum(rng.uniform(-0.015, 0.015) * np.cos(k * t + rng.uniform(0, 6)) for k in (2, 4, 6))
    vals = 0.5 * (vals + vals[g.antipode])
    return SupportFunction(g, vals * rng.uniform(0.5, 2.0))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6), st.floats(1.0, 6.0), st.floats(0.0, 1.0))
def test_firey_sum_stays_convex(seed1, seed2, p, s):
    h1, h2 = _random_body(seed1), _random_body(seed2)
    validate_in_S(h1)
    validate_in_S(h2)
    validate_in_S(lp_sum(h1, h2, p, s))


def test_family_examples():
    g = build_grid(2, 32)
    one = FieldOnSphere(g, np.ones(g.size), "even")
    fam = BodyFamily("lp", ball(2, 32), one, 0.5, 0.2)
    assert family_at(fam, 0.0) is fam.base
    assert_allclose(family_at(fam, 0.1).values, 1.21, rtol=1e-14)
    logdir = FieldOnSphere(g, np.cos(2 * g.theta), "even")
    fam2 = BodyFamily("log", ball(2, 32), logdir, None, 0.2)
    assert_allclose(family_at(fam2, 0.15).values, np.exp(0.15 * np.cos(2 * g.theta)), rtol=1e-14)
    with pytest.raises(ValueError):
        family_at(fam2, 0.3)


def test_family_continuity():
    g = build_grid(2, 32)
    f = FieldOnSphere(g, 1 + 0.2 * np.cos(2 * g.theta), "even")
    fam = BodyFamily("lp", ellipse(1.2, 1.0, 32), f, 0.5, 0.05)
    a = family_at(fam, 0.02).values
    b = family_at(fam, 0.02 + 1e-6).values
    assert np.max(np.abs(a - b)) < 1e-5


def test_family_derivatives_match_finite_differences():
    g = build_grid(2, 32)
    f = FieldOnSphere(g, 1 + 0.2 * np.cos(2 * g.theta), "even")
    for mode, p in (("lp", 0.5), ("lp", 2.0), ("log", None)):
        fam = BodyFamily(mode, ellipse(1.2, 1.0, 32), f, p, 0.01)
        d1, d2 = fam.derivatives()
        e = 1e-4
        hp, h0, hm = family_at(fam, e).values, fam.base.values, family_at(fam, -e).values
        assert_allclose(d1, (hp - hm) / (2 * e), rtol=1e-7)
        assert_allclose(d2, (hp - 2 * h0 + hm) / e**2, rtol=1e-5, atol=1e-6)


@pytest.mark.parametrize("n,res", [(2, 32), (3, 12)])
def test_json_roundtrip_exact(n, res):
    terms = [(0, 0, 1.0), (2, 0, 0.05), (2, 1, -0.02)] if n == 2 else [(0, 0, 1.0), (2, -1, 0.03), (4, 2, 0.01)]
    h = SupportFunction.from_terms(n, res, terms)
    text = h.to_json()
    h2 = SupportFunction.from_json(text)
    assert h2.to_json() == text
    assert np.array_equal(h2.values, h.values)


def test_json_from_samples_roundtrip():
    h = ellipse(1.3, 1.0, 32)
    text = h.to_json()
    h2 = SupportFunction.from_json(text)
    # samples are stored as a band-limited expansion; the dropped tail is ~1e-9 here
    assert_allclose(h2.values, h.values, rtol=1e-8)
    assert SupportFunction.from_json(h2.to_json()).to_json() == h2.to_json()


def test_phi_spec_parsing():
    assert parse_phi("l2:1.0", 2) == [(2, 0, 1.0)]
    assert parse_phi("l0:1; l4,m1:-0.5", 2) == [(0, 0, 1.0), (4, 1, -0.5)]
    assert parse_phi("l2,m-2:0.3", 3) == [(2, -2, 0.3)]
    for bad in ("", "  ", "x2:1", "l2,m3:1"):
        with pytest.raises(UsageError):
            parse_phi(bad, 2)
    assert parse_phi(format_phi([(2, 1, 0.25)]), 2) == [(2, 1, 0.25)]


def test_phi_amplitude_conventions():
    g2 = build_grid(2, 32)
    f = field_from_terms([(2, 0, 1.0), (4, 1, 0.5)], g2)
    assert_allclose(f.values, np.cos(2 * g2.theta) + 0.5 * np.sin(4 * g2.theta), atol=1e-14)
    assert f.parity == "even"
    g3 = build_grid(3, 12)
    z = g3.nodes[:, 2]
    assert_allclose(field_from_terms([(2, 0, 1.0)], g3).values, 0.5 * (3 * z * z - 1), atol=1e-13)
