import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from nil3msq.exact import FmpSol
from nil3msq.geometry import (IsometryNil, as_tau, frame_at, metric_at, rescale_solution, transform_graph)
from nil3msq.domain import Domain2D
from nil3msq.msq import strong_residual

finite = st.floats(-5, 5, allow_nan=False)
taus = st.floats(0, 3, allow_nan=False)


def sympy_metric(tau, p):
    # oracle: expand ds^2 symbolically and read off the coefficient matrix
    x1, x2, x3, d1, d2, d3 = sp.symbols("x1 x2 x3 d1 d2 d3")
    t = sp.nsimplify(tau)
    ds2 = sp.expand(d1**2 + d2**2 + (t * (x2 * d1 - x1 * d2) + d3) ** 2)
    d = (d1, d2, d3)
    g = sp.Matrix(3, 3, lambda i, j: sp.Rational(1, 2) * sp.diff(ds2, d[i], d[j]))
    return np.array(g.subs({x1: sp.nsimplify(p[0]), x2: sp.nsimplify(p[1])}), dtype=float)


def test_metric_identity_at_origin():
    for tau in (0.0, 0.5, 2.0):
        np.testing.assert_array_equal(metric_at(tau, (0.0, 0.0)), np.eye(3))


def test_metric_example_matches_symbolic_expansion():
    expected = np.array([[1, 0, 0], [0, 1.25, -0.5], [0, -0.5, 1]])
    np.testing.assert_allclose(sympy_metric(0.5, (1, 0)), expected, atol=0)
    np.testing.assert_allclose(metric_at(0.5, (1.0, 0.0)), expected, atol=1e-15)


def test_metric_euclidean_case():
    np.testing.assert_array_equal(metric_at(0.0, (3.0, -7.0)), np.eye(3))


@settings(max_examples=100, deadline=None)
@given(taus, finite, finite)
def test_metric_symmetric_positive_definite(tau, x1, x2):
    g = metric_at(tau, (x1, x2))
    np.testing.assert_array_equal(g, g.T)
    assert np.linalg.eigvalsh(g).min() > 0


def test_metric_against_symbolic_at_random_points(rng):
    for _ in range(5):
        tau = float(rng.choice([0.25, 0.5, 1.0]))
        p = np.round(rng.uniform(-3, 3, 2), 3)
        np.testing.assert_allclose(metric_at(tau, p), sympy_metric(tau, p), atol=1e-12)


def test_frame_examples():
    e = frame_at(0.5, (0.0, 0.0))
    np.testing.assert_array_equal(np.array(e), np.eye(3))
    e1, e2, e3 = frame_at(0.5, (2.0, 3.0))
    np.testing.assert_array_equal(e1, [1, 0, -1.5])
    np.testing.assert_array_equal(e2, [0, 1, 1])
    np.testing.assert_array_equal(e3, [0, 0, 1])


def test_frame_orthonormal_at_random_points(rng):
    for _ in range(100):
        tau = rng.uniform(0, 2)
        p = rng.uniform(-10, 10, 2)
        e = np.array(frame_at(tau, p))
        np.testing.assert_allclose(e @ metric_at(tau, p) @ e.T, np.eye(3), atol=1e-12)


@pytest.mark.parametrize("bad", [-0.1, math.inf, math.nan])
def test_tau_validation(bad):
    with pytest.raises(ValueError):
        as_tau(bad)


def test_zero_tau_allowed():
    assert as_tau(0) == 0.0


def random_iso(rng, kind):
    return IsometryNil(kind, rng.uniform(0, 2 * math.pi), complex(*rng.uniform(-2, 2, 2)))


@pytest.mark.parametrize("kind", ["direct", "mirrored"])
def test_isometry_pulls_back_metric(rng, kind):
    # oracle: numerical Jacobian (the map is polynomial of degree 2, so central differences are exact
    # up to round-off) and the pullback identity J^T g(F(p)) J = g(p)
    tau = 0.5
    iso = random_iso(rng, kind)
    for _ in range(20):
        p = rng.uniform(-3, 3, 3)
        step = 1e-3
        jac = np.empty((3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = step
            jac[:, k] = (iso.apply(tau, p + e) - iso.apply(tau, p - e)) / (2 * step)
        img = iso.apply(tau, p)
        np.testing.assert_allclose(jac.T @ metric_at(tau, img[:2]) @ jac, metric_at(tau, p[:2]), atol=1e-9)


@pytest.mark.parametrize("kind", ["direct", "mirrored"])
def test_isometry_inverse_roundtrip(rng, kind):
    iso = random_iso(rng, kind)
    p = rng.uniform(-3, 3, (10, 3))
    np.testing.assert_allclose(iso.inverse().apply(0.7, iso.apply(0.7, p)), p, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 2 * math.pi), finite, finite, st.sampled_from(["direct", "mirrored"]),
       st.lists(finite, min_size=4, max_size=4))
def test_planar_trace_preserves_distances(theta, a, b, kind, xs):
    iso = IsometryNil(kind, theta, complex(a, b))
    p, q = np.array(xs[:2]), np.array(xs[2:])
    d0 = np.hypot(*(p - q))
    d1 = np.hypot(*(iso.plane_map(p) - iso.plane_map(q)))
    assert abs(d0 - d1) <= 1e-12 * max(1.0, d0 + abs(a) + abs(b))


def test_identity_transport_is_identity(rng):
    v = FmpSol(0.7, 0.5)
    dom = Domain2D.rectangle(0, 0, 1, 1)
    vt, dt = transform_graph(IsometryNil(), 0.5, v, dom)
    p = rng.uniform(0, 1, (20, 2))
    np.testing.assert_array_equal(vt(p), v(p))
    assert [a.start for a in dt.arcs] == [a.start for a in dom.arcs]


def test_translation_example():
    # direct evaluation of the transport formula: value tau * Im(conj(c) * i) = c / 2 at (c, 1)
    for c in (1.0, -2.5, 4.0):
        vt, _ = transform_graph(IsometryNil("direct", 0.0, c), 0.5, lambda p: np.zeros(p.shape[:-1]))
        assert vt(np.array([c, 1.0])) == pytest.approx(c / 2, abs=1e-15)


def test_transport_roundtrip(rng):
    tau = 0.5
    iso = random_iso(rng, "direct")
    v = FmpSol(0.3, tau)
    dom = Domain2D.rectangle(0, 0, 1, 2)
    vt, dt = transform_graph(iso, tau, v, dom)
    back, db = transform_graph(iso.inverse(), tau, vt, dt)
    p = rng.uniform(0, 1, (20, 2))
    np.testing.assert_allclose(back(p), v(p), atol=1e-12)
    for a, b in zip(db.arcs, dom.arcs):
        np.testing.assert_allclose(a.start, b.start, atol=1e-12)
    assert db.area() == pytest.approx(dom.area(), rel=1e-12)


def symbolic_transported_residual(iso, tau, a, pts):
    # oracle: build the transported FMP graph in sympy and differentiate it symbolically
    x1, x2 = sp.symbols("x1 x2", real=True)
    t = sp.Float(tau, 30)
    c, s = sp.cos(sp.Float(iso.theta, 30)), sp.sin(sp.Float(iso.theta, 30))
    z0r, z0i = sp.Float(iso.z0.real, 30), sp.Float(iso.z0.imag, 30)
    y1, y2 = x1 - z0r, x2 - z0i
    if iso.mirrored:
        s1, s2 = c * y1 + s * y2, s * y1 - c * y2
    else:
        s1, s2 = c * y1 + s * y2, -s * y1 + c * y2
    w = 2 * t * s2
    base = t * s1 * s2 + a * (w * sp.sqrt(1 + w**2) + sp.asinh(w))
    sign = -1 if iso.mirrored else 1
    ws = s1 - sp.I * s2 if iso.mirrored else s1 + sp.I * s2
    shift = t * sp.im(sp.expand((z0r - sp.I * z0i) * (c + sp.I * s) * ws))
    u = sign * base + shift
    u1, u2 = sp.diff(u, x1), sp.diff(u, x2)
    res = ((1 + (u2 - t * x1) ** 2) * sp.diff(u, x1, 2) - 2 * (u1 + t * x2) * (u2 - t * x1) * sp.diff(u, x1, x2)
           + (1 + (u1 + t * x2) ** 2) * sp.diff(u, x2, 2))
    f = sp.lambdify((x1, x2), res, "mpmath")
    return np.array([float(f(*p)) for p in pts])


@pytest.mark.parametrize("kind", ["direct", "mirrored"])
def test_transport_preserves_minimality(rng, kind):
    tau, a = 0.5, 0.4
    iso = random_iso(rng, kind)
    vt, _ = transform_graph(iso, tau, FmpSol(a, tau))
    src = rng.uniform(-2, 2, (8, 2))
    pts = iso.plane_map(src)
    assert np.max(np.abs(symbolic_transported_residual(iso, tau, a, pts))) < 1e-9
    assert np.max(np.abs(strong_residual(vt.jet(pts), pts, tau))) < 1e-9


def test_transported_jet_matches_finite_differences(rng):
    tau = 0.5
    vt, _ = transform_graph(random_iso(rng, "direct"), tau, FmpSol(0.6, tau))
    p = rng.uniform(-1, 1, (10, 2))
    j = vt.jet(p)
    step = 1e-4
    e1, e2 = np.array([step, 0]), np.array([0, step])
    np.testing.assert_allclose(j.u1, (vt(p + e1) - vt(p - e1)) / (2 * step), atol=1e-6)
    np.testing.assert_allclose(j.u2, (vt(p + e2) - vt(p - e2)) / (2 * step), atol=1e-6)
    np.testing.assert_allclose(j.u11, (vt(p + e1) - 2 * vt(p) + vt(p - e1)) / step**2, atol=1e-4)


def test_rescale_quadratic_member(rng):
    base = FmpSol(0.0, 0.5)
    for tau in (0.25, 1.0, 2.0):
        v = rescale_solution(base, tau)
        y = rng.uniform(-3, 3, (10, 2))
        np.testing.assert_allclose(v(y), tau * y[:, 0] * y[:, 1], rtol=1e-14, atol=1e-14)


def test_rescale_identity(rng):
    base = FmpSol(0.8, 0.5)
    y = rng.uniform(-3, 3, (10, 2))
    np.testing.assert_array_equal(rescale_solution(base, 0.5)(y), base(y))


def test_rescale_rejects_zero():
    with pytest.raises(ValueError):
        rescale_solution(FmpSol(0.0, 0.5), 0.0)


@pytest.mark.parametrize("a", [-2.0, -1.0, 0.0, 1.0, 2.0])
def test_rescaled_fmp_is_a_solution(rng, a):
    for tau in (0.25, 1.0):
        v = rescale_solution(FmpSol(a, 0.5), tau)
        y = rng.uniform(-1, 1, (50, 2))
        assert np.max(np.abs(strong_residual(v.jet(y), y, tau))) < 1e-9
