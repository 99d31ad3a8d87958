import math
import warnings

import numpy as np
import pytest

from nil3msq.domain import BoundaryData, Domain2D
from nil3msq.exact import FmpSol, solve_waist_equation
from nil3msq.experiments import (
    InvariantViolation,
    barrier_dominates,
    bounded_odd_example,
    build_barrier,
    comparison_surface,
    fit_growth,
    fmp_constant,
    is_convex_point,
    isometry_defect,
    run_dirichlet,
    run_halfplane,
    run_nonexistence_probe,
    run_reflection,
    run_scherk,
    run_wedge_growth,
    scaling_defect,
    shadow_first_contact,
)
from nil3msq.fem import newton_solve
from nil3msq.geometry import IsometryNil
from nil3msq.mesh import triangulate

SQUARE = Domain2D.rectangle(0, 0, 1, 1)
L_SHAPE = [(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]


def smooth_data(p):
    p = np.asarray(p, dtype=float)
    return p[..., 0] ** 2 - p[..., 1] + 0.5 * np.sin(3 * p[..., 0] * p[..., 1])


# ---------------------------------------------------------------------------
# growth fits


def test_fit_growth_quadratic_member():
    tau = 0.5
    rep = fit_growth(FmpSol(0.0, tau), (2, 4, 8, 16))
    # sup of tau x1 x2 over the quarter circle of radius R is tau R^2 / 2 at 45 degrees
    assert rep.fitted_exponent == pytest.approx(2.0, abs=1e-6)
    assert rep.fitted_coefficient == pytest.approx(tau / 2, rel=1e-6)


def test_fit_growth_plane_and_constant():
    plane = fit_growth(lambda p: 3 * p[..., 0] + 4 * p[..., 1], (1, 2, 4))
    assert plane.fitted_exponent == pytest.approx(1.0, abs=1e-6)
    assert plane.fitted_coefficient == pytest.approx(5.0, rel=1e-5)
    const = fit_growth(lambda p: np.full(p.shape[:-1], 2.5), (1, 2, 4))
    assert const.fitted_exponent == pytest.approx(0.0, abs=1e-12)
    assert const.fitted_coefficient == pytest.approx(2.5, rel=1e-12)


def test_fit_growth_degenerate_inputs():
    rep = fit_growth([0.0, 0.0, 0.0], (1, 2, 3))
    assert rep.fitted_exponent is None and rep.fitted_coefficient is None
    assert "fitted_exponent = none" in rep.as_lines()
    with pytest.raises(ValueError):
        fit_growth([1.0, 2.0], (1, 2))
    with pytest.raises(ValueError):
        fit_growth([1.0, 2.0, 3.0], (3, 2, 1))


def test_comparison_surface_is_rotated_quadratic():
    tau = 0.7
    s = comparison_surface(tau)
    rng = np.random.default_rng(3)
    y = rng.normal(size=(50, 2))
    # rotating about the vertical axis is an isometry without height shift
    np.testing.assert_allclose(s(y), tau * (y[:, 1] ** 2 - y[:, 0] ** 2) / 2, atol=1e-12)


def test_small_wedge_run_stays_above_comparison():
    run = run_wedge_growth(math.pi / 2, 0.0, 0.5, n_list=(8, 16), radii=(2, 4, 6), divisions=32)
    assert run.comparison_ok
    assert run.report.fitted_exponent == pytest.approx(2.0, abs=0.05)


def test_wedge_rejects_bad_parameters():
    with pytest.raises(ValueError):
        run_wedge_growth(math.pi / 3, 0.0, 0.5)
    with pytest.raises(ValueError):
        run_wedge_growth(math.pi / 2, 0.0, 0.5, n_list=(8, 16), radii=(2, 4, 20))


# ---------------------------------------------------------------------------
# bounded drivers


def test_run_dirichlet_fmp_square():
    exact = FmpSol(1.0, 0.5)
    u, rep = run_dirichlet(SQUARE, BoundaryData.from_function(SQUARE, exact), 0.5, 0.02)
    assert rep.converged
    assert np.max(np.abs(u.values - exact(u.mesh.vertices))) < 5e-3


def test_run_dirichlet_warns_on_nonconvex():
    dom = Domain2D.polygon(L_SHAPE)
    with pytest.warns(UserWarning, match="not convex"):
        run_dirichlet(dom, BoundaryData.constant(dom, 0.0), 0.5, 0.3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        run_dirichlet(SQUARE, BoundaryData.constant(SQUARE, 0.0), 0.5, 0.3)


def test_small_scherk_sequence():
    dom = Domain2D.triangle((0, 0), (1, 0), (0.5, 0.85))
    run = run_scherk(dom, 0.0, 0.5, (1, 2, 4), h=0.1, h_min=0.005)
    assert run.ns == [1.0, 2.0, 4.0]
    assert all(m > n / 2 for m, n in zip(run.gamma_adjacent_min, run.ns))
    assert run.probe_change(1, 2) < run.probe_change(0, 1)
    assert run.max_violation >= 0.0
    if not run.monotone:
        with pytest.raises(InvariantViolation):
            run_scherk(dom, 0.0, 0.5, (1, 2, 4), h=0.1, h_min=0.005, strict=True)


def test_scherk_needs_gamma_side():
    with pytest.raises(ValueError):
        run_scherk(SQUARE, 0.0, 0.5, (1, 2), h=0.2)


# ---------------------------------------------------------------------------
# barriers


def test_upper_and_lower_barriers_at_square_midpoint():
    phi = BoundaryData.from_function(SQUARE, smooth_data)
    u, _ = newton_solve(triangulate(SQUARE, 0.05), phi, 0.5)
    M = float(np.max(np.abs(u.values)))
    for lower in (False, True):
        # the base side is short enough that the data on it stays within 1/k of phi(p0)
        bar = build_barrier(SQUARE, (0.5, 0.0), phi, M, 4, 0.5, 0.02, half_width=0.1, height=0.1, lower=lower)
        assert bar.value_at_p0 == pytest.approx(bar.level, abs=1e-12)
        assert bar.level == pytest.approx(smooth_data(np.array([0.5, 0.0])) + (-0.25 if lower else 0.25))
        assert bar.one_sided_margin() >= -1e-8
        ok, worst = barrier_dominates(bar, u)
        assert ok, worst


def test_barrier_rejects_nonconvex_point():
    dom = Domain2D.polygon(L_SHAPE)
    assert not is_convex_point(dom, (1.1, 1.0), radius=0.5)
    assert is_convex_point(dom, (0.5, 0.0), radius=0.5)
    with pytest.raises(InvariantViolation):
        build_barrier(dom, (1.1, 1.0), BoundaryData.constant(dom, 0.0), 1.0, 1, 0.5, 0.05,
                      half_width=0.1, height=0.1)
    with pytest.raises(ValueError):
        build_barrier(SQUARE, (0.5, 0.5), BoundaryData.constant(SQUARE, 0.0), 1.0, 1, 0.5, 0.1)


# ---------------------------------------------------------------------------
# unbounded drivers


def test_small_halfplane_run_is_bracketed():
    run = run_halfplane(0.0, 0.5, n_list=(4, 8), h=0.5)
    assert run.brackets_ok
    assert len(run.level_changes) == 1
    u, rep = run
    assert rep.converged and u is run.field


def test_halfplane_probe_must_fit():
    with pytest.raises(ValueError):
        run_halfplane(0.0, 0.5, n_list=(2, 8))


def test_small_reflection_run():
    run = run_reflection(bounded_odd_example, 0.5, h=0.1, L=2.0)
    assert run.seam_ok
    assert run.sup_abs <= run.M + 1e-8
    # the glued field is odd in x1
    x = run.field.mesh.vertices
    pts = x[x[:, 0] > 0.1][:20]
    np.testing.assert_allclose(run.field(pts * [-1, 1]), -run.field(pts), atol=1e-12)


def test_reflection_rejects_even_data():
    with pytest.raises(ValueError):
        run_reflection(lambda x: np.abs(x), 0.5, h=0.2, L=1.0)


# ---------------------------------------------------------------------------
# notched domain


def test_shadow_contact_geometry():
    dom = Domain2D.notched_rectangle()
    g = shadow_first_contact(dom)
    assert g.mu == pytest.approx(solve_waist_equation(g.B, g.eps), rel=1e-14)
    assert g.waist_residual < 1e-12
    assert g.mu < g.mu_prime < g.mu + g.eps / 4
    assert g.tangency_distance < 1e-9
    assert g.penetration < 1e-9


def test_nonexistence_probe_needs_nonconvex_domain():
    with pytest.raises(ValueError):
        run_nonexistence_probe(SQUARE)


# ---------------------------------------------------------------------------
# symmetries


def test_isometry_defect_within_calibrated_tolerance():
    h = 0.1
    tol = 10 * h * h * fmp_constant(h)
    for iso in (IsometryNil("direct", 0.7, 1.5 - 0.5j), IsometryNil("mirrored", 2.1, -1 + 2j)):
        assert isometry_defect(smooth_data, iso, 0.5, h) <= tol


def test_scaling_defect_within_calibrated_tolerance():
    h = 0.1
    tol = 10 * h * h * fmp_constant(h)
    for tau in (0.25, 1.0):
        assert scaling_defect(smooth_data, tau, h) <= tol
    with pytest.raises(ValueError):
        scaling_defect(smooth_data, 0.0, h)
