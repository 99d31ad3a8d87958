"""Acceptance suite: one PASS/FAIL line per criterion at the contract tolerances.

CLI-driven criteria run the installed console script and read only exit codes,
``report.txt`` and the ``.dat`` tables. Each run is cached for the session so
that the determinism criterion can repeat it into a second directory.
"""
import math
import shutil
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from nil3msq.domain import BoundaryData, Domain2D
from nil3msq.experiments import fmp_constant, isometry_defect, scaling_defect
from nil3msq.fem import check_comparison, newton_solve
from nil3msq.geometry import IsometryNil
from nil3msq.mesh import triangulate

pytestmark = pytest.mark.slow

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
_EXE = shutil.which("nil3msq")
_CMD = [_EXE] if _EXE else [sys.executable, "-m", "nil3msq.cli"]

# (experiment, config stem) for every CLI run used by a criterion
RUNS = {
    "verify": ("verify", "verify"),
    "fmp_order": ("dirichlet", "dirichlet_fmp_order"),
    "catenoid_fem": ("dirichlet", "catenoid_fem"),
    "catenoid": ("catenoid", "catenoid"),
    "scherk": ("scherk", "scherk"),
    "wedge": ("wedge", "wedge"),
    "growth": ("growth", "growth"),
    "halfplane": ("halfplane", "halfplane"),
    "reflect": ("reflect", "reflect"),
    "nonexist": ("nonexist", "nonexist"),
}


class CliRun:
    def __init__(self, code, out, seconds):
        self.code, self.out, self.seconds = code, out, seconds
        self.report = {}
        if (out / "report.txt").exists():
            for line in (out / "report.txt").read_text().splitlines():
                k, _, v = line.partition(" = ")
                self.report[k] = v

    def f(self, key):
        return float(self.report[key])

    def passed(self, check):
        return self.report.get(f"check.{check}") == "pass"


def invoke(name, out):
    exp, stem = RUNS[name]
    t = time.perf_counter()
    res = subprocess.run(_CMD + [exp, "--config", str(CONFIGS / f"{stem}.cfg"), "--out", str(out)],
                         capture_output=True, text=True, check=False)
    return CliRun(res.returncode, out, time.perf_counter() - t)


@pytest.fixture(scope="session")
def cli_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("acceptance")
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = invoke(name, base / name)
        return cache[name]

    get.base = base
    return get


# ---------------------------------------------------------------------------
# criteria


def test_criterion_01_exact_family_residuals(cli_runs, record):
    r = cli_runs("verify")
    res = {k: r.f(f"max_residual.{k}") for k in ("plane", "fmp", "daniel", "catenoid")}
    ok = r.code == 0 and max(res.values()) < 1e-9 and r.seconds < 5
    detail = " ".join(f"{k}={v:.1e}" for k, v in res.items())
    assert record(1, ok, f"exact residuals {detail} (tol 1e-9; tau x1 x2 is fmp a=0), {r.seconds:.1f}s")


def test_criterion_02_solver_order(cli_runs, record):
    r = cli_runs("fmp_order")
    order, last = r.f("fitted_order"), r.f("row3.max_error")
    ok = r.code == 0 and r.report["row3.h"] == "0.025" and order >= 1.8 and last < 5e-3 and r.seconds < 120
    assert record(2, ok, f"FMP order {order:.3f} (>= 1.8), error {last:.2e} at h=0.025 (< 5e-3), "
                         f"{r.seconds:.1f}s")


def test_criterion_03_catenoid(cli_runs, record):
    fem, quad = cli_runs("catenoid_fem"), cli_runs("catenoid")
    err = fem.f("max_error")
    diff = max(quad.f("diff(2)"), quad.f("diff(3)"))
    secs = fem.seconds + quad.seconds
    ok = fem.code == 0 and quad.code == 0 and err < 5e-3 and diff < 1e-10 and secs < 120
    assert record(3, ok, f"annulus error {err:.2e} at h=0.02 (< 5e-3), height vs oracle {diff:.1e} (< 1e-10), "
                         f"{secs:.1f}s")


def random_convex_polygon(rng):
    pts = rng.uniform(-1, 1, (10, 2))
    return Domain2D.polygon(pts[ConvexHull(pts).vertices])


def random_smooth(rng):
    a, b, c = rng.normal(size=(3, 3))
    return lambda p: (a[0] * np.sin(b[0] * p[..., 0] + c[0]) + a[1] * np.cos(b[1] * p[..., 1] + c[1])
                      + a[2] * np.sin(b[2] * p[..., 0] * p[..., 1] + c[2]))


def max_principle_suite(seed=7, h=0.1, tol=1e-8):
    rng = np.random.default_rng(seed)
    bracket, order = [], []
    for _ in range(10):
        dom = random_convex_polygon(rng)
        mesh = triangulate(dom, h)
        phi = BoundaryData.from_function(dom, random_smooth(rng))
        u, rep = newton_solve(mesh, phi, 0.5)
        ub = mesh.boundary_values(phi)
        bracket.append((rep.converged, float(ub.min() - u.values.min()), float(u.values.max() - ub.max())))
    for _ in range(10):
        dom = random_convex_polygon(rng)
        mesh = triangulate(dom, h)
        f, g = random_smooth(rng), random_smooth(rng)
        lo = BoundaryData.from_function(dom, f)
        # the second datum adds a non-negative smooth bump
        hi = BoundaryData.from_function(dom, lambda p, f=f, g=g: f(p) + g(p) ** 2)
        u, r1 = newton_solve(mesh, lo, 0.5)
        v, r2 = newton_solve(mesh, hi, 0.5)
        order.append((r1.converged and r2.converged, check_comparison(u, v, tol),
                      float(np.max(u.values - v.values))))
    return bracket, order


def test_criterion_04_maximum_principle(record):
    t = time.perf_counter()
    bracket, order = max_principle_suite()
    secs = time.perf_counter() - t
    worst_b = max(max(lo, hi) for _, lo, hi in bracket)
    worst_o = max(d for _, _, d in order)
    ok = (all(c for c, _, _ in bracket) and worst_b <= 1e-8 and all(c and k for c, k, _ in order)
          and secs < 180)
    assert record(4, ok, f"bracket excess {worst_b:.1e}, comparison excess {worst_o:.1e} (tol 1e-8) on 10+10 "
                         f"random convex cases, {secs:.1f}s")


SMOOTH = lambda p: p[..., 0] ** 2 - p[..., 1] + 0.5 * np.sin(3 * p[..., 0] * p[..., 1])  # noqa: E731
ISOMETRIES = (IsometryNil("direct", 0.7, 1.5 - 0.5j), IsometryNil("mirrored", 2.1, -1 + 2j))


def symmetry_suite(h=0.05):
    C = fmp_constant(h)
    iso = [isometry_defect(SMOOTH, g, 0.5, h) for g in ISOMETRIES]
    scale = [scaling_defect(SMOOTH, tau, h) for tau in (0.25, 1.0)]
    return C, iso, scale


def test_criterion_05_symmetries(record):
    t = time.perf_counter()
    h = 0.05
    C, iso, scale = symmetry_suite(h)
    secs = time.perf_counter() - t
    tol = 10 * h * h * C
    ok = max(iso + scale) <= tol and secs < 60
    assert record(5, ok, f"isometry defects {max(iso):.2e}, scaling defects {max(scale):.2e} "
                         f"(tol 10 h^2 C = {tol:.2e}), {secs:.1f}s")


def test_criterion_06_scherk(cli_runs, record):
    r = cli_runs("scherk")
    checks = ("scherk_monotone", "compact_cauchy", "gamma_adjacent_above_half_n")
    status = " ".join(f"{c}={'pass' if r.passed(c) else 'fail'}" for c in checks)
    ok = r.code == 0 and all(r.passed(c) for c in checks) and r.seconds < 300
    assert record(6, ok, f"{status}, max monotonicity violation {r.f('max_violation'):.2e} (tol 1e-8), "
                         f"exit {r.code}, {r.seconds:.1f}s")


def test_criterion_07_wedge_growth(cli_runs, record):
    w, g = cli_runs("wedge"), cli_runs("growth")
    alpha = w.f("fitted_exponent")
    a_cal, c_cal = g.f("fitted_exponent"), g.f("fitted_coefficient")
    secs = w.seconds + g.seconds
    ok = (w.code == 0 and g.code == 0 and w.passed("above_comparison_surface") and alpha >= 1.9
          and abs(a_cal - 2) <= 1e-6 and abs(c_cal - 0.25) <= 1e-6 and secs < 600)
    assert record(7, ok, f"comparison margin {w.f('comparison_margin'):.1e} (tol 1e-8), exponent {alpha:.4f} "
                         f"(>= 1.9), calibration {a_cal:.7f} / {c_cal:.7f}, {secs:.1f}s")


def test_criterion_08_halfplane_family(cli_runs, record):
    r = cli_runs("halfplane")
    mins = min(r.f("min_u"), r.f("compare.min_u"))
    diff = r.f("family_difference")
    ok = (r.code == 0 and r.passed("plane_brackets") and r.passed("compare_plane_brackets") and mins >= -1e-8
          and diff > 1e-3 and r.seconds < 300)
    assert record(8, ok, f"min u {mins:.1e} (>= 0), upper brackets {r.report['check.plane_brackets']}/"
                         f"{r.report['check.compare_plane_brackets']}, family difference {diff:.3g} at n=16 "
                         f"(> 1e-3), {r.seconds:.1f}s")


def test_criterion_09_odd_reflection(cli_runs, record):
    r = cli_runs("reflect")
    seam, bulk, sup, M = r.f("seam_residual"), r.f("bulk_residual"), r.f("sup_abs"), r.f("M")
    ok = r.code == 0 and seam <= 10 * bulk and sup <= M + 1e-6 and r.seconds < 180
    assert record(9, ok, f"seam residual {seam:.1e} vs 10 x bulk {10 * bulk:.1e}, sup|u| {sup:.6f} (<= M + 1e-6 "
                         f"= {M + 1e-6:.6f}), {r.seconds:.1f}s")


def test_criterion_10_nonexistence_probe(cli_runs, record):
    r = cli_runs("nonexist")
    H = r.f("H")
    notched = [r.f(f"notched.row{k}.layer_gap") for k in range(3)]
    partner = [r.f(f"partner.row{k}.layer_gap") for k in range(3)]
    ok = (r.code == 0 and r.report["label"] == "diagnostic" and r.f("waist_residual") < 1e-12
          and r.f("tangency_distance") < 1e-8 and min(notched) >= 0.1 * H
          and all(b < a for a, b in zip(partner, partner[1:])) and partner[-1] < 1e-2 and r.seconds < 600)
    assert record(10, ok, f"waist residual {r.f('waist_residual'):.1e}, tangency {r.f('tangency_distance'):.1e}, "
                          f"notched gaps {' '.join(f'{g:.3f}' for g in notched)} (floor >= {0.1 * H:g}), partner "
                          f"gaps {' '.join(f'{g:.4f}' for g in partner)} (decreasing, < 1e-2), "
                          f"{r.seconds:.1f}s")


def test_criterion_11_determinism(cli_runs, record):
    differing = []
    for name in RUNS:
        first = cli_runs(name)
        again = invoke(name, cli_runs.base / f"{name}_again")
        names = sorted(p.name for p in first.out.iterdir())
        if again.code != first.code or names != sorted(p.name for p in again.out.iterdir()):
            differing.append(name)
            continue
        if any((first.out / n).read_bytes() != (again.out / n).read_bytes() for n in names):
            differing.append(name)
    # library-level criteria: recompute and compare bit for bit
    if repr(max_principle_suite()) != repr(max_principle_suite()):
        differing.append("maximum_principle")
    if repr(symmetry_suite()) != repr(symmetry_suite()):
        differing.append("symmetry")
    ok = not differing
    assert record(11, ok, f"{len(RUNS)} CLI runs and 2 library suites repeated; "
                          + ("all byte-identical" if ok else "differences in " + ", ".join(differing)))
