"""Command-line entry point: ``nil3msq <experiment> --config <file> [--out <dir>] [--jobs N]``.

Exit codes
----------
0  success
1  unexpected internal error
2  configuration error (no run directory is created)
3  solver non-convergence or mesh failure
4  invariant violation (the report names the failing check)

Each run directory holds ``report.txt`` (``key = value`` lines),
``manifest.txt`` (the resolved configuration) and, depending on the
experiment, ``solution.txt`` (``id x1 x2 u W``) and two-column ``.dat``
series: ``growth_R_sup.dat``, ``scherk_n_probe.dat``, ``gap_vs_h.dat``.
All numbers are written in fixed formats and no timings are recorded, so
identical configurations give byte-identical files.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from .config import ConfigError, Expression, RunConfig, exact_graph, load_config
from .domain import ComponentData, Domain2D
from .exact import (CatenoidGraph, FmpSol, PlaneSol, VerticalCatenoidProfile, catenoid_height, integrate_daniel)
from .fem import ScalarField, SolverError, newton_solve, refinement_study
from .mesh import MeshQualityError, structured_annulus, structured_rectangle, triangulate
from .msq import strong_residual

OK, INTERNAL, CONFIG_ERROR, NO_CONVERGENCE, INVARIANT = 0, 1, 2, 3, 4

log = logging.getLogger("nil3msq")


@dataclass
class Outcome:
    status: int = OK
    report: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # filename -> list of lines
    stdout: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def check(self, name: str, ok: bool, status: int = INVARIANT):
        self.report.append(f"check.{name} = {'pass' if ok else 'fail'}")
        if not ok:
            self.failures.append(name)
            self.status = max(self.status, status)


def _e(x) -> str:
    if x is None:
        return "none"
    return f"{x:.9e}" if math.isfinite(x) else str(x).lower()


def series(xs, ys) -> list[str]:
    return [f"{x:.12e} {y:.12e}" for x, y in zip(xs, ys)]


def solution_lines(u: ScalarField, tau: float) -> list[str]:
    w = u.nodal_area_density(tau)
    lines = ["# id x1 x2 u W"]
    for i, ((x, y), val, wi) in enumerate(zip(u.mesh.vertices, u.values, w)):
        lines.append(f"{i} {x:.12e} {y:.12e} {val:.12e} {wi:.12e}")
    return lines


def _point_data(expr: Expression, tau: float):
    return lambda p: np.broadcast_to(
        np.asarray(expr(s=np.zeros(np.shape(p)[:-1]), x1=p[..., 0], x2=p[..., 1], tau=tau), dtype=float),
        np.shape(p)[:-1]).copy()


# ---------------------------------------------------------------------------
# experiments: each prepare_* validates its parameters and returns a runner


def _dirichlet_mesher(cfg: RunConfig, kind: str, min_angle: float):
    shape = cfg.domain.params.get("shape")
    if kind == "unstructured":
        return lambda h: triangulate(cfg.domain, h, min_angle=min_angle)
    if shape == "rectangle":
        return lambda h: structured_rectangle(cfg.domain, h)
    if shape == "annulus":
        grading = cfg.params.float("grading", 2.0, positive=True)
        if grading < 1.0:
            raise ConfigError("[params] grading must be >= 1")
        return lambda h: structured_annulus(cfg.domain, h, grading)
    raise ConfigError("[params] mesh = structured needs shape = rectangle or annulus")


def prepare_dirichlet(cfg: RunConfig, jobs: int):
    if cfg.domain is None:
        raise ConfigError("dirichlet needs a [domain]")
    if not cfg.data_spec:
        raise ConfigError("dirichlet needs [data]")
    if cfg.h is None and cfg.h_list is None:
        raise ConfigError("dirichlet needs [run] h or h_list")
    phi = cfg.data()
    exact = exact_graph(cfg)
    min_angle = cfg.params.float("min_angle", 20.0, positive=True)
    gap_radius = cfg.params.float("gap_radius", 0.0, nonneg=True)
    mesher = _dirichlet_mesher(cfg, cfg.params.str("mesh", "unstructured", choices=("unstructured", "structured")),
                               min_angle)

    def convergence(out: Outcome) -> Outcome:
        hs, errs, conv = [], [], []
        for k, h in enumerate(cfg.h_list):
            mesh = mesher(h)
            u, rep = newton_solve(mesh, phi, cfg.tau)
            err = float(np.max(np.abs(u.values - exact(mesh.vertices))))
            hs.append(h), errs.append(err), conv.append(rep.converged)
            out.report += [f"row{k}.h = {h:.6g}", f"row{k}.n_vertices = {mesh.n_vertices}",
                           f"row{k}.max_error = {_e(err)}", f"row{k}.iterations = {rep.iterations}",
                           f"row{k}.converged = {str(rep.converged).lower()}"]
        order = float(np.polyfit(np.log(hs), np.log(errs), 1)[0]) if min(errs) > 0 else math.inf
        out.report.append(f"fitted_order = {_e(order)}")
        out.tables["error_vs_h.dat"] = series(hs, errs)
        if not all(conv):
            out.status = NO_CONVERGENCE
        return out

    def run() -> Outcome:
        out = Outcome()
        if cfg.h_list is not None and exact is not None:
            return convergence(out)
        if cfg.h_list is not None:
            table = refinement_study(cfg.domain, phi, cfg.tau, cfg.h_list, jobs=jobs, gap_radius=gap_radius,
                                     mesher=mesher)
            for k, row in enumerate(table.rows):
                out.report += [f"row{k}.h = {row.h:.6g}", f"row{k}.attainment_gap = {_e(row.attainment_gap)}",
                               f"row{k}.layer_gap = {_e(row.layer_gap)}",
                               f"row{k}.interior_change = {_e(row.interior_change)}",
                               f"row{k}.converged = {str(row.converged).lower()}"]
            out.tables["gap_vs_h.dat"] = series(table.column("h"), table.column("layer_gap"))
            if not all(r.converged for r in table.rows):
                out.status = NO_CONVERGENCE
            return out
        mesh = mesher(cfg.h)
        u, rep = newton_solve(mesh, phi, cfg.tau)
        out.report += [f"n_vertices = {mesh.n_vertices}"] + rep.as_lines()
        if exact is not None:
            err = float(np.max(np.abs(u.values - exact(mesh.vertices))))
            out.report.append(f"max_error = {_e(err)}")
        out.tables["solution.txt"] = solution_lines(u, cfg.tau)
        if not rep.converged:
            out.status = NO_CONVERGENCE
        return out

    return run


def prepare_scherk(cfg: RunConfig, jobs: int):
    from .experiments.bounded import run_scherk

    dom = cfg.domain or Domain2D.triangle((0.0, 0.0), (1.0, 0.0), (0.5, 0.85))
    p = cfg.params
    n_list = p.floats("n_list", "1 2 4 8 16", positive=True)
    phi_c = p.float("phi_c", 0.0)
    h = cfg.h if cfg.h is not None else 0.05
    h_min = p.float("h_min", 1e-3, positive=True)
    grading = p.float("grading", 0.3, positive=True)
    if "gamma" not in dom.arc_ids:
        raise ConfigError("scherk needs a domain with a side named 'gamma' (use shape = triangle)")

    def run() -> Outcome:
        out = Outcome()
        seq = run_scherk(dom, phi_c, cfg.tau, n_list, h, h_min=h_min, grading=grading)
        mesh = seq.levels[0][1].mesh
        out.report += [f"n_vertices = {mesh.n_vertices}", f"probe_points = {len(seq.probe)}"]
        for (n, _), rep, am in zip(seq.levels, seq.reports, seq.gamma_adjacent_min):
            out.report += [f"level.n{n:g}.converged = {str(rep.converged).lower()}",
                           f"level.n{n:g}.gamma_adjacent_min = {_e(am)}"]
        for i in range(len(n_list) - 1):
            out.report.append(f"probe_change.n{n_list[i]:g}_n{n_list[i + 1]:g} = {_e(seq.probe_change(i, i + 1))}")
        out.report += [f"monotone = {str(seq.monotone).lower()}", f"max_violation = {_e(seq.max_violation)}",
                       "violation_point = " + ("none" if seq.violation_point is None
                                               else " ".join(f"{c:.9e}" for c in seq.violation_point)),
                       f"divergence_rate = {_e(seq.divergence_rate)}"]
        centre = seq.probe.mean(axis=0)
        k = int(np.argmin(np.hypot(*(seq.probe - centre).T)))
        out.report.append(f"series_probe_point = {seq.probe[k][0]:.9e} {seq.probe[k][1]:.9e}")
        out.tables["scherk_n_probe.dat"] = series(n_list, [v[k] for v in seq.compact_probe_values])
        if not all(r.converged for r in seq.reports):
            out.status = NO_CONVERGENCE
        out.check("scherk_monotone", seq.monotone)
        out.check("gamma_adjacent_above_half_n", all(am > n / 2 for n, am in zip(n_list, seq.gamma_adjacent_min)))
        if len(n_list) >= 4:
            # last increment against the increment between the second and third levels
            last = seq.probe_change(len(n_list) - 2, len(n_list) - 1)
            out.check("compact_cauchy", last < seq.probe_change(1, 2))
        return out

    return run


def prepare_wedge(cfg: RunConfig, jobs: int):
    from .experiments.growth import run_wedge_growth

    p = cfg.params
    theta = p.float("theta", math.pi / 2, positive=True)
    n_list = p.floats("n_list", "8 16 32 64", positive=True)
    radii = p.floats("radii", "4 8 16 32", positive=True)
    divisions = p.int("divisions", 128, positive=True)
    eta = p.float("eta", 0.06, positive=True)
    phi = p.expr("phi", "0", names=("x1", "x2", "tau"))
    h = cfg.h if cfg.h is not None else 0.05
    if not math.pi / 2 - 1e-14 <= theta < math.pi:
        raise ConfigError("[params] theta must lie in [pi/2, pi)")
    if max(radii) >= max(n_list):
        raise ConfigError("[params] radii must stay below the last exhaustion level")
    data = ComponentData({"ray0": _point_data(phi, cfg.tau), "ray1": _point_data(phi, cfg.tau)})

    def run() -> Outcome:
        out = Outcome()
        w = run_wedge_growth(theta, data, cfg.tau, n_list, h=h, radii=radii, eta=eta, divisions=divisions)
        out.report += [f"n_vertices = {w.field.mesh.n_vertices}"] + w.report.as_lines()
        out.report += [f"comparison_margin = {_e(w.comparison_margin)}",
                       "level_changes = " + " ".join(_e(c) for c in w.level_changes),
                       f"exhaustion_converged = {str(w.exhaustion_converged).lower()}"]
        out.tables["growth_R_sup.dat"] = series(w.report.radii, w.report.sups)
        if not all(r.converged for r in w.solve_reports):
            out.status = NO_CONVERGENCE
        out.check("above_comparison_surface", w.comparison_ok)
        return out

    return run


def prepare_halfplane(cfg: RunConfig, jobs: int):
    from .experiments.halfplane import run_halfplane

    p = cfg.params
    plane = p.floats("plane", "1 1")
    other = p.floats("compare_plane", None)
    n_list = p.floats("n_list", "4 8 16", positive=True)
    width = p.float("width", None, positive=True)
    h = cfg.h if cfg.h is not None else 0.25
    expr = cfg.data_spec.get("default") or Expression("0")
    if len(plane) not in (2, 3) or plane[0] <= 0 or (other is not None and len(other) not in (2, 3)):
        raise ConfigError("[params] plane = a b [c] with a > 0")
    phi = ComponentData({"edge": _point_data(expr, cfg.tau)})

    def run() -> Outcome:
        out = Outcome()
        r = run_halfplane(phi, cfg.tau, plane, n_list, h=h, width=width)
        out.report += [f"n_vertices = {r.field.mesh.n_vertices}"] + r.report.as_lines()
        out.report += [f"upper_margin = {_e(r.upper_margin)}", f"lower_margin = {_e(r.lower_margin)}",
                       f"min_u = {_e(float(r.field.values.min()))}",
                       "level_changes = " + " ".join(_e(c) for c in r.level_changes)]
        conv = all(x.converged for x in r.reports)
        if other is not None:
            r2 = run_halfplane(phi, cfg.tau, other, n_list, h=h, width=width)
            diff = float(np.max(np.abs(r.probe_values[-1] - r2.probe_values[-1])))
            out.report += [f"compare.upper_margin = {_e(r2.upper_margin)}",
                           f"compare.min_u = {_e(float(r2.field.values.min()))}", f"family_difference = {_e(diff)}"]
            conv = conv and all(x.converged for x in r2.reports)
            out.check("family_distinct", diff > 1e-3)
            out.check("compare_plane_brackets", r2.brackets_ok)
        out.tables["solution.txt"] = solution_lines(r.field, cfg.tau)
        if not conv:
            out.status = NO_CONVERGENCE
        out.check("plane_brackets", r.brackets_ok)
        return out

    return run


def prepare_reflect(cfg: RunConfig, jobs: int):
    from .experiments.halfplane import run_reflection

    p = cfg.params
    case = p.str("case", "bounded", choices=("bounded", "quadratic"))
    L = p.float("L", 3.0, positive=True)
    M = p.float("M", None, positive=True)
    h = cfg.h if cfg.h is not None else 0.02
    expr = cfg.data_spec.get("default") or Expression("sign(x1) * minimum(abs(x1), 1)")
    f = lambda x: np.broadcast_to(np.asarray(expr(s=0.0, x1=np.asarray(x, dtype=float), x2=0.0, tau=cfg.tau),  # noqa: E731
                                             dtype=float), np.shape(x)).copy()

    def run() -> Outcome:
        out = Outcome()
        try:
            r = run_reflection(f, cfg.tau, case, h=h, L=L, M=M)
        except ConfigError:
            raise
        except ValueError as exc:
            out.report.append(f"error = {exc}")
            out.check("data_admissible", False)
            return out
        out.report += [f"n_vertices = {r.field.mesh.n_vertices}"] + r.report.as_lines()
        out.report += [f"seam_residual = {_e(r.seam_residual)}", f"bulk_residual = {_e(r.bulk_residual)}",
                       f"sup_abs = {_e(r.sup_abs)}", f"M = {_e(r.M)}"]
        out.tables["solution.txt"] = solution_lines(r.field, cfg.tau)
        out.check("seam_residual", r.seam_ok)
        if r.M is not None:
            out.check("bounded_by_M", r.sup_abs <= r.M + 1e-6)
        return out

    return run


def prepare_nonexist(cfg: RunConfig, jobs: int):
    from .experiments.nonexist import run_nonexistence_probe

    dom = cfg.domain or Domain2D.notched_rectangle()
    if dom.params.get("shape") != "notched":
        raise ConfigError("nonexist needs shape = notched")
    H = cfg.params.float("H", 0.5, positive=True)
    h_list = cfg.h_list or [0.1, 0.05, 0.025]

    def run() -> Outcome:
        out = Outcome()
        r = run_nonexistence_probe(dom, H, cfg.tau, h_list, jobs=jobs)
        g = r.geometry
        out.report += [f"label = {r.label}", f"classification = {r.classification}", f"H = {_e(r.H)}",
                       f"B = {_e(g.B)}", f"eps = {_e(g.eps)}", f"mu = {g.mu:.15e}",
                       f"waist_residual = {_e(g.waist_residual)}", f"shift = {g.shift:.15e}",
                       f"mu_prime = {g.mu_prime:.15e}", f"tangency_distance = {_e(g.tangency_distance)}",
                       f"penetration = {_e(g.penetration)}"]
        for name, table in (("notched", r.notched), ("partner", r.partner)):
            for k, row in enumerate(table.rows):
                out.report += [f"{name}.row{k}.h = {row.h:.6g}", f"{name}.row{k}.layer_gap = {_e(row.layer_gap)}",
                               f"{name}.row{k}.max_W_near_notch = {_e(row.max_W)}",
                               f"{name}.row{k}.converged = {str(row.converged).lower()}"]
        out.tables["gap_vs_h.dat"] = series(r.notched.column("h"), r.notched_gaps)
        out.tables["gap_vs_h_partner.dat"] = series(r.partner.column("h"), r.partner_gaps)
        if not all(row.converged for row in r.notched.rows + r.partner.rows):
            out.status = NO_CONVERGENCE
        out.report += [f"signature.notched_floor = {_e(r.gap_floor())}",
                       f"signature.floor_over_H = {_e(r.gap_floor() / r.H)}",
                       f"signature.partner_decreasing = {str(r.partner_decreasing()).lower()}"]
        return out

    return run


def prepare_growth(cfg: RunConfig, jobs: int):
    from .experiments.growth import fit_growth

    p = cfg.params
    expr = p.expr("field", "tau * x1 * x2", names=("x1", "x2", "tau"))
    radii = p.floats("radii", "2 4 8 16", positive=True)
    angles = p.floats("angles", "0 pi/2")
    samples = p.int("samples", 401, positive=True)
    if len(radii) < 3 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ConfigError("[params] radii: at least three, strictly increasing")
    if len(angles) != 2:
        raise ConfigError("[params] angles = a0 a1")
    u = _point_data(expr, cfg.tau)

    def run() -> Outcome:
        out = Outcome()
        rep = fit_growth(u, radii, angles=tuple(angles), samples=samples)
        out.report += rep.as_lines()
        out.tables["growth_R_sup.dat"] = series(rep.radii, rep.sups)
        return out

    return run


def catenoid_oracle(r0: float, r: float) -> float:
    """h(r) by adaptive quadrature on the original integrand with the algebraic endpoint weight."""
    f = lambda s: r0 * math.sqrt(s * s + 4.0) / (2.0 * math.sqrt(s + r0))  # noqa: E731
    val, _ = integrate.quad(f, r0, r, weight="alg", wvar=(-0.5, 0.0), epsabs=1e-14, epsrel=1e-14, limit=200)
    return val


def prepare_catenoid(cfg: RunConfig, jobs: int):
    p = cfg.params
    r0 = p.float("r0", 1.0, positive=True)
    rs = p.floats("r", "2", positive=True)
    tol = p.float("tol", 1e-10, positive=True)
    if any(r < r0 for r in rs):
        raise ConfigError("[params] every r must be >= r0")
    if abs(cfg.tau - 0.5) > 1e-15:
        raise ConfigError("the catenoid family is defined for tau = 1/2")

    def run() -> Outcome:
        out = Outcome()
        prof = VerticalCatenoidProfile(r0)
        worst = 0.0
        for r in rs:
            hv, ho = float(catenoid_height(prof, r)), catenoid_oracle(r0, r)
            worst = max(worst, abs(hv - ho))
            out.report += [f"h({r:g}) = {hv:.15e}", f"oracle({r:g}) = {ho:.15e}", f"diff({r:g}) = {_e(abs(hv - ho))}"]
            out.stdout.append(f"h({r:g}) = {hv:.15e}")
        out.check("oracle_agreement", worst <= tol)
        return out

    return run


def prepare_verify(cfg: RunConfig, jobs: int):
    p = cfg.params
    npts = p.int("points", 500, positive=True)
    tol = p.float("tol", 1e-9, positive=True)

    def run() -> Outcome:
        out = Outcome()
        rng = np.random.default_rng(cfg.seed)
        results = {}
        pts = rng.uniform(-2.0, 2.0, size=(npts, 2))
        planes = [PlaneSol(*rng.uniform(-3, 3, 3)) for _ in range(5)]
        results["plane"] = max(float(np.max(np.abs(strong_residual(g.jet(pts), pts, t))))
                               for g in planes for t in (0.0, 0.25, 0.5, 1.0))
        results["fmp"] = max(float(np.max(np.abs(strong_residual(FmpSol(a, t).jet(pts), pts, t))))
                             for a in (-2, -1, 0, 1, 2) for t in (0.25, 0.5, 1.0))
        fam = integrate_daniel(0.2, 0.3, (-1.0, 1.0), tau=0.5)
        dp = np.stack([rng.uniform(-2, 2, npts), rng.uniform(-1, 1, npts)], axis=1)
        results["daniel"] = float(np.max(np.abs(strong_residual(fam.jet(dp), dp, 0.5))))
        rad = rng.uniform(1.05, 4.0, npts)
        ang = rng.uniform(0, 2 * math.pi, npts)
        cp = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
        cat = CatenoidGraph(VerticalCatenoidProfile(1.0))
        results["catenoid"] = float(np.max(np.abs(strong_residual(cat.jet(cp), cp, 0.5))))
        for k, v in results.items():
            out.report.append(f"max_residual.{k} = {_e(v)}")
        out.check("residuals_below_tol", max(results.values()) < tol)
        return out

    return run


PREPARE = {
    "dirichlet": prepare_dirichlet, "scherk": prepare_scherk, "wedge": prepare_wedge,
    "halfplane": prepare_halfplane, "reflect": prepare_reflect, "nonexist": prepare_nonexist,
    "growth": prepare_growth, "catenoid": prepare_catenoid, "verify": prepare_verify,
}


def write_run(outdir: Path, cfg: RunConfig, outcome: Outcome) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    status = {OK: "ok", NO_CONVERGENCE: "no-convergence", INVARIANT: "invariant-violation"}.get(outcome.status,
                                                                                                  "error")
    head = [f"experiment = {cfg.experiment}", f"tau = {cfg.tau!r}", f"status = {status}"]
    if outcome.failures:
        head.append("failed = " + " ".join(outcome.failures))
    (outdir / "report.txt").write_text("\n".join(head + outcome.report) + "\n")
    (outdir / "manifest.txt").write_text("\n".join(cfg.manifest_lines()) + "\n")
    for name, lines in sorted(outcome.tables.items()):
        (outdir / name).write_text("\n".join(lines) + "\n")


def run(experiment: str, config_path, out: str | None = None, jobs: int | None = None) -> int:
    """Parse, validate, execute and write one run; returns the exit status."""
    try:
        cfg = load_config(config_path, experiment)
        n_jobs = jobs if jobs is not None else cfg.jobs
        if n_jobs < 1:
            raise ConfigError("--jobs must be positive")
        runner = PREPARE[cfg.experiment](cfg, n_jobs)
        outdir = Path(out or cfg.out or Path("runs") / cfg.experiment)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    try:
        outcome = runner()
    except (SolverError, MeshQualityError) as exc:
        outcome = Outcome(NO_CONVERGENCE, [f"error = {exc}"])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    write_run(outdir, cfg, outcome)
    for line in outcome.stdout:
        print(line)
    if outcome.failures:
        print("failed checks: " + ", ".join(outcome.failures), file=sys.stderr)
    print(f"wrote {outdir}", file=sys.stderr)
    return outcome.status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nil3msq", description="Minimal graphs in Nil3(tau): experiment runner.")
    ap.add_argument("experiment", choices=sorted(PREPARE))
    ap.add_argument("--config", required=True, help="run configuration file")
    ap.add_argument("--out", help="run directory (default: [run] out or runs/<experiment>)")
    ap.add_argument("--jobs", type=int, help="parallel independent sub-solves")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(args.experiment, args.config, args.out, args.jobs)
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return INTERNAL


if __name__ == "__main__":
    sys.exit(main())
