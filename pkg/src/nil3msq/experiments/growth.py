"""Growth fitting and the wedge exhaustion driver."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..domain import ComponentData, Domain2D, exhaust
from ..exact import FmpSol
from ..fem import ScalarField, SolverOptions, newton_solve
from ..geometry import IsometryNil, as_tau, transform_graph
from ..mesh import structured_wedge, triangulate
from .bounded import InvariantViolation

log = logging.getLogger(__name__)


@dataclass
class GrowthReport:
    radii: list
    sups: list
    fitted_exponent: float | None
    fitted_coefficient: float | None
    fit_residual: float | None

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if np.any(np.diff(r) <= 0):
            raise ValueError("radii must be strictly increasing")
        if np.any(np.asarray(self.sups, dtype=float) < 0):
            raise ValueError("sups must be non-negative")

    def as_lines(self) -> list[str]:
        fmt = lambda v: "none" if v is None else f"{v:.9e}"  # noqa: E731
        return [
            "radii = " + " ".join(f"{r:.6g}" for r in self.radii),
            "sups = " + " ".join(f"{s:.9e}" for s in self.sups),
            f"fitted_exponent = {fmt(self.fitted_exponent)}",
            f"fitted_coefficient = {fmt(self.fitted_coefficient)}",
            f"fit_residual = {fmt(self.fit_residual)}",
        ]


def arc_sup(u, radius: float, angles: tuple[float, float], center=(0.0, 0.0), samples: int = 401) -> float:
    """max |u| over ``samples`` equispaced points of the circle arc; an odd count includes the midpoint."""
    t = np.linspace(angles[0], angles[1], samples)
    pts = np.stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)], axis=1)
    vals = np.asarray(u(pts), dtype=float)
    return float(np.nanmax(np.abs(vals)))


def fit_growth(u_source, radii, angles: tuple[float, float] = (0.0, math.pi / 2), center=(0.0, 0.0),
               samples: int = 401) -> GrowthReport:
    """Least-squares fit of log sup|u| against log R for the model c R^alpha.

    ``u_source`` is either a point function, whose sup is taken over arcs of
    radius R between ``angles``, or a callable ``R -> sup`` flagged by an
    attribute ``per_radius = True``, or a sequence of precomputed sups.
    """
    radii = [float(r) for r in radii]
    if len(radii) < 3:
        raise ValueError("fit_growth needs at least three radii")
    if isinstance(u_source, (list, tuple, np.ndarray)):
        sups = [float(s) for s in u_source]
        if len(sups) != len(radii):
            raise ValueError("one sup per radius is required")
    elif getattr(u_source, "per_radius", False):
        sups = [float(u_source(r)) for r in radii]
    else:
        sups = [arc_sup(u_source, r, angles, center, samples) for r in radii]
    s = np.asarray(sups)
    pos = s > 0
    if pos.sum() < 2:
        return GrowthReport(radii, sups, None, None, None)
    x, y = np.log(np.asarray(radii)[pos]), np.log(s[pos])
    design = np.stack([x, np.ones_like(x)], axis=1)
    (alpha, logc), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = float(np.sqrt(np.mean((design @ np.array([alpha, logc]) - y) ** 2)))
    return GrowthReport(radii, sups, float(alpha), float(math.exp(logc)), resid)


def comparison_surface(tau):
    """tau x1 x2 moved by the rotation about the x3-axis taking the first quadrant to {x2 >= |x1|}."""
    graph, _ = transform_graph(IsometryNil("direct", math.pi / 4), tau, FmpSol(0.0, tau))
    return graph


def sub_wedge_mask(pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    return pts[:, 1] >= np.abs(pts[:, 0]) - tol


@dataclass
class WedgeGrowthRun:
    report: GrowthReport
    field: ScalarField
    comparison_ok: bool
    comparison_margin: float
    level_changes: list
    exhaustion_converged: bool
    solve_reports: list = field(default_factory=list)
    ns: list = field(default_factory=list)


def run_wedge_growth(theta: float, phi, tau, n_list=(8, 16, 32, 64), h: float = 0.05,
                     radii=(4, 8, 16, 32), eta: float = 0.06, h_max: float = math.inf,
                     divisions: int | None = 128, opts: SolverOptions | None = None,
                     tol: float = 1e-8, stop: float = 1e-6, samples: int = 401,
                     strict: bool = False) -> WedgeGrowthRun:
    """Exhaust the wedge {|arg x - pi/2| < theta/2} by Omega_n = wedge cut at x2 = n.

    The cut side carries max(S, 0) + 1 with S the rotated comparison surface,
    which is positive and above S. For the right angle each level uses the
    structured ray-aligned mesh with ``divisions`` cells per ray, so the ratio
    of mesh size to n is fixed. Other openings use meshes graded as
    clip(eta |x|, h, h_max). Each level starts from the previous one where it
    is defined, with a cold start from S as fallback. Growth is fitted on the
    last level over the arcs of the given radii.
    """
    tau = as_tau(tau)
    if not math.pi / 2 - 1e-14 <= theta < math.pi:
        raise ValueError("wedge opening must lie in [pi/2, pi)")
    n_list = [float(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    if max(radii) >= n_list[-1]:
        raise ValueError("growth radii must stay inside the last exhaustion level")
    if not isinstance(phi, ComponentData):
        phi = ComponentData({"ray0": phi, "ray1": phi})
    dom = Domain2D.wedge(theta, bisector=math.pi / 2)
    sigma = comparison_surface(tau)
    closure = lambda p: np.maximum(sigma(p), 0.0) + 1.0  # noqa: E731
    probe = np.array([[0.0, r] for r in (1.0, 2.0, 3.0)] + [[0.5, 2.0], [-0.5, 2.0]])

    prev, prev_probe = None, None
    changes, reports, margins = [], [], []
    converged_exh = False
    for n in n_list:
        step = exhaust(dom, n, phi, "cut", closure=closure)
        if divisions and abs(theta - math.pi / 2) < 1e-12:
            mesh = structured_wedge(step.omega_n, divisions)
        else:
            cap = min(h_max, eta * n)
            mesh = triangulate(step.omega_n, cap,
                               size=lambda p: np.clip(eta * np.hypot(p[..., 0], p[..., 1]), h, cap))
        init = sigma(mesh.vertices)
        if prev is not None:
            old = prev(mesh.vertices)
            init = np.where(np.isnan(old), init, old)
        u, rep = newton_solve(mesh, step.phi_n, tau, opts, initial=init)
        if not rep.converged and prev is not None:
            # interpolated corner layers of the previous level can stall Newton
            u, rep = newton_solve(mesh, step.phi_n, tau, opts, initial=sigma(mesh.vertices))
        if not rep.converged:
            log.warning("wedge level n=%g did not converge: %s", n, rep.message)
        reports.append(rep)
        sub = sub_wedge_mask(mesh.vertices)
        margins.append(float(np.min(u.values[sub] - sigma(mesh.vertices[sub]))))
        vals = u(probe, extrapolate=True)
        if prev_probe is not None:
            changes.append(float(np.max(np.abs(vals - prev_probe))))
            converged_exh = converged_exh or changes[-1] < stop
        prev, prev_probe = u, vals
    margin = min(margins)
    ok = margin >= -tol
    if strict and not ok:
        raise InvariantViolation(f"wedge solution falls below the comparison surface by {-margin:.3e}")
    half = theta / 2
    report = fit_growth(prev, radii, angles=(math.pi / 2 - half, math.pi / 2 + half), samples=samples)
    return WedgeGrowthRun(report, prev, bool(ok), margin, changes, converged_exh, reports, n_list)
