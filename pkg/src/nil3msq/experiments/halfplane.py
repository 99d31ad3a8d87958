"""Half-plane exhaustion with plane brackets, and the odd reflection across x1 = 0."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..domain import BoundaryData, ComponentData, Domain2D, exhaust, locate_on_boundary
from ..fem import (ScalarField, SolveReport, SolverOptions, assemble, boundary_vector, laplace_initial,
                   newton_solve)
from ..geometry import as_tau
from ..mesh import Mesh, triangulate
from .bounded import InvariantViolation

log = logging.getLogger(__name__)


@dataclass
class HalfplaneRun:
    """Last exhaustion level with bracket diagnostics; unpacks as ``(field, report)``."""

    field: ScalarField
    report: SolveReport
    ns: list
    upper_margin: float
    lower_margin: float
    probe: np.ndarray
    probe_values: list
    level_changes: list
    exhaustion_converged: bool
    reports: list = field(default_factory=list)

    @property
    def brackets_ok(self) -> bool:
        return self.upper_margin >= 0.0 and self.lower_margin >= 0.0

    def __iter__(self):
        return iter((self.field, self.report))


def _edge_data(phi) -> ComponentData:
    if isinstance(phi, ComponentData):
        return phi
    if callable(phi):
        return ComponentData({"edge": lambda p: phi(np.asarray(p)[..., 0])})
    return ComponentData({"edge": float(phi)})


def run_halfplane(phi, tau, plane=(1.0, 1.0), n_list=(4, 8, 16), h: float = 0.25, d: float = 0.0,
                  width=None, probe=None, opts: SolverOptions | None = None, tol: float = 1e-8,
                  stop: float | None = None, strict: bool = False) -> HalfplaneRun:
    """Exhaust {x2 > d} by rectangles |x1| < width(n), d < x2 < n.

    ``phi`` is a constant, a function of x1 or ComponentData for ``edge``.
    ``plane = (a, b)`` or ``(a, b, c)`` gives the supersolution
    c x1 + a x2 + b and the mirrored subsolution c x1 - a x2 - b. The far
    side carries the supersolution, the vertical sides linear ramps. The
    brackets are checked nodally at every level; ``stop`` ends the
    exhaustion once two levels differ by less than it on the probe.
    """
    tau = as_tau(tau)
    a, b = float(plane[0]), float(plane[1])
    c = float(plane[2]) if len(plane) > 2 else 0.0
    data = _edge_data(phi)
    dom = Domain2D.halfplane(d)
    if probe is None:
        xs, ys = np.linspace(-3.0, 3.0, 13), d + np.linspace(0.5, 3.0, 6)
        probe = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
    probe = np.asarray(probe, dtype=float)
    n_list = [float(n) for n in n_list]
    if n_list[0] <= probe[:, 1].max() or any(q <= p for p, q in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing and clear the probe set")
    upper = lambda p: c * p[..., 0] + a * (p[..., 1] - d) + b  # noqa: E731
    lower = lambda p: c * p[..., 0] - a * (p[..., 1] - d) - b  # noqa: E731

    prev = None
    values, changes, reports, ups, lows, ns = [], [], [], [], [], []
    converged_exh = False
    for n in n_list:
        # the far plane is written in x2 - d so that it equals b on the edge
        step = exhaust(dom, n, data, "plane", plane=(a, b - a * d, c), width=width)
        mesh = triangulate(step.omega_n, h)
        init = None
        if prev is not None:
            old = prev(mesh.vertices)
            fresh = laplace_initial(mesh, boundary_vector(mesh, step.phi_n))
            init = np.where(np.isnan(old), fresh, old)
        u, rep = newton_solve(mesh, step.phi_n, tau, opts, initial=init)
        if not rep.converged and init is not None:
            u, rep = newton_solve(mesh, step.phi_n, tau, opts)
        if not rep.converged:
            log.warning("half-plane level n=%g did not converge: %s", n, rep.message)
        reports.append(rep)
        ups.append(float(np.min(upper(mesh.vertices) - u.values)) + tol)
        lows.append(float(np.min(u.values - lower(mesh.vertices))) + tol)
        vals = u(probe)
        if values:
            changes.append(float(np.max(np.abs(vals - values[-1]))))
        values.append(vals)
        ns.append(n)
        prev = u
        if stop is not None and changes and changes[-1] < stop:
            converged_exh = True
            break
    run = HalfplaneRun(prev, reports[-1], ns, min(ups), min(lows), probe, values, changes, converged_exh, reports)
    if strict and not run.brackets_ok:
        raise InvariantViolation("half-plane solution leaves the plane brackets "
                                 f"(upper margin {run.upper_margin:.3e}, lower margin {run.lower_margin:.3e})")
    return run


# ---------------------------------------------------------------------------
# odd reflection


@dataclass
class ReflectionRun:
    field: ScalarField
    quadrant: ScalarField
    report: SolveReport
    seam_residual: float
    bulk_residual: float
    seam_ok: bool
    sup_abs: float
    M: float | None


def mirror_mesh(mesh: Mesh, dom: Domain2D, tol: float = 1e-12) -> tuple[Mesh, np.ndarray, np.ndarray]:
    """Glue ``mesh`` of a region in {x1 >= 0} to its mirror image across x1 = 0.

    Returns the glued mesh over ``dom`` together with, for each glued vertex,
    the source vertex and the sign (+1 original, -1 mirror image).
    """
    v = mesh.vertices
    off = np.nonzero(v[:, 0] > tol)[0]
    new_index = np.arange(len(v))
    mirror_index = np.arange(len(v))
    mirror_index[off] = len(v) + np.arange(len(off))
    verts = np.vstack([v, v[off] * np.array([-1.0, 1.0])])
    source = np.r_[new_index, off]
    sign = np.r_[np.ones(len(v)), -np.ones(len(off))]
    tris = np.vstack([mesh.triangles, mirror_index[mesh.triangles][:, ::-1]])
    # boundary of the glued mesh: vertices on edges used by a single triangle
    edges = np.sort(np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
    uniq, count = np.unique(edges, axis=0, return_counts=True)
    bnodes = np.unique(uniq[count == 1])
    ids, s, dist = locate_on_boundary(dom, verts[bnodes])
    if np.max(dist) > 1e-9 * max(1.0, dom.diameter_hint()):
        raise ValueError("mirrored mesh boundary does not lie on the target domain")
    glued = Mesh(verts, tris, bnodes, ids, s, mesh.h, dom)
    return glued, source, sign


def run_reflection(phi_odd, tau, case: str = "bounded", h: float = 0.02, L: float = 3.0, M: float | None = None,
                   opts: SolverOptions | None = None, factor: float = 10.0, samples: int = 41,
                   strict: bool = False) -> ReflectionRun:
    """Solve on the square [0, L]^2 of the quadrant and extend oddly across x1 = 0.

    Data: ``phi_odd(x1)`` on the bottom, 0 on the left side. For ``bounded``
    the right side carries phi(L) and the top the linear ramp from phi(L) to
    0, so all data lie in [-M, M]. For ``quadratic`` the right and top sides
    carry phi(x1) + tau x1 x2 with x1 clipped to L. The glued field's
    residual at the seam nodes is compared with the residual norm over the
    other interior nodes.
    """
    tau = as_tau(tau)
    if case not in ("bounded", "quadratic"):
        raise ValueError("case must be 'bounded' or 'quadratic'")
    t = np.linspace(0.0, L, samples)
    if np.max(np.abs(np.asarray(phi_odd(t)) + np.asarray(phi_odd(-t)))) > 1e-12 * max(1.0, L):
        raise ValueError("boundary data must be odd in x1")
    if case == "quadratic" and np.any(np.asarray(phi_odd(t)) < 0):
        raise ValueError("quadratic case needs phi >= 0 for x1 >= 0")
    quad = Domain2D.rectangle(0.0, 0.0, L, L)
    fL = float(phi_odd(np.array(L)))
    if case == "bounded":
        pieces = {"bottom": lambda s: phi_odd(np.asarray(s)), "right": fL,
                  "top": lambda s: fL * (1.0 - np.asarray(s) / L), "left": 0.0}
    else:
        pieces = {"bottom": lambda s: phi_odd(np.asarray(s)),
                  "right": lambda s: fL + tau * L * np.asarray(s),
                  "top": lambda s: phi_odd(L - np.asarray(s)) + tau * (L - np.asarray(s)) * L,
                  "left": 0.0}
    data = BoundaryData.build(quad, pieces)
    mesh = triangulate(quad, h)
    u, rep = newton_solve(mesh, data, tau, opts)
    if not rep.converged:
        raise InvariantViolation(f"quadrant solve did not converge: {rep.message}")

    full = Domain2D.rectangle(-L, 0.0, L, L)
    glued, source, sign = mirror_mesh(mesh, full)
    ext = ScalarField(glued, sign * u.values[source])
    r, _ = assemble(glued, ext.values, tau)
    x = glued.vertices
    inner = glued.interior_nodes
    seam = inner[np.abs(x[inner, 0]) <= 1e-12]
    bulk = inner[np.abs(x[inner, 0]) > 1e-12]
    seam_res = float(np.linalg.norm(r[seam]))
    bulk_res = float(np.linalg.norm(r[bulk]))
    ok = seam_res <= factor * bulk_res
    sup = float(np.max(np.abs(ext.values)))
    if M is None and case == "bounded":
        M = float(np.max(np.abs(phi_odd(t))))
    if strict and not ok:
        raise InvariantViolation(f"seam residual {seam_res:.3e} exceeds {factor:g} x bulk {bulk_res:.3e}")
    return ReflectionRun(ext, u, rep, seam_res, bulk_res, bool(ok), sup, M)


def bounded_odd_example(x1):
    """sign(x1) min(|x1|, 1)."""
    x1 = np.asarray(x1, dtype=float)
    return np.sign(x1) * np.minimum(np.abs(x1), 1.0)
