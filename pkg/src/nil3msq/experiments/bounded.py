"""Bounded-domain drivers: the plain Dirichlet problem and the Scherk-type sequence."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..domain import BoundaryData, Domain2D, Segment, boundary_distance, is_convex
from ..fem import ScalarField, SolveReport, SolverOptions, newton_solve
from ..mesh import Mesh, triangulate

log = logging.getLogger(__name__)


class InvariantViolation(RuntimeError):
    """A property that a correct discretization must satisfy failed."""


def run_dirichlet(dom: Domain2D, phi: BoundaryData, tau, h: float, opts: SolverOptions | None = None,
                  mesh: Mesh | None = None, size=None) -> tuple[ScalarField, SolveReport]:
    """Solve the Dirichlet problem on a bounded domain and report boundary attainment.

    Non-convex domains are accepted with a warning: the solver still runs, which
    is what the non-existence probe relies on.
    """
    if not is_convex(dom):
        warnings.warn("domain is not convex; a minimal extension need not exist", stacklevel=2)
    mesh = mesh if mesh is not None else triangulate(dom, h, size=size)
    return newton_solve(mesh, phi, tau, opts)


def segment_distance(seg: Segment, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    flat = pts.reshape(-1, 2)
    return seg.project(flat)[1].reshape(pts.shape[:-1])


def gamma_adjacent_nodes(mesh: Mesh, arc_id: str, exclude: np.ndarray, radius: float) -> np.ndarray:
    """Interior nodes sharing an edge with a node of ``arc_id`` farther than ``radius`` from ``exclude``."""
    bn = mesh.boundary_nodes[mesh.boundary_arc == arc_id]
    if len(exclude):
        p = mesh.vertices[bn]
        d = np.min(np.hypot(p[:, None, 0] - exclude[None, :, 0], p[:, None, 1] - exclude[None, :, 1]), axis=1)
        bn = bn[d > radius]
    adj = mesh.adjacency
    isb = mesh.is_boundary
    out = set()
    for b in bn:
        nb = adj.indices[adj.indptr[b]:adj.indptr[b + 1]]
        out.update(int(j) for j in nb[~isb[nb]])
    return np.array(sorted(out), dtype=np.int64)


@dataclass
class ScherkSequence:
    levels: list
    monotone: bool
    compact_probe_values: list
    probe: np.ndarray
    max_violation: float
    violation_point: tuple | None
    gamma_adjacent_min: list
    divergence_rate: float
    reports: list = field(default_factory=list)

    @property
    def ns(self) -> list:
        return [n for n, _ in self.levels]

    def probe_change(self, i: int, j: int) -> float:
        """max over K of |u_{n_j} - u_{n_i}|."""
        return float(np.max(np.abs(self.compact_probe_values[j] - self.compact_probe_values[i])))


def scherk_mesh(dom: Domain2D, h: float, h_min: float, grading: float = 0.3) -> Mesh:
    """Mesh graded linearly toward the side ``gamma`` down to ``h_min``."""
    gamma = dom.arc("gamma")
    return triangulate(dom, h, size=lambda p: np.maximum(h_min, grading * segment_distance(gamma, p)))


def scherk_probe(dom: Domain2D, min_distance: float, n: int = 15) -> np.ndarray:
    """Grid points of the compact set K: at least ``min_distance`` from every side."""
    lo, hi = dom.bbox()
    xs, ys = np.linspace(lo[0], hi[0], n), np.linspace(lo[1], hi[1], n)
    pts = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
    pts = pts[dom.contains(pts)]
    return pts[boundary_distance(dom, pts) >= min_distance]


def run_scherk(dom: Domain2D, phi_c, tau, n_list, h: float, h_min: float | None = None,
               grading: float = 0.3, probe=None, opts: SolverOptions | None = None,
               tol: float = 1e-8, mesh: Mesh | None = None, strict: bool = False) -> ScherkSequence:
    """Solve with data ``phi_c`` on C and n on the interior of the side ``gamma`` for n in ``n_list``.

    ``phi_c`` is a constant or a mapping from the arc ids of C to per-arc data.
    All levels share one mesh and each level starts from the previous solution.
    Nodal monotonicity in n is measured; with ``strict`` a violation beyond
    ``tol`` raises :class:`InvariantViolation`.
    """
    if "gamma" not in dom.arc_ids or not isinstance(dom.arc("gamma"), Segment):
        raise ValueError("the Scherk driver needs a straight side with arc id 'gamma'")
    n_list = [float(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    if mesh is None:
        mesh = scherk_mesh(dom, h, h_min if h_min is not None else h / 50.0, grading)
    if probe is None:
        probe = scherk_probe(dom, 0.2 * math.sqrt(dom.area()))
    probe = np.asarray(probe, dtype=float)
    others = {a.id: (phi_c.get(a.id, 0.0) if isinstance(phi_c, dict) else phi_c)
              for a in dom.arcs if a.id != "gamma"}

    levels, values, reports, adj_min = [], [], [], []
    worst, where = 0.0, None
    prev = None
    adj = None
    for n in n_list:
        phi = BoundaryData.build(dom, {"gamma": n, **others})
        u, rep = newton_solve(mesh, phi, tau, opts, initial=prev)
        if not rep.converged:
            log.warning("Scherk level n=%g did not converge: %s", n, rep.message)
        if adj is None:
            adj = gamma_adjacent_nodes(mesh, "gamma", phi.jump_points(dom), 2.0 * mesh.h)
        if prev is not None:
            diff = u.values - prev.values
            k = int(np.argmin(diff))
            if diff[k] < worst:
                worst, where = float(diff[k]), tuple(map(float, mesh.vertices[k]))
        levels.append((n, u))
        values.append(u(probe, extrapolate=True))
        reports.append(rep)
        adj_min.append(float(u.values[adj].min()) if adj.size else math.nan)
        prev = u
    monotone = worst >= -tol
    if strict and not monotone:
        raise InvariantViolation(f"Scherk sequence decreases by {-worst:.3e} at {where}")
    # growth of the gamma-adjacent values in n, as a log-log slope
    am = np.array(adj_min)
    ok = am > 0
    rate = float(np.polyfit(np.log(np.array(n_list)[ok]), np.log(am[ok]), 1)[0]) if ok.sum() >= 2 else math.nan
    return ScherkSequence(levels, bool(monotone), values, probe, float(-worst), where, adj_min, rate, reports)
