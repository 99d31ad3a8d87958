"""Upper and lower barriers at a convex boundary point, built from a triangle sub-solve."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..domain import BoundaryData, Domain2D, locate_on_boundary
from ..fem import ScalarField, SolveReport, SolverOptions, newton_solve
from ..geometry import as_tau
from ..mesh import triangulate
from .bounded import InvariantViolation


@dataclass
class Barrier:
    omega: ScalarField
    v: ScalarField
    report: SolveReport
    triangle: Domain2D
    p0: np.ndarray
    p0_node: int
    phi_p0: float
    M1: float
    k: int
    lower: bool
    continuation_steps: int

    @property
    def level(self) -> float:
        """phi(p0) + 1/k for the upper barrier, phi(p0) - 1/k for the lower one."""
        return self.phi_p0 - 1.0 / self.k if self.lower else self.phi_p0 + 1.0 / self.k

    @property
    def value_at_p0(self) -> float:
        return float(self.omega.values[self.p0_node])

    def one_sided_margin(self) -> float:
        """min of omega - level (upper) or level - omega (lower) over all nodes."""
        d = self.omega.values - self.level
        return float(np.min(-d if self.lower else d))


def _marker(dom: Domain2D, p0):
    if isinstance(p0, tuple) and len(p0) == 2 and isinstance(p0[0], str):
        return p0[0], float(p0[1])
    ids, s, dist = locate_on_boundary(dom, np.asarray(p0, dtype=float).reshape(1, 2))
    if dist[0] > 1e-9 * max(1.0, dom.diameter_hint()):
        raise ValueError("p0 is not on the boundary")
    return str(ids[0]), float(s[0])


def is_convex_point(dom: Domain2D, p0, radius: float, tol: float = 1e-9) -> bool:
    """True iff the boundary near p0 lies on the inner side of the tangent line at p0."""
    arc_id, s = _marker(dom, p0)
    arc = dom.arc(arc_id)
    p = np.asarray(arc.point(s), dtype=float)
    t = np.asarray(arc.tangent(s), dtype=float)
    normal = np.array([-t[1], t[0]])
    pts = np.concatenate(dom.boundary_polygons(spacing=radius / 50.0))
    near = pts[np.hypot(*(pts - p).T) <= radius]
    return bool(np.all((near - p) @ normal >= -tol * max(1.0, radius)))


def build_barrier(dom: Domain2D, p0, phi: BoundaryData, M: float, k: int, tau, h: float,
                  half_width: float = 0.5, height: float = 0.5, margin: float = 1.0, lower: bool = False,
                  size=None, opts: SolverOptions | None = None, max_steps: int = 6) -> Barrier:
    """Barrier omega = v + phi(p0) +- 1/k on a triangle T touching the boundary at p0.

    T has the side ``gamma`` on the tangent line at p0, centred there, and its
    apex along the inward normal. v solves the equation on T with 0 on gamma
    and s M1 on the two other sides, s = +1 (upper) or -1 (lower), where
    M1 = max(M, |phi(p0)| + 1/k) + margin. The lower barrier is solved
    directly with negative data. If Newton fails, M1 is reached by
    continuation in at most ``max_steps`` equal increments.
    """
    tau = as_tau(tau)
    if int(k) < 1:
        raise ValueError("k must be a positive integer")
    k = int(k)
    arc_id, s0 = _marker(dom, p0)
    arc = dom.arc(arc_id)
    p = np.asarray(arc.point(s0), dtype=float)
    if not is_convex_point(dom, (arc_id, s0), radius=2.0 * max(half_width, height)):
        raise InvariantViolation(f"boundary point {tuple(p)} is not a convex point")
    t = np.array(arc.tangent(s0), dtype=float)
    t /= np.linalg.norm(t)
    nin = np.array([-t[1], t[0]])
    A, B, C = p - half_width * t, p + half_width * t, p + height * nin
    tri = Domain2D.triangle(tuple(A), tuple(B), tuple(C))
    phi_p0 = float(phi.eval(arc_id, s0))
    M1 = max(float(M), abs(phi_p0) + 1.0 / k) + float(margin)
    sign = -1.0 if lower else 1.0
    mesh = triangulate(tri, h, size=size, breakpoints={"gamma": [half_width]})
    node = int(np.argmin(np.hypot(*(mesh.vertices - p).T)))
    if np.hypot(*(mesh.vertices[node] - p)) > 1e-12 * max(1.0, np.linalg.norm(p)):
        raise InvariantViolation("p0 is not a mesh node")

    def data(level):
        return BoundaryData.build(tri, {"gamma": 0.0, "alpha": sign * level, "beta": sign * level})

    v, rep = newton_solve(mesh, data(M1), tau, opts)
    steps = 1
    if not rep.converged:
        v = None
        for steps in range(2, max_steps + 1):
            for j in range(1, steps + 1):
                v, rep = newton_solve(mesh, data(M1 * j / steps), tau, opts, initial=v)
                if not rep.converged:
                    break
            if rep.converged:
                break
            v = None
    if not rep.converged:
        raise InvariantViolation(f"barrier solve failed after continuation: {rep.message}")
    shift = phi_p0 + sign / k
    omega = ScalarField(mesh, v.values + shift)
    return Barrier(omega, v, rep, tri, p, node, phi_p0, M1, k, lower, steps)


def barrier_dominates(barrier: Barrier, u: ScalarField, tol: float = 1e-8) -> tuple[bool, float]:
    """Check u <= omega (upper) or u >= omega (lower) at barrier nodes covered by ``u``'s mesh."""
    vals = u(barrier.omega.mesh.vertices)
    ok = ~np.isnan(vals)
    if not ok.any():
        raise ValueError("the fields do not overlap")
    d = barrier.omega.values[ok] - vals[ok]
    worst = float(np.min(-d if barrier.lower else d))
    return worst >= -tol, worst
