"""Diagnostic probe for the notched non-convex domain.

Two independent parts: the barrier geometry (waist catenoid and the shadow
sweep that first touches the notch arc gamma1) and paired refinement runs on
the notched domain and on its convex partner with the same data. The gap
floor on the notched domain is a numerical signature, not a proof, and every
output carries the label ``diagnostic``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ..domain import BoundaryData, Domain2D, classify_nonconvexity, is_convex
from ..exact import HorizontalCatenoidShadow, solve_waist_equation, waist_residual
from ..fem import RefinementTable, SolverOptions, refinement_study
from ..geometry import as_tau
from ..mesh import triangulate

LABEL = "diagnostic"


def notch_data(dom: Domain2D, H: float) -> BoundaryData:
    """0 on the outer boundary, H on gamma1, linear ramps on the remaining notch sides."""
    H = float(H)
    pieces = {a.id: 0.0 for a in dom.arcs}
    pieces["gamma1"] = H
    rb, rt = dom.arc("ramp_bottom"), dom.arc("ramp_top")
    pieces["ramp_bottom"] = lambda s, L=rb.length: H * np.asarray(s, dtype=float) / L
    pieces["ramp_top"] = lambda s, L=rt.length: H * (1.0 - np.asarray(s, dtype=float) / L)
    return BoundaryData.build(dom, pieces)


@dataclass
class ShadowContact:
    B: float
    eps: float
    mu: float
    waist_residual: float
    shift: float
    mu_prime: float
    contact_points: np.ndarray
    tangency_distance: float
    penetration: float


def _gamma1_vertices(dom: Domain2D, shift: float) -> np.ndarray:
    arc = dom.arc("gamma1")
    verts = np.array(getattr(arc, "points", (arc.start, arc.end)), dtype=float)
    return verts + np.array([shift, 0.0])


def _contact_gap(alpha: float, verts: np.ndarray) -> float:
    # x1 - alpha cosh(x2/alpha) is concave along each segment, so its minimum sits at a vertex
    return float(np.min(verts[:, 0] - alpha * np.cosh(verts[:, 1] / alpha)))


def _polyline_distance(verts: np.ndarray, p: np.ndarray) -> float:
    a, b = verts[:-1], verts[1:]
    ab = b - a
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
    return float(np.min(np.hypot(*(a + t[:, None] * ab - p).T)))


def shadow_first_contact(dom: Domain2D) -> ShadowContact:
    """Barrier geometry of the notched domain.

    B = 2 max |x2| over the boundary, mu solves the waist equation
    mu + eps/4 = mu cosh(B/mu), and the domain is translated along x1 so that
    the notch floor sits at x1 = mu + eps/4. The shadows
    {|x1| <= alpha cosh(x2/alpha)} grow with alpha; mu' in (mu, mu + eps/4)
    is the first alpha whose shadow touches gamma1, found by root bracketing.
    The contact is checked by minimizing the distance between the shadow
    boundary and gamma1.
    """
    p = dom.params
    if p.get("shape") != "notched":
        raise ValueError("shadow_first_contact needs a notched rectangle")
    eps = float(p["eps"])
    B = 2.0 * float(max(np.max(np.abs(poly[:, 1])) for poly in dom.boundary_polygons()))
    mu = solve_waist_equation(B, eps)
    shift = mu + eps / 4.0 - p["d"]
    verts = _gamma1_vertices(dom, shift)
    lo, hi = mu, mu + eps / 4.0
    if not (_contact_gap(lo, verts) > 0.0 >= _contact_gap(hi, verts)):
        raise ValueError("the shadow sweep does not meet gamma1 inside (mu, mu + eps/4)")
    mu_p = optimize.brentq(_contact_gap, lo, hi, args=(verts,), xtol=1e-15, rtol=4 * np.finfo(float).eps,
                           maxiter=500)
    shadow = HorizontalCatenoidShadow(mu_p)
    gap = verts[:, 0] - shadow.halfwidth(verts[:, 1])
    contact = verts[np.abs(gap) <= 1e-9 * max(1.0, mu_p)]
    ys = verts[:, 1]
    dist = lambda y: _polyline_distance(verts, np.array([shadow.halfwidth(y), y]))  # noqa: E731
    best = math.inf
    for y0 in contact[:, 1] if len(contact) else [0.0]:
        res = optimize.minimize_scalar(dist, bounds=(max(ys.min(), y0 - eps), min(ys.max(), y0 + eps)),
                                       method="bounded", options={"xatol": 1e-12})
        best = min(best, float(res.fun), dist(y0))
    # penetration: how far gamma1 reaches into the open shadow
    samples = np.concatenate([np.linspace(a, b, 201) for a, b in zip(verts[:-1], verts[1:])])
    pen = float(max(0.0, -np.min(samples[:, 0] - shadow.halfwidth(samples[:, 1]))))
    return ShadowContact(B, eps, mu, waist_residual(mu, B, eps), shift, mu_p, contact - [shift, 0.0], best, pen)


def gamma1_mesher(dom: Domain2D, grading: float = 1.0, slope: float = 0.3, samples: int = 200):
    """h -> mesh graded toward gamma1 with local size max(grading h^2, slope * dist), capped at h."""
    arc = dom.arc("gamma1")
    pts = np.array([arc.point(s) for s in np.linspace(0.0, arc.length, samples)])

    def size_fn(h):
        def size(p):
            p = np.asarray(p, dtype=float).reshape(-1, 2)
            d = np.min(np.hypot(p[:, None, 0] - pts[None, :, 0], p[:, None, 1] - pts[None, :, 1]), axis=1)
            return np.minimum(h, np.maximum(grading * h * h, slope * d))
        return size

    return lambda h: triangulate(dom, h, size=size_fn(h))


def notch_probe(dom: Domain2D, offset: float = 0.1, n: int = 9) -> np.ndarray:
    """Points at distance ``offset`` inside the notch floor."""
    c, d = dom.params["c"], dom.params["d"]
    ys = np.linspace(-c, c, n)
    return np.stack([np.full(n, d - offset), ys], axis=1)


@dataclass
class NonexistenceProbe:
    label: str
    H: float
    tau: float
    classification: str | None
    geometry: ShadowContact
    notched: RefinementTable
    partner: RefinementTable

    @property
    def notched_gaps(self) -> list:
        return self.notched.column("layer_gap")

    @property
    def partner_gaps(self) -> list:
        return self.partner.column("layer_gap")

    def gap_floor(self) -> float:
        return float(np.min(self.notched_gaps))

    def partner_decreasing(self) -> bool:
        g = np.asarray(self.partner_gaps)
        return bool(np.all(np.diff(g) < 0))


def run_nonexistence_probe(dom: Domain2D | None = None, H: float = 0.5, tau=0.5, h_list=(0.1, 0.05, 0.025),
                           opts: SolverOptions | None = None, jobs: int = 1) -> NonexistenceProbe:
    """Geometry of the barrier construction plus paired refinement runs on gamma1.

    Both runs use meshes graded toward gamma1 and report the layer gap on
    gamma1 nodes and max W on probe points just inside the notch floor.
    """
    tau = as_tau(tau)
    dom = dom if dom is not None else Domain2D.notched_rectangle()
    if is_convex(dom):
        raise ValueError("the probe needs a non-convex domain")
    kind = classify_nonconvexity(dom)
    geom = shadow_first_contact(dom)
    partner = dom.convexified()
    probe = notch_probe(dom)
    select = lambda mesh: mesh.boundary_arc == "gamma1"  # noqa: E731
    tables = []
    for D in (dom, partner):
        tables.append(refinement_study(D, notch_data(D, H), tau, h_list, probe=probe, gap_select=select,
                                       opts=opts, mesher=gamma1_mesher(D), jobs=jobs))
    return NonexistenceProbe(LABEL, float(H), tau, kind, geom, tables[0], tables[1])
