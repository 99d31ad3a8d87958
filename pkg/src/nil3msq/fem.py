"""
Piecewise-linear finite elements for the divergence form of the equation.

On a P1 element the gradient g of u is constant, so the shifted gradient
q = g + tau (x2, -x1) is affine and the flux q / W is the rotated gradient of
W / tau. The element integrals of the flux and of its Jacobian therefore
reduce to one-dimensional integrals of sqrt(quadratic) along the three edges,
which have closed forms. This "exact" rule is the default; a 3-point
interior rule and a 7-point degree-5 rule are available for comparison.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from .domain import BoundaryData, Domain2D, boundary_distance
from .geometry import as_tau
from .mesh import Mesh, MeshQualityError, triangulate
from .msq import flux, flux_jacobian


log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


@dataclass(eq=False)
class ScalarField:
    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_vertices,):
            raise ValueError("field does not conform to the mesh")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field has non-finite nodal values")

    def __call__(self, pts, extrapolate: bool = False) -> np.ndarray:
        """P1 interpolation; NaN outside the mesh unless ``extrapolate``."""
        pts = np.asarray(pts, dtype=float)
        tri, lam = self.mesh.locator.locate(pts, extrapolate)
        vals = np.einsum("ij,ij->i", lam, self.values[self.mesh.triangles[np.maximum(tri, 0)]])
        vals = np.where(tri >= 0, vals, np.nan)
        return vals.reshape(pts.shape[:-1])

    def gradients(self) -> np.ndarray:
        """Constant gradient on each triangle, shape (M, 2)."""
        return np.einsum("mi,mij->mj", self.values[self.mesh.triangles], self.mesh.basis_gradients)

    def area_density(self, tau) -> np.ndarray:
        """W at the three interior quadrature points of each triangle, shape (M, 3)."""
        g = self.gradients()
        pts = _strang_points(self.mesh)
        q0 = g[:, None, 0] + tau * pts[..., 1]
        q1 = g[:, None, 1] - tau * pts[..., 0]
        return np.sqrt(1.0 + q0 * q0 + q1 * q1)

    def nodal_area_density(self, tau) -> np.ndarray:
        """Area-weighted average of element W over the triangles around each vertex."""
        w = self.area_density(tau).mean(axis=1) * self.mesh.areas
        acc = np.zeros(self.mesh.n_vertices)
        wt = np.zeros(self.mesh.n_vertices)
        for k in range(3):
            np.add.at(acc, self.mesh.triangles[:, k], w)
            np.add.at(wt, self.mesh.triangles[:, k], self.mesh.areas)
        return acc / wt

    def copy(self) -> "ScalarField":
        return ScalarField(self.mesh, self.values.copy())


def interpolate(mesh: Mesh, f) -> ScalarField:
    return ScalarField(mesh, np.asarray(f(mesh.vertices), dtype=float))


# ---------------------------------------------------------------------------
# element integrals

_STRANG = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])

_a1, _b1 = (6 - math.sqrt(15)) / 21, (9 + 2 * math.sqrt(15)) / 21
_a2, _b2 = (6 + math.sqrt(15)) / 21, (9 - 2 * math.sqrt(15)) / 21
_w1, _w2 = (155 - math.sqrt(15)) / 1200, (155 + math.sqrt(15)) / 1200
_GAUSS7 = np.array([[1 / 3, 1 / 3, 1 / 3], [_a1, _a1, _b1], [_a1, _b1, _a1], [_b1, _a1, _a1],
                    [_a2, _a2, _b2], [_a2, _b2, _a2], [_b2, _a2, _a2]])
_GAUSS7_W = np.array([9 / 40, _w1, _w1, _w1, _w2, _w2, _w2])


def _strang_points(mesh: Mesh) -> np.ndarray:
    return np.einsum("qk,mkd->mqd", _STRANG, mesh.vertices[mesh.triangles])


def _quadrature_flux(mesh, g, tau, bary, weights, sel):
    pts = np.einsum("qk,mkd->mqd", bary, mesh.vertices[mesh.triangles[sel]])
    gg = np.broadcast_to(g[sel][:, None, :], pts.shape)
    f = flux(gg, pts, tau)
    jac = flux_jacobian(gg, pts, tau)
    area = mesh.areas[sel]
    fint = np.einsum("q,mqd->md", weights, f) * area[:, None]
    jint = np.einsum("q,mqde->mde", weights, jac) * area[:, None, None]
    return fint, jint


def _exact_flux(mesh, g, tau, sel):
    """Closed-form element integrals of q/W and of its Jacobian (tau > 0)."""
    p = mesh.vertices[mesh.triangles[sel]]
    gs = g[sel]
    pa = p
    t = np.roll(p, -1, axis=1) - p  # edge vectors P_k -> P_{k+1}, counterclockwise
    q0 = np.stack([gs[:, None, 0] + tau * pa[..., 1], gs[:, None, 1] - tau * pa[..., 0]], axis=-1)
    q1 = tau * np.stack([t[..., 1], -t[..., 0]], axis=-1)
    alpha = np.sum(q1 * q1, -1)
    sa = np.sqrt(alpha)
    # components of q0 along and across the edge direction; Q(s) = |q0 + s q1|^2 + 1
    c = np.sum(q0 * q1, -1) / sa
    x = (q0[..., 0] * q1[..., 1] - q0[..., 1] * q1[..., 0]) / sa
    beta = 2.0 * sa * c
    r0 = np.sqrt(1.0 + c * c + x * x)
    r1 = np.sqrt(1.0 + (c + sa) ** 2 + x * x)
    # I0 = int_0^1 Q^{-1/2} = (asinh z1 - asinh z0)/sqrt(alpha); the difference is taken through
    # asinh(z1 sqrt(1+z0^2) - z0 sqrt(1+z1^2)) when z0, z1 share a sign
    same = beta * (2.0 * alpha + beta) > 0
    arg = 2.0 * sa * (alpha + beta) / np.where(same, (2.0 * alpha + beta) * r0 + beta * r1, 1.0)
    ax = np.sqrt(1.0 + x * x)
    direct = np.arcsinh((c + sa) / ax) - np.arcsinh(c / ax)
    i0 = np.where(same, np.arcsinh(arg), direct) / sa
    # I1 = int_0^1 s Q^{-1/2}
    i1 = (sa + 2.0 * c) / (sa * (r1 + r0)) - c / sa * i0
    # Isq = int_0^1 Q^{1/2}
    isq = 0.5 * r1 + c * (sa + 2.0 * c) / (2.0 * (r1 + r0)) + 0.5 * (1.0 + x * x) * i0
    # sum_e t_e = 0: subtract the mean edge value to limit round-off
    isq = isq - isq.mean(axis=1, keepdims=True)
    fint = -np.einsum("mkd,mk->md", t, isq) / tau
    vec = q0 * i0[..., None] + q1 * i1[..., None]
    vec = vec - vec.mean(axis=1, keepdims=True)
    jint = -np.einsum("mkd,mke->mde", t, vec) / tau
    jint = 0.5 * (jint + np.swapaxes(jint, 1, 2))
    return fint, jint


def element_integrals(mesh: Mesh, u: ScalarField | np.ndarray, tau, quadrature: str = "exact"):
    """Per-triangle integrals of the flux (M, 2) and of the flux Jacobian (M, 2, 2)."""
    tau = as_tau(tau)
    values = u.values if isinstance(u, ScalarField) else np.asarray(u, dtype=float)
    g = np.einsum("mi,mij->mj", values[mesh.triangles], mesh.basis_gradients)
    m = mesh.n_triangles
    fint = np.empty((m, 2))
    jint = np.empty((m, 2, 2))
    if quadrature == "strang3":
        return _quadrature_flux(mesh, g, tau, _STRANG, np.full(3, 1 / 3), slice(None))
    if quadrature == "gauss7":
        return _quadrature_flux(mesh, g, tau, _GAUSS7, _GAUSS7_W, slice(None))
    if quadrature != "exact":
        raise ValueError(f"unknown quadrature rule {quadrature!r}")
    p = mesh.vertices[mesh.triangles]
    size = np.max(np.hypot(*(np.roll(p, -1, axis=1) - p).transpose(2, 0, 1)), axis=1)
    cen = p.mean(axis=1)
    w = np.sqrt(1.0 + (g[:, 0] + tau * cen[:, 1]) ** 2 + (g[:, 1] - tau * cen[:, 0]) ** 2)
    # the edge form cancels like eps * W / (tau h); when tau h / W is small the flux is nearly
    # constant on the element and the degree-5 rule is accurate to round-off instead
    small = tau * size < 1e-2 * w
    if np.any(small):
        fint[small], jint[small] = _quadrature_flux(mesh, g, tau, _GAUSS7, _GAUSS7_W, small)
    if np.any(~small):
        fint[~small], jint[~small] = _exact_flux(mesh, g, tau, ~small)
    return fint, jint


def assemble(mesh: Mesh, u: ScalarField | np.ndarray, tau, quadrature: str = "exact"):
    """Residual vector and tangent matrix over all nodes.

    ``residual[i] = sum_T int_T flux . grad(lambda_i)``; the tangent is the
    derivative with respect to nodal values. Restrict both to interior
    nodes for the Dirichlet problem.
    """
    fint, jint = element_integrals(mesh, u, tau, quadrature)
    b = mesh.basis_gradients
    # basis gradients are constant per element and the integrals carry the area
    res_loc = np.einsum("mkd,md->mk", b, fint)
    k_loc = np.einsum("mid,mde,mje->mij", b, jint, b)
    n = mesh.n_vertices
    tris = mesh.triangles
    residual = np.zeros(n)
    for k in range(3):
        np.add.at(residual, tris[:, k], res_loc[:, k])
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    tangent = sparse.coo_matrix((k_loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return residual, tangent


def stiffness(mesh: Mesh) -> sparse.csr_matrix:
    b = mesh.basis_gradients
    k_loc = np.einsum("mid,mjd->mij", b, b) * mesh.areas[:, None, None]
    tris = mesh.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = mesh.n_vertices
    return sparse.coo_matrix((k_loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()


# ---------------------------------------------------------------------------
# Newton


@dataclass
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 50
    max_halvings: int = 40
    quadrature: str = "exact"


@dataclass
class SolveReport:
    iterations: int
    residual_norm_history: list
    max_W: float
    attainment_gap: float
    converged: bool
    layer_gap: float = float("nan")
    message: str = ""

    def as_lines(self) -> list[str]:
        hist = " ".join(f"{r:.6e}" for r in self.residual_norm_history)
        return [
            f"converged = {str(self.converged).lower()}",
            f"iterations = {self.iterations}",
            f"residual_norm = {self.residual_norm_history[-1]:.6e}",
            f"residual_norm_history = {hist}",
            f"max_W = {self.max_W:.9e}",
            f"attainment_gap = {self.attainment_gap:.6e}",
            f"layer_gap = {self.layer_gap:.6e}",
        ] + ([f"message = {self.message}"] if self.message else [])


def _solve(mat, rhs):
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        try:
            x = spsolve(mat.tocsc(), rhs)
        except (MatrixRankWarning, RuntimeError) as exc:
            raise MeshQualityError(f"singular linear system: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise MeshQualityError("non-finite linear solve; check mesh quality")
    return x


def boundary_vector(mesh: Mesh, phi) -> np.ndarray:
    """Dirichlet values at mesh.boundary_nodes from BoundaryData, a point function or an array."""
    if isinstance(phi, BoundaryData):
        return mesh.boundary_values(phi)
    if callable(phi):
        return np.asarray(phi(mesh.vertices[mesh.boundary_nodes]), dtype=float)
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (len(mesh.boundary_nodes),):
        raise ValueError("boundary value array does not match the boundary nodes")
    return phi


def laplace_initial(mesh: Mesh, ub: np.ndarray) -> np.ndarray:
    u = np.zeros(mesh.n_vertices)
    u[mesh.boundary_nodes] = ub
    inner = mesh.interior_nodes
    if inner.size:
        k = stiffness(mesh)
        rhs = -k[inner][:, mesh.boundary_nodes] @ ub
        u[inner] = _solve(k[inner][:, inner], rhs)
    return u


def newton_solve(mesh: Mesh, phi, tau, opts: SolverOptions | None = None, initial=None,
                 jumps: np.ndarray | None = None) -> tuple[ScalarField, SolveReport]:
    """Damped Newton for the Dirichlet problem with nodal data from ``phi``.

    ``initial`` may be a ScalarField or nodal array on the same mesh (its
    boundary values are replaced by the data); by default the Laplace
    solution with the same data is used.
    """
    tau = as_tau(tau)
    opts = opts or SolverOptions()
    ub = boundary_vector(mesh, phi)
    inner = mesh.interior_nodes
    if initial is None:
        u = laplace_initial(mesh, ub)
    else:
        u = np.array(initial.values if isinstance(initial, ScalarField) else initial, dtype=float)
        u[mesh.boundary_nodes] = ub

    def res_norm(vals):
        r, k = assemble(mesh, vals, tau, opts.quadrature)
        return float(np.linalg.norm(r[inner])), r, k

    norm, r, k = res_norm(u)
    history = [norm]
    converged = norm < opts.tol
    message = ""
    it = 0
    while not converged and it < opts.max_iter:
        it += 1
        kii = k[inner][:, inner]
        step = _solve(kii, -r[inner])
        lam = 1.0
        for _ in range(opts.max_halvings + 1):
            trial = u.copy()
            trial[inner] += lam * step
            t_norm, t_r, t_k = res_norm(trial)
            if t_norm < norm:
                break
            lam *= 0.5
        else:
            message = "line search exhausted"
            break
        u, norm, r, k = trial, t_norm, t_r, t_k
        history.append(norm)
        log.debug("newton %d: |R| = %.3e, step = %.3g", it, norm, lam)
        converged = norm < opts.tol
    if not converged and not message:
        message = "iteration limit reached"
    field_ = ScalarField(mesh, u)
    if jumps is None and isinstance(phi, BoundaryData) and mesh.domain is not None:
        jumps = phi.jump_points(mesh.domain)
    report = SolveReport(
        iterations=it,
        residual_norm_history=history,
        max_W=float(field_.area_density(tau).max()),
        attainment_gap=pinned_gap(field_, ub, jumps),
        converged=bool(converged),
        layer_gap=layer_gap(field_, ub, jumps),
        message=message,
    )
    return field_, report


# ---------------------------------------------------------------------------
# boundary attainment


def _away_from(mesh: Mesh, nodes: np.ndarray, jumps, factor: float = 2.0, radius: float = 0.0) -> np.ndarray:
    if jumps is None or len(jumps) == 0:
        return np.ones(len(nodes), dtype=bool)
    pts = mesh.vertices[nodes]
    jumps = np.asarray(jumps, dtype=float).reshape(-1, 2)
    d = np.min(np.hypot(pts[:, None, 0] - jumps[None, :, 0], pts[:, None, 1] - jumps[None, :, 1]), axis=1)
    return d > max(factor * mesh.h, radius)


def pinned_gap(u: ScalarField, ub: np.ndarray, jumps=None, select=None) -> float:
    """max |u - phi| over boundary nodes farther than 2h from the jump set (zero for pinned data)."""
    mesh = u.mesh
    mask = _away_from(mesh, mesh.boundary_nodes, jumps)
    if select is not None:
        mask &= select
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(u.values[mesh.boundary_nodes][mask] - ub[mask])))


def layer_gap(u: ScalarField, ub: np.ndarray, jumps=None, select=None, radius: float = 0.0) -> float:
    """Discrete boundary-attainment gap.

    For every boundary node b farther than max(2h, radius) from the jump set
    (and in ``select`` when given), the largest |u_j - phi(b)| over interior
    neighbours j of b. Converges to zero with h when the data are attained
    continuously and stays bounded below when they are not. Next to a jump
    the solution fans out self-similarly, so a fixed ``radius`` is needed
    for the gap to decay there.
    """
    mesh = u.mesh
    mask = _away_from(mesh, mesh.boundary_nodes, jumps, radius=radius)
    if select is not None:
        mask &= select
    adj = mesh.adjacency
    worst = 0.0
    isb = mesh.is_boundary
    for k in np.nonzero(mask)[0]:
        b = mesh.boundary_nodes[k]
        nb = adj.indices[adj.indptr[b]:adj.indptr[b + 1]]
        nb = nb[~isb[nb]]
        if nb.size:
            worst = max(worst, float(np.max(np.abs(u.values[nb] - ub[k]))))
    return worst


# ---------------------------------------------------------------------------
# studies and comparisons


def check_comparison(u: ScalarField, v: ScalarField, tol: float = 1e-8) -> bool:
    """True iff u <= v + tol at every node."""
    if u.mesh is not v.mesh and not (
        u.mesh.vertices.shape == v.mesh.vertices.shape and np.array_equal(u.mesh.vertices, v.mesh.vertices)
        and np.array_equal(u.mesh.triangles, v.mesh.triangles)
    ):
        raise ValueError("fields live on different meshes")
    return bool(np.all(u.values <= v.values + tol))


def default_probe_set(dom: Domain2D, n: int = 21, margin: float = 0.15) -> np.ndarray:
    """Grid points inside ``dom`` at distance >= margin * diameter from the boundary."""
    lo, hi = dom.bbox()
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    pts = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
    pts = pts[dom.contains(pts)]
    d = boundary_distance(dom, pts)
    return pts[d >= margin * dom.diameter_hint()]


@dataclass
class RefinementRow:
    h: float
    attainment_gap: float
    layer_gap: float
    interior_change: float
    max_W: float
    converged: bool
    n_vertices: int
    iterations: int
    error: str = ""


@dataclass
class RefinementTable:
    rows: list = field(default_factory=list)
    probe: np.ndarray | None = None
    probe_values: list = field(default_factory=list)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    @property
    def max_W_stabilizes(self) -> bool:
        w = self.column("max_W")
        if len(w) < 3:
            return False
        d = np.abs(np.diff(w))
        return bool(d[-1] <= d[0])


def refinement_study(dom: Domain2D, phi: BoundaryData, tau, h_list, probe=None, gap_select=None,
                     opts: SolverOptions | None = None, mesher=None, jobs: int = 1,
                     gap_radius: float = 0.0) -> RefinementTable:
    """Solve at each h and tabulate boundary attainment and interior Cauchy differences.

    ``gap_select(mesh) -> bool mask over boundary nodes`` restricts both gaps
    (e.g. to one arc) and ``gap_radius`` widens the exclusion around jumps
    for the layer gap. ``interior_change`` of row i compares rows i-1 and i
    on the probe set and is NaN for the first row.
    """
    h_list = [float(h) for h in h_list]
    if any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise ValueError("h_list must be decreasing")
    probe = default_probe_set(dom) if probe is None else np.asarray(probe, dtype=float)
    mesher = mesher or (lambda h: triangulate(dom, h))

    def one(h):
        try:
            mesh = mesher(h)
            u, rep = newton_solve(mesh, phi, tau, opts)
        except (MeshQualityError, SolverError) as exc:
            return None, None, str(exc)
        ub = boundary_vector(mesh, phi)
        sel = None if gap_select is None else gap_select(mesh)
        jumps = phi.jump_points(dom) if isinstance(phi, BoundaryData) else None
        rep.attainment_gap = pinned_gap(u, ub, jumps, sel)
        rep.layer_gap = layer_gap(u, ub, jumps, sel, gap_radius)
        return u, rep, ""

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(one, h_list))
    else:
        results = [one(h) for h in h_list]

    table = RefinementTable(probe=probe)
    prev = None
    for h, (u, rep, err) in zip(h_list, results):
        if u is None:
            table.rows.append(RefinementRow(h, math.nan, math.nan, math.nan, math.nan, False, 0, 0, err))
            table.probe_values.append(None)
            prev = None
            continue
        vals = u(probe, extrapolate=True)
        change = math.nan if prev is None else float(np.max(np.abs(vals - prev)))
        w_probe = float(np.max(_probe_W(u, probe, tau))) if len(probe) else rep.max_W
        table.rows.append(RefinementRow(h, rep.attainment_gap, rep.layer_gap, change, w_probe, rep.converged,
                                        u.mesh.n_vertices, rep.iterations,
                                        rep.message if not rep.converged else ""))
        table.probe_values.append(vals)
        prev = vals
    return table


def _probe_W(u: ScalarField, probe: np.ndarray, tau) -> np.ndarray:
    tri, _ = u.mesh.locator.locate(probe, extrapolate=True)
    g = u.gradients()[tri]
    q0 = g[:, 0] + tau * probe[:, 1]
    q1 = g[:, 1] - tau * probe[:, 0]
    return np.sqrt(1.0 + q0 * q0 + q1 * q1)
