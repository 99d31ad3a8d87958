"""
Triangulation of bounded domains.

Boundary arcs are sampled at the target spacing and handed to Shewchuk's
Triangle as a planar straight-line graph with a minimum-angle constraint.
Steiner points on the boundary are disabled so that every boundary vertex
is one of our samples and keeps its (arc id, arclength) marker.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import triangle as tr
from scipy import sparse
from scipy.spatial import cKDTree

from .domain import BoundaryData, Domain2D, arc_samples


class MeshQualityError(RuntimeError):
    pass


@dataclass(eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_nodes: np.ndarray
    boundary_arc: np.ndarray  # arc id per boundary node
    boundary_s: np.ndarray  # arclength per boundary node
    h: float
    domain: Domain2D | None = field(default=None, repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def is_boundary(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_nodes] = True
        return mask

    @cached_property
    def interior_nodes(self) -> np.ndarray:
        return np.nonzero(~self.is_boundary)[0]

    def marker(self, node: int) -> tuple[str, float]:
        k = np.searchsorted(self.boundary_nodes, node)
        if k >= len(self.boundary_nodes) or self.boundary_nodes[k] != node:
            raise KeyError(f"vertex {node} is not a boundary vertex")
        return str(self.boundary_arc[k]), float(self.boundary_s[k])

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """(M, 3, 2) gradients of the barycentric hat functions on each triangle."""
        p = self.vertices[self.triangles]
        two_a = 2.0 * self.areas
        # grad lambda_i is the opposite edge p_{i+2} - p_{i+1} turned by +90 degrees, over 2A
        e = np.roll(p, -2, axis=1) - np.roll(p, -1, axis=1)
        return np.stack([-e[..., 1], e[..., 0]], axis=-1) / two_a[:, None, None]

    @cached_property
    def edges(self) -> np.ndarray:
        keys, n = _edge_keys(self.triangles)
        keys = np.unique(keys)
        return np.stack([keys // n, keys % n], axis=1)

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        e = self.edges
        n = self.n_vertices
        data = np.ones(2 * len(e), dtype=np.int8)
        return sparse.csr_matrix((data, (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n))

    def neighbors(self, node: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[node]:a.indptr[node + 1]]

    def angles(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        out = np.empty(self.triangles.shape)
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            cos = np.sum(u * v, -1) / (np.hypot(*u.T) * np.hypot(*v.T))
            out[:, i] = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
        return out

    @property
    def min_angle(self) -> float:
        return float(self.angles().min())

    @property
    def max_edge(self) -> float:
        v = self.vertices[self.edges]
        return float(np.max(np.hypot(*(v[:, 1] - v[:, 0]).T)))

    def boundary_values(self, phi: BoundaryData) -> np.ndarray:
        vals = np.empty(len(self.boundary_nodes))
        for arc_id in np.unique(self.boundary_arc):
            sel = self.boundary_arc == arc_id
            vals[sel] = phi.eval(str(arc_id), self.boundary_s[sel])
        return vals

    @cached_property
    def locator(self) -> "Locator":
        return Locator(self)


class Locator:
    """Point location by nearest centroids followed by a barycentric test."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        p = mesh.vertices[mesh.triangles]
        self.tree = cKDTree(p.mean(axis=1))
        self.k = min(16, mesh.n_triangles)

    def barycentric(self, tri_idx, pts) -> np.ndarray:
        p = self.mesh.vertices[self.mesh.triangles[tri_idx]]
        a, b, c = p[..., 0, :], p[..., 1, :], p[..., 2, :]
        v0, v1, v2 = b - a, c - a, pts - a
        den = v0[..., 0] * v1[..., 1] - v0[..., 1] * v1[..., 0]
        l1 = (v2[..., 0] * v1[..., 1] - v2[..., 1] * v1[..., 0]) / den
        l2 = (v0[..., 0] * v2[..., 1] - v0[..., 1] * v2[..., 0]) / den
        return np.stack([1.0 - l1 - l2, l1, l2], axis=-1)

    def locate(self, pts, extrapolate: bool = False):
        """Return (triangle index, barycentric coordinates); index -1 when outside."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        _, cand = self.tree.query(pts, k=self.k)
        cand = np.asarray(cand).reshape(len(pts), -1)
        bary = self.barycentric(cand, pts[:, None, :])
        worst = bary.min(axis=-1)
        best = np.argmax(worst, axis=1)
        rows = np.arange(len(pts))
        tri = cand[rows, best]
        lam = bary[rows, best]
        ok = worst[rows, best] >= -1e-10
        if not extrapolate:
            tri = np.where(ok, tri, -1)
        return tri, lam


def _loop_samples(loop, size, breakpoints):
    pts, arcs, svals = [], [], []
    for a in loop:
        s = arc_samples(a, size)
        extra = breakpoints.get(a.id, ())
        if len(extra):
            s = np.unique(np.concatenate([s, np.asarray(extra, dtype=float)]))
            # drop samples crowding a breakpoint
            keep = np.ones(len(s), dtype=bool)
            for b in extra:
                close = (np.abs(s - b) < 0.3 * (s[1] - s[0] if len(s) > 1 else 1.0)) & (s != b)
                close &= (s != 0.0) & (s != a.length)
                keep &= ~close
            s = s[keep]
        s = s[:-1]
        pts.append(a.point(s))
        arcs.extend([a.id] * len(s))
        svals.append(s)
    return np.concatenate(pts), arcs, np.concatenate(svals)


def triangulate(dom: Domain2D, h: float, size=None, min_angle: float = 20.0, breakpoints=None,
                max_rounds: int = 12) -> Mesh:
    """Quality triangulation of a bounded domain.

    Parameters
    ----------
    h : float
        Target edge length (uniform meshes).
    size : callable, optional
        Local target edge length ``size(points) -> array``; overrides ``h`` where smaller.
    breakpoints : dict, optional
        Extra arclength positions per arc that must be mesh vertices
        (discontinuities of the data inside an arc).
    """
    if not dom.bounded:
        raise ValueError(f"{dom.kind} domain must be truncated before meshing")
    if not h > 0:
        raise ValueError("h must be positive")
    breakpoints = breakpoints or {}
    local = h if size is None else (lambda p: min(h, float(size(np.asarray(p)))))
    verts, arcs, svals, segs, seg_info = [], [], [], [], []
    offset = 0
    for loop in dom.loops():
        p, a, s = _loop_samples(loop, local, breakpoints)
        m = len(p)
        verts.append(p)
        arcs.extend(a)
        svals.append(s)
        idx = np.arange(m) + offset
        segs.append(np.stack([idx, np.roll(idx, -1)], axis=1))
        for k in range(m):
            nxt = (k + 1) % m
            s_end = s[nxt] if (a[nxt] == a[k] and nxt != 0) else dom.arc(a[k]).length
            seg_info.append((a[k], s[k], s_end))
        offset += m
    verts = np.concatenate(verts)
    arcs = np.asarray(arcs, dtype=object)
    svals = np.concatenate(svals)
    segs = np.concatenate(segs)
    pslg = {"vertices": verts, "segments": segs, "segment_markers": np.arange(1, len(segs) + 1)[:, None]}
    if dom.holes:
        pslg["holes"] = np.asarray(dom.holes, dtype=float)
    area = math.sqrt(3.0) / 4.0 * h * h

    def run(flag):
        out = tr.triangulate(pslg, f"pq{min_angle:g}a{np.format_float_positional(area, trim='-')}{flag}Q")
        for _ in range(max_rounds if size is not None else 0):
            p = out["vertices"][out["triangles"]]
            target = np.minimum(h, np.asarray(size(p.mean(axis=1)), dtype=float))
            d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
            cur = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
            want = math.sqrt(3.0) / 4.0 * target**2
            if np.all(cur <= 1.25 * want):
                break
            out = tr.triangulate({"vertices": out["vertices"], "triangles": out["triangles"],
                                  "segments": out["segments"], "segment_markers": out["segment_markers"],
                                  "triangle_max_area": np.minimum(cur, want)},
                                 f"rpq{min_angle:g}a{flag}Q")
        return out

    # first keep the boundary samples untouched; allow boundary Steiner points only if quality demands it
    for flag in ("Y", ""):
        out = run(flag)
        mesh = _assemble_mesh(out, verts, arcs, svals, segs, seg_info, h, dom)
        if mesh.min_angle >= min_angle - 1e-6:
            break
    if np.any(mesh.areas <= 0):
        raise MeshQualityError("degenerate or inverted triangles")
    if mesh.min_angle < min_angle - 1e-6:
        raise MeshQualityError(
            f"minimum angle {mesh.min_angle:.2f} below {min_angle} degrees; h = {h} is too coarse for the geometry")
    return mesh


def _assemble_mesh(out, verts, arcs, svals, segs, seg_info, h, dom) -> Mesh:
    nb = len(verts)
    vertices = np.asarray(out["vertices"], dtype=float)
    if not np.array_equal(vertices[:nb], verts):
        raise MeshQualityError("mesher moved boundary samples")
    tris = np.asarray(out["triangles"], dtype=np.int64)
    bnodes = _boundary_edge_nodes(tris)
    extra = bnodes[bnodes >= nb]
    b_arc = list(arcs)
    b_s = list(svals)
    if extra.size:
        # Steiner points on input segments: marker by linear interpolation along the segment
        owner = {}
        for (i, j), mk in zip(out["segments"], np.ravel(out["segment_markers"])):
            owner.setdefault(int(i), int(mk) - 1)
            owner.setdefault(int(j), int(mk) - 1)
        for v in extra:
            k = owner.get(int(v))
            if k is None or k < 0:
                raise MeshQualityError("mesher inserted an unmarked boundary vertex")
            arc_id, s_a, s_b = seg_info[k]
            pa, pb = verts[segs[k, 0]], verts[segs[k, 1]]
            t = math.dist(vertices[v], pa) / math.dist(pb, pa)
            s_new = s_a + t * (s_b - s_a)
            b_arc.append(arc_id)
            b_s.append(s_new)
            # chords of curved arcs: move the point onto the arc
            vertices[v] = dom.arc(arc_id).point(s_new)
    order = np.argsort(np.r_[np.arange(nb), extra], kind="stable")
    nodes = np.r_[np.arange(nb), extra][order]
    return Mesh(vertices, tris, nodes, np.asarray(b_arc, dtype=object)[order], np.asarray(b_s)[order],
                float(h), dom)


def _edge_keys(tris: np.ndarray):
    e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    e.sort(axis=1)
    n = int(tris.max()) + 1
    return e[:, 0] * n + e[:, 1], n


def _boundary_edge_nodes(tris: np.ndarray) -> np.ndarray:
    keys, n = _edge_keys(tris)
    uniq, counts = np.unique(keys, return_counts=True)
    once = uniq[counts == 1]
    return np.unique(np.concatenate([once // n, once % n]))


def structured_rectangle(dom: Domain2D, h: float, diagonal: str = "alternate") -> Mesh:
    """Criss-cross-free structured mesh of an axis-parallel rectangle domain (arc ids bottom/right/top/left)."""
    x0, y0, x1, y1 = dom.params["box"]
    nx = max(1, int(math.ceil((x1 - x0) / h - 1e-9)))
    ny = max(1, int(math.ceil((y1 - y0) / h - 1e-9)))
    xs, ys = np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1)
    # boundary nodes first, counterclockwise from (x0, y0)
    ring = ([(i, 0) for i in range(nx)] + [(nx, j) for j in range(ny)]
            + [(i, ny) for i in range(nx, 0, -1)] + [(0, j) for j in range(ny, 0, -1)])
    inner = [(i, j) for j in range(1, ny) for i in range(1, nx)]
    order = ring + inner
    index = {ij: k for k, ij in enumerate(order)}
    vertices = np.array([(xs[i], ys[j]) for i, j in order])
    arcs, svals = [], []
    for i, j in ring:
        if j == 0 and i < nx:
            arcs.append("bottom"), svals.append(xs[i] - x0)
        elif i == nx and j < ny:
            arcs.append("right"), svals.append(ys[j] - y0)
        elif j == ny and i > 0:
            arcs.append("top"), svals.append(x1 - xs[i])
        else:
            arcs.append("left"), svals.append(y1 - ys[j])
    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b = index[(i, j)], index[(i + 1, j)]
            c, d = index[(i + 1, j + 1)], index[(i, j + 1)]
            flip = diagonal == "alternate" and (i + j) % 2 == 1
            if flip:
                tris += [(a, b, d), (b, c, d)]
            else:
                tris += [(a, b, c), (a, c, d)]
    return Mesh(vertices, np.array(tris, dtype=np.int64), np.arange(len(ring)), np.asarray(arcs, dtype=object),
                np.asarray(svals, dtype=float), float(h), dom)


def structured_wedge(dom: Domain2D, divisions: int) -> Mesh:
    """Structured mesh of a right-angled cut wedge (arc ids ray0/gamma/ray1).

    Grid lines run parallel to the two rays and every triangle diagonal is
    parallel to the cut, so the mesh is symmetric under the bisector reflection.
    """
    if dom.params.get("shape") != "wedge-cut" or abs(dom.params["theta"] - math.pi / 2) > 1e-12:
        raise ValueError("structured_wedge needs a right-angled wedge cut orthogonal to its bisector")
    n = int(divisions)
    if n < 2:
        raise ValueError("at least two divisions are required")
    v = np.array(dom.params["vertex"], dtype=float)
    ray0, gamma = dom.arc("ray0"), dom.arc("gamma")
    hh = ray0.length / n
    e0 = (np.array(ray0.end) - v) / ray0.length
    e1 = np.array([-e0[1], e0[0]])
    ring = [(i, 0) for i in range(n)] + [(n - k, k) for k in range(n)] + [(0, j) for j in range(n, 0, -1)]
    inner = [(i, j) for j in range(1, n) for i in range(1, n - j)]
    order = ring + inner
    index = {ij: k for k, ij in enumerate(order)}
    vertices = np.array([v + hh * (i * e0 + j * e1) for i, j in order])
    arcs = ["ray0"] * n + ["gamma"] * n + ["ray1"] * n
    svals = ([i * hh for i in range(n)] + [k * gamma.length / n for k in range(n)]
             + [(n - j) * hh for j in range(n, 0, -1)])
    tris = []
    for j in range(n):
        for i in range(n - j):
            tris.append((index[(i, j)], index[(i + 1, j)], index[(i, j + 1)]))
            if i + j <= n - 2:
                tris.append((index[(i + 1, j)], index[(i + 1, j + 1)], index[(i, j + 1)]))
    return Mesh(vertices, np.array(tris, dtype=np.int64), np.arange(len(ring)), np.asarray(arcs, dtype=object),
                np.asarray(svals, dtype=float), float(hh), dom)


def structured_annulus(dom: Domain2D, h: float, grading: float = 2.0) -> Mesh:
    """Polar mesh of an annulus domain (arc ids outer/inner) graded toward the inner circle.

    Radii are r0 + (R - r0) (i/N)^grading with N = ceil((R - r0)/h); angles are
    uniform with spacing at most h on the outer circle. With grading 2 a
    profile behaving like sqrt(r - r0) is linear in i near the inner circle.
    """
    if dom.params.get("shape") != "annulus":
        raise ValueError("structured_annulus needs an annulus domain")
    if grading < 1.0:
        raise ValueError("grading must be >= 1")
    r0, R = float(dom.params["r0"]), float(dom.params["R"])
    c = np.array(dom.arc("outer").center, dtype=float)
    n_r = max(1, int(math.ceil((R - r0) / h - 1e-9)))
    n_t = max(3, int(math.ceil(2 * math.pi * R / h - 1e-9)))
    radii = r0 + (R - r0) * (np.arange(n_r + 1) / n_r) ** grading
    theta = 2 * math.pi * np.arange(n_t) / n_t
    # node (k, j) at angle theta[k] and radius radii[j]; rings are stored outer, inner, then interior
    rings = [n_r, 0] + list(range(1, n_r))
    slot = {j: m for m, j in enumerate(rings)}
    index = lambda k, j: slot[j] * n_t + (k % n_t)  # noqa: E731
    vertices = np.concatenate([c + radii[j] * np.stack([np.cos(theta), np.sin(theta)], axis=1) for j in rings])
    tris = []
    for j in range(n_r):
        for k in range(n_t):
            a, b, cc, d = index(k, j), index(k + 1, j), index(k + 1, j + 1), index(k, j + 1)
            tris += [(a, b, cc), (a, cc, d)] if (k + j) % 2 == 0 else [(a, b, d), (b, cc, d)]
    tris = np.array(tris, dtype=np.int64)
    p = vertices[tris]
    neg = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]) < 0
    tris[neg] = tris[neg][:, ::-1]
    arcs = ["outer"] * n_t + ["inner"] * n_t
    # the inner circle runs clockwise from angle 2 pi
    svals = np.r_[R * theta, np.where(theta > 0, r0 * (2 * math.pi - theta), 0.0)]
    return Mesh(vertices, tris, np.arange(2 * n_t), np.asarray(arcs, dtype=object), svals, float(h), dom)


def write_mesh(mesh: Mesh, directory, prefix: str = "mesh") -> list[Path]:
    """Write vertex, triangle and marker tables.

    ``<prefix>_vertices.txt``:  id x1 x2
    ``<prefix>_triangles.txt``: id v0 v1 v2   (counterclockwise)
    ``<prefix>_markers.txt``:   vertex arc_id s
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [directory / f"{prefix}_{k}.txt" for k in ("vertices", "triangles", "markers")]
    with open(paths[0], "w") as f:
        f.write("# id x1 x2\n")
        for i, (x, y) in enumerate(mesh.vertices):
            f.write(f"{i} {x:.12e} {y:.12e}\n")
    with open(paths[1], "w") as f:
        f.write("# id v0 v1 v2\n")
        for i, (a, b, c) in enumerate(mesh.triangles):
            f.write(f"{i} {a} {b} {c}\n")
    with open(paths[2], "w") as f:
        f.write("# vertex arc_id s\n")
        for v, a, s in zip(mesh.boundary_nodes, mesh.boundary_arc, mesh.boundary_s):
            f.write(f"{v} {a} {s:.12e}\n")
    return paths
