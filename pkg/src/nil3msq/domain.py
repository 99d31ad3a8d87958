"""
Planar domains, boundary data and exhaustion sequences.

A bounded :class:`Domain2D` is an ordered list of parametric boundary arcs
(segments, circular arcs, polylines) forming one or more closed loops, with
the domain on the left of every arc. Unbounded kinds (wedge, strip,
half-plane) only store their parameters; they are meshed through
:func:`exhaust`.

Boundary data on bounded domains are per-arc functions of arclength. On
unbounded domains data are given per boundary component as functions of the
point (see :class:`ComponentData`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .geometry import IsometryNil


class DomainError(ValueError):
    pass


# ---------------------------------------------------------------------------
# arcs


@dataclass(frozen=True)
class Segment:
    id: str
    start: tuple[float, float]
    end: tuple[float, float]

    @property
    def length(self) -> float:
        return math.dist(self.start, self.end)

    def point(self, s):
        s = np.asarray(s, dtype=float)
        a, b = np.array(self.start), np.array(self.end)
        t = s / self.length
        return a + t[..., None] * (b - a)

    def tangent(self, s):
        s = np.asarray(s, dtype=float)
        d = (np.array(self.end) - np.array(self.start)) / self.length
        return np.broadcast_to(d, s.shape + (2,))

    def map(self, fn, reverse: bool):
        a, b = tuple(fn(self.start)), tuple(fn(self.end))
        return Segment(self.id, b, a) if reverse else Segment(self.id, a, b)

    def project(self, pts):
        """Arclength of the closest point and the distance, for points of shape (N, 2)."""
        pts = np.asarray(pts, dtype=float)
        a, b = np.array(self.start), np.array(self.end)
        t = np.clip((pts - a) @ (b - a) / self.length**2, 0.0, 1.0)
        foot = a + t[:, None] * (b - a)
        return t * self.length, np.hypot(*(pts - foot).T)


@dataclass(frozen=True)
class CircularArc:
    """Arc of the circle (center, radius) for angles from t0 to t1 (t1 < t0 runs clockwise)."""

    id: str
    center: tuple[float, float]
    radius: float
    t0: float
    t1: float

    @property
    def length(self) -> float:
        return self.radius * abs(self.t1 - self.t0)

    def _angle(self, s):
        sign = 1.0 if self.t1 >= self.t0 else -1.0
        return self.t0 + sign * np.asarray(s, dtype=float) / self.radius

    @property
    def start(self):
        return tuple(self.point(0.0))

    @property
    def end(self):
        return tuple(self.point(self.length))

    def point(self, s):
        t = self._angle(s)
        c = np.array(self.center)
        return c + self.radius * np.stack([np.cos(t), np.sin(t)], axis=-1)

    def tangent(self, s):
        t = self._angle(s)
        sign = 1.0 if self.t1 >= self.t0 else -1.0
        return sign * np.stack([-np.sin(t), np.cos(t)], axis=-1)

    def map_iso(self, iso: IsometryNil):
        c = tuple(iso.plane_map(np.array(self.center)))
        if iso.mirrored:
            # conj flips angles, then rotation adds theta; orientation is restored by reversing
            return CircularArc(self.id, c, self.radius, iso.theta - self.t1, iso.theta - self.t0)
        return CircularArc(self.id, c, self.radius, self.t0 + iso.theta, self.t1 + iso.theta)

    def project(self, pts):
        pts = np.asarray(pts, dtype=float)
        rel = pts - np.array(self.center)
        ang = np.arctan2(rel[:, 1], rel[:, 0])
        lo, hi = min(self.t0, self.t1), max(self.t0, self.t1)
        mid = 0.5 * (lo + hi)
        ang = mid + np.mod(ang - mid + math.pi, 2 * math.pi) - math.pi
        s = np.clip(np.abs(ang - self.t0) * self.radius, 0.0, self.length)
        s = np.where((ang < lo) | (ang > hi), np.where(np.abs(ang - self.t0) < np.abs(ang - self.t1),
                                                        0.0, self.length), s)
        return s, np.hypot(*(pts - self.point(s)).T)


@dataclass(frozen=True)
class Polyline:
    id: str
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.points) < 2:
            raise DomainError(f"polyline {self.id!r} needs at least two points")

    @property
    def _cum(self):
        p = np.asarray(self.points, dtype=float)
        return np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(p, axis=0).T))])

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    @property
    def start(self):
        return tuple(self.points[0])

    @property
    def end(self):
        return tuple(self.points[-1])

    def point(self, s):
        s = np.asarray(s, dtype=float)
        p = np.asarray(self.points, dtype=float)
        cum = self._cum
        return np.stack([np.interp(s, cum, p[:, 0]), np.interp(s, cum, p[:, 1])], axis=-1)

    def tangent(self, s):
        s = np.asarray(s, dtype=float)
        p = np.asarray(self.points, dtype=float)
        cum = self._cum
        k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(p) - 2)
        d = p[k + 1] - p[k]
        return d / np.hypot(d[..., 0], d[..., 1])[..., None]

    def map(self, fn, reverse: bool):
        pts = tuple(tuple(fn(q)) for q in self.points)
        return Polyline(self.id, pts[::-1] if reverse else pts)

    def project(self, pts):
        pts = np.asarray(pts, dtype=float)
        best_s = np.zeros(len(pts))
        best_d = np.full(len(pts), np.inf)
        cum = self._cum
        for k, (a, b) in enumerate(zip(self.points[:-1], self.points[1:])):
            s, d = Segment(self.id, a, b).project(pts)
            better = d < best_d
            best_s = np.where(better, cum[k] + s, best_s)
            best_d = np.minimum(best_d, d)
        return best_s, best_d


def arc_samples(arc, spacing: Callable[[np.ndarray], np.ndarray] | float) -> np.ndarray:
    """Arclength positions 0 = s_0 < ... < s_k = L with gaps not exceeding the local spacing.

    ``spacing`` is a constant or a function of the point. Polyline corners are always kept.
    """
    if isinstance(arc, Polyline):
        cum = arc._cum
        out = [0.0]
        for k, (a, b) in enumerate(zip(cum[:-1], cum[1:])):
            piece = Segment("_", arc.points[k], arc.points[k + 1])
            out.extend(a + arc_samples(piece, spacing)[1:])
        return np.asarray(out)
    length = arc.length
    if not callable(spacing):
        n = max(1, int(math.ceil(length / float(spacing) - 1e-9)))
        return np.linspace(0.0, length, n + 1)
    s, pos = [0.0], 0.0
    while pos < length:
        pos += float(spacing(arc.point(pos)))
        s.append(pos)
    s = np.asarray(s)
    # shrink uniformly to land on L; gaps only get smaller
    return s * (length / s[-1])


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True, eq=False)
class Domain2D:
    arcs: tuple = ()
    kind: str = "bounded"
    params: Mapping = field(default_factory=dict)
    holes: tuple = ()

    def __post_init__(self):
        ids = [a.id for a in self.arcs]
        if len(set(ids)) != len(ids):
            raise DomainError(f"duplicate arc ids in {ids}")
        if self.kind == "bounded":
            if not self.arcs:
                raise DomainError("bounded domain without arcs")
            self.loops()

    # -- structure ---------------------------------------------------------
    @property
    def bounded(self) -> bool:
        return self.kind == "bounded"

    def arc(self, arc_id: str):
        for a in self.arcs:
            if a.id == arc_id:
                return a
        raise DomainError(f"unknown arc id {arc_id!r}")

    @property
    def arc_ids(self) -> list[str]:
        return [a.id for a in self.arcs]

    def loops(self) -> list[list]:
        """Split the arc list into closed loops; raises on gaps."""
        loops, current = [], []
        scale = max(1.0, self.diameter_hint())
        tol = 1e-9 * scale
        for a in self.arcs:
            if current and math.dist(current[-1].end, a.start) > tol:
                raise DomainError(f"arc {a.id!r} does not start where {current[-1].id!r} ends")
            current.append(a)
            if math.dist(a.end, current[0].start) <= tol:
                loops.append(current)
                current = []
        if current:
            raise DomainError("boundary arcs do not close into loops")
        return loops

    def diameter_hint(self) -> float:
        pts = [a.start for a in self.arcs] + [a.end for a in self.arcs]
        for a in self.arcs:
            if isinstance(a, CircularArc):
                pts.append(tuple(np.array(a.center) + a.radius))
                pts.append(tuple(np.array(a.center) - a.radius))
        p = np.asarray(pts, dtype=float)
        return float(np.hypot(*(p.max(0) - p.min(0))))

    def boundary_polygons(self, spacing: float | None = None) -> list[np.ndarray]:
        """Sampled closed loops (without repeated closing point).

        Without ``spacing`` straight arcs contribute their corners only and
        curved arcs are sampled at diameter / 2000.
        """
        if not self.bounded:
            raise DomainError(f"{self.kind} domain has to be truncated first")
        curved = spacing or self.diameter_hint() / 2000.0
        out = []
        for loop in self.loops():
            pts = []
            for a in loop:
                if spacing is None and isinstance(a, Segment):
                    pts.append(np.array([a.start], dtype=float))
                    continue
                if spacing is None and isinstance(a, Polyline):
                    pts.append(np.asarray(a.points[:-1], dtype=float))
                    continue
                s = arc_samples(a, curved)
                pts.append(a.point(s[:-1]))
            out.append(np.concatenate(pts))
        return out

    def area(self, spacing=None) -> float:
        total = 0.0
        for poly in self.boundary_polygons(spacing):
            x, y = poly[:, 0], poly[:, 1]
            total += 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
        return total

    def bbox(self):
        pts = np.concatenate(self.boundary_polygons())
        return pts.min(0), pts.max(0)

    def contains(self, points, spacing=None) -> np.ndarray:
        """Even-odd membership test against the sampled boundary."""
        points = np.asarray(points, dtype=float)
        flat = points.reshape(-1, 2)
        inside = np.zeros(len(flat), dtype=bool)
        for poly in self.boundary_polygons(spacing):
            inside ^= _points_in_polygon(flat, poly)
        return inside.reshape(points.shape[:-1])

    def transformed(self, iso: IsometryNil) -> "Domain2D":
        """Image of the domain under the planar trace of ``iso``."""
        if not self.bounded:
            raise DomainError("only bounded domains can be transported")
        fn = lambda p: iso.plane_map(np.asarray(p, dtype=float))  # noqa: E731
        new = []
        for a in self.arcs:
            if isinstance(a, CircularArc):
                new.append(a.map_iso(iso))
            elif isinstance(a, (Segment, Polyline)):
                new.append(a.map(fn, reverse=iso.mirrored))
            else:
                raise DomainError(f"cannot transport arc of type {type(a).__name__}")
        if iso.mirrored:
            # keep the domain on the left: reverse the order inside each loop
            loops, k = [], 0
            for loop in self.loops():
                loops.append(new[k:k + len(loop)][::-1])
                k += len(loop)
            new = [a for loop in loops for a in loop]
        holes = tuple(tuple(fn(h)) for h in self.holes)
        return Domain2D(tuple(new), self.kind, dict(self.params), holes)

    # -- constructors -------------------------------------------------------
    @classmethod
    def polygon(cls, vertices, ids=None, **params) -> "Domain2D":
        v = [tuple(map(float, p)) for p in vertices]
        area = _signed_area(np.asarray(v))
        scale = float(np.ptp(np.asarray(v), axis=0).max()) if len(v) else 0.0
        if abs(area) <= 1e-14 * max(scale, 1e-300) ** 2:
            raise DomainError("degenerate polygon (zero area)")
        if area < 0:
            raise DomainError("polygon vertices must be counterclockwise")
        ids = ids or [f"e{i}" for i in range(len(v))]
        arcs = tuple(Segment(ids[i], v[i], v[(i + 1) % len(v)]) for i in range(len(v)))
        return cls(arcs, params=params)

    @classmethod
    def rectangle(cls, x0, y0, x1, y1) -> "Domain2D":
        return cls.polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)],
                           ids=["bottom", "right", "top", "left"], shape="rectangle",
                           box=(x0, y0, x1, y1))

    @classmethod
    def disk(cls, center=(0.0, 0.0), radius=1.0) -> "Domain2D":
        return cls((CircularArc("circle", tuple(center), float(radius), 0.0, 2 * math.pi),),
                   params={"shape": "disk", "center": tuple(center), "radius": float(radius)})

    @classmethod
    def annulus(cls, r0: float, R: float, center=(0.0, 0.0)) -> "Domain2D":
        if not 0 < r0 < R:
            raise DomainError("annulus needs 0 < r0 < R")
        outer = CircularArc("outer", tuple(center), float(R), 0.0, 2 * math.pi)
        inner = CircularArc("inner", tuple(center), float(r0), 2 * math.pi, 0.0)
        return cls((outer, inner), params={"shape": "annulus", "r0": r0, "R": R},
                   holes=(tuple(center),))

    @classmethod
    def triangle(cls, A, B, C) -> "Domain2D":
        """Triangle with sides alpha = BC, beta = CA, gamma = AB (opposite A, B, C)."""
        A, B, C = (tuple(map(float, p)) for p in (A, B, C))
        if _signed_area(np.array([A, B, C])) < 0:
            B, A = A, B
        arcs = (Segment("gamma", A, B), Segment("alpha", B, C), Segment("beta", C, A))
        return cls(arcs, params={"shape": "triangle", "A": A, "B": B, "C": C})

    @classmethod
    def notched_rectangle(cls, width=2.0, height=2.0, notch_depth=0.8, notch_halfwidth=0.4,
                          eps=0.2) -> "Domain2D":
        """Rectangle [0, width] x [-height/2, height/2] with a rectangular notch cut from the right.

        The notch floor ``l`` lies on x1 = d = width - notch_depth, |x2| <= notch_halfwidth.
        Arc ids: ``gamma1`` is the sub-arc of the notch within distance ``eps`` of ``l``
        (x1 <= d + eps), ``ramp_top``/``ramp_bottom`` the rest of the notch sides.
        """
        w, hh, d, c = float(width), float(height) / 2, float(width - notch_depth), float(notch_halfwidth)
        if not (0 < d < w and 0 < c < hh and 0 < eps < notch_depth):
            raise DomainError("inconsistent notch parameters")
        pts = {
            "bl": (0.0, -hh), "br": (w, -hh), "nb": (w, -c), "nbe": (d + eps, -c),
            "lq": (d, -c), "lp": (d, c), "nte": (d + eps, c), "nt": (w, c), "tr": (w, hh), "tl": (0.0, hh),
        }
        arcs = (
            Segment("bottom", pts["bl"], pts["br"]),
            Segment("right_lower", pts["br"], pts["nb"]),
            Segment("ramp_bottom", pts["nb"], pts["nbe"]),
            Polyline("gamma1", (pts["nbe"], pts["lq"], pts["lp"], pts["nte"])),
            Segment("ramp_top", pts["nte"], pts["nt"]),
            Segment("right_upper", pts["nt"], pts["tr"]),
            Segment("top", pts["tr"], pts["tl"]),
            Segment("left", pts["tl"], pts["bl"]),
        )
        return cls(arcs, params={"shape": "notched", "width": w, "height": 2 * hh, "d": d,
                                 "c": c, "eps": float(eps)})

    def convexified(self) -> "Domain2D":
        """Convex partner of a notched rectangle: the sub-rectangle [0, d] x [-height/2, height/2].

        Its right side carries the same arc ids as the notch: ``gamma1`` on
        |x2| <= c, then ``ramp_bottom``/``ramp_top`` with the notch-side ramp length
        (shortened if the rectangle is too low), then ``right_lower``/``right_upper``.
        Data given per arc id therefore transfer unchanged.
        """
        if self.params.get("shape") != "notched":
            raise DomainError("convexified() is defined for notched rectangles")
        p = self.params
        hh, d, c = p["height"] / 2, p["d"], p["c"]
        r = min(p["width"] - d - p["eps"], hh - c)
        arcs = [Segment("bottom", (0.0, -hh), (d, -hh))]
        if c + r < hh:
            arcs.append(Segment("right_lower", (d, -hh), (d, -c - r)))
        arcs += [Segment("ramp_bottom", (d, -c - r), (d, -c)), Segment("gamma1", (d, -c), (d, c)),
                 Segment("ramp_top", (d, c), (d, c + r))]
        if c + r < hh:
            arcs.append(Segment("right_upper", (d, c + r), (d, hh)))
        arcs += [Segment("top", (d, hh), (0.0, hh)), Segment("left", (0.0, hh), (0.0, -hh))]
        return Domain2D(tuple(arcs), params={"shape": "notch-partner", "width": d, "height": 2 * hh, "c": c,
                                             "d": d})

    # unbounded kinds
    @classmethod
    def wedge(cls, theta: float, vertex=(0.0, 0.0), bisector: float = math.pi / 4) -> "Domain2D":
        """Wedge of opening ``theta`` around the direction ``bisector``; rays ``ray0`` and ``ray1``."""
        if not 0 < theta < math.pi:
            raise DomainError("wedge opening must lie in (0, pi)")
        return cls((), "wedge", {"theta": float(theta), "vertex": tuple(map(float, vertex)),
                                 "bisector": float(bisector)})

    @classmethod
    def strip(cls, d: float) -> "Domain2D":
        """{0 < x2 < d}; components ``bottom`` (x2 = 0) and ``top`` (x2 = d)."""
        return cls((), "strip", {"d": float(d)})

    @classmethod
    def halfplane(cls, d: float = 0.0) -> "Domain2D":
        """{x2 > d}; single component ``edge``."""
        return cls((), "halfplane", {"d": float(d)})


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _points_in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x0, y0 = poly[:, 0][None, :], poly[:, 1][None, :]
    x1, y1 = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    cond = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xin = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    return np.count_nonzero(cond & (x < xin), axis=1) % 2 == 1


def _segment_distance(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a
    ap = pts[:, None, :] - a[None, :, :]
    t = np.clip(np.sum(ap * ab, -1) / np.maximum(np.sum(ab * ab, -1), 1e-300), 0.0, 1.0)
    d = ap - t[..., None] * ab
    return np.min(np.hypot(d[..., 0], d[..., 1]), axis=1)


def boundary_distance(dom: Domain2D, points, spacing=None) -> np.ndarray:
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    polys = dom.boundary_polygons(spacing)
    out = np.full(len(points), np.inf)
    for poly in polys:
        for chunk in range(0, len(points), 256):
            sl = slice(chunk, chunk + 256)
            out[sl] = np.minimum(out[sl], _segment_distance(points[sl], poly))
    return out


def locate_on_boundary(dom: Domain2D, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closest boundary marker (arc id, arclength) and its distance for each point."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    ids = np.empty(len(points), dtype=object)
    svals = np.zeros(len(points))
    dist = np.full(len(points), np.inf)
    for a in dom.arcs:
        s, d = a.project(points)
        better = d < dist
        ids[better] = a.id
        svals = np.where(better, s, svals)
        dist = np.minimum(dist, d)
    return ids, svals, dist


# ---------------------------------------------------------------------------
# convexity


@dataclass(frozen=True)
class ConvexityResult:
    convex: bool
    witness: tuple | None = None
    condition: str | None = None  # "*" or "**" when detectable

    def __bool__(self):
        return self.convex


def _reflex_structure(dom: Domain2D, spacing):
    """Simplified loops (collinear runs merged) with reflex flags; domain on the left."""
    out = []
    diam = dom.diameter_hint()
    for poly in dom.boundary_polygons(spacing):
        keep = []
        n = len(poly)
        for i in range(n):
            a, b, c = poly[i - 1], poly[i], poly[(i + 1) % n]
            cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
            if abs(cross) > 1e-12 * diam * diam:
                keep.append(i)
        simp = poly[keep]
        m = len(simp)
        reflex = np.zeros(m, dtype=bool)
        for i in range(m):
            a, b, c = simp[i - 1], simp[i], simp[(i + 1) % m]
            cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
            reflex[i] = cross < 0
        out.append((simp, reflex))
    return out


def is_convex(dom: Domain2D, samples: int = 30, seed: int = 0, subdivisions: int = 64) -> ConvexityResult:
    """Randomized convexity test of the closure of ``dom``.

    ``samples`` interior points are drawn (deterministically from ``seed``);
    every pair is connected and the segment is probed at ``subdivisions``
    equally spaced points. A probe counts as outside only if it is outside
    the sampled boundary by more than a relative tolerance.
    """
    if not dom.bounded:
        raise DomainError("truncate unbounded domains before testing convexity")
    if abs(dom.area()) < 1e-14 * max(dom.diameter_hint(), 1e-300) ** 2:
        raise DomainError("degenerate domain (zero area)")
    rng = np.random.default_rng(seed)
    lo, hi = dom.bbox()
    pts = np.empty((0, 2))
    while len(pts) < samples:
        cand = rng.uniform(lo, hi, size=(4 * samples, 2))
        pts = np.concatenate([pts, cand[dom.contains(cand)]])
    pts = pts[:samples]
    tol = 1e-9 * dom.diameter_hint()
    t = np.linspace(0.0, 1.0, subdivisions + 1)[1:-1]
    polys = dom.boundary_polygons()
    witness = None
    for i in range(samples):
        probes = pts[i][None, None, :] + t[None, :, None] * (pts[i + 1:, None, :] - pts[i][None, None, :])
        flat = probes.reshape(-1, 2)
        if not len(flat):
            continue
        inside = dom.contains(flat)
        if inside.all():
            continue
        bad = np.nonzero(~inside)[0]
        dist = np.full(len(bad), np.inf)
        for poly in polys:
            dist = np.minimum(dist, _segment_distance(flat[bad], poly))
        bad = bad[dist > tol]
        if bad.size:
            j = i + 1 + bad[0] // len(t)
            witness = (tuple(map(float, pts[i])), tuple(map(float, pts[j])))
            break
    if witness is None:
        return ConvexityResult(True)
    return ConvexityResult(False, witness, classify_nonconvexity(dom))


def classify_nonconvexity(dom: Domain2D, min_flat_fraction: float = 0.05) -> str | None:
    """Return "**" if a straight boundary piece is flanked by reflex turns, "*" for isolated reflex points."""
    diam = dom.diameter_hint()
    any_reflex = False
    for simp, reflex in _reflex_structure(dom, None):
        m = len(simp)
        for i in range(m):
            j = (i + 1) % m
            if reflex[i] and reflex[j] and math.dist(simp[i], simp[j]) >= min_flat_fraction * diam:
                return "**"
        any_reflex |= bool(reflex.any())
    return "*" if any_reflex else None


# ---------------------------------------------------------------------------
# boundary data


@dataclass(frozen=True)
class Jump:
    """Discontinuity of the boundary data at (arc, s) with one-sided limits."""

    arc: str
    s: float
    left: float
    right: float


def _const(c):
    return lambda s: np.full(np.shape(s), float(c))


@dataclass(eq=False)
class BoundaryData:
    pieces: dict
    jumps: tuple = ()

    def eval(self, arc_id: str, s):
        if arc_id not in self.pieces:
            raise DomainError(f"unknown arc id {arc_id!r}")
        s_arr = np.asarray(s, dtype=float)
        val = np.asarray(self.pieces[arc_id](s_arr), dtype=float)
        val = np.broadcast_to(val, s_arr.shape).copy()
        for j in self.jumps:
            if j.arc == arc_id:
                hit = np.abs(s_arr - j.s) <= 1e-12 * max(1.0, abs(j.s))
                val = np.where(hit, 0.5 * (j.left + j.right), val)
        return val if val.ndim else float(val)

    def jump_points(self, dom: Domain2D) -> np.ndarray:
        if not self.jumps:
            return np.empty((0, 2))
        return np.array([dom.arc(j.arc).point(j.s) for j in self.jumps])

    @classmethod
    def build(cls, dom: Domain2D, pieces: Mapping, extra_jumps=(), tol=1e-12) -> "BoundaryData":
        """Assemble data from per-arc callables or constants; junction jumps are detected automatically.

        Jumps located at a junction are keyed by the arc that starts there (s = 0).
        """
        fn = {}
        for a in dom.arcs:
            if a.id not in pieces:
                raise DomainError(f"no data for arc {a.id!r}")
            p = pieces[a.id]
            fn[a.id] = p if callable(p) else _const(p)
        jumps = list(extra_jumps)
        for loop in dom.loops():
            for k, a in enumerate(loop):
                prev = loop[k - 1]
                left = float(np.asarray(fn[prev.id](np.array(prev.length))))
                right = float(np.asarray(fn[a.id](np.array(0.0))))
                if abs(left - right) > tol * max(1.0, abs(left), abs(right)):
                    jumps.append(Jump(a.id, 0.0, left, right))
        return cls(fn, tuple(jumps))

    @classmethod
    def constant(cls, dom: Domain2D, c: float) -> "BoundaryData":
        return cls.build(dom, {a.id: float(c) for a in dom.arcs})

    @classmethod
    def from_function(cls, dom: Domain2D, f) -> "BoundaryData":
        """Trace of a function of the point, e.g. an exact solution."""
        pieces = {}
        for a in dom.arcs:
            pieces[a.id] = (lambda arc: (lambda s: np.asarray(f(arc.point(s)), dtype=float)))(a)
        return cls.build(dom, pieces)


def eval_boundary_data(phi: BoundaryData, marker) -> float:
    arc_id, s = marker
    return phi.eval(arc_id, s)


@dataclass(eq=False)
class ComponentData:
    """Data on the boundary components of an unbounded domain, as functions of the point."""

    pieces: dict

    def __call__(self, comp: str, pts):
        pts = np.asarray(pts, dtype=float)
        f = self.pieces[comp]
        val = f(pts) if callable(f) else np.full(pts.shape[:-1], float(f))
        return np.broadcast_to(np.asarray(val, dtype=float), pts.shape[:-1]).copy()

    @classmethod
    def constant(cls, comps, c: float) -> "ComponentData":
        return cls({k: float(c) for k in comps})


# ---------------------------------------------------------------------------
# exhaustion


@dataclass(eq=False)
class ExhaustionStep:
    n: float
    omega_n: Domain2D
    gamma_n: tuple
    phi_n: BoundaryData
    params: dict = field(default_factory=dict)


def _unit(a):
    return np.array([math.cos(a), math.sin(a)])


def _restrict(data: ComponentData, comp: str, arc):
    return lambda s: data(comp, arc.point(s))


def exhaust(dom: Domain2D, n: float, phi: ComponentData, closure_rule: str = "auto",
            closure=None, **opts) -> ExhaustionStep:
    """Bounded domain Omega_n of the exhaustion of ``dom`` with adapted data phi_n.

    closure rules
      ``ball``       wedge cut by the disk of radius n around the vertex; the cap
                     gets data linear in arclength between the two corner values.
      ``cut``        wedge cut by the line orthogonal to the bisector at distance n;
                     data on the cut side given by ``closure(points)`` (default: linear
                     interpolation of the corner values).
      ``rectangle``  strip truncated to |x1| < n; linear ramps on the vertical sides.
      ``plane``      half-plane {x2 > d} truncated to d < x2 < n, |x1| < width; the far
                     side carries the plane ``c x1 + a n + b`` (opts ``plane=(a, b)`` or
                     ``plane=(a, b, c)``), linear ramps on the vertical sides.
    """
    if closure_rule == "auto":
        closure_rule = {"wedge": "ball", "strip": "rectangle", "halfplane": "plane"}.get(dom.kind)
    if dom.kind == "wedge" and closure_rule in ("ball", "cut"):
        return _exhaust_wedge(dom, n, phi, closure_rule, closure)
    if dom.kind == "strip" and closure_rule == "rectangle":
        return _exhaust_strip(dom, n, phi)
    if dom.kind == "halfplane" and closure_rule == "plane":
        return _exhaust_halfplane(dom, n, phi, **opts)
    raise DomainError(f"closure rule {closure_rule!r} does not apply to a {dom.kind} domain")


def _exhaust_wedge(dom, n, phi, rule, closure):
    if n <= 0:
        raise DomainError("exhaustion index must be positive")
    th, bis = dom.params["theta"], dom.params["bisector"]
    v = np.array(dom.params["vertex"])
    a0, a1 = bis - th / 2, bis + th / 2
    vt = tuple(v)
    if rule == "ball":
        r_n, s_n = tuple(v + n * _unit(a0)), tuple(v + n * _unit(a1))
        ray0 = Segment("ray0", vt, r_n)
        cap = CircularArc("cap", vt, float(n), a0, a1)
        ray1 = Segment("ray1", s_n, vt)
        omega = Domain2D((ray0, cap, ray1), params={"shape": "wedge-ball", "n": n, **dom.params})
        f0 = float(phi("ray0", np.array(r_n)))
        f1 = float(phi("ray1", np.array(s_n)))
        length = cap.length
        pieces = {
            "ray0": _restrict(phi, "ray0", ray0),
            "cap": lambda s: f0 + (f1 - f0) * np.asarray(s, dtype=float) / length,
            "ray1": _restrict(phi, "ray1", ray1),
        }
        return ExhaustionStep(n, omega, ("cap",), BoundaryData.build(omega, pieces))
    # cut orthogonal to the bisector
    reach = n / math.cos(th / 2)
    A, B = tuple(v + reach * _unit(a0)), tuple(v + reach * _unit(a1))
    ray0 = Segment("ray0", vt, A)
    gamma = Segment("gamma", A, B)
    ray1 = Segment("ray1", B, vt)
    omega = Domain2D((ray0, gamma, ray1), params={"shape": "wedge-cut", "n": n, **dom.params})
    if closure is None:
        fa = float(phi("ray0", np.array(A)))
        fb = float(phi("ray1", np.array(B)))
        glen = gamma.length
        gpiece = lambda s: fa + (fb - fa) * np.asarray(s, dtype=float) / glen  # noqa: E731
    else:
        gpiece = lambda s: np.asarray(closure(gamma.point(s)), dtype=float)  # noqa: E731
    pieces = {"ray0": _restrict(phi, "ray0", ray0), "gamma": gpiece, "ray1": _restrict(phi, "ray1", ray1)}
    return ExhaustionStep(n, omega, ("gamma",), BoundaryData.build(omega, pieces))


def _ramp(p0, v0, p1, v1):
    seg_len = math.dist(p0, p1)
    return lambda s: v0 + (v1 - v0) * np.asarray(s, dtype=float) / seg_len


def _exhaust_strip(dom, n, phi):
    if n <= 0:
        raise DomainError("exhaustion index must be positive")
    d = dom.params["d"]
    bl, br, tr, tl = (-n, 0.0), (n, 0.0), (n, d), (-n, d)
    bottom = Segment("bottom", bl, br)
    right = Segment("right", br, tr)
    top = Segment("top", tr, tl)
    left = Segment("left", tl, bl)
    omega = Domain2D((bottom, right, top, left), params={"shape": "rectangle", "n": n, "d": d})
    val = lambda comp, p: float(phi(comp, np.array(p)))  # noqa: E731
    pieces = {
        "bottom": _restrict(phi, "bottom", bottom),
        "right": _ramp(br, val("bottom", br), tr, val("top", tr)),
        "top": _restrict(phi, "top", top),
        "left": _ramp(tl, val("top", tl), bl, val("bottom", bl)),
    }
    return ExhaustionStep(n, omega, ("right", "left"), BoundaryData.build(omega, pieces))


def _exhaust_halfplane(dom, n, phi, plane=(1.0, 1.0), width=None):
    d = dom.params["d"]
    if n <= d:
        raise DomainError(f"exhaustion level n = {n} does not exceed the half-plane offset d = {d}")
    a, b = float(plane[0]), float(plane[1])
    c = float(plane[2]) if len(plane) > 2 else 0.0
    if a <= 0:
        raise DomainError("the supersolution plane needs a > 0")
    k = float(width if width is not None else 2 * n)
    bl, br, tr, tl = (-k, d), (k, d), (k, float(n)), (-k, float(n))
    bottom = Segment("bottom", bl, br)
    right = Segment("right", br, tr)
    top = Segment("top", tr, tl)
    left = Segment("left", tl, bl)
    omega = Domain2D((bottom, right, top, left),
                     params={"shape": "rectangle", "n": n, "d": d, "width": k, "plane": (a, b, c)})
    far = lambda p: c * p[..., 0] + a * n + b  # noqa: E731
    edge = lambda p: float(phi("edge", np.array(p)))  # noqa: E731
    pieces = {
        "bottom": _restrict(phi, "edge", bottom),
        "right": _ramp(br, edge(br), tr, float(far(np.array(tr)))),
        "top": lambda s: far(top.point(s)),
        "left": _ramp(tl, float(far(np.array(tl))), bl, edge(bl)),
    }
    return ExhaustionStep(n, omega, ("top", "right", "left"), BoundaryData.build(omega, pieces),
                          params={"plane": (a, b, c), "width": k})
