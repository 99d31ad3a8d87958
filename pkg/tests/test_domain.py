import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from nil3msq.domain import (BoundaryData, ComponentData, Domain2D, DomainError, classify_nonconvexity,
                            eval_boundary_data, exhaust, is_convex, locate_on_boundary)
from nil3msq.experiments.nonexist import notch_data
from nil3msq.geometry import IsometryNil

L_SHAPE = [(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def exact_convex(vertices):
    # oracle: exact rational turn signs of a simple counterclockwise polygon
    v = [(Fraction(x), Fraction(y)) for x, y in vertices]
    n = len(v)
    return all(_cross(v[i - 1], v[i], v[(i + 1) % n]) >= 0 for i in range(n))


def exact_segment_leaves(vertices, p, q):
    # oracle: exact proper crossing of the open segment pq with a polygon edge
    v = [(Fraction(x), Fraction(y)) for x, y in vertices]
    p, q = (Fraction(p[0]), Fraction(p[1])), (Fraction(q[0]), Fraction(q[1]))
    for i in range(len(v)):
        a, b = v[i], v[(i + 1) % len(v)]
        d1, d2 = _cross(p, q, a), _cross(p, q, b)
        d3, d4 = _cross(a, b, p), _cross(a, b, q)
        if d1 * d2 < 0 and d3 * d4 < 0:
            return True
    return False


def convex_corpus(rng, n=10):
    out = []
    while len(out) < n:
        pts = rng.uniform(-1, 1, (12, 2))
        hull = pts[ConvexHull(pts).vertices]
        out.append([tuple(map(float, p)) for p in hull])
    return out


def star_corpus(rng, n=10):
    out = []
    while len(out) < n:
        k = int(rng.integers(6, 11))
        t = np.sort(rng.uniform(0, 2 * math.pi, k))
        if np.min(np.diff(np.r_[t, t[0] + 2 * math.pi])) < 0.3:
            continue
        r = rng.uniform(0.8, 1.0, k)
        r[int(rng.integers(k))] = 0.25
        poly = [(float(a * math.cos(b)), float(a * math.sin(b))) for a, b in zip(r, t)]
        if not exact_convex(poly):
            out.append(poly)
    return out


def test_unit_disk_is_convex():
    assert is_convex(Domain2D.disk())


def test_l_shape_not_convex_with_valid_witness():
    dom = Domain2D.polygon(L_SHAPE)
    res = is_convex(dom)
    assert not res
    assert exact_segment_leaves(L_SHAPE, *res.witness)
    assert dom.contains(np.array(res.witness)).all()
    # the pair (1.5, 0.5), (0.5, 1.5) only grazes the reflex vertex (1, 1) and stays in the closure
    assert not exact_segment_leaves(L_SHAPE, (1.5, 0.5), (0.5, 1.5))
    assert _cross((1.5, 0.5), (0.5, 1.5), (1, 1)) == 0


def test_notched_rectangle_classification():
    res = is_convex(Domain2D.notched_rectangle())
    assert not res
    assert res.condition == "**"


def test_isolated_reflex_point_classification():
    # a single reflex vertex without a flanked straight piece
    dom = Domain2D.polygon([(0, 0), (2, 0), (2, 2), (1, 0.6), (0, 2)])
    assert classify_nonconvexity(dom) == "*"
    assert classify_nonconvexity(Domain2D.rectangle(0, 0, 1, 1)) is None


def test_convexity_corpus_against_exact_oracle(rng):
    corpus = convex_corpus(rng) + star_corpus(rng)
    labels = [exact_convex(p) for p in corpus]
    assert labels.count(True) == 10 and labels.count(False) == 10
    for poly, truth in zip(corpus, labels):
        res = is_convex(Domain2D.polygon(poly), samples=40)
        assert bool(res) == truth
        if not truth:
            assert exact_segment_leaves(poly, *res.witness)


def test_degenerate_domain_rejected():
    with pytest.raises(DomainError, match="degenerate"):
        is_convex(Domain2D.polygon([(0, 0), (1, 0), (1, 1e-20), (0, 1e-20)]))


def test_clockwise_polygon_rejected():
    with pytest.raises(DomainError):
        Domain2D.polygon([(0, 0), (0, 1), (1, 1), (1, 0)])


def test_unclosed_arcs_rejected():
    from nil3msq.domain import Segment
    with pytest.raises(DomainError):
        Domain2D((Segment("a", (0, 0), (1, 0)), Segment("b", (1, 0), (1, 1))))


def test_constant_data():
    dom = Domain2D.disk()
    phi = BoundaryData.constant(dom, 2.5)
    assert eval_boundary_data(phi, ("circle", 1.234)) == 2.5
    assert phi.jumps == ()


def test_step_data_average_at_jump():
    dom = Domain2D.rectangle(0, 0, 1, 1)
    phi = BoundaryData.build(dom, {"bottom": 1.0, "right": 0.0, "top": 0.0, "left": 0.0})
    # the junction where bottom ends and right starts
    assert eval_boundary_data(phi, ("right", 0.0)) == 0.5
    assert eval_boundary_data(phi, ("right", 0.5)) == 0.0
    assert eval_boundary_data(phi, ("bottom", 0.5)) == 1.0
    pts = phi.jump_points(dom)
    assert sorted(map(tuple, pts)) == [(0.0, 0.0), (1.0, 0.0)]


def test_unknown_arc_id():
    phi = BoundaryData.constant(Domain2D.disk(), 0.0)
    with pytest.raises(DomainError):
        eval_boundary_data(phi, ("nope", 0.0))


def test_missing_piece_rejected():
    with pytest.raises(DomainError):
        BoundaryData.build(Domain2D.rectangle(0, 0, 1, 1), {"bottom": 0.0})


def test_notched_data_values():
    dom = Domain2D.notched_rectangle()
    phi = notch_data(dom, 3.0)
    assert eval_boundary_data(phi, ("gamma1", 0.3)) == 3.0
    assert eval_boundary_data(phi, ("left", 0.3)) == 0.0
    assert eval_boundary_data(phi, ("top", 1.0)) == 0.0
    # ramps are continuous, so there are no jumps
    assert phi.jumps == ()


def test_from_function_trace(rng):
    dom = Domain2D.disk()
    phi = BoundaryData.from_function(dom, lambda p: p[..., 0] ** 2 - p[..., 1])
    s = rng.uniform(0, 2 * math.pi, 10)
    np.testing.assert_allclose(phi.eval("circle", s), np.cos(s) ** 2 - np.sin(s), atol=1e-14)


def test_wedge_exhaustion_zero_data():
    dom = Domain2D.wedge(math.pi / 2)
    step = exhaust(dom, 1, ComponentData.constant(["ray0", "ray1"], 0.0))
    for a in step.omega_n.arcs:
        np.testing.assert_array_equal(step.phi_n.eval(a.id, np.linspace(0, a.length, 7)), 0.0)
    assert step.gamma_n == ("cap",)


def test_halfplane_far_side():
    dom = Domain2D.halfplane(0.0)
    sup_phi = 0.0
    a, b = 1.0, 1.0 + sup_phi
    step = exhaust(dom, 5, ComponentData.constant(["edge"], 0.0), "plane", plane=(a, b))
    top = step.omega_n.arc("top")
    np.testing.assert_array_equal(step.phi_n.eval("top", np.linspace(0, top.length, 5)), 5 + b)
    assert step.phi_n.jumps == ()


def test_halfplane_offset_and_bad_plane():
    dom = Domain2D.halfplane(2.0)
    with pytest.raises(DomainError):
        exhaust(dom, 1.5, ComponentData.constant(["edge"], 0.0))
    with pytest.raises(DomainError):
        exhaust(dom, 5, ComponentData.constant(["edge"], 0.0), plane=(0.0, 1.0))


@pytest.mark.parametrize("kind", ["wedge", "strip", "halfplane"])
def test_exhaustion_nesting(rng, kind):
    dom = {"wedge": Domain2D.wedge(2.0), "strip": Domain2D.strip(1.0), "halfplane": Domain2D.halfplane(0.0)}[kind]
    comps = {"wedge": ["ray0", "ray1"], "strip": ["bottom", "top"], "halfplane": ["edge"]}[kind]
    data = ComponentData.constant(comps, 0.0)
    for n in (1, 2, 4):
        inner = exhaust(dom, n, data).omega_n
        outer = exhaust(dom, n + 1, data).omega_n
        lo, hi = inner.bbox()
        pts = rng.uniform(lo, hi, (400, 2))
        pts = pts[inner.contains(pts)]
        assert len(pts) > 50
        assert outer.contains(pts).all()


def test_wedge_closure_monotone_for_monotone_data():
    dom = Domain2D.wedge(math.pi / 2, bisector=math.pi / 2)
    data = ComponentData({"ray0": lambda p: np.hypot(p[..., 0], p[..., 1]), "ray1": 0.0})
    maxima = []
    for n in (1, 2, 3, 4):
        step = exhaust(dom, n, data, "cut")
        vals = [step.phi_n.eval(a.id, np.linspace(0, a.length, 50)).max() for a in step.omega_n.arcs]
        maxima.append(max(vals))
    assert all(b >= a for a, b in zip(maxima, maxima[1:]))


def test_wedge_cut_closure_and_orientation():
    dom = Domain2D.wedge(math.pi / 2, bisector=math.pi / 2)
    step = exhaust(dom, 3, ComponentData.constant(["ray0", "ray1"], 0.0), "cut", closure=lambda p: p[..., 1])
    g = step.omega_n.arc("gamma")
    # interior of the cut; its end points are jumps and carry the average 1.5
    np.testing.assert_allclose(step.phi_n.eval("gamma", np.linspace(0.1, g.length - 0.1, 5)), 3.0)
    assert step.phi_n.eval("gamma", 0.0) == pytest.approx(1.5, rel=1e-15)
    assert step.omega_n.area() == pytest.approx(9.0, rel=1e-12)


def test_strip_ramps():
    dom = Domain2D.strip(2.0)
    data = ComponentData({"bottom": 0.0, "top": 4.0})
    step = exhaust(dom, 3, data)
    right = step.omega_n.arc("right")
    v = step.phi_n.eval("right", np.linspace(0, right.length, 9))
    assert v[0] == 0.0 and v[-1] == 4.0 and np.all(np.diff(v) > 0)


def test_exhaustion_rejects_bad_input():
    with pytest.raises(DomainError):
        exhaust(Domain2D.wedge(1.0), 0, ComponentData.constant(["ray0", "ray1"], 0.0))
    with pytest.raises(DomainError):
        exhaust(Domain2D.disk(), 1, ComponentData.constant(["circle"], 0.0))


def test_transformed_domain_preserves_area(rng):
    dom = Domain2D.polygon(L_SHAPE)
    for kind in ("direct", "mirrored"):
        iso = IsometryNil(kind, 0.7, 1 - 2j)
        img = dom.transformed(iso)
        assert img.area() == pytest.approx(dom.area(), rel=1e-12)
        p = rng.uniform(0, 2, (200, 2))
        np.testing.assert_array_equal(img.contains(iso.plane_map(p)), dom.contains(p))


def test_locate_on_boundary():
    dom = Domain2D.rectangle(0, 0, 2, 1)
    ids, s, d = locate_on_boundary(dom, np.array([[0.5, -0.1], [2.0, 0.25], [1.0, 1.0]]))
    assert list(ids) == ["bottom", "right", "top"]
    np.testing.assert_allclose(s, [0.5, 0.25, 1.0])
    np.testing.assert_allclose(d, [0.1, 0.0, 0.0], atol=1e-15)


def test_convexified_partner():
    dom = Domain2D.notched_rectangle()
    part = dom.convexified()
    assert is_convex(part)
    assert {"gamma1", "ramp_bottom", "ramp_top"} <= set(part.arc_ids) <= set(dom.arc_ids)
    assert part.arc("gamma1").length == pytest.approx(2 * dom.params["c"])
    with pytest.raises(DomainError):
        Domain2D.disk().convexified()


def test_unbounded_domains_need_truncation():
    with pytest.raises(DomainError):
        Domain2D.halfplane().boundary_polygons()
