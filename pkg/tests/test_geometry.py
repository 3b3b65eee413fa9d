import math
import warnings

import numpy as np
import pytest

from pikan import geometry as g
from pikan import problems


def unit_square():
    return g.Domain(g.Loop.rectangle(0, 0, 1, 1), (g.MaterialRegion(1, "m"),))


def beam(two=True):
    outer = g.Loop.rectangle(0, 0, 8, 2)
    if not two:
        return g.Domain(outer, (g.MaterialRegion(1, "m"),))
    top = g.Loop.rectangle(0, 1, 8, 2)
    return g.Domain(outer, (g.MaterialRegion(1, "a", top), g.MaterialRegion(2, "b")), interfaces=(g.Segment((0, 1), (8, 1)),))


# curves -------------------------------------------------------------------


def test_arc_through_endpoints_and_length():
    a = g.Arc.through((0, 0), 1.0, (1, 0), (0, 1))
    np.testing.assert_allclose(a.point(np.array([0.0, 1.0])), [[1, 0], [0, 1]], atol=1e-15)
    assert math.isclose(a.length, math.pi / 2)
    cw = g.Arc.through((0, 0), 1.0, (0, 1), (1, 0), clockwise=True)
    assert cw.sweep < 0
    np.testing.assert_allclose(cw.point(0.5), [math.sqrt(0.5), math.sqrt(0.5)])


def test_arc_chords_respect_sagitta():
    a = g.Arc.through((0, 0), 5.0, (5, 0), (0, 5))
    for h in (0.5, 0.1):
        pts = g.discretize(a, h)
        mids = 0.5 * (pts[1:] + pts[:-1])
        sag = 5.0 - np.hypot(mids[:, 0], mids[:, 1])
        assert sag.max() <= h * h
        assert np.linalg.norm(np.diff(pts, axis=0), axis=1).max() <= h + 1e-12


def test_segment_distance_handles_point_segments():
    s = g.Segment((1.0, 1.0), (1.0, 1.0))
    np.testing.assert_allclose(s.distance(np.array([[4.0, 5.0]])), [5.0])


def test_loop_must_close():
    with pytest.raises(g.GeometryError):
        g.Loop((g.Segment((0, 0), (1, 0)), g.Segment((1, 0), (1, 1))))


def test_loop_area_with_arc():
    spec = problems.builtin("plate_hole")
    assert math.isclose(spec.domain.area, 21 * 21 - math.pi * 25 / 4, rel_tol=1e-12)


def test_containment_with_arcs_matches_analytic_disk():
    loop = g.Loop((g.Arc.through((0, 0), 1.0, (1, 0), (-1, 0)), g.Arc.through((0, 0), 1.0, (-1, 0), (1, 0))))
    rng = np.random.default_rng(3)
    p = rng.uniform(-1.2, 1.2, size=(20000, 2))
    r = np.hypot(p[:, 0], p[:, 1])
    sel = np.abs(r - 1) > 1e-9
    assert np.array_equal(loop.contains(p)[sel], (r < 1)[sel])


# regions --------------------------------------------------------------------


@pytest.mark.parametrize("name", problems.names())
def test_partition_every_point_claimed_once(name):
    spec = problems.builtin(name)
    d = spec.domain
    x0, y0, x1, y1 = d.bbox()
    rng = np.random.default_rng(0)
    n = 1_000_000 if name == "cantilever_straight" else 100_000
    p = rng.uniform((x0, y0), (x1, y1), size=(n, 2))
    inside = d.contains(p)
    claims = d.claims(p[inside])
    # points exactly on interfaces have probability zero; every domain point has one owner
    assert np.all(claims.sum(axis=0) == 1)
    assert np.all(d.region_of(p[~inside]) == 0)


def test_interface_ties_go_to_lowest_id():
    d = beam()
    assert d.region_of(np.array([[3.0, 1.0]]))[0] == 1
    assert d.region_of(np.array([[3.0, 0.5], [3.0, 1.5]])).tolist() == [2, 1]


def test_one_catch_all_region_only():
    with pytest.raises(g.GeometryError):
        g.Domain(g.Loop.rectangle(0, 0, 1, 1), (g.MaterialRegion(1, "a"), g.MaterialRegion(2, "b")))


# uniform grid -----------------------------------------------------------------


def test_uniform_grid_unit_square():
    pts, reg = g.uniform_grid(unit_square(), 0.5)
    assert len(pts) == 9
    assert set(reg) == {1}


def test_uniform_grid_beam_count():
    pts, _ = g.uniform_grid(beam(False), 0.02)
    assert len(pts) == 401 * 101


def test_uniform_grid_bad_spacing():
    thin = g.Domain(g.Loop.rectangle(0, 0, 1, 1e-3), (g.MaterialRegion(1, "m"),))
    with pytest.raises(g.GeometryError):
        g.uniform_grid(thin, 0.1)
    with pytest.raises(g.GeometryError):
        g.uniform_grid(unit_square(), 0.0)


def test_uniform_grid_interface_points_lowest_id():
    pts, reg = g.uniform_grid(beam(), 0.5)
    on = np.isclose(pts[:, 1], 1.0)
    assert on.any() and np.all(reg[on] == 1)


# triangulation ------------------------------------------------------------------


def test_unit_square_two_triangles():
    mesh = g.triangulate(unit_square(), 1.0)
    assert len(mesh) == 2
    np.testing.assert_allclose(mesh.areas, [0.5, 0.5])
    tri = mesh[0]
    assert tri.area > 0
    np.testing.assert_allclose(tri.centroid, np.mean(tri.vertices, axis=0))


@pytest.mark.parametrize("name", problems.names())
def test_mesh_area_equals_polygon_area(name):
    spec = problems.builtin(name)
    h = 0.5 if name == "plate_hole" else (0.2 if name.startswith("cantilever") or name == "dbc" else 0.05)
    mesh = g.triangulate(spec.domain, h)
    assert np.all(mesh.areas > 0)
    assert math.isclose(mesh.areas.sum(), spec.domain.polygon_area(h), rel_tol=1e-9)
    np.testing.assert_array_equal(mesh.region, spec.domain.region_of(mesh.centroids))


def test_straight_beam_default_density_count():
    spec = problems.builtin("cantilever_straight")
    mesh = g.triangulate(spec.domain, spec.defaults["quadrature"]["density"])
    assert abs(len(mesh) - 79_200) <= 0.05 * 79_200


def test_mesh_respects_interface():
    mesh = g.triangulate(beam(), 0.25)
    v = mesh.vertices[mesh.triangles]
    # no triangle straddles y = 1
    assert not np.any((v[..., 1].min(axis=1) < 1 - 1e-12) & (v[..., 1].max(axis=1) > 1 + 1e-12))


def test_self_intersecting_boundary_rejected():
    bowtie = g.Loop(tuple(g.polyline([(0, 0), (1, 1), (1, 0), (0, 1), (0, 0)])))
    d = g.Domain(bowtie, (g.MaterialRegion(1, "m"),))
    with pytest.raises(g.GeometryError):
        g.triangulate(d, 0.1)


# quadrature rules ------------------------------------------------------------------


def test_centroid_rule_exact_on_linears():
    rule = g.centroid_rule(g.triangulate(unit_square(), 1.0))
    assert rule.scheme == g.TRIANGLE_CENTROID
    assert abs(rule.integrate(lambda x, y: x) - 0.5) < 1e-12
    assert abs(rule.integrate(lambda x, y: np.ones_like(x)) - 1.0) < 1e-12
    fine = g.centroid_rule(g.triangulate(unit_square(), 0.1))
    assert abs(fine.integrate(lambda x, y: 3 * x - 2 * y + 1) - 1.5) < 1e-12


def test_centroid_rule_quadratic_converges():
    rule = g.centroid_rule(g.triangulate(unit_square(), 0.05))
    assert abs(rule.integrate(lambda x, y: x * x) - 1 / 3) < 1e-3


def test_delaunay_single_triangle():
    mesh = g.Mesh(np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]), np.array([1]))
    rule = g.delaunay_area_rule(mesh)
    np.testing.assert_allclose(rule.weights, [1 / 3] * 3)


def test_delaunay_weights_sum_and_constant():
    rule = g.delaunay_area_rule(g.triangulate(unit_square(), 0.1))
    assert abs(rule.weights.sum() - 1.0) < 1e-9
    assert np.all(rule.weights >= 0)


def test_delaunay_orphan_vertex_warns():
    mesh = g.Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]]), np.array([[0, 1, 2]]), np.array([1]))
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        rule = g.delaunay_area_rule(mesh)
    assert rec
    assert abs(rule.weights.sum() - 0.5) < 1e-15


def test_delaunay_interface_split_keeps_region_totals():
    rule = g.delaunay_area_rule(g.triangulate(beam(), 0.1))
    for rid in (1, 2):
        assert abs(rule.select(rid).weights.sum() - 8.0) < 1e-9


def test_simpson_exact_on_cubic_products():
    rule = g.tensor_rule(unit_square(), 3, 3, g.SIMPSON)
    assert abs(rule.integrate(lambda x, y: x**2 * y**2) - 1 / 9) < 1e-12
    assert abs(rule.integrate(lambda x, y: x**3 * y**3) - 1 / 16) < 1e-12


def test_simpson_needs_odd_counts():
    with pytest.raises(g.GeometryError):
        g.tensor_rule(unit_square(), 4, 3, g.SIMPSON)


def test_trapezoid_constant_and_rate():
    for n in (2, 7, 30):
        assert abs(g.tensor_rule(unit_square(), n, n, g.TRAPEZOID).weights.sum() - 1.0) < 1e-12
    e1 = abs(g.tensor_rule(unit_square(), 11, 11).integrate(lambda x, y: x * x) - 1 / 3)
    e2 = abs(g.tensor_rule(unit_square(), 21, 21).integrate(lambda x, y: x * x) - 1 / 3)
    assert abs(e1 / e2 - 4.0) < 0.2


def test_monte_carlo_equal_weights():
    rule = g.tensor_rule(unit_square(), 5, 5, g.MONTE_CARLO)
    np.testing.assert_allclose(rule.weights, 1 / 25)
    rnd = g.tensor_rule(unit_square(), 20, 20, g.MONTE_CARLO, random=True, seed=4)
    again = g.tensor_rule(unit_square(), 20, 20, g.MONTE_CARLO, random=True, seed=4)
    np.testing.assert_array_equal(rnd.points, again.points)
    assert abs(rnd.weights.sum() - 1.0) < 1e-12


def test_tensor_rule_drops_hole_points():
    spec = problems.builtin("plate_hole")
    rule = g.tensor_rule(spec.domain, 43, 43, g.TRAPEZOID)
    assert np.all(np.hypot(rule.points[:, 0], rule.points[:, 1]) >= 5 - 1e-9)
    assert abs(rule.weights.sum() - spec.domain.area) / spec.domain.area < 0.02


def test_boundary_rule():
    seg = g.BoundarySegment(g.NATURAL, g.Segment((0, 0), (0, 1)), traction=lambda p: p)
    pts, w = g.boundary_rule(seg, 101)
    assert abs(w.sum() - 1.0) < 1e-15
    assert abs(w[0] - 0.005) < 1e-15 and abs(w[-1] - 0.005) < 1e-15
    with pytest.raises(g.GeometryError):
        g.boundary_rule(seg, 1)
    with pytest.raises(g.GeometryError):
        g.boundary_rule(g.BoundarySegment(g.ESSENTIAL, seg.curve), 10)


def test_beam_right_edge_spacing():
    spec = problems.builtin("cantilever_straight")
    pts, _, _ = spec.boundary_rules()[0]
    np.testing.assert_allclose(np.diff(pts[:, 1]), 0.02)


def test_rule_csv(tmp_path):
    rule = g.tensor_rule(unit_square(), 3, 3, g.SIMPSON)
    rule.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "x,y,weight,region_id"
    assert len(lines) == 10
