import math

import numpy as np
import pytest

from pikan import dem, geometry as g, kan, problems


def test_catalog_names():
    assert set(problems.names()) >= {"cantilever_straight", "cantilever_wavy", "cantilever_stepped", "cantilever_homogeneous", "plate_hole", "dbc", "tgv_single", "tgv_dual"}
    with pytest.raises(problems.ProblemError):
        problems.builtin("nope")


def test_straight_beam():
    spec = problems.builtin("cantilever_straight")
    assert spec.region_ids == [1, 2]
    (iface,) = spec.domain.interfaces
    np.testing.assert_allclose(iface.point(np.linspace(0, 1, 5))[:, 1], 1.0)


def test_dbc_traction_and_length():
    spec = problems.builtin("dbc")
    t = spec.natural[0].traction_field.value(np.array([[4.0, 0.25]]))
    np.testing.assert_allclose(t, [[300.0, 0.0]])
    assert spec.normalization.L == 4.0


def test_plate_length():
    assert problems.builtin("plate_hole").normalization.L == 21


@pytest.mark.parametrize("x,expected", [(2.0, 0.0168), (5.0, 0.033), (8.0, 0.0384)])
def test_analytic_points(x, expected):
    u = problems.analytic_ux(problems.AnalyticalBeam(), x, 0.0)
    assert u < 0
    assert math.isclose(abs(float(u)), expected, rel_tol=1e-12)


def test_dbc_oracle():
    o = problems.dbc_beam_oracle()
    EI = 270000.0 * 0.48**3 / 12 + 128000.0 * 2 * (0.5**3 - 0.24**3) / 3
    assert math.isclose(o.EI, EI, rel_tol=1e-14)
    assert math.isclose(o.kappa, 100.0 / EI, rel_tol=1e-14)
    assert math.isclose(o.tip_deflection, o.kappa * 8.0, rel_tol=1e-14)


@pytest.mark.parametrize("name", problems.names())
def test_round_trip_through_dict(name):
    spec = problems.builtin(name)
    again = problems.from_dict(spec.to_dict())
    assert again.region_ids == spec.region_ids
    assert again.domain.area == spec.domain.area
    assert again.distance.sources == spec.distance.sources


@pytest.mark.parametrize("name", problems.names())
def test_weights_conserve_area(name):
    spec = problems.builtin(name)
    h = {"plate_hole": 0.5, "dbc": 0.1}.get(name, 0.2 if name.startswith("cantilever") else 0.05)
    mesh = g.triangulate(spec.domain, h)
    for rule in (g.centroid_rule(mesh), g.delaunay_area_rule(mesh)):
        assert math.isclose(rule.weights.sum(), mesh.areas.sum(), rel_tol=1e-9)


@pytest.mark.parametrize("name", problems.names())
def test_essential_conditions_exact(name):
    spec = problems.builtin(name)
    net = kan.KanNetwork.create([2, 3, 2], 5, 3, spec.defaults["network"]["grid_range"], seed=0)
    field = dem.AdmissibleField(net, spec)
    rng = np.random.default_rng(1)
    for pts, mask in spec.essential_samples(500):
        net.set_flat(rng.normal(size=net.n_params))
        u, _ = field.evaluate(pts)
        assert np.abs(u[:, list(mask)]).max() < 1e-12


@pytest.mark.parametrize("name", problems.names())
def test_normalized_points_inside_grid_range(name):
    spec = problems.builtin(name)
    x0, y0, x1, y1 = spec.domain.bbox()
    corners = np.array([[x0, y0], [x1, y1]])
    spec.normalization.check(corners, spec.defaults["network"]["grid_range"])


def test_missing_and_unknown_keys():
    d = problems.builtin_dict("cantilever_straight")
    with pytest.raises(problems.ProblemError, match="unknown"):
        problems.from_dict({**d, "bogus": 1})
    bad = dict(d)
    del bad["distance"]
    with pytest.raises(problems.ProblemError, match="distance"):
        problems.from_dict(bad)


def test_bad_entries_rejected():
    d = problems.builtin_dict("cantilever_straight")
    with pytest.raises(problems.ProblemError, match="material"):
        problems.from_dict({**d, "regions": [{"id": 1, "material": "steel"}]})
    with pytest.raises(problems.ProblemError, match="curve kind"):
        problems.from_dict({**d, "boundary": [{"spline": [[0, 0], [1, 1]]}]})
    with pytest.raises(problems.ProblemError, match="distance"):
        problems.from_dict({**d, "distance": ["import_os", "x"]})
    with pytest.raises(problems.ProblemError, match="equidistant"):
        problems.from_dict({**d, "interfaces": [{"arc": {"center": [0, 0], "start": [1, 0], "end": [0, 2]}}]})
    with pytest.raises(problems.ProblemError, match="Poisson"):
        problems.from_dict({**d, "materials": {"m1": {"E": 1.0, "nu": 0.5}, "m2": {"E": 1.0, "nu": 0.3}}})


def test_boundary_rule_scaling():
    spec = problems.builtin("cantilever_straight")
    assert len(spec.boundary_rules()[0][0]) == 101
    assert len(spec.boundary_rules(0.5)[0][0]) == 51
