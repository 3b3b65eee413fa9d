"""Benchmark problem catalog and the declarative problem format.

A problem is described by a plain dict (the same structure a config file
uses for inline problems): curves, regions, materials, boundary data and the
closed-form distance/extension expressions of the admissible field. The
builtin catalog is written in that format too, so every builtin serializes
back to config without loss.

Curve entries::

    {"segment": [[x0, y0], [x1, y1]]}
    {"polyline": [[x0, y0], [x1, y1], ...]}
    {"arc": {"center": [cx, cy], "start": [..], "end": [..], "clockwise": false}}
    {"point": [x, y]}                      # essential entries only
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import geometry as geo
from .dem import Normalization
from .elasticity import Material
from .expr import VectorField

# ---------------------------------------------------------------------------
# declarative format


class ProblemError(ValueError):
    pass


def _pt(p, where: str) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in p)
    except (TypeError, ValueError):
        raise ProblemError(f"{where}: expected a point [x, y], got {p!r}") from None
    return x, y


def parse_curves(items, where: str = "curves") -> list:
    if not isinstance(items, list) or not items:
        raise ProblemError(f"{where}: expected a non-empty list of curves")
    out = []
    for k, item in enumerate(items):
        here = f"{where}[{k}]"
        if not isinstance(item, dict) or len(item) != 1:
            raise ProblemError(f"{here}: a curve is a one-key mapping (segment, polyline, arc)")
        (kind, body), = item.items()
        if kind == "segment":
            if not isinstance(body, list) or len(body) != 2:
                raise ProblemError(f"{here}: segment needs two points")
            out.append(geo.Segment(_pt(body[0], here), _pt(body[1], here)))
        elif kind == "polyline":
            if not isinstance(body, list) or len(body) < 2:
                raise ProblemError(f"{here}: polyline needs at least two points")
            out += geo.polyline([_pt(p, here) for p in body])
        elif kind == "arc":
            if not isinstance(body, dict) or not {"center", "start", "end"} <= set(body):
                raise ProblemError(f"{here}: arc needs center, start and end")
            extra = set(body) - {"center", "start", "end", "clockwise", "radius"}
            if extra:
                raise ProblemError(f"{here}: unknown arc keys {sorted(extra)}")
            c, s, e = (_pt(body[key], here) for key in ("center", "start", "end"))
            r = math.dist(c, s)
            if abs(math.dist(c, e) - r) > 1e-9 * max(1.0, r):
                raise ProblemError(f"{here}: arc start and end are not equidistant from the center")
            if "radius" in body and abs(float(body["radius"]) - r) > 1e-9 * max(1.0, r):
                raise ProblemError(f"{here}: radius {body['radius']} disagrees with the start point")
            out.append(geo.Arc.through(c, r, s, e, clockwise=bool(body.get("clockwise", False))))
        else:
            raise ProblemError(f"{here}: unknown curve kind {kind!r}")
    return out


def curve_to_dict(c) -> dict:
    if isinstance(c, geo.Segment):
        if c.p0 == c.p1:
            return {"point": list(c.p0)}
        return {"segment": [list(c.p0), list(c.p1)]}
    return {"arc": {"center": list(c.center), "start": list(map(float, c.p0)), "end": list(map(float, c.p1)), "clockwise": c.sweep < 0}}


@dataclass(frozen=True)
class NaturalSegment:
    segment: geo.BoundarySegment
    n_points: int
    traction_field: VectorField


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    domain: geo.Domain
    materials: dict
    essential: tuple
    natural: tuple
    distance: VectorField
    extension: VectorField
    normalization: Normalization
    defaults: dict = field(default_factory=dict)
    description: str = ""
    source: dict = field(default_factory=dict, repr=False)

    @property
    def region_ids(self) -> list[int]:
        return self.domain.region_ids

    def material_of(self, region_id: int) -> Material:
        for r in self.domain.regions:
            if r.id == region_id:
                return self.materials[r.material_id]
        raise ProblemError(f"unknown region id {region_id}")

    @property
    def regions(self):
        return self.domain.regions

    def to_dict(self) -> dict:
        return copy.deepcopy(self.source)

    def boundary_rules(self, scale: float = 1.0) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """(points, weights, tractions) for each natural segment; ``scale`` thins the point count."""
        out = []
        for nat in self.natural:
            n = max(2, int(round((nat.n_points - 1) * scale)) + 1)
            pts, w = geo.boundary_rule(nat.segment, n)
            out.append((pts, w, nat.traction_field.value(pts)))
        return out

    def essential_samples(self, n: int, seed: int = 0) -> list[tuple[np.ndarray, tuple]]:
        """Random points on each essential entry with its component mask."""
        rng = np.random.default_rng(seed)
        per = max(1, n // max(1, len(self.essential)))
        return [(e.curve.point(rng.uniform(0.0, 1.0, per)), e.mask) for e in self.essential]


_TOP_KEYS = {
    "name", "description", "boundary", "holes", "regions", "interfaces", "materials",
    "essential", "natural", "distance", "extension", "normalization", "defaults", "constants",
}


def from_dict(d: dict) -> ProblemSpec:
    if not isinstance(d, dict):
        raise ProblemError("problem must be a mapping")
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ProblemError(f"unknown problem keys {sorted(unknown)}")
    for key in ("name", "boundary", "regions", "materials", "distance", "normalization"):
        if key not in d:
            raise ProblemError(f"problem is missing {key!r}")
    name = str(d["name"])
    try:
        outer = geo.Loop(tuple(parse_curves(d["boundary"], "boundary")))
        holes = tuple(geo.Loop(tuple(parse_curves(h, f"holes[{k}]"))) for k, h in enumerate(d.get("holes", [])))
    except geo.GeometryError as e:
        raise ProblemError(str(e)) from None

    materials = {}
    for mid, m in d["materials"].items():
        if not isinstance(m, dict) or set(m) - {"E", "nu", "assumption"} or not {"E", "nu"} <= set(m):
            raise ProblemError(f"materials.{mid}: expected keys E, nu[, assumption]")
        try:
            materials[str(mid)] = Material(float(m["E"]), float(m["nu"]), m.get("assumption", "plane_stress"))
        except ValueError as e:
            raise ProblemError(f"materials.{mid}: {e}") from None

    regions = []
    for k, r in enumerate(d["regions"]):
        if not isinstance(r, dict) or set(r) - {"id", "material", "shape"} or not {"id", "material"} <= set(r):
            raise ProblemError(f"regions[{k}]: expected keys id, material[, shape]")
        if str(r["material"]) not in materials:
            raise ProblemError(f"regions[{k}]: unknown material {r['material']!r}")
        shape = geo.Loop(tuple(parse_curves(r["shape"], f"regions[{k}].shape"))) if r.get("shape") else None
        regions.append(geo.MaterialRegion(int(r["id"]), str(r["material"]), shape))
    interfaces = tuple(parse_curves(d["interfaces"], "interfaces")) if d.get("interfaces") else ()
    try:
        domain = geo.Domain(outer, tuple(regions), holes, interfaces)
    except geo.GeometryError as e:
        raise ProblemError(str(e)) from None

    nd = d["normalization"]
    if not isinstance(nd, dict) or set(nd) - {"L", "origin"} or "L" not in nd:
        raise ProblemError("normalization: expected keys L[, origin]")
    norm = Normalization(float(nd["L"]), _pt(nd.get("origin", [0.0, 0.0]), "normalization.origin"))

    constants = {"L": norm.L, "tau": 1e-3 * norm.L}
    constants.update({str(k): float(v) for k, v in d.get("constants", {}).items()})

    essential = []
    for k, e in enumerate(d.get("essential", [])):
        here = f"essential[{k}]"
        if not isinstance(e, dict) or set(e) - {"curve", "point", "mask"}:
            raise ProblemError(f"{here}: expected keys curve|point, mask")
        mask = tuple(bool(v) for v in e.get("mask", [True, True]))
        if len(mask) != 2 or not any(mask):
            raise ProblemError(f"{here}: mask needs two booleans, at least one true")
        if "point" in e:
            p = _pt(e["point"], here)
            curve = geo.Segment(p, p)
        else:
            curves = parse_curves([e["curve"]], here)
            if len(curves) != 1:
                raise ProblemError(f"{here}: one curve per essential entry")
            curve = curves[0]
        essential.append(geo.BoundarySegment(geo.ESSENTIAL, curve, mask=mask))

    natural = []
    for k, n in enumerate(d.get("natural", [])):
        here = f"natural[{k}]"
        if not isinstance(n, dict) or set(n) - {"curve", "traction", "points"} or not {"curve", "traction"} <= set(n):
            raise ProblemError(f"{here}: expected keys curve, traction[, points]")
        curves = parse_curves([n["curve"]], here)
        if len(curves) != 1:
            raise ProblemError(f"{here}: one curve per natural entry")
        tf = _vector(n["traction"], constants, f"{here}.traction")
        seg = geo.BoundarySegment(geo.NATURAL, curves[0], traction=tf.value)
        natural.append(NaturalSegment(seg, int(n.get("points", 101)), tf))

    distance = _vector(d["distance"], constants, "distance")
    extension = _vector(d.get("extension", ["0", "0"]), constants, "extension")
    return ProblemSpec(
        name=name,
        domain=domain,
        materials=materials,
        essential=tuple(essential),
        natural=tuple(natural),
        distance=distance,
        extension=extension,
        normalization=norm,
        defaults=copy.deepcopy(d.get("defaults", {})),
        description=str(d.get("description", "")),
        source=copy.deepcopy(d),
    )


def _vector(src, constants, where) -> VectorField:
    from .expr import ExprError

    try:
        return VectorField.from_sources(src, constants)
    except ExprError as e:
        raise ProblemError(f"{where}: {e}") from None


# ---------------------------------------------------------------------------
# builtin catalog


def _rect(x0, y0, x1, y1):
    return [{"polyline": [[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]}]


def _arc(center, start, end, clockwise=False):
    return {"arc": {"center": list(center), "start": list(start), "end": list(end), "clockwise": clockwise}}


BEAM_L, BEAM_H = 8.0, 2.0
BEAM_MATERIALS = {"m1": {"E": 8500.0, "nu": 0.3}, "m2": {"E": 43000.0, "nu": 0.3}}
BEAM_TRACTION = -6.0


def _beam_defaults(grid_size):
    return {
        "network": {"shape": [2, 5, 5, 5, 2], "grid_size": grid_size, "order": 3, "grid_range": [0.0, 1.0]},
        "quadrature": {"scheme": "TriangleCentroid", "density": 0.02},
    }


def _cantilever(name, description, interface: list, top_shape: list | None):
    d = {
        "name": name,
        "description": description,
        "boundary": _rect(0.0, 0.0, BEAM_L, BEAM_H),
        "materials": copy.deepcopy(BEAM_MATERIALS),
        "essential": [{"curve": {"segment": [[0.0, 0.0], [0.0, BEAM_H]]}, "mask": [True, True]}],
        "natural": [{"curve": {"segment": [[BEAM_L, 0.0], [BEAM_L, BEAM_H]]}, "traction": ["0", str(BEAM_TRACTION)], "points": 101}],
        "distance": ["x", "x"],
        "normalization": {"L": BEAM_L, "origin": [0.0, 0.0]},
        "defaults": _beam_defaults(10),
    }
    if top_shape is None:
        d["regions"] = [{"id": 1, "material": "m1"}]
        d["materials"] = {"m1": {"E": 15000.0, "nu": 0.3}}
    else:
        d["regions"] = [{"id": 1, "material": "m1", "shape": top_shape}, {"id": 2, "material": "m2"}]
        d["interfaces"] = interface
    return d


def _straight():
    iface = [{"segment": [[0.0, 1.0], [BEAM_L, 1.0]]}]
    top = [{"polyline": [[0.0, 1.0], [BEAM_L, 1.0], [BEAM_L, BEAM_H], [0.0, BEAM_H], [0.0, 1.0]]}]
    return _cantilever("cantilever_straight", "two-material cantilever, straight interface at y = 1", iface, top)


def _wavy():
    # arcs of radius sqrt(85) centred at (2, -8) and (6, 10), antisymmetric about (4, 1)
    iface = [_arc((2.0, -8.0), (0.0, 1.0), (4.0, 1.0), clockwise=True), _arc((6.0, 10.0), (4.0, 1.0), (8.0, 1.0))]
    top = iface + [{"polyline": [[BEAM_L, 1.0], [BEAM_L, BEAM_H], [0.0, BEAM_H], [0.0, 1.0]]}]
    return _cantilever("cantilever_wavy", "two-material cantilever, wavy two-arc interface", iface, top)


def _stepped():
    a, b, dx = 1.2, 0.8, 4.0
    iface = [{"polyline": [[0.0, a], [dx, a], [dx, b], [BEAM_L, b]]}]
    top = [{"polyline": [[0.0, a], [dx, a], [dx, b], [BEAM_L, b], [BEAM_L, BEAM_H], [0.0, BEAM_H], [0.0, a]]}]
    return _cantilever("cantilever_stepped", "two-material cantilever, interface stepping from y = 1.2 to 0.8 at x = 4", iface, top)


def _homogeneous():
    d = _cantilever("cantilever_homogeneous", "single-material cantilever with an analytical solution", [], None)
    d["defaults"] = _beam_defaults(20)
    return d


def _plate():
    L, r1, r2 = 21.0, 5.0, 13.0
    hole = _arc((0.0, 0.0), (0.0, r1), (r1, 0.0), clockwise=True)
    return {
        "name": "plate_hole",
        "description": "quarter of a two-material plate with a central hole under tension",
        "boundary": [{"polyline": [[r1, 0.0], [L, 0.0], [L, L], [0.0, L], [0.0, r1]]}, hole],
        "regions": [
            {"id": 1, "material": "inner", "shape": [{"segment": [[r1, 0.0], [r2, 0.0]]}, _arc((0, 0), (r2, 0.0), (0.0, r2)), {"segment": [[0.0, r2], [0.0, r1]]}, hole]},
            {"id": 2, "material": "outer"},
        ],
        "interfaces": [_arc((0, 0), (r2, 0.0), (0.0, r2))],
        "materials": {"inner": {"E": 10000.0, "nu": 0.3}, "outer": {"E": 1000.0, "nu": 0.4}},
        "essential": [
            {"curve": {"segment": [[0.0, r1], [0.0, L]]}, "mask": [True, False]},
            {"curve": {"segment": [[r1, 0.0], [L, 0.0]]}, "mask": [False, True]},
        ],
        "natural": [{"curve": {"segment": [[L, 0.0], [L, L]]}, "traction": ["120", "0"], "points": 211}],
        "distance": ["x", "y"],
        "normalization": {"L": L, "origin": [0.0, 0.0]},
        "defaults": {
            "network": {"shape": [2, 5, 5, 5, 2], "grid_size": 20, "order": 3, "grid_range": [0.0, 1.0]},
            "quadrature": {"scheme": "TriangleCentroid", "density": 0.1},
        },
    }


DBC_HALF_LENGTH = 4.0
DBC_CORE = 0.48
DBC_THICKNESS = 1.0
DBC_MOMENT = 100.0


def _dbc():
    L, c, t = DBC_HALF_LENGTH, DBC_CORE / 2, DBC_THICKNESS / 2
    q = 12.0 * DBC_MOMENT / DBC_THICKNESS**3
    eps = 1e-8 * L * L
    return {
        "name": "dbc",
        "description": "half model of a copper/alumina/copper substrate in pure bending",
        "boundary": _rect(0.0, -t, L, t),
        "regions": [
            {"id": 1, "material": "cu", "shape": _rect(0.0, c, L, t)},
            {"id": 2, "material": "al2o3", "shape": _rect(0.0, -c, L, c)},
            {"id": 3, "material": "cu"},
        ],
        "interfaces": [{"segment": [[0.0, c], [L, c]]}, {"segment": [[0.0, -c], [L, -c]]}],
        "materials": {"cu": {"E": 128000.0, "nu": 0.34}, "al2o3": {"E": 270000.0, "nu": 0.28}},
        "essential": [
            {"curve": {"segment": [[0.0, -t], [0.0, t]]}, "mask": [True, False]},
            {"point": [0.0, 0.0], "mask": [False, True]},
        ],
        "natural": [{"curve": {"segment": [[L, -t], [L, t]]}, "traction": [f"{q!r}*y", "0"], "points": 201}],
        "constants": {"eps": eps},
        "distance": ["x", "sqrt(x**2 + y**2 + eps) - sqrt(eps)"],
        "normalization": {"L": L, "origin": [0.0, 0.0]},
        "defaults": {
            "network": {"shape": [2, 5, 5, 5, 2], "grid_size": 10, "order": 2, "grid_range": [-1.0, 1.0]},
            "quadrature": {"scheme": "Simpson", "density": [801, 201]},
        },
    }


TGV_TOP, TGV_BOTTOM = 0.4, 0.3


def _via_loop(xc, radius=None):
    """Counter-clockwise tapered via; optional semicircular bumps at mid-height of both walls."""
    a, b = TGV_TOP / 2, TGV_BOTTOM / 2
    bl, br, tr, tl = (xc - b, 0.0), (xc + b, 0.0), (xc + a, 1.0), (xc - a, 1.0)
    if radius is None:
        return [{"polyline": [list(bl), list(br), list(tr), list(tl), list(bl)]}]

    def wall(p, q):
        m = ((p[0] + q[0]) / 2, (p[1] + q[1]) / 2)
        dx, dy = q[0] - p[0], q[1] - p[1]
        n = math.hypot(dx, dy)
        s = (m[0] - radius * dx / n, m[1] - radius * dy / n)
        e = (m[0] + radius * dx / n, m[1] + radius * dy / n)
        return [{"segment": [list(p), list(s)]}, _arc(m, s, e), {"segment": [list(e), list(q)]}]

    return [{"segment": [list(bl), list(br)]}, *wall(br, tr), {"segment": [list(tr), list(tl)]}, *wall(tl, bl)]


def _tgv(name, description, width, centers, traction, radius=None):
    vias = [_via_loop(xc, radius) for xc in centers]
    regions = [{"id": k + 1, "material": "cu", "shape": v} for k, v in enumerate(vias)]
    regions.append({"id": len(vias) + 1, "material": "glass"})
    # walls only: via tops and bottoms lie on the outer boundary
    interfaces = [c for v in vias for c in v if not ("segment" in c and c["segment"][0][1] == c["segment"][1][1])]
    if radius is None:
        interfaces = []
        for xc in centers:
            a, b = TGV_TOP / 2, TGV_BOTTOM / 2
            interfaces += [{"segment": [[xc + b, 0.0], [xc + a, 1.0]]}, {"segment": [[xc - a, 1.0], [xc - b, 0.0]]}]
    n_pts = 200 * int(round(width)) + 1
    return {
        "name": name,
        "description": description,
        "boundary": _rect(0.0, 0.0, width, 1.0),
        "regions": regions,
        "interfaces": interfaces,
        "materials": {"glass": {"E": 77000.0, "nu": 0.24}, "cu": {"E": 150000.0, "nu": 0.3}},
        "essential": [{"curve": {"segment": [[0.0, 0.0], [width, 0.0]]}, "mask": [True, True]}],
        "natural": [{"curve": {"segment": [[0.0, 1.0], [width, 1.0]]}, "traction": [str(traction), "0"], "points": n_pts}],
        "distance": ["y", "y"],
        "normalization": {"L": float(width), "origin": [0.0, 0.0]},
        "defaults": {
            "network": {"shape": [2, 5, 5, 5, 2], "grid_size": 20, "order": 3, "grid_range": [0.0, 1.0]},
            "quadrature": {"scheme": "TriangleCentroid", "density": 0.005},
        },
    }


_BUILDERS = {
    "cantilever_straight": _straight,
    "cantilever_wavy": _wavy,
    "cantilever_stepped": _stepped,
    "cantilever_homogeneous": _homogeneous,
    "plate_hole": _plate,
    "dbc": _dbc,
    "tgv_single": lambda: _tgv("tgv_single", "glass substrate with one tapered copper via, top shear", 1.0, [0.5], 200.0),
    "tgv_rough1": lambda: _tgv("tgv_rough1", "single via with R = 0.1 semicircular wall bumps", 1.0, [0.5], 200.0, 0.1),
    "tgv_rough2": lambda: _tgv("tgv_rough2", "single via with R = 0.05 semicircular wall bumps", 1.0, [0.5], 200.0, 0.05),
    "tgv_dual": lambda: _tgv("tgv_dual", "two vias 0.6 apart in a 2 x 1 substrate, top shear", 2.0, [0.7, 1.3], 250.0),
}


def names() -> list[str]:
    return list(_BUILDERS)


def builtin_dict(name: str) -> dict:
    if name not in _BUILDERS:
        raise ProblemError(f"unknown problem {name!r}; choose from {', '.join(_BUILDERS)}")
    return _BUILDERS[name]()


def builtin(name: str) -> ProblemSpec:
    return from_dict(builtin_dict(name))


# ---------------------------------------------------------------------------
# analytical oracles


@dataclass(frozen=True)
class AnalyticalBeam:
    T: float = 12.0
    E: float = 15000.0
    nu: float = 0.3
    L: float = 8.0
    h: float = 1.0

    def __post_init__(self):
        if not self.I_z > 0:
            raise ProblemError("beam height must be positive")

    @property
    def I_z(self) -> float:
        return (2.0 * self.h) ** 3 / 12.0


# comparison points on the bottom edge
BEAM_POINTS = {"A": (2.0, 0.0), "B": (5.0, 0.0), "C": (8.0, 0.0)}


def analytic_ux(beam: AnalyticalBeam, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    T, E, nu, L, h, I = beam.T, beam.E, beam.nu, beam.L, beam.h, beam.I_z
    return T * (y - h) / (6.0 * E * I) * ((6.0 * L - 3.0 * x) * x + (2.0 + nu) * (y * y - 2.0 * h * y))


@dataclass(frozen=True)
class BeamOracle:
    EI: float
    kappa: float
    tip_deflection: float  # magnitude of u_y at the loaded end on the neutral axis


def dbc_beam_oracle(spec: ProblemSpec | None = None, moment: float = DBC_MOMENT) -> BeamOracle:
    """Composite Euler-Bernoulli bending of the symmetric three-layer section."""
    if spec is None:
        spec = builtin("dbc")
    core = spec.materials["al2o3"].E
    cu = spec.materials["cu"].E
    c, t = DBC_CORE / 2, DBC_THICKNESS / 2
    EI = core * (2 * c) ** 3 / 12.0 + cu * 2.0 * (t**3 - c**3) / 3.0
    kappa = moment / EI
    return BeamOracle(EI, kappa, kappa * DBC_HALF_LENGTH**2 / 2.0)
