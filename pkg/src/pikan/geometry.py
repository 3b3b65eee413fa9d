"""2D domains built from segment/arc loops, material regions, meshing and quadrature.

Points are handled as ``(N, 2)`` float arrays throughout. Curves are exact
(arcs are true circular arcs); they are only polygonalised for meshing, with a
chord sagitta no larger than ``h**2`` for target edge length ``h``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
import triangle as tr
from scipy.spatial import cKDTree

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    pass


class Point2(NamedTuple):
    x: float
    y: float


def _pts(points) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    return p.reshape(-1, 2)


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class Segment:
    p0: tuple
    p1: tuple

    def point(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)[..., None]
        a, b = np.asarray(self.p0, float), np.asarray(self.p1, float)
        return a + t * (b - a)

    def tangent(self, t) -> np.ndarray:
        d = np.asarray(self.p1, float) - np.asarray(self.p0, float)
        return np.broadcast_to(d / np.hypot(*d), np.shape(t) + (2,)).copy()

    @property
    def length(self) -> float:
        return math.dist(self.p0, self.p1)

    def n_chords(self, h: float) -> int:
        return max(1, math.ceil(self.length / h - 1e-9))

    def distance(self, points) -> np.ndarray:
        p = _pts(points)
        a, b = np.asarray(self.p0, float), np.asarray(self.p1, float)
        d = b - a
        dd = d @ d
        t = np.clip(((p - a) @ d) / dd, 0.0, 1.0) if dd > 0 else np.zeros(len(p))
        return np.hypot(*(p - a - t[:, None] * d).T)

    def project(self, point) -> float:
        a, b = np.asarray(self.p0, float), np.asarray(self.p1, float)
        d = b - a
        dd = d @ d
        return float(np.clip((np.asarray(point, float) - a) @ d / dd, 0.0, 1.0)) if dd > 0 else 0.0

    def split(self, t: float) -> tuple["Segment", "Segment"]:
        m = tuple(self.point(t))
        return Segment(self.p0, m), Segment(m, self.p1)

    def crossings(self, points) -> np.ndarray:
        """Parity contribution of a +x ray from each point (half-open in y)."""
        p = _pts(points)
        (x0, y0), (x1, y1) = self.p0, self.p1
        straddle = (y0 > p[:, 1]) != (y1 > p[:, 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = x0 + (p[:, 1] - y0) * (x1 - x0) / (y1 - y0)
        return straddle & (xi > p[:, 0])

    def signed_area(self) -> float:
        (x0, y0), (x1, y1) = self.p0, self.p1
        return 0.5 * (x0 * y1 - x1 * y0)

    def reversed(self) -> "Segment":
        return Segment(self.p1, self.p0)


@dataclass(frozen=True)
class Arc:
    """Circular arc from angle a0 to a1 (radians); a1 < a0 runs clockwise."""

    center: tuple
    radius: float
    a0: float
    a1: float

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError(f"arc radius must be positive, got {self.radius}")
        if self.a0 == self.a1 or abs(self.a1 - self.a0) > TWO_PI + 1e-12:
            raise GeometryError("arc sweep must be nonzero and at most a full turn")

    @classmethod
    def through(cls, center, radius, start, end, clockwise=False) -> "Arc":
        """Arc between two points on the circle, taking the shorter-or-stated turn direction."""
        cx, cy = center
        a0 = math.atan2(start[1] - cy, start[0] - cx)
        a1 = math.atan2(end[1] - cy, end[0] - cx)
        if clockwise:
            while a1 >= a0:
                a1 -= TWO_PI
        else:
            while a1 <= a0:
                a1 += TWO_PI
        return cls(tuple(center), float(radius), a0, a1)

    @property
    def sweep(self) -> float:
        return self.a1 - self.a0

    @property
    def p0(self):
        return tuple(self.point(0.0))

    @property
    def p1(self):
        return tuple(self.point(1.0))

    def _angle(self, t):
        return self.a0 + np.asarray(t, dtype=np.float64) * self.sweep

    def point(self, t) -> np.ndarray:
        a = self._angle(t)
        c = np.asarray(self.center, float)
        return c + self.radius * np.stack([np.cos(a), np.sin(a)], axis=-1)

    def tangent(self, t) -> np.ndarray:
        a = self._angle(t)
        s = math.copysign(1.0, self.sweep)
        return s * np.stack([-np.sin(a), np.cos(a)], axis=-1)

    @property
    def length(self) -> float:
        return self.radius * abs(self.sweep)

    def n_chords(self, h: float) -> int:
        # chord length <= h and sagitta r (1 - cos(dphi / 2)) <= h^2
        by_len = math.ceil(self.length / h - 1e-9)
        cos_half = 1.0 - h * h / self.radius
        by_sag = 1 if cos_half <= -1.0 else math.ceil(abs(self.sweep) / (2.0 * math.acos(cos_half)) - 1e-9)
        return max(1, by_len, by_sag)

    def _in_sweep(self, ang) -> np.ndarray:
        lo = min(self.a0, self.a1)
        rel = np.mod(ang - lo, TWO_PI)
        return rel <= abs(self.sweep) + 1e-15

    def distance(self, points) -> np.ndarray:
        p = _pts(points)
        c = np.asarray(self.center, float)
        d = p - c
        ang = np.arctan2(d[:, 1], d[:, 0])
        radial = np.abs(np.hypot(d[:, 0], d[:, 1]) - self.radius)
        ends = np.minimum(np.hypot(*(p - self.p0).T), np.hypot(*(p - self.p1).T))
        return np.where(self._in_sweep(ang), radial, ends)

    def project(self, point) -> float:
        d = np.asarray(point, float) - np.asarray(self.center, float)
        ang = math.atan2(d[1], d[0])
        rel = (ang - self.a0) % TWO_PI if self.sweep > 0 else (self.a0 - ang) % TWO_PI
        t = rel / abs(self.sweep)
        return float(min(max(t, 0.0), 1.0)) if t <= 1.0 + 1e-12 else (0.0 if rel > math.pi + abs(self.sweep) / 2 else 1.0)

    def split(self, t: float) -> tuple["Arc", "Arc"]:
        m = self.a0 + t * self.sweep
        return Arc(self.center, self.radius, self.a0, m), Arc(self.center, self.radius, m, self.a1)

    def _monotone_pieces(self):
        # split at angles where y is extremal (cos a = 0) so each piece is y-monotone
        lo, hi = sorted((self.a0, self.a1))
        cuts = [lo]
        k = math.ceil((lo - math.pi / 2) / math.pi)
        while (a := math.pi / 2 + k * math.pi) < hi:
            if a > lo:
                cuts.append(a)
            k += 1
        cuts.append(hi)
        return list(zip(cuts[:-1], cuts[1:]))

    def crossings(self, points) -> np.ndarray:
        p = _pts(points)
        cx, cy = self.center
        r = self.radius
        hit = np.zeros(len(p), dtype=bool)
        for lo, hi in self._monotone_pieces():
            ya, yb = cy + r * math.sin(lo), cy + r * math.sin(hi)
            side = math.copysign(1.0, math.cos(0.5 * (lo + hi)))
            straddle = (ya > p[:, 1]) != (yb > p[:, 1])
            dy = np.clip(p[:, 1] - cy, -r, r)
            xi = cx + side * np.sqrt(r * r - dy * dy)
            hit ^= straddle & (xi > p[:, 0])
        return hit

    def signed_area(self) -> float:
        cx, cy = self.center
        r, a0, a1 = self.radius, self.a0, self.a1
        return 0.5 * (r * cx * (math.sin(a1) - math.sin(a0)) - r * cy * (math.cos(a1) - math.cos(a0)) + r * r * (a1 - a0))

    def reversed(self) -> "Arc":
        return Arc(self.center, self.radius, self.a1, self.a0)


Curve = Segment | Arc


def polyline(points: Sequence, closed: bool = False) -> list[Segment]:
    pts = [tuple(map(float, p)) for p in points]
    if closed:
        pts.append(pts[0])
    return [Segment(a, b) for a, b in zip(pts[:-1], pts[1:])]


def discretize(curve: Curve, h: float) -> np.ndarray:
    """Chord vertices of one curve (both endpoints included)."""
    n = curve.n_chords(h)
    return curve.point(np.linspace(0.0, 1.0, n + 1))


# ---------------------------------------------------------------------------
# loops and domains


@dataclass(frozen=True)
class Loop:
    curves: tuple

    def __post_init__(self):
        curves = tuple(self.curves)
        object.__setattr__(self, "curves", curves)
        if not curves:
            raise GeometryError("empty loop")
        for a, b in zip(curves, curves[1:] + curves[:1]):
            if math.dist(a.p1, b.p0) > 1e-9 * (1.0 + self.scale):
                raise GeometryError(f"loop is not closed between {a.p1} and {b.p0}")

    @classmethod
    def rectangle(cls, x0, y0, x1, y1) -> "Loop":
        return cls(tuple(polyline([(x0, y0), (x1, y0), (x1, y1), (x0, y1)], closed=True)))

    @property
    def scale(self) -> float:
        pts = np.array([c.p0 for c in self.curves])
        return float(np.ptp(pts, axis=0).max()) if len(pts) > 1 else 1.0

    @property
    def area(self) -> float:
        return abs(sum(c.signed_area() for c in self.curves))

    @property
    def length(self) -> float:
        return sum(c.length for c in self.curves)

    def bbox(self) -> tuple[float, float, float, float]:
        pts = np.concatenate([c.point(np.linspace(0, 1, 65)) for c in self.curves])
        return (*pts.min(axis=0), *pts.max(axis=0))

    def distance(self, points) -> np.ndarray:
        return np.min([c.distance(points) for c in self.curves], axis=0)

    def strictly_inside(self, points) -> np.ndarray:
        p = _pts(points)
        odd = np.zeros(len(p), dtype=bool)
        for c in self.curves:
            odd ^= c.crossings(p)
        return odd

    def contains(self, points, tol: float | None = None) -> np.ndarray:
        """Closed membership: inside or within ``tol`` of the boundary."""
        p = _pts(points)
        tol = 1e-9 * self.scale if tol is None else tol
        return self.strictly_inside(p) | (self.distance(p) <= tol)

    def polygon(self, h: float) -> np.ndarray:
        return np.concatenate([discretize(c, h)[:-1] for c in self.curves])

    def is_simple(self, h: float) -> bool:
        from shapely.geometry import LinearRing

        return LinearRing(self.polygon(h)).is_simple


@dataclass(frozen=True)
class MaterialRegion:
    """Region ``id`` of the domain; ``shape`` None marks the catch-all remainder."""

    id: int
    material_id: str
    shape: Loop | None = None


@dataclass(frozen=True)
class Domain:
    outer: Loop
    regions: tuple
    holes: tuple = ()
    interfaces: tuple = ()  # curves separating regions, used as mesh constraints

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(sorted(self.regions, key=lambda r: r.id)))
        object.__setattr__(self, "holes", tuple(self.holes))
        object.__setattr__(self, "interfaces", tuple(self.interfaces))
        ids = [r.id for r in self.regions]
        if len(set(ids)) != len(ids) or not ids:
            raise GeometryError(f"region ids must be unique and non-empty, got {ids}")
        if sum(r.shape is None for r in self.regions) > 1:
            raise GeometryError("at most one catch-all region")

    @property
    def scale(self) -> float:
        return self.outer.scale

    @property
    def tol(self) -> float:
        return 1e-9 * self.scale

    @property
    def area(self) -> float:
        return self.outer.area - sum(h.area for h in self.holes)

    def polygon_area(self, h: float) -> float:
        def shoelace(p):
            x, y = p[:, 0], p[:, 1]
            return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

        return shoelace(self.outer.polygon(h)) - sum(shoelace(hl.polygon(h)) for hl in self.holes)

    def bbox(self) -> tuple[float, float, float, float]:
        return self.outer.bbox()

    @property
    def region_ids(self) -> list[int]:
        return [r.id for r in self.regions]

    def contains(self, points) -> np.ndarray:
        p = _pts(points)
        inside = self.outer.contains(p, self.tol)
        for hole in self.holes:
            inside &= ~hole.strictly_inside(p) | (hole.distance(p) <= self.tol)
        return inside

    def claims(self, points) -> np.ndarray:
        """(n_regions, N) closed membership of every region predicate."""
        p = _pts(points)
        dom = self.contains(p)
        rows = []
        for r in self.regions:
            if r.shape is not None:
                rows.append(dom & r.shape.contains(p, self.tol))
            else:
                rest = dom.copy()
                for other in self.regions:
                    if other.shape is not None:
                        rest &= ~(other.shape.strictly_inside(p) & (other.shape.distance(p) > self.tol))
                rows.append(rest)
        return np.array(rows).reshape(len(self.regions), len(p))

    def region_of(self, points) -> np.ndarray:
        """Region id per point (lowest id on ties), 0 outside the domain."""
        c = self.claims(points)
        ids = np.array(self.region_ids)
        first = np.argmax(c, axis=0)
        return np.where(c.any(axis=0), ids[first], 0)


# ---------------------------------------------------------------------------
# boundary segments


ESSENTIAL, NATURAL = "essential", "natural"


@dataclass(frozen=True)
class BoundarySegment:
    kind: str
    curve: Curve
    traction: Callable | None = None  # natural: (N, 2) points -> (N, 2) tractions
    mask: tuple = (True, True)  # essential: which components are prescribed
    value: Callable | None = None  # essential: prescribed displacement (zero if None)

    def __post_init__(self):
        if self.kind not in (ESSENTIAL, NATURAL):
            raise GeometryError(f"unknown boundary kind {self.kind!r}")
        if self.kind == NATURAL and self.traction is None:
            raise GeometryError("natural segment needs a traction function")

    def point(self, t) -> np.ndarray:
        return self.curve.point(t)


def boundary_rule(segment: BoundarySegment, n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniformly spaced points with composite trapezoid weights summing to the curve length."""
    if segment.kind != NATURAL:
        raise GeometryError("essential boundaries are enforced exactly and never sampled")
    if n_points < 2:
        raise GeometryError(f"boundary rule needs at least 2 points, got {n_points}")
    t = np.linspace(0.0, 1.0, n_points)
    w = np.full(n_points, segment.curve.length / (n_points - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return segment.curve.point(t), w


# ---------------------------------------------------------------------------
# lattices and quadrature


MONTE_CARLO = "MonteCarlo"
TRAPEZOID = "Trapezoid"
SIMPSON = "Simpson"
TRIANGLE_CENTROID = "TriangleCentroid"
DELAUNAY_AREA = "DelaunayArea"
SCHEMES = (MONTE_CARLO, TRAPEZOID, SIMPSON, TRIANGLE_CENTROID, DELAUNAY_AREA)


@dataclass(frozen=True)
class QuadratureRule:
    scheme: str
    points: np.ndarray
    weights: np.ndarray
    region: np.ndarray

    def __post_init__(self):
        n = len(self.points)
        if self.weights.shape != (n,) or self.region.shape != (n,):
            raise GeometryError("points, weights and regions must have matching lengths")

    def __len__(self) -> int:
        return len(self.points)

    def integrate(self, f: Callable) -> float:
        return float(np.dot(f(self.points[:, 0], self.points[:, 1]), self.weights))

    def select(self, region_id: int) -> "QuadratureRule":
        m = self.region == region_id
        return QuadratureRule(self.scheme, self.points[m], self.weights[m], self.region[m])

    def to_csv(self, path) -> None:
        data = np.column_stack([self.points, self.weights, self.region])
        np.savetxt(path, data, delimiter=",", header="x,y,weight,region_id", comments="", fmt=["%.17g"] * 3 + ["%d"])


def _axis(lo: float, hi: float, spacing: float) -> np.ndarray:
    n = int(math.floor((hi - lo) / spacing + 1e-9)) + 1
    return lo + spacing * np.arange(n)


def uniform_grid(domain: Domain, spacing: float) -> tuple[np.ndarray, np.ndarray]:
    """Row-major lattice over the bounding box, clipped to the domain."""
    if not spacing > 0:
        raise GeometryError(f"spacing must be positive, got {spacing}")
    x0, y0, x1, y1 = domain.bbox()
    if spacing > x1 - x0 or spacing > y1 - y0:
        raise GeometryError(f"spacing {spacing} exceeds the domain extent")
    gx, gy = _axis(x0, x1, spacing), _axis(y0, y1, spacing)
    X, Y = np.meshgrid(gx, gy)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    reg = domain.region_of(pts)
    keep = reg > 0
    return pts[keep], reg[keep]


def _composite_weights(n: int, length: float, scheme: str) -> np.ndarray:
    if n < 2:
        raise GeometryError("tensor rules need at least 2 points per axis")
    h = length / (n - 1)
    if scheme == SIMPSON:
        if n % 2 == 0:
            raise GeometryError(f"Simpson's rule needs an odd point count, got {n}")
        w = np.ones(n)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * h / 3.0
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def tensor_rule(domain: Domain, nx: int, ny: int, scheme: str = TRAPEZOID, *, random: bool = False, seed: int = 0) -> QuadratureRule:
    """Tensor-product rule on an nx x ny bounding-box lattice; outside points are dropped.

    MonteCarlo gives every in-domain lattice point the same weight (domain
    area / count). With ``random=True`` it instead draws nx*ny uniform points
    in the bounding box from a seeded generator.
    """
    if scheme not in (TRAPEZOID, SIMPSON, MONTE_CARLO):
        raise GeometryError(f"tensor_rule does not support {scheme!r}")
    x0, y0, x1, y1 = domain.bbox()
    if scheme == MONTE_CARLO and random:
        rng = np.random.default_rng(seed)
        pts = rng.uniform((x0, y0), (x1, y1), size=(nx * ny, 2))
        reg = domain.region_of(pts)
        keep = reg > 0
        w = np.full(keep.sum(), (x1 - x0) * (y1 - y0) / (nx * ny))
        return QuadratureRule(scheme, pts[keep], w, reg[keep])
    X, Y = np.meshgrid(np.linspace(x0, x1, nx), np.linspace(y0, y1, ny))
    pts = np.column_stack([X.ravel(), Y.ravel()])
    reg = domain.region_of(pts)
    keep = reg > 0
    if scheme == MONTE_CARLO:
        w = np.full(keep.sum(), domain.area / max(int(keep.sum()), 1))
    else:
        wx = _composite_weights(nx, x1 - x0, scheme)
        wy = _composite_weights(ny, y1 - y0, scheme)
        w = np.outer(wy, wx).ravel()[keep]
    return QuadratureRule(scheme, pts[keep], w, reg[keep])


# ---------------------------------------------------------------------------
# triangulation


class Triangle(NamedTuple):
    vertices: tuple
    area: float
    centroid: Point2
    region_id: int


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray  # (V, 2)
    triangles: np.ndarray  # (T, 3) counter-clockwise vertex indices
    region: np.ndarray  # (T,)
    areas: np.ndarray = field(init=False)
    centroids: np.ndarray = field(init=False)

    def __post_init__(self):
        v = self.vertices[self.triangles]
        e1, e2 = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]
        object.__setattr__(self, "areas", 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]))
        object.__setattr__(self, "centroids", v.mean(axis=1))

    def __len__(self) -> int:
        return len(self.triangles)

    def __getitem__(self, k: int) -> Triangle:
        v = self.vertices[self.triangles[k]]
        return Triangle(tuple(Point2(*p) for p in v), float(self.areas[k]), Point2(*self.centroids[k]), int(self.region[k]))


def _merge_vertices(chains: list[np.ndarray], tol: float) -> tuple[np.ndarray, np.ndarray]:
    allv = np.concatenate(chains)
    tree = cKDTree(allv)
    rep = np.arange(len(allv))
    for i, j in sorted(tree.query_pairs(tol)):
        rep[j] = min(rep[j], rep[i])
    # resolve to the earliest representative
    for k in range(len(rep)):
        rep[k] = rep[rep[k]]
    uniq, inverse = np.unique(rep, return_inverse=True)
    verts = allv[uniq]
    segs, start = [], 0
    for c in chains:
        idx = inverse[start : start + len(c)]
        segs.extend((a, b) for a, b in zip(idx[:-1], idx[1:]) if a != b)
        start += len(c)
    seg = np.unique(np.sort(np.array(segs), axis=1), axis=0) if segs else np.zeros((0, 2), int)
    return verts, seg


def _split_at(curves, points, tol) -> list:
    """Split curves at given points lying on them so mesh constraints meet at vertices."""
    out = []
    for c in curves:
        ts = sorted({round(c.project(p), 14) for p in points if c.distance(np.asarray(p)[None])[0] <= tol})
        ts = [t for t in ts if 1e-12 < t < 1 - 1e-12]
        rest = c
        consumed = 0.0
        for t in ts:
            local = (t - consumed) / (1.0 - consumed)
            a, rest = rest.split(local)
            out.append(a)
            consumed = t
        out.append(rest)
    return out


def _constraint_curves(domain: Domain) -> list:
    loops = [domain.outer, *domain.holes]
    ends = [p for c in domain.interfaces for p in (c.p0, c.p1)]
    curves = []
    for lp in loops:
        curves += _split_at(lp.curves, ends, domain.tol)
    # interfaces may end on each other mid-curve as well
    curves += _split_at(domain.interfaces, ends, domain.tol)
    return curves


def triangulate(domain: Domain, target_edge_length: float) -> Mesh:
    """Constrained Delaunay mesh with an interior Steiner lattice at the target spacing."""
    h = float(target_edge_length)
    if not h > 0:
        raise GeometryError(f"target edge length must be positive, got {h}")
    for lp in (domain.outer, *domain.holes):
        if not lp.is_simple(h):
            raise GeometryError("domain boundary self-intersects")
    curves = _constraint_curves(domain)
    chains = [discretize(c, h) for c in curves]
    verts, segs = _merge_vertices(chains, domain.tol)
    dense = np.concatenate([discretize(c, h / 8.0) for c in curves])
    lattice, _ = uniform_grid(domain, h) if h <= min(np.ptp(np.reshape(domain.bbox(), (2, 2)), axis=0)) else (np.zeros((0, 2)), None)
    if len(lattice):
        d, _ = cKDTree(dense).query(lattice)
        lattice = lattice[d > 0.3 * h]
    pts = np.concatenate([verts, lattice])
    out = tr.triangulate({"vertices": pts, "segments": segs}, "pQ")
    V, T = out["vertices"], out["triangles"]
    cent = V[T].mean(axis=1)
    reg = domain.region_of(cent)
    keep = reg > 0
    T = T[keep]
    # drop vertices only referenced by discarded (hole) triangles
    used = np.unique(T)
    remap = -np.ones(len(V), dtype=int)
    remap[used] = np.arange(len(used))
    return Mesh(V[used], remap[T], reg[keep])


def centroid_rule(mesh: Mesh) -> QuadratureRule:
    if len(mesh) == 0:
        raise GeometryError("empty triangulation")
    return QuadratureRule(TRIANGLE_CENTROID, mesh.centroids.copy(), mesh.areas.copy(), mesh.region.copy())


def delaunay_area_rule(mesh: Mesh) -> QuadratureRule:
    """One third of the incident triangle area per vertex, kept separate per region.

    A vertex on a material interface yields one point per adjacent region,
    each carrying only that region's share, so per-region sums stay exact.
    """
    if len(mesh) == 0:
        raise GeometryError("empty triangulation")
    ids = np.unique(mesh.region)
    nv = len(mesh.vertices)
    pts, wts, regs = [], [], []
    for rid in ids:
        m = mesh.region == rid
        w = np.bincount(mesh.triangles[m].ravel(), weights=np.repeat(mesh.areas[m] / 3.0, 3), minlength=nv)
        nz = w > 0
        pts.append(mesh.vertices[nz])
        wts.append(w[nz])
        regs.append(np.full(nz.sum(), rid))
    orphan = nv - len(np.unique(mesh.triangles))
    if orphan:
        warnings.warn(f"{orphan} mesh vertices are not in any triangle and get zero weight")
    return QuadratureRule(DELAUNAY_AREA, np.concatenate(pts), np.concatenate(wts), np.concatenate(regs))


def mesh_rule(domain: Domain, scheme: str, density) -> QuadratureRule:
    """Build the interior rule for ``scheme`` at ``density``.

    Mesh schemes take a target edge length; tensor schemes take ``(nx, ny)``.
    """
    if scheme == TRIANGLE_CENTROID:
        return centroid_rule(triangulate(domain, float(density)))
    if scheme == DELAUNAY_AREA:
        return delaunay_area_rule(triangulate(domain, float(density)))
    nx, ny = density
    return tensor_rule(domain, int(nx), int(ny), scheme)
