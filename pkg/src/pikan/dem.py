"""Deep Energy Method loss: admissible field, energies, chunked objective.

The trial field is ``u = P + D * F(x~)`` with ``x~ = (x - origin) / L``. The
network returns derivatives along x~; physical derivatives carry the extra
factor ``1 / L``. ``D`` and ``P`` are closed-form expressions of the problem
and are differentiated symbolically, so the essential conditions hold to
machine precision for every parameter vector.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import DualScalar, Tape
from .elasticity import Strain, stress

if TYPE_CHECKING:
    from .geometry import QuadratureRule
    from .problems import ProblemSpec

DEFAULT_CHUNK = 16384


class NumericalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Normalization:
    L: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"characteristic length must be positive, got {self.L}")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))

    def apply(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - np.asarray(self.origin)) / self.L

    def check(self, points, grid_range) -> None:
        xt = self.apply(points)
        lo, hi = grid_range
        slack = 1e-12 * (hi - lo)
        if xt.size and (xt.min() < lo - slack or xt.max() > hi + slack):
            raise ValueError(f"normalized coordinates span [{xt.min():.4g}, {xt.max():.4g}], outside grid range [{lo}, {hi}]")


@dataclass(frozen=True)
class LossReport:
    internal: tuple  # per-region internal energy, ordered by region id
    external: float
    total: float

    def row(self) -> list[float]:
        return [*self.internal, self.external, self.total]


class AdmissibleField:
    """Network output mapped to a displacement that satisfies the essential conditions."""

    def __init__(self, network, problem: "ProblemSpec"):
        self.network = network
        self.problem = problem
        self.norm = problem.normalization

    def boundary_factors(self, points):
        """(D, dD, P, dP) with values (N, 2) and Jacobians (2, N, 2) laid out [axis, n, component]."""
        pr = self.problem
        D = pr.distance.value(points)
        dD = np.transpose(pr.distance.jacobian(points), (2, 0, 1))
        if pr.extension.is_zero:
            P = dP = None
        else:
            P = pr.extension.value(points)
            dP = np.transpose(pr.extension.jacobian(points), (2, 0, 1))
        return D, dD, P, dP

    def displacement(self, points, params=None, factors=None) -> DualScalar:
        """u (N, 2) with physical gradient (2, N, 2); on the tape when ``params`` are tape leaves."""
        points = np.asarray(points, dtype=np.float64)
        F = self.network.forward(ad.lift_points(self.norm.apply(points)), params)
        D, dD, P, dP = self.boundary_factors(points) if factors is None else factors
        u = ad.mul(D, F.value)
        grad = ad.add(ad.mul(dD, F.value), ad.mul(D, ad.mul(F.tangent, 1.0 / self.norm.L)))
        if P is not None:
            u = ad.add(u, P)
            grad = ad.add(grad, dP)
        return DualScalar(u, grad)

    def evaluate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Plain arrays: u (N, 2) and gradient (2, N, 2)."""
        out = self.displacement(points)
        return np.asarray(ad._val(out.value)), np.asarray(ad._val(out.tangent))


def strain_of(grad) -> Strain:
    """Strain from a displacement gradient laid out [axis, n, component]."""
    g = lambda a, c: ad.getitem(grad, (a, slice(None), c))  # noqa: E731
    return Strain(g(0, 0), g(1, 1), ad.mul(0.5, ad.add(g(1, 0), g(0, 1))))


class _PointMaterial:
    """Per-point Lame constants, duck-typed for :func:`elasticity.stress`."""

    def __init__(self, lam_eff, mu):
        self.lam_eff = lam_eff
        self.mu = mu


def energy_density_field(problem: "ProblemSpec", region: np.ndarray, eps: Strain):
    ids = problem.region_ids
    lam = np.zeros(len(region))
    mu = np.zeros(len(region))
    for rid in ids:
        m = problem.material_of(rid)
        sel = region == rid
        lam[sel] = m.lam_eff
        mu[sel] = m.mu
    sig = stress(_PointMaterial(lam, mu), eps)
    return ad.mul(0.5, ad.add(ad.add(ad.mul(sig.xx, eps.xx), ad.mul(sig.yy, eps.yy)), ad.mul(2.0, ad.mul(sig.xy, eps.xy))))


def internal_energy(field: AdmissibleField, rule: "QuadratureRule", params=None) -> list:
    """Per-region energies (ordered by region id) of ``field`` under ``rule``."""
    problem = field.problem
    unknown = set(np.unique(rule.region)) - set(problem.region_ids)
    if unknown:
        raise ValueError(f"quadrature points in unknown regions {sorted(unknown)}")
    out = field.displacement(rule.points, params)
    psi = energy_density_field(problem, rule.region, strain_of(out.tangent))
    return [ad.vsum(ad.mul(psi, np.where(rule.region == rid, rule.weights, 0.0))) for rid in problem.region_ids]


def external_work(field: AdmissibleField, boundary: Sequence, params=None):
    """Sum of traction . u . weight over boundary rules ``[(points, weights, tractions), ...]``."""
    total = 0.0
    for pts, w, t in boundary:
        if len(pts) == 0:
            continue
        u = field.displacement(pts, params).value
        total = ad.add(total, ad.vsum(ad.mul(u, t * w[:, None])))
    return total


def total_loss(field: AdmissibleField, rule: "QuadratureRule", boundary: Sequence, params=None) -> tuple:
    """(LossReport, total) with ``total`` on the tape when ``params`` are tape leaves."""
    internal = internal_energy(field, rule, params)
    ext = external_work(field, boundary, params)
    total = ad.sub(_tree_sum(internal), ext)
    report = LossReport(tuple(float(ad._val(e)) for e in internal), float(ad._val(ext)), float(ad._val(total)))
    return report, total


def _tree_sum(items):
    items = list(items)
    if not items:
        return 0.0
    while len(items) > 1:
        nxt = [ad.add(items[k], items[k + 1]) for k in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def _tree_reduce(arrays):
    """Pairwise sum in a fixed order, independent of how the terms were computed."""
    items = list(arrays)
    while len(items) > 1:
        nxt = [items[k] + items[k + 1] for k in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def resolve_workers(workers: int | None) -> int:
    env = os.environ.get("PIKAN_WORKERS")
    if env:
        try:
            workers = int(env)
        except ValueError:
            raise ValueError(f"PIKAN_WORKERS must be an integer, got {env!r}") from None
    workers = 1 if workers is None else int(workers)
    if workers < 1:
        raise ValueError(f"worker count must be at least 1, got {workers}")
    return workers


@dataclass
class _Chunk:
    points: np.ndarray
    region: np.ndarray  # region id, 0 for boundary points
    weights: np.ndarray  # interior weight, 0 for boundary points
    load: np.ndarray  # (N, 2) traction * boundary weight, 0 for interior points
    factors: tuple
    masks: list  # per-region weight vectors


class Objective:
    """theta -> (total potential energy, gradient) with a per-region report.

    Interior and boundary points are cut into fixed-size chunks. Each chunk is
    evaluated on its own tape (in parallel when ``workers > 1``) and partial
    results are combined by a fixed-order pairwise reduction, so the result
    does not depend on the worker count.
    """

    def __init__(self, field: AdmissibleField, rule: "QuadratureRule", boundary: Sequence, chunk_size: int = DEFAULT_CHUNK, workers: int | None = 1):
        self.field = field
        self.problem = field.problem
        self.rule = rule
        self.workers = resolve_workers(workers)
        unknown = set(np.unique(rule.region)) - set(self.problem.region_ids)
        if unknown:
            raise ValueError(f"quadrature points in unknown regions {sorted(unknown)}")
        b_pts = [np.asarray(p) for p, _, _ in boundary]
        b_load = [np.asarray(t) * np.asarray(w)[:, None] for _, w, t in boundary]
        nb = sum(len(p) for p in b_pts)
        pts = np.concatenate([rule.points, *b_pts]) if nb else rule.points
        region = np.concatenate([rule.region, np.zeros(nb, dtype=int)])
        weights = np.concatenate([rule.weights, np.zeros(nb)])
        load = np.concatenate([np.zeros((len(rule), 2)), *b_load]) if nb else np.zeros((len(rule), 2))
        self.chunks = []
        for s in range(0, len(pts), chunk_size):
            sl = slice(s, s + chunk_size)
            p = pts[sl]
            masks = [np.where(region[sl] == rid, weights[sl], 0.0) for rid in self.problem.region_ids]
            self.chunks.append(_Chunk(p, region[sl], weights[sl], load[sl], field.boundary_factors(p), masks))
        self.n_evals = 0

    @property
    def n_params(self) -> int:
        return self.field.network.n_params

    def _chunk(self, theta, chunk: _Chunk):
        tape = Tape()
        params = self.field.network.register(tape, theta)
        out = self.field.displacement(chunk.points, params, chunk.factors)
        interior = chunk.region > 0
        energies = []
        if interior.any():
            psi = energy_density_field(self.problem, chunk.region, strain_of(out.tangent))
            energies = [ad.vsum(ad.mul(psi, m)) for m in chunk.masks]
        else:
            energies = [0.0 for _ in chunk.masks]
        work = ad.vsum(ad.mul(out.value, chunk.load)) if chunk.load.any() else 0.0
        total = ad.sub(_tree_sum(energies), work)
        vals = np.array([*(float(ad._val(e)) for e in energies), float(ad._val(work)), float(ad._val(total))])
        grad = tape.gradient(total) if isinstance(total, ad.Var) else np.zeros(self.n_params)
        return vals, grad

    def evaluate(self, theta) -> tuple[LossReport, np.ndarray]:
        theta = np.asarray(theta, dtype=np.float64)
        if self.workers > 1 and len(self.chunks) > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                parts = list(pool.map(lambda c: self._chunk(theta, c), self.chunks))
        else:
            parts = [self._chunk(theta, c) for c in self.chunks]
        vals = _tree_reduce([p[0] for p in parts])
        grad = _tree_reduce([p[1] for p in parts])
        self.n_evals += 1
        nr = len(self.problem.region_ids)
        internal = tuple(float(v) for v in vals[:nr])
        report = LossReport(internal, float(vals[nr]), float(_tree_reduce(list(internal)) - vals[nr]))
        if not (np.isfinite(report.total) and np.all(np.isfinite(grad))):
            raise NumericalError(f"non-finite loss or gradient (|theta| = {np.linalg.norm(theta):.6g})")
        return report, grad

    def __call__(self, theta) -> tuple[float, np.ndarray]:
        report, grad = self.evaluate(theta)
        return report.total, grad
