"""MLP comparators: a plain MLP under the same energy loss, and CENN.

CENN gives every material region its own MLP and glues them with a penalty
on the displacement jump at interface points,
``beta * sum |u+ - u-|^2`` with ``beta = -lam * ln(tanh(N_inter / N_dom))``.
Both reuse :class:`dem.AdmissibleField`, so only the approximator and the
penalty differ from the KAN solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import dem
from .autodiff import DualScalar, Tape
from .dem import AdmissibleField, LossReport, Objective
from .optimize import LbfgsConfig, OptimizeResult, minimize

PENALTY_LAMBDA = 1000.0


@dataclass
class Mlp:
    """Fully connected tanh network with a linear output layer."""

    shape: list[int]
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if len(self.shape) < 2 or any(int(s) < 1 for s in self.shape):
            raise ValueError(f"invalid network shape {self.shape}")
        self.shape = [int(s) for s in self.shape]
        if not self.weights:
            self.weights = [np.zeros((b, a)) for a, b in zip(self.shape[:-1], self.shape[1:])]
            self.biases = [np.zeros(b) for b in self.shape[1:]]

    @classmethod
    def create(cls, shape, seed: int | None = 0, zero_last: bool = False) -> "Mlp":
        net = cls(list(shape))
        if seed is not None:
            net.init(seed, zero_last)
        return net

    def init(self, seed: int, zero_last: bool = False) -> "Mlp":
        """Xavier-normal weights, zero biases; ``zero_last`` starts from the zero field."""
        rng = np.random.default_rng(seed)
        for k, w in enumerate(self.weights):
            n_out, n_in = w.shape
            self.weights[k] = rng.normal(0.0, math.sqrt(2.0 / (n_in + n_out)), size=w.shape)
            self.biases[k] = np.zeros(n_out)
        if zero_last:
            self.weights[-1][:] = 0.0
        return self

    @property
    def n_params(self) -> int:
        return mlp_param_count(self.shape)

    def arrays(self) -> list[np.ndarray]:
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    def get_flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def unflatten(self, theta) -> list[tuple[np.ndarray, np.ndarray]]:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {theta.shape}")
        out, pos = [], 0
        for w, b in zip(self.weights, self.biases):
            wv = theta[pos : pos + w.size].reshape(w.shape)
            pos += w.size
            bv = theta[pos : pos + b.size]
            pos += b.size
            out.append((wv, bv))
        return out

    def set_flat(self, theta) -> None:
        for k, (w, b) in enumerate(self.unflatten(theta)):
            self.weights[k], self.biases[k] = w.copy(), b.copy()

    def register(self, tape: Tape, theta=None):
        pairs = list(zip(self.weights, self.biases)) if theta is None else self.unflatten(theta)
        return [(tape.param(w), tape.param(b)) for w, b in pairs]

    def forward(self, x: DualScalar, params=None, dense: bool = False) -> DualScalar:
        """Points-first duals: value (N, n_in), tangent (2, N, n_in)."""
        if params is None:
            params = list(zip(self.weights, self.biases))
        last = len(params) - 1
        for l, (w, b) in enumerate(params):
            wt = ad.transpose(w)
            x = DualScalar(ad.add(ad.matmul(x.value, wt), b), ad.matmul(x.tangent, wt))
            if l < last:
                x = ad.dual_tanh(x)
        return x

    def __call__(self, xy) -> np.ndarray:
        xy = np.atleast_2d(np.asarray(xy, dtype=np.float64))
        return np.asarray(self.forward(DualScalar(xy, np.zeros((2,) + xy.shape))).value)


def mlp_param_count(shape) -> int:
    return sum((a + 1) * b for a, b in zip(shape[:-1], shape[1:]))


def penalty_beta(ratio: float, lam: float = PENALTY_LAMBDA) -> float:
    """Interface penalty weight from the ratio N_inter / N_dom."""
    if not ratio > 0:
        raise ValueError(f"interface/domain ratio must be positive, got {ratio}")
    return -lam * math.log(math.tanh(ratio))


def mlp_dem_solve(problem, shape, rule, boundary, config: LbfgsConfig = LbfgsConfig(), seed: int = 0, workers: int | None = 1, callback=None):
    """Train a single MLP under the energy loss; returns (field, OptimizeResult)."""
    net = Mlp.create(shape, seed)
    if net.shape[0] != 2 or net.shape[-1] != 2:
        raise ValueError("network must map 2 inputs to 2 outputs")
    fld = AdmissibleField(net, problem)
    objective = Objective(fld, rule, boundary, workers=workers)
    result = minimize(objective, net.get_flat(), config, callback)
    net.set_flat(result.theta)
    return fld, result


# ---------------------------------------------------------------------------
# CENN


@dataclass(frozen=True)
class InterfaceSamples:
    points: np.ndarray  # (M, 2)
    plus: np.ndarray  # region id on the side the normal points to
    minus: np.ndarray


def interface_samples(problem, n_per_curve: int, offset: float | None = None) -> InterfaceSamples:
    """Uniform samples on every interface curve with the region on each side."""
    domain = problem.domain
    if not domain.interfaces:
        return InterfaceSamples(np.zeros((0, 2)), np.zeros(0, int), np.zeros(0, int))
    eps = offset if offset is not None else 1e-6 * problem.normalization.L
    pts, plus, minus = [], [], []
    for curve in domain.interfaces:
        t = (np.arange(n_per_curve) + 0.5) / n_per_curve
        p = curve.point(t)
        tan = curve.tangent(t)
        nrm = np.stack([-tan[:, 1], tan[:, 0]], axis=1)
        nrm /= np.linalg.norm(nrm, axis=1)[:, None]
        pts.append(p)
        plus.append(domain.region_of(p + eps * nrm))
        minus.append(domain.region_of(p - eps * nrm))
    s = InterfaceSamples(np.concatenate(pts), np.concatenate(plus), np.concatenate(minus))
    keep = (s.plus > 0) & (s.minus > 0) & (s.plus != s.minus)
    return InterfaceSamples(s.points[keep], s.plus[keep], s.minus[keep])


@dataclass(frozen=True)
class CennReport:
    energy: LossReport
    penalty: float
    total: float


class CennModel:
    """One MLP per region sharing the problem's admissible-field construction."""

    def __init__(self, problem, shape, seed: int = 0):
        self.problem = problem
        self.region_ids = list(problem.region_ids)
        self.nets = {rid: Mlp.create(shape, seed + k) for k, rid in enumerate(self.region_ids)}
        self.fields = {rid: AdmissibleField(net, problem) for rid, net in self.nets.items()}
        self._sizes = [self.nets[r].n_params for r in self.region_ids]

    @property
    def n_params(self) -> int:
        return sum(self._sizes)

    def get_flat(self) -> np.ndarray:
        return np.concatenate([self.nets[r].get_flat() for r in self.region_ids])

    def split(self, theta) -> dict:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {theta.shape}")
        out, pos = {}, 0
        for rid, n in zip(self.region_ids, self._sizes):
            out[rid] = theta[pos : pos + n]
            pos += n
        return out

    def set_flat(self, theta) -> None:
        for rid, part in self.split(theta).items():
            self.nets[rid].set_flat(part)

    def displacement(self, points, region_id: int, theta=None) -> np.ndarray:
        if region_id not in self.fields:
            raise ValueError(f"region {region_id} has no subnetwork")
        if theta is not None:
            self.set_flat(theta)
        return self.fields[region_id].evaluate(points)[0]

    def evaluate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Field at arbitrary points, each taken from the network of its region."""
        points = np.asarray(points, dtype=np.float64)
        region = self.problem.domain.region_of(points)
        u = np.zeros((len(points), 2))
        grad = np.zeros((2, len(points), 2))
        for rid in self.region_ids:
            sel = region == rid
            if sel.any():
                u[sel], grad[:, sel] = self.fields[rid].evaluate(points[sel])
        return u, grad

    def mismatch(self, samples: InterfaceSamples, theta=None) -> np.ndarray:
        """|u+ - u-| at each interface sample."""
        if theta is not None:
            self.set_flat(theta)
        jump = np.zeros((len(samples.points), 2))
        for rid in self.region_ids:
            p, m = samples.plus == rid, samples.minus == rid
            if p.any():
                jump[p] += self.fields[rid].evaluate(samples.points[p])[0]
            if m.any():
                jump[m] -= self.fields[rid].evaluate(samples.points[m])[0]
        return np.linalg.norm(jump, axis=1)


class CennObjective:
    """Energy of every region under its own network plus the interface penalty."""

    def __init__(self, model: CennModel, rule, boundary, samples: InterfaceSamples, beta: float | None = None):
        self.model = model
        self.problem = model.problem
        self.rule = rule
        self.samples = samples
        unknown = set(np.unique(rule.region)) - set(model.region_ids)
        if unknown:
            raise ValueError(f"quadrature points in regions without a subnetwork: {sorted(unknown)}")
        if beta is None:
            beta = penalty_beta(len(samples.points) / max(len(rule), 1)) if len(samples.points) else 0.0
        self.beta = float(beta)
        pts = [np.asarray(p) for p, _, _ in boundary]
        loads = [np.asarray(t) * np.asarray(w)[:, None] for _, w, t in boundary]
        self.b_points = np.concatenate(pts) if pts else np.zeros((0, 2))
        self.b_load = np.concatenate(loads) if loads else np.zeros((0, 2))
        # boundary points on an interface end go to the lowest region id, like everything else
        self.b_region = self.problem.domain.region_of(self.b_points)
        self.n_evals = 0
        self.last: CennReport | None = None

    @property
    def n_params(self) -> int:
        return self.model.n_params

    def evaluate(self, theta) -> tuple[CennReport, np.ndarray]:
        model = self.model
        tape = Tape()
        parts = model.split(theta)
        # register in flat order so the tape gradient lines up with theta
        params = {rid: model.nets[rid].register(tape, parts[rid]) for rid in model.region_ids}
        rule = self.rule
        energies, work = [], 0.0
        jump = np.zeros((len(self.samples.points), 2))
        jump_terms = []
        for rid in model.region_ids:
            fld = model.fields[rid]
            sel = rule.region == rid
            out = fld.displacement(rule.points[sel], params[rid])
            psi = dem.energy_density_field(self.problem, rule.region[sel], dem.strain_of(out.tangent))
            energies.append(ad.vsum(ad.mul(psi, rule.weights[sel])))
            b = self.b_region == rid
            if b.any():
                ub = fld.displacement(self.b_points[b], params[rid]).value
                work = ad.add(work, ad.vsum(ad.mul(ub, self.b_load[b])))
            for side, sign in ((self.samples.plus, 1.0), (self.samples.minus, -1.0)):
                s = side == rid
                if s.any():
                    ui = fld.displacement(self.samples.points[s], params[rid]).value
                    full = np.zeros((len(self.samples.points), int(s.sum())))
                    full[np.flatnonzero(s), np.arange(int(s.sum()))] = sign
                    jump_terms.append(ad.matmul(full, ui))
        penalty = 0.0
        if jump_terms:
            jump = dem._tree_sum(jump_terms)
            penalty = ad.mul(self.beta, ad.vsum(ad.mul(jump, jump)))
        internal = dem._tree_sum(energies)
        total = ad.add(ad.sub(internal, work), penalty)
        e_vals = tuple(float(ad._val(e)) for e in energies)
        ext = float(ad._val(work))
        energy = LossReport(e_vals, ext, float(sum(e_vals) - ext))
        report = CennReport(energy, float(ad._val(penalty)), float(ad._val(total)))
        grad = tape.gradient(total) if isinstance(total, ad.Var) else np.zeros(self.n_params)
        if not (math.isfinite(report.total) and np.all(np.isfinite(grad))):
            raise dem.NumericalError(f"non-finite CENN loss (|theta| = {np.linalg.norm(theta):.6g})")
        self.n_evals += 1
        self.last = report
        return report, grad

    def __call__(self, theta) -> tuple[float, np.ndarray]:
        report, grad = self.evaluate(theta)
        return report.total, grad


def cenn_solve(problem, shape, rule, boundary, config: LbfgsConfig = LbfgsConfig(), beta: float | None = None, n_interface: int = 50, seed: int = 0, callback=None) -> tuple[CennModel, CennObjective, OptimizeResult]:
    model = CennModel(problem, shape, seed)
    samples = interface_samples(problem, n_interface)
    objective = CennObjective(model, rule, boundary, samples, beta)
    result = minimize(objective, model.get_flat(), config, callback)
    model.set_flat(result.theta)
    return model, objective, result
