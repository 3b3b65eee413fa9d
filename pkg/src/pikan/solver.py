"""End-to-end training driver shared by the CLI, the bench and the sweep script.

A run produces three files in its output directory:

- ``checkpoint.pikan``: parameters plus the full run config,
- ``loss.csv``: ``step,psi_in_<id>...,psi_ex,total`` (CENN adds ``penalty``),
- ``manifest.json``: config echo, versions, seed, workers, timings, outcome.
"""

from __future__ import annotations

import hashlib
import json
import platform
import sys
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import baseline, geometry as geo, kan
from .config import RunConfig
from .dem import AdmissibleField, NumericalError, Objective, _PointMaterial
from .elasticity import Strain, stress, von_mises
from .metrics import u_mag
from .optimize import OptimizeResult, minimize

CHECKPOINT_NAME = "checkpoint.pikan"
LOSS_NAME = "loss.csv"
MANIFEST_NAME = "manifest.json"


def build_rule(spec, q) -> geo.QuadratureRule:
    if q.scheme in (geo.TRIANGLE_CENTROID, geo.DELAUNAY_AREA):
        return geo.mesh_rule(spec.domain, q.scheme, q.density)
    nx, ny = q.density
    return geo.tensor_rule(spec.domain, nx, ny, q.scheme, random=q.random, seed=q.seed)


def build_kan(cfg: RunConfig) -> kan.KanNetwork:
    n = cfg.network
    return kan.KanNetwork.create(list(n.shape), n.grid_size, n.order, n.grid_range, seed=cfg.seed, extrapolation=n.extrapolation, base_activation=n.activation)


class _Recorder:
    """Keeps the loss reports of recent evaluations so accepted points can be logged without re-evaluating."""

    def __init__(self, objective, keep: int = 64):
        self.objective = objective
        self.keep = keep
        self.reports: OrderedDict = OrderedDict()

    def __call__(self, theta):
        report, grad = self.objective.evaluate(theta)
        self.reports[np.asarray(theta).tobytes()] = (report, self.objective.n_evals)
        while len(self.reports) > self.keep:
            self.reports.popitem(last=False)
        return report.total, grad

    def report(self, theta):
        """(LossReport, evaluation count when it was computed) or None."""
        return self.reports.get(np.asarray(theta).tobytes())


def _row(report) -> list[float]:
    if isinstance(report, baseline.CennReport):
        return [*report.energy.internal, report.energy.external, report.penalty, report.total]
    return report.row()


@dataclass
class SolveResult:
    config: RunConfig
    model: object  # AdmissibleField or CennModel
    optimize: OptimizeResult
    rows: list = field(default_factory=list)
    header: list = field(default_factory=list)
    n_points: int = 0
    n_params: int = 0
    wall_time: float = 0.0
    setup_time: float = 0.0
    output: Path | None = None

    def evaluate(self, points):
        return self.model.evaluate(points)


def solve(cfg: RunConfig, out_dir=None, log=print, workers: int | None = None) -> SolveResult:
    """Train according to ``cfg``; write outputs to ``out_dir`` unless it is None."""
    t0 = time.perf_counter()
    spec = cfg.problem_spec()
    rule = build_rule(spec, cfg.quadrature)
    boundary = spec.boundary_rules(cfg.quadrature.boundary_scale)
    workers = cfg.workers if workers is None else workers
    if cfg.method == "pikan":
        net = build_kan(cfg)
        spec.normalization.check(rule.points, cfg.network.grid_range)
        model = AdmissibleField(net, spec)
        objective = Objective(model, rule, boundary, cfg.chunk_size, workers)
        theta0 = net.get_flat()
    elif cfg.method == "dem_mlp":
        net = baseline.Mlp.create(list(cfg.network.shape), cfg.seed)
        model = AdmissibleField(net, spec)
        objective = Objective(model, rule, boundary, cfg.chunk_size, workers)
        theta0 = net.get_flat()
    else:
        model = baseline.CennModel(spec, list(cfg.network.shape), cfg.seed)
        samples = baseline.interface_samples(spec, cfg.cenn.n_interface)
        objective = baseline.CennObjective(model, rule, boundary, samples, cfg.cenn.beta)
        theta0 = model.get_flat()

    ids = spec.region_ids
    header = ["step", *(f"psi_in_{r}" for r in ids), "psi_ex"] + (["penalty"] if cfg.method == "cenn" else []) + ["total"]
    recorder = _Recorder(objective)
    rows: list = []
    loss_fh = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        loss_fh = open(out / LOSS_NAME, "w")
        loss_fh.write(",".join(header) + "\n")
    setup = time.perf_counter() - t0
    t_train = time.perf_counter()

    def emit(step, theta):
        found = recorder.report(theta)
        if found is None:  # not expected, but never log a stale value
            recorder(theta)
            found = recorder.report(theta)
        rep, n_evals = found
        row = [step, *_row(rep)]
        rows.append(row)
        if loss_fh is not None:
            loss_fh.write(",".join([str(step)] + [repr(float(v)) for v in row[1:]]) + "\n")
            loss_fh.flush()
        if log is not None:
            log(f"step {step:5d}  loss {row[-1]: .10e}  evals {n_evals:6d}  {time.perf_counter() - t_train:8.1f} s")

    def callback(step, theta, f):
        if not rows:
            emit(0, theta0)
        emit(step, theta)

    try:
        result = minimize(recorder, theta0, cfg.optimizer, callback)
        if not rows:
            emit(0, theta0)
    finally:
        if loss_fh is not None:
            loss_fh.close()
    train_time = time.perf_counter() - t_train
    model_set_flat(model, result.theta)
    res = SolveResult(cfg, model, result, rows, header, len(rule), len(theta0), setup + train_time, setup)
    if out_dir is not None:
        res.output = Path(out_dir)
        save_model(res.output / CHECKPOINT_NAME, model, cfg.to_dict(), {"status": result.status, "steps": result.steps})
        write_manifest(res, train_time)
    return res


def model_set_flat(model, theta) -> None:
    if isinstance(model, baseline.CennModel):
        model.set_flat(theta)
    else:
        model.network.set_flat(theta)


def model_flat(model) -> np.ndarray:
    return model.get_flat() if isinstance(model, baseline.CennModel) else model.network.get_flat()


def write_manifest(res: SolveResult, train_time: float) -> None:
    import numba
    import scipy

    cfg = res.config
    loss_path = res.output / LOSS_NAME
    manifest = {
        "command": "solve",
        "config": cfg.to_dict(),
        "problem": cfg.problem_name,
        "method": cfg.method,
        "seed": cfg.seed,
        "workers": cfg.workers,
        "n_params": res.n_params,
        "n_points": res.n_points,
        "status": res.optimize.status,
        "steps": res.optimize.steps,
        "evaluations": res.optimize.evaluations,
        "restarts": res.optimize.restarts,
        "initial_loss": res.optimize.losses[0],
        "final_loss": res.optimize.losses[-1],
        "setup_seconds": round(res.setup_time, 3),
        "train_seconds": round(train_time, 3),
        "loss_sha256": hashlib.sha256(loss_path.read_bytes()).hexdigest(),
        "versions": {
            "pikan": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
        "argv": sys.argv,
    }
    (res.output / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n")


# ---------------------------------------------------------------------------
# checkpoints for every method


def save_model(path, model, config: dict | None = None, extra: dict | None = None) -> None:
    if isinstance(model, AdmissibleField) and isinstance(model.network, kan.KanNetwork):
        kan.save_checkpoint(path, model.network, config, extra)
        return
    theta = model_flat(model)
    payload = theta.astype("<f8").tobytes()
    if isinstance(model, baseline.CennModel):
        kind = "cenn"
        shape = next(iter(model.nets.values())).shape
    else:
        kind, shape = "mlp", model.network.shape
    header = {
        "kind": kind,
        "version": kan.CHECKPOINT_VERSION,
        "shape": shape,
        "n_params": int(theta.size),
        "sha256": hashlib.sha256(payload).hexdigest(),
        "config": config,
        "extra": extra or {},
    }
    kan._write_checkpoint(path, header, payload)


def load_model(path):
    """(model, header, RunConfig) rebuilt from a checkpoint with its embedded config."""
    from .config import from_dict

    header, theta = kan.read_checkpoint(path)
    if not header.get("config"):
        raise ValueError(f"{path}: checkpoint carries no run config")
    cfg = from_dict(header["config"])
    spec = cfg.problem_spec()
    kind = header.get("kind")
    if kind == "kan":
        net, _ = kan.load_checkpoint(path)
        if list(net.shape) != list(cfg.network.shape):
            raise ValueError(f"{path}: network shape {net.shape} does not match config {list(cfg.network.shape)}")
        model = AdmissibleField(net, spec)
    elif kind == "mlp":
        net = baseline.Mlp.create(header["shape"], seed=None)
        net.set_flat(theta)
        model = AdmissibleField(net, spec)
    elif kind == "cenn":
        model = baseline.CennModel(spec, header["shape"], cfg.seed)
        model.set_flat(theta)
    else:
        raise ValueError(f"{path}: unknown model kind {kind!r}")
    return model, header, cfg


# ---------------------------------------------------------------------------
# field export


FIELD_HEADER = ["x", "y", "ux", "uy", "sxx", "syy", "sxy", "vm", "u_mag", "region"]


def grid_points(domain: geo.Domain, nx: int, ny: int) -> np.ndarray:
    if nx < 1 or ny < 1:
        raise ValueError("grid needs at least one point per axis")
    x0, y0, x1, y1 = domain.bbox()
    xs = np.linspace(x0, x1, nx) if nx > 1 else np.array([0.5 * (x0 + x1)])
    ys = np.linspace(y0, y1, ny) if ny > 1 else np.array([0.5 * (y0 + y1)])
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])


def field_rows(model, spec, points) -> np.ndarray:
    """Columns of FIELD_HEADER at in-domain ``points`` (others are dropped)."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    region = spec.domain.region_of(points)
    keep = region > 0
    points, region = points[keep], region[keep]
    u, grad = model.evaluate(points)
    eps = Strain(grad[0, :, 0], grad[1, :, 1], 0.5 * (grad[1, :, 0] + grad[0, :, 1]))
    lam = np.zeros(len(points))
    mu = np.zeros(len(points))
    for rid in spec.region_ids:
        m = spec.material_of(rid)
        lam[region == rid] = m.lam_eff
        mu[region == rid] = m.mu
    sig = stress(_PointMaterial(lam, mu), eps)
    return np.column_stack([points, u, sig.xx, sig.yy, sig.xy, von_mises(sig), u_mag(u), region])


__all__ = ["solve", "SolveResult", "build_rule", "build_kan", "load_model", "save_model", "field_rows", "grid_points", "NumericalError"]
