"""Analytical cantilever comparison: KAN vs MLP under the same energy loss."""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from . import problems
from .baseline import mlp_param_count
from .config import from_dict
from .kan import param_count
from .metrics import write_rows
from .solver import solve

HEADER = ["method", "n_params", "ux_A", "ux_B", "ux_C", "rel_A_percent", "rel_B_percent", "rel_C_percent", "steps", "seconds"]
KAN_SHAPE = [2, 5, 5, 5, 2]
MLP_SHAPE = [2, 30, 30, 30, 30, 2]


def _config(method, shape, epochs, density, seed, workers, extra=None):
    d = {
        "problem": "cantilever_homogeneous",
        "method": method,
        "network": {"shape": shape, **(extra or {})},
        "quadrature": {"scheme": "TriangleCentroid", "density": density},
        "optimizer": {"epochs": epochs},
        "seed": seed,
        "workers": workers,
    }
    return from_dict(d)


def table2(epochs: int = 300, mlp_epochs: int | None = None, density: float = 0.05, seed: int = 0, workers: int = 1, out_dir=None, log=print) -> list[list]:
    """Rows of the comparison table; also written to ``out_dir/table2.csv``."""
    beam = problems.AnalyticalBeam()
    pts = np.array(list(problems.BEAM_POINTS.values()))
    ref = np.abs(problems.analytic_ux(beam, pts[:, 0], pts[:, 1]))
    rows = [["analytical", "", *(float(v) for v in ref), 0.0, 0.0, 0.0, "", ""]]
    runs = [
        ("pikan", _config("pikan", KAN_SHAPE, epochs, density, seed, workers, {"grid_size": 20, "order": 3, "grid_range": [0.0, 1.0]})),
        ("dem_mlp", _config("dem_mlp", MLP_SHAPE, mlp_epochs if mlp_epochs is not None else epochs, density, seed, workers)),
    ]
    for name, cfg in runs:
        if log:
            log(f"== {name}: {cfg.optimizer.epochs} steps")
        t0 = time.perf_counter()
        sub = None if out_dir is None else Path(out_dir) / name
        res = solve(cfg, sub, log=_every(log, 100))
        secs = time.perf_counter() - t0
        u = np.abs(res.evaluate(pts)[0][:, 0])
        rel = np.abs(u - ref) / ref * 100.0
        rows.append([name, res.n_params, *(float(v) for v in u), *(float(v) for v in rel), res.optimize.steps, round(secs, 2)])
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        write_rows(Path(out_dir) / "table2.csv", HEADER, rows)
    return rows


def _every(log, n):
    if log is None:
        return None
    count = [0]

    def inner(msg):
        if count[0] % n == 0:
            log(msg)
        count[0] += 1

    return inner


def format_table(rows) -> str:
    def cell(v):
        if isinstance(v, float):
            return f"{v:.5g}"
        return str(v)

    table = [HEADER] + [[cell(v) for v in r] for r in rows]
    widths = [max(len(r[k]) for r in table) for k in range(len(HEADER))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in table)


def expected_counts() -> dict:
    return {"pikan": param_count(KAN_SHAPE, 20, 3), "dem_mlp": mlp_param_count(MLP_SHAPE)}
