"""KAN hyperparameter sweep on the straight-interface cantilever.

Two families: grid size with order fixed at 3, and order with grid size fixed
at 10, each for three network depths. With ``--reference`` (a CSV with
x, y, ux, uy columns, e.g. an exported FEM field) the relative L2 error of u_y
is reported; otherwise the final energy and tip deflection are.

    python scripts/sweep.py --epochs 200 --out sweep.csv [--reference fem.csv]
"""

import argparse
import time

import numpy as np

from pikan import metrics, solver
from pikan.config import from_dict

SHAPES = ([2, 5, 5, 2], [2, 5, 5, 5, 2], [2, 5, 5, 5, 5, 2])
GRID_SIZES = (5, 10, 15, 20, 25)
ORDERS = (1, 2, 3, 4, 5)
HEADER = ["family", "shape", "grid_size", "order", "n_params", "final_loss", "tip_uy", "rel_l2_uy", "seconds"]


def configs():
    for shape in SHAPES:
        for G in GRID_SIZES:
            yield "grid_size", shape, G, 3
        for k in ORDERS:
            yield "order", shape, 10, k


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--density", type=float, default=0.05, help="mesh edge length")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--reference")
    ap.add_argument("--out", default="sweep.csv")
    args = ap.parse_args(argv)

    ref = metrics.read_field(args.reference) if args.reference else None
    rows = []
    for family, shape, G, k in configs():
        cfg = from_dict({
            "problem": "cantilever_straight",
            "network": {"shape": shape, "grid_size": G, "order": k, "grid_range": [0.0, 1.0]},
            "quadrature": {"scheme": "TriangleCentroid", "density": args.density},
            "optimizer": {"epochs": args.epochs},
            "seed": args.seed,
        })
        t0 = time.perf_counter()
        res = solver.solve(cfg, log=None)
        tip = float(res.evaluate(np.array([[8.0, 1.0]]))[0][0, 1])
        err = ""
        if ref is not None:
            u = res.evaluate(ref.points)[0]
            err = float(np.linalg.norm(u[:, 1] - ref.u[:, 1]) / np.linalg.norm(ref.u[:, 1]))
        rows.append([family, "-".join(map(str, shape)), G, k, res.n_params, res.optimize.losses[-1], tip, err, round(time.perf_counter() - t0, 1)])
        print(*rows[-1], flush=True)
    metrics.write_rows(args.out, HEADER, rows)


if __name__ == "__main__":
    main()
