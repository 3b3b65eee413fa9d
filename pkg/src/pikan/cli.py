"""``pikan`` command line.

Exit codes: 0 success, 2 validation error (bad config, arguments or files),
3 numerical failure during training.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__, config, metrics, problems
from .dem import NumericalError

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def _grid(text: str) -> tuple[int, int]:
    try:
        nx, ny = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected nx,ny, got {text!r}") from None
    if nx < 1 or ny < 1:
        raise argparse.ArgumentTypeError("grid counts must be positive")
    return nx, ny


def _workers(args) -> int | None:
    env = os.environ.get("PIKAN_WORKERS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise config.ConfigError(f"PIKAN_WORKERS must be an integer, got {env!r}") from None
    return args.workers


def cmd_solve(args) -> int:
    from dataclasses import replace

    from .solver import solve

    cfg = config.load(args.config)
    if args.epochs is not None:
        cfg = replace(cfg, optimizer=replace(cfg.optimizer, epochs=args.epochs))
    workers = _workers(args)
    if workers is not None:
        if workers < 1:
            raise config.ConfigError(f"worker count must be at least 1, got {workers}")
        cfg = replace(cfg, workers=workers)
    out = Path(args.output or cfg.output)
    log = None if args.quiet else (lambda m: print(m, flush=True))
    res = solve(cfg, out, log=log)
    print(f"{res.optimize.status}: {res.optimize.steps} steps, {res.optimize.evaluations} evaluations, loss {res.optimize.losses[-1]:.10e}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .solver import FIELD_HEADER, field_rows, grid_points, load_model

    try:
        model, _, cfg = load_model(args.checkpoint)
    except OSError as e:
        raise config.ConfigError(f"cannot read checkpoint: {e.strerror}", str(args.checkpoint)) from None
    spec = cfg.problem_spec()
    if args.points:
        pts = _read_points(args.points)
    else:
        pts = grid_points(spec.domain, *args.grid)
    table = field_rows(model, spec, pts)
    rows = [[*map(float, r[:-1]), int(r[-1])] for r in table]
    if args.out:
        metrics.write_rows(args.out, FIELD_HEADER, rows)
        dropped = len(pts) - len(rows)
        print(f"wrote {len(rows)} rows to {args.out}" + (f" ({dropped} points outside the domain skipped)" if dropped else ""), file=sys.stderr)
    else:
        import csv

        w = csv.writer(sys.stdout)
        w.writerow(FIELD_HEADER)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return EXIT_OK


def _read_points(path) -> np.ndarray:
    import csv

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if "x" not in header or "y" not in header:
            raise metrics.MetricsError(f"{path}:1: needs x and y columns")
        ix, iy = header.index("x"), header.index("y")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out.append((float(row[ix]), float(row[iy])))
            except (ValueError, IndexError):
                raise metrics.MetricsError(f"{path}:{lineno}: malformed row") from None
    return np.array(out, dtype=float).reshape(-1, 2)


def cmd_compare(args) -> int:
    pred = metrics.read_field(args.field)
    ref = metrics.read_field(args.reference)
    report = metrics.compare(pred, ref)
    print(report.summary())
    if args.out:
        rows = report.rows()
        metrics.write_rows(args.out, rows[0], rows[1:])
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import format_table, table2

    workers = _workers(args) or 1
    rows = table2(args.epochs, args.mlp_epochs, args.density, args.seed, workers, args.out, log=None if args.quiet else (lambda m: print(m, flush=True)))
    print(format_table(rows))
    return EXIT_OK


def cmd_problems(args) -> int:
    if args.action == "list":
        for name in problems.names():
            spec = problems.builtin(name)
            print(f"{name:24s} regions={len(spec.region_ids)}  L={spec.normalization.L:g}  {spec.description}")
        return EXIT_OK
    if not args.name:
        raise config.ConfigError("problems show needs a problem name")
    print(yaml.safe_dump(problems.builtin_dict(args.name), sort_keys=False), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pikan", description="KAN Deep Energy Method solver for 2D multi-material elasticity.")
    p.add_argument("--version", action="version", version=f"pikan {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="train on a config file")
    s.add_argument("config")
    s.add_argument("--output", "-o", help="output directory (default: config 'output')")
    s.add_argument("--workers", type=int, default=None, help="loss-evaluation threads (PIKAN_WORKERS overrides)")
    s.add_argument("--epochs", type=int, default=None, help="override optimizer.epochs")
    s.add_argument("--quiet", "-q", action="store_true")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a grid or at given points")
    e.add_argument("checkpoint")
    e.add_argument("--grid", type=_grid, default=(101, 101), help="nx,ny over the domain bounding box")
    e.add_argument("--points", help="CSV with x,y columns to evaluate at instead of a grid")
    e.add_argument("--out", "-o", help="output CSV (default: stdout)")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("compare", help="error metrics of a field CSV against a reference CSV")
    c.add_argument("field")
    c.add_argument("reference")
    c.add_argument("--out", "-o", help="write the metrics table as CSV")
    c.set_defaults(func=cmd_compare)

    b = sub.add_parser("bench", help="benchmarks")
    b.add_argument("which", choices=["table2"])
    b.add_argument("--epochs", type=int, default=300, help="KAN outer steps (longer runs can exploit one-point quadrature)")
    b.add_argument("--mlp-epochs", type=int, default=None)
    b.add_argument("--density", type=float, default=0.05, help="mesh edge length")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--workers", type=int, default=None)
    b.add_argument("--out", "-o", default=None, help="directory for runs and table2.csv")
    b.add_argument("--quiet", "-q", action="store_true")
    b.set_defaults(func=cmd_bench)

    pr = sub.add_parser("problems", help="list or show builtin problems")
    pr.add_argument("action", choices=["list", "show"])
    pr.add_argument("name", nargs="?")
    pr.set_defaults(func=cmd_problems)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (config.ConfigError, problems.ProblemError, metrics.MetricsError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"error: {e.filename}: {e.strerror}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
