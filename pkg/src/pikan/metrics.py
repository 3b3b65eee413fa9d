"""Error metrics against reference fields and CSV field I/O."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

POINT_TOL = 1e-9
FIELD_COLUMNS = ("x", "y", "ux", "uy", "sxx", "syy", "sxy", "vm", "u_mag", "region")


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class FieldSample:
    """Displacements (and optionally stresses) at a set of points."""

    points: np.ndarray  # (N, 2)
    u: np.ndarray  # (N, 2)
    stress: np.ndarray | None = None  # (N, 3) xx, yy, xy

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1, 2)
        u = np.asarray(self.u, dtype=float).reshape(-1, 2)
        if len(p) != len(u):
            raise MetricsError(f"{len(p)} points but {len(u)} displacement rows")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(u))):
            raise MetricsError("field contains non-finite values")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "u", u)
        if self.stress is not None:
            object.__setattr__(self, "stress", np.asarray(self.stress, dtype=float).reshape(-1, 3))

    def __len__(self) -> int:
        return len(self.points)


def _values(f):
    return f.u if isinstance(f, FieldSample) else np.asarray(f, dtype=float)


def check_points(pred: FieldSample, ref: FieldSample, tol: float = POINT_TOL) -> None:
    if len(pred) != len(ref):
        raise MetricsError(f"point sets differ in size ({len(pred)} vs {len(ref)})")
    dev = np.max(np.abs(pred.points - ref.points)) if len(pred) else 0.0
    if dev > tol:
        raise MetricsError(f"point sets do not match (max coordinate difference {dev:.3g})")


def align(pred: FieldSample, ref: FieldSample, tol: float = POINT_TOL) -> FieldSample:
    """Reorder ``pred`` onto the points of ``ref`` by nearest neighbour within ``tol``."""
    from scipy.spatial import cKDTree

    if len(pred) != len(ref):
        raise MetricsError(f"point sets differ in size ({len(pred)} vs {len(ref)})")
    dist, idx = cKDTree(pred.points).query(ref.points)
    if len(dist) and dist.max() > tol:
        raise MetricsError(f"point sets do not match (nearest-point distance up to {dist.max():.3g})")
    if len(np.unique(idx)) != len(idx):
        raise MetricsError("point sets do not match one-to-one")
    stress = None if pred.stress is None else pred.stress[idx]
    return FieldSample(pred.points[idx], pred.u[idx], stress)


def abs_error(pred, ref) -> np.ndarray:
    """Componentwise |pred - ref|; FieldSamples must share their points."""
    if isinstance(pred, FieldSample) and isinstance(ref, FieldSample):
        check_points(pred, ref)
    a, b = _values(pred), _values(ref)
    if a.shape != b.shape:
        raise MetricsError(f"shape mismatch {a.shape} vs {b.shape}")
    return np.abs(a - b)


@dataclass(frozen=True)
class RelativeError:
    percent: np.ndarray  # NaN where skipped
    skipped: int


def rel_error(pred, ref, scale: float | None = None) -> RelativeError:
    """|(pred - ref) / ref| * 100, skipping entries with |ref| < 1e-12 * scale."""
    diff = abs_error(pred, ref)
    r = np.abs(_values(ref))
    if scale is None:
        scale = float(r.max()) if r.size else 0.0
    keep = r >= 1e-12 * scale if scale > 0 else np.zeros(r.shape, bool)
    if not keep.any():
        raise MetricsError("reference is zero at every point")
    out = np.full(r.shape, np.nan)
    out[keep] = diff[keep] / r[keep] * 100.0
    return RelativeError(out, int((~keep).sum()))


def rel_l2(pred, ref) -> float:
    """sqrt(sum |u_pred - u_ref|^2 / sum |u_ref|^2) with the per-point vector norm."""
    a, b = _values(pred), _values(ref)
    if isinstance(pred, FieldSample) and isinstance(ref, FieldSample):
        check_points(pred, ref)
    if a.shape != b.shape or a.size == 0:
        raise MetricsError("rel_l2 needs two non-empty fields of the same shape")
    den = float(np.sum(b * b))
    if den == 0.0:
        raise MetricsError("reference field has zero norm")
    return float(np.sqrt(np.sum((a - b) ** 2) / den))


def u_mag(u) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(-1, 2)
    return np.hypot(u[:, 0], u[:, 1])


# ---------------------------------------------------------------------------
# CSV


def read_field(path) -> FieldSample:
    """Read ``x,y,ux,uy[,sxx,syy,sxy,...]``; extra columns are ignored."""
    try:
        fh = open(path, newline="")
    except OSError as e:
        raise MetricsError(f"{path}: cannot read field: {e.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MetricsError(f"{path}: empty file") from None
        missing = [c for c in ("x", "y", "ux", "uy") if c not in header]
        if missing:
            raise MetricsError(f"{path}:1: missing columns {missing}")
        cols = {c: header.index(c) for c in header}
        has_stress = all(c in cols for c in ("sxx", "syy", "sxy"))
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(row[cols[c]]) for c in ("x", "y", "ux", "uy")] + ([float(row[cols[c]]) for c in ("sxx", "syy", "sxy")] if has_stress else []))
            except (ValueError, IndexError):
                raise MetricsError(f"{path}:{lineno}: malformed row") from None
    data = np.array(rows, dtype=float).reshape(len(rows), -1)
    if not len(data):
        raise MetricsError(f"{path}: no data rows")
    return FieldSample(data[:, :2], data[:, 2:4], data[:, 4:7] if has_stress else None)


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


@dataclass(frozen=True)
class Comparison:
    n_points: int
    abs_max: tuple  # per component
    abs_mean: tuple
    rel_max: tuple  # percent, NaN if a component was entirely skipped
    rel_mean: tuple
    rel_l2: tuple  # ux, uy, vector
    skipped: tuple

    def rows(self):
        out = [("metric", "ux", "uy", "vector")]
        out.append(("abs_max", *self.abs_max, ""))
        out.append(("abs_mean", *self.abs_mean, ""))
        out.append(("rel_max_percent", *self.rel_max, ""))
        out.append(("rel_mean_percent", *self.rel_mean, ""))
        out.append(("rel_l2", *self.rel_l2))
        out.append(("rel_skipped", *self.skipped, ""))
        return out

    def summary(self) -> str:
        lines = [f"points: {self.n_points}"]
        for label, vals in (("abs max", self.abs_max), ("abs mean", self.abs_mean), ("rel max %", self.rel_max), ("rel mean %", self.rel_mean)):
            lines.append(f"{label:>10}: ux {vals[0]:.6g}  uy {vals[1]:.6g}")
        lines.append(f"{'rel L2':>10}: ux {self.rel_l2[0]:.6g}  uy {self.rel_l2[1]:.6g}  |u| {self.rel_l2[2]:.6g}")
        return "\n".join(lines)


def _component_l2(a, b):
    den = float(np.sum(b * b))
    if den == 0.0:
        return 0.0 if float(np.sum(a * a)) == 0.0 else float("inf")
    return float(np.sqrt(np.sum((a - b) ** 2) / den))


def compare(pred: FieldSample, ref: FieldSample) -> Comparison:
    pred = align(pred, ref)
    d = abs_error(pred, ref)
    r = np.abs(ref.u)
    scale = float(r.max()) if r.size else 0.0
    rel_max, rel_mean, skipped = [], [], []
    for c in range(2):
        keep = r[:, c] >= 1e-12 * scale if scale > 0 else np.zeros(len(r), bool)
        skipped.append(int((~keep).sum()))
        if keep.any():
            rc = d[keep, c] / r[keep, c] * 100.0
            rel_max.append(float(rc.max()))
            rel_mean.append(float(rc.mean()))
        else:
            rel_max.append(float("nan"))
            rel_mean.append(float("nan"))
    total = rel_l2(pred, ref) if np.any(ref.u) else (0.0 if not np.any(pred.u) else float("inf"))
    return Comparison(
        len(ref),
        tuple(float(v) for v in d.max(axis=0)),
        tuple(float(v) for v in d.mean(axis=0)),
        tuple(rel_max),
        tuple(rel_mean),
        (_component_l2(pred.u[:, 0], ref.u[:, 0]), _component_l2(pred.u[:, 1], ref.u[:, 1]), total),
        tuple(skipped),
    )
