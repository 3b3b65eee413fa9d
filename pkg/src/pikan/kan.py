"""Kolmogorov-Arnold network with B-spline edge functions.

Each edge (j <- i) of a layer computes ``m[j,i] * sum_p c[j,i,p] B_p(x_i) +
w[j,i] * silu(x_i)``; a node sums its incoming edges. Hidden layer outputs are
squashed with tanh, the last layer is left unclamped.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from . import _spline_kernels as kern
from . import autodiff as ad
from .autodiff import DualScalar, Tape, Var

CHECKPOINT_MAGIC = b"PIKANCKPT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class BSplineGrid:
    """Uniform knots on [a, b] with ``order`` extra knots on each side."""

    grid_size: int
    order: int
    range: tuple[float, float] = (0.0, 1.0)
    extrapolation: str = "zero"

    def __post_init__(self):
        if self.grid_size < 1 or self.order < 0:
            raise ValueError("grid_size must be >= 1 and order >= 0")
        a, b = self.range
        if not b > a:
            raise ValueError(f"empty grid range {self.range}")
        if self.extrapolation not in ("zero", "polynomial"):
            raise ValueError(f"unknown extrapolation {self.extrapolation!r}")
        object.__setattr__(self, "range", (float(a), float(b)))

    @property
    def spacing(self) -> float:
        a, b = self.range
        return (b - a) / self.grid_size

    @property
    def n_basis(self) -> int:
        return self.grid_size + self.order

    @property
    def knots(self) -> np.ndarray:
        k, h = self.order, self.spacing
        return self.range[0] + h * np.arange(-k, self.grid_size + k + 1)

    def greville(self) -> np.ndarray:
        """Greville abscissae, one per basis function."""
        t, k = self.knots, self.order
        if k == 0:
            return 0.5 * (t[:-1] + t[1:])[: self.n_basis]
        return np.array([t[p + 1 : p + k + 1].mean() for p in range(self.n_basis)])


def _locate(grid: BSplineGrid, x: np.ndarray):
    """Knot span index, offset inside the span (in units of h) and support mask."""
    n_spans = grid.grid_size + 2 * grid.order
    pos = (x - grid.knots[0]) / grid.spacing
    span = np.floor(pos).astype(np.int64)
    if grid.extrapolation == "polynomial":
        valid = np.ones(x.shape, dtype=bool)
    else:
        valid = (pos >= 0.0) & (pos <= n_spans)
    span = np.clip(span, 0, n_spans - 1)
    return span, pos - span, valid


def _local_values(u: np.ndarray, degree: int) -> list[np.ndarray]:
    """Cox-de Boor on one uniform span; entry r belongs to B_{span - degree + r}."""
    vals = [np.ones_like(u)]
    for j in range(1, degree + 1):
        saved = 0.0
        new = []
        for r in range(j):
            temp = vals[r] / j
            new.append(saved + (r + 1 - u) * temp)
            saved = (u + (j - r - 1)) * temp
        new.append(saved)
        vals = new
    return vals


def _local_derivative(u: np.ndarray, order: int, deriv: int, h: float) -> list[np.ndarray]:
    """The ``order + 1`` nonzero values of the ``deriv``-th derivative on one span.

    Uses ``B^(r)_{p,k} = h^-r sum_i (-1)^i C(r,i) B_{p+i,k-r}`` with all B's local
    to the span; entry j belongs to B_{span - order + j}.
    """
    low = _local_values(u, order - deriv)
    scale = h ** (-deriv)
    out = []
    for j in range(order + 1):
        acc = np.zeros_like(u)
        for i in range(deriv + 1):
            q = j + i - deriv
            if 0 <= q <= order - deriv:
                acc = acc + (-1) ** i * comb(deriv, i) * low[q]
        out.append(acc * scale)
    return out


class _SpanIndex:
    """Scatter/gather bookkeeping for one array of evaluation points."""

    def __init__(self, grid: BSplineGrid, x: np.ndarray):
        k, nb = grid.order, grid.n_basis
        self.grid = grid
        x = np.asarray(x, dtype=np.float64)
        self.shape = x.shape + (nb,)
        self.size = int(np.prod(self.shape))
        xf = x.ravel()
        span, self.u, valid = _locate(grid, xf)
        m = np.arange(xf.size)
        self.flat = []
        self.ok = []
        for j in range(k + 1):
            p = span - k + j
            self.flat.append(m * nb + np.clip(p, 0, nb - 1))
            self.ok.append(((p >= 0) & (p < nb) & valid).astype(np.float64))

    def local(self, deriv: int) -> list[np.ndarray]:
        g = self.grid
        if deriv > g.order:
            return [np.zeros_like(self.u)] * (g.order + 1)
        vals = _local_derivative(self.u, g.order, deriv, g.spacing)
        return [v * ok for v, ok in zip(vals, self.ok)]

    def dense(self, deriv: int) -> np.ndarray:
        if self.u.size == 0:
            return np.zeros(self.shape)
        # out-of-range entries carry zero weight, so summing duplicates is safe
        out = np.bincount(
            np.concatenate(self.flat), weights=np.concatenate(self.local(deriv)), minlength=self.size
        )
        return out.reshape(self.shape)

    def contract(self, g: np.ndarray, deriv: int) -> np.ndarray:
        """Sum over the basis axis of ``g * basis^(deriv)``, shaped like the input."""
        gf = np.ascontiguousarray(g).ravel()
        acc = np.zeros_like(self.u)
        for flat, vals in zip(self.flat, self.local(deriv)):
            acc += gf[flat] * vals
        return acc


def bspline_basis(grid: BSplineGrid, x, deriv: int = 0) -> np.ndarray:
    """Value (``deriv=0``) or derivative of the ``G + k`` basis functions.

    Output shape is ``x.shape + (G + k,)``. Inside the extended knot range this
    is plain Cox-de Boor; outside it the basis is zero unless the grid asks for
    polynomial extrapolation of the end spans.
    """
    return _SpanIndex(grid, x).dense(deriv)


def basis_var(grid: BSplineGrid, x, deriv: int = 0):
    """Basis (or derivative) of a tape value; the reverse rule uses ``deriv + 1``."""
    if not isinstance(x, Var):
        return bspline_basis(grid, x, deriv)
    xv = x.value
    idx = _SpanIndex(grid, xv)
    return ad.custom(x, idx.dense(deriv), lambda g: idx.contract(g, deriv + 1).reshape(xv.shape))


def spline_op(grid: BSplineGrid, x, coef):
    """Sparse spline contraction as a single tape op.

    For points-first input ``x`` (N, n_in) and coefficients (n_out, n_in, G+k)
    returns (N, 1 + n_in, n_out): row 0 holds the summed edge splines, row
    1 + i the derivative of each edge spline w.r.t. input i.
    """
    xv = np.ascontiguousarray(ad._val(x), dtype=np.float64)
    cv = np.ascontiguousarray(ad._val(coef), dtype=np.float64)
    args = (
        grid.knots[0],
        grid.spacing,
        grid.order,
        grid.grid_size + 2 * grid.order,
        grid.extrapolation == "polynomial",
    )
    out = kern.spline_fused(xv, cv, *args)
    tape = ad._tape_of(x, coef)
    if tape is None:
        return out
    parents = [v for v in (x, coef) if isinstance(v, Var)]

    def vjp(g):
        gx, gc = kern.spline_fused_vjp(xv, cv, np.ascontiguousarray(g), *args)
        return [gx if v is x else gc for v in parents]

    return tape.record(out, parents, vjp)


def _packed_op(parents_in, out, vjp_all):
    tape = ad._tape_of(*parents_in)
    if tape is None:
        return out
    parents = [v for v in parents_in if isinstance(v, Var)]

    def vjp(g):
        grads = vjp_all(np.ascontiguousarray(g))
        return [grads[k] for k, v in enumerate(parents_in) if isinstance(v, Var)]

    return tape.record(out, parents, vjp)


_ACT_KIND = {"silu": 0, "tanh": 1}


def combine_op(x, fused, w, activation: str = "silu"):
    """Add the weighted base activation to a packed spline output (see spline_op)."""
    xv = np.ascontiguousarray(ad._val(x), dtype=np.float64)
    wv = np.ascontiguousarray(ad._val(w), dtype=np.float64)
    kind = _ACT_KIND[activation]
    out = kern.layer_combine(xv, np.ascontiguousarray(ad._val(fused)), wv, kind)

    def vjp_all(g):
        gx, gw = kern.layer_combine_vjp(xv, wv, kind, g)
        return gx, g, gw

    return _packed_op((x, fused, w), out, vjp_all)


def tangent_op(t, packed):
    """Push tangents (2, N, n_in) through the slope rows of a packed layer output."""
    tv = np.ascontiguousarray(ad._val(t), dtype=np.float64)
    sv = np.ascontiguousarray(ad._val(packed), dtype=np.float64)
    out = kern.tangent_contract(tv, sv)
    return _packed_op((t, packed), out, lambda g: kern.tangent_contract_vjp(tv, sv, g))


def _activation(name: str, v):
    if name == "tanh":
        th = ad.tanh(v)
        return th, ad.sub(1.0, ad.mul(th, th))
    return ad.silu(v), ad.silu_prime(v)


@dataclass
class KanLayer:
    n_in: int
    n_out: int
    grid: BSplineGrid
    coeffs: np.ndarray = None  # (n_out, n_in, G + k)
    scales: np.ndarray = None  # (n_out, n_in)
    base_weights: np.ndarray = None  # (n_out, n_in)

    def __post_init__(self):
        nb = self.grid.n_basis
        if self.coeffs is None:
            self.coeffs = np.zeros((self.n_out, self.n_in, nb))
        if self.scales is None:
            self.scales = np.ones((self.n_out, self.n_in))
        if self.base_weights is None:
            self.base_weights = np.zeros((self.n_out, self.n_in))
        if self.coeffs.shape != (self.n_out, self.n_in, nb):
            raise ValueError(f"coeffs shape {self.coeffs.shape} does not match layer")

    @property
    def n_params(self) -> int:
        return self.n_in * self.n_out * (self.grid.n_basis + 2)

    def arrays(self) -> list[np.ndarray]:
        return [self.coeffs, self.scales, self.base_weights]

    def edge_eval(self, j: int, i: int, x: DualScalar, params=None, activation: str = "silu") -> DualScalar:
        """Edge function phi_{j,i} applied elementwise to a dual input of any shape."""
        c, m, w = params if params is not None else self.arrays()
        B = basis_var(self.grid, x.value, 0)
        dB = basis_var(self.grid, x.value, 1)
        spline = ad.vsum(ad.mul(B, c[j, i]), axis=-1)
        dspline = ad.vsum(ad.mul(dB, c[j, i]), axis=-1)
        act, dact = _activation(activation, x.value)
        value = ad.add(ad.mul(m[j, i], spline), ad.mul(w[j, i], act))
        slope = ad.add(ad.mul(m[j, i], dspline), ad.mul(w[j, i], dact))
        return DualScalar(value, ad.mul(x.tangent, slope))

    def forward(self, x: DualScalar, params, activation: str = "silu", dense: bool = False) -> DualScalar:
        """Layer map for points-first duals: value (N, n_in), tangent (2, N, n_in)."""
        c, m, w = params
        n_in, n_out = self.n_in, self.n_out
        scaled = ad.mul(c, ad.reshape(m, (n_out, n_in, 1)))
        if dense:
            return self._dense_forward(x, scaled, w, activation)
        packed = combine_op(x.value, spline_op(self.grid, x.value, scaled), w, activation)
        value = ad.getitem(packed, (slice(None), 0, slice(None)))
        return DualScalar(value, tangent_op(x.tangent, packed))

    def _dense_forward(self, x, scaled, w, activation):
        # reference path built from generic tape ops
        n_in, n_out = self.n_in, self.n_out
        n = np.shape(ad._val(x.value))[0]
        spline, spline_slope = self._dense_spline(x.value, scaled)
        act, dact = _activation(activation, x.value)
        value = ad.add(spline, ad.matmul(act, ad.transpose(w)))
        # slope[n, i, o] = d(node o)/d(input i) at point n
        wt = ad.reshape(ad.transpose(w), (1, n_in, n_out))
        slope = ad.add(spline_slope, ad.mul(ad.reshape(dact, (n, n_in, 1)), wt))
        tangent = ad.vsum(ad.mul(ad.reshape(x.tangent, (2, n, n_in, 1)), slope), axis=2)
        return DualScalar(value, tangent)

    def _dense_spline(self, xv, scaled):
        n_in, n_out, nb = self.n_in, self.n_out, self.grid.n_basis
        n = np.shape(ad._val(xv))[0]
        B = basis_var(self.grid, xv, 0)  # (N, n_in, nb)
        dB = basis_var(self.grid, xv, 1)
        flat = ad.transpose(ad.reshape(scaled, (n_out, n_in * nb)))
        spline = ad.matmul(ad.reshape(B, (n, n_in * nb)), flat)
        # (n_in, N, nb) @ (n_in, nb, n_out) -> (n_in, N, n_out)
        per_input = ad.matmul(ad.permute(dB, (1, 0, 2)), ad.permute(scaled, (1, 2, 0)))
        return spline, ad.permute(per_input, (1, 0, 2))


@dataclass
class KanNetwork:
    shape: list[int]
    grid: BSplineGrid
    base_activation: str = "silu"
    layers: list[KanLayer] = field(default_factory=list)

    def __post_init__(self):
        if len(self.shape) < 2 or any(int(s) < 1 for s in self.shape):
            raise ValueError(f"invalid network shape {self.shape}")
        self.shape = [int(s) for s in self.shape]
        if self.base_activation not in ("silu", "tanh"):
            raise ValueError(f"unknown base activation {self.base_activation!r}")
        if not self.layers:
            self.layers = [KanLayer(a, b, self.grid) for a, b in zip(self.shape[:-1], self.shape[1:])]

    @classmethod
    def create(cls, shape, grid_size: int, order: int, grid_range=(0.0, 1.0), seed: int | None = 0, **kw) -> "KanNetwork":
        extrapolation = kw.pop("extrapolation", "zero")
        net = cls(list(shape), BSplineGrid(grid_size, order, tuple(grid_range), extrapolation), **kw)
        if seed is not None:
            init(net, seed)
        return net

    @property
    def n_params(self) -> int:
        return sum(layer.n_params for layer in self.layers)

    def arrays(self) -> list[np.ndarray]:
        return [a for layer in self.layers for a in layer.arrays()]

    def get_flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def unflatten(self, theta: np.ndarray) -> list[list[np.ndarray]]:
        """Per-layer (coeffs, scales, base_weights) views of a flat parameter vector."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {theta.shape}")
        out, pos = [], 0
        for layer in self.layers:
            arrays = []
            for a in layer.arrays():
                arrays.append(theta[pos : pos + a.size].reshape(a.shape))
                pos += a.size
            out.append(arrays)
        return out

    def set_flat(self, theta: np.ndarray) -> None:
        for layer, (c, m, w) in zip(self.layers, self.unflatten(theta)):
            layer.coeffs, layer.scales, layer.base_weights = c.copy(), m.copy(), w.copy()

    def register(self, tape: Tape, theta: np.ndarray | None = None) -> list[tuple[Var, Var, Var]]:
        """Put every parameter array (own, or sliced from ``theta``) on ``tape`` in flat order."""
        arrays = [layer.arrays() for layer in self.layers] if theta is None else self.unflatten(theta)
        return [tuple(tape.param(a) for a in group) for group in arrays]

    def forward(self, x: DualScalar, params=None, dense: bool = False) -> DualScalar:
        """Map points-first duals (N, 2) / tangents (2, N, 2) to raw outputs (N, n_out)."""
        if params is None:
            params = [layer.arrays() for layer in self.layers]
        last = len(self.layers) - 1
        for l, (layer, p) in enumerate(zip(self.layers, params)):
            x = layer.forward(x, p, self.base_activation, dense)
            if l < last:
                x = ad.dual_tanh(x)
        return x

    def __call__(self, xy: np.ndarray) -> np.ndarray:
        """Plain numeric evaluation at points of shape (N, 2); returns (N, n_out)."""
        xy = np.atleast_2d(np.asarray(xy, dtype=np.float64))
        out = self.forward(DualScalar(xy, np.zeros((2,) + xy.shape)))
        return np.asarray(out.value)


def param_count(shape, grid_size: int, order: int) -> int:
    return sum(a * b * (grid_size + order + 2) for a, b in zip(shape[:-1], shape[1:]))


def init(net: KanNetwork, seed: int) -> KanNetwork:
    """Spline coefficients ~ N(0, 0.1/sqrt(G+k)), unit scales, Xavier-uniform base weights."""
    rng = np.random.default_rng(seed)
    std = 0.1 / np.sqrt(net.grid.n_basis)
    for layer in net.layers:
        layer.coeffs = rng.normal(0.0, std, size=layer.coeffs.shape)
        layer.scales = np.ones((layer.n_out, layer.n_in))
        bound = np.sqrt(6.0 / (layer.n_in + layer.n_out))
        layer.base_weights = rng.uniform(-bound, bound, size=(layer.n_out, layer.n_in))
    return net


def fit_edge(grid: BSplineGrid, f, n_samples: int = 200) -> np.ndarray:
    """Least-squares spline coefficients reproducing ``f`` on the grid range."""
    a, b = grid.range
    xs = np.linspace(a, b, n_samples)
    A = bspline_basis(grid, xs)
    coef, *_ = np.linalg.lstsq(A, f(xs), rcond=None)
    return coef


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, net: KanNetwork, config: dict | None = None, extra: dict | None = None) -> None:
    payload = net.get_flat().astype("<f8").tobytes()
    header = {
        "kind": "kan",
        "version": CHECKPOINT_VERSION,
        "shape": net.shape,
        "grid_size": net.grid.grid_size,
        "order": net.grid.order,
        "grid_range": list(net.grid.range),
        "extrapolation": net.grid.extrapolation,
        "base_activation": net.base_activation,
        "n_params": net.n_params,
        "sha256": hashlib.sha256(payload).hexdigest(),
        "config": config,
        "extra": extra or {},
    }
    _write_checkpoint(path, header, payload)


def _write_checkpoint(path, header: dict, payload: bytes) -> None:
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", header["version"], len(blob)))
        fh.write(blob)
        fh.write(payload)


def read_checkpoint(path) -> tuple[dict, np.ndarray]:
    """Header dict and flat parameter vector; verifies magic, version and checksum."""
    data = Path(path).read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not a checkpoint file")
    pos = len(CHECKPOINT_MAGIC)
    version, hlen = struct.unpack("<II", data[pos : pos + 8])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos += 8
    header = json.loads(data[pos : pos + hlen])
    payload = data[pos + hlen :]
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise ValueError(f"{path}: checksum mismatch")
    theta = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if theta.size != header["n_params"]:
        raise ValueError(f"{path}: expected {header['n_params']} parameters, found {theta.size}")
    return header, theta


def load_checkpoint(path) -> tuple[KanNetwork, dict]:
    header, theta = read_checkpoint(path)
    if header.get("kind") != "kan":
        raise ValueError(f"{path}: checkpoint holds a {header.get('kind')!r} model, not a KAN")
    net = KanNetwork.create(
        header["shape"],
        header["grid_size"],
        header["order"],
        tuple(header["grid_range"]),
        seed=None,
        extrapolation=header.get("extrapolation", "zero"),
        base_activation=header.get("base_activation", "silu"),
    )
    net.set_flat(theta)
    return net, header
