"""Compiled sparse B-spline contractions used by the KAN layer op.

Each point touches only ``order + 1`` basis functions, so contracting with the
coefficient tensor directly is much cheaper than materialising the dense basis.
Loops run in a fixed order, which keeps results bit-reproducible.

Quadratic and cubic splines get closed-form span polynomials returned as
tuples (they stay in registers); other orders fall back to the Cox-de Boor
recursion.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _local(u, order, deriv, h, low, out):
    """Nonzero values of the deriv-th derivative on one span (entry j -> B_{span-order+j})."""
    for j in range(order + 1):
        out[j] = 0.0
    if deriv > order:
        return
    degree = order - deriv
    low[0] = 1.0
    for j in range(1, degree + 1):
        saved = 0.0
        for r in range(j):
            temp = low[r] / j
            low[r] = saved + (r + 1 - u) * temp
            saved = (u + (j - r - 1)) * temp
        low[j] = saved
    scale = h ** (-deriv)
    binom = 1.0
    for i in range(deriv + 1):
        if i > 0:
            binom = binom * (deriv - i + 1) / i
        sign = -1.0 if i % 2 == 1 else 1.0
        for j in range(order + 1):
            q = j + i - deriv
            if q >= 0 and q <= degree:
                out[j] += sign * binom * low[q] * scale


@njit(cache=True)
def _span_generic(u, order, inv_h):
    low = np.empty(order + 1)
    b0 = np.empty(order + 1)
    b1 = np.empty(order + 1)
    b2 = np.empty(order + 1)
    h = 1.0 / inv_h
    _local(u, order, 0, h, low, b0)
    _local(u, order, 1, h, low, b1)
    _local(u, order, 2, h, low, b2)
    return b0, b1, b2


@njit(cache=True)
def _span_quadratic(u, order, inv_h):
    v = 1.0 - u
    ih2 = inv_h * inv_h
    return (
        (0.5 * v * v, 0.5 + u * v, 0.5 * u * u),
        (-v * inv_h, (1.0 - 2.0 * u) * inv_h, u * inv_h),
        (ih2, -2.0 * ih2, ih2),
    )


@njit(cache=True)
def _span_cubic(u, order, inv_h):
    v = 1.0 - u
    u2 = u * u
    ih2 = inv_h * inv_h
    return (
        (
            v * v * v / 6.0,
            (3.0 * u2 * u - 6.0 * u2 + 4.0) / 6.0,
            (-3.0 * u2 * u + 3.0 * u2 + 3.0 * u + 1.0) / 6.0,
            u2 * u / 6.0,
        ),
        (
            -0.5 * v * v * inv_h,
            (1.5 * u2 - 2.0 * u) * inv_h,
            (-1.5 * u2 + u + 0.5) * inv_h,
            0.5 * u2 * inv_h,
        ),
        (v * ih2, (3.0 * u - 2.0) * ih2, (1.0 - 3.0 * u) * ih2, u * ih2),
    )


def _build(span):
    @njit
    def fused(x, coef, t0, h, order, n_spans, poly):
        n_pts, n_in = x.shape
        n_out, _, nb = coef.shape
        out = np.zeros((n_pts, n_in + 1, n_out))
        inv_h = 1.0 / h
        for n in range(n_pts):
            for i in range(n_in):
                pos = (x[n, i] - t0) * inv_h
                k = int(np.floor(pos))
                if not poly and (pos < 0.0 or pos > n_spans):
                    continue
                k = min(max(k, 0), n_spans - 1)
                b0, b1, _ = span(pos - k, order, inv_h)
                for j in range(order + 1):
                    p = k - order + j
                    if p < 0 or p >= nb:
                        continue
                    v0 = b0[j]
                    v1 = b1[j]
                    for o in range(n_out):
                        c = coef[o, i, p]
                        out[n, 0, o] += c * v0
                        out[n, 1 + i, o] += c * v1
        return out

    @njit
    def fused_vjp(x, coef, g, t0, h, order, n_spans, poly):
        n_pts, n_in = x.shape
        n_out, _, nb = coef.shape
        gx = np.zeros((n_pts, n_in))
        gc = np.zeros((n_out, n_in, nb))
        inv_h = 1.0 / h
        for n in range(n_pts):
            for i in range(n_in):
                pos = (x[n, i] - t0) * inv_h
                k = int(np.floor(pos))
                if not poly and (pos < 0.0 or pos > n_spans):
                    continue
                k = min(max(k, 0), n_spans - 1)
                b0, b1, b2 = span(pos - k, order, inv_h)
                acc = 0.0
                for j in range(order + 1):
                    p = k - order + j
                    if p < 0 or p >= nb:
                        continue
                    v0 = b0[j]
                    v1 = b1[j]
                    v2 = b2[j]
                    for o in range(n_out):
                        gv = g[n, 0, o]
                        gs = g[n, 1 + i, o]
                        acc += coef[o, i, p] * (gv * v1 + gs * v2)
                        gc[o, i, p] += gv * v0 + gs * v1
                gx[n, i] = acc
        return gx, gc

    return fused, fused_vjp


_SPAN = {2: _span_quadratic, 3: _span_cubic}
_KERNELS = {}


def _kernels(order):
    key = order if order in _SPAN else None
    if key not in _KERNELS:
        _KERNELS[key] = _build(_SPAN.get(order, _span_generic))
    return _KERNELS[key]


def spline_fused(x, coef, t0, h, order, n_spans, poly):
    """Edge-spline sums and slopes for points-first input x (N, n_in).

    out[n, 0, o]     = sum_i sum_p coef[o, i, p] B_p(x[n, i])
    out[n, 1 + i, o] = sum_p coef[o, i, p] B'_p(x[n, i])
    """
    return _kernels(order)[0](x, coef, t0, h, order, n_spans, poly)


def spline_fused_vjp(x, coef, g, t0, h, order, n_spans, poly):
    """Cotangents (gx, gcoef) of :func:`spline_fused` for output cotangent g."""
    return _kernels(order)[1](x, coef, g, t0, h, order, n_spans, poly)


@njit(cache=True)
def tangent_contract(t, s):
    """out[a, n, o] = sum_i t[a, n, i] s[n, 1 + i, o] for a packed layer output s."""
    n_tan, n_pts, n_in = t.shape
    n_out = s.shape[2]
    out = np.zeros((n_tan, n_pts, n_out))
    for n in range(n_pts):
        for i in range(n_in):
            for a in range(n_tan):
                ta = t[a, n, i]
                for o in range(n_out):
                    out[a, n, o] += ta * s[n, 1 + i, o]
    return out


@njit(cache=True)
def tangent_contract_vjp(t, s, g):
    n_tan, n_pts, n_in = t.shape
    n_out = s.shape[2]
    gt = np.zeros((n_tan, n_pts, n_in))
    gs = np.zeros((n_pts, n_in + 1, n_out))
    for n in range(n_pts):
        for i in range(n_in):
            for a in range(n_tan):
                ta = t[a, n, i]
                acc = 0.0
                for o in range(n_out):
                    acc += g[a, n, o] * s[n, 1 + i, o]
                    gs[n, 1 + i, o] += ta * g[a, n, o]
                gt[a, n, i] = acc
    return gt, gs


@njit(cache=True, inline="always")
def _act(x, kind):
    """Base activation and its first two derivatives (kind 0 = silu, 1 = tanh)."""
    if kind == 1:
        t = np.tanh(x)
        d = 1.0 - t * t
        return t, d, -2.0 * t * d
    if x >= 0.0:
        s = 1.0 / (1.0 + np.exp(-x))
    else:
        e = np.exp(x)
        s = e / (1.0 + e)
    d = s * (1.0 + x * (1.0 - s))
    dd = s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s))
    return x * s, d, dd


@njit(cache=True)
def layer_combine(x, fused, w, kind):
    """Add the weighted base activation to the packed spline output of a layer.

    out[n, 0, o]     = fused[n, 0, o] + sum_i w[o, i] act(x[n, i])
    out[n, 1 + i, o] = fused[n, 1 + i, o] + w[o, i] act'(x[n, i])
    """
    n_pts, n_in = x.shape
    n_out = w.shape[0]
    out = fused.copy()
    for n in range(n_pts):
        for i in range(n_in):
            a, da, _ = _act(x[n, i], kind)
            for o in range(n_out):
                out[n, 0, o] += w[o, i] * a
                out[n, 1 + i, o] += w[o, i] * da
    return out


@njit(cache=True)
def layer_combine_vjp(x, w, kind, g):
    """Cotangents (gx, gw); the cotangent of ``fused`` is ``g`` itself."""
    n_pts, n_in = x.shape
    n_out = w.shape[0]
    gx = np.zeros((n_pts, n_in))
    gw = np.zeros((n_out, n_in))
    for n in range(n_pts):
        for i in range(n_in):
            a, da, dda = _act(x[n, i], kind)
            acc = 0.0
            for o in range(n_out):
                g1 = g[n, 0, o]
                g2 = g[n, 1 + i, o]
                gw[o, i] += g1 * a + g2 * da
                acc += w[o, i] * (g1 * da + g2 * dda)
            gx[n, i] = acc
    return gx, gw
