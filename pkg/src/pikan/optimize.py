"""L-BFGS with a strong-Wolfe line search over a flat parameter vector.

One *outer step* spends up to ``max_inner`` objective evaluations on as many
quasi-Newton iterations as fit, which mirrors how ML-style L-BFGS counts
"iterations per optimization step".

Step seeding: the first line search (a plain steepest-descent direction)
tries ``lr * min(1, 1 / |g|_1)``. Once curvature pairs exist, the last accepted
step enters through the initial inverse-Hessian scale ``s.y / y.y`` and the
trial length is 1, the natural quasi-Newton step. Steepest-descent searches
after a restart are seeded with the last accepted length.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dem import NumericalError


@dataclass(frozen=True)
class LbfgsConfig:
    history: int = 10
    lr: float = 1e-3
    max_inner: int = 20
    c1: float = 1e-4
    c2: float = 0.9
    epochs: int = 100
    tol: float = 1e-9
    grad_tol: float = 1e-12
    check_wolfe: bool = __debug__

    def __post_init__(self):
        if self.history < 1:
            raise ValueError("history must be at least 1")
        if not 0.0 < self.c1 < self.c2 < 1.0:
            raise ValueError("line search needs 0 < c1 < c2 < 1")
        if self.max_inner < 2:
            raise ValueError("max_inner must allow at least two evaluations")
        if self.lr <= 0 or self.epochs < 0:
            raise ValueError("lr must be positive and epochs non-negative")


@dataclass
class OptimizeResult:
    theta: np.ndarray
    losses: list  # loss at theta0, then after each outer step
    steps: int
    evaluations: int
    status: str  # "epochs", "tol", "grad", "line_search"
    restarts: int = 0
    history: list = field(default_factory=list, repr=False)


class _Budget(Exception):
    pass


class _Counter:
    def __init__(self, fun, limit, step):
        self.fun, self.limit, self.used, self.step = fun, limit, 0, step

    def __call__(self, x):
        if self.used >= self.limit:
            raise _Budget
        self.used += 1
        f, g = self.fun(x)
        f = float(f)
        g = np.asarray(g, dtype=np.float64)
        if not (math.isfinite(f) and np.all(np.isfinite(g))):
            raise NumericalError(f"non-finite loss or gradient at step {self.step} (|theta| = {np.linalg.norm(x):.6g})")
        return f, g


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimizer of the cubic interpolating (a, fa, ga) and (b, fb, gb), safeguarded to the interval."""
    lo, hi = min(a, b), max(a, b)
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc >= 0.0:
        d2 = math.copysign(math.sqrt(disc), b - a)
        t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2)
        if lo <= t <= hi and math.isfinite(t):
            return t
    return 0.5 * (lo + hi)


def strong_wolfe(fun, x, f0, g0, d, t, c1, c2, max_extrapolation=25):
    """Bracketing and zoom (Nocedal & Wright Alg. 3.5/3.6) with cubic interpolation.

    Returns (t, f, g) of an accepted point or None if no acceptable step was found
    before the evaluation budget ran out.
    """
    dphi0 = float(g0 @ d)
    t_prev, f_prev, dphi_prev = 0.0, f0, dphi0
    best = None
    try:
        for _ in range(max_extrapolation):
            f, g = fun(x + t * d)
            dphi = float(g @ d)
            if f > f0 + c1 * t * dphi0 or (f >= f_prev and t_prev > 0.0):
                return _zoom(fun, x, f0, dphi0, d, t_prev, f_prev, dphi_prev, t, f, dphi, c1, c2)
            if abs(dphi) <= -c2 * dphi0:
                return t, f, g
            best = (t, f, g)
            if dphi >= 0.0:
                return _zoom(fun, x, f0, dphi0, d, t, f, dphi, t_prev, f_prev, dphi_prev, c1, c2)
            t_prev, f_prev, dphi_prev = t, f, dphi
            t = min(t * 4.0, t + 100.0 * max(t, 1.0)) if t < 1.0 else t * 2.0
    except _Budget:
        pass
    if best is not None and best[1] <= f0 + c1 * best[0] * dphi0:
        # sufficient decrease holds; curvature may not - report as such
        return best + ("armijo",)
    return None


def _zoom(fun, x, f0, dphi0, d, lo, flo, dlo, hi, fhi, dhi, c1, c2):
    best = (lo, flo, None) if lo > 0 else None
    try:
        for _ in range(30):
            t = _cubic_min(lo, flo, dlo, hi, fhi, dhi)
            width = abs(hi - lo)
            # keep the trial away from the interval ends
            if min(abs(t - lo), abs(t - hi)) < 0.1 * width:
                t = 0.5 * (lo + hi)
            f, g = fun(x + t * d)
            dphi = float(g @ d)
            if f > f0 + c1 * t * dphi0 or f >= flo:
                hi, fhi, dhi = t, f, dphi
            else:
                if abs(dphi) <= -c2 * dphi0:
                    return t, f, g
                best = (t, f, g)
                if dphi * (hi - lo) >= 0.0:
                    hi, fhi, dhi = lo, flo, dlo
                lo, flo, dlo = t, f, dphi
            if width < 1e-16 * max(1.0, abs(t)):
                break
    except _Budget:
        pass
    if best is not None and best[2] is not None:
        return best + ("armijo",)
    return None


def _direction(g, hist, gamma):
    q = -g.copy()
    alphas = []
    for s, y, rho in reversed(hist):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    q *= gamma
    for (s, y, rho), a in zip(hist, reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return q


def minimize(objective: Callable, theta0, config: LbfgsConfig = LbfgsConfig(), callback: Callable | None = None) -> OptimizeResult:
    """Minimize ``objective(theta) -> (loss, grad)`` from ``theta0``.

    ``callback(step, theta, loss)`` runs after every outer step. The returned
    loss history is non-increasing: every accepted step satisfies the
    sufficient-decrease condition.
    """
    x = np.array(theta0, dtype=np.float64)
    counter = _Counter(objective, 1, 0)
    f, g = counter(x)
    evaluations = 1
    losses = [f]
    hist: deque = deque(maxlen=config.history)
    # first trial scaled by the gradient size so a raw lr never overshoots wildly
    t_seed = config.lr * min(1.0, 1.0 / max(float(np.abs(g).sum()), 1e-300))
    change = math.inf
    status = "epochs"
    restarts = 0
    step = 0
    while step < config.epochs:
        if change <= config.tol:
            status = "tol"
            break
        if float(np.max(np.abs(g))) <= config.grad_tol:
            status = "grad"
            break
        counter = _Counter(objective, config.max_inner, step)
        f_start = f
        failed = False
        while counter.used < config.max_inner:
            if hist:
                s, y, _ = hist[-1]
                gamma = float(s @ y) / float(y @ y)
            else:
                gamma = 1.0
            d = _direction(g, hist, gamma)
            if float(g @ d) >= 0.0:
                hist.clear()
                d = -g
            found = strong_wolfe(counter, x, f, g, d, 1.0 if hist else t_seed, config.c1, config.c2)
            if found is None and counter.used >= config.max_inner:
                break  # budget spent mid-search: the outer step simply ends here
            if found is None and hist:
                # restart once along steepest descent
                hist.clear()
                restarts += 1
                d = -g
                found = strong_wolfe(counter, x, f, g, d, t_seed, config.c1, config.c2)
            if found is None:
                failed = True
                break
            t, f_new, g_new = found[:3]
            if config.check_wolfe:
                assert f_new <= f + config.c1 * t * float(g @ d) + 1e-12 * abs(f), "sufficient decrease violated"
                if len(found) == 3:
                    assert abs(float(g_new @ d)) <= -config.c2 * float(g @ d) * (1 + 1e-9), "curvature condition violated"
            s = t * d
            yv = g_new - g
            sy = float(s @ yv)
            if sy > 1e-10 * float(yv @ yv) and sy > 0:
                hist.append((s, yv, 1.0 / sy))
            x = x + s
            f, g = f_new, g_new
            t_seed = t
            if float(np.max(np.abs(g))) <= config.grad_tol or float(np.max(np.abs(s))) <= 1e-14 * max(1.0, float(np.max(np.abs(x)))):
                break
        evaluations += counter.used
        step += 1
        losses.append(f)
        change = abs(f_start - f) / max(abs(f_start), abs(f), 1e-300)
        if callback is not None:
            callback(step, x, f)
        if failed:
            status = "line_search"
            break
    return OptimizeResult(x, losses, step, evaluations, status, restarts)
