import math

import numpy as np
import pytest

from pikan import optimize as opt
from pikan.dem import NumericalError


def rosenbrock(x):
    a, b = x
    f = (1 - a) ** 2 + 100 * (b - a * a) ** 2
    g = np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])
    return f, g


def test_quadratic_three_steps():
    rng = np.random.default_rng(0)
    for _ in range(5):
        a = rng.normal(size=7) * 3

        def f(x):
            r = x - a
            return float(r @ r), 2 * r

        res = opt.minimize(f, np.zeros(7), opt.LbfgsConfig(epochs=3))
        assert res.steps <= 3
        assert np.abs(res.theta - a).max() < 1e-10


def test_rosenbrock():
    res = opt.minimize(rosenbrock, np.array([-1.2, 1.0]), opt.LbfgsConfig(epochs=100, tol=0.0))
    assert res.steps <= 100
    assert np.abs(res.theta - 1).max() < 1e-6


def test_infinite_tol_returns_start():
    x0 = np.array([-1.2, 1.0])
    res = opt.minimize(rosenbrock, x0, opt.LbfgsConfig(tol=math.inf))
    assert res.steps == 0 and res.status == "tol"
    np.testing.assert_array_equal(res.theta, x0)


def test_losses_non_increasing_and_callback():
    seen = []
    res = opt.minimize(rosenbrock, np.array([-1.2, 1.0]), opt.LbfgsConfig(epochs=15, max_inner=5), lambda s, th, f: seen.append((s, f)))
    assert all(b <= a for a, b in zip(res.losses, res.losses[1:]))
    assert [s for s, _ in seen] == list(range(1, res.steps + 1))
    assert [f for _, f in seen] == res.losses[1:]


def test_evaluation_budget_per_step():
    calls = []

    def f(x):
        calls.append(1)
        return rosenbrock(x)

    res = opt.minimize(f, np.array([-1.2, 1.0]), opt.LbfgsConfig(epochs=4, max_inner=7, tol=0.0))
    assert res.evaluations == len(calls) <= 1 + 4 * 7


def test_deterministic():
    a = opt.minimize(rosenbrock, np.array([-1.2, 1.0]), opt.LbfgsConfig(epochs=20))
    b = opt.minimize(rosenbrock, np.array([-1.2, 1.0]), opt.LbfgsConfig(epochs=20))
    assert a.losses == b.losses


def test_non_finite_aborts_with_diagnostic():
    calls = []

    def f(x):
        calls.append(1)
        return (np.nan if len(calls) > 3 else float(x @ x)), 2 * x

    with pytest.raises(NumericalError, match="theta"):
        opt.minimize(f, np.ones(2), opt.LbfgsConfig(epochs=5))


def test_line_search_failure_reported():
    # gradient points the wrong way, so no step ever decreases the loss
    def f(x):
        return float(x @ x), -2 * x - 1

    res = opt.minimize(f, np.zeros(2), opt.LbfgsConfig(epochs=5, max_inner=200))
    assert res.status == "line_search"
    assert res.losses[-1] == res.losses[0]
    # with the default budget the search runs out first, which only ends the step
    res = opt.minimize(f, np.zeros(2), opt.LbfgsConfig(epochs=5))
    assert res.status == "tol" and res.steps == 1


def test_strong_wolfe_conditions_hold():
    x = np.array([-1.2, 1.0])
    f0, g0 = rosenbrock(x)
    d = -g0
    counter = opt._Counter(rosenbrock, 20, 0)
    t, f, g = opt.strong_wolfe(counter, x, f0, g0, d, 1e-3, 1e-4, 0.9)[:3]
    assert f <= f0 + 1e-4 * t * (g0 @ d)
    assert abs(g @ d) <= 0.9 * abs(g0 @ d)


@pytest.mark.parametrize("kw", [{"history": 0}, {"c1": 0.9, "c2": 0.5}, {"max_inner": 1}, {"lr": 0.0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        opt.LbfgsConfig(**kw)
