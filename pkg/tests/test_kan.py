import numpy as np
import pytest

from pikan import autodiff as ad
from pikan import kan

GRIDS = [kan.BSplineGrid(g, k, r) for g, k, r in [(5, 0, (0, 1)), (7, 1, (0, 1)), (10, 2, (-1, 1)), (20, 3, (0, 1)), (6, 4, (-2, 3))]]


@pytest.mark.parametrize("grid", GRIDS, ids=lambda g: f"G{g.grid_size}k{g.order}")
def test_partition_of_unity(grid):
    x = np.random.default_rng(0).uniform(*grid.range, size=1000)
    B = kan.bspline_basis(grid, x)
    assert B.shape == (1000, grid.n_basis)
    assert np.abs(B.sum(axis=1) - 1).max() < 1e-12
    assert B.min() >= -1e-15


def test_order_zero_is_span_indicator():
    grid = kan.BSplineGrid(4, 0)
    B = kan.bspline_basis(grid, np.array([0.1, 0.3, 0.6, 0.9]))
    np.testing.assert_array_equal(B, np.eye(4))


@pytest.mark.parametrize("grid", GRIDS[1:], ids=lambda g: f"G{g.grid_size}k{g.order}")
def test_basis_derivative_matches_fd(grid):
    a, b = grid.range
    x = np.random.default_rng(1).uniform(a, b, size=300)
    # keep away from knots, where derivatives of low order jump
    h = grid.spacing
    frac = ((x - a) / h) % 1
    x = x[(frac > 1e-3) & (frac < 1 - 1e-3)]
    eps = 1e-7 * (b - a)
    fd = (kan.bspline_basis(grid, x + eps) - kan.bspline_basis(grid, x - eps)) / (2 * eps)
    d = kan.bspline_basis(grid, x, 1)
    scale = np.abs(d).max()
    assert np.abs(fd - d).max() / scale < 1e-6


@pytest.mark.parametrize("grid", GRIDS, ids=lambda g: f"G{g.grid_size}k{g.order}")
def test_polynomial_reproduction(grid):
    a, b = grid.range
    rng = np.random.default_rng(2)
    coeffs = rng.normal(size=grid.order + 1)

    def f(x):
        return np.polyval(coeffs, x)

    c = kan.fit_edge(grid, f)
    xs = np.linspace(a, b, 777)
    assert np.abs(kan.bspline_basis(grid, xs) @ c - f(xs)).max() < 1e-9


def test_zero_outside_extended_range_by_default():
    grid = kan.BSplineGrid(5, 3)
    assert np.all(kan.bspline_basis(grid, np.array([-1.0, 2.0])) == 0)
    poly = kan.BSplineGrid(5, 3, extrapolation="polynomial")
    assert np.any(kan.bspline_basis(poly, np.array([-1.0])) != 0)


def test_bad_grid():
    with pytest.raises(ValueError):
        kan.BSplineGrid(0, 3)
    with pytest.raises(ValueError):
        kan.BSplineGrid(5, 3, (1.0, 1.0))


# edges and layers -------------------------------------------------------------


def one_edge(c, m=1.0, w=0.0, grid=None):
    grid = grid or kan.BSplineGrid(10, 3)
    layer = kan.KanLayer(1, 1, grid, np.array(c, float).reshape(1, 1, -1), np.full((1, 1), m), np.full((1, 1), w))
    return layer


def test_zero_edge_outputs_zero():
    grid = kan.BSplineGrid(10, 3)
    layer = one_edge(np.zeros(grid.n_basis))
    x = ad.lift_input(np.linspace(0, 1, 7), ad.X)
    out = layer.edge_eval(0, 0, x)
    np.testing.assert_array_equal(out.value, 0)
    np.testing.assert_array_equal(out.tangent, 0)


def test_linear_edge_from_greville():
    grid = kan.BSplineGrid(10, 3)
    layer = one_edge(2.0 * grid.greville() - 0.5, grid=grid)
    xs = np.linspace(0, 1, 501)
    out = layer.edge_eval(0, 0, ad.lift_input(xs, ad.X))
    assert np.abs(out.value - (2 * xs - 0.5)).max() < 1e-10
    assert np.abs(out.dx - 2.0).max() < 1e-9


def test_silu_base_at_zero():
    layer = one_edge(np.zeros(13), w=1.0)
    assert layer.edge_eval(0, 0, ad.lift_input(np.array([0.0]), ad.X)).value[0] == 0.0


def test_identity_network():
    grid = kan.BSplineGrid(10, 3)
    net = kan.KanNetwork([1, 1], grid)
    net.layers[0].coeffs[0, 0] = grid.greville()
    xs = np.linspace(0, 1, 101)[:, None]
    assert np.abs(net(xs) - xs).max() < 1e-10


def test_zero_init_network_outputs_zero():
    net = kan.KanNetwork([2, 5, 5, 2], kan.BSplineGrid(10, 3))
    pts = ad.lift_points(np.random.default_rng(0).uniform(size=(20, 2)))
    out = net.forward(pts)
    np.testing.assert_array_equal(out.value, 0)
    np.testing.assert_array_equal(out.tangent, 0)


def test_hidden_activations_clamped():
    rng = np.random.default_rng(5)
    net = kan.KanNetwork.create([2, 4, 4, 2], 8, 3, seed=1)
    for layer in net.layers:
        layer.coeffs = rng.normal(0, 30, layer.coeffs.shape)
        layer.base_weights = rng.normal(0, 30, layer.base_weights.shape)
    x = ad.lift_points(rng.uniform(size=(200, 2)))
    for layer in net.layers[:-1]:
        x = ad.dual_tanh(layer.forward(x, layer.arrays()))
        assert np.all(np.abs(x.value) <= 1)


def test_fused_and_dense_paths_agree():
    net = kan.KanNetwork.create([2, 5, 5, 2], 10, 3, seed=3)
    pts = np.random.default_rng(3).uniform(size=(50, 2))
    out = []
    for dense in (False, True):
        tape = ad.Tape()
        params = net.register(tape)
        y = net.forward(ad.lift_points(pts), params, dense=dense)
        loss = ad.vsum(ad.mul(y.value, y.value)) + ad.vsum(ad.mul(y.tangent, y.tangent))
        out.append((y.value.value, y.tangent.value, tape.gradient(loss)))
    for a, b in zip(*out):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)


def test_network_gradient_matches_fd():
    net = kan.KanNetwork.create([2, 3, 2], 5, 3, seed=7)
    pts = np.random.default_rng(7).uniform(size=(9, 2))

    def loss(theta, tape=None):
        tape = tape or ad.Tape()
        y = net.forward(ad.lift_points(pts), net.register(tape, theta))
        l = ad.vsum(ad.tanh(y.value)) + ad.vsum(ad.mul(y.tangent, y.tangent))
        return l, tape

    theta = net.get_flat()
    l, tape = loss(theta)
    g = tape.gradient(l)
    assert g.size == kan.param_count([2, 3, 2], 5, 3) == net.n_params
    worst = 0.0
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = 1e-6
        fd = (float(loss(theta + e)[0].value) - float(loss(theta - e)[0].value)) / 2e-6
        worst = max(worst, abs(fd - g[i]) / max(abs(fd), 1e-3))
    assert worst < 1e-5


@pytest.mark.parametrize("grid_size,order,count", [(10, 3, 1050), (20, 3, 1750), (10, 2, 980)])
def test_param_counts(grid_size, order, count):
    assert kan.param_count([2, 5, 5, 5, 2], grid_size, order) == count
    net = kan.KanNetwork.create([2, 5, 5, 5, 2], grid_size, order)
    tape = ad.Tape()
    net.register(tape)
    assert sum(tape.values[p].size for p in tape.params) == count


def test_init_deterministic_and_small():
    a = kan.KanNetwork.create([2, 5, 5, 5, 2], 10, 3, seed=11)
    b = kan.KanNetwork.create([2, 5, 5, 5, 2], 10, 3, seed=11)
    np.testing.assert_array_equal(a.get_flat(), b.get_flat())
    assert all(np.all(l.scales == 1) for l in a.layers)
    pts = np.random.default_rng(0).uniform(size=(50, 2))
    mags = [np.abs(kan.KanNetwork.create([2, 5, 5, 5, 2], 10, 3, seed=s)(pts)).mean() for s in range(100)]
    assert np.mean(mags) < 1


def test_checkpoint_round_trip(tmp_path):
    net = kan.KanNetwork.create([2, 5, 2], 10, 2, (-1, 1), seed=2)
    path = tmp_path / "n.pikan"
    kan.save_checkpoint(path, net, {"a": 1})
    back, header = kan.load_checkpoint(path)
    np.testing.assert_array_equal(back.get_flat(), net.get_flat())
    assert back.grid == net.grid and header["config"] == {"a": 1}
    data = bytearray(path.read_bytes())
    data[-1] ^= 1
    path.write_bytes(bytes(data))
    with pytest.raises(ValueError, match="checksum"):
        kan.load_checkpoint(path)


def test_set_flat_size_checked():
    net = kan.KanNetwork.create([2, 2], 3, 1)
    with pytest.raises(ValueError):
        net.set_flat(np.zeros(3))
