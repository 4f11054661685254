import numpy as np
import pytest

from onsetfbp import ops
from onsetfbp.grids import XGrid, YGrid


def test_spectral_derivatives_exact_on_modes(xg16):
    x = xg16.nodes
    u = np.sin(2 * x)
    assert np.allclose(ops.grad_x(u, xg16)[0], 2 * np.cos(2 * x), atol=1e-12)
    assert np.allclose(ops.lap_x(u, xg16), -4 * u, atol=1e-11)


def test_lap_2d():
    xg = XGrid(2, 16)
    X, Y = xg.coords
    u = np.sin(X) * np.cos(2 * Y)
    assert np.allclose(ops.lap_x(u, xg), -5 * u, atol=1e-11)


def test_complete_attaches_boundary_rows():
    yg = YGrid(10)
    interior = np.random.default_rng(0).random((3, 10))
    u = ops.complete(interior, 2.0, 0.7, yg)
    assert np.allclose(u[:, 0], 2.0)
    assert np.allclose(ops.dy_top(u, yg), 0.7)


@pytest.mark.parametrize("order,expected", [(2, 2.0), (3, 3.0)])
def test_top_stencil_order(order, expected):
    errs = []
    for m in (16, 32, 64):
        yg = YGrid(m)
        u = np.sin(2 * yg.nodes)
        errs.append(abs(ops.dy_top(u, yg, order=order) - 2 * np.cos(2)))
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(np.abs(rates - expected) < 0.3)


def test_dyy_second_order():
    errs = []
    for m in (16, 32, 64):
        yg = YGrid(m)
        y = yg.nodes
        errs.append(np.max(np.abs(ops.dyy(np.exp(y), yg)[1:-1] - np.exp(y[1:-1]))))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(2, abs=0.2)


def _random_operator(rng, xg, yg, variable):
    a2 = 1 + 0.3 * rng.random(xg.shape) if variable else 1.7
    a0 = 0.5 + rng.random(xg.shape) if variable else 0.3
    return ops.StripOperator(xg, yg, a0=a0, a1=1.0, a2=a2, a3=-2.0)


@pytest.mark.parametrize("variable", [False, True])
@pytest.mark.parametrize("n_dim,n", [(1, 16), (2, 8)])
def test_strip_operator_solve_inverts_apply(rng, variable, n_dim, n):
    xg, yg = XGrid(n_dim, n), YGrid(12)
    op = _random_operator(rng, xg, yg, variable)
    rhs = rng.standard_normal(xg.shape + (yg.m,))
    g, q = rng.standard_normal(xg.shape), rng.standard_normal(xg.shape)
    u = op.solve(rhs, g, q)
    assert np.allclose(op.apply(u), rhs, atol=1e-9)
    assert np.allclose(u[..., 0], g) and np.allclose(ops.dy_top(u, yg), q)


def test_dense_and_krylov_paths_agree(rng, monkeypatch):
    xg, yg = XGrid(1, 16), YGrid(12)
    op = _random_operator(rng, xg, yg, True)
    rhs = rng.standard_normal(xg.shape + (yg.m,))
    dense = op.solve_homogeneous(rhs)
    monkeypatch.setattr(ops, "DENSE_LIMIT", 0)
    krylov = op.solve_homogeneous(rhs)
    assert np.max(np.abs(dense - krylov)) < 1e-10


def test_nonpositive_a2_rejected(xg16, yg16):
    with pytest.raises(ValueError):
        ops.StripOperator(xg16, yg16, a2=0.0)
