import numpy as np
import pytest

from onsetfbp.elliptic import (EllipticProblem, PartitionOfUnity, apply_boundary_ops, choose_patches,
                               commutator, commutator_formula, inverse_apply, solve, solve_constant,
                               solve_direct, solve_variable)
from onsetfbp.grids import XGrid, YGrid
from onsetfbp.ops import dy_top
from onsetfbp.symbols import fit_slope
from onsetfbp.verify import dense_oracle_elliptic


def _rel(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def _sine_c(xg, amp=0.2):
    return 1 + amp * np.sin(xg.nodes)


def test_problem_validation(xg16, yg16):
    with pytest.raises(ValueError):
        EllipticProblem(xg16, yg16, 0.0)
    with pytest.raises(ValueError):
        EllipticProblem(xg16, yg16, 0.1, c=-1.0)
    with pytest.raises(ValueError):
        EllipticProblem(xg16, yg16, 0.1, f=np.zeros((16, 3)))


def test_constant_dirichlet_trace(xg16, yg16, rng):
    g = rng.standard_normal(16)
    u = solve_constant(EllipticProblem(xg16, yg16, 0.3, g=g))
    assert np.max(np.abs(u[:, 0] - g)) < 1e-12


def test_constant_neumann_mode():
    xg, yg = XGrid(1, 16), YGrid(64)
    h = np.cos(2 * xg.nodes)
    u = solve_constant(EllipticProblem(xg, yg, 1.0, h=h))
    assert np.max(np.abs(dy_top(u, yg) - h)) < 1e-12


def test_constant_mean_profile():
    xg, yg = XGrid(1, 8), YGrid(128)
    y = yg.nodes
    u = solve_constant(EllipticProblem(xg, yg, 0.5, f=np.ones((8, yg.size))))
    assert np.max(np.abs(u - 0.25 * (y - y ** 2 / 2))) < 1e-5


def test_constant_matches_oracle_64x32(rng):
    xg, yg = XGrid(1, 64), YGrid(32)
    f = rng.standard_normal((64, yg.size))
    p = EllipticProblem(xg, yg, 0.2, c=1.3, f=f, g=np.cos(xg.nodes), h=np.sin(3 * xg.nodes))
    assert _rel(solve_constant(p), dense_oracle_elliptic(p)) < 1e-6


def test_solve_constant_rejects_variable(xg16, yg16):
    with pytest.raises(ValueError):
        solve_constant(EllipticProblem(xg16, yg16, 0.1, c=_sine_c(xg16)))


def test_partition_sum_of_squares():
    for n_dim, n, patches in ((1, 64, 4), (1, 32, 8), (2, 16, 4)):
        pou = PartitionOfUnity(XGrid(n_dim, n), patches)
        assert np.max(np.abs(pou.sum_of_squares() - 1)) < 1e-12
        assert len(pou) == patches ** n_dim


def test_partition_synthesis_of_localization_is_identity(rng):
    xg = XGrid(1, 64)
    pou = PartitionOfUnity(xg, 8)
    u = rng.standard_normal((64, 5))
    assert np.allclose(pou.synthesize(pou.localize(u)), u, atol=1e-13)


def test_choose_patches_respects_oscillation():
    xg = XGrid(1, 64)
    c = _sine_c(xg)
    pou = choose_patches(c, xg)
    assert len(pou) > 1
    assert max(np.ptp(c[s]) / c[s].min() for s in pou.supports) <= 0.1
    assert len(choose_patches(np.full(64, 2.0), xg)) == 1


def test_commutator_formula_matches_discrete():
    # phi is smooth but not band limited: the discrete commutator converges spectrally to the formula
    errs = []
    for n in (64, 128, 256):
        xg, yg = XGrid(1, n), YGrid(8)
        pou = PartitionOfUnity(xg, 4)
        U = np.sin(xg.nodes)[:, None] * np.linspace(1, 2, yg.size)[None, :]
        p = EllipticProblem(xg, yg, 0.1, c=_sine_c(xg))
        lhs = commutator(p, pou.phis[1], U)
        errs.append(np.max(np.abs(lhs - commutator_formula(xg, pou.phis[1], U))) / np.max(np.abs(lhs)))
    assert errs[2] < 1e-4 and errs[2] < errs[1] / 5 < errs[0] / 25


def test_constant_coefficient_one_sweep(rng):
    xg, yg = XGrid(1, 32), YGrid(16)
    p = EllipticProblem(xg, yg, 0.2, c=1.0, f=rng.standard_normal((32, yg.size)), g=1.0)
    u, rep = solve_variable(p)
    assert rep.sweeps == 1 and rep.converged
    assert np.max(np.abs(u - solve_constant(p))) < 1e-12


def test_variable_matches_oracle():
    xg, yg = XGrid(1, 64), YGrid(32)
    p = EllipticProblem(xg, yg, 0.1, c=_sine_c(xg), f=np.ones((64, yg.size)))
    u, rep = solve_variable(p)
    assert rep.converged
    assert _rel(u, dense_oracle_elliptic(p)) < 1e-6


def test_contraction_decreases_with_t():
    xg, yg = XGrid(1, 64), YGrid(32)
    rates = []
    for t in (0.2, 0.1, 0.05):
        p = EllipticProblem(xg, yg, t, c=_sine_c(xg), f=np.ones((64, yg.size)))
        rates.append(solve_variable(p, tol=1e-12)[1].contraction)
    assert rates[0] > rates[1] > rates[2]


def test_left_and_right_inverse(rng):
    xg, yg = XGrid(1, 32), YGrid(16)
    c = _sine_c(xg)
    f = rng.standard_normal((32, yg.size))
    g, h = rng.standard_normal((2, 32))
    p = EllipticProblem(xg, yg, 0.1, c=c, f=f, g=g, h=h)
    u, _ = solve_variable(p, tol=1e-11)
    assert np.max(np.abs(p.residual(u))) < 1e-8 * np.max(np.abs(f))
    assert np.allclose(u[:, 0], g) and np.allclose(dy_top(u, yg) / 0.1, h, atol=1e-8)
    # right inverse: operator output fed back reproduces u
    w = rng.standard_normal((32, yg.size))
    op = p.operator()
    Aw = np.zeros_like(w)
    Aw[:, 1:-1] = op.apply(w)
    q = EllipticProblem(xg, yg, 0.1, c=c, f=Aw, g=w[:, 0], h=dy_top(w, yg) / 0.1)
    back, _ = solve_variable(q, tol=1e-11)
    assert np.max(np.abs(back - w)) < 1e-7 * np.max(np.abs(w))


def test_uniqueness_from_two_starts(rng):
    xg, yg = XGrid(1, 32), YGrid(16)
    tol = 1e-9
    p = EllipticProblem(xg, yg, 0.1, c=_sine_c(xg), f=np.ones((32, yg.size)))
    u1, _ = solve_variable(p, tol=tol)
    u2, _ = solve_variable(p, tol=tol, w0=rng.standard_normal((32, yg.m)))
    assert np.max(np.abs(u1 - u2)) <= 10 * tol * np.max(np.abs(u1)) + 1e-12


def test_direct_and_localized_dispatch(xg16, yg16):
    p = EllipticProblem(xg16, yg16, 0.1, c=_sine_c(xg16), g=1.0)
    a = solve(p, "direct")
    b = solve(p, "localized")
    assert np.max(np.abs(a - b)) < 1e-7
    with pytest.raises(ValueError):
        solve(p, "magic")


def test_dirichlet_operator_on_constant_is_one(xg16, yg16):
    rd, _ = apply_boundary_ops(0.2, np.ones(16), np.zeros(16), 1.0, xg16, yg16, method="constant")
    assert np.allclose(rd, 1.0, atol=1e-12)


def test_neumann_operator_scales_like_t():
    xg, yg = XGrid(1, 8), YGrid(32)
    ts = np.array([0.01, 0.02, 0.04, 0.08])
    norms = [np.max(np.abs(apply_boundary_ops(t, 0.0, np.ones(8), 1.0, xg, yg)[1])) for t in ts]
    assert fit_slope(ts, norms) == pytest.approx(1.0, abs=0.05)


def test_high_mode_dirichlet_decay():
    xg, yg = XGrid(1, 32), YGrid(64)
    k, t = 8, 0.5
    rd, _ = apply_boundary_ops(t, np.cos(k * xg.nodes), 0.0, 1.0, xg, yg, method="constant")
    prof = rd[0]
    y = yg.nodes
    # cosh(z(1-y))/cosh z <= 2 exp(-z y)
    assert np.all(prof <= 2 * np.exp(-t * k * y) + 1e-3)
    assert prof[-1] < 0.05


def test_inverse_norm_scales_like_t_squared(rng):
    xg, yg = XGrid(1, 16), YGrid(16)
    f = rng.standard_normal((16, yg.size))
    ts = np.array([0.005, 0.01, 0.02, 0.04])
    norms = [np.max(np.abs(inverse_apply(t, f, _sine_c(xg), xg, yg))) for t in ts]
    assert fit_slope(ts, norms) == pytest.approx(2.0, abs=0.1)
    assert max(n / t ** 2 for n, t in zip(norms, ts)) < 10 * np.max(np.abs(f))


def test_direct_matches_oracle_with_drift(rng):
    xg, yg = XGrid(1, 16), YGrid(16)
    p = EllipticProblem(xg, yg, 0.1, c=_sine_c(xg), f=rng.standard_normal((16, yg.size)), g=1.0, kappa=1.0)
    assert _rel(solve_direct(p), dense_oracle_elliptic(p)) < 1e-9
