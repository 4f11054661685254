import numpy as np
import pytest

from onsetfbp.grids import XGrid, YGrid
from onsetfbp.parabolic import (GeneratorFamily, derivative_formula_check, evolve, solve_inhomogeneous,
                                step_homogeneous, verify_maxreg_hypotheses)
from onsetfbp.sh_spaces import HolderParams, singular_holder_norm
from onsetfbp.verify import dense_oracle_parabolic


def _family(kappa=0.0, n=8, m=8):
    xg, yg = XGrid(1, n), YGrid(m)
    return GeneratorFamily(xg, yg, 1 + 0.2 * np.sin(xg.nodes), kappa)


def test_zero_step():
    fam = _family()
    u = np.zeros((8, fam.ygrid.size))
    assert np.all(step_homogeneous(u, 0.1, 0.11, fam) == 0)


def test_step_rejects_backwards():
    fam = _family()
    with pytest.raises(ValueError):
        step_homogeneous(np.zeros((8, 10)), 0.2, 0.1, fam)


def test_unknown_scheme():
    fam = _family()
    with pytest.raises(ValueError):
        step_homogeneous(np.zeros((8, 10)), 0.1, 0.2, fam, scheme="rk4")


@pytest.mark.parametrize("kappa", [0.0, 1.0])
def test_sup_norm_non_increasing(rng, kappa):
    fam = _family(kappa)
    u = np.zeros((8, fam.ygrid.size))
    u[:, 1:-1] = rng.standard_normal((8, fam.ygrid.m))
    times = np.linspace(0.1, 0.3, 21)
    norms = np.abs(evolve(fam, times, u)).max(axis=(1, 2))
    assert np.all(np.diff(norms) <= 1e-12)


def test_x_independent_matches_fine_oracle():
    xg, yg = XGrid(1, 4), YGrid(16)
    fam = GeneratorFamily(xg, yg, 1.0)
    y = yg.nodes
    u0 = np.broadcast_to(np.sin(np.pi * y / 2), (4, yg.size)).copy()
    times = np.linspace(0.5, 0.6, 5001)
    u = evolve(fam, times, u0)[-1]
    ref = dense_oracle_parabolic(xg, yg, [0.5, 0.6], u0, 1.0)[-1]
    assert np.max(np.abs(u - ref)) < 1e-4
    assert np.allclose(u, u[:1], atol=1e-13)


def test_spectrum_in_left_half_plane():
    fam = _family(1.0)
    for t in (0.01, 0.1, 1.0):
        assert np.max(np.linalg.eigvals(fam.matrix(t)).real) < 0


def test_homogeneous_data_path_equals_evolve(rng):
    fam = _family()
    times = np.linspace(0.1, 0.2, 11)
    f = rng.standard_normal((11, 8, fam.ygrid.size))
    sol = solve_inhomogeneous(fam, times, f=f)
    ref = evolve(fam, times, np.zeros((8, fam.ygrid.size)), lambda k: f[k][..., 1:-1])
    assert np.array_equal(sol.u, ref)
    assert not np.any(sol.wD) and not np.any(sol.wN)


def test_step_ratio_guard():
    with pytest.raises(ValueError):
        solve_inhomogeneous(_family(), [0.1, 0.2], g=1.0)


@pytest.mark.parametrize("kappa", [0.0, 1.0])
def test_boundary_derivative_formulas(kappa):
    fam = _family(kappa, n=16, m=16)
    x = fam.xgrid.nodes
    errs = derivative_formula_check(fam, 0.1, 1 + 0.3 * np.cos(x), np.sin(2 * x),
                                    gdot=0.5 * np.sin(x), hdot=np.cos(x))
    assert errs["dirichlet"] < 1e-6 and errs["neumann"] < 1e-6


def _data(xg, yg):
    x = xg.nodes
    G = lambda t: 1 + 0.3 * np.cos(x) * t  # noqa: E731
    H = lambda t: 0.5 * np.sin(x) * (1 + t)  # noqa: E731
    F = lambda t: np.cos(x)[:, None] * np.ones(yg.size)[None, :] * t  # noqa: E731
    return G, H, F, 0.3 * np.cos(x), 0.5 * np.sin(x)


def _errors(kappa, scheme, ns):
    fam = _family(kappa)
    xg, yg = fam.xgrid, fam.ygrid
    G, H, F, gd, hd = _data(xg, yg)
    t0, T = 0.1, 0.2
    u0 = solve_inhomogeneous(fam, [t0, 1.01 * t0], g=G(t0), h=H(t0)).u[0]
    ref = dense_oracle_parabolic(xg, yg, [t0, T], u0, fam.c, f=F, g=G, q=lambda t: t * H(t), kappa=kappa)[-1]
    errs = []
    for n in ns:
        ts = np.linspace(t0, T, n + 1)
        sol = solve_inhomogeneous(fam, ts, f=np.array([F(t) for t in ts]), g=np.array([G(t) for t in ts]),
                                  h=np.array([H(t) for t in ts]), gdot=gd, hdot=hd, scheme=scheme)
        errs.append(np.max(np.abs(sol.u[-1] - ref)) / np.max(np.abs(ref)))
    return np.array(errs)


@pytest.mark.parametrize("kappa", [0.0, 1.0])
def test_euler_first_order_against_oracle(kappa):
    errs = _errors(kappa, "euler", (20, 40, 80))
    assert errs[-1] < 1e-3
    assert np.all(np.abs(np.log2(errs[:-1] / errs[1:]) - 1) < 0.1)


@pytest.mark.parametrize("kappa", [0.0, 1.0])
def test_trapezoid_second_order_against_oracle(kappa):
    # trapezoid is not L-stable: the stiff y-modes give a pre-asymptotic phase, so
    # the order is read off the finest pair
    errs = _errors(kappa, "trapezoid", (40, 80))
    assert errs[-1] < 1e-7
    assert np.log2(errs[0] / errs[1]) > 1.8


def test_maxreg_hypotheses():
    fam = _family(0.0, n=8, m=12)
    rep = verify_maxreg_hypotheses(fam, (0.025, 0.05, 0.1, 0.2, 0.4), n_triples=100)
    assert rep["inverse_slope"] == pytest.approx(2.0, abs=0.2)
    assert np.isfinite(rep["triple_ratio_max"]) and rep["n_triples"] >= 95
    assert rep["spectral_abscissa"] < 0


def test_equal_times_give_zero_difference():
    fam = _family()
    assert np.all(fam.matrix(0.1) - fam.matrix(0.1) == 0)


def test_maximal_regularity_surrogate_stable():
    fam = _family(0.0, n=8, m=8)
    yg = fam.ygrid
    p = HolderParams(0.5, 0.5)
    totals = []
    for n in (40, 80):
        ts = np.geomspace(0.01, 0.1, n + 1)
        f = np.broadcast_to(np.sin(np.pi * yg.nodes / 2), (n + 1, 8, yg.size))
        v = evolve(fam, ts, np.zeros((8, yg.size)), lambda k: f[k][..., 1:-1])
        vdot = np.diff(v, axis=0) / np.diff(ts)[:, None, None]
        Av = np.array([fam.apply(t, u) for t, u in zip(ts[1:], v[1:])])
        totals.append(singular_holder_norm(vdot, ts[1:], p).total + singular_holder_norm(Av, ts[1:], p).total)
    assert np.all(np.isfinite(totals)) and totals[1] <= 1.5 * totals[0]
