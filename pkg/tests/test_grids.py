import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from onsetfbp.grids import (StripField, SurfaceField, TimeGrid, XGrid, YGrid, make_grids,
                            to_fixed, to_physical)
from onsetfbp.ops import ixfft, xfft


class Cfg:
    n_dim, nx, period, m, t0, T, N, q = 1, 64, 2 * np.pi, 32, 1e-3, 0.5, 100, 2.0


def test_make_grids_wavenumbers():
    xg, yg, tg = make_grids(Cfg)
    k = np.sort(xg.wavenumbers)
    assert np.allclose(k, np.arange(-32, 32))
    assert tg.levels[0] == pytest.approx(1e-3) and tg.levels[-1] == pytest.approx(0.5)


def test_uniform_levels_for_q1():
    tg = TimeGrid(0.01, 1.0, 10, 1.0)
    assert np.allclose(np.diff(tg.levels[1:]), 0.1)


def test_y_spacing():
    yg = YGrid(32)
    assert yg.h == pytest.approx(1 / 33)
    assert yg.nodes[0] == 0.0 and yg.nodes[-1] == 1.0
    assert yg.size == 34
    assert np.all(np.diff(yg.nodes) > 0)


@pytest.mark.parametrize("n", [3, 12, 0])
def test_non_power_of_two_rejected(n):
    with pytest.raises(ValueError):
        XGrid(1, n)


def test_t0_must_precede_T():
    with pytest.raises(ValueError):
        TimeGrid(0.5, 0.5, 10)


def test_levels_monotone_and_bounded_away_from_zero():
    tg = TimeGrid(1e-3, 0.1, 20, 2.0)
    t = tg.levels
    assert t[0] == 1e-3 and np.all(np.diff(t) > 1e-9 * t[1:])


@pytest.mark.parametrize("ratio", [0.2, 0.1, 0.05])
def test_step_ratio_refinement(ratio):
    tg = TimeGrid(1e-3, 0.1, 20, 2.0).with_step_ratio(ratio)
    assert tg.max_step_ratio() <= ratio * (1 + 1e-9)
    # no level may collapse onto its neighbour
    assert np.min(np.diff(tg.levels) / tg.levels[1:]) > 1e-3


@given(arrays(float, (16, 5), elements=st.floats(-1e3, 1e3)))
def test_fft_round_trip(a):
    xg = XGrid(1, 16)
    back = ixfft(xfft(a, xg), xg)
    assert np.max(np.abs(back - a)) <= 1e-12 * max(1.0, np.max(np.abs(a)))


def test_fft_round_trip_2d(rng):
    xg = XGrid(2, 8)
    a = rng.standard_normal((8, 8, 3))
    assert np.allclose(ixfft(xfft(a, xg), xg), a, atol=1e-13)


def test_field_containers_validate():
    xg, yg = XGrid(1, 8), YGrid(4)
    with pytest.raises(ValueError):
        StripField(np.zeros((2, 8, 5)), xg, yg, [0.1, 0.2])
    bad = np.zeros((2, 8, 6))
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        StripField(bad, xg, yg, [0.1, 0.2])
    f = SurfaceField(np.ones((2, 8)), np.ones((2, 8)), xg, [0.1, 0.2])
    assert not f.values.flags.writeable


def test_to_physical_unit_thickness_is_identity():
    yg = YGrid(8)
    u = np.random.default_rng(0).random((4, yg.size))
    Y, vals = to_physical(u, np.ones(4), yg)
    assert np.allclose(Y, yg.nodes) and np.allclose(vals, u)


def test_to_physical_front_height():
    xg, yg = XGrid(1, 8), YGrid(8)
    g = 1 + 0.1 * np.sin(xg.nodes)
    t = 0.05
    Y, _ = to_physical(np.zeros((8, yg.size)), t * g, yg)
    assert np.allclose(Y[:, -1], t * g)


def test_physical_round_trip():
    yg = YGrid(32)
    s = np.array([0.5, 1.0, 2.0])
    Yf = np.linspace(0, 1, 200)[None, :] * s[:, None]
    u_phys = np.cos(Yf / s[:, None] * 2)
    fixed = to_fixed(u_phys, Yf, s, yg)
    Yq = np.linspace(0, 1, 50)[None, :] * s[:, None]
    _, back = to_physical(fixed, s, yg, Yq)
    assert np.max(np.abs(back - np.cos(Yq / s[:, None] * 2))) < 1e-5


def test_to_physical_rejects_nonpositive_front():
    with pytest.raises(ValueError):
        to_physical(np.zeros((2, 6)), np.array([1.0, 0.0]), YGrid(4))
