import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from onsetfbp.sh_spaces import (HolderParams, holder_seminorm, plain_norm, product_inequality_check,
                                singular_holder_norm, weighted_norm)

P5 = HolderParams(0.5)


def _brute(vals, t, beta):
    best = 0.0
    for i in range(len(t)):
        for j in range(i):
            best = max(best, np.max(np.abs(vals[i] - vals[j])) / (t[i] - t[j]) ** beta)
    return best


def test_params_validation():
    with pytest.raises(ValueError):
        HolderParams(1.0)
    with pytest.raises(ValueError):
        HolderParams(0.5, gamma=0.3)
    assert HolderParams.lipschitz().beta == 1.0


def test_seminorm_examples():
    t = np.linspace(0, 1, 101)
    assert holder_seminorm(np.full(101, 3.0), t, P5) == 0
    assert holder_seminorm(t, t, HolderParams.lipschitz()) == pytest.approx(1.0)
    assert holder_seminorm(np.sqrt(t), t, P5) == pytest.approx(1.0)


def test_fewer_than_two_levels():
    with pytest.raises(ValueError):
        holder_seminorm(np.ones(1), np.ones(1), P5)


def test_singular_norm_examples():
    t = np.linspace(0.01, 1, 100)
    r = singular_holder_norm(np.ones(100), t, HolderParams(0.5, 0.5))
    assert r.weighted_seminorm == pytest.approx(_brute(np.sqrt(t)[:, None], t, 0.5), rel=1e-12)
    assert r.total == pytest.approx(r.sup_norm + r.weighted_seminorm)
    r = singular_holder_norm(t, t, P5)
    assert r.sup_norm == pytest.approx(1.0) and r.bounded


def test_singular_norm_flags_unbounded():
    t = np.logspace(-14, 0, 60)
    r = singular_holder_norm(t ** -0.5, t, HolderParams(0.5, 0.5))
    assert not r.bounded and r.sup_norm == np.inf


def test_singular_norm_rejects_origin():
    with pytest.raises(ValueError):
        singular_holder_norm(np.ones(3), np.array([0.0, 0.5, 1.0]), P5)


def test_report_json():
    t = np.linspace(0.1, 1, 5)
    d = singular_holder_norm(t, t, P5).to_json("s")
    assert d["quantity"] == "s" and d["total"] >= 0


times_st = st.lists(st.floats(0.01, 1), min_size=2, max_size=12, unique=True).map(sorted)


@given(times_st, st.data())
def test_weighted_seminorm_equals_brute_force(times, data):
    t = np.array(times)
    vals = data.draw(arrays(float, (t.size, 3), elements=st.floats(-10, 10)))
    r = singular_holder_norm(vals, t, HolderParams(0.5, 0.5))
    assert r.weighted_seminorm == pytest.approx(_brute(vals * np.sqrt(t)[:, None], t, 0.5), rel=1e-12, abs=1e-12)


def test_seminorm_axioms_1000_samples():
    rng = np.random.default_rng(0)
    t = np.sort(rng.uniform(0.01, 1, 12))
    for _ in range(1000):
        u, v = rng.standard_normal((2, 12, 4))
        lam = rng.uniform(-5, 5)
        beta = rng.uniform(0.05, 0.95)
        p = HolderParams(beta)
        nu, nv = holder_seminorm(u, t, p), holder_seminorm(v, t, p)
        assert holder_seminorm(lam * u, t, p) == pytest.approx(abs(lam) * nu, rel=1e-12)
        assert holder_seminorm(u + v, t, p) <= nu + nv + 1e-12
        assert holder_seminorm(u + rng.standard_normal(4), t, p) == pytest.approx(nu, rel=1e-12)


def test_weighted_norm_negative_index():
    t = np.linspace(0.1, 1, 10)
    # u = t^alpha has a bounded C^beta_{-alpha} norm: sup|t^{-alpha-beta} u| is large but finite
    assert np.isfinite(weighted_norm(t ** 0.5, t, 0.5, -0.5))


def _trial_data(rng, t, trials):
    f, g = [], []
    for _ in range(trials):
        a, b = rng.uniform(-2, 2, (2, 3))
        f.append((t - t[0])[:, None] * (a[0] + a[1] * np.cos(a[2] * t))[:, None] * np.ones(4))
        g.append((t - t[0])[:, None] * (b[0] + b[1] * np.sin(b[2] * t))[:, None] * np.ones(4))
    return np.array(f), np.array(g)


def test_unit_multiplier():
    t = np.linspace(0.01, 1, 50)
    g = np.sin(3 * t)[None, :]
    r = product_inequality_check(np.ones((1, 50)), g, t, 0.5, 0.5, maps=(1,))
    unit = weighted_norm(np.ones(50), t, 0.5, 0.5)
    assert r[1] * unit == pytest.approx(1.0, rel=1e-12)


def test_zero_trials_skipped():
    t = np.linspace(0.01, 1, 10)
    r = product_inequality_check(np.zeros((3, 10)), np.zeros((3, 10)), t, 0.5, 0.5)
    assert all(v == 0 for v in r.values())


def test_beta_above_alpha_rejected():
    t = np.linspace(0.01, 1, 10)
    with pytest.raises(ValueError):
        product_inequality_check(np.ones((1, 10)), np.ones((1, 10)), t, 0.3, 0.6)


def test_product_ratios_stable_under_refinement():
    ratios = []
    for n in (25, 100):
        t = np.linspace(0.01, 1, n)
        f, g = _trial_data(np.random.default_rng(3), t, 100)
        ratios.append(product_inequality_check(f, g, t, 0.6, 0.4))
    for k in (1, 2, 3, 4):
        assert 0 < ratios[1][k] <= 2 * ratios[0][k]


def test_plain_norm():
    t = np.linspace(0, 1, 11)
    assert plain_norm(t, t, 0.5) == pytest.approx(1 + 1.0)
