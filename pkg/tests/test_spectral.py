import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dislocflow.holder import holder_seminorm
from dislocflow.spectral import (FourierState, evolve_model, hk_convergence, hk_distance, rate_fit,
                                 resolvent_bounds, resolvent_residual, resolvent_solve, weierstrass,
                                 write_rate_fit)


def random_state(seed, modes=64, decay=3.0, delta=0.0):
    rng = np.random.default_rng(seed)
    n = np.arange(modes)
    scale = 1.0 / (1.0 + n) ** decay
    return FourierState.from_coefficients(rng.normal(size=modes) * scale, rng.normal(size=modes) * scale, delta)


# ---------------------------------------------------------------- model evolution

def test_heat_limit_and_constant_mode():
    s = random_state(0)
    t = 0.3
    e = evolve_model(s, t)
    n = np.arange(64)
    assert np.array_equal(e.a, s.a0 * np.exp(-n ** 2 * t))
    assert e.b[0] == s.b0[0]
    assert evolve_model(s.with_delta(0.5), 100.0).b[0] == s.b0[0]


def test_capped_decay_rate_for_high_modes():
    delta, t = 1e-2, 0.05
    n = np.arange(0, 2000)
    s = FourierState.from_coefficients(np.ones(n.size), np.zeros(n.size), delta)
    ratio = np.log(evolve_model(s, t).a / s.a0)
    high = n ** 2 >= 100 / delta
    assert np.all(np.abs(ratio[high] - (-t / delta)) < 0.01 * t / delta)


@given(st.integers(0, 10 ** 6), st.floats(0.0, 1.0), st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_semigroup_property_is_exact(seed, delta, t1, t2):
    s = random_state(seed, delta=delta)
    two = evolve_model(evolve_model(s, t1), t2)
    one = evolve_model(s, t1 + t2)
    assert np.array_equal(two.a, one.a) and np.array_equal(two.b, one.b)


@given(st.integers(0, 10 ** 6), st.floats(1e-3, 1.0), st.floats(0.0, 5.0))
def test_no_smoothing_at_positive_delta(seed, delta, t):
    s = random_state(seed, modes=512, decay=0.5, delta=delta)
    ratio = evolve_model(s, t).factors()
    assert np.all(ratio >= np.exp(-t / delta) * (1 - 1e-14))


def test_negative_time_is_rejected():
    with pytest.raises(ValueError):
        evolve_model(random_state(0), -1.0)
    with pytest.raises(ValueError):
        FourierState(np.zeros(3), np.zeros(4))


def test_sampling_matches_the_series():
    s = FourierState.from_coefficients([0.0, 1.0, 0.0, 0.5], [2.0, 0.0, -1.0, 0.0])
    x = 2 * np.pi * np.arange(16) / 16
    assert np.allclose(s.samples(16), 2 + np.sin(x) - np.cos(2 * x) + 0.5 * np.sin(3 * x), atol=1e-14)


# ---------------------------------------------------------------- H^k convergence

@pytest.mark.parametrize("k", [0, 1, 2])
def test_single_mode_distance_closed_form(k):
    a = np.zeros(8)
    a[5] = 1.0
    s = FourierState.from_coefficients(a, np.zeros(8))
    t = 0.02
    table = dict(hk_convergence(s, [0.0, 0.1, 0.01], t, k))
    assert table[0.0] == 0.0
    for d in (0.1, 0.01):
        want = 5 ** k * abs(np.exp(-25 * t / (1 + 25 * d)) - np.exp(-25 * t))
        assert table[d] == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_distances_shrink_with_delta(seed):
    s = random_state(seed, modes=256, decay=3.0)
    dist = [d for _, d in hk_convergence(s, [1e-1, 1e-2, 1e-3], 0.1, 2)]
    assert dist[0] > dist[1] > dist[2] > 0


def test_hk_distance_is_a_norm_of_the_difference():
    s1, s2 = random_state(1), random_state(2)
    assert hk_distance(s1, s1, 2) == 0.0
    assert hk_distance(s1, s2, 1) == pytest.approx(hk_distance(s2, s1, 1))


# ---------------------------------------------------------------- resolvent

@pytest.mark.parametrize("method", ["fd", "spectral"])
def test_resolvent_examples(method):
    n = 512
    x = 2 * np.pi * np.arange(n) / n
    c = np.full(n, 1.7)
    # the fd matrix has condition number ~ delta / h^2, hence the relative slack
    assert np.max(np.abs(resolvent_solve(c, 0.3, method=method) - c)) < 1e-12 * 1.7
    for mode in (1, 4, 9):
        f = np.cos(mode * x)
        u = resolvent_solve(f, 0.01, method=method)
        tol = 1e-13 if method == "spectral" else 1e-3 * mode ** 2
        assert np.max(np.abs(u - f / (1 + 0.01 * mode ** 2))) < tol


def test_variable_coefficient_resolvent():
    n = 256
    x = 2 * np.pi * np.arange(n) / n
    a = 1.0 + 0.5 * np.sin(x)
    b = np.cos(3 * x)
    f = weierstrass(n, 0.5, rng=np.random.default_rng(0))
    u = resolvent_solve(f, 0.05, a, b)
    assert resolvent_residual(u, f, 0.05, a, b) <= 1e-10
    assert np.max(np.abs(u)) <= np.max(np.abs(f)) + 1e-12
    with pytest.raises(ValueError, match="elliptic"):
        resolvent_solve(f, 0.05, a - 1.0)
    with pytest.raises(ValueError, match="constant"):
        resolvent_solve(f, 0.05, a, method="spectral")
    with pytest.raises(ValueError, match="delta"):
        resolvent_solve(f, 0.0)


@given(st.integers(0, 10 ** 6), st.floats(1e-4, 1.0), st.sampled_from([0.25, 0.5, 0.75]))
def test_resolvent_sup_and_holder_bounds(seed, delta, alpha):
    rng = np.random.default_rng(seed)
    f = weierstrass(1024, alpha, rng=rng) + 0.1 * rng.normal()
    umax, fmax, uh, fh = resolvent_bounds(f, delta, alpha)
    assert umax <= fmax + 1e-12
    assert uh <= fh + 1e-10


def test_rate_exponent_for_half_holder_inputs():
    deltas = np.logspace(-1, -4, 7)
    n = 4096
    x = 2 * np.pi * np.arange(n) / n
    for f in (weierstrass(n, 0.5), np.abs(np.sin(x)) ** 0.5):
        for method in ("fd", "spectral"):
            errs, slope = rate_fit(f, deltas, method=method)
            assert np.all(np.diff(errs) < 0)
            assert slope >= 0.5 / 2 - 0.1


def test_weierstrass_input_has_the_prescribed_regularity():
    f = weierstrass(4096, 0.5)
    assert np.isfinite(holder_seminorm(f, 0.5))
    # the alpha seminorm stays of order one while a stronger exponent blows up with resolution
    ratios = [holder_seminorm(weierstrass(n, 0.5, modes=n // 2), 0.9) for n in (512, 4096)]
    assert ratios[1] > 1.5 * ratios[0]


def test_rate_fit_output(tmp_path):
    deltas = [1e-1, 1e-2, 1e-3]
    errs, slope = rate_fit(weierstrass(1024, 0.5), deltas)
    path = tmp_path / "rate.csv"
    write_rate_fit(path, deltas, errs, slope)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["delta", "sup_error", "fitted_exponent"]
    assert float(rows[2][1]) == errs[1] and float(rows[1][2]) == slope
