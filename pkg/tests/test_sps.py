import numpy as np
import pytest
from scipy.stats import chisquare

from moeadsps.sps import (
    SpsHistory,
    select,
    select_all,
    select_dra,
    select_rnd,
    update_utilities,
)


def test_select_all():
    assert list(select_all(5)) == [0, 1, 2, 3, 4]
    assert list(select_all(1)) == [0]
    assert np.array_equal(select_all(7), select_all(7))


def test_rnd_full_lambda_is_permutation(rng):
    assert sorted(select_rnd(20, 20, [0, 19], rng)) == list(range(20))


def test_rnd_contains_boundaries(rng):
    out = select_rnd(500, 5, [0, 499], rng)
    assert len(out) == 5 == len(set(out))
    assert {0, 499} <= set(out)


def test_rnd_boundaries_every_generation(rng):
    for g in range(10_000):
        assert sorted(select_rnd(10, 2, [0, 9], rng, generation=g)) == [0, 9]


def test_lambda_below_boundary_count_rotates(rng):
    picks = [int(select_rnd(30, 1, [0, 29, 14], rng, generation=g)[0]) for g in range(6)]
    assert picks == [0, 29, 14, 0, 29, 14]
    pairs = [tuple(select_rnd(30, 2, [0, 29, 14], rng, generation=g)) for g in range(3)]
    assert pairs == [(0, 29), (14, 0), (29, 14)]


def test_rnd_marginal_probability():
    rng = np.random.default_rng(1)
    mu, lam, boundary = 30, 6, np.array([0, 29])
    counts = np.zeros(mu)
    n = 20_000
    for _ in range(n):
        counts[select_rnd(mu, lam, boundary, rng)] += 1
    p = (lam - 2) / (mu - 2)
    sigma = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts[1:29] - n * p) < 4 * sigma)
    assert counts[0] == counts[29] == n


@pytest.mark.parametrize("fn", ["rnd", "dra"])
def test_lambda_out_of_range(fn, rng):
    hist = SpsHistory.start(np.ones(10))
    with pytest.raises(ValueError):
        select(fn, 10, 0, [0, 9], rng, hist)
    with pytest.raises(ValueError):
        select(fn, 10, 11, [0, 9], rng, hist)


def test_unknown_strategy(rng):
    with pytest.raises(ValueError):
        select("best", 10, 2, [0, 9], rng)
    with pytest.raises(ValueError):
        select("dra", 10, 2, [0, 9], rng)


def test_dra_outputs_distinct(rng):
    hist = SpsHistory.start(rng.random(40))
    hist.utilities[:] = rng.random(40)
    for lam in (1, 2, 3, 15, 40):
        out = select_dra(hist, 40, lam, [0, 39], rng)
        assert len(out) == lam == len(set(out))
        assert np.all((out >= 0) & (out < 40))
    assert sorted(select_dra(hist, 40, 40, [0, 39], rng)) == list(range(40))


def test_dra_equal_utilities_uniform():
    rng = np.random.default_rng(3)
    hist = SpsHistory.start(np.ones(20))
    counts = np.zeros(20)
    for _ in range(10_000):
        counts[select_dra(hist, 20, 5, [0, 19], rng)] += 1
    assert chisquare(counts[1:19]).pvalue > 0.01


def test_dra_prefers_high_utility():
    rng = np.random.default_rng(4)
    mu = 50
    hist = SpsHistory.start(np.ones(mu))
    hist.utilities[:] = 0.1
    hist.utilities[17] = 1.0
    hits = sum(17 in select_dra(hist, mu, 3, [0, 49], rng) for _ in range(10_000))
    # selected exactly when it is one of the 10 tournament candidates
    p = 10 / (mu - 2)
    assert abs(hits / 10_000 - p) < 4 * np.sqrt(p * (1 - p) / 10_000)


def test_dra_small_pool_takes_best():
    rng = np.random.default_rng(0)
    hist = SpsHistory.start(np.ones(6))
    hist.utilities[:] = [1, 0.2, 0.9, 0.3, 0.4, 1]
    for _ in range(50):
        assert sorted(select_dra(hist, 6, 3, [0, 5], rng)) == [0, 2, 5]


def test_utilities_no_progress_decay():
    hist = SpsHistory.start([0.5, 0.2], update_interval=1)
    new = update_utilities(hist, [0.5, 0.2])
    np.testing.assert_allclose(new.utilities, [0.95, 0.95])
    assert new.generation == 1 and hist.generation == 0
    np.testing.assert_array_equal(hist.utilities, [1, 1])


def test_utilities_threshold_boundary():
    # (1000 - 999) / 1000 is exactly the threshold in binary floating point
    hist = SpsHistory.start([1000.0], update_interval=1)
    hist.utilities[:] = 0.5
    new = update_utilities(hist, [999.0])
    assert new.utilities[0] == pytest.approx(0.5, rel=1e-9)


def test_utilities_improvement_resets():
    hist = SpsHistory.start([1.0, 1.0], update_interval=1)
    g = np.array([1.0, 1.0])
    for _ in range(5):
        hist.utilities[:] = 0.3
        g = g * 0.99
        hist = update_utilities(hist, [g[0], 1.0])
        assert hist.utilities[0] == 1.0
        assert hist.utilities[1] == pytest.approx(0.3 * 0.95)


def test_utilities_partial_progress_interpolates():
    hist = SpsHistory.start([1.0], update_interval=1)
    new = update_utilities(hist, [0.9995])
    assert new.utilities[0] == pytest.approx(0.975)


def test_utilities_only_on_window_boundary():
    hist = SpsHistory.start([1.0])
    for gen in range(1, 101):
        hist = update_utilities(hist, [1.0])
        expected = 0.95 ** (gen // 50)
        assert hist.utilities[0] == pytest.approx(expected)


def test_utilities_stay_positive_and_bounded():
    hist = SpsHistory.start([1.0, 0.0, 2.0], update_interval=1)
    for _ in range(20_000):
        hist = update_utilities(hist, [1.0, 0.0, 3.0])
    assert np.all(hist.utilities > 0) and np.all(hist.utilities <= 1)
