import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from moeadsps.variation import _draw_cuts, bit_flip_mutation, mating_select, two_point_crossover

bits = st.integers(1, 64).flatmap(
    lambda n: st.tuples(*(st.lists(st.integers(0, 1), min_size=n, max_size=n) for _ in range(2)))
)


def test_mating_degenerate_neighborhood(rng):
    pop = rng.integers(0, 2, (3, 8), dtype=np.uint8)
    a, b = mating_select(1, np.array([1]), pop, rng)
    assert np.array_equal(a, pop[1]) and np.array_equal(b, pop[1])


def test_mating_pair_frequencies(rng):
    pop = np.arange(4, dtype=np.uint8)[:, None].repeat(3, axis=1)
    seconds = [mating_select(2, np.array([2, 0]), pop, rng)[1][0] for _ in range(10_000)]
    share = np.mean(np.array(seconds) == 2)
    # 4 standard deviations of a fair coin over 10^4 draws
    assert abs(share - 0.5) < 4 * 0.005
    assert set(seconds) == {0, 2}


def test_mating_whole_population(rng):
    pop = np.arange(5, dtype=np.uint8)[:, None]
    seconds = [int(mating_select(0, np.arange(5), pop, rng)[1][0]) for _ in range(5000)]
    assert chisquare(np.bincount(seconds, minlength=5)).pvalue > 0.001


def test_mating_empty_neighborhood(rng):
    with pytest.raises(ValueError):
        mating_select(0, np.array([], dtype=np.int64), np.zeros((2, 3), np.uint8), rng)


def test_crossover_identical_parents(rng):
    p = rng.integers(0, 2, 50, dtype=np.uint8)
    for _ in range(20):
        assert np.array_equal(two_point_crossover(p, p, rng), p)


@settings(max_examples=100)
@given(bits, st.integers(0, 2**32))
def test_crossover_mask_property(parents, seed):
    p1, p2 = (np.array(p, dtype=np.uint8) for p in parents)
    child = two_point_crossover(p1, p2, np.random.default_rng(seed))
    assert child.shape == p1.shape
    assert np.all((child == p1) | (child == p2))


def test_crossover_child_is_one_segment_swap(rng):
    p1 = np.zeros(12, dtype=np.uint8)
    p2 = np.ones(12, dtype=np.uint8)
    for _ in range(500):
        child = two_point_crossover(p1, p2, rng)
        # ones (or zeros) of the child form a single contiguous run, possibly wrapping
        changes = np.count_nonzero(np.diff(child))
        assert changes <= 2


def test_cut_points_uniform_over_pairs():
    n = 6
    rng = np.random.default_rng(5)
    pairs = [(a, b) for b in range(n + 1) for a in range(b + 1)]
    index = {p: k for k, p in enumerate(pairs)}
    counts = np.zeros(len(pairs))
    for _ in range(28_000):
        a, b = _draw_cuts(n, rng)
        assert 0 <= a <= b <= n
        counts[index[(int(a), int(b))]] += 1
    assert chisquare(counts).pvalue > 0.001


def test_crossover_each_child_half_the_time():
    rng = np.random.default_rng(9)
    p1 = np.zeros(10, dtype=np.uint8)
    p2 = np.ones(10, dtype=np.uint8)
    # whatever the cut points, the fair choice of child gives bit 0 from p2 half the time
    first = np.array([two_point_crossover(p1, p2, rng)[0] for _ in range(20_000)])
    assert abs(first.mean() - 0.5) < 4 * np.sqrt(0.25 / 20_000)


def test_crossover_length_mismatch(rng):
    with pytest.raises(ValueError):
        two_point_crossover(np.zeros(3, np.uint8), np.zeros(4, np.uint8), rng)


def test_mutation_extreme_rates(rng):
    x = rng.integers(0, 2, 40, dtype=np.uint8)
    assert np.array_equal(bit_flip_mutation(x, 0.0, rng), x)
    assert np.array_equal(bit_flip_mutation(x, 1.0, rng), 1 - x)
    with pytest.raises(ValueError):
        bit_flip_mutation(x, 1.5, rng)


def test_mutation_leaves_input_untouched(rng):
    x = np.zeros(10, dtype=np.uint8)
    bit_flip_mutation(x, 1.0, rng)
    assert not x.any()


def test_mutation_mean_hamming_distance():
    rng = np.random.default_rng(21)
    x = rng.integers(0, 2, 100, dtype=np.uint8)
    d = [np.count_nonzero(bit_flip_mutation(x, 0.01, rng) != x) for _ in range(10_000)]
    assert 0.8 <= np.mean(d) <= 1.2


def test_operators_deterministic_under_seed():
    def draw(seed):
        rng = np.random.default_rng(seed)
        p1 = rng.integers(0, 2, 30, dtype=np.uint8)
        p2 = rng.integers(0, 2, 30, dtype=np.uint8)
        return bit_flip_mutation(two_point_crossover(p1, p2, rng), 0.1, rng)

    assert np.array_equal(draw(4), draw(4))
