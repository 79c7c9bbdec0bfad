
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import kstest

from percolab import rng
from percolab.parallel import chunk_ranges, map_replicates
from percolab.stats import decreasing_at, estimate, fit_power_law, wilson


@given(st.integers(0, 2 ** 62), st.integers(0, 10 ** 9), st.integers(0, 10 ** 6))
def test_uniform_in_unit_interval(master, rep, counter):
    key = rng.stream_key(master, rep)
    u = rng.uniform(key, counter)
    assert 0.0 <= u < 1.0
    assert u == rng.uniform(key, counter)


def test_uniform_distribution():
    key = rng.stream_key(123, 4)
    u = rng.uniform_array(key, np.arange(20000, dtype=np.int64))
    assert kstest(u, "uniform").pvalue > 1e-3


def test_streams_differ():
    keys = {int(rng.stream_key(1, r, g, s)) for r in range(4) for g in range(3) for s in range(3)}
    assert len(keys) == 36


def test_seed_range():
    with pytest.raises(ValueError):
        rng.check_seed(-1)
    with pytest.raises(ValueError):
        rng.check_seed(2 ** 63)


@given(st.integers(0, 500), st.integers(1, 500))
def test_wilson_contains_estimate(hits, n):
    hits = min(hits, n)
    lo, hi = wilson(hits, n)
    assert 0.0 <= lo <= hits / n <= hi <= 1.0


def test_estimate_sigma_floor():
    assert estimate(0, 100).sigma == pytest.approx(0.01)
    assert estimate(50, 100).sigma == pytest.approx(0.05)


def test_decreasing_at():
    assert decreasing_at(estimate(600, 1000), estimate(500, 1000))
    assert not decreasing_at(estimate(510, 1000), estimate(500, 1000))


def test_power_law_recovers_slope():
    ratios = np.array([1 / 8, 1 / 16, 1 / 32, 1 / 64])
    probs = 0.9 * ratios ** 1.25
    slope, (lo, hi) = fit_power_law(ratios, probs, hits=(probs * 10 ** 6).astype(int), ns=[10 ** 6] * 4)
    assert slope == pytest.approx(1.25, abs=1e-9)
    assert lo < 1.25 < hi
    with pytest.warns(UserWarning):
        fit_power_law([0.5, 0.25, 0.125], [0.5, 0.25, 0.0])


@given(st.integers(0, 100), st.integers(1, 17), st.integers(1, 4))
def test_map_replicates_order(n, chunk, threads):
    out = map_replicates(lambda a, b: np.arange(a, b), n, threads, chunk)
    assert out.tolist() == list(range(n))
    assert sum(b - a for a, b in chunk_ranges(n, chunk)) == n
