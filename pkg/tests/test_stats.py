import numpy as np
import pytest

from ergolab.stats import mann_kendall_increasing, mann_kendall_score, percentile, sample_points


def test_mann_kendall_score():
    assert mann_kendall_score([1.0, 2.0, 3.0, 4.0]) == 6
    assert mann_kendall_score([4.0, 3.0, 2.0, 1.0]) == -6
    assert mann_kendall_score([1.0, 1.0, 1.0]) == 0


def test_mann_kendall_exact_small_sample():
    # a strictly increasing 4-sample is the single most extreme ordering
    s, p = mann_kendall_increasing([1.0, 2.0, 3.0, 4.0])
    assert s == 6
    assert p == pytest.approx(1.0 / 24.0)
    s, p = mann_kendall_increasing([4.0, 1.0, 3.0, 2.0])
    assert p > 0.05
    _, p_dec = mann_kendall_increasing([4.0, 3.0, 2.0, 1.0])
    assert p_dec == pytest.approx(1.0)


def test_mann_kendall_normal_approximation():
    rng = np.random.default_rng(1)
    xs = np.arange(30) + rng.normal(scale=0.01, size=30)
    _, p = mann_kendall_increasing(xs)
    assert p < 0.001
    _, p_flat = mann_kendall_increasing(rng.normal(size=30))
    assert p_flat > 0.05


def test_percentile_linear_interpolation():
    assert percentile([0.0, 1.0, 2.0, 3.0], 50) == pytest.approx(1.5)
    assert percentile([5.0], 95) == 5.0


def test_sample_points_fixed_and_reproducible():
    a = sample_points(1, seed=0)
    b = sample_points(1, seed=0)
    assert a.shape == (128, 1)
    assert np.array_equal(a, b)
    c = sample_points(2, seed=3, n_deterministic=16, n_random=8)
    assert c.shape == (24, 2)
    assert np.all((c >= 0) & (c < 1))
    # deterministic half does not depend on the seed
    d = sample_points(1, seed=99)
    assert np.array_equal(a[:64], d[:64])
