"""Statistical helpers: trend tests, percentiles, audit sample points."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .seeding import rng_for

_EXACT_LIMIT = 8


def mann_kendall_score(values) -> int:
    """S = sum over i < j of sign(x_j - x_i)."""
    x = np.asarray(values, dtype=float)
    s = 0
    for i in range(len(x) - 1):
        s += int(np.sum(np.sign(x[i + 1 :] - x[i])))
    return s


def mann_kendall_increasing(values) -> tuple[int, float]:
    """One-sided Mann-Kendall test against an increasing trend.

    Returns (S, p) with p = P(S_perm >= S_obs) under random ordering.  The
    null distribution is exact (all permutations) for n <= 8 and the normal
    approximation with tie correction and continuity correction beyond.
    """
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n < 2:
        return 0, 1.0
    s_obs = mann_kendall_score(x)
    if n <= _EXACT_LIMIT:
        count = 0
        total = 0
        for perm in itertools.permutations(x):
            total += 1
            if mann_kendall_score(perm) >= s_obs:
                count += 1
        return s_obs, count / total
    _, tie_counts = np.unique(x, return_counts=True)
    var = (n * (n - 1) * (2 * n + 5) - np.sum(tie_counts * (tie_counts - 1) * (2 * tie_counts + 5))) / 18.0
    if var <= 0:
        return s_obs, 1.0
    z = (s_obs - 1) / math.sqrt(var) if s_obs > 0 else (s_obs + 1) / math.sqrt(var) if s_obs < 0 else 0.0
    p = 0.5 * math.erfc(z / math.sqrt(2.0))
    return s_obs, p


def percentile(data, q: float) -> float:
    """Linear-interpolation percentile (numpy default)."""
    return float(np.percentile(np.asarray(data, dtype=float), q))


def sample_points(d: int, seed: int = 0, n_deterministic: int = 64, n_random: int = 64) -> np.ndarray:
    """Fixed, auditable torus sample: an equispaced lattice plus seeded draws.

    Deterministic points use the unit grid on axis 0 and golden-ratio offsets
    on further axes, so the set is identical on every run with the same seed.
    """
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    idx = np.arange(n_deterministic, dtype=float)
    det = np.empty((n_deterministic, d))
    det[:, 0] = idx / max(n_deterministic, 1)
    for ax in range(1, d):
        det[:, ax] = np.mod(idx * golden * (ax + 1), 1.0)
    rnd = rng_for(seed, "sample-points").random((n_random, d))
    return np.vstack([det, rnd])
