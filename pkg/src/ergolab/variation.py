"""Variation s-norms of finite sequences.

The variation norm is the supremum of (sum_j |x_{n_j} - x_{n_{j+1}}|^s)^(1/s)
over all increasing subsequences.  ``variation_norm`` computes it exactly by
dynamic programming over path endpoints in O(N^2); ``variation_bruteforce``
enumerates every subsequence and serves as the test oracle.
"""

from __future__ import annotations

import numpy as np

from .errors import SizeError

_BRUTEFORCE_LIMIT = 20


def variation_norm(values, s: float) -> float:
    """Exact variation s-norm by dynamic programming.

    best[j] = max over i < j of best[i] + |x_j - x_i|^s, taken over paths
    ending at j; empty and singleton subsequences contribute 0.  Complex
    values are allowed (increments in modulus).
    """
    if s < 1:
        raise ValueError("variation exponent s must be >= 1")
    x = np.asarray(values, dtype=complex).ravel()
    n = x.shape[0]
    if n < 1:
        raise ValueError("sequence must be nonempty")
    if n == 1:
        return 0.0
    best = np.zeros(n)
    for j in range(1, n):
        best[j] = np.max(best[:j] + np.abs(x[j] - x[:j]) ** s)
    return float(np.max(best) ** (1.0 / s))


def variation_bruteforce(values, s: float) -> float:
    """Exhaustive maximum over all 2^N subsequences; oracle for lengths <= 20.

    Every index subset is enumerated by bitmask; rows are padded by repeating
    their last selected index, which adds zero increments.  Independent of
    the dynamic program by construction.
    """
    if s < 1:
        raise ValueError("variation exponent s must be >= 1")
    x = np.asarray(values, dtype=complex).ravel()
    n = x.shape[0]
    if n < 1:
        raise ValueError("sequence must be nonempty")
    if n > _BRUTEFORCE_LIMIT:
        raise SizeError(f"brute force enumeration limited to length {_BRUTEFORCE_LIMIT}")
    if n == 1:
        return 0.0
    best = 0.0
    positions = np.arange(n)
    chunk = 1 << 14
    for lo in range(0, 1 << n, chunk):
        masks = np.arange(lo, min(lo + chunk, 1 << n), dtype=np.int64)
        bits = ((masks[:, None] >> positions[None, :]) & 1).astype(bool)
        keep = bits.sum(axis=1) >= 2
        if not np.any(keep):
            continue
        bits = bits[keep]
        # ascending selected indices first, then a sentinel; the sentinel
        # slots are replaced by each row's last selected index
        keyed = np.where(bits, positions[None, :], n)
        ordered = np.sort(keyed, axis=1)
        last_sel = n - 1 - np.argmax(bits[:, ::-1], axis=1)
        padded = np.where(ordered >= n, last_sel[:, None], ordered)
        sums = np.sum(np.abs(np.diff(x[padded], axis=1)) ** s, axis=1)
        best = max(best, float(np.max(sums)))
    return float(best ** (1.0 / s))


def variation_block_bound(values, boundaries, s: float):
    """Full variation norm versus twice the sum of per-block norms.

    ``boundaries`` lists indices n_k (starting at 0, strictly increasing)
    where the sequence vanishes; blocks are [n_k, n_{k+1}) plus the trailing
    block.  Returns (lhs, rhs) with lhs = v(s) of the whole sequence and
    rhs = 2 * sum of block norms; lhs <= rhs always holds.
    """
    x = np.asarray(values, dtype=complex).ravel()
    n = x.shape[0]
    bnds = [int(b) for b in boundaries]
    if not bnds or bnds[0] != 0:
        raise ValueError("boundaries must start at index 0")
    if any(b2 <= b1 for b1, b2 in zip(bnds, bnds[1:])):
        raise ValueError("boundaries must be strictly increasing")
    if bnds[-1] >= n:
        raise ValueError("boundaries must lie inside the sequence")
    for b in bnds:
        if abs(x[b]) != 0.0:
            raise ValueError(f"sequence must vanish at boundary index {b}")
    lhs = variation_norm(x, s)
    edges = bnds + [n]
    rhs = 2.0 * sum(variation_norm(x[a:b], s) for a, b in zip(edges, edges[1:]))
    return lhs, rhs
