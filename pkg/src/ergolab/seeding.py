"""Deterministic derivation of per-stream seeds.

Parallel Monte Carlo replicas and per-index random draws must be
reproducible regardless of evaluation order.  Every substream is seeded by
``stream_seed(seed, *key)``, which XOR-folds a hash of the key parts into
the base seed with splitmix64 steps.  The same (seed, key) pair yields the
same substream on every platform and under any scheduling.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 output step; a cheap, well-mixed 64-bit hash."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _fold(h: int, v: int) -> int:
    return splitmix64(h ^ (v & _MASK64))


def stream_seed(seed: int, *key) -> int:
    """Derive a 64-bit substream seed from ``seed`` and a structured key.

    Key parts may be ints, strings, or flat tuples/lists of ints (e.g. a
    multi-index).  Distinct keys give independent-looking streams.
    """
    h = splitmix64(seed & _MASK64)
    for part in key:
        if isinstance(part, str):
            h = _fold(h, len(part))
            for b in part.encode("utf-8"):
                h = _fold(h, b)
        elif isinstance(part, (tuple, list)):
            h = _fold(h, len(part))
            for v in part:
                h = _fold(h, int(v))
        else:
            h = _fold(h, int(part))
    return h


def rng_for(seed: int, *key) -> np.random.Generator:
    """A fresh PCG64 generator for the given substream."""
    return np.random.default_rng(stream_seed(seed, *key))
