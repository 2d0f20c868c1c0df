"""Deterministic counter-based random streams.

Every stochastic routine derives its generator from ``(seed, *tags)`` via a
Philox counter-based bit generator, so results are bit-identical regardless
of execution order or worker count.  Tags are small integers identifying the
consumer (purpose, batch index, ...).
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# purpose tags, one per stochastic consumer
TAG_PATHS = 1
TAG_SERIES = 2
TAG_CONSERVATION = 3
TAG_PROBES = 4
TAG_TRIPLES = 5
TAG_GREEN_CHAIN = 6
TAG_SAMPLING = 7
TAG_COMPOSE = 8


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, *tags: int) -> np.ndarray:
    """Fold (seed, tags) into a 128-bit Philox key."""
    h = _splitmix64(seed & _MASK64)
    for t in tags:
        h = _splitmix64(h ^ (int(t) & _MASK64))
    return np.array([seed & _MASK64, h], dtype=np.uint64)


def stream(seed: int, *tags: int) -> np.random.Generator:
    """Independent generator for the given (seed, tags) address."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *tags)))
