"""Seed-stream helpers for reproducible, parallel-safe random number generation.

Every stochastic routine in the library takes either an integer seed or a
ready ``numpy.random.Generator``.  Experiment code derives independent
streams from ``(master_seed, *stream_ids)`` so that results never depend on
execution order or worker count.
"""

from __future__ import annotations

import zlib

import numpy as np


def as_rng(seed_or_rng) -> np.random.Generator:
    """Return a Generator, passing one through untouched."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key)
    return zlib.crc32(str(key).encode("utf-8"))


def rng_stream(master_seed: int, *stream_ids) -> np.random.Generator:
    """Derive an independent generator from a master seed and stream ids.

    Stream ids may be ints or strings (strings are hashed); the same tuple
    always yields the same stream, and distinct tuples yield statistically
    independent streams.
    """
    entropy = [int(master_seed)] + [_key_to_int(k) for k in stream_ids]
    return np.random.default_rng(np.random.SeedSequence(entropy))
