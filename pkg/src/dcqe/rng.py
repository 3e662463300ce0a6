"""Seed derivation and random streams.

Per-unit seeds: ``unit_seed(master, i)`` is the (i+1)-th output of a
SplitMix64 generator started at ``master`` (mod 2**64), i.e.

    z = (master + (i + 1) * 0x9E3779B97F4A7C15) mod 2**64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    seed = z ^ (z >> 31)

Streams: each unit seed drives independent Philox-4x64-10 counter-based
generators (numpy's ``Philox``), keyed by the 128-bit value
``seed | stream_id << 64``.  Generation and routing use different
``stream_id`` values, so either can be replayed without the other.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

GENERATION_STREAM = 1
ROUTING_STREAM = 2


def splitmix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def unit_seed(master_seed: int, index: int) -> int:
    if index < 0:
        raise ValueError("unit index must be >= 0")
    return splitmix64(master_seed + (index + 1) * GOLDEN_GAMMA)


def stream(seed: int, stream_id: int) -> np.random.Generator:
    key = (seed & MASK64) | ((stream_id & MASK64) << 64)
    return np.random.Generator(np.random.Philox(key=key))
