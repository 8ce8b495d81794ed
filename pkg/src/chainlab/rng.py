"""Reproducible random streams.

All randomness in the package flows through numpy's Philox bit generator, a
counter-based 64-bit generator.  A stream is addressed by a master seed plus
an integer path (replicate index, sub-stream index, ...).  The path is folded
into the second Philox key word with splitmix64, so

    stream(seed, r)

is bit-stable across runs and independent of the order in which replicates
are drawn.  Distinct paths give statistically independent Philox streams.
"""

from __future__ import annotations

import numpy as np

_U64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 scramble step (Steele/Lea/Flood constants)."""
    x = (x + 0x9E3779B97F4A7C15) & _U64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _U64
    return x ^ (x >> 31)


def derive_stream_key(master_seed: int, *path: int) -> tuple[int, int]:
    """Fold (master_seed, path...) into a 128-bit Philox key."""
    lo = master_seed & _U64
    hi = 0
    for p in path:
        hi = splitmix64(hi ^ (p & _U64))
    return lo, hi


def stream(master_seed: int, *path: int) -> np.random.Generator:
    """Generator for the sub-stream addressed by (master_seed, *path)."""
    lo, hi = derive_stream_key(master_seed, *path)
    return np.random.Generator(np.random.Philox(key=np.array([lo, hi], dtype=np.uint64)))
