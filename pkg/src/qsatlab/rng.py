"""Seed derivation shared by every random stream in the package.

All sub-seeds come from a splitmix64 chain so that a stream is a pure
function of ``(seed, key, key, ...)`` and never of call order or of the
worker that happens to run it.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One splitmix64 output step applied to state ``x``."""
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Fold integer keys into ``seed``: s <- splitmix64(s ^ splitmix64(key))."""
    s = splitmix64(int(seed) & MASK64)
    for key in keys:
        s = splitmix64(s ^ splitmix64(int(key) & MASK64))
    return s


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *keys)))


def fresh_seed() -> int:
    """A 63-bit seed from OS entropy (kept positive for JSON/CSV friendliness)."""
    return int(np.random.SeedSequence().entropy) & ((1 << 63) - 1)
