"""
Seed mixing utilities.

Per-task randomness is derived, never drawn from shared state: a 64-bit
splitmix finaliser folds a global seed and any number of integer keys into
one seed, which then seeds a PCG64 generator. The constants are the
published splitmix64 ones:

    z += 0x9E3779B97F4A7C15
    z  = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z  = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z  =  z ^ (z >> 31)
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(value: int) -> int:
    """One splitmix64 step over *value* (taken modulo 2**64)."""
    z = (value + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix_seed(seed: int, *keys: int) -> int:
    """Fold *keys* into *seed*; order-sensitive and process-independent."""
    state = splitmix64(seed & _MASK64)
    for key in keys:
        state = splitmix64(state ^ (key & _MASK64))
    return state


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator whose stream depends only on ``(seed, *keys)``."""
    return np.random.Generator(np.random.PCG64(mix_seed(seed, *keys)))
