"""Deterministic seeding utilities.

All randomness in the package flows through 64-bit unsigned seeds and
numpy's PCG64 generator. Derived seeds (per repeat, per dataset, per
detector) are produced with splitmix64, a well-known 64-bit finalizer
with full avalanche, so that derived streams are independent of each
other and of the order in which they are requested.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def check_seed(seed: int) -> int:
    """Validate that *seed* is a 64-bit unsigned integer and return it."""
    if not isinstance(seed, (int, np.integer)):
        raise ConfigError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed < (1 << 64):
        raise ConfigError(f"seed must be in [0, 2^64), got {seed}")
    return seed


def splitmix64(x: int) -> int:
    """One splitmix64 step: advance by the golden-ratio increment and mix."""
    x = (x + _GOLDEN) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def mix_seed(seed: int, *parts: int) -> int:
    """Derive a new 64-bit seed from *seed* and integer *parts*.

    Each part is folded in with a splitmix64 round, so
    ``mix_seed(s, a, b) != mix_seed(s, b, a)`` in general and derived
    seeds do not collide with the parent for any practical purpose.
    """
    state = check_seed(seed)
    for part in parts:
        state = splitmix64(state ^ (int(part) & _MASK64))
    return splitmix64(state)


def fnv1a64(text: str) -> int:
    """FNV-1a 64-bit hash of a string; stable across platforms and runs."""
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return h


def rng_from_seed(seed: int) -> np.random.Generator:
    """A PCG64 generator seeded with a validated 64-bit seed."""
    return np.random.Generator(np.random.PCG64(check_seed(seed)))
