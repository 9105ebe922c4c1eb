"""Seeded randomness.

All experiment randomness flows through ``rng_stream``, which wraps numpy's
PCG64 generator behind an explicit 64-bit ``Seed``. Identical seeds reproduce
identical streams bit for bit. Streams are single-owner: never share one
generator across concurrent tasks; derive a child seed per task instead
(``derive_seed``), which hashes the parent seed together with integer keys
through ``numpy.random.SeedSequence``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

_MAX_SEED = 2**64


@dataclass(frozen=True)
class Seed:
    """A 64-bit unsigned experiment seed."""

    value: int

    def __post_init__(self):
        if not isinstance(self.value, (int, np.integer)):
            raise InvalidInputError(f"seed must be an integer, got {type(self.value).__name__}")
        if not 0 <= int(self.value) < _MAX_SEED:
            raise InvalidInputError(f"seed must lie in [0, 2^64), got {self.value}")
        object.__setattr__(self, "value", int(self.value))


def rng_stream(seed: Seed | int) -> np.random.Generator:
    """Deterministic generator of uniform/gaussian variates for a seed."""
    if not isinstance(seed, Seed):
        seed = Seed(seed)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed.value)))


def derive_seed(seed: Seed | int, *keys: int) -> Seed:
    """Child seed obtained by hashing ``(seed, *keys)``; stable across runs."""
    if not isinstance(seed, Seed):
        seed = Seed(seed)
    entropy = (seed.value,) + tuple(int(k) for k in keys)
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return Seed(int(state[0]) | (int(state[1]) << 32))
