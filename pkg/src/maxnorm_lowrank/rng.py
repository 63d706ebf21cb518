"""Seeded random number generation.

All stochastic routines in this package draw from the counter-based
Philox (4x64) bit generator, seeded through ``numpy.random.SeedSequence``.
Philox is fully specified and platform-independent, so a given integer
seed reproduces the exact same stream on every machine and thread count.
Independent substreams (per attempt, per trial) are derived with
``SeedSequence.spawn``, never by incrementing seeds.
"""

from __future__ import annotations

import numpy as np

SeedLike = int | np.random.SeedSequence


def seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def generator(seed: SeedLike) -> np.random.Generator:
    """Philox generator for the given seed or seed sequence."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed)))


def split(seed: SeedLike, k: int) -> list[np.random.SeedSequence]:
    """Derive ``k`` independent child seed sequences."""
    return seed_sequence(seed).spawn(k)
