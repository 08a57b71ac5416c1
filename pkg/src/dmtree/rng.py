"""Deterministic random streams.

Every random draw in the package comes from numpy's PCG64 generator seeded
by a :class:`numpy.random.SeedSequence` built from the run's single seed
plus a spawn key naming the purpose and position of the stream, e.g.
``(MEMBER, i)`` for ensemble member ``i`` or ``(NOISE, trial, attribute)``.
SeedSequence hashes the pair, so streams are independent of each other and
of the order in which they are created, which keeps parallel runs identical
to sequential ones.
"""

from __future__ import annotations

import numpy as np

MEMBER = 1
NOISE_SELECT = 2
NOISE_VALUES = 3
CV_FOLDS = 4


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


def uniform_open_closed(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform deviates on ``(0, 1]``."""
    return 1.0 - rng.random(size)
