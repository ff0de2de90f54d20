"""Seeded random streams for replicated experiments."""

from __future__ import annotations

import numpy as np


def child_rng(base_seed: int, *key: int) -> np.random.Generator:
    """Generator for replicate ``key`` of a sweep seeded with ``base_seed``.

    The stream depends only on ``(base_seed, key)``, so replicates can run in
    any order or in parallel and still reproduce.
    """
    ss = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def as_rng(rng: np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
