"""Deterministic derivation of independent random substreams.

Every random draw in the simulator goes through a generator built here from an
explicit integer seed plus a path of stream labels, so that splits, client
sampling, batch shuffles and noise draws are reproducible and independent of
each other (and of any execution order).
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(seed: int, *path: int | str) -> np.random.Generator:
    """Generator for the substream identified by ``(seed, *path)``.

    String path components are folded to integers byte-wise; distinct paths
    yield statistically independent streams for the same seed.
    """
    words = [int(seed) & _MASK64]
    for part in path:
        if isinstance(part, str):
            words.append(int.from_bytes(part.encode("utf-8"), "little"))
        else:
            words.append(int(part) & _MASK64)
    return np.random.default_rng(np.random.SeedSequence(words))


def derive_seed(seed: int, *path: int | str) -> int:
    """Stable integer seed for the substream at ``(seed, *path)``."""
    return int(substream(seed, *path).integers(0, 1 << 63))
