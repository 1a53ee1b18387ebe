"""Deterministic random-stream derivation.

All randomness descends from one top-level seed through the tree

    seed -> module label -> job label(s) -> stream

Each path is hashed into a SeedSequence feeding a counter-based Philox
generator, so streams are independent and reproducible regardless of
scheduling or thread count.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["substream", "spawn_key"]


def spawn_key(*path) -> tuple[int, ...]:
    """Stable integer key for a derivation path of strings/ints."""
    key = []
    for part in path:
        if isinstance(part, (int, np.integer)):
            key.append(int(part) & 0xFFFFFFFF)
        else:
            key.append(zlib.crc32(str(part).encode("utf-8")))
    return tuple(key)


def substream(seed: int, *path) -> np.random.Generator:
    """Philox generator for the given derivation path under `seed`."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key(*path))
    return np.random.Generator(np.random.Philox(ss))
