"""Deterministic random substreams.

Every replicate draws from a stream keyed by ``(master seed, experiment key,
replicate index)`` so results do not depend on scheduling or worker count.
"""

from __future__ import annotations

import zlib

import numpy as np

SeedLike = int | np.random.SeedSequence | np.random.Generator | None


def key_of(label: str) -> int:
    """Stable 32-bit integer for a textual experiment key."""
    return zlib.crc32(label.encode("utf-8"))


def substream(seed: int, *keys: int | str) -> np.random.SeedSequence:
    ints = tuple(key_of(k) if isinstance(k, str) else int(k) for k in keys)
    return np.random.SeedSequence(int(seed), spawn_key=ints)


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.default_rng(seed)


def children(seed: SeedLike, n: int) -> list[np.random.SeedSequence]:
    """``n`` independent child sequences of ``seed``; deterministic."""
    if isinstance(seed, np.random.Generator):
        return [np.random.SeedSequence(int(x)) for x in seed.integers(0, 2**63, n)]
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(int(seed))
    return [
        np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (i,), pool_size=ss.pool_size)
        for i in range(n)
    ]
