"""Deterministic, splittable random streams.

Monte Carlo work is cut into fixed-size blocks of trials.  Block ``j`` of a
run seeded with ``seed`` always draws from the stream keyed by ``(seed, j)``,
so the result does not depend on how many workers process the blocks or in
which order they finish.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator, Sequence, TypeVar

import numpy as np

BLOCK_SIZE = 1 << 14
SEED_MASK = (1 << 64) - 1

T = TypeVar("T")


def random_stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for substream ``key`` of master ``seed``."""
    if seed < 0 or seed > SEED_MASK:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def blocks(trials: int, block_size: int = BLOCK_SIZE) -> Iterator[tuple[int, int]]:
    """Yield ``(block_index, block_length)`` covering ``trials`` trials."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    j = 0
    start = 0
    while start < trials:
        n = min(block_size, trials - start)
        yield j, n
        j += 1
        start += n


def map_ordered(fn: Callable[..., T], items: Sequence, workers: int = 1) -> list[T]:
    """``[fn(*item) for item in items]``, optionally on a thread pool.

    Output order always follows ``items``.
    """
    if workers <= 1 or len(items) <= 1:
        return [fn(*item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda item: fn(*item), items))
