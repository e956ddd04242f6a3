"""Counter-based random streams and a deterministic block map.

Paths are grouped in fixed-size blocks.  Block ``b`` of a run with master
seed ``s`` always draws from the Philox stream keyed by ``(s, b)``, so the
numbers a path sees do not depend on how many worker threads are used.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

__all__ = ["BLOCK", "THREADS_ENV", "default_threads", "block_rng", "block_sizes", "map_blocks"]

BLOCK = 8192
THREADS_ENV = "HYPBRIDGE_THREADS"

T = TypeVar("T")


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1")
        return n
    return 1


def block_rng(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


def block_sizes(n_paths: int, block: int = BLOCK) -> list[int]:
    if n_paths < 1:
        raise ValueError("need at least one path")
    full, rest = divmod(n_paths, block)
    return [block] * full + ([rest] if rest else [])


def map_blocks(
    fn: Callable[[np.random.Generator, int], T],
    n_paths: int,
    seed: int,
    threads: int | None = None,
    block: int = BLOCK,
) -> list[T]:
    """Apply ``fn(rng, n)`` to each block and return the results in block order."""
    sizes = block_sizes(n_paths, block)
    threads = default_threads() if threads is None else threads
    jobs = [(block_rng(seed, b), n) for b, n in enumerate(sizes)]
    if threads <= 1 or len(jobs) == 1:
        return [fn(r, n) for r, n in jobs]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda job: fn(*job), jobs))
