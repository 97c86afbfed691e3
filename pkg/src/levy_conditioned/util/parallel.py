import logging
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Any, Callable, List, Sequence, Tuple, TypeVar

import numpy as np
from numpy.random import Generator, SeedSequence

from .param import REPLICATE_CHUNK

logger = logging.getLogger(__name__)

T = TypeVar("T")


def chunk_rng(seed: int, chunk: int) -> Generator:
    return np.random.default_rng(SeedSequence(seed, spawn_key=(chunk,)))


def root_seed_from(rng: Generator) -> int:
    """Draw the root entropy of a replicate family from a caller generator."""
    return int(rng.integers(0, 2**63 - 1))


def chunk_sizes(n_replicates: int, chunk: int = REPLICATE_CHUNK) -> List[int]:
    if n_replicates < 0:
        raise ValueError(f"Number of replicates must be nonnegative, but got {n_replicates}")
    full, rest = divmod(n_replicates, chunk)
    return [chunk] * full + ([rest] if rest else [])


def _run_chunk(fn: Callable[..., T], seed: int, args: Tuple[Any, ...], task: Tuple[int, int]) -> T:
    index, size = task
    return fn(size, chunk_rng(seed, index), *args)


def replicate_map(
    fn: Callable[..., T],
    n_replicates: int,
    seed: int,
    *args: Any,
    workers: int = 1,
    chunk: int = REPLICATE_CHUNK,
) -> List[T]:
    """
    Run `fn(size, rng, *args)` over fixed-size replicate chunks and return the chunk
    results in chunk order. Chunk seeds depend on (seed, chunk index) only, so the merged
    result is identical for any number of workers.
    """
    tasks: Sequence[Tuple[int, int]] = list(enumerate(chunk_sizes(n_replicates, chunk)))
    job = partial(_run_chunk, fn, seed, args)
    if workers <= 1 or len(tasks) <= 1:
        return [job(task) for task in tasks]
    logger.debug("dispatching %d chunks to %d workers", len(tasks), workers)
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(job, tasks))
