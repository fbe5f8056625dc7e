import logging
from typing import Callable, Iterable, List, TypeVar

import numpy as np
from joblib import Parallel, delayed

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

# Monte Carlo samples are drawn in chunks of this size, one PRNG stream per chunk
SAMPLE_CHUNK = 1024


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """Apply func to every item, returning results in input order whatever the thread count."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    logger.debug(f"parallel_map over {len(items)} items with {threads} threads")
    return Parallel(n_jobs=threads, backend="threading")(delayed(func)(item) for item in items)


def stream(seed: int, index: int) -> np.random.Generator:
    """PCG64 generator for the (seed, index) stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(index), int(seed)])))


def uniform_samples(seed: int, count: int, low: np.ndarray, high: np.ndarray) -> np.ndarray:
    """count points uniform in the box [low, high), drawn chunk by chunk from (seed, chunk) streams."""
    low = np.asarray(low, dtype=np.float64)
    high = np.asarray(high, dtype=np.float64)
    chunks = []
    for chunk, start in enumerate(range(0, count, SAMPLE_CHUNK)):
        size = min(SAMPLE_CHUNK, count - start)
        u = stream(seed, chunk).random((size, low.size))
        chunks.append(low + u * (high - low))
    if not chunks:
        return np.empty((0, low.size))
    return np.concatenate(chunks)
