"""
Replica fan-out over a thread pool
Each task gets its own child RandomSource; results come back in task order
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, TypeVar

import numpy as np

from app.core.utils import default_threads
from app.models import RandomLike, RandomSource

logger = logging.getLogger(__name__)

T = TypeVar("T")

DEFAULT_CHUNK = 100_000

_thread_override: Optional[int] = None


def set_threads(threads: Optional[int]):
    """Process-wide worker count, set by the --threads flag"""
    global _thread_override
    _thread_override = threads if threads and threads > 0 else None


def child_sources(rng: RandomLike, count: int) -> List[RandomSource]:
    """Independent per-task sources; a Generator is turned into a seed first"""
    if isinstance(rng, RandomSource):
        return rng.spawn(count)
    if isinstance(rng, (int, np.integer)):
        return RandomSource(int(rng)).spawn(count)
    seed = int(rng.integers(0, 2 ** 63))
    return RandomSource(seed).spawn(count)


def chunk_sizes(total: int, chunk: int = DEFAULT_CHUNK) -> List[int]:
    if total <= 0:
        return []
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])


def map_replicas(fn: Callable[[int, RandomSource], T], rng: RandomLike, count: int,
                 threads: Optional[int] = None) -> List[T]:
    """fn(i, source_i) for i in range(count), on up to `threads` workers"""
    sources = child_sources(rng, count)
    threads = threads or _thread_override or default_threads()
    if threads <= 1 or count <= 1:
        return [fn(i, src) for i, src in enumerate(sources)]
    logger.debug(f"🚀 {count} tasks on {threads} threads")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: fn(i, sources[i]), range(count)))
