"""Thread-pool helpers for the per-episode and per-cloud work.

numpy releases the GIL inside its kernels, so a thread pool is enough to
spread encoding over cores. With ``threads <= 1`` everything runs inline.
"""

from __future__ import annotations

import logging
from collections import deque
from collections.abc import Callable, Iterable, Iterator
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

from tfs3d.config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: int | None) -> int:
    """Explicit value, else TFS3D_THREADS, never below 1."""
    value = settings.threads if threads is None else threads
    return max(1, int(value))


def ordered_map(func: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """map() over a thread pool; results keep the input order.

    The first exception raised by `func` propagates after the pool shuts down.
    """
    items = list(items)
    workers = min(resolve_threads(threads), max(1, len(items)))
    if workers == 1:
        return [func(item) for item in items]
    logger.debug("Running %d tasks on %d threads", len(items), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def ordered_imap(
    func: Callable[[T], R], items: Iterable[T], threads: int | None = None
) -> Iterator[R]:
    """Lazy ordered_map: pulls at most one item per worker ahead of the consumer."""
    workers = resolve_threads(threads)
    if workers == 1:
        for item in items:
            yield func(item)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending: deque = deque()
        for item in items:
            pending.append(pool.submit(func, item))
            if len(pending) >= workers:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()
