"""Worker-count resolution and an order-preserving map over a process pool."""

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

from .errors import ConfigError

WORKERS_ENV = "PUF_ENTROPY_WORKERS"
DEFAULT_WORKERS = 1

T = TypeVar("T")
R = TypeVar("R")


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: explicit argument > PUF_ENTROPY_WORKERS > 1."""
    if workers is None:
        raw = os.environ.get(WORKERS_ENV)
        if not raw:
            return DEFAULT_WORKERS
        try:
            workers = int(raw)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got '{raw}'") from None
    if workers < 1:
        raise ConfigError(f"Worker count must be at least 1, got {workers}")
    return workers


def ordered_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    workers: int | None = None,
    progress_callback: Callable[[int, int], None] | None = None,
) -> list[R]:
    """
    Apply fn to every item; results keep the input order.

    Args:
        fn: Picklable callable when more than one worker is used
        items: Work items
        workers: Worker cap, see resolve_workers
        progress_callback: Optional callback(done, total)
    """
    items = list(items)
    total = len(items)
    workers = min(resolve_workers(workers), max(total, 1))
    results: list[R] = []

    if workers == 1:
        for item in items:
            results.append(fn(item))
            if progress_callback:
                progress_callback(len(results), total)
        return results

    with ProcessPoolExecutor(max_workers=workers) as pool:
        for result in pool.map(fn, items):
            results.append(result)
            if progress_callback:
                progress_callback(len(results), total)
    return results
