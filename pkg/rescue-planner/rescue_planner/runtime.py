"""Thread-pool helpers shared by the allocators, the pipeline and the CLI."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "RESCUE_PLANNER_THREADS"


def default_workers() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        if value < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1")
        return value
    return min(8, os.cpu_count() or 1)


def map_ordered(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None, executor: Optional[ThreadPoolExecutor] = None) -> List[R]:
    """Apply ``fn`` to every item, returning results in input order."""
    items = list(items)
    if executor is not None:
        return list(executor.map(fn, items))
    n = workers if workers is not None else 1
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as ex:
        return list(ex.map(fn, items))
