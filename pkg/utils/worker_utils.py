"""
Utility module for sizing the worker pool and mapping work over it.

Results always come back in input order, so a parallel run produces the
same output as an inline one.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar, Union

import psutil

logger = logging.getLogger("worker_utils")

T = TypeVar("T")
R = TypeVar("R")


def resolve_workers(requested: Union[int, str, None]) -> int:
    """
    Turn a --workers value into a process count.

    Args:
        requested: a positive integer, "auto" for the physical core count, or None for 1

    Returns:
        int: number of worker processes (1 means run inline)
    """
    if requested is None:
        return 1
    if isinstance(requested, str):
        if requested.strip().lower() == "auto":
            cores = psutil.cpu_count(logical=False) or psutil.cpu_count(logical=True) or 1
            logger.debug(f"auto worker count resolved to {cores}")
            return cores
        requested = int(requested)
    if requested < 1:
        raise ValueError(f"worker count must be positive, got {requested}")
    return requested


def parallel_map(func: Callable[[T], R], items: Iterable[T], workers: Optional[int] = 1) -> List[R]:
    """
    Apply func to every item, in order.

    ``func`` and the items must be picklable when workers > 1.
    """
    items = list(items)
    workers = resolve_workers(workers)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    workers = min(workers, len(items))
    logger.debug(f"mapping {len(items)} task(s) over {workers} process(es)")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
