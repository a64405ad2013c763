"""
Order-stable worker pool for the parallel-safe operations.
"""

import logging
from concurrent.futures import ProcessPoolExecutor

logger = logging.getLogger(__name__)


def ordered_map(fn, items, jobs=1):
    """
    Map fn over items, returning results in input order.

    jobs <= 1 runs inline, which is the fully deterministic default. fn must be a
    module-level callable when jobs > 1.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    workers = min(jobs, len(items))
    logger.debug(f"Dispatching {len(items)} items to {workers} workers")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
