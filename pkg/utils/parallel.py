"""
Deterministic fan-out helper.
Work items run concurrently but results always come back in input order.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Iterable[T], max_workers: Optional[int] = None) -> List[R]:
    """
    Apply `fn` to every item, possibly concurrently.

    Args:
        fn: Pure function of one item
        items: Work items
        max_workers: Thread cap; None or 1 runs sequentially

    Returns:
        Results ordered like `items` (not by completion)
    """
    items = list(items)
    if not max_workers or max_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    with ThreadPoolExecutor(max_workers=min(max_workers, len(items))) as pool:
        return list(pool.map(fn, items))
