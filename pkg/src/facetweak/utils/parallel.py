from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

T = TypeVar('T')
R = TypeVar('R')


def ordered_map(fn: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> List[R]:
    """
    Apply ``fn`` to every item, returning results in input order.

    Work items must carry everything they depend on (data, seed, initial
    weights), so results do not depend on ``jobs`` or on scheduling.

    Args:
        fn: Function applied to each item
        items: Work items
        jobs: Maximum number of worker threads; 1 runs inline

    Returns:
        List of results, aligned with ``items``
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
