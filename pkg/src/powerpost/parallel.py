"""Order-preserving map over independent tasks, optionally across processes."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def pmap(fn, tasks, threads: int = 1) -> list:
    """``[fn(t) for t in tasks]``, run in a process pool when ``threads > 1``.

    Results come back in task order, so downstream output never depends on
    scheduling.  ``fn`` must be a module-level function.
    """
    tasks = list(tasks)
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))
