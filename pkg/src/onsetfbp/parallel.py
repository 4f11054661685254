"""Thread-pool map honouring a process-wide thread cap (set by ``--threads``)."""
import os
from concurrent.futures import ThreadPoolExecutor

_THREADS = 1


def set_threads(n):
    """Cap worker threads for level and patch solves; n <= 0 means all cores.

    The compiled kernels release the GIL, so they overlap inside the pool.
    """
    global _THREADS
    _THREADS = max(1, int(n) if n and n > 0 else (os.cpu_count() or 1))
    return _THREADS


def get_threads():
    return _THREADS


def pmap(fn, items):
    items = list(items)
    if _THREADS <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=_THREADS) as ex:
        return list(ex.map(fn, items))
