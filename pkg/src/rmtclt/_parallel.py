"""Ordered thread-pool map and splittable seeds."""

from concurrent.futures import ThreadPoolExecutor
import os

import numpy as np


def thread_count():
    """Worker count: ``RMT_THREADS`` if set, otherwise the machine's CPU count."""
    env = os.environ.get("RMT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"RMT_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def ordered_map(fn, items, threads=None):
    """``[fn(x) for x in items]``, possibly concurrent, always in input order."""
    items = list(items)
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def derive_seed(master, *key):
    """64-bit seed for the stream ``key`` split off ``master``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])
