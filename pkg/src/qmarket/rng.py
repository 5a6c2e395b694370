"""Counter-based random substreams and worker-count handling.

Monte Carlo work is cut into fixed-size blocks of trials.  Block ``b`` of a
run seeded with ``seed`` always draws from a Philox generator keyed by
``(seed, b)``, so every trial's random numbers depend only on the master seed
and the trial index, never on how blocks are spread across workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK_TRIALS = 8192
THREADS_ENV = "QMARKET_THREADS"


def _entropy(seed):
    if isinstance(seed, (tuple, list)):
        return [int(s) for s in seed]
    return [int(seed)]


def block_rng(seed, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(_entropy(seed) + [int(block)])))


def derive_seed(*keys) -> int:
    """A 64-bit seed determined by the integer ``keys``."""
    words = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, np.uint32)
    return int(words[0]) << 32 | int(words[1])


def worker_count(default: int | None = None) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return default if default is not None else max(1, os.cpu_count() or 1)


def blocks(total: int, size: int = BLOCK_TRIALS):
    """``(block index, first trial, count)`` triples covering ``total`` trials."""
    return [(b, start, min(size, total - start)) for b, start in enumerate(range(0, total, size))]


def map_ordered(fn, items, workers: int | None = None):
    """``list(map(fn, items))``, possibly threaded; result order always matches ``items``."""
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def merge_moments(parts):
    """Combine per-block ``(count, sum, M2)`` in the given order (Chan et al. update)."""
    n, total, m2 = 0, None, None
    for nb, sb, m2b in parts:
        if total is None:
            n, total, m2 = nb, np.array(sb, dtype=float), np.array(m2b, dtype=float)
            continue
        delta = sb / nb - total / n
        m2 = m2 + m2b + delta * delta * (n * nb / (n + nb))
        total = total + sb
        n += nb
    return n, total, m2


def subseed(seed, *keys):
    """Entropy list for an independent stream labelled by ``keys`` under ``seed``."""
    return _entropy(seed) + [int(k) for k in keys]
