"""Deterministic batch scheduling: the batch layout and per-batch seeds depend
only on (master seed, sample count, batch size), never on the worker count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

DEFAULT_BATCH = 1024


def batch_sizes(n: int, batch: int = DEFAULT_BATCH) -> list[int]:
    if n < 0 or batch < 1:
        raise ValueError("need n >= 0 and batch >= 1")
    full, rest = divmod(n, batch)
    return [batch] * full + ([rest] if rest else [])


def batch_seeds(seed: int, n_batches: int, stream: int = 0) -> list[int]:
    """Independent 32-bit seeds for each batch (the compiled kernels take uint32)."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(stream)])
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in ss.spawn(n_batches)]


def batch_generators(seed: int, n_batches: int, stream: int = 0) -> list[np.random.Generator]:
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(stream)])
    return [np.random.default_rng(c) for c in ss.spawn(n_batches)]


def run_batches(fn, tasks, workers: int = 1) -> list:
    """Apply ``fn`` to each task; results come back in task order."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))
