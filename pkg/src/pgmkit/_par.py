"""Shared worker-pool helpers.

All parallelism in the library goes through these functions so that the
determinism rules live in one place: work is split into units whose
boundaries depend only on the input (never on the worker count), units are
computed independently, and results are always combined in unit order.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

# Rows per work unit for sample-index and flat-table partitioning.
SAMPLE_BLOCK = 1 << 13
REDUCE_BLOCK = 1 << 16


def resolve_workers(workers: int) -> int:
    """0 means use all available cores; negative values are invalid."""
    if workers < 0:
        raise ValueError("workers must be >= 0")
    if workers == 0:
        return os.cpu_count() or 1
    return workers


def parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: int) -> list[R]:
    """Apply fn to every item, results in input order.

    Uses a dynamic thread pool (shared queue, idle workers pull the next
    item) when it can help; falls back to a serial loop otherwise.
    """
    workers = resolve_workers(workers)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))


def block_ranges(n: int, block: int) -> list[tuple[int, int]]:
    """Fixed partition of range(n) into blocks; independent of workers."""
    return [(lo, min(lo + block, n)) for lo in range(0, max(n, 0), block)]


def map_blocks(
    fn: Callable[[int, int], R], n: int, workers: int, block: int = SAMPLE_BLOCK
) -> list[R]:
    """Run fn(lo, hi) over a fixed block partition of range(n).

    The block layout depends only on n and block, so any worker count
    produces the same list of per-block results in the same order.
    """
    ranges = block_ranges(n, block)
    return parallel_map(lambda r: fn(*r), ranges, workers)
