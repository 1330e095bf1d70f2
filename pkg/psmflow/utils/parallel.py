"""Slab-partitioned worker pool for the field kernels.

Kernels are split into contiguous slabs along the slowest-varying axis that
has more than one cell (z in 3D, y in 2D). Each job writes only to its own
part of the output, and results come back in job order so any reduction done
by the caller is independent of the worker count.
"""

import logging
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class Slab:
    """A contiguous range ``[start, stop)`` along ``axis`` (0=x, 1=y, 2=z)."""

    axis: int
    start: int
    stop: int

    @property
    def length(self) -> int:
        return self.stop - self.start

    def cell_slices(self) -> tuple[slice, slice, slice]:
        """Slices selecting this slab from an ``[x, y, z]`` array."""
        out = [slice(None), slice(None), slice(None)]
        out[self.axis] = slice(self.start, self.stop)
        return out[0], out[1], out[2]


def slab_axis(dims: tuple[int, int, int]) -> int:
    """Slowest axis with more than one cell."""
    for axis in (2, 1, 0):
        if dims[axis] > 1:
            return axis
    return 0


def partition(dims: tuple[int, int, int], parts: int) -> list[Slab]:
    """Split the grid into at most ``parts`` slabs of near-equal thickness."""
    axis = slab_axis(dims)
    n = dims[axis]
    parts = max(1, min(parts, n))
    bounds = [n * k // parts for k in range(parts + 1)]
    return [Slab(axis, bounds[k], bounds[k + 1]) for k in range(parts)]


class WorkerPool:
    """Thread pool that maps a job over slabs and returns ordered results.

    With one worker everything runs inline on the calling thread; that mode
    is the reference for tests and produces identical results.

    Example:
        with WorkerPool(workers=4) as pool:
            partial = pool.map(lambda slab: kernel(slab), pool.slabs(dims))
    """

    def __init__(self, workers: int = 1) -> None:
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self.workers = workers
        self._executor: ThreadPoolExecutor | None = None

    def __enter__(self) -> "WorkerPool":
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        self.close()

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def slabs(self, dims: tuple[int, int, int]) -> list[Slab]:
        return partition(dims, self.workers)

    def map(self, work: Callable[[Any], T], jobs: Iterable[Any]) -> list[T]:
        """Run ``work`` on every job; results are returned in job order."""
        jobs = list(jobs)
        if self.workers == 1 or len(jobs) <= 1:
            return [work(job) for job in jobs]
        if self._executor is None:
            self._executor = ThreadPoolExecutor(
                max_workers=self.workers, thread_name_prefix="psmflow"
            )
            logger.debug(f"Started worker pool with {self.workers} threads")
        return list(self._executor.map(work, jobs))
