"""
Worker pool running the verification strategies over sealed chunks.

A chunk is divided into slabs of whole probe entries, one per worker, and the
slab outputs are stitched back together in slot order.
"""

import logging
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass
from types import TracebackType
from typing import List, Optional, Tuple, Type

import numpy as np

from .collection import Collection
from .config import EXECUTORS
from .similarity import SimilarityPredicate
from .verify import (
    CandidateChunk,
    OutputMode,
    Strategy,
    VerificationOutput,
    VerificationStats,
    verify_chunk,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VerificationContext:
    """Read-only state shared by every worker."""

    collection: Collection
    pred: SimilarityPredicate
    strategy: Strategy
    mode: OutputMode
    other: Optional[Collection] = None

    def verify(self, chunk: CandidateChunk) -> Tuple[VerificationOutput, VerificationStats]:
        stats = VerificationStats()
        output = verify_chunk(
            chunk, self.collection, self.pred, self.strategy, self.mode, other=self.other, stats=stats
        )
        return output, stats


# Installed once per worker process
_worker_context: Optional[VerificationContext] = None


def _install_context(context: VerificationContext) -> None:
    global _worker_context
    _worker_context = context


def _worker_ready(_: int) -> bool:
    return _worker_context is not None


def _verify_in_worker(chunk: CandidateChunk) -> Tuple[VerificationOutput, VerificationStats]:
    assert _worker_context is not None, "worker context not installed"
    return _worker_context.verify(chunk)


class VerificationEngine:
    """
    Verifies chunks on a pool of threads or processes.

    With a single worker every chunk is verified inline. Use as a context
    manager so the pool is shut down with the join.
    """

    def __init__(self, context: VerificationContext, workers: int = 1, executor: str = "thread") -> None:
        """
        Args:
            context: Collections, predicate, strategy and output mode.
            workers: Number of slabs each chunk is divided into.
            executor: ``thread`` or ``process``.

        Raises:
            ValueError: If workers < 1 or the executor kind is unknown.
        """
        if workers < 1:
            error_msg = f"workers must be >= 1 (got {workers})"
            logger.error(error_msg)
            raise ValueError(error_msg)
        if executor not in EXECUTORS:
            error_msg = f"unknown executor: {executor!r}"
            logger.error(error_msg)
            raise ValueError(error_msg)
        self.context = context
        self.workers = workers
        self.executor = executor
        self._pool: Optional[Executor] = None

    def __enter__(self) -> "VerificationEngine":
        if self.workers > 1:
            if self.executor == "process":
                self._pool = ProcessPoolExecutor(
                    max_workers=self.workers, initializer=_install_context, initargs=(self.context,)
                )
                # Start the workers before the first chunk arrives
                if not all(self._pool.map(_worker_ready, range(self.workers))):
                    error_msg = "verification workers failed to install their context"
                    logger.error(error_msg)
                    self.close()
                    raise RuntimeError(error_msg)
            else:
                self._pool = ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix="ssjoin-verify")
            logger.info(f"Started {self.workers} {self.executor} workers")
        return self

    def __exit__(
        self,
        exc_type: Optional[Type[BaseException]],
        exc: Optional[BaseException],
        traceback: Optional[TracebackType],
    ) -> None:
        self.close()

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def verify(self, chunk: CandidateChunk) -> Tuple[VerificationOutput, VerificationStats]:
        """
        Verify one chunk.

        Returns:
            The output for the whole chunk, in slot order, and its comparison counters.
        """
        slabs = chunk.split(self.workers)
        results: List[Tuple[VerificationOutput, VerificationStats]]
        if self._pool is None or len(slabs) == 1:
            results = [self.context.verify(slab) for slab in slabs]
        elif self.executor == "process":
            results = list(self._pool.map(_verify_in_worker, slabs))
        else:
            results = list(self._pool.map(self.context.verify, slabs))

        stats = VerificationStats()
        for _, slab_stats in results:
            stats.merge(slab_stats)
        count = sum(output.count for output, _ in results)
        if self.context.mode is OutputMode.COUNT:
            return VerificationOutput(count), stats
        flags = np.concatenate([output.flags for output, _ in results if output.flags is not None])
        return VerificationOutput(count, flags), stats
