"""
Three-role join pipeline.

- H0, the calling thread, generates candidates and serializes them into
  chunks bounded by the budget M_c.
- H1 hands every sealed chunk to the verification engine while H0 keeps
  building the next one.
- H2 turns flag arrays into result pairs; it only runs in pairs mode.

At most two chunks are alive at any time: the one H0 is building and one
sealed chunk waiting for or under verification.
"""

import logging
import queue
import threading
from dataclasses import dataclass, field
from time import perf_counter
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .collection import Collection
from .config import EXECUTORS, MIN_CHUNK_BUDGET
from .engine import VerificationContext, VerificationEngine
from .joiners import Algorithm, CandidateBatch, GenerationStats, generate_candidates
from .similarity import SimilarityPredicate, equivalent_overlap
from .verify import (
    ChunkBuilder,
    CandidateChunk,
    OutputMode,
    Strategy,
    VerificationOutput,
    VerificationStats,
    seal_chunk,
    verify_pair_count,
)

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]

# Chunks alive at once: one being built, one being verified
CHUNK_SLOTS = 2


class JoinAbortedError(RuntimeError):
    """A chunk could not be verified or post-processed; the join was stopped."""

    def __init__(self, sequence: int, cause: BaseException) -> None:
        super().__init__(f"join aborted while processing chunk {sequence}: {cause}")
        self.sequence = sequence
        self.cause = cause


class _GenerationStopped(Exception):
    pass


@dataclass
class PipelineConfig:
    """Settings of one join run."""

    chunk_budget: Optional[int] = 64 << 20
    strategy: Strategy = field(default_factory=Strategy)
    mode: OutputMode = OutputMode.COUNT
    workers: int = 1
    executor: str = "thread"
    algorithm: Algorithm = Algorithm.PPJOIN
    group_split: bool = True

    def __post_init__(self) -> None:
        if self.workers < 1:
            error_msg = f"workers must be >= 1 (got {self.workers})"
            logger.error(error_msg)
            raise ValueError(error_msg)
        if self.executor not in EXECUTORS:
            error_msg = f"unknown executor: {self.executor!r}"
            logger.error(error_msg)
            raise ValueError(error_msg)
        if self.chunk_budget is not None and self.chunk_budget < MIN_CHUNK_BUDGET:
            error_msg = f"chunk budget {self.chunk_budget} cannot hold a single candidate record"
            logger.error(error_msg)
            raise ValueError(error_msg)


@dataclass
class PhaseTimings:
    """Phase durations in seconds."""

    filtering: float = 0.0
    serialization: float = 0.0
    verification: float = 0.0
    join: float = 0.0

    def as_milliseconds(self) -> Dict[str, float]:
        return {
            "filtering_ms": self.filtering * 1000,
            "serialization_ms": self.serialization * 1000,
            "verification_ms": self.verification * 1000,
            "join_ms": self.join * 1000,
        }


@dataclass
class JoinReport:
    """
    Result and measurements of one join.

    ``pairs`` holds original record ids and is None in count mode. Self-join
    pairs are ``(larger id, smaller id)``; R-S pairs are ``(r id, s id)``.
    Both lists are sorted.
    """

    count: int
    pairs: Optional[List[Pair]]
    timings: PhaseTimings
    algorithm: str
    predicate: str
    strategy: str
    chunk_count: int = 0
    candidate_count: int = 0
    candidate_bytes: int = 0
    host_pair_count: int = 0
    generation: GenerationStats = field(default_factory=GenerationStats)
    verification: VerificationStats = field(default_factory=VerificationStats)
    chunk_verification: List[float] = field(default_factory=list)
    peak_candidate_bytes: int = 0
    peak_output_bytes: int = 0


class MemoryLedger:
    """Tracks live candidate and flag bytes across the pipeline roles."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.open_bytes = 0
        self.sealed_bytes = 0
        self.output_bytes = 0
        self.peak_candidate_bytes = 0
        self.peak_output_bytes = 0

    def _observe(self) -> None:
        self.peak_candidate_bytes = max(self.peak_candidate_bytes, self.open_bytes + self.sealed_bytes)
        self.peak_output_bytes = max(self.peak_output_bytes, self.output_bytes)

    def building(self, nbytes: int) -> None:
        with self._lock:
            self.open_bytes = nbytes
            self._observe()

    def sealed(self, chunk: CandidateChunk) -> None:
        with self._lock:
            self.open_bytes = 0
            self.sealed_bytes += chunk.byte_size
            self._observe()

    def allocated(self, output: VerificationOutput) -> None:
        with self._lock:
            self.output_bytes += output.output_bytes
            self._observe()

    def retired(self, chunk: CandidateChunk, output_bytes: int) -> None:
        with self._lock:
            self.sealed_bytes -= chunk.byte_size
            self.output_bytes -= output_bytes


class HostVerifier:
    """Verifies candidate batches inline on the calling thread."""

    def __init__(
        self,
        collection: Collection,
        pred: SimilarityPredicate,
        mode: OutputMode,
        other: Optional[Collection] = None,
    ) -> None:
        self.collection = collection
        self.indexed = other if other is not None else collection
        self.pred = pred
        self.mode = mode
        self.count = 0
        self.pair_count = 0
        self.pairs: List[Pair] = []
        self.stats = VerificationStats()
        self.elapsed = 0.0
        self._probe_ids = collection.original_id.tolist()
        self._indexed_ids = self.indexed.original_id.tolist()

    def __call__(self, batch: CandidateBatch) -> None:
        started = perf_counter()
        r = self.collection.set_tokens(batch.probe)
        for candidate in batch.candidates:
            s = self.indexed.set_tokens(candidate)
            required = equivalent_overlap(self.pred, len(r), len(s))
            if verify_pair_count(r, s, required, stop_at_required=True, stats=self.stats)[1]:
                self.count += 1
                if self.mode is OutputMode.PAIRS:
                    self.pairs.append((self._probe_ids[batch.probe], self._indexed_ids[candidate]))
        self.pair_count += len(batch.candidates)
        self.elapsed += perf_counter() - started


def decode_pairs(
    chunk: CandidateChunk,
    flags: np.ndarray,
    id_map: np.ndarray,
    other_id_map: Optional[np.ndarray] = None,
) -> List[Pair]:
    """
    Emit ``(probe, candidate)`` for every true flag, mapped to original record ids.

    Args:
        chunk: The verified chunk.
        flags: One flag per slot of ``chunk.candidates``.
        id_map: Original ids of the probing collection.
        other_id_map: Original ids of the indexed collection of an R-S join.
    """
    positions = np.flatnonzero(flags)
    if not len(positions):
        return []
    # Expand the probe id of every C_O entry over its candidate slots
    ends = chunk.offsets[1::2].astype(np.int64)
    widths = np.diff(ends, prepend=0)
    slot_probes = np.repeat(chunk.probe_ids().astype(np.int64), widths)
    candidate_ids = other_id_map if other_id_map is not None else id_map
    probes = id_map[slot_probes[positions]]
    candidates = candidate_ids[chunk.candidates[positions].astype(np.int64)]
    return list(zip(probes.tolist(), candidates.tolist()))


def _canonical(pairs: List[Pair], self_join: bool) -> List[Pair]:
    if self_join:
        return sorted((max(r, s), min(r, s)) for r, s in pairs)
    return sorted(pairs)


class _JoinPipeline:
    def __init__(
        self,
        collection: Collection,
        pred: SimilarityPredicate,
        config: PipelineConfig,
        other: Optional[Collection],
    ) -> None:
        self.collection = collection
        self.pred = pred
        self.config = config
        self.other = other
        self.ledger = MemoryLedger()
        self.builder = ChunkBuilder(config.chunk_budget)
        self.engine = VerificationEngine(
            VerificationContext(collection, pred, config.strategy, config.mode, other),
            workers=config.workers,
            executor=config.executor,
        )
        # Hand-off between the roles; None on a queue ends the consumer
        self._slots = threading.Semaphore(CHUNK_SLOTS)
        self._holding_slot = False
        self._sealed: "queue.Queue[Optional[CandidateChunk]]" = queue.Queue()
        self._outputs: "queue.Queue[Optional[Tuple[CandidateChunk, VerificationOutput]]]" = queue.Queue()
        self._abort = threading.Event()
        self._failure: Optional[Tuple[int, BaseException]] = None

        # Phase timers and result counters
        self.serialization = 0.0
        self.stall = 0.0
        self.verification = 0.0
        self.chunk_verification: List[float] = []
        self.chunk_count = 0
        self.candidate_count = 0
        self.candidate_bytes = 0
        self.count = 0
        self.pairs: List[Pair] = []
        self.verification_stats = VerificationStats()

    # H0

    def _acquire_slot(self) -> None:
        started = perf_counter()
        self._slots.acquire()
        self.stall += perf_counter() - started
        self._holding_slot = True

    def _hand_off(self, chunk: CandidateChunk) -> None:
        self.ledger.sealed(chunk)
        self.chunk_count += 1
        self.candidate_count += chunk.candidate_count
        self.candidate_bytes += chunk.candidate_bytes
        self._holding_slot = False
        self._sealed.put(chunk)

    def accept(self, batch: CandidateBatch) -> None:
        if self._abort.is_set():
            raise _GenerationStopped()
        if not self._holding_slot and (batch.candidates or self.builder.keep_empty):
            self._acquire_slot()
        # A batch larger than the budget yields several sealed chunks
        chunks = self.builder.add(batch)
        while True:
            started = perf_counter()
            chunk = next(chunks, None)
            self.serialization += perf_counter() - started
            if chunk is None:
                break
            self._hand_off(chunk)
            self._acquire_slot()
        self.ledger.building(self.builder.byte_size)

    def flush(self) -> None:
        if self.builder:
            started = perf_counter()
            chunk = seal_chunk(self.builder)
            self.serialization += perf_counter() - started
            self._hand_off(chunk)
        elif self._holding_slot:
            self._holding_slot = False
            self._slots.release()

    # H1 and H2

    def _retire(self, chunk: CandidateChunk, output_bytes: int) -> None:
        self.ledger.retired(chunk, output_bytes)
        self._slots.release()

    def _fail(self, chunk: CandidateChunk, exc: BaseException) -> None:
        logger.error(f"Chunk {chunk.sequence} failed: {exc}")
        if self._failure is None:
            self._failure = (chunk.sequence, exc)
        self._abort.set()

    def dispatch(self) -> None:
        pairs_mode = self.config.mode is OutputMode.PAIRS
        while True:
            chunk = self._sealed.get()
            if chunk is None:
                if pairs_mode:
                    self._outputs.put(None)
                return
            # After a failure the remaining chunks are released unverified
            if self._abort.is_set():
                self._retire(chunk, 0)
                continue
            started = perf_counter()
            try:
                output, stats = self.engine.verify(chunk)
            except Exception as exc:
                self._fail(chunk, exc)
                self._retire(chunk, 0)
                continue
            elapsed = perf_counter() - started
            self.verification += elapsed
            self.chunk_verification.append(elapsed)
            self.verification_stats.merge(stats)
            self.count += output.count
            logger.debug(f"Verified chunk {chunk.sequence} in {elapsed:.4f}s: {output.count} pairs")
            if pairs_mode:
                self.ledger.allocated(output)
                self._outputs.put((chunk, output))
            else:
                self._retire(chunk, 0)

    def post_process(self) -> None:
        id_map = self.collection.original_id
        other_id_map = self.other.original_id if self.other is not None else None
        while True:
            item = self._outputs.get()
            if item is None:
                return
            chunk, output = item
            try:
                if not self._abort.is_set() and output.flags is not None:
                    self.pairs.extend(decode_pairs(chunk, output.flags, id_map, other_id_map))
            except Exception as exc:
                self._fail(chunk, exc)
            finally:
                self._retire(chunk, output.output_bytes)

    def run(self) -> JoinReport:
        config = self.config
        host = HostVerifier(self.collection, self.pred, config.mode, self.other)
        join_started = perf_counter()
        threads = [threading.Thread(target=self.dispatch, name="ssjoin-h1", daemon=True)]
        if config.mode is OutputMode.PAIRS:
            threads.append(threading.Thread(target=self.post_process, name="ssjoin-h2", daemon=True))

        generation = GenerationStats()
        with self.engine:
            # Start H1 and H2, then generate on this thread
            for thread in threads:
                thread.start()
            try:
                generation = generate_candidates(
                    config.algorithm,
                    self.collection,
                    self.pred,
                    self.accept,
                    host if config.algorithm is Algorithm.GROUPJOIN else None,
                    other=self.other,
                    group_split=config.group_split,
                )
                self.flush()
            except _GenerationStopped:
                logger.warning("Candidate generation stopped after a verification failure")
            finally:
                producer_time = perf_counter() - join_started
                self._sealed.put(None)
                for thread in threads:
                    thread.join()

        # Report the first failed chunk
        if self._failure is not None:
            sequence, cause = self._failure
            raise JoinAbortedError(sequence, cause) from cause

        # Merge the pairs verified inline by the producer
        self.verification_stats.merge(host.stats)
        pairs = _canonical(self.pairs + host.pairs, self.other is None) if config.mode is OutputMode.PAIRS else None
        timings = PhaseTimings(
            filtering=max(0.0, producer_time - self.serialization - self.stall),
            serialization=self.serialization,
            verification=self.verification,
            join=perf_counter() - join_started,
        )
        report = JoinReport(
            count=self.count + host.count,
            pairs=pairs,
            timings=timings,
            algorithm=config.algorithm.value,
            predicate=str(self.pred),
            strategy=str(config.strategy),
            chunk_count=self.chunk_count,
            candidate_count=self.candidate_count,
            candidate_bytes=self.candidate_bytes,
            host_pair_count=host.pair_count,
            generation=generation,
            verification=self.verification_stats,
            chunk_verification=self.chunk_verification,
            peak_candidate_bytes=self.ledger.peak_candidate_bytes,
            peak_output_bytes=self.ledger.peak_output_bytes,
        )
        logger.info(
            f"Join finished: {report.count} pairs, {report.chunk_count} chunks, "
            f"{report.candidate_count} candidates in {timings.join:.3f}s"
        )
        return report


def run_join(
    collection: Collection,
    pred: SimilarityPredicate,
    config: Optional[PipelineConfig] = None,
    *,
    other: Optional[Collection] = None,
) -> JoinReport:
    """
    Run a set similarity join through the chunked verification pipeline.

    Args:
        collection: The preprocessed collection (probe side of an R-S join).
        pred: The similarity predicate.
        config: Pipeline settings; defaults to PipelineConfig().
        other: The indexed collection of an R-S join, coded with the same dictionary.

    Returns:
        The join report.

    Raises:
        ValueError: For an unsupported algorithm/join combination.
        JoinAbortedError: If verification or post-processing of a chunk failed.
    """
    config = config or PipelineConfig()
    logger.info(
        f"Running {config.algorithm.value} join for {pred} with strategy {config.strategy}, "
        f"mode {config.mode.value}, {config.workers} workers"
    )
    return _JoinPipeline(collection, pred, config, other).run()


def run_host_join(
    collection: Collection,
    pred: SimilarityPredicate,
    *,
    algorithm: Union[Algorithm, str] = Algorithm.PPJOIN,
    mode: OutputMode = OutputMode.COUNT,
    other: Optional[Collection] = None,
    group_split: bool = True,
) -> JoinReport:
    """
    Filter and verify sequentially on the calling thread, without chunking.

    Verification time is the time spent inside the verifier; filtering is the rest.
    """
    algorithm = Algorithm(algorithm)
    host = HostVerifier(collection, pred, mode, other)
    started = perf_counter()
    generation = generate_candidates(algorithm, collection, pred, host, host, other=other, group_split=group_split)
    elapsed = perf_counter() - started
    pairs = _canonical(host.pairs, other is None) if mode is OutputMode.PAIRS else None
    timings = PhaseTimings(
        filtering=max(0.0, elapsed - host.elapsed),
        verification=host.elapsed,
        join=perf_counter() - started,
    )
    logger.info(f"Host join finished: {host.count} pairs in {timings.join:.3f}s")
    return JoinReport(
        count=host.count,
        pairs=pairs,
        timings=timings,
        algorithm=algorithm.value,
        predicate=str(pred),
        strategy="host",
        candidate_count=host.pair_count,
        host_pair_count=host.pair_count,
        generation=generation,
        verification=host.stats,
    )
