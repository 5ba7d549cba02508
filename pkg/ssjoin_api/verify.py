"""
Verification engine: candidate chunk layout, pair verification, and the
three work-assignment strategies.

A sealed chunk holds the candidate ids C and the interleaved probe/offset
array C_O. Strategies run over an abstract pool of worker groups of size B:

- A: one worker verifies every candidate of a probe set.
- B: a group of B workers shares the candidates of a probe set.
- C: a group of B workers cooperates on every single pair via Intersect Path.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .collection import Collection
from .config import MIN_CHUNK_BUDGET, is_power_of_two
from .joiners import CandidateBatch
from .similarity import SimilarityPredicate, equivalent_overlap

logger = logging.getLogger(__name__)

TOKEN_BYTES = 4
FLAG_BYTES = 1
ENTRY_BYTES = 2 * TOKEN_BYTES

# Auto strategy: probe sets up to this average size go to strategy B
AUTO_SMALL_SET_LIMIT = 10
AUTO_MAX_GROUP_SIZE = 256


class OutputMode(str, Enum):
    """Aggregate count, or the full list of similar pairs."""

    COUNT = "count"
    PAIRS = "pairs"


class StrategyKind(str, Enum):
    A = "a"
    B = "b"
    C = "c"
    AUTO = "auto"


@dataclass(frozen=True)
class Strategy:
    """A work-assignment strategy and its worker group size."""

    kind: StrategyKind = StrategyKind.AUTO
    group_size: int = 32

    def __post_init__(self) -> None:
        if not is_power_of_two(self.group_size):
            error_msg = f"group size must be a power of two (got {self.group_size})"
            logger.error(error_msg)
            raise ValueError(error_msg)

    @classmethod
    def parse(cls, name: str, group_size: int = 32) -> "Strategy":
        try:
            kind = StrategyKind(name.strip().lower())
        except ValueError:
            error_msg = f"unknown strategy: {name!r}"
            logger.error(error_msg)
            raise ValueError(error_msg) from None
        return cls(kind, group_size)

    def __str__(self) -> str:
        if self.kind is StrategyKind.A:
            return "a"
        return f"{self.kind.value}/{self.group_size}"


@dataclass(frozen=True, eq=False)
class CandidateChunk:
    """
    Serialized candidates of consecutive probe sets.

    Even positions of ``offsets`` hold probe ids, odd positions the end offset
    of that probe's candidates in ``candidates``.
    """

    candidates: np.ndarray
    offsets: np.ndarray
    sequence: int = 0

    @property
    def candidate_count(self) -> int:
        return len(self.candidates)

    @property
    def entry_count(self) -> int:
        return len(self.offsets) // 2

    @property
    def candidate_bytes(self) -> int:
        return int(self.candidates.nbytes)

    @property
    def byte_size(self) -> int:
        return int(self.candidates.nbytes + self.offsets.nbytes)

    def probe_ids(self) -> np.ndarray:
        return self.offsets[0::2]

    def entries(self) -> Iterator[Tuple[int, int, int]]:
        """Yield ``(probe, start, end)`` slices of ``candidates``."""
        start = 0
        flat = self.offsets.tolist()
        for k in range(0, len(flat), 2):
            end = flat[k + 1]
            yield flat[k], start, end
            start = end

    def decode(self) -> List[CandidateBatch]:
        """Rebuild the batches this chunk was serialized from."""
        ids = self.candidates.tolist()
        return [CandidateBatch(probe, tuple(ids[start:end])) for probe, start, end in self.entries()]

    def split(self, parts: int) -> List["CandidateChunk"]:
        """
        Divide the chunk into at most ``parts`` slabs of whole entries,
        balanced by candidate count.
        """
        entries = self.entry_count
        if parts <= 1 or entries <= 1:
            return [self]
        probes = self.offsets[0::2]
        ends = self.offsets[1::2].astype(np.int64)
        # Cut after the entry holding each balanced candidate position
        targets = (np.arange(1, parts, dtype=np.int64) * self.candidate_count) // parts
        cuts = np.searchsorted(ends, targets, side="left") + 1
        edges = sorted({0, entries, *(int(cut) for cut in cuts if 0 < cut < entries)})

        slabs = []
        for a, b in zip(edges, edges[1:]):
            # End offsets restart from zero in every slab
            begin = int(ends[a - 1]) if a else 0
            offsets = np.empty(2 * (b - a), dtype=np.uint32)
            offsets[0::2] = probes[a:b]
            offsets[1::2] = ends[a:b] - begin
            slabs.append(CandidateChunk(self.candidates[begin:int(ends[b - 1])], offsets, self.sequence))
        return slabs


class ChunkBuilder:
    """Accumulates candidate batches until the chunk budget M_c is reached."""

    def __init__(self, budget: Optional[int], keep_empty: bool = False) -> None:
        """
        Args:
            budget: Byte budget for C plus C_O, or None for no limit.
            keep_empty: Keep C_O entries for probes without candidates.
        """
        if budget is not None and budget < MIN_CHUNK_BUDGET:
            error_msg = f"chunk budget {budget} cannot hold a single candidate record"
            logger.error(error_msg)
            raise ValueError(error_msg)
        self.budget = budget
        self.keep_empty = keep_empty
        self.sealed = 0
        self._candidates: List[int] = []
        self._offsets: List[int] = []

    def __len__(self) -> int:
        return len(self._offsets) // 2

    @property
    def byte_size(self) -> int:
        return TOKEN_BYTES * (len(self._candidates) + len(self._offsets))

    def add(self, batch: CandidateBatch) -> Iterator[CandidateChunk]:
        """
        Append a batch, yielding every chunk sealed on the way.

        A batch that does not fit seals the open chunk first; a batch larger
        than the whole budget is split over several chunks under the same probe.
        """
        candidates = batch.candidates
        if not candidates:
            if self.keep_empty:
                if self.budget is not None and self.byte_size + ENTRY_BYTES > self.budget:
                    yield seal_chunk(self)
                self._offsets.extend((batch.probe, len(self._candidates)))
            return

        position = 0
        while position < len(candidates):
            remaining = len(candidates) - position
            take = remaining
            if self.budget is not None and self.byte_size + ENTRY_BYTES + TOKEN_BYTES * remaining > self.budget:
                if self:
                    # Seal and retry the rest in an empty chunk
                    yield seal_chunk(self)
                    continue
                take = (self.budget - ENTRY_BYTES) // TOKEN_BYTES
            self._candidates.extend(candidates[position:position + take])
            self._offsets.extend((batch.probe, len(self._candidates)))
            position += take
            if position < len(candidates):
                yield seal_chunk(self)

    def _take(self) -> Tuple[List[int], List[int]]:
        candidates, offsets = self._candidates, self._offsets
        self._candidates, self._offsets = [], []
        return candidates, offsets


def seal_chunk(builder: ChunkBuilder) -> CandidateChunk:
    """
    Turn the builder contents into primitive arrays and reset the builder.

    Raises:
        ValueError: If the builder holds no batch.
    """
    if not builder:
        error_msg = "cannot seal an empty chunk"
        logger.error(error_msg)
        raise ValueError(error_msg)
    candidates, offsets = builder._take()
    chunk = CandidateChunk(
        np.asarray(candidates, dtype=np.uint32), np.asarray(offsets, dtype=np.uint32), builder.sealed
    )
    builder.sealed += 1
    logger.debug(
        f"Sealed chunk {chunk.sequence}: {chunk.entry_count} probes, "
        f"{chunk.candidate_count} candidates, {chunk.byte_size} bytes"
    )
    return chunk


@dataclass
class VerificationStats:
    """Comparison counters of verified pairs."""

    pairs: int = 0
    comparisons: int = 0
    # Upper bound |r| + |s| summed over verified pairs
    merge_bound: int = 0
    early_rejections: int = 0
    early_accepts: int = 0
    # Steps on the critical path of the worker groups
    span: int = 0

    def record(self, comparisons: int, bound: int, met: bool, early: bool) -> None:
        self.pairs += 1
        self.comparisons += comparisons
        self.merge_bound += bound
        if early:
            if met:
                self.early_accepts += 1
            else:
                self.early_rejections += 1

    def merge(self, other: "VerificationStats") -> None:
        self.pairs += other.pairs
        self.comparisons += other.comparisons
        self.merge_bound += other.merge_bound
        self.early_rejections += other.early_rejections
        self.early_accepts += other.early_accepts
        self.span += other.span


@dataclass(frozen=True, eq=False)
class VerificationOutput:
    """Per-candidate flags O (pairs mode) and the number of similar pairs."""

    count: int
    flags: Optional[np.ndarray] = field(default=None)

    @property
    def output_bytes(self) -> int:
        return int(self.flags.nbytes) if self.flags is not None else 0


def verify_pair_count(
    r: Sequence[int],
    s: Sequence[int],
    required: int,
    *,
    stop_at_required: bool = False,
    stats: Optional[VerificationStats] = None,
) -> Tuple[int, bool]:
    """
    Count the overlap of two strictly increasing token lists with a merge loop.

    The loop stops as soon as the remaining tokens cannot reach ``required``.
    With ``stop_at_required`` it also stops once ``required`` is reached, and
    the returned overlap is then ``required`` rather than the exact one.

    Returns:
        ``(overlap, met)`` where ``met`` tells whether the true overlap reaches ``required``.
    """
    len_r, len_s = len(r), len(s)
    i = j = overlap = comparisons = 0
    early = False
    while i < len_r and j < len_s:
        if overlap + min(len_r - i, len_s - j) < required or (stop_at_required and overlap >= required):
            early = True
            break
        comparisons += 1
        a, b = r[i], s[j]
        if a == b:
            overlap += 1
            i += 1
            j += 1
        elif a < b:
            i += 1
        else:
            j += 1
    met = overlap >= required
    if stats is not None:
        stats.record(comparisons, len_r + len_s, met, early)
    return overlap, met


class PathPartition(NamedTuple):
    """Starting point of one worker on the merge path, and its number of hops."""

    start_r: int
    start_s: int
    hop_budget: int


def _merge_path_split(r: Sequence[int], s: Sequence[int], diagonal: int) -> Tuple[int, int]:
    # Binary search along the cross diagonal i + j = diagonal; on ties r goes first
    lo, hi = max(0, diagonal - len(s)), min(diagonal, len(r))
    while lo < hi:
        i = (lo + hi) // 2
        if r[i] <= s[diagonal - i - 1]:
            lo = i + 1
        else:
            hi = i
    return lo, diagonal - lo


def intersect_path_partitions(r: Sequence[int], s: Sequence[int], group_size: int) -> List[PathPartition]:
    """
    Split the merge path of ``r`` and ``s`` among ``group_size`` workers.

    Cross diagonals are placed ``ceil((|r| + |s|) / B)`` hops apart; each
    worker starts where its diagonal meets the path. A diagonal move on equal
    tokens spans two hops, and the hop taking the token of ``s`` owns it.
    """
    total = len(r) + len(s)
    spacing = -(-total // group_size)
    partitions = []
    for lane in range(group_size):
        start = min(lane * spacing, total)
        end = min(start + spacing, total)
        start_r, start_s = _merge_path_split(r, s, start)
        partitions.append(PathPartition(start_r, start_s, end - start))
    return partitions


def partition_count(r: Sequence[int], s: Sequence[int], partition: PathPartition) -> int:
    """Walk one partition of the merge path and count its diagonal moves."""
    i, j = partition.start_r, partition.start_s
    len_r, len_s = len(r), len(s)
    count = 0
    for _ in range(partition.hop_budget):
        if j >= len_s or (i < len_r and r[i] <= s[j]):
            i += 1
        else:
            if i and r[i - 1] == s[j]:
                count += 1
            j += 1
    return count


def reduce_counts(counts: Iterable[int]) -> int:
    """Sum counts with a strided pairwise tree, as a shared-memory reduction does."""
    values = list(counts)
    if not values:
        return 0
    while len(values) > 1:
        if len(values) % 2:
            values.append(0)
        half = len(values) // 2
        values = [values[k] + values[k + half] for k in range(half)]
    return values[0]


def _reduction_depth(group_size: int) -> int:
    return group_size.bit_length() - 1


def _finish(chunk: CandidateChunk, flags: Optional[List[bool]], unit_counts: List[int]) -> VerificationOutput:
    count = reduce_counts(unit_counts)
    if flags is None:
        return VerificationOutput(count)
    array = np.array(flags, dtype=np.bool_)
    assert array.nbytes * TOKEN_BYTES == chunk.candidate_bytes * FLAG_BYTES, "flag array must be ||C|| / 4 bytes"
    return VerificationOutput(count, array)


def strategy_a(
    chunk: CandidateChunk,
    collection: Collection,
    pred: SimilarityPredicate,
    mode: OutputMode,
    *,
    other: Optional[Collection] = None,
    stats: Optional[VerificationStats] = None,
) -> VerificationOutput:
    """One worker per probe set verifies all of its candidates."""
    indexed = other if other is not None else collection
    ids = chunk.candidates.tolist()
    flags: Optional[List[bool]] = [False] * len(ids) if mode is OutputMode.PAIRS else None
    unit_counts = []
    for probe, start, end in chunk.entries():
        r = collection.set_tokens(probe)
        found = 0
        before = stats.comparisons if stats is not None else 0
        for slot in range(start, end):
            s = indexed.set_tokens(ids[slot])
            required = equivalent_overlap(pred, len(r), len(s))
            if verify_pair_count(r, s, required, stop_at_required=True, stats=stats)[1]:
                found += 1
                if flags is not None:
                    flags[slot] = True
        if stats is not None:
            stats.span += stats.comparisons - before
        unit_counts.append(found)
    return _finish(chunk, flags, unit_counts)


def strategy_b(
    chunk: CandidateChunk,
    collection: Collection,
    pred: SimilarityPredicate,
    mode: OutputMode,
    group_size: int,
    *,
    other: Optional[Collection] = None,
    stats: Optional[VerificationStats] = None,
) -> VerificationOutput:
    """A group of workers per probe set; worker k takes every B-th candidate from slot k."""
    indexed = other if other is not None else collection
    ids = chunk.candidates.tolist()
    flags: Optional[List[bool]] = [False] * len(ids) if mode is OutputMode.PAIRS else None
    unit_counts = []
    for probe, start, end in chunk.entries():
        r = collection.set_tokens(probe)
        lane_counts = [0] * group_size
        depth = 0
        # Lanes run in lock step; the slowest one sets the depth
        for lane in range(group_size):
            before = stats.comparisons if stats is not None else 0
            for slot in range(start + lane, end, group_size):
                s = indexed.set_tokens(ids[slot])
                required = equivalent_overlap(pred, len(r), len(s))
                if verify_pair_count(r, s, required, stop_at_required=True, stats=stats)[1]:
                    lane_counts[lane] += 1
                    if flags is not None:
                        flags[slot] = True
            if stats is not None:
                depth = max(depth, stats.comparisons - before)
        if stats is not None:
            stats.span += depth + _reduction_depth(group_size)
        unit_counts.append(reduce_counts(lane_counts))
    return _finish(chunk, flags, unit_counts)


def strategy_c(
    chunk: CandidateChunk,
    collection: Collection,
    pred: SimilarityPredicate,
    mode: OutputMode,
    group_size: int,
    *,
    other: Optional[Collection] = None,
    stats: Optional[VerificationStats] = None,
) -> VerificationOutput:
    """
    A group of workers per probe set; all of them intersect each pair together.

    Partition counting computes the full intersection, there is no early exit.
    Lane 0 records the flag and the group count.
    """
    indexed = other if other is not None else collection
    ids = chunk.candidates.tolist()
    flags: Optional[List[bool]] = [False] * len(ids) if mode is OutputMode.PAIRS else None
    unit_counts = []
    for probe, start, end in chunk.entries():
        r = collection.set_tokens(probe)
        found = 0
        for slot in range(start, end):
            s = indexed.set_tokens(ids[slot])
            # Every worker counts its own stretch of the merge path
            partitions = intersect_path_partitions(r, s, group_size)
            overlap = reduce_counts(partition_count(r, s, partition) for partition in partitions)
            met = overlap >= equivalent_overlap(pred, len(r), len(s))
            if stats is not None:
                stats.record(len(r) + len(s), len(r) + len(s), met, False)
                # Partition search, longest walk, then the count reduction
                search = max(1, min(len(r), len(s))).bit_length()
                longest = max(partition.hop_budget for partition in partitions)
                stats.span += longest + search + _reduction_depth(group_size)
            if met:
                found += 1
                if flags is not None:
                    flags[slot] = True
        unit_counts.append(found)
    return _finish(chunk, flags, unit_counts)


def _next_power_of_two(value: int) -> int:
    return 1 << max(0, value - 1).bit_length()


def resolve_strategy(strategy: Strategy, chunk: CandidateChunk, collection: Collection) -> Strategy:
    """
    Pick a concrete strategy for the auto setting.

    Small probe sets go to B. Larger ones go to C with a group size raised
    so each worker walks about eight hops of a typical pair.
    """
    if strategy.kind is not StrategyKind.AUTO:
        return strategy
    probes = chunk.probe_ids().astype(np.int64)
    average = float(collection.sizes[probes].mean()) if len(probes) else 0.0
    if average <= AUTO_SMALL_SET_LIMIT:
        return Strategy(StrategyKind.B, strategy.group_size)
    lanes = _next_power_of_two(-(-int(average) // 4))
    return Strategy(StrategyKind.C, min(AUTO_MAX_GROUP_SIZE, max(strategy.group_size, lanes)))


def verify_chunk(
    chunk: CandidateChunk,
    collection: Collection,
    pred: SimilarityPredicate,
    strategy: Strategy,
    mode: OutputMode,
    *,
    other: Optional[Collection] = None,
    stats: Optional[VerificationStats] = None,
) -> VerificationOutput:
    """Verify a chunk with the given (or automatically chosen) strategy."""
    concrete = resolve_strategy(strategy, chunk, collection)
    if concrete.kind is StrategyKind.A:
        return strategy_a(chunk, collection, pred, mode, other=other, stats=stats)
    if concrete.kind is StrategyKind.B:
        return strategy_b(chunk, collection, pred, mode, concrete.group_size, other=other, stats=stats)
    return strategy_c(chunk, collection, pred, mode, concrete.group_size, other=other, stats=stats)
