"""
Tests for the chunk layout, pair verification, Intersect Path and the strategies.
"""

from typing import List, Tuple

import numpy as np
import pytest

from ssjoin_api.collection import Collection, build_dictionary, preprocess, preprocess_coded
from ssjoin_api.joiners import CandidateBatch
from ssjoin_api.oracle import synth_collection
from ssjoin_api.similarity import SimilarityPredicate, equivalent_overlap
from ssjoin_api.verify import (
    ENTRY_BYTES,
    TOKEN_BYTES,
    CandidateChunk,
    ChunkBuilder,
    OutputMode,
    PathPartition,
    Strategy,
    StrategyKind,
    VerificationStats,
    intersect_path_partitions,
    partition_count,
    reduce_counts,
    resolve_strategy,
    seal_chunk,
    strategy_a,
    strategy_b,
    strategy_c,
    verify_chunk,
    verify_pair_count,
)

GROUP_SIZES = [1, 2, 4, 8, 16, 32, 64, 128, 256]


@pytest.fixture
def small_collection() -> Collection:
    """Fixture of five 4-token sets whose indices equal their line numbers."""
    return preprocess_coded(
        [[0, 1, 2, 3], [0, 4, 5, 6], [1, 2, 3, 4], [7, 8, 9, 10], [7, 8, 9, 11]]
    )


@pytest.fixture
def walkthrough_chunk() -> CandidateChunk:
    """Fixture chunk: probe 1 has one candidate, probe 2 none, probe 4 two."""
    builder = ChunkBuilder(None, keep_empty=True)
    for batch in (CandidateBatch(1, (0,)), CandidateBatch(2, ()), CandidateBatch(4, (0, 3))):
        assert list(builder.add(batch)) == []
    return seal_chunk(builder)


def _random_batches(rng: np.random.Generator, count: int, max_id: int = 500) -> List[CandidateBatch]:
    batches = []
    for probe in range(count):
        width = int(rng.integers(0, 12))
        candidates = sorted(set(rng.integers(0, max_id, size=width).tolist()))
        batches.append(CandidateBatch(probe, tuple(candidates)))
    return batches


def _random_sorted_pair(rng: np.random.Generator, max_size: int) -> Tuple[List[int], List[int]]:
    universe = int(rng.integers(1, 3 * max_size + 2))
    size_r = int(rng.integers(0, min(max_size, universe) + 1))
    size_s = int(rng.integers(0, min(max_size, universe) + 1))
    r = sorted(rng.choice(universe, size=size_r, replace=False).tolist())
    s = sorted(rng.choice(universe, size=size_s, replace=False).tolist())
    return r, s


def _merge_path(r: List[int], s: List[int]) -> List[Tuple[int, int]]:
    # Position before every hop of the sequential merge path, plus the end point
    i = j = 0
    points = [(0, 0)]
    while i < len(r) or j < len(s):
        if j >= len(s) or (i < len(r) and r[i] <= s[j]):
            i += 1
        else:
            j += 1
        points.append((i, j))
    return points


def test_seal_chunk_layout(walkthrough_chunk: CandidateChunk) -> None:
    """Test the C and C_O arrays of a chunk with an empty probe."""
    assert walkthrough_chunk.offsets.tolist() == [1, 1, 2, 1, 4, 3]
    assert walkthrough_chunk.candidates.tolist() == [0, 0, 3]
    assert walkthrough_chunk.candidate_count == 3
    assert walkthrough_chunk.byte_size == TOKEN_BYTES * 9
    assert walkthrough_chunk.decode()[1] == CandidateBatch(2, ())


def test_seal_empty_builder() -> None:
    """Test that sealing an empty builder is refused."""
    with pytest.raises(ValueError, match="empty chunk"):
        seal_chunk(ChunkBuilder(None))


def test_builder_rejects_tiny_budget() -> None:
    """Test that a budget below one candidate record is refused."""
    with pytest.raises(ValueError):
        ChunkBuilder(ENTRY_BYTES)


def test_builder_omits_empty_batches() -> None:
    """Test that probes without candidates are skipped by default."""
    builder = ChunkBuilder(None)
    for batch in (CandidateBatch(0, ()), CandidateBatch(1, (0,)), CandidateBatch(2, ())):
        assert list(builder.add(batch)) == []

    assert seal_chunk(builder).decode() == [CandidateBatch(1, (0,))]


def test_builder_splits_oversized_batch() -> None:
    """Test that a batch larger than the budget spans several chunks."""
    builder = ChunkBuilder(ENTRY_BYTES + 3 * TOKEN_BYTES)

    first = list(builder.add(CandidateBatch(7, (1, 2, 3, 4, 5))))
    second = list(builder.add(CandidateBatch(8, (6,))))
    last = seal_chunk(builder)

    assert [chunk.decode() for chunk in first] == [[CandidateBatch(7, (1, 2, 3))]]
    assert [chunk.decode() for chunk in second] == [[CandidateBatch(7, (4, 5))]]
    assert last.decode() == [CandidateBatch(8, (6,))]
    assert [chunk.sequence for chunk in first + second + [last]] == [0, 1, 2]


def test_chunk_round_trip() -> None:
    """Test that decoding sealed chunks reproduces the emitted batches."""
    rng = np.random.default_rng(7)
    batches = _random_batches(rng, 1000)

    builder = ChunkBuilder(None, keep_empty=True)
    for batch in batches:
        assert list(builder.add(batch)) == []
    assert seal_chunk(builder).decode() == batches


@pytest.mark.parametrize("budget", [12, 40, 64, 1000])
def test_chunks_respect_budget(budget: int) -> None:
    """Test that every chunk fits its budget and the stream decodes intact."""
    rng = np.random.default_rng(budget)
    batches = [batch for batch in _random_batches(rng, 300) if batch.candidates]

    builder = ChunkBuilder(budget)
    chunks = [chunk for batch in batches for chunk in builder.add(batch)]
    if builder:
        chunks.append(seal_chunk(builder))

    assert all(chunk.byte_size <= budget for chunk in chunks)
    decoded = [batch for chunk in chunks for batch in chunk.decode()]
    pairs = [(batch.probe, candidate) for batch in decoded for candidate in batch.candidates]
    assert pairs == [(batch.probe, candidate) for batch in batches for candidate in batch.candidates]


def test_chunk_split() -> None:
    """Test slabs of whole entries with rebased offsets."""
    rng = np.random.default_rng(3)
    builder = ChunkBuilder(None)
    for batch in _random_batches(rng, 40):
        list(builder.add(batch))
    chunk = seal_chunk(builder)

    slabs = chunk.split(4)

    assert 1 < len(slabs) <= 4
    assert np.array_equal(np.concatenate([slab.candidates for slab in slabs]), chunk.candidates)
    assert [batch for slab in slabs for batch in slab.decode()] == chunk.decode()
    assert all(slab.offsets[-1] == slab.candidate_count for slab in slabs)
    assert chunk.split(1) == [chunk]


def test_verify_pair_count_examples() -> None:
    """Test hand-computed intersections."""
    assert verify_pair_count([1, 2, 3], [1, 2, 3], 3) == (3, True)
    assert verify_pair_count([1, 3, 5], [2, 4, 6], 1) == (0, False)
    assert verify_pair_count([1, 2, 4, 7], [2, 3, 7, 9], 2) == (2, True)


def test_verify_pair_count_early_exits() -> None:
    """Test both early exits and their counters."""
    stats = VerificationStats()

    assert verify_pair_count([1, 2, 3, 4], [1, 2, 3, 4], 2, stop_at_required=True, stats=stats) == (2, True)
    assert stats.comparisons == 2
    assert stats.early_accepts == 1

    assert verify_pair_count([1, 2, 3, 4, 5], [6, 7, 8, 9, 10], 5, stats=stats) == (0, False)
    assert stats.comparisons == 3
    assert stats.early_rejections == 1
    assert stats.pairs == 2


def test_verify_pair_count_exact_when_met() -> None:
    """Test that the overlap is exact without stop_at_required."""
    assert verify_pair_count([1, 2, 3, 4], [1, 2, 3, 4], 2) == (4, True)


def test_early_termination_soundness() -> None:
    """Test comparison bounds and that early rejections are true rejections."""
    rng = np.random.default_rng(11)
    pruned_early = 0
    for _ in range(2000):
        r, s = _random_sorted_pair(rng, 30)
        true_overlap = len(set(r) & set(s))
        required = int(rng.integers(0, 20))
        stats = VerificationStats()

        overlap, met = verify_pair_count(r, s, required, stats=stats)

        assert stats.comparisons <= len(r) + len(s)
        assert met == (true_overlap >= required)
        if met:
            assert overlap == true_overlap
        elif stats.early_rejections:
            pruned_early += 1
    assert pruned_early > 0


def test_partition_spacing() -> None:
    """Test that cross diagonals of two 10-token sets with B=4 are 5 hops apart."""
    r = list(range(0, 20, 2))
    s = list(range(1, 21, 2))

    partitions = intersect_path_partitions(r, s, 4)

    assert [partition.hop_budget for partition in partitions] == [5, 5, 5, 5]
    assert [partition.hop_budget for partition in intersect_path_partitions(r, s, 8)] == [3, 3, 3, 3, 3, 3, 2, 0]


def test_single_partition() -> None:
    """Test that B=1 walks the whole path."""
    r, s = [1, 2, 4, 7], [2, 3, 7, 9]

    partitions = intersect_path_partitions(r, s, 1)

    assert partitions == [PathPartition(0, 0, 8)]
    assert partition_count(r, s, partitions[0]) == 2


@pytest.mark.parametrize("group_size", [1, 2, 4, 8, 32, 128])
def test_intersect_path_equivalence(group_size: int) -> None:
    """Test partitioned counts against the sequential intersection, with path replay."""
    rng = np.random.default_rng(group_size)
    for _ in range(300):
        r, s = _random_sorted_pair(rng, 200)
        if rng.random() < 0.3 and r:
            # Skewed pair: s is a small subset of r
            s = sorted(rng.choice(r, size=max(1, len(r) // 100), replace=False).tolist())
        total = len(r) + len(s)
        spacing = -(-total // group_size)
        path = _merge_path(r, s)

        partitions = intersect_path_partitions(r, s, group_size)

        assert len(partitions) == group_size
        assert sum(partition.hop_budget for partition in partitions) == total
        assert all(partition.hop_budget <= spacing for partition in partitions)
        hop = 0
        for partition in partitions:
            assert (partition.start_r, partition.start_s) == path[hop]
            hop += partition.hop_budget
        counts = [partition_count(r, s, partition) for partition in partitions]
        assert reduce_counts(counts) == len(set(r) & set(s))


def test_reduce_counts() -> None:
    """Test the tree reduction."""
    assert reduce_counts([]) == 0
    assert reduce_counts([0, 0, 0]) == 0
    assert reduce_counts([1, 2, 3, 4]) == 10
    assert reduce_counts([5]) == 5

    values = np.random.default_rng(1).integers(0, 1000, size=10**6).tolist()
    assert reduce_counts(values) == sum(values)


def test_walkthrough_chunk(small_collection: Collection, walkthrough_chunk: CandidateChunk) -> None:
    """Test that only the last pair of the chunk is similar, for every strategy."""
    pred = SimilarityPredicate.parse("jaccard", "0.6")

    for output in (
        strategy_a(walkthrough_chunk, small_collection, pred, OutputMode.PAIRS),
        strategy_b(walkthrough_chunk, small_collection, pred, OutputMode.PAIRS, 4),
        strategy_c(walkthrough_chunk, small_collection, pred, OutputMode.PAIRS, 4),
    ):
        assert output.flags is not None
        assert output.flags.tolist() == [False, False, True]
        assert output.count == 1


def test_empty_chunk(small_collection: Collection) -> None:
    """Test a chunk whose probes have no candidates."""
    pred = SimilarityPredicate.parse("jaccard", "0.6")
    builder = ChunkBuilder(None, keep_empty=True)
    list(builder.add(CandidateBatch(0, ())))
    chunk = seal_chunk(builder)

    counted = verify_chunk(chunk, small_collection, pred, Strategy(StrategyKind.A), OutputMode.COUNT)
    flagged = verify_chunk(chunk, small_collection, pred, Strategy(StrategyKind.C, 8), OutputMode.PAIRS)

    assert counted.count == 0
    assert counted.flags is None
    assert flagged.flags is not None and len(flagged.flags) == 0


def _fixed_chunk(batches: List[CandidateBatch]) -> CandidateChunk:
    builder = ChunkBuilder(None)
    for batch in batches:
        list(builder.add(batch))
    return seal_chunk(builder)


def _random_chunk(collection: Collection, seed: int) -> CandidateChunk:
    rng = np.random.default_rng(seed)
    builder = ChunkBuilder(None)
    for probe in range(1, len(collection)):
        width = int(rng.integers(0, min(probe, 15) + 1))
        candidates = sorted(rng.choice(probe, size=width, replace=False).tolist())
        list(builder.add(CandidateBatch(probe, tuple(candidates))))
    return seal_chunk(builder)


@pytest.mark.parametrize("distribution", ["uniform", "duplicates"])
def test_strategy_equivalence(distribution: str) -> None:
    """Test byte-identical flags and equal counts for every strategy and group size."""
    records = synth_collection(4, 80, distribution, 30, max_size=20)
    collection = preprocess(records, build_dictionary(records))
    pred = SimilarityPredicate.parse("jaccard", "0.4")
    chunk = _random_chunk(collection, 4)

    reference = strategy_a(chunk, collection, pred, OutputMode.PAIRS)
    assert reference.flags is not None
    assert reference.count == int(reference.flags.sum())
    assert reference.count > 0

    for group_size in GROUP_SIZES:
        for output in (
            strategy_b(chunk, collection, pred, OutputMode.PAIRS, group_size),
            strategy_c(chunk, collection, pred, OutputMode.PAIRS, group_size),
        ):
            assert output.flags is not None
            assert output.flags.tobytes() == reference.flags.tobytes()
            assert output.count == reference.count
        assert strategy_b(chunk, collection, pred, OutputMode.COUNT, group_size).count == reference.count
        assert strategy_c(chunk, collection, pred, OutputMode.COUNT, group_size).count == reference.count


def test_flags_match_exact_overlaps() -> None:
    """Test flags against intersections computed with Python sets."""
    records = synth_collection(8, 100, "zipf", 40, max_size=15)
    collection = preprocess(records, build_dictionary(records))
    pred = SimilarityPredicate.parse("dice", "0.6")
    chunk = _random_chunk(collection, 8)

    output = strategy_b(chunk, collection, pred, OutputMode.PAIRS, 8)

    assert output.flags is not None
    expected = []
    for batch in chunk.decode():
        r = collection.set_tokens(batch.probe)
        for candidate in batch.candidates:
            s = collection.set_tokens(candidate)
            expected.append(len(set(r) & set(s)) >= equivalent_overlap(pred, len(r), len(s)))
    assert output.flags.tolist() == expected


def test_output_accounting(small_collection: Collection, walkthrough_chunk: CandidateChunk) -> None:
    """Test that flag bytes are a quarter of the candidate bytes."""
    pred = SimilarityPredicate.parse("jaccard", "0.6")

    output = verify_chunk(walkthrough_chunk, small_collection, pred, Strategy(), OutputMode.PAIRS)

    assert output.output_bytes * 4 == walkthrough_chunk.candidate_bytes


def test_resolve_strategy() -> None:
    """Test the auto strategy choice by average probe size."""
    small = preprocess_coded([[k, k + 1] for k in range(0, 20, 2)])
    large = preprocess_coded([list(range(k, k + 200)) for k in range(4)])
    small_chunk = _fixed_chunk([CandidateBatch(3, (0, 1)), CandidateBatch(9, (8,))])
    large_chunk = _fixed_chunk([CandidateBatch(1, (0,)), CandidateBatch(3, (0, 2))])

    assert resolve_strategy(Strategy(StrategyKind.AUTO, 16), small_chunk, small) == Strategy(StrategyKind.B, 16)
    assert resolve_strategy(Strategy(StrategyKind.AUTO, 8), large_chunk, large) == Strategy(StrategyKind.C, 64)
    assert resolve_strategy(Strategy(StrategyKind.AUTO, 128), large_chunk, large) == Strategy(StrategyKind.C, 128)
    assert resolve_strategy(Strategy(StrategyKind.A), large_chunk, large) == Strategy(StrategyKind.A)


def test_strategy_parse() -> None:
    """Test strategy names and group size validation."""
    assert Strategy.parse("C", 64) == Strategy(StrategyKind.C, 64)
    assert str(Strategy(StrategyKind.A)) == "a"
    assert str(Strategy(StrategyKind.B, 16)) == "b/16"

    with pytest.raises(ValueError):
        Strategy.parse("d")
    with pytest.raises(ValueError):
        Strategy(StrategyKind.B, 3)


def test_span_by_set_size() -> None:
    """Test the critical path of B and C on small and large sets."""
    pred = SimilarityPredicate.parse("jaccard", "0.9")
    large = preprocess_coded([list(range(k, k + 200)) for k in range(0, 40, 2)])
    large_chunk = _fixed_chunk([CandidateBatch(probe, (probe - 1,)) for probe in range(1, 20)])
    small = preprocess_coded([[k, k + 1, k + 2, k + 3] for k in range(12)])
    small_chunk = _fixed_chunk([CandidateBatch(probe, tuple(range(probe))) for probe in range(1, 12)])
    spans = {}
    for name, chunk, collection in (("large", large_chunk, large), ("small", small_chunk, small)):
        for kind, group_size in ((StrategyKind.B, 32), (StrategyKind.C, 128)):
            stats = VerificationStats()
            verify_chunk(chunk, collection, pred, Strategy(kind, group_size), OutputMode.COUNT, stats=stats)
            spans[name, kind] = stats.span

    assert spans["large", StrategyKind.C] < spans["large", StrategyKind.B]
    assert spans["small", StrategyKind.B] < spans["small", StrategyKind.C]
