"""
Candidate generation by index nested loop: AllPairs, PPJoin and GroupJoin.

Self-joins build the inverted index incrementally: every set is first probed
against the index and then indexed itself, so each probe only meets sets that
are never larger than itself. Candidates leave through a sink one probe at a
time.
"""

import logging
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .collection import Collection
from .filters import MatchPosition, positional_filter, prefix_lengths, probe_prefix_length
from .similarity import SimilarityPredicate, size_bounds

logger = logging.getLogger(__name__)

_PRUNED = -1
_NO_POSTINGS: List[int] = []


class Algorithm(str, Enum):
    """Candidate generation algorithms."""

    ALLPAIRS = "allpairs"
    PPJOIN = "ppjoin"
    GROUPJOIN = "groupjoin"


@dataclass(frozen=True)
class CandidateBatch:
    """Deduplicated, filtered candidates of one probe set, ascending."""

    probe: int
    candidates: Tuple[int, ...]


CandidateSink = Callable[[CandidateBatch], None]


@dataclass
class GenerationStats:
    """Counters collected while generating candidates."""

    probes: int = 0
    pre_candidates: int = 0
    candidates: int = 0
    groups: int = 0
    # GroupJoin: member pairs from inter-group candidates, and group-expansion pairs
    expanded_pairs: int = 0
    host_pairs: int = 0


@dataclass(frozen=True)
class Group:
    """Sets sharing size and probe prefix, handled as a single set."""

    key: Tuple[int, Tuple[int, ...]]
    members: Tuple[int, ...]

    @property
    def size(self) -> int:
        return self.key[0]


class InvertedIndex:
    """Postings lists of (set index, token position), appended in set-index order."""

    def __init__(self) -> None:
        self._sets: Dict[int, List[int]] = {}
        self._positions: Dict[int, List[int]] = {}
        self._entries = 0

    def __len__(self) -> int:
        return self._entries

    def add(self, set_index: int, prefix: Sequence[int]) -> None:
        """Index the given prefix tokens of a set."""
        for position, token in enumerate(prefix):
            ids = self._sets.get(token)
            if ids is None:
                self._sets[token] = [set_index]
                self._positions[token] = [position]
            else:
                ids.append(set_index)
                self._positions[token].append(position)
        self._entries += len(prefix)

    def postings(self, token: int) -> Tuple[List[int], List[int]]:
        """Return the set indices and token positions posted under a token."""
        return self._sets.get(token, _NO_POSTINGS), self._positions.get(token, _NO_POSTINGS)


class _ProbeState:
    """Epoch-stamped scratch arrays for pre-candidate deduplication."""

    def __init__(self, capacity: int) -> None:
        self.seen = [-1] * capacity
        self.overlap = [0] * capacity


def _probe_index(
    index: InvertedIndex,
    tokens: Sequence[int],
    probe_len: int,
    admissible: Tuple[int, int],
    size_r: int,
    sizes: Sequence[int],
    pred: SimilarityPredicate,
    positional: bool,
    state: _ProbeState,
    epoch: int,
    stats: GenerationStats,
) -> List[int]:
    lo, hi = admissible
    seen, overlap = state.seen, state.overlap
    candidates: List[int] = []
    for pos_r in range(probe_len):
        ids, positions = index.postings(tokens[pos_r])
        for k in range(bisect_left(ids, lo), len(ids)):
            s = ids[k]
            if s >= hi:
                break
            stats.pre_candidates += 1
            if seen[s] != epoch:
                seen[s] = epoch
                overlap[s] = 0
                candidates.append(s)
            elif overlap[s] == _PRUNED:
                continue
            if positional:
                current = overlap[s] + 1
                match = MatchPosition(pos_r, positions[k])
                overlap[s] = current if positional_filter(pred, size_r, sizes[s], match, current) else _PRUNED
    if positional:
        candidates = [s for s in candidates if overlap[s] != _PRUNED]
    candidates.sort()
    return candidates


def _self_join(
    collection: Collection, pred: SimilarityPredicate, sink: CandidateSink, positional: bool
) -> GenerationStats:
    sets = collection.set_lists()
    sizes = collection.sizes.tolist()
    index = InvertedIndex()
    state = _ProbeState(len(sets))
    stats = GenerationStats()

    for i, tokens in enumerate(sets):
        size = sizes[i]
        # Indexed sets are never larger than the probe: only the lower bound prunes
        first = bisect_left(sizes, size_bounds(pred, size)[0])
        probe_len, index_len = prefix_lengths(pred, size)
        candidates = _probe_index(
            index, tokens, probe_len, (first, i), size, sizes, pred, positional, state, i, stats
        )
        stats.probes += 1
        stats.candidates += len(candidates)
        sink(CandidateBatch(i, tuple(candidates)))
        index.add(i, tokens[:index_len])
    return stats


def _foreign_join(
    probes: Collection,
    indexed: Collection,
    pred: SimilarityPredicate,
    sink: CandidateSink,
    positional: bool,
) -> GenerationStats:
    # Partners may be larger or smaller than the probe, so S is indexed with probe prefixes
    s_sets = indexed.set_lists()
    s_sizes = indexed.sizes.tolist()
    index = InvertedIndex()
    for j, tokens in enumerate(s_sets):
        index.add(j, tokens[:probe_prefix_length(pred, s_sizes[j])])
    logger.debug(f"Indexed {len(s_sets)} sets of the second collection ({len(index)} postings)")

    state = _ProbeState(len(s_sets))
    stats = GenerationStats()
    for i, tokens in enumerate(probes.set_lists()):
        size = len(tokens)
        minsize, maxsize = size_bounds(pred, size)
        admissible = (bisect_left(s_sizes, minsize), bisect_right(s_sizes, maxsize))
        candidates = _probe_index(
            index, tokens, probe_prefix_length(pred, size), admissible, size, s_sizes, pred,
            positional, state, i, stats,
        )
        stats.probes += 1
        stats.candidates += len(candidates)
        sink(CandidateBatch(i, tuple(candidates)))
    return stats


def allpairs_generate(
    collection: Collection,
    pred: SimilarityPredicate,
    sink: CandidateSink,
    *,
    other: Optional[Collection] = None,
) -> GenerationStats:
    """
    Stream AllPairs candidates: prefix and length filters only.

    Args:
        collection: The probing collection (the only one in a self-join).
        pred: The similarity predicate.
        sink: Receives one CandidateBatch per probe set, in probe order.
        other: The indexed collection of an R-S join.

    Returns:
        Generation counters.
    """
    if other is None:
        return _self_join(collection, pred, sink, positional=False)
    return _foreign_join(collection, other, pred, sink, positional=False)


def ppjoin_generate(
    collection: Collection,
    pred: SimilarityPredicate,
    sink: CandidateSink,
    *,
    other: Optional[Collection] = None,
) -> GenerationStats:
    """Stream PPJoin candidates: AllPairs plus the positional filter on every index match."""
    if other is None:
        return _self_join(collection, pred, sink, positional=True)
    return _foreign_join(collection, other, pred, sink, positional=True)


def form_groups(collection: Collection, pred: SimilarityPredicate) -> List[Group]:
    """
    Group sets with identical size and probe prefix.

    Sets are ordered by size then lexicographically, so every group is a run
    of consecutive set indices.
    """
    groups: List[Group] = []
    members: List[int] = []
    current: Optional[Tuple[int, Tuple[int, ...]]] = None
    for i, tokens in enumerate(collection.set_lists()):
        size = len(tokens)
        key = (size, tuple(tokens[:probe_prefix_length(pred, size)]))
        if key != current:
            if current is not None:
                groups.append(Group(current, tuple(members)))
            current, members = key, []
        members.append(i)
    if current is not None:
        groups.append(Group(current, tuple(members)))
    return groups


def groupjoin_generate(
    collection: Collection,
    pred: SimilarityPredicate,
    sink: CandidateSink,
    host_verifier: CandidateSink,
    *,
    split: bool = True,
) -> GenerationStats:
    """
    Stream GroupJoin candidates.

    The group-level nested loop applies the PPJoin filters to group
    representatives. Candidate groups expand into member pairs that go to the
    sink. Pairs inside a group come from group expansion: with ``split`` they
    are handed to ``host_verifier``, otherwise they join the member's batch.

    Returns:
        Generation counters.
    """
    sets = collection.set_lists()
    groups = form_groups(collection, pred)
    group_sizes = [group.size for group in groups]
    index = InvertedIndex()
    state = _ProbeState(len(groups))
    stats = GenerationStats(groups=len(groups))
    logger.info(f"Formed {len(groups)} groups from {len(sets)} sets")

    for g, group in enumerate(groups):
        representative = sets[group.members[0]]
        size = group.size
        first = bisect_left(group_sizes, size_bounds(pred, size)[0])
        probe_len, index_len = prefix_lengths(pred, size)
        candidate_groups = _probe_index(
            index, representative, probe_len, (first, g), size, group_sizes, pred, True, state, g, stats
        )
        inter = tuple(member for h in candidate_groups for member in groups[h].members)

        for position, member in enumerate(group.members):
            intra = group.members[:position]
            stats.probes += 1
            stats.expanded_pairs += len(inter)
            stats.host_pairs += len(intra)
            if split:
                stats.candidates += len(inter)
                sink(CandidateBatch(member, inter))
                if intra:
                    host_verifier(CandidateBatch(member, intra))
            else:
                stats.candidates += len(inter) + len(intra)
                sink(CandidateBatch(member, inter + intra))
        index.add(g, representative[:index_len])
    return stats


def generate_candidates(
    algorithm: Algorithm,
    collection: Collection,
    pred: SimilarityPredicate,
    sink: CandidateSink,
    host_verifier: Optional[CandidateSink] = None,
    *,
    other: Optional[Collection] = None,
    group_split: bool = True,
) -> GenerationStats:
    """
    Run the chosen algorithm.

    Raises:
        ValueError: For a GroupJoin R-S join, or a split GroupJoin without host verifier.
    """
    logger.info(f"Generating candidates with {algorithm.value} for {pred}")
    if algorithm is Algorithm.ALLPAIRS:
        return allpairs_generate(collection, pred, sink, other=other)
    if algorithm is Algorithm.PPJOIN:
        return ppjoin_generate(collection, pred, sink, other=other)
    if other is not None:
        error_msg = "groupjoin supports self-joins only"
        logger.error(error_msg)
        raise ValueError(error_msg)
    if host_verifier is None:
        if group_split:
            error_msg = "groupjoin with group split needs a host verifier"
            logger.error(error_msg)
            raise ValueError(error_msg)
        host_verifier = sink
    return groupjoin_generate(collection, pred, sink, host_verifier, split=group_split)
