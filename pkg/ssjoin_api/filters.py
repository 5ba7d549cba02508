"""
Prefix, length and positional filters used during candidate generation.
"""

from dataclasses import dataclass
from typing import Tuple

from .similarity import SimilarityPredicate, equivalent_overlap, size_bounds


@dataclass(frozen=True)
class MatchPosition:
    """0-based positions of a shared token in the probe set and the indexed set."""

    pos_r: int
    pos_s: int


def _clamp(length: int, size: int) -> int:
    return max(1, min(size, length))


def probe_prefix_length(pred: SimilarityPredicate, size: int) -> int:
    """
    Prefix length of a probing set.

    A probing set must reach its smallest admissible partner, whose equivalent
    overlap is the lowest one the set can be held to.
    """
    minsize = size_bounds(pred, size)[0]
    return _clamp(size - equivalent_overlap(pred, size, minsize) + 1, size)


def index_prefix_length(pred: SimilarityPredicate, size: int) -> int:
    """
    Prefix length of an indexed set in a self-join.

    Later probes are never smaller, so the self-pair overlap bounds every pair.
    """
    return _clamp(size - equivalent_overlap(pred, size, size) + 1, size)


def prefix_lengths(pred: SimilarityPredicate, size: int) -> Tuple[int, int]:
    """Return ``(probe_len, index_len)`` for a set of the given size."""
    return probe_prefix_length(pred, size), index_prefix_length(pred, size)


def length_filter(pred: SimilarityPredicate, size_r: int, size_s: int) -> bool:
    """Return True when ``size_s`` lies within the size bounds of ``size_r``."""
    minsize, maxsize = size_bounds(pred, size_r)
    return minsize <= size_s <= maxsize


def positional_filter(
    pred: SimilarityPredicate,
    size_r: int,
    size_s: int,
    match: MatchPosition,
    current_overlap: int,
) -> bool:
    """
    Return True when the pair can still reach its equivalent overlap.

    Only tokens strictly after the match positions can add to ``current_overlap``,
    which already counts the matched token.
    """
    remaining = min(size_r - match.pos_r - 1, size_s - match.pos_s - 1)
    return current_overlap + remaining >= equivalent_overlap(pred, size_r, size_s)
