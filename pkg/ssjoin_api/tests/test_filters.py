"""
Tests for the prefix, length and positional filters.
"""

import pytest

from ssjoin_api.collection import build_dictionary, preprocess
from ssjoin_api.filters import (
    MatchPosition,
    index_prefix_length,
    length_filter,
    positional_filter,
    prefix_lengths,
    probe_prefix_length,
)
from ssjoin_api.oracle import brute_force_join, synth_collection
from ssjoin_api.similarity import SimilarityPredicate


@pytest.fixture
def jaccard_08() -> SimilarityPredicate:
    """Fixture for Jaccard at 0.8."""
    return SimilarityPredicate.parse("jaccard", "0.8")


def test_prefix_lengths(jaccard_08: SimilarityPredicate) -> None:
    """Test prefix lengths of a 10-token set at Jaccard 0.8."""
    assert prefix_lengths(jaccard_08, 10) == (3, 2)
    assert probe_prefix_length(jaccard_08, 10) == 3
    assert index_prefix_length(jaccard_08, 10) == 2


def test_prefix_lengths_are_clamped() -> None:
    """Test that prefix lengths stay within [1, size]."""
    overlap = SimilarityPredicate.parse("overlap", "20")
    assert prefix_lengths(overlap, 5) == (1, 1)

    jaccard = SimilarityPredicate.parse("jaccard", "0.5")
    assert prefix_lengths(jaccard, 1) == (1, 1)

    for size in range(1, 60):
        probe_len, index_len = prefix_lengths(jaccard, size)
        assert 1 <= index_len <= probe_len <= size


def test_length_filter(jaccard_08: SimilarityPredicate) -> None:
    """Test the size interval of a 10-token set."""
    assert length_filter(jaccard_08, 10, 8)
    assert length_filter(jaccard_08, 10, 12)
    assert not length_filter(jaccard_08, 10, 7)
    assert not length_filter(jaccard_08, 10, 13)


def test_positional_filter(jaccard_08: SimilarityPredicate) -> None:
    """Test pruning by the tokens left after a match."""
    # Two 10-token sets need 9 shared tokens
    assert positional_filter(jaccard_08, 10, 10, MatchPosition(0, 0), 1)
    assert positional_filter(jaccard_08, 10, 10, MatchPosition(1, 0), 1)
    assert not positional_filter(jaccard_08, 10, 10, MatchPosition(2, 2), 1)
    assert positional_filter(jaccard_08, 10, 10, MatchPosition(2, 2), 2)


@pytest.mark.parametrize("threshold", ["0.5", "0.7", "0.9"])
def test_similar_pairs_share_a_prefix_token(threshold: str) -> None:
    """Test that every similar pair meets inside the probe and index prefixes."""
    records = synth_collection(11, 200, "duplicates", 40, max_size=15)
    collection = preprocess(records, build_dictionary(records))
    pred = SimilarityPredicate.parse("jaccard", threshold)

    for i, j, _ in brute_force_join(collection, pred).pairs:
        # Set i is never smaller than set j
        probe = collection.set_tokens(i)
        indexed = collection.set_tokens(j)
        probe_prefix = set(probe[:probe_prefix_length(pred, len(probe))])
        index_prefix = set(indexed[:index_prefix_length(pred, len(indexed))])
        assert probe_prefix & index_prefix, (i, j)
        assert length_filter(pred, len(probe), len(indexed))
