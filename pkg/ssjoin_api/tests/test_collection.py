"""
Tests for dataset ingestion and the linearized collection layout.
"""

from pathlib import Path

import numpy as np
import pytest

from ssjoin_api.collection import (
    Collection,
    build_dictionary,
    decode_collection,
    preprocess,
    preprocess_coded,
    read_coded_records,
    read_records,
    set_view,
)
from ssjoin_api.oracle import synth_collection

RECORDS = [["b", "a"], [], ["c", "b", "a"], ["a"]]


@pytest.fixture
def collection() -> Collection:
    """Fixture with one empty record and sets of sizes 1 to 3."""
    return preprocess(RECORDS, build_dictionary(RECORDS))


def test_build_dictionary_orders_by_frequency() -> None:
    """Test that rarer tokens get smaller codes."""
    dictionary = build_dictionary([["a", "b", "b"], ["b", "c"]])

    # a and c tie on frequency 1 and are ordered lexicographically
    assert dictionary.codes == {"a": 0, "c": 1, "b": 2}
    assert dictionary.frequencies["b"] == 3
    assert len(dictionary) == 3
    assert dictionary.decode([2, 0]) == ["b", "a"]


def test_build_dictionary_empty() -> None:
    """Test that an empty record list is rejected."""
    with pytest.raises(ValueError, match="empty collection"):
        build_dictionary([])


def test_encode_unknown_token() -> None:
    """Test that encoding an unseen token fails."""
    dictionary = build_dictionary([["a"]])

    with pytest.raises(ValueError, match="token not in dictionary"):
        dictionary.encode("z")
    with pytest.raises(ValueError, match="token not in dictionary"):
        preprocess([["a", "z"]], dictionary)


def test_preprocess_layout(collection: Collection) -> None:
    """Test the token and offset arrays of a small collection."""
    # Codes: c=0, b=1, a=2; sets ordered by size then lexicographically
    assert collection.tokens.tolist() == [2, 1, 2, 0, 1, 2]
    assert collection.offsets.tolist() == [0, 1, 3, 6]
    assert collection.original_id.tolist() == [3, 0, 2]
    assert collection.sizes.tolist() == [1, 2, 3]
    assert collection.tokens.dtype == np.uint32
    assert len(collection) == 3
    assert collection.average_size == 2.0


def test_preprocess_deduplicates_tokens() -> None:
    """Test that repeated tokens inside a record count once."""
    records = [["x", "y", "x", "x"]]
    result = preprocess(records, build_dictionary(records))

    assert result.sizes.tolist() == [2]


def test_preprocess_ordering_invariants() -> None:
    """Test ordering on a synthetic collection."""
    records = synth_collection(3, 300, "zipf", 200)
    result = preprocess(records, build_dictionary(records))

    sets = result.set_lists()
    assert np.all(np.diff(result.sizes) >= 0)
    assert all(all(a < b for a, b in zip(tokens, tokens[1:])) for tokens in sets)
    assert all(
        (len(left), left) <= (len(right), right) for left, right in zip(sets, sets[1:])
    )
    assert sorted(result.original_id.tolist()) == [line for line, record in enumerate(records) if record]


def test_set_view(collection: Collection) -> None:
    """Test set slices and out-of-range indices."""
    assert set_view(collection, 0) == (0, 1)
    assert set_view(collection, 2) == (3, 3)

    with pytest.raises(IndexError):
        set_view(collection, 3)
    with pytest.raises(IndexError):
        set_view(collection, -1)


def test_decode_collection(collection: Collection) -> None:
    """Test that decoding restores the deduplicated records."""
    dictionary = build_dictionary(RECORDS)

    assert decode_collection(collection, dictionary) == {
        0: ["b", "a"],
        2: ["c", "b", "a"],
        3: ["a"],
    }


def test_preprocess_coded() -> None:
    """Test precoded records are deduplicated and ordered."""
    result = preprocess_coded([[5, 3, 3], [1], []])

    assert result.set_lists() == [[1], [3, 5]]
    assert result.original_id.tolist() == [1, 0]


def test_preprocess_coded_out_of_range() -> None:
    """Test that codes outside 32 bits are rejected."""
    with pytest.raises(ValueError):
        preprocess_coded([[-1, 2]])
    with pytest.raises(ValueError):
        preprocess_coded([[1 << 32]])


def test_read_records(tmp_path: Path) -> None:
    """Test whitespace tokenization and blank line handling."""
    data_file = tmp_path / "sets.txt"
    data_file.write_text("a b\n\n c\td  \n")

    assert read_records(data_file) == [["a", "b"], [], ["c", "d"]]


def test_read_coded_records(tmp_path: Path) -> None:
    """Test integer datasets and malformed tokens."""
    data_file = tmp_path / "coded.txt"
    data_file.write_text("3 1\n2\n")
    assert read_coded_records(data_file) == [[3, 1], [2]]

    data_file.write_text("3 x\n")
    with pytest.raises(ValueError, match="non-integer token"):
        read_coded_records(data_file)
