"""
Set collections in linearized form.

This module ingests raw set records, builds the frequency-ordered token
dictionary, and lays the preprocessed sets out as a flat token array plus an
offset array delimiting every set.
"""

import re
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

# A raw record is an ordered token list as read from one input line
RawRecord = Sequence[str]

_TOKEN_PATTERN = re.compile(r"[^ \t\n\r\f\v]+")


@dataclass(frozen=True)
class Dictionary:
    """Bijective token to code mapping, codes ascending by global frequency."""

    codes: Dict[str, int]
    frequencies: Dict[str, int]
    tokens: Tuple[str, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, token: str) -> int:
        """
        Return the code of a token.

        Raises:
            ValueError: If the token was never observed.
        """
        try:
            return self.codes[token]
        except KeyError:
            error_msg = f"token not in dictionary: {token!r}"
            logger.error(error_msg)
            raise ValueError(error_msg) from None

    def decode(self, codes: Iterable[int]) -> List[str]:
        """Map codes back to their tokens."""
        return [self.tokens[code] for code in codes]


@dataclass(frozen=True, eq=False)
class Collection:
    """
    Preprocessed sets stored as a token array R_T and an offset array R_O.

    Set ``i`` occupies ``tokens[offsets[i]:offsets[i + 1]]``. Sets are ordered
    by size, then lexicographically on their codes, and ``original_id[i]`` is
    the input line the set came from.
    """

    tokens: np.ndarray
    offsets: np.ndarray
    original_id: np.ndarray
    _lists: List[List[int]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        bounds = self.offsets.tolist()
        flat = self.tokens.tolist()
        object.__setattr__(self, "_lists", [flat[bounds[i]:bounds[i + 1]] for i in range(len(bounds) - 1)])

    def __len__(self) -> int:
        return len(self.offsets) - 1

    @property
    def sizes(self) -> np.ndarray:
        """Size of every set."""
        return np.diff(self.offsets)

    def set_tokens(self, set_index: int) -> List[int]:
        """Return the coded tokens of one set as a Python list."""
        return self._lists[set_index]

    def set_lists(self) -> List[List[int]]:
        """Return every set as a Python list, in collection order."""
        return self._lists

    @property
    def average_size(self) -> float:
        return float(len(self.tokens)) / len(self) if len(self) else 0.0


def build_dictionary(records: Sequence[RawRecord]) -> Dictionary:
    """
    Assign token codes in ascending order of global frequency.

    Frequencies count raw occurrences, duplicates within a record included.
    Ties are broken by lexicographic token order.

    Args:
        records: The raw records of every collection taking part in the join.

    Returns:
        The token dictionary.

    Raises:
        ValueError: If there are no records.
    """
    if not records:
        error_msg = "empty collection"
        logger.error(error_msg)
        raise ValueError(error_msg)

    frequencies = Counter(token for record in records for token in record)
    ordered = sorted(frequencies, key=lambda token: (frequencies[token], token))
    codes = {token: code for code, token in enumerate(ordered)}
    logger.info(f"Dictionary built: {len(codes)} distinct tokens over {len(records)} records")
    return Dictionary(codes=codes, frequencies=dict(frequencies), tokens=tuple(ordered))


def preprocess(records: Sequence[RawRecord], dictionary: Dictionary) -> Collection:
    """
    Deduplicate, code and order every record, then linearize the collection.

    Empty records are dropped. The original record index is kept per set.

    Args:
        records: Raw records, one per input line.
        dictionary: Dictionary covering every token of the records.

    Returns:
        The linearized collection.

    Raises:
        ValueError: If a token is missing from the dictionary.
    """
    coded = [sorted({dictionary.encode(token) for token in record}) for record in records]
    return _linearize(coded)


def preprocess_coded(records: Sequence[Sequence[int]]) -> Collection:
    """
    Linearize records whose tokens are already frequency-coded integers.

    Args:
        records: Coded records, one per input line.

    Returns:
        The linearized collection.

    Raises:
        ValueError: If a code is negative or does not fit 32 bits.
    """
    coded = []
    for line, record in enumerate(records):
        unique = sorted(set(record))
        if unique and (unique[0] < 0 or unique[-1] > np.iinfo(np.uint32).max):
            error_msg = f"token code out of range on record {line}"
            logger.error(error_msg)
            raise ValueError(error_msg)
        coded.append(unique)
    return _linearize(coded)


def _linearize(coded: List[List[int]]) -> Collection:
    kept = [(codes, line) for line, codes in enumerate(coded) if codes]
    dropped = len(coded) - len(kept)
    if dropped:
        logger.info(f"Dropped {dropped} empty sets")
    kept.sort(key=lambda item: (len(item[0]), item[0]))

    offsets = np.zeros(len(kept) + 1, dtype=np.int64)
    if kept:
        offsets[1:] = np.cumsum([len(codes) for codes, _ in kept])
    tokens = np.fromiter(
        (code for codes, _ in kept for code in codes), dtype=np.uint32, count=int(offsets[-1])
    )
    original_id = np.array([line for _, line in kept], dtype=np.int64)
    logger.info(f"Collection preprocessed: {len(kept)} sets, {len(tokens)} tokens")
    return Collection(tokens=tokens, offsets=offsets, original_id=original_id)


def set_view(collection: Collection, set_index: int) -> Tuple[int, int]:
    """
    Return the (start, length) slice of one set inside the token array.

    Raises:
        IndexError: If the index is outside the collection.
    """
    if not 0 <= set_index < len(collection):
        error_msg = f"set index {set_index} out of range for {len(collection)} sets"
        logger.error(error_msg)
        raise IndexError(error_msg)
    start = int(collection.offsets[set_index])
    return start, int(collection.offsets[set_index + 1]) - start


def decode_collection(collection: Collection, dictionary: Dictionary) -> Dict[int, List[str]]:
    """Map every original record index to its deduplicated, decoded tokens."""
    return {
        int(collection.original_id[i]): dictionary.decode(collection.set_tokens(i))
        for i in range(len(collection))
    }


def read_records(path: Union[str, Path]) -> List[List[str]]:
    """
    Read a text dataset: one set per line, tokens separated by ASCII whitespace.

    Blank lines are kept as empty records so line numbers stay aligned.
    """
    with open(path, "r", encoding="utf-8") as handle:
        records = [_TOKEN_PATTERN.findall(line) for line in handle]
    logger.info(f"Read {len(records)} records from {path}")
    return records


def read_coded_records(path: Union[str, Path]) -> List[List[int]]:
    """
    Read a pre-coded dataset whose tokens are decimal integers.

    Raises:
        ValueError: If a token is not a decimal integer.
    """
    records: List[List[int]] = []
    for line, tokens in enumerate(read_records(path)):
        try:
            records.append([int(token) for token in tokens])
        except ValueError:
            error_msg = f"non-integer token on line {line} of {path}"
            logger.error(error_msg)
            raise ValueError(error_msg) from None
    return records
