"""
Similarity functions, equivalent overlaps and size bounds.

Every threshold comparison is exact: the threshold is a Fraction and all
ceilings and floors are integer divisions. Cosine is handled through squared
integer quantities.
"""

import math
import sys
import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Tuple, Union

logger = logging.getLogger(__name__)

# Upper size bound used when a function places none
UNBOUNDED = sys.maxsize


class SimilarityFunction(str, Enum):
    """Supported set similarity functions."""

    JACCARD = "jaccard"
    COSINE = "cosine"
    DICE = "dice"
    OVERLAP = "overlap"


@dataclass(frozen=True)
class SimilarityPredicate:
    """A similarity function paired with its threshold."""

    function: SimilarityFunction
    threshold: Fraction

    def __post_init__(self) -> None:
        if self.function is SimilarityFunction.OVERLAP:
            if self.threshold.denominator != 1 or self.threshold < 1:
                error_msg = f"overlap threshold must be a positive integer (got {self.threshold})"
                logger.error(error_msg)
                raise ValueError(error_msg)
        elif not 0 < self.threshold <= 1:
            error_msg = f"{self.function.value} threshold must be in (0, 1] (got {self.threshold})"
            logger.error(error_msg)
            raise ValueError(error_msg)

    @classmethod
    def parse(cls, function: Union[str, SimilarityFunction], threshold: str) -> "SimilarityPredicate":
        """
        Build a predicate from user input such as ``("jaccard", "0.8")``.

        Raises:
            ValueError: If the function is unknown or the threshold malformed.
        """
        try:
            parsed_function = SimilarityFunction(function)
            value = Fraction(threshold.strip())
        except (ValueError, ZeroDivisionError):
            error_msg = f"invalid similarity predicate: {function} {threshold!r}"
            logger.error(error_msg)
            raise ValueError(error_msg) from None
        return cls(parsed_function, value)

    @property
    def normalized(self) -> bool:
        return self.function is not SimilarityFunction.OVERLAP

    def accepts(self, score: Fraction) -> bool:
        """Compare a score from similarity_score against the threshold."""
        if self.function is SimilarityFunction.COSINE:
            return score >= self.threshold * self.threshold
        return score >= self.threshold

    def __str__(self) -> str:
        return f"{self.function.value}>={self.threshold}"


def _ceil_div(numerator: int, denominator: int) -> int:
    return -(-numerator // denominator)


def _ceil_sqrt_ratio(numerator: int, denominator: int) -> int:
    # Smallest o >= 0 with o * o * denominator >= numerator
    root = math.isqrt(numerator // denominator)
    while root * root * denominator < numerator:
        root += 1
    return root


def equivalent_overlap(pred: SimilarityPredicate, size_r: int, size_s: int) -> int:
    """
    Return the minimum number of shared tokens for a pair of the given sizes.

    Args:
        pred: The similarity predicate.
        size_r: Size of the first set (>= 1).
        size_s: Size of the second set (>= 1).

    Returns:
        The equivalent overlap threshold.
    """
    p, q = pred.threshold.numerator, pred.threshold.denominator
    function = pred.function
    if function is SimilarityFunction.JACCARD:
        return _ceil_div(p * (size_r + size_s), p + q)
    if function is SimilarityFunction.COSINE:
        return _ceil_sqrt_ratio(p * p * size_r * size_s, q * q)
    if function is SimilarityFunction.DICE:
        return _ceil_div(p * (size_r + size_s), 2 * q)
    return p


def size_bounds(pred: SimilarityPredicate, size_r: int) -> Tuple[int, int]:
    """
    Return the inclusive range of partner sizes that can satisfy the predicate.

    Jaccard uses ``t*|r| <= |s| <= |r|/t``; Cosine and Dice use their own exact
    bounds. Overlap only bounds from below, with UNBOUNDED as maximum.
    """
    p, q = pred.threshold.numerator, pred.threshold.denominator
    function = pred.function
    if function is SimilarityFunction.JACCARD:
        return _ceil_div(p * size_r, q), (q * size_r) // p
    if function is SimilarityFunction.COSINE:
        return _ceil_div(p * p * size_r, q * q), (q * q * size_r) // (p * p)
    if function is SimilarityFunction.DICE:
        return _ceil_div(p * size_r, 2 * q - p), ((2 * q - p) * size_r) // p
    return p, UNBOUNDED


def similarity_score(pred: SimilarityPredicate, overlap: int, size_r: int, size_s: int) -> Fraction:
    """
    Return the exact similarity of a pair from its overlap and sizes.

    Cosine similarity is generally irrational, so the squared cosine is
    returned; SimilarityPredicate.accepts compares it against t squared.
    """
    function = pred.function
    if function is SimilarityFunction.JACCARD:
        return Fraction(overlap, size_r + size_s - overlap)
    if function is SimilarityFunction.COSINE:
        return Fraction(overlap * overlap, size_r * size_s)
    if function is SimilarityFunction.DICE:
        return Fraction(2 * overlap, size_r + size_s)
    return Fraction(overlap)
