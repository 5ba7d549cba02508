"""
Brute-force reference join and synthetic dataset generator.

The reference join applies no filter at all: every pair of sets is
intersected and scored with exact rational arithmetic.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from .collection import Collection
from .similarity import SimilarityPredicate, similarity_score

logger = logging.getLogger(__name__)

MAX_ORACLE_SETS = 5000
SIZE_DISTRIBUTIONS = ("uniform", "zipf", "duplicates")

ScoredPair = Tuple[int, int, Fraction]


@dataclass
class OracleResult:
    """
    Similar pairs as ``(r index, s index, score)`` sorted ascending.

    In a self-join ``r index > s index``. Cosine scores are squared.
    """

    pairs: List[ScoredPair] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.pairs)

    def original_pairs(self, collection: Collection, other: Optional[Collection] = None) -> List[Tuple[int, int]]:
        """Map the pairs to original record ids, ordered like a JoinReport."""
        r_ids = collection.original_id.tolist()
        if other is None:
            return sorted((max(r_ids[i], r_ids[j]), min(r_ids[i], r_ids[j])) for i, j, _ in self.pairs)
        s_ids = other.original_id.tolist()
        return sorted((r_ids[i], s_ids[j]) for i, j, _ in self.pairs)


def brute_force_join(
    collection: Collection, pred: SimilarityPredicate, other: Optional[Collection] = None
) -> OracleResult:
    """
    Join by scoring every pair.

    Args:
        collection: The collection (R in an R-S join).
        pred: The similarity predicate.
        other: The second collection of an R-S join.

    Returns:
        Every pair whose score meets the threshold.

    Raises:
        ValueError: If a collection holds more than MAX_ORACLE_SETS sets.
    """
    for side in (collection, other):
        if side is not None and len(side) > MAX_ORACLE_SETS:
            error_msg = f"brute-force join limited to {MAX_ORACLE_SETS} sets (got {len(side)})"
            logger.error(error_msg)
            raise ValueError(error_msg)

    r_sets = [frozenset(tokens) for tokens in collection.set_lists()]
    s_sets = r_sets if other is None else [frozenset(tokens) for tokens in other.set_lists()]
    pairs: List[ScoredPair] = []
    for i, r in enumerate(r_sets):
        partners = range(i) if other is None else range(len(s_sets))
        for j in partners:
            s = s_sets[j]
            score = similarity_score(pred, len(r & s), len(r), len(s))
            if pred.accepts(score):
                pairs.append((i, j, score))
    logger.info(f"Brute-force join found {len(pairs)} pairs for {pred}")
    return OracleResult(pairs)


def _token_weights(universe: int, exponent: float) -> np.ndarray:
    weights = 1.0 / np.arange(1, universe + 1, dtype=np.float64) ** exponent
    return weights / weights.sum()


def synth_collection(
    seed: int,
    n: int,
    size_distribution: str = "uniform",
    token_universe: int = 1000,
    *,
    min_size: int = 1,
    max_size: int = 50,
    zipf_exponent: float = 1.5,
    duplicate_ratio: float = 0.5,
) -> List[List[str]]:
    """
    Generate ``n`` raw records deterministically from ``seed``.

    - ``uniform``: sizes and tokens uniform; tokens may repeat inside a record.
    - ``zipf``: Zipf-like set sizes, tokens drawn with Zipf-like popularity.
    - ``duplicates``: a small pool of baskets repeated across records,
      mixed with fresh uniform records.

    Raises:
        ValueError: On an unknown distribution or inconsistent sizes.
    """
    if size_distribution not in SIZE_DISTRIBUTIONS:
        error_msg = f"unknown size distribution: {size_distribution!r}"
        logger.error(error_msg)
        raise ValueError(error_msg)
    if not 1 <= min_size <= max_size or token_universe < 1:
        error_msg = f"invalid sizes: min {min_size}, max {max_size}, universe {token_universe}"
        logger.error(error_msg)
        raise ValueError(error_msg)

    rng = np.random.default_rng(seed)

    def uniform_record() -> List[str]:
        size = int(rng.integers(min_size, max_size + 1))
        return [f"t{code}" for code in rng.integers(0, token_universe, size=size)]

    records: List[List[str]] = []
    if size_distribution == "uniform":
        records = [uniform_record() for _ in range(n)]
    elif size_distribution == "zipf":
        weights = _token_weights(token_universe, 1.0)
        for _ in range(n):
            size = min(max_size, min_size - 1 + int(rng.zipf(zipf_exponent)), token_universe)
            codes = rng.choice(token_universe, size=size, replace=False, p=weights)
            records.append([f"t{code}" for code in codes])
    else:
        pool = [uniform_record() for _ in range(max(1, n // 10))]
        for _ in range(n):
            if rng.random() < duplicate_ratio:
                basket = pool[int(rng.integers(0, len(pool)))]
                records.append([basket[k] for k in rng.permutation(len(basket))])
            else:
                records.append(uniform_record())
    logger.debug(f"Generated {n} {size_distribution} records from seed {seed}")
    return records
