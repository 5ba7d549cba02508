"""
Benchmark harness: runs join configurations over synthetic datasets and
records the phase-time decomposition of every run as CSV rows.
"""

import csv
import logging
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional, Sequence, TextIO

from .collection import Collection, build_dictionary, preprocess
from .joiners import Algorithm
from .oracle import synth_collection
from .pipeline import JoinReport, PipelineConfig, run_host_join, run_join
from .similarity import SimilarityPredicate
from .verify import OutputMode, Strategy, StrategyKind

logger = logging.getLogger(__name__)

BENCH_FIELDS = [
    "suite",
    "dataset",
    "size",
    "threshold",
    "algorithm",
    "strategy",
    "group_size",
    "chunk_budget",
    "join_ms",
    "filtering_ms",
    "serialization_ms",
    "verification_ms",
    "candidate_bytes",
    "candidates",
    "chunks",
    "result",
]

_COUNT_SUFFIXES = {"K": 1000, "M": 1000_000}
BLOCK_SIZES = (32, 64, 128, 256)
CHUNK_BUDGETS = (64 << 10, 1 << 20, None)


@dataclass
class BenchCell:
    """One join configuration of a suite."""

    algorithm: str = Algorithm.PPJOIN.value
    strategy: str = StrategyKind.AUTO.value
    group_size: int = 32
    chunk_budget: Optional[int] = None
    host_only: bool = False
    group_split: bool = True


@dataclass
class BenchSettings:
    """Settings shared by every cell of a bench run."""

    similarity: str = "jaccard"
    distribution: str = "uniform"
    seed: int = 0
    token_universe: int = 1000
    max_size: int = 50
    workers: int = 1
    executor: str = "thread"
    chunk_budget: Optional[int] = None
    group_size: int = 32


@dataclass
class BenchRow:
    suite: str
    dataset: str
    size: int
    threshold: str
    algorithm: str
    strategy: str
    group_size: int
    chunk_budget: str
    join_ms: float
    filtering_ms: float
    serialization_ms: float
    verification_ms: float
    candidate_bytes: int
    candidates: int
    chunks: int
    result: int


def parse_sizes(text: str) -> List[int]:
    """
    Parse a comma-separated list of collection sizes such as ``1k,10k``.

    Raises:
        ValueError: If an entry is not a positive count.
    """
    sizes = []
    for item in text.split(","):
        token = item.strip().upper()
        multiplier = 1
        if token and token[-1] in _COUNT_SUFFIXES:
            multiplier = _COUNT_SUFFIXES[token[-1]]
            token = token[:-1]
        if not token.isdigit() or int(token) == 0:
            error_msg = f"invalid size: {item!r}"
            logger.error(error_msg)
            raise ValueError(error_msg)
        sizes.append(int(token) * multiplier)
    return sizes


def parse_thresholds(text: str) -> List[str]:
    """
    Parse ``start:stop:step`` (stop included) or a comma-separated list.

    Values are computed exactly, so ``0.5:0.95:0.05`` yields ten thresholds.

    Raises:
        ValueError: If the range is malformed.
    """
    try:
        if ":" not in text:
            items = [item.strip() for item in text.split(",")]
            for item in items:
                Fraction(item)
            return items
        start, stop, step = (Fraction(part.strip()) for part in text.split(":"))
    except (ValueError, ZeroDivisionError):
        error_msg = f"invalid threshold range: {text!r}"
        logger.error(error_msg)
        raise ValueError(error_msg) from None
    if step <= 0 or stop < start:
        error_msg = f"invalid threshold range: {text!r}"
        logger.error(error_msg)
        raise ValueError(error_msg)
    thresholds = []
    value = start
    while value <= stop:
        thresholds.append(_format_fraction(value))
        value += step
    return thresholds


def _format_fraction(value: Fraction) -> str:
    # Decimal form when exact, e.g. 11/20 -> 0.55
    for digits in range(1, 10):
        scaled = value * 10**digits
        if scaled.denominator == 1:
            return f"{float(value):.{digits}f}"
    return str(value)


def _scaling(settings: BenchSettings) -> Iterator[BenchCell]:
    yield BenchCell(group_size=settings.group_size, chunk_budget=settings.chunk_budget)


def _strategies(settings: BenchSettings) -> Iterator[BenchCell]:
    for kind in (StrategyKind.A, StrategyKind.B, StrategyKind.C):
        yield BenchCell(strategy=kind.value, group_size=settings.group_size, chunk_budget=settings.chunk_budget)


def _blocksize(settings: BenchSettings) -> Iterator[BenchCell]:
    for kind in (StrategyKind.B, StrategyKind.C):
        for group_size in BLOCK_SIZES:
            yield BenchCell(strategy=kind.value, group_size=group_size, chunk_budget=settings.chunk_budget)


def _chunking(settings: BenchSettings) -> Iterator[BenchCell]:
    for budget in CHUNK_BUDGETS:
        yield BenchCell(group_size=settings.group_size, chunk_budget=budget)


def _baseline(settings: BenchSettings) -> Iterator[BenchCell]:
    for algorithm in Algorithm:
        yield BenchCell(algorithm=algorithm.value, host_only=True)
        yield BenchCell(algorithm=algorithm.value, group_size=settings.group_size, chunk_budget=settings.chunk_budget)


def _groupjoin(settings: BenchSettings) -> Iterator[BenchCell]:
    for split in (True, False):
        yield BenchCell(
            algorithm=Algorithm.GROUPJOIN.value,
            group_size=settings.group_size,
            chunk_budget=settings.chunk_budget,
            group_split=split,
        )


SUITES: Dict[str, Callable[[BenchSettings], Iterator[BenchCell]]] = {
    "scaling": _scaling,
    "strategies": _strategies,
    "blocksize": _blocksize,
    "chunking": _chunking,
    "baseline": _baseline,
    "groupjoin": _groupjoin,
}


def run_cell(collection: Collection, pred: SimilarityPredicate, cell: BenchCell, settings: BenchSettings) -> JoinReport:
    """Run one configuration in count mode."""
    if cell.host_only:
        return run_host_join(collection, pred, algorithm=cell.algorithm, group_split=cell.group_split)
    pipeline_config = PipelineConfig(
        chunk_budget=cell.chunk_budget,
        strategy=Strategy.parse(cell.strategy, cell.group_size),
        mode=OutputMode.COUNT,
        workers=settings.workers,
        executor=settings.executor,
        algorithm=Algorithm(cell.algorithm),
        group_split=cell.group_split,
    )
    return run_join(collection, pred, pipeline_config)


def _algorithm_label(cell: BenchCell) -> str:
    if cell.algorithm == Algorithm.GROUPJOIN.value and not cell.group_split:
        return f"{cell.algorithm}/merged"
    return cell.algorithm


def run_bench(
    suite: str, sizes: Sequence[int], thresholds: Sequence[str], settings: Optional[BenchSettings] = None
) -> List[BenchRow]:
    """
    Run every cell of a suite for every size and threshold.

    Raises:
        ValueError: On an unknown suite or invalid settings.
    """
    if suite not in SUITES:
        error_msg = f"unknown bench suite: {suite!r} (choose from {', '.join(SUITES)})"
        logger.error(error_msg)
        raise ValueError(error_msg)
    settings = settings or BenchSettings()
    rows: List[BenchRow] = []
    for size in sizes:
        records = synth_collection(
            settings.seed, size, settings.distribution, settings.token_universe, max_size=settings.max_size
        )
        collection = preprocess(records, build_dictionary(records))
        dataset = f"{settings.distribution}-{settings.seed}"
        for threshold in thresholds:
            pred = SimilarityPredicate.parse(settings.similarity, threshold)
            for cell in SUITES[suite](settings):
                report = run_cell(collection, pred, cell, settings)
                timings = report.timings.as_milliseconds()
                rows.append(
                    BenchRow(
                        suite=suite,
                        dataset=dataset,
                        size=size,
                        threshold=threshold,
                        algorithm=_algorithm_label(cell),
                        strategy="host" if cell.host_only else cell.strategy,
                        group_size=cell.group_size,
                        chunk_budget=str(cell.chunk_budget) if cell.chunk_budget else "inf",
                        join_ms=round(timings["join_ms"], 3),
                        filtering_ms=round(timings["filtering_ms"], 3),
                        serialization_ms=round(timings["serialization_ms"], 3),
                        verification_ms=round(timings["verification_ms"], 3),
                        candidate_bytes=report.candidate_bytes,
                        candidates=report.candidate_count,
                        chunks=report.chunk_count,
                        result=report.count,
                    )
                )
                logger.info(f"Bench {suite} size={size} t={threshold} {cell}: {report.count} pairs")
    return rows


def write_bench_csv(rows: Sequence[BenchRow], handle: TextIO) -> None:
    """Write rows under the fixed bench header."""
    writer = csv.DictWriter(handle, fieldnames=BENCH_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(asdict(row))
