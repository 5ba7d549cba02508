"""
Set similarity join client.

This module ties the library together: it reads datasets, preprocesses them
with a shared dictionary, builds the pipeline configuration from the global
settings and runs the join.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, Union

from .collection import (
    Collection,
    Dictionary,
    RawRecord,
    build_dictionary,
    preprocess,
    preprocess_coded,
    read_coded_records,
    read_records,
)
from .config import config
from .joiners import Algorithm
from .pipeline import JoinReport, PipelineConfig, run_host_join, run_join
from .similarity import SimilarityPredicate
from .verify import OutputMode, Strategy

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass(frozen=True)
class PreparedInput:
    """Preprocessed collections ready to join; ``other`` is set for R-S joins."""

    collection: Collection
    other: Optional[Collection] = None
    dictionary: Optional[Dictionary] = None


class SetJoinClient:
    """Client running set similarity joins with the configured engine settings."""

    def __init__(
        self,
        chunk_budget: Optional[int] = None,
        workers: Optional[int] = None,
        group_size: Optional[int] = None,
        strategy: Optional[str] = None,
        executor: Optional[str] = None,
    ) -> None:
        """
        Initialize the client.

        Args:
            chunk_budget: Optional chunk budget M_c in bytes. Loaded from config if not provided.
            workers: Optional number of verification workers.
            group_size: Optional worker group size B.
            strategy: Optional default strategy (a, b, c or auto).
            executor: Optional worker pool kind (thread or process).
        """
        config.update(
            chunk_budget=chunk_budget,
            workers=workers,
            group_size=group_size,
            strategy=strategy,
            executor=executor,
        )

    def _check_file(self, path: PathLike) -> Path:
        path_obj = Path(path)
        if not path_obj.exists():
            logger.error(f"File not found: {path}")
            raise FileNotFoundError(f"File not found: {path}")
        logger.info(f"Reading dataset: {path} ({path_obj.stat().st_size} bytes)")
        return path_obj

    def prepare_records(
        self, records: Sequence[RawRecord], other_records: Optional[Sequence[RawRecord]] = None
    ) -> PreparedInput:
        """
        Preprocess raw records; both sides of an R-S join share one dictionary.

        Raises:
            ValueError: If there are no records.
        """
        dictionary = build_dictionary(list(records) + list(other_records or []))
        collection = preprocess(records, dictionary)
        other = preprocess(other_records, dictionary) if other_records is not None else None
        return PreparedInput(collection, other, dictionary)

    def prepare(
        self, input_path: PathLike, other_path: Optional[PathLike] = None, precoded: bool = False
    ) -> PreparedInput:
        """
        Read and preprocess one or two dataset files.

        Args:
            input_path: Dataset file, one set per line.
            other_path: Second dataset of an R-S join.
            precoded: Tokens are already frequency-ordered integer codes.

        Raises:
            FileNotFoundError: If a file does not exist.
            ValueError: If a file is empty or a precoded token is not an integer.
        """
        paths = [self._check_file(input_path)]
        if other_path is not None:
            paths.append(self._check_file(other_path))

        reader: Callable[[Path], Sequence[Sequence[Any]]] = read_coded_records if precoded else read_records
        raw = [reader(path) for path in paths]
        if not any(raw):
            error_msg = f"empty collection: {input_path}"
            logger.error(error_msg)
            raise ValueError(error_msg)

        if precoded:
            coded = [preprocess_coded(records) for records in raw]
            return PreparedInput(coded[0], coded[1] if len(coded) > 1 else None)
        return self.prepare_records(raw[0], raw[1] if len(raw) > 1 else None)

    def pipeline_config(
        self,
        algorithm: Union[Algorithm, str] = Algorithm.PPJOIN,
        mode: Union[OutputMode, str] = OutputMode.COUNT,
        strategy: Optional[str] = None,
        group_size: Optional[int] = None,
        group_split: bool = True,
    ) -> PipelineConfig:
        """
        Build a pipeline configuration from the global settings and overrides.

        Raises:
            ValueError: If the resulting settings are invalid.
        """
        config.update(strategy=strategy, group_size=group_size)
        config.validate()
        return PipelineConfig(
            chunk_budget=config.chunk_budget,
            strategy=Strategy.parse(config.strategy, config.group_size),
            mode=OutputMode(mode),
            workers=config.workers,
            executor=config.executor,
            algorithm=Algorithm(algorithm),
            group_split=group_split,
        )

    def join(
        self,
        prepared: PreparedInput,
        pred: SimilarityPredicate,
        *,
        algorithm: Union[Algorithm, str] = Algorithm.PPJOIN,
        mode: Union[OutputMode, str] = OutputMode.COUNT,
        strategy: Optional[str] = None,
        group_size: Optional[int] = None,
        group_split: bool = True,
        host_only: bool = False,
    ) -> JoinReport:
        """
        Join preprocessed collections.

        Args:
            prepared: Output of prepare() or prepare_records().
            pred: The similarity predicate.
            algorithm: allpairs, ppjoin or groupjoin.
            mode: count or pairs.
            strategy: Overrides the configured strategy.
            group_size: Overrides the configured group size B.
            group_split: GroupJoin verifies group-expansion pairs on the producer.
            host_only: Run the sequential baseline instead of the pipeline.

        Returns:
            The join report.

        Raises:
            ValueError: If the settings are invalid.
            JoinAbortedError: If a chunk failed during verification.
        """
        pipeline_config = self.pipeline_config(algorithm, mode, strategy, group_size, group_split)
        logger.info(f"Joining {len(prepared.collection)} sets with {pipeline_config.algorithm.value} for {pred}")
        if host_only:
            return run_host_join(
                prepared.collection,
                pred,
                algorithm=pipeline_config.algorithm,
                mode=pipeline_config.mode,
                other=prepared.other,
                group_split=group_split,
            )
        return run_join(prepared.collection, pred, pipeline_config, other=prepared.other)

    def join_file(
        self,
        input_path: PathLike,
        similarity: str,
        threshold: str,
        *,
        other_path: Optional[PathLike] = None,
        precoded: bool = False,
        **options: object,
    ) -> JoinReport:
        """
        Read, preprocess and join dataset files.

        Args:
            input_path: Dataset file.
            similarity: jaccard, cosine, dice or overlap.
            threshold: Threshold as a decimal or fraction string, such as "0.8".
            other_path: Second dataset of an R-S join.
            precoded: Tokens are already integer codes.
            **options: Keyword arguments of join().

        Raises:
            FileNotFoundError: If a file does not exist.
            ValueError: If the predicate or settings are invalid.
        """
        logger.info(f"Processing dataset: {input_path}")
        pred = SimilarityPredicate.parse(similarity, threshold)
        prepared = self.prepare(input_path, other_path, precoded)
        return self.join(prepared, pred, **options)  # type: ignore[arg-type]
