"""
Command-line interface for the set similarity join engine.

This module provides the ``ssjoin`` command: ``join`` runs a self-join or an
R-S join over dataset files, ``bench`` runs a benchmark suite over synthetic
datasets.
"""

import io
import logging
import sys
from typing import List, Optional

import click

from ssjoin_api import SetJoinClient, SimilarityPredicate, config
from ssjoin_api.bench import SUITES, BenchSettings, parse_sizes, parse_thresholds, run_bench, write_bench_csv
from ssjoin_api.config import EXECUTORS, MAX_GROUP_SIZE, STRATEGIES, is_power_of_two
from ssjoin_api.joiners import Algorithm
from ssjoin_api.oracle import SIZE_DISTRIBUTIONS
from ssjoin_api.pipeline import JoinAbortedError
from ssjoin_api.similarity import SimilarityFunction
from ssjoin_api.verify import OutputMode
from ssjoin_cli import __version__
from ssjoin_cli.report import REPORT_FORMATS, format_csv, format_json, format_pairs, format_summary


def _check_group_size(ctx: click.Context, param: click.Parameter, value: Optional[int]) -> Optional[int]:
    if value is not None and (not is_power_of_two(value) or value > MAX_GROUP_SIZE):
        raise click.BadParameter(f"must be a power of two <= {MAX_GROUP_SIZE} (got {value})")
    return value


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        with open(output, "w", encoding="utf-8") as f:
            f.write(text)
        click.echo(f"Results saved to {output}", err=True)
    else:
        click.echo(text, nl=False)


@click.group()
@click.option(
    "--workers",
    type=int,
    envvar="SSJOIN_WORKERS",
    help="Verification workers. Can also be set via SSJOIN_WORKERS environment variable.",
)
@click.option(
    "--chunk-budget",
    envvar="SSJOIN_CHUNK_BUDGET",
    help="Candidate chunk budget M_c in bytes, with optional K/M/G suffix or 'inf'. "
    "Can also be set via SSJOIN_CHUNK_BUDGET environment variable.",
)
@click.option(
    "--executor",
    type=click.Choice(EXECUTORS),
    envvar="SSJOIN_EXECUTOR",
    help="Worker pool kind. Can also be set via SSJOIN_EXECUTOR environment variable.",
)
@click.option(
    "--log-level",
    envvar="SSJOIN_LOG_LEVEL",
    help="Logging level. Can also be set via SSJOIN_LOG_LEVEL environment variable.",
)
@click.version_option(version=__version__, package_name="ssjoin")
def cli(
    workers: Optional[int], chunk_budget: Optional[str], executor: Optional[str], log_level: Optional[str]
) -> None:
    """
    Set Similarity Join Engine

    Exact set similarity joins with prefix filtering and chunked parallel verification.
    """
    if log_level:
        logging.getLogger().setLevel(log_level.strip().upper())
    if chunk_budget is not None:
        try:
            config.set_chunk_budget(chunk_budget)
        except ValueError as e:
            raise click.BadParameter(str(e), param_hint="--chunk-budget")
    config.update(workers=workers, executor=executor)


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("other_path", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--algorithm",
    type=click.Choice([algorithm.value for algorithm in Algorithm]),
    default=Algorithm.PPJOIN.value,
    help="Candidate generation algorithm.",
)
@click.option(
    "--similarity",
    type=click.Choice([function.value for function in SimilarityFunction]),
    default=SimilarityFunction.JACCARD.value,
    help="Similarity function.",
)
@click.option("--threshold", required=True, help="Threshold, e.g. 0.8 or 4/5; an integer for overlap.")
@click.option(
    "--mode",
    type=click.Choice([mode.value for mode in OutputMode]),
    default=OutputMode.COUNT.value,
    help="Report the number of similar pairs, or the pairs themselves.",
)
@click.option(
    "--strategy",
    type=click.Choice(STRATEGIES),
    envvar="SSJOIN_STRATEGY",
    help="Verification strategy. Can also be set via SSJOIN_STRATEGY environment variable.",
)
@click.option(
    "--group-size",
    type=int,
    envvar="SSJOIN_GROUP_SIZE",
    callback=_check_group_size,
    help="Worker group size B, a power of two. Can also be set via SSJOIN_GROUP_SIZE environment variable.",
)
@click.option(
    "--report",
    "report_format",
    type=click.Choice(REPORT_FORMATS),
    default="text",
    help="Report format.",
)
@click.option(
    "--output", "-o",
    type=click.Path(dir_okay=False),
    help="Output file path. If not provided, output will be printed to stdout.",
)
@click.option("--precoded", is_flag=True, help="Tokens are already frequency-ordered integer codes.")
@click.option(
    "--group-split/--no-group-split",
    default=True,
    help="GroupJoin: verify group-expansion pairs on the producer thread.",
)
@click.option("--host-only", is_flag=True, help="Run the sequential single-thread baseline.")
def join(
    input_path: str,
    other_path: Optional[str],
    algorithm: str,
    similarity: str,
    threshold: str,
    mode: str,
    strategy: Optional[str],
    group_size: Optional[int],
    report_format: str,
    output: Optional[str],
    precoded: bool,
    group_split: bool,
    host_only: bool,
) -> None:
    """
    Join the sets of a dataset file.

    INPUT_PATH holds one set per line, tokens separated by whitespace. With
    OTHER_PATH an R-S join is run instead of a self-join.
    """
    try:
        SimilarityPredicate.parse(similarity, threshold)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--threshold")

    try:
        client = SetJoinClient()
        report = client.join_file(
            input_path,
            similarity,
            threshold,
            other_path=other_path,
            precoded=precoded,
            algorithm=algorithm,
            mode=mode,
            strategy=strategy,
            group_size=group_size,
            group_split=group_split,
            host_only=host_only,
        )
    except (ValueError, OSError, JoinAbortedError) as e:
        click.echo(f"Error: {str(e)}", err=True)
        sys.exit(1)

    if report_format == "json":
        _emit(format_json(report, mode, config.as_dict()), output)
    elif report_format == "csv":
        _emit(format_csv(report, threshold), output)
    elif report.pairs is not None:
        _emit(format_pairs(report.pairs), output)
        click.echo(format_summary(report), err=True, nl=False)
    else:
        _emit(format_summary(report), output)


@cli.command()
@click.option("--suite", type=click.Choice(list(SUITES)), default="scaling", help="Benchmark suite.")
@click.option("--sizes", default="1k", help="Comma-separated collection sizes, e.g. 1k,10k.")
@click.option("--thresholds", default="0.5:0.95:0.05", help="start:stop:step range or comma-separated list.")
@click.option(
    "--similarity",
    type=click.Choice([function.value for function in SimilarityFunction]),
    default=SimilarityFunction.JACCARD.value,
    help="Similarity function.",
)
@click.option(
    "--distribution",
    type=click.Choice(SIZE_DISTRIBUTIONS),
    default="uniform",
    help="Synthetic dataset distribution.",
)
@click.option("--seed", type=int, default=0, help="Dataset generator seed.")
@click.option("--token-universe", type=int, default=1000, help="Number of distinct synthetic tokens.")
@click.option("--max-size", type=int, default=50, help="Largest synthetic set size.")
@click.option(
    "--group-size",
    type=int,
    envvar="SSJOIN_GROUP_SIZE",
    callback=_check_group_size,
    help="Default worker group size B, a power of two.",
)
@click.option(
    "--output", "-o",
    type=click.Path(dir_okay=False),
    help="Output CSV path. If not provided, the CSV will be printed to stdout.",
)
def bench(
    suite: str,
    sizes: str,
    thresholds: str,
    similarity: str,
    distribution: str,
    seed: int,
    token_universe: int,
    max_size: int,
    group_size: Optional[int],
    output: Optional[str],
) -> None:
    """
    Run a benchmark suite over synthetic datasets and print CSV rows.
    """
    try:
        size_list = parse_sizes(sizes)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--sizes")
    try:
        threshold_list = parse_thresholds(thresholds)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--thresholds")

    try:
        config.update(group_size=group_size)
        config.validate()
        settings = BenchSettings(
            similarity=similarity,
            distribution=distribution,
            seed=seed,
            token_universe=token_universe,
            max_size=max_size,
            workers=config.workers,
            executor=config.executor,
            chunk_budget=config.chunk_budget,
            group_size=config.group_size,
        )
        rows = run_bench(suite, size_list, threshold_list, settings)
    except (ValueError, JoinAbortedError) as e:
        click.echo(f"Error: {str(e)}", err=True)
        sys.exit(1)

    if output:
        with open(output, "w", encoding="utf-8", newline="") as f:
            write_bench_csv(rows, f)
        click.echo(f"Results saved to {output}", err=True)
    else:
        buffer = io.StringIO()
        write_bench_csv(rows, buffer)
        click.echo(buffer.getvalue(), nl=False)


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point for the CLI; returns the process exit status."""
    try:
        result = cli.main(args=argv, prog_name="ssjoin", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except SystemExit as e:
        if e.code is None:
            return 0
        return e.code if isinstance(e.code, int) else 1
    except Exception as e:
        click.echo(f"Error: {str(e)}", err=True)
        return 1
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(main())
