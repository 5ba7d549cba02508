"""
Rendering of join reports as text, JSON or CSV.
"""

import csv
import io
import json
from dataclasses import asdict
from typing import Any, Dict, List, Optional, Tuple

from ssjoin_api.pipeline import JoinReport

REPORT_FORMATS = ("text", "json", "csv")
REPORT_SCHEMA = 1
CSV_FIELDS = [
    "threshold",
    "algorithm",
    "strategy",
    "join_ms",
    "filtering_ms",
    "serialization_ms",
    "verification_ms",
    "candidates",
    "chunks",
    "result",
]


def format_pairs(pairs: List[Tuple[int, int]]) -> str:
    """One ``r_id<TAB>s_id`` line per pair."""
    return "".join(f"{r}\t{s}\n" for r, s in pairs)


def format_summary(report: JoinReport) -> str:
    """Human-readable result and phase timings."""
    timings = report.timings.as_milliseconds()
    lines = [
        f"result: {report.count}",
        f"algorithm: {report.algorithm}",
        f"predicate: {report.predicate}",
        f"strategy: {report.strategy}",
        f"chunks: {report.chunk_count}",
        f"candidates: {report.candidate_count} ({report.candidate_bytes} bytes)",
    ]
    if report.host_pair_count:
        lines.append(f"host-verified pairs: {report.host_pair_count}")
    lines.extend(
        f"{name[:-3]}: {value:.3f} ms"
        for name, value in timings.items()
    )
    return "\n".join(lines) + "\n"


def report_dict(report: JoinReport, mode: str, settings: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """JSON-ready view of a report."""
    return {
        "schema": REPORT_SCHEMA,
        "algorithm": report.algorithm,
        "predicate": report.predicate,
        "strategy": report.strategy,
        "mode": mode,
        "count": report.count,
        "pairs": [list(pair) for pair in report.pairs] if report.pairs is not None else None,
        "chunks": report.chunk_count,
        "candidates": report.candidate_count,
        "candidate_bytes": report.candidate_bytes,
        "host_pairs": report.host_pair_count,
        "timings": report.timings.as_milliseconds(),
        "generation": asdict(report.generation),
        "verification": asdict(report.verification),
        "peaks": {
            "candidate_bytes": report.peak_candidate_bytes,
            "output_bytes": report.peak_output_bytes,
        },
        "settings": settings or {},
    }


def format_json(report: JoinReport, mode: str, settings: Optional[Dict[str, Any]] = None) -> str:
    return json.dumps(report_dict(report, mode, settings), indent=2) + "\n"


def format_csv(report: JoinReport, threshold: str) -> str:
    """Header plus one row with the phase-time decomposition."""
    timings = report.timings.as_milliseconds()
    row = {
        "threshold": threshold,
        "algorithm": report.algorithm,
        "strategy": report.strategy,
        "join_ms": round(timings["join_ms"], 3),
        "filtering_ms": round(timings["filtering_ms"], 3),
        "serialization_ms": round(timings["serialization_ms"], 3),
        "verification_ms": round(timings["verification_ms"], 3),
        "candidates": report.candidate_count,
        "chunks": report.chunk_count,
        "result": report.count,
    }
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerow(row)
    return buffer.getvalue()
