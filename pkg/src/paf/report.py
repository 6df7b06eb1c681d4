"""Report rendering: canonical JSON emission and fixed-width text tables
for the metrics summary and the paired-test results.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

from .evalharness import EvalReport
from .stats import MetricsSummary, TTestResult


def canonical_json(payload) -> str:
    """Stable byte form: sorted keys, two-space indent, trailing newline."""
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def metrics_row(summary: MetricsSummary) -> dict:
    return {
        "method": summary.method,
        "total_hits": summary.total_hits,
        "count_above_0_8": summary.count_above_0_8,
        "mean": summary.mean,
        "median": summary.median,
        "n": summary.n,
    }


def ttest_row(result: TTestResult) -> dict:
    return {
        "comparison": list(result.comparison),
        "t_statistic": result.t_statistic,
        "degrees_of_freedom": result.degrees_of_freedom,
        "p_value": result.p_value,
        "alpha": result.alpha,
        "significant": result.significant,
        "degenerate": result.degenerate,
    }


def report_payload(report: EvalReport) -> dict:
    return {
        "summaries": [metrics_row(s) for s in report.summaries],
        "tests": [ttest_row(t) for t in report.tests],
        "embedder_norm_stats": report.embedder_norm_stats,
        "seed": report.seed,
        "config": report.config,
        "failures": [list(f) for f in report.failures],
    }


def report_to_json(report: EvalReport) -> str:
    return canonical_json(report_payload(report))


def _fmt(value, spec: str) -> str:
    if value is None:
        return "-"
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, spec)


def format_metrics_table(rows: Sequence[dict]) -> str:
    """Text table of per-method metrics (means and medians to 3 decimals)."""
    header = ("Method", "Total Hits", "Count above 0.8", "Mean", "Median")
    body = [
        (
            str(row["method"]),
            str(row["total_hits"]),
            str(row["count_above_0_8"]),
            _fmt(row["mean"], ".3f"),
            _fmt(row["median"], ".3f"),
        )
        for row in rows
    ]
    return _render_table(header, body)


def format_ttest_table(rows: Sequence[dict]) -> str:
    """Text table of paired-test outcomes (t and p to 4 decimals)."""
    header = ("Comparison", "t-statistic", "p-value")
    body = [
        (
            " vs ".join(row["comparison"]),
            _fmt(row["t_statistic"], ".4f"),
            _fmt(row["p_value"], ".4f"),
        )
        for row in rows
    ]
    return _render_table(header, body)


def _render_table(header: tuple[str, ...], body: list[tuple[str, ...]]) -> str:
    widths = [
        max(len(header[col]), *(len(row[col]) for row in body)) if body else len(header[col])
        for col in range(len(header))
    ]
    def line(cells):
        return "  ".join(cell.ljust(w) for cell, w in zip(cells, widths)).rstrip()

    rule = "  ".join("-" * w for w in widths)
    return "\n".join([line(header), rule] + [line(row) for row in body]) + "\n"


def load_table(path: str | Path) -> list[dict]:
    """Load a stored table-of-rows JSON document (e.g. published summaries)."""
    return json.loads(Path(path).read_text(encoding="utf-8"))["rows"]


def dump_table(rows: Sequence[dict], path: str | Path) -> None:
    Path(path).write_text(canonical_json({"rows": list(rows)}), encoding="utf-8")
