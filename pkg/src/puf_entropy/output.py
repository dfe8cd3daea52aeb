"""Output formatters for human, JSON and CSV output."""

import csv
import io
import json
import math
from typing import Any, Iterable, Sequence

import numpy as np

from .bounds.report import EntropyReport, theta_key
from .errors import Diagnostic, PufEntropyError
from .keyrank import KeyRankExperiment

TABLE_COLUMNS = (
    "code",
    "n",
    "m",
    "m_tilde",
    "k",
    "l",
    "l_m_tilde",
    "l_tilde",
    "exact_iid",
    "exact_ind",
)


def format_json(data: dict[str, Any]) -> str:
    """Format data as compact JSON."""
    return json.dumps(data, separators=(",", ":"))


def format_json_pretty(data: dict[str, Any]) -> str:
    """Format data as pretty JSON."""
    return json.dumps(data, indent=2)


def format_table_value(value: float | int | None) -> str:
    """Round like the published table: 3 significant digits, at most 2 decimals."""
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    if math.isnan(value):
        return "NaN"
    magnitude = abs(value)
    if magnitude >= 100:
        return f"{value:.0f}"
    if magnitude >= 10:
        return f"{value:.1f}"
    return f"{value:.2f}"


def csv_text(
    header: Sequence[str] | None, rows: Iterable[Sequence[Any]], comments: Sequence[str] = ()
) -> str:
    """CSV with `# ` comment lines on top; fields holding commas are quoted."""
    buffer = io.StringIO()
    for comment in comments:
        buffer.write(f"# {comment}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def table_to_csv(
    rows: Sequence[EntropyReport], theta_deltas: Sequence[float], comments: Sequence[str] = ()
) -> str:
    """One rounded CSV row per report in the order of TABLE_COLUMNS plus grouping columns."""
    keys = [theta_key(t) for t in theta_deltas]
    header = TABLE_COLUMNS + tuple(f"grouping_{k}" for k in keys)
    body: list[list[str]] = []
    for row in rows:
        values = [
            row.n,
            row.m,
            row.m_tilde,
            row.k,
            row.l,
            row.l_of_m_tilde,
            row.l_tilde,
            row.H_exact_iid,
            row.H_exact_ind,
        ] + [row.grouping.get(k) for k in keys]
        body.append([row.code] + [format_table_value(v) for v in values])
    return csv_text(header, body, comments)


def format_human_report(report: EntropyReport) -> str:
    lines = [f"✓ {report.code}: n={report.n}, k={report.k}"]
    lines.append(f"  m={format_table_value(report.m)}  m~={format_table_value(report.m_tilde)}")
    lines.append(
        f"  l={format_table_value(report.l)}  l(m~)={format_table_value(report.l_of_m_tilde)}"
        f"  l~={format_table_value(report.l_tilde)}"
    )
    lines.append(
        f"  exact IID={format_table_value(report.H_exact_iid)}"
        f"  exact IND={format_table_value(report.H_exact_ind)}"
    )
    for key, value in report.grouping.items():
        lines.append(f"  grouping theta_delta={key}: {format_table_value(value)}")
    lines.extend(format_human_diagnostics(report.diagnostics))
    return "\n".join(lines)


def format_human_diagnostics(diagnostics: Sequence[Diagnostic], limit: int = 10) -> list[str]:
    if not diagnostics:
        return []
    lines = ["  Warnings:"]
    for d in diagnostics[:limit]:
        location = f"{d.location}: " if d.location else ""
        lines.append(f"    {location}{d.message}")
    if len(diagnostics) > limit:
        lines.append(f"    ... {len(diagnostics) - limit} more")
    return lines


def format_human_error(error: PufEntropyError) -> str:
    return f"✗ {error}"


def error_payload(error: PufEntropyError) -> dict[str, Any]:
    return {"ok": False, "errors": [error.to_dict()]}


def ranks_to_csv(experiment: KeyRankExperiment, comments: Sequence[str] = ()) -> str:
    header = ("device", "key_index", "log2_rank_lower", "log2_rank_est", "log2_rank_upper")
    rows = (
        (device, key_index, repr(lower), repr(estimate), repr(upper))
        for device, key_index, lower, estimate, upper in experiment.rows()
    )
    return csv_text(header, rows, comments)


def format_human_keyrank(summary: dict[str, Any]) -> str:
    ok = summary.get("nist_ok", True) and summary["key_invariant"]
    mark = "✓" if ok else "✗"
    lines = [
        f"{mark} {summary['code']}: mean log2 rank {summary['mean_log2_rank']:.2f} bit "
        f"over {summary['devices']} devices (k={summary['k']})"
    ]
    if "grouping_bound" in summary:
        lines.append(
            f"  grouping bound {summary['grouping_bound']:.2f} bit, "
            f"H - 1 check {'passed' if summary['nist_ok'] else 'FAILED'}"
        )
    if not summary["key_invariant"]:
        lines.append("  rank differs between keys on some devices")
    return "\n".join(lines)


def grid_to_csv(grid: np.ndarray, comments: Sequence[str] = ()) -> str:
    """Heat-map grid, one text row per grid row; empty cells stay empty."""
    rows = (["" if math.isnan(v) else repr(float(v)) for v in row] for row in grid)
    return csv_text(None, rows, comments)
