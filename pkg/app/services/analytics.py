# app/services/analytics.py
"""
Score tables and statistics over executed pools.

A MetricTable has one row per seed and one column per datamorphism; each cell is the
score the subject gave the single-step mutant of that seed, or Missing (None) when the
subject failed on it. Missing cells never enter means or standard deviations.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from app.errors import ConfigError, LengthMismatch, ReportError, ShapeError, ZeroVariance
from app.models.datum import Datum, Number, NumVector
from app.models.framework import Pool
from app.models.records import ExecutionRecord, VerdictSummary

logger = logging.getLogger(__name__)

REPORT_FORMAT_VERSION = 1
FOOTER_LABELS = ("Average", "StDev", "Count", "NotRecognised")
ROW_HEADER = "seed"

Cell = float | None
ScoreExtractor = Callable[[Datum], Cell]


def numeric_score(output: Datum) -> Cell:
    """Number outputs score as their value; a one-element NumVector as its element; anything else is Missing."""
    if isinstance(output, Number):
        return output.value
    if isinstance(output, NumVector) and len(output) == 1:
        return output.values[0]
    return None


@dataclass(frozen=True)
class ColumnStats:
    mean: float | None
    stddev: float | None
    count: int
    missing: int

    def to_json(self) -> dict[str, Any]:
        return {"mean": self.mean, "stddev": self.stddev, "count": self.count, "missing": self.missing}


def column_stats(cells: Iterable[Cell], population_stddev: bool = False) -> ColumnStats:
    """
    Mean and standard deviation of the present cells.

    The sample deviation (n - 1) is used unless population_stddev is set; with fewer
    values than the divisor needs, the deviation is None.
    """
    cells = list(cells)
    values = np.array([cell for cell in cells if cell is not None], dtype=np.float64)
    missing = len(cells) - values.size
    if values.size == 0:
        return ColumnStats(None, None, 0, missing)
    ddof = 0 if population_stddev else 1
    mean = float(np.mean(values))
    stddev = float(np.std(values, ddof=ddof)) if values.size > ddof else None
    return ColumnStats(mean, stddev, int(values.size), missing)


@dataclass
class MetricTable:
    row_ids: list[str] = field(default_factory=list)
    column_ids: list[str] = field(default_factory=list)
    # cells[row][column]; None is Missing
    cells: list[list[Cell]] = field(default_factory=list)
    population_stddev: bool = False

    def __post_init__(self):
        if len(self.cells) != len(self.row_ids) or any(len(row) != len(self.column_ids) for row in self.cells):
            raise ShapeError(
                f"Cell grid does not match {len(self.row_ids)} rows x {len(self.column_ids)} columns"
            )

    def column(self, column_id: str) -> list[Cell]:
        j = self.column_ids.index(column_id)
        return [row[j] for row in self.cells]

    def row(self, row_id: str) -> list[Cell]:
        return list(self.cells[self.row_ids.index(row_id)])

    def column_stats(self, column_id: str) -> ColumnStats:
        return column_stats(self.column(column_id), self.population_stddev)

    def row_stats(self, row_id: str) -> ColumnStats:
        return column_stats(self.row(row_id), self.population_stddev)

    def overall_stats(self) -> ColumnStats:
        return column_stats((cell for row in self.cells for cell in row), self.population_stddev)

    def to_json(self) -> dict[str, Any]:
        return {
            "rows": list(self.row_ids),
            "columns": list(self.column_ids),
            "cells": [list(row) for row in self.cells],
            "population_stddev": self.population_stddev,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "MetricTable":
        try:
            cells = [[None if cell is None else float(cell) for cell in row] for row in data["cells"]]
            return cls(
                [str(r) for r in data["rows"]],
                [str(c) for c in data["columns"]],
                cells,
                bool(data.get("population_stddev", False)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ReportError(f"Malformed metric table: {e}") from e


def build_metric_table(
    pool: Pool,
    records: Iterable[ExecutionRecord] | Mapping[str, ExecutionRecord],
    score_extractor: ScoreExtractor = numeric_score,
    population_stddev: bool = False,
) -> MetricTable:
    """
    Lays the scores of single-step mutants out as a seeds x datamorphisms table.

    Rows follow the pool's seed order and columns the order in which datamorphisms first
    appear. A mutant that coincides with another case contributes its cell through its
    alias lineage. Failed executions and scores the extractor cannot read are Missing.

    Args:
        pool: An executed pool whose mutants are all one step away from a seed.
        records: Execution records covering the pool.
        score_extractor: Maps an output datum to a score, or None for Missing.
        population_stddev: Use the population rather than the sample deviation.

    Raises:
        ShapeError: a mutant is more than one step from its seed, or two mutants claim one cell.
        ConfigError: a pool case has no execution record.

    Returns:
        MetricTable: The score table.
    """
    by_id = dict(records) if isinstance(records, Mapping) else {record.case_id: record for record in records}
    for case in pool.mutants():
        if case.lineage.depth > 1:
            raise ShapeError(
                f"Case {case.id[:12]} is {case.lineage.depth} steps from its seed; a score table needs single-step mutants"
            )

    row_ids = [seed.id for seed in pool.seeds()]
    row_index = {row_id: i for i, row_id in enumerate(row_ids)}
    column_ids: list[str] = []
    placed: dict[tuple[str, str], str] = {}
    for case in pool:
        for lineage in pool.lineages(case.id):
            if lineage.depth != 1 or lineage.seed_id not in row_index:
                continue
            name = lineage.steps[0].morphism
            if name not in column_ids:
                column_ids.append(name)
            previous = placed.setdefault((lineage.seed_id, name), case.id)
            if previous != case.id:
                raise ShapeError(
                    f"Seed {lineage.seed_id[:12]} has more than one {name!r} mutant; the table cell is ambiguous"
                )

    cells: list[list[Cell]] = [[None] * len(column_ids) for _ in row_ids]
    column_index = {name: j for j, name in enumerate(column_ids)}
    for (seed_id, name), case_id in placed.items():
        record = by_id.get(case_id)
        if record is None:
            raise ConfigError(f"No execution record for case {case_id[:12]}")
        if record.ok:
            cells[row_index[seed_id]][column_index[name]] = score_extractor(record.output)

    table = MetricTable(row_ids, column_ids, cells, population_stddev)
    logger.info(f"Built metric table with {len(row_ids)} rows and {len(column_ids)} columns.")
    return table


@dataclass
class SummaryBlock:
    columns: dict[str, ColumnStats] = field(default_factory=dict)
    overall: ColumnStats = field(default_factory=lambda: ColumnStats(None, None, 0, 0))

    @property
    def not_recognised(self) -> int:
        return self.overall.missing

    def to_json(self) -> dict[str, Any]:
        return {
            "columns": {name: stats.to_json() for name, stats in self.columns.items()},
            "overall": self.overall.to_json(),
        }

    def format_lines(self) -> list[str]:
        lines = [f"{'column':<24} {'average':>12} {'stdev':>12} {'count':>6} {'missing':>8}"]
        for name, stats in [*self.columns.items(), ("Overall", self.overall)]:
            lines.append(
                f"{name:<24} {_fmt(stats.mean):>12} {_fmt(stats.stddev):>12} {stats.count:>6} {stats.missing:>8}"
            )
        return lines


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.4f}"


def summarize(table: MetricTable) -> SummaryBlock:
    """Per-column average, deviation and missing counts plus the same over the whole table."""
    return SummaryBlock(
        {column_id: table.column_stats(column_id) for column_id in table.column_ids},
        table.overall_stats(),
    )


def rank_columns(summary: SummaryBlock) -> list[tuple[str, float]]:
    """Columns with a defined average, highest average first; ties keep table order."""
    scored = [(name, stats.mean) for name, stats in summary.columns.items() if stats.mean is not None]
    return sorted(scored, key=lambda item: -item[1])


def rank_overall(summaries: Mapping[str, SummaryBlock]) -> list[tuple[str, float]]:
    """Orders labelled summaries (one per subject, say) by their overall average, highest first."""
    scored = [(label, block.overall.mean) for label, block in summaries.items() if block.overall.mean is not None]
    return sorted(scored, key=lambda item: -item[1])


@dataclass(frozen=True)
class CorrelationReport:
    labels: tuple[str, str]
    r: float
    n: int

    def to_json(self) -> dict[str, Any]:
        return {"labels": list(self.labels), "r": self.r, "n": self.n}


def pearson(x: Sequence[float], y: Sequence[float], labels: tuple[str, str] = ("x", "y")) -> CorrelationReport:
    """
    Sample Pearson correlation of two equally long vectors.

    Raises:
        LengthMismatch: the vectors differ in length or have fewer than two entries.
        ZeroVariance: either vector is constant.
    """
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise LengthMismatch(f"Vectors have lengths {xs.size} and {ys.size}")
    if xs.size < 2:
        raise LengthMismatch(f"Correlation needs at least 2 values, got {xs.size}")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance(f"{labels[0] if sxx == 0.0 else labels[1]} has zero variance")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return CorrelationReport(labels, max(-1.0, min(1.0, r)), int(xs.size))


def _csv_cell(value: float | int | None) -> str:
    return "" if value is None else repr(value)


def emit_report(
    table: MetricTable,
    summary: SummaryBlock | None = None,
    verdicts: VerdictSummary | None = None,
    fmt: str = "csv",
    created_at: str | None = None,
) -> bytes:
    """
    Serializes a table and its summary.

    CSV: a header row of column names, one row per seed and the footer rows Average,
    StDev, Count and NotRecognised. An empty field is Missing. JSON holds the table,
    the summaries, the verdict counts and a meta block with the creation time.

    Raises:
        ConfigError: fmt is neither csv nor json.
    """
    summary = summary or summarize(table)
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\r\n")
        writer.writerow([ROW_HEADER, *table.column_ids])
        for row_id, row in zip(table.row_ids, table.cells):
            writer.writerow([row_id, *(_csv_cell(cell) for cell in row)])
        stats = [summary.columns.get(c) or table.column_stats(c) for c in table.column_ids]
        writer.writerow(["Average", *(_csv_cell(s.mean) for s in stats)])
        writer.writerow(["StDev", *(_csv_cell(s.stddev) for s in stats)])
        writer.writerow(["Count", *(str(s.count) for s in stats)])
        writer.writerow(["NotRecognised", *(str(s.missing) for s in stats)])
        return buffer.getvalue().encode("utf-8")
    if fmt == "json":
        document = {
            "table": table.to_json(),
            "summaries": summary.to_json(),
            "verdicts": verdicts.to_json() if verdicts is not None else None,
            "meta": {
                "format_version": REPORT_FORMAT_VERSION,
                "created_at": created_at or datetime.now(timezone.utc).isoformat(),
            },
        }
        return (json.dumps(document, indent=2, sort_keys=True) + "\n").encode("utf-8")
    raise ConfigError(f"Unknown report format {fmt!r}; expected 'csv' or 'json'")


def load_report(data: bytes) -> MetricTable:
    """Reloads the table from a JSON report."""
    try:
        document = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ReportError(f"Report is not valid JSON: {e}") from e
    if not isinstance(document, dict) or "table" not in document:
        raise ReportError("Report has no 'table' section")
    return MetricTable.from_json(document["table"])


def parse_csv_table(data: bytes, population_stddev: bool = False) -> MetricTable:
    """Reads the data rows of a CSV report back into a table; footer rows are skipped."""
    try:
        rows = list(csv.reader(io.StringIO(data.decode("utf-8"))))
    except (UnicodeDecodeError, csv.Error) as e:
        raise ReportError(f"Unreadable CSV report: {e}") from e
    if not rows or not rows[0] or rows[0][0] != ROW_HEADER:
        raise ReportError(f"CSV report must start with a '{ROW_HEADER}' header row")
    column_ids = rows[0][1:]
    row_ids: list[str] = []
    cells: list[list[Cell]] = []
    for line_number, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if row[0] in FOOTER_LABELS:
            break
        if len(row) != len(column_ids) + 1:
            raise ReportError(f"CSV line {line_number} has {len(row) - 1} cells, expected {len(column_ids)}")
        try:
            cells.append([float(cell) if cell != "" else None for cell in row[1:]])
        except ValueError as e:
            raise ReportError(f"CSV line {line_number}: {e}") from e
        row_ids.append(row[0])
    return MetricTable(row_ids, column_ids, cells, population_stddev)


def read_vector(path: str | Path) -> list[float]:
    """Reads a numeric vector from a file of comma- or newline-separated numbers."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ReportError(f"Cannot read vector file {path}: {e}") from e
    values = []
    for row in csv.reader(io.StringIO(text)):
        for cell in row:
            cell = cell.strip()
            if not cell:
                continue
            try:
                values.append(float(cell))
            except ValueError:
                raise ReportError(f"Vector file {path} contains a non-numeric value {cell!r}") from None
    return values


def write_report(path: str | Path, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as e:
        logger.error(f"Failed to write report {path}: {e}")
        raise ReportError(f"Cannot write report {path}: {e}") from e
    logger.info(f"Report written to {path} ({len(data)} bytes).")
