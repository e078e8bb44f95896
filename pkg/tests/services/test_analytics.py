# tests/services/test_analytics.py
import json
import random
import statistics

import pytest

from app.errors import ConfigError, LengthMismatch, ReportError, ShapeError, ZeroVariance
from app.models.datum import DatumKind, Number, Text
from app.models.framework import Datamorphism, Framework, LineageStep, Pool, TestCase
from app.models.records import ExecutionRecord, VerdictSummary
from app.services.analytics import (
    ColumnStats,
    MetricTable,
    SummaryBlock,
    build_metric_table,
    column_stats,
    emit_report,
    load_report,
    numeric_score,
    parse_csv_table,
    pearson,
    rank_columns,
    rank_overall,
    read_vector,
    summarize,
)
from app.services.generation import generate_kway
from app.services.runner import execute_pool
from app.subjects.recognizer import ATTRIBUTES, RecognizerOptions, synthetic_recognizer


@pytest.fixture
def small_table():
    return MetricTable(["s1", "s2"], ["f", "g"], [[90.0, 100.0], [80.0, 70.0]])


# --- column statistics ---
def test_two_by_two_means(small_table):
    """Test column and row means of a small table."""
    summary = summarize(small_table)
    assert summary.columns["f"].mean == 85.0
    assert summary.columns["g"].mean == 85.0
    assert summary.overall.mean == 85.0


def test_missing_cells_are_excluded():
    """Test that missing cells are left out of statistics and counted."""
    stats = column_stats([90.0, None, 70.0])
    assert stats.mean == 80.0
    assert stats.count == 2
    assert stats.missing == 1


def test_all_missing_column():
    """Test a column with no scores at all."""
    assert column_stats([None, None]) == ColumnStats(None, None, 0, 2)


def test_single_value_has_no_sample_deviation():
    """Test the sample deviation of a single value."""
    assert column_stats([42.0]).stddev is None
    assert column_stats([42.0], population_stddev=True).stddev == 0.0


def test_empty_table_summary():
    """Test summarizing an empty table."""
    summary = summarize(MetricTable())
    assert summary.columns == {}
    assert summary.overall.mean is None


def test_spreadsheet_column():
    """Test column statistics against the statistics module."""
    column = [98.0] + [100.0] * 8 + [94.0]
    stats = column_stats(column)
    assert stats.mean == pytest.approx(statistics.fmean(column), abs=1e-12)
    assert stats.stddev == pytest.approx(statistics.stdev(column), abs=1e-12)
    population = column_stats(column, population_stddev=True)
    assert population.stddev == pytest.approx(statistics.pstdev(column), abs=1e-12)


def test_random_columns_match_two_pass_formula():
    """Test column statistics against a two-pass reference."""
    rng = random.Random(5)
    for _ in range(50):
        column = [rng.uniform(0, 100) for _ in range(rng.randint(2, 40))]
        mean = sum(column) / len(column)
        variance = sum((v - mean) ** 2 for v in column) / (len(column) - 1)
        stats = column_stats(column)
        assert stats.mean == pytest.approx(mean, rel=1e-12)
        assert stats.stddev == pytest.approx(variance**0.5, rel=1e-9)


def test_row_and_column_access(small_table):
    """Test looking up rows and columns by id."""
    assert small_table.column("g") == [100.0, 70.0]
    assert small_table.row("s2") == [80.0, 70.0]
    assert small_table.row_stats("s1").mean == 95.0


def test_grid_must_match_ids():
    """Test rejection of a cell grid that does not match the ids."""
    with pytest.raises(ShapeError):
        MetricTable(["s1"], ["f", "g"], [[1.0]])


# --- ranking ---
def _block(mean):
    return SummaryBlock({}, ColumnStats(mean, None, 1, 0))


def test_rank_overall_orders_by_average():
    """Test ranking tables by overall average."""
    ranked = rank_overall(
        {"delta": _block(80.32), "gamma": _block(93.03), "alpha": _block(99.70), "beta": _block(94.75)}
    )
    assert [label for label, _ in ranked] == ["alpha", "beta", "gamma", "delta"]


def test_rank_columns_skips_undefined():
    """Test that columns without a mean are left out of the ranking."""
    table = MetricTable(["s"], ["a", "b", "c"], [[50.0, None, 75.0]])
    assert rank_columns(summarize(table)) == [("c", 75.0), ("a", 50.0)]


# --- correlation ---
def test_pearson_high_correlation():
    """Test Pearson r on strongly correlated vectors."""
    report = pearson([99.70, 94.75, 93.03, 80.32], [96.38, 84.50, 86.81, 63.57])
    assert 0.975 <= report.r <= 1.0
    assert report.n == 4


def test_pearson_moderate_correlation():
    """Test Pearson r on moderately correlated vectors."""
    report = pearson([1.51, 4.28, 2.80, 7.07], [6.22, 11.85, 6.29, 11.35])
    assert 0.805 <= report.r <= 0.835


def test_pearson_symmetry_and_affine_invariance():
    """Test Pearson r symmetry and affine invariance."""
    x = [1.0, 2.0, 4.0, 3.5, 0.5]
    y = [2.0, 1.0, 5.0, 4.0, 1.5]
    r = pearson(x, y).r
    assert pearson(y, x).r == pytest.approx(r)
    assert pearson([3.0 * v + 7.0 for v in x], y).r == pytest.approx(r)
    assert pearson(x, [-v for v in y]).r == pytest.approx(-r)


def test_pearson_perfect_correlation():
    """Test Pearson r on exactly linear vectors."""
    assert pearson([1.0, 2.0, 3.0], [2.0, 4.0, 6.0]).r == pytest.approx(1.0)


def test_pearson_constant_vector():
    """Test Pearson r with a constant vector."""
    with pytest.raises(ZeroVariance, match="b has zero variance"):
        pearson([1.0, 2.0], [3.0, 3.0], labels=("a", "b"))


@pytest.mark.parametrize("x, y", [([1.0, 2.0], [1.0, 2.0, 3.0]), ([1.0], [2.0])])
def test_pearson_length_mismatch(x, y):
    """Test Pearson r on vectors of different lengths."""
    with pytest.raises(LengthMismatch):
        pearson(x, y)


# --- metric table from an executed pool ---
def test_numeric_score():
    """Test extraction of a numeric score from an output."""
    assert numeric_score(Number(3.5)) == 3.5
    assert numeric_score(Text("x")) is None


def test_recognizer_table_is_uniform():
    """Test the recognizer score table shape and values."""
    subject, fw = synthetic_recognizer(RecognizerOptions())
    pool = generate_kway(fw, 1)
    table = build_metric_table(pool, execute_pool(subject, pool, workers=4))
    assert len(table.row_ids) == 200
    assert table.column_ids == [f"attr_{name}" for name in ATTRIBUTES]
    summary = summarize(table)
    for stats in summary.columns.values():
        assert stats.mean == 99.0
        assert stats.stddev == 0.0
        assert stats.missing == 0


def test_recognizer_errors_become_missing_cells():
    """Test that failed executions become missing cells."""
    subject, fw = synthetic_recognizer(RecognizerOptions(seeds=40, error_fraction=0.2))
    pool = generate_kway(fw, 1)
    records = execute_pool(subject, pool)
    table = build_metric_table(pool, records)
    failed = sum(1 for record in records if not record.ok)
    assert failed > 0
    assert summarize(table).not_recognised == failed


def test_aliased_mutant_fills_its_cell():
    """Test that an alias lineage fills a table cell."""
    stay = Datamorphism("stay", lambda args, params: args[0])
    fw = Framework.from_data("f", DatumKind.NUMBER, [Number(5.0)], [stay])
    pool = generate_kway(fw, 1)
    assert len(pool) == 1
    records = [ExecutionRecord.of_output(case.id, Number(42.0)) for case in pool]
    table = build_metric_table(pool, records)
    assert table.column_ids == ["stay"]
    assert table.cells == [[42.0]]


def test_deep_mutant_is_shape_error():
    """Test rejection of a mutant more than one step from its seed."""
    double = Datamorphism("double", lambda args, params: Number(2.0 * args[0].value))
    fw = Framework.from_data("f", DatumKind.NUMBER, [Number(1.0)], [double])
    pool = generate_kway(fw, 2)
    records = [ExecutionRecord.of_output(case.id, case.datum) for case in pool]
    with pytest.raises(ShapeError, match="2 steps"):
        build_metric_table(pool, records)


def test_ambiguous_cell_is_shape_error():
    """Test rejection of two mutants competing for one cell."""
    seed = TestCase.seed(Number(1.0))
    pool = Pool([seed])
    for value in (2.0, 3.0):
        pool.insert(seed.derive(Number(value), LineageStep("bump")))
    records = [ExecutionRecord.of_output(case.id, case.datum) for case in pool]
    with pytest.raises(ShapeError, match="ambiguous"):
        build_metric_table(pool, records)


# --- reports ---
def test_csv_layout(small_table):
    """Test the CSV report layout."""
    text = emit_report(small_table).decode("utf-8")
    lines = text.split("\r\n")
    assert lines[0] == "seed,f,g"
    assert lines[1] == "s1,90.0,100.0"
    assert lines[3] == "Average,85.0,85.0"
    assert lines[4].startswith("StDev,")
    assert lines[5] == "Count,2,2"
    assert lines[6] == "NotRecognised,0,0"
    assert text.endswith("\r\n")


def test_csv_missing_cell_is_empty():
    """Test that a missing cell is written empty."""
    table = MetricTable(["s1"], ["f", "g"], [[None, 1.25]])
    assert emit_report(table).decode("utf-8").split("\r\n")[1] == "s1,,1.25"


def test_csv_cells_reload_exactly():
    """Test reloading CSV cells without loss."""
    rng = random.Random(11)
    cells = [[rng.uniform(0, 100) for _ in range(3)] for _ in range(4)]
    cells[2][1] = None
    table = MetricTable(["a", "b", "c", "d"], ["x", "y", "z"], cells)
    reloaded = parse_csv_table(emit_report(table))
    assert reloaded.cells == cells
    assert reloaded.row_ids == table.row_ids


def test_json_report_reloads(small_table):
    """Test reloading a JSON report."""
    verdicts = VerdictSummary()
    data = emit_report(small_table, verdicts=verdicts, fmt="json", created_at="2024-01-01T00:00:00+00:00")
    document = json.loads(data)
    assert document["meta"] == {"created_at": "2024-01-01T00:00:00+00:00", "format_version": 1}
    assert document["summaries"]["overall"]["mean"] == 85.0
    assert load_report(data) == small_table


def test_unknown_report_format(small_table):
    """Test rejection of an unknown report format."""
    with pytest.raises(ConfigError, match="xml"):
        emit_report(small_table, fmt="xml")


def test_load_report_rejects_garbage():
    """Test loading a report that is not JSON."""
    with pytest.raises(ReportError):
        load_report(b"not json")
    with pytest.raises(ReportError, match="table"):
        load_report(b"{}")


def test_parse_csv_requires_header():
    """Test parsing a CSV table without a header row."""
    with pytest.raises(ReportError, match="header"):
        parse_csv_table(b"a,b\r\n1,2\r\n")


def test_read_vector(tmp_path):
    """Test reading a vector file in row and column layout."""
    path = tmp_path / "v.csv"
    path.write_text("99.70, 94.75\n93.03\n\n80.32\n", encoding="utf-8")
    assert read_vector(path) == [99.70, 94.75, 93.03, 80.32]


def test_read_vector_errors(tmp_path):
    """Test reading malformed vector files."""
    path = tmp_path / "v.csv"
    path.write_text("1.0,abc\n", encoding="utf-8")
    with pytest.raises(ReportError, match="abc"):
        read_vector(path)
    with pytest.raises(ReportError, match="Cannot read"):
        read_vector(tmp_path / "absent.csv")
