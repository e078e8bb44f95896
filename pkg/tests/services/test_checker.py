# tests/services/test_checker.py
import logging
import math

import pytest

from app.errors import ConfigError, RelationError
from app.models.datum import DatumKind, Number, Text
from app.models.framework import Datamorphism, Framework, Metamorphism, MorphParams, TestCase
from app.models.records import ExecutionRecord, Verdict
from app.services.checker import MetamorphismChecker, check_metamorphisms
from app.services.generation import generate_kway
from app.services.runner import execute_pool
from app.subjects.recognizer import RecognizerOptions, synthetic_recognizer
from app.subjects.sine import sine_correct, sine_faulty, sine_framework


def _verdict_for(result, value):
    case_id = TestCase.seed(Number(value)).id
    return next(v for v in result.verdicts if v.base_id == case_id)


# --- sine reflection ---
def test_correct_sine_never_fails():
    """Test that the correct sine never fails the reflection relation."""
    fw = sine_framework(count=1000)
    pool = generate_kway(fw, 1)
    result = check_metamorphisms(fw, pool, execute_pool(sine_correct(), pool))
    assert result.summary.total(Verdict.FAIL) == 0
    assert result.summary.total(Verdict.PASS) >= 1000


def test_faulty_sine_fails_almost_everywhere():
    """Test that the faulty sine fails on almost every seed."""
    fw = sine_framework(count=1000)
    pool = generate_kway(fw, 1)
    result = check_metamorphisms(fw, pool, execute_pool(sine_faulty(), pool))
    passed = result.summary.total(Verdict.PASS)
    failed = result.summary.total(Verdict.FAIL)
    assert failed / (passed + failed) >= 0.999


def test_faulty_sine_passes_only_at_half_pi():
    """Test the faulty sine at its one fixed point."""
    fw = sine_framework(values=[math.pi / 2, 0.0])
    pool = generate_kway(fw, 1)
    result = check_metamorphisms(fw, pool, execute_pool(sine_faulty(), pool))
    assert _verdict_for(result, math.pi / 2).outcome is Verdict.PASS
    assert _verdict_for(result, 0.0).outcome is Verdict.FAIL


def test_one_verdict_per_metamorphism_and_case():
    """Test one verdict per metamorphism and case."""
    fw = sine_framework(count=8)
    pool = generate_kway(fw, 1)
    result = check_metamorphisms(fw, pool, execute_pool(sine_correct(), pool))
    assert len(result.verdicts) == len(fw.metamorphisms) * len(pool)
    assert [v.base_id for v in result.verdicts] == pool.ids()


# --- verdict precedence ---
def _shift_framework():
    shift = Datamorphism("shift", lambda args, params: Number(args[0].value + 1.0))
    same = Metamorphism("same", (("shift", MorphParams()),), lambda base, mutants, tol: base == mutants[0])
    return Framework.from_data("shift", DatumKind.NUMBER, [Number(1.0)], [shift], [same])


def test_case_without_mutant_is_inapplicable():
    """Test the Inapplicable verdict."""
    fw = _shift_framework()
    pool = fw.initial_pool()
    records = [ExecutionRecord.of_output(case.id, case.datum) for case in pool]
    result = check_metamorphisms(fw, pool, records)
    assert [v.outcome for v in result.verdicts] == [Verdict.INAPPLICABLE]
    assert result.verdicts[0].mutant_ids == ()


def test_error_record_wins_over_relation():
    """Test that a failed execution gives an Error verdict."""
    fw = _shift_framework()
    pool = generate_kway(fw, 1)
    seed, mutant = list(pool)
    records = {
        seed.id: ExecutionRecord.of_output(seed.id, Number(0.0)),
        mutant.id: ExecutionRecord.of_timeout(mutant.id, 10),
    }
    result = check_metamorphisms(fw, pool, records)
    assert result.verdicts[0].outcome is Verdict.ERROR
    assert result.verdicts[0].mutant_ids == (mutant.id,)
    assert result.verdicts[1].outcome is Verdict.INAPPLICABLE


def test_mutants_found_by_lineage_not_by_datum():
    """Test that mutants are found by lineage only."""
    fw = _shift_framework()
    pool = fw.initial_pool()
    # a case holding the shifted datum but with no lineage from the seed
    pool.insert(TestCase.seed(Number(2.0)))
    records = [ExecutionRecord.of_output(case.id, Number(0.0)) for case in pool]
    result = check_metamorphisms(fw, pool, records)
    assert all(v.outcome is Verdict.INAPPLICABLE for v in result.verdicts)


def test_missing_records_are_config_error(caplog):
    """Test checking with records that do not cover the pool."""
    fw = _shift_framework()
    pool = generate_kway(fw, 1)
    with caplog.at_level(logging.ERROR):
        with pytest.raises(ConfigError, match="1 cases missing"):
            check_metamorphisms(fw, pool, [ExecutionRecord.of_output(fw.seeds[0].id, Number(1.0))])
    assert "have no execution record" in caplog.text


# --- synthetic recognizer ---
def test_recognizer_all_pass_without_edits():
    """Test the recognizer when edits change nothing."""
    subject, fw = synthetic_recognizer(RecognizerOptions(seeds=20, delta=0.0))
    pool = generate_kway(fw, 1)
    result = check_metamorphisms(fw, pool, execute_pool(subject, pool))
    assert result.summary.total(Verdict.PASS) == 20 * 13
    assert result.summary.total(Verdict.FAIL) == 0


def test_recognizer_error_verdicts_track_error_fraction():
    """Test Error verdict frequency against the error fraction."""
    subject, fw = synthetic_recognizer(RecognizerOptions(error_fraction=0.05))
    pool = generate_kway(fw, 1)
    result = check_metamorphisms(fw, pool, execute_pool(subject, pool, workers=4))
    errors = result.summary.total(Verdict.ERROR)
    sigma = math.sqrt(2600 * 0.05 * 0.95)
    assert abs(errors - 130) <= 3 * sigma
    assert result.summary.total(Verdict.FAIL) == 0
    assert result.summary.acceptance_rate() == 1.0


def test_relation_raising_names_metamorphism_and_case(caplog):
    """Test a relation that raises on outputs of the wrong kind."""
    fw = sine_framework(values=[1.0])
    pool = generate_kway(fw, 1)
    records = [ExecutionRecord.of_output(case.id, Text("A")) for case in pool]
    with caplog.at_level(logging.ERROR):
        with pytest.raises(RelationError, match="'sin_reflection' cannot be evaluated") as excinfo:
            check_metamorphisms(fw, pool, records)
    assert isinstance(excinfo.value.__cause__, TypeError)
    assert "Metamorphism 'sin_reflection' raised" in caplog.text


def test_checker_service_can_be_reused():
    """Test that one MetamorphismChecker gives identical results on repeated checks."""
    fw = sine_framework(count=16)
    pool = generate_kway(fw, 1)
    records = execute_pool(sine_faulty(), pool)
    checker = MetamorphismChecker(fw)
    first = checker.check(pool, records)
    assert checker.check(pool, {record.case_id: record for record in records}).verdicts == first.verdicts
    assert first.verdicts == check_metamorphisms(fw, pool, records).verdicts
