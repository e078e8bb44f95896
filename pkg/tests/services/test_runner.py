# tests/services/test_runner.py
import logging
import sys
from pathlib import Path

import pytest

import app.subjects.echo as echo_module
from app.errors import ProtocolViolation, SubjectError, SubjectUnavailable
from app.models.datum import Number, Text
from app.models.framework import Pool, TestCase
from app.models.records import ExternalSubject, InProcessSubject, Outcome
from app.services.runner import execute_pool, execute_pool_async

ECHO = (sys.executable, str(Path(echo_module.__file__)))

REVERSING_SUBJECT = """
import json, sys
pending = []
for line in sys.stdin:
    pending.append(json.loads(line))
    if len(pending) == 2:
        for request in reversed(pending):
            print(json.dumps({"id": request["id"], "output": request["input"]}), flush=True)
        pending = []
"""

STRANGER_SUBJECT = """
import json, sys
for line in sys.stdin:
    print(json.dumps({"id": "not-a-case", "output": {"num": 1}}), flush=True)
"""

INVALID_UTF8_SUBJECT = r"""
import json, sys
for line in sys.stdin:
    request = json.loads(line)
    head = json.dumps({"id": request["id"], "output": {"text": ""}})[:-3]
    sys.stdout.buffer.write(head.encode("ascii") + b"\xff\xfe\"}}\n")
    sys.stdout.buffer.flush()
"""


def _pool(count):
    return Pool(TestCase.seed(Number(float(i))) for i in range(count))


def _echo(*flags, timeout_ms=5000, max_restarts=2):
    return ExternalSubject("echo", ECHO + tuple(flags), timeout_ms, max_restarts)


# --- in-process subjects ---
def test_in_process_records_follow_pool_order():
    """Test that in-process records come back in pool order."""
    pool = _pool(20)
    records = execute_pool(InProcessSubject("square", lambda d: Number(d.value ** 2)), pool, workers=4)
    assert [r.case_id for r in records] == pool.ids()
    assert [r.output for r in records] == [Number(float(i) ** 2) for i in range(20)]


def test_in_process_subject_error_becomes_error_record():
    """Test a SubjectError from an in-process subject."""
    def evaluate(datum):
        if datum.value == 1.0:
            raise SubjectError("not recognised")
        return datum

    records = execute_pool(InProcessSubject("picky", evaluate), _pool(3))
    assert [r.outcome for r in records] == [Outcome.OUTPUT, Outcome.ERROR, Outcome.OUTPUT]
    assert records[1].message == "not recognised"


def test_in_process_unexpected_exception_is_logged(caplog):
    """Test an unexpected exception from an in-process subject."""
    def evaluate(datum):
        raise ZeroDivisionError("boom")

    with caplog.at_level(logging.WARNING):
        records = execute_pool(InProcessSubject("broken", evaluate), _pool(1))
    assert records[0].outcome is Outcome.ERROR
    assert records[0].message == "ZeroDivisionError: boom"
    assert "Subject 'broken' raised" in caplog.text


@pytest.mark.asyncio
async def test_in_process_evaluator_called_once_per_case(mocker):
    """Test one evaluation per case."""
    evaluator = mocker.MagicMock(side_effect=lambda d: d)
    pool = _pool(5)
    records = await execute_pool_async(InProcessSubject("spy", evaluator), pool, workers=2)
    assert evaluator.call_count == 5
    assert all(r.ok for r in records)


# --- external subjects ---
@pytest.mark.asyncio
async def test_echo_subject_completes_hundred_cases():
    """Test the echo subject over 100 cases."""
    pool = _pool(100)
    records = await execute_pool_async(_echo(), pool, workers=4)
    assert len(records) == 100
    assert all(r.outcome is Outcome.OUTPUT for r in records)
    assert [r.output for r in records] == [case.datum for case in pool]


@pytest.mark.asyncio
async def test_out_of_order_responses_are_matched_by_id():
    """Test matching out-of-order responses by id."""
    subject = ExternalSubject("reverse", (sys.executable, "-c", REVERSING_SUBJECT))
    pool = _pool(4)
    records = await execute_pool_async(subject, pool, workers=2)
    assert [r.output for r in records] == [case.datum for case in pool]


@pytest.mark.asyncio
async def test_error_responses_become_error_records():
    """Test error responses from an external subject."""
    pool = Pool([TestCase.seed(Text("hello")), TestCase.seed(Number(1.0))])
    records = await execute_pool_async(_echo("--error-on", "text"), pool)
    assert records[0].outcome is Outcome.ERROR
    assert records[0].message == "refusing text input"
    assert records[1].ok


@pytest.mark.asyncio
async def test_malformed_line_names_line_number():
    """Test that a malformed response names its line number."""
    with pytest.raises(ProtocolViolation) as excinfo:
        await execute_pool_async(_echo("--malformed-after", "2"), _pool(5))
    assert excinfo.value.line_number == 3
    assert "subject output line 3" in str(excinfo.value)


@pytest.mark.asyncio
async def test_unknown_response_id_is_protocol_violation():
    """Test a response for a case that was never sent."""
    subject = ExternalSubject("stranger", (sys.executable, "-c", STRANGER_SUBJECT))
    with pytest.raises(ProtocolViolation, match="matches no pending request"):
        await execute_pool_async(subject, _pool(1))


@pytest.mark.asyncio
async def test_missing_executable_is_unavailable(caplog):
    """Test a subject command that does not exist."""
    subject = ExternalSubject("ghost", ("/nonexistent/morphtest-subject",))
    with caplog.at_level(logging.ERROR):
        with pytest.raises(SubjectUnavailable):
            await execute_pool_async(subject, _pool(1))
    assert "Cannot start external subject 'ghost'" in caplog.text


@pytest.mark.asyncio
async def test_invalid_utf8_response_is_protocol_violation():
    """Test a response line that is not valid UTF-8."""
    subject = ExternalSubject("latin", (sys.executable, "-c", INVALID_UTF8_SUBJECT))
    with pytest.raises(ProtocolViolation, match="not valid UTF-8") as excinfo:
        await execute_pool_async(subject, _pool(1))
    assert excinfo.value.line_number == 1


@pytest.mark.asyncio
async def test_unexecutable_file_is_unavailable(tmp_path):
    """Test a subject file the OS cannot execute."""
    script = tmp_path / "no-shebang"
    script.write_text("echo this has no interpreter line\n", encoding="utf-8")
    script.chmod(0o755)
    with pytest.raises(SubjectUnavailable, match="Cannot start external subject"):
        await execute_pool_async(ExternalSubject("plain", (str(script),)), _pool(1))


@pytest.mark.asyncio
async def test_crash_restarts_subject_and_marks_in_flight_case(caplog):
    """Test restarting a crashed subject."""
    with caplog.at_level(logging.WARNING):
        records = await execute_pool_async(_echo("--crash-after", "3", max_restarts=2), _pool(10))
    outcomes = [r.outcome for r in records]
    assert outcomes.count(Outcome.ERROR) == 2
    assert outcomes[3] is Outcome.ERROR and outcomes[7] is Outcome.ERROR
    assert "restart 1 of 2" in caplog.text


@pytest.mark.asyncio
async def test_final_crash_marks_remaining_cases():
    """Test a crash after the restart budget is spent."""
    records = await execute_pool_async(_echo("--crash-after", "2", max_restarts=0), _pool(6))
    assert [r.outcome for r in records] == [Outcome.OUTPUT] * 2 + [Outcome.ERROR] * 4


@pytest.mark.asyncio
async def test_timeout_yields_timeout_record_and_continues():
    """Test a case that times out."""
    records = await execute_pool_async(_echo("--hang-after", "2", timeout_ms=1000), _pool(5))
    assert [r.outcome for r in records] == [
        Outcome.OUTPUT,
        Outcome.OUTPUT,
        Outcome.TIMEOUT,
        Outcome.OUTPUT,
        Outcome.OUTPUT,
    ]
    assert records[2].message == "no response within 1000 ms"
