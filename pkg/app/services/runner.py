# app/services/runner.py
"""
Executes a subject over every case of a pool.

In-process evaluators run in worker threads via asyncio.to_thread. External
subjects are child processes speaking a line-delimited JSON protocol on their
standard input/output:

    request   {"id": "<case-id>", "input": <tagged datum>}
    response  {"id": "<case-id>", "output": <tagged datum>}  or  {"id": ..., "error": "<message>"}

Responses may arrive out of order and are matched by id.
"""
from __future__ import annotations

import asyncio
import json
import logging
import time
from collections import deque
from typing import Any, Iterable

from app.errors import DatumFormatError, ProtocolViolation, SubjectError, SubjectUnavailable
from app.models.datum import from_tagged_json, to_tagged_json
from app.models.framework import Pool, TestCase
from app.models.records import ExecutionRecord, ExternalSubject, InProcessSubject, Subject

logger = logging.getLogger(__name__)

STREAM_LIMIT = 1 << 24
SHUTDOWN_GRACE_S = 2.0


async def _evaluate_in_process(subject: InProcessSubject, case: TestCase, slots: asyncio.Semaphore) -> ExecutionRecord:
    async with slots:
        try:
            output = await asyncio.to_thread(subject.evaluate, case.datum)
        except SubjectError as e:
            return ExecutionRecord.of_error(case.id, str(e))
        except Exception as e:
            logger.warning(f"Subject {subject.name!r} raised on case {case.id[:12]}: {e!r}")
            return ExecutionRecord.of_error(case.id, f"{type(e).__name__}: {e}")
    return ExecutionRecord.of_output(case.id, output)


class ExternalSubjectSession:
    """
    Drives one external subject over a batch of cases.

    A crashed subject is restarted up to max_restarts times; the cases in flight at the
    crash become SubjectError records. A case that times out gets a Timeout record and the
    subject is restarted without spending the restart budget, since a hung process would
    otherwise delay every later case.
    """

    def __init__(self, subject: ExternalSubject, workers: int = 1):
        self.subject = subject
        self.workers = max(1, workers)
        self.process: asyncio.subprocess.Process | None = None
        self.restarts = 0
        self.line_number = 0

    async def _start(self) -> None:
        try:
            self.process = await asyncio.create_subprocess_exec(
                *self.subject.command,
                stdin=asyncio.subprocess.PIPE,
                stdout=asyncio.subprocess.PIPE,
                limit=STREAM_LIMIT,
            )
        except OSError as e:
            logger.error(f"Cannot start external subject {self.subject.name!r}: {e}")
            raise SubjectUnavailable(f"Cannot start external subject {list(self.subject.command)}: {e}") from e
        self.line_number = 0
        logger.info(f"External subject {self.subject.name!r} started (pid {self.process.pid}).")

    async def _stop(self, kill: bool = False) -> None:
        process, self.process = self.process, None
        if process is None or process.returncode is not None:
            return
        if not kill and process.stdin is not None:
            try:
                process.stdin.close()
                await asyncio.wait_for(process.wait(), SHUTDOWN_GRACE_S)
                return
            except (asyncio.TimeoutError, BrokenPipeError, ConnectionResetError):
                pass
        try:
            process.kill()
        except ProcessLookupError:
            pass
        await process.wait()

    async def _send(self, case: TestCase) -> bool:
        line = json.dumps({"id": case.id, "input": to_tagged_json(case.datum)}, separators=(",", ":")) + "\n"
        try:
            self.process.stdin.write(line.encode("utf-8"))
            await self.process.stdin.drain()
        except (BrokenPipeError, ConnectionResetError):
            return False
        return True

    def _parse(self, raw: bytes, expected: dict[str, Any], finished: dict[str, ExecutionRecord]) -> ExecutionRecord | None:
        try:
            text = raw.decode("utf-8").rstrip("\n")
        except UnicodeDecodeError:
            shown = raw.decode("utf-8", errors="replace")
            raise ProtocolViolation("Response is not valid UTF-8", self.line_number, shown) from None
        try:
            message = json.loads(text)
        except json.JSONDecodeError:
            raise ProtocolViolation("Response is not valid JSON", self.line_number, text) from None
        if not isinstance(message, dict) or not isinstance(message.get("id"), str):
            raise ProtocolViolation("Response must be an object with a string 'id'", self.line_number, text)
        case_id = message["id"]
        if case_id not in expected:
            if case_id in finished:
                logger.debug(f"Ignoring late response for case {case_id[:12]}")
                return None
            raise ProtocolViolation(f"Response id {case_id!r} matches no pending request", self.line_number, text)
        if ("output" in message) == ("error" in message):
            raise ProtocolViolation("Response needs exactly one of 'output' or 'error'", self.line_number, text)
        if "error" in message:
            return ExecutionRecord.of_error(case_id, str(message["error"]))
        try:
            return ExecutionRecord.of_output(case_id, from_tagged_json(message["output"]))
        except DatumFormatError as e:
            raise ProtocolViolation(f"Response output is not a datum: {e}", self.line_number, text) from e

    async def run(self, cases: Iterable[TestCase]) -> dict[str, ExecutionRecord]:
        queue: deque[TestCase] = deque(cases)
        results: dict[str, ExecutionRecord] = {}
        # case id -> (case, deadline)
        in_flight: dict[str, tuple[TestCase, float]] = {}
        timeout_s = self.subject.timeout_ms / 1000.0
        try:
            while queue or in_flight:
                if self.process is None:
                    await self._start()
                while queue and len(in_flight) < self.workers:
                    case = queue.popleft()
                    if not await self._send(case):
                        queue.appendleft(case)
                        break
                    in_flight[case.id] = (case, time.monotonic() + timeout_s)

                earliest_id = min(in_flight, key=lambda cid: in_flight[cid][1]) if in_flight else None
                raw = b""
                if earliest_id is not None:
                    wait = max(0.0, in_flight[earliest_id][1] - time.monotonic())
                    try:
                        raw = await asyncio.wait_for(self.process.stdout.readline(), wait)
                    except asyncio.TimeoutError:
                        logger.warning(f"Case {earliest_id[:12]} timed out after {self.subject.timeout_ms} ms; restarting subject.")
                        in_flight.pop(earliest_id)
                        results[earliest_id] = ExecutionRecord.of_timeout(earliest_id, self.subject.timeout_ms)
                        queue.extendleft(case for case, _ in reversed(list(in_flight.values())))
                        in_flight.clear()
                        await self._stop(kill=True)
                        continue

                if not raw:
                    self._on_crash(in_flight, results)
                    await self._stop(kill=True)
                    if self.restarts > self.subject.max_restarts:
                        logger.error(
                            f"External subject {self.subject.name!r} crashed more than {self.subject.max_restarts} times; "
                            f"{len(queue)} remaining cases marked as errors."
                        )
                        while queue:
                            case = queue.popleft()
                            results[case.id] = ExecutionRecord.of_error(case.id, "subject unavailable after final crash")
                        break
                    continue

                self.line_number += 1
                record = self._parse(raw, in_flight, results)
                if record is not None:
                    in_flight.pop(record.case_id)
                    results[record.case_id] = record
        finally:
            await self._stop()
        return results

    def _on_crash(self, in_flight: dict[str, tuple[TestCase, float]], results: dict[str, ExecutionRecord]) -> None:
        self.restarts += 1
        code = self.process.returncode if self.process is not None else None
        logger.warning(
            f"External subject {self.subject.name!r} exited (code {code}) with {len(in_flight)} cases in flight; "
            f"restart {self.restarts} of {self.subject.max_restarts}."
        )
        for case_id in list(in_flight):
            results[case_id] = ExecutionRecord.of_error(case_id, "subject exited while processing this case")
        in_flight.clear()


async def execute_pool_async(subject: Subject, pool: Pool, workers: int = 1) -> list[ExecutionRecord]:
    """
    Runs the subject on every case of the pool; returns one record per case in pool order.

    Raises:
        SubjectUnavailable: an external subject cannot be started at all.
        ProtocolViolation: an external subject wrote a malformed response line.
    """
    cases = list(pool)
    logger.info(f"Executing subject {subject.name!r} over {len(cases)} cases with {workers} workers.")
    if isinstance(subject, InProcessSubject):
        slots = asyncio.Semaphore(max(1, workers))
        records = await asyncio.gather(*(_evaluate_in_process(subject, case, slots) for case in cases))
        return list(records)
    session = ExternalSubjectSession(subject, workers)
    by_id = await session.run(cases)
    return [by_id[case.id] for case in cases]


def execute_pool(subject: Subject, pool: Pool, workers: int = 1) -> list[ExecutionRecord]:
    """Synchronous wrapper around execute_pool_async."""
    return asyncio.run(execute_pool_async(subject, pool, workers))
