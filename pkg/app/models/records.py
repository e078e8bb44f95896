# app/models/records.py
"""Subjects under test and the records produced by executing and checking them."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Union

from app.errors import StorageError
from app.models.datum import Datum, from_tagged_json, to_tagged_json

DEFAULT_TIMEOUT_MS = 5000
DEFAULT_MAX_RESTARTS = 2


@dataclass(frozen=True)
class InProcessSubject:
    """A program under test evaluated inside this process.

    The evaluator raises SubjectError (or any exception) when the subject fails on an input.
    """

    name: str
    evaluator: Callable[[Datum], Datum] = field(compare=False)

    def evaluate(self, datum: Datum) -> Datum:
        return self.evaluator(datum)


@dataclass(frozen=True)
class ExternalSubject:
    """A program under test run as a child process speaking the line-delimited protocol."""

    name: str
    command: tuple[str, ...]
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    max_restarts: int = DEFAULT_MAX_RESTARTS


Subject = Union[InProcessSubject, ExternalSubject]


class Outcome(str, Enum):
    OUTPUT = "output"
    ERROR = "error"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class ExecutionRecord:
    case_id: str
    outcome: Outcome
    output: Datum | None = None
    message: str = ""

    @classmethod
    def of_output(cls, case_id: str, output: Datum) -> "ExecutionRecord":
        return cls(case_id, Outcome.OUTPUT, output)

    @classmethod
    def of_error(cls, case_id: str, message: str) -> "ExecutionRecord":
        return cls(case_id, Outcome.ERROR, None, message)

    @classmethod
    def of_timeout(cls, case_id: str, timeout_ms: int) -> "ExecutionRecord":
        return cls(case_id, Outcome.TIMEOUT, None, f"no response within {timeout_ms} ms")

    @property
    def ok(self) -> bool:
        return self.outcome is Outcome.OUTPUT

    def to_json(self) -> dict[str, Any]:
        data: dict[str, Any] = {"id": self.case_id, "outcome": self.outcome.value}
        if self.output is not None:
            data["output"] = to_tagged_json(self.output)
        if self.message:
            data["message"] = self.message
        return data

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "ExecutionRecord":
        try:
            outcome = Outcome(data["outcome"])
            output = from_tagged_json(data["output"]) if "output" in data else None
            return cls(data["id"], outcome, output, data.get("message", ""))
        except (KeyError, ValueError, TypeError) as e:
            raise StorageError(f"Malformed execution record {data!r}: {e}") from e


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INAPPLICABLE = "inapplicable"
    ERROR = "error"


@dataclass(frozen=True)
class VerdictRecord:
    metamorphism: str
    base_id: str
    mutant_ids: tuple[str, ...]
    outcome: Verdict

    def to_json(self) -> dict[str, Any]:
        return {
            "metamorphism": self.metamorphism,
            "base": self.base_id,
            "mutants": list(self.mutant_ids),
            "outcome": self.outcome.value,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "VerdictRecord":
        try:
            return cls(data["metamorphism"], data["base"], tuple(data["mutants"]), Verdict(data["outcome"]))
        except (KeyError, ValueError, TypeError) as e:
            raise StorageError(f"Malformed verdict record {data!r}: {e}") from e


@dataclass
class VerdictSummary:
    """Verdict counts per metamorphism. Error and Inapplicable never count toward pass rates."""

    counts: dict[str, dict[Verdict, int]] = field(default_factory=dict)

    @classmethod
    def of(cls, verdicts: list[VerdictRecord]) -> "VerdictSummary":
        summary = cls()
        for verdict in verdicts:
            summary.add(verdict)
        return summary

    def add(self, verdict: VerdictRecord) -> None:
        per = self.counts.setdefault(verdict.metamorphism, {outcome: 0 for outcome in Verdict})
        per[verdict.outcome] += 1

    def total(self, outcome: Verdict) -> int:
        return sum(per[outcome] for per in self.counts.values())

    def acceptance_rate(self, metamorphism: str | None = None) -> float | None:
        """Pass / (Pass + Fail), or None when nothing was decided."""
        if metamorphism is None:
            passed, failed = self.total(Verdict.PASS), self.total(Verdict.FAIL)
        else:
            per = self.counts.get(metamorphism, {})
            passed, failed = per.get(Verdict.PASS, 0), per.get(Verdict.FAIL, 0)
        decided = passed + failed
        return passed / decided if decided else None

    def to_json(self) -> dict[str, Any]:
        return {
            "per_metamorphism": {
                name: {outcome.value: count for outcome, count in per.items()} for name, per in self.counts.items()
            },
            "totals": {outcome.value: self.total(outcome) for outcome in Verdict},
            "acceptance_rate": self.acceptance_rate(),
        }

    def format_lines(self) -> list[str]:
        lines = [
            f"Pass: {self.total(Verdict.PASS)}",
            f"Fail: {self.total(Verdict.FAIL)}",
            f"Inapplicable: {self.total(Verdict.INAPPLICABLE)}",
            f"Error: {self.total(Verdict.ERROR)}",
        ]
        for name, per in self.counts.items():
            lines.append(
                f"  {name}: pass={per[Verdict.PASS]} fail={per[Verdict.FAIL]} "
                f"inapplicable={per[Verdict.INAPPLICABLE]} error={per[Verdict.ERROR]}"
            )
        return lines
