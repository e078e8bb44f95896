# app/services/checker.py
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from app.errors import ConfigError, RelationError
from app.models.framework import Framework, LineageStep, Metamorphism, Pool
from app.models.records import ExecutionRecord, Verdict, VerdictRecord, VerdictSummary

logger = logging.getLogger(__name__)

LineageKey = tuple[str, tuple[LineageStep, ...]]


@dataclass
class CheckResult:
    verdicts: list[VerdictRecord] = field(default_factory=list)
    summary: VerdictSummary = field(default_factory=VerdictSummary)


def _lineage_index(pool: Pool) -> dict[LineageKey, str]:
    index: dict[LineageKey, str] = {}
    for case in pool:
        for lineage in pool.lineages(case.id):
            index.setdefault((lineage.seed_id, lineage.steps), case.id)
    return index


def _find_mutants(
    pool: Pool, index: Mapping[LineageKey, str], case_id: str, metamorphism: Metamorphism
) -> tuple[str, ...] | None:
    """Mutant ids whose lineage extends one of the base case's lineages by exactly each declared step."""
    steps = metamorphism.steps()
    for lineage in pool.lineages(case_id):
        found = [index.get((lineage.seed_id, lineage.steps + (step,))) for step in steps]
        if all(found):
            return tuple(found)
    return None


def _holds(metamorphism: Metamorphism, case_id: str, involved: list[ExecutionRecord]) -> bool:
    try:
        return bool(metamorphism.holds(involved[0].output, [record.output for record in involved[1:]]))
    except Exception as e:
        logger.error(f"Metamorphism {metamorphism.name!r} raised on case {case_id[:12]}: {e!r}")
        raise RelationError(f"Metamorphism {metamorphism.name!r} cannot be evaluated on case {case_id}: {e}") from e


class MetamorphismChecker:
    """Evaluates the metamorphisms of one framework against executed pools."""

    def __init__(self, fw: Framework):
        self.fw = fw
        logger.debug(f"MetamorphismChecker ready for {fw.name!r} with {len(fw.metamorphisms)} metamorphisms.")

    def check(self, pool: Pool, records: Iterable[ExecutionRecord] | Mapping[str, ExecutionRecord]) -> CheckResult:
        """
        Evaluates every metamorphism of the framework with every pool case as base input.

        Mutants are located by lineage, not by datum, so a verdict only ever uses outputs of
        cases produced by the declared datamorphisms. Exactly one verdict is emitted per
        (metamorphism, case).

        Args:
            pool: The executed pool.
            records: One execution record per pool case, as a list or keyed by case id.

        Raises:
            ConfigError: If some pool case has no execution record.
            RelationError: If a relation raises on the outputs it is given.

        Returns:
            CheckResult: verdicts in (metamorphism, pool) order and their summary counts.
        """
        by_id = dict(records) if isinstance(records, Mapping) else {record.case_id: record for record in records}
        missing = [case_id for case_id in pool.ids() if case_id not in by_id]
        if missing:
            logger.error(f"{len(missing)} pool cases have no execution record.")
            raise ConfigError(f"Execution records do not cover the pool: {len(missing)} cases missing, e.g. {missing[0]}")

        index = _lineage_index(pool)
        result = CheckResult()
        for metamorphism in self.fw.metamorphisms:
            for case in pool:
                verdict = self._verdict(metamorphism, pool, index, case.id, by_id)
                result.verdicts.append(verdict)
                result.summary.add(verdict)
        logger.info(
            f"Checked {len(self.fw.metamorphisms)} metamorphisms over {len(pool)} cases: "
            f"{result.summary.total(Verdict.FAIL)} failures."
        )
        return result

    def _verdict(
        self,
        metamorphism: Metamorphism,
        pool: Pool,
        index: Mapping[LineageKey, str],
        case_id: str,
        by_id: Mapping[str, ExecutionRecord],
    ) -> VerdictRecord:
        mutant_ids = _find_mutants(pool, index, case_id, metamorphism)
        if mutant_ids is None:
            return VerdictRecord(metamorphism.name, case_id, (), Verdict.INAPPLICABLE)
        involved = [by_id[case_id]] + [by_id[mid] for mid in mutant_ids]
        if not all(record.ok for record in involved):
            outcome = Verdict.ERROR
        elif _holds(metamorphism, case_id, involved):
            outcome = Verdict.PASS
        else:
            outcome = Verdict.FAIL
        return VerdictRecord(metamorphism.name, case_id, mutant_ids, outcome)


def check_metamorphisms(
    fw: Framework, pool: Pool, records: Iterable[ExecutionRecord] | Mapping[str, ExecutionRecord]
) -> CheckResult:
    return MetamorphismChecker(fw).check(pool, records)
