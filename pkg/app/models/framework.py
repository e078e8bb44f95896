# app/models/framework.py
"""
Datamorphic test framework model: datamorphisms, metamorphisms, test cases with
lineage, and the deduplicated pool of test cases.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from graphlib import CycleError, TopologicalSorter
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from app.errors import FrameworkError, Inapplicable, SchemaViolation
from app.models.datum import Datum, DatumKind, Number, canonical_hash

logger = logging.getLogger(__name__)

Transform = Callable[[Sequence[Datum], "MorphParams"], Datum]
Applicability = Callable[[Sequence[Datum], "MorphParams"], bool]
Relation = Callable[[Datum, Sequence[Datum], float], bool]


@dataclass(frozen=True)
class MorphParams:
    """Ordered, immutable name to datum mapping passed to a datamorphism."""

    items: tuple[tuple[str, Datum], ...] = ()

    @classmethod
    def of(cls, values: Mapping[str, Datum] | None = None) -> "MorphParams":
        return cls(tuple((values or {}).items()))

    def get(self, name: str) -> Datum:
        for key, value in self.items:
            if key == name:
                return value
        raise KeyError(name)

    def number(self, name: str) -> float:
        value = self.get(name)
        if not isinstance(value, Number):
            raise SchemaViolation(f"Parameter {name!r} is not a Number")
        return value.value

    def as_dict(self) -> dict[str, Datum]:
        return dict(self.items)

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: DatumKind
    default: Datum
    minimum: float | None = None
    maximum: float | None = None

    def check(self, value: Datum) -> None:
        if value.kind != self.kind:
            raise SchemaViolation(f"Parameter {self.name!r} expects {self.kind.value}, got {value.kind.value}")
        if isinstance(value, Number):
            if self.minimum is not None and value.value < self.minimum:
                raise SchemaViolation(f"Parameter {self.name!r}={value.value} is below {self.minimum}")
            if self.maximum is not None and value.value > self.maximum:
                raise SchemaViolation(f"Parameter {self.name!r}={value.value} is above {self.maximum}")


def _always(args: Sequence[Datum], params: MorphParams) -> bool:
    return True


@dataclass(frozen=True)
class Datamorphism:
    """
    A named transformation of k datums plus parameters into a new datum.

    transform is only ever called after applicability has returned True for the
    same arguments, and must be deterministic.
    """

    name: str
    transform: Transform = field(compare=False)
    arity: int = 1
    param_schema: tuple[ParamSpec, ...] = ()
    applicability: Applicability = field(default=_always, compare=False)
    output_kind: DatumKind | None = None

    def __post_init__(self):
        if self.arity < 0:
            raise FrameworkError(f"Datamorphism {self.name!r} has negative arity {self.arity}")

    def default_params(self) -> MorphParams:
        return MorphParams(tuple((spec.name, spec.default) for spec in self.param_schema))

    def validate_params(self, params: MorphParams | Mapping[str, Datum] | None = None) -> MorphParams:
        """
        Checks params against the schema and returns them in schema order with defaults filled.

        Raises:
            SchemaViolation: on unknown names, wrong datum kinds or out-of-range numbers.
        """
        given = params.as_dict() if isinstance(params, MorphParams) else dict(params or {})
        known = {spec.name for spec in self.param_schema}
        unknown = sorted(set(given) - known)
        if unknown:
            raise SchemaViolation(f"Datamorphism {self.name!r} has no parameters named {unknown}")
        ordered = []
        for spec in self.param_schema:
            value = given.get(spec.name, spec.default)
            spec.check(value)
            ordered.append((spec.name, value))
        return MorphParams(tuple(ordered))


def apply_datamorphism(
    morphism: Datamorphism,
    args: Sequence[Datum],
    params: MorphParams | Mapping[str, Datum] | None = None,
) -> Datum:
    """
    Applies a datamorphism to its arguments. The caller attaches lineage.

    Raises:
        SchemaViolation: wrong number of arguments, malformed params or an output
            outside the declared kind.
        Inapplicable: the applicability condition returned False.
    """
    if len(args) != morphism.arity:
        raise SchemaViolation(f"Datamorphism {morphism.name!r} takes {morphism.arity} arguments, got {len(args)}")
    checked = morphism.validate_params(params)
    args = tuple(args)
    if not morphism.applicability(args, checked):
        raise Inapplicable(f"Datamorphism {morphism.name!r} is not applicable to the given arguments")
    output = morphism.transform(args, checked)
    if morphism.output_kind is not None and output.kind != morphism.output_kind:
        raise SchemaViolation(
            f"Datamorphism {morphism.name!r} produced {output.kind.value}, expected {morphism.output_kind.value}"
        )
    return output


@dataclass(frozen=True)
class LineageStep:
    morphism: str
    params: MorphParams = MorphParams()
    # ids of the second and later arguments of a k>1 datamorphism
    arguments: tuple[str, ...] = ()


@dataclass(frozen=True)
class Lineage:
    """How a case was obtained; steps are in application order (steps[0] applied first)."""

    seed_id: str
    steps: tuple[LineageStep, ...] = ()

    @property
    def is_seed(self) -> bool:
        return not self.steps

    @property
    def depth(self) -> int:
        return len(self.steps)

    def morphism_names(self) -> tuple[str, ...]:
        return tuple(step.morphism for step in self.steps)

    def extend(self, step: LineageStep) -> "Lineage":
        return Lineage(self.seed_id, self.steps + (step,))


@dataclass(frozen=True)
class TestCase:
    """A datum with its lineage. The id depends on the datum only."""

    __test__ = False

    datum: Datum
    lineage: Lineage
    id: str = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "id", canonical_hash(self.datum))

    @classmethod
    def seed(cls, datum: Datum) -> "TestCase":
        return cls(datum, Lineage(canonical_hash(datum)))

    def derive(self, datum: Datum, step: LineageStep) -> "TestCase":
        return TestCase(datum, self.lineage.extend(step))


@dataclass(frozen=True)
class Metamorphism:
    """
    A correctness relation over P(x) and P(x'_1)..P(x'_m), where x'_i is x
    transformed by the i-th declared unary datamorphism.
    """

    name: str
    morphisms: tuple[tuple[str, MorphParams], ...]
    relation: Relation = field(compare=False)
    tolerance: float = 1e-9

    def __post_init__(self):
        if not self.morphisms:
            raise FrameworkError(f"Metamorphism {self.name!r} must reference at least one datamorphism")
        if self.tolerance < 0:
            raise FrameworkError(f"Metamorphism {self.name!r} has negative tolerance")

    def steps(self) -> tuple[LineageStep, ...]:
        return tuple(LineageStep(name, params) for name, params in self.morphisms)

    def holds(self, base_output: Datum, mutant_outputs: Sequence[Datum]) -> bool:
        return bool(self.relation(base_output, tuple(mutant_outputs), self.tolerance))


class Pool:
    """
    Insertion-ordered set of test cases keyed by id.

    The first lineage inserted for an id is kept. Later lineages that reach the
    same datum are remembered as aliases; they never replace the primary one.
    """

    def __init__(self, cases: Iterable[TestCase] = (), truncated: bool = False):
        self._cases: dict[str, TestCase] = {}
        self._aliases: dict[str, list[Lineage]] = {}
        self.truncated = truncated
        for case in cases:
            self.insert(case)

    def insert(self, case: TestCase) -> bool:
        existing = self._cases.get(case.id)
        if existing is None:
            self._cases[case.id] = case
            return True
        if case.lineage != existing.lineage:
            known = self._aliases.setdefault(case.id, [])
            if case.lineage not in known:
                known.append(case.lineage)
        return False

    def add_alias(self, case_id: str, lineage: Lineage) -> None:
        self.insert(TestCase(self._cases[case_id].datum, lineage))

    def get(self, case_id: str) -> TestCase:
        return self._cases[case_id]

    def aliases(self, case_id: str) -> tuple[Lineage, ...]:
        return tuple(self._aliases.get(case_id, ()))

    def lineages(self, case_id: str) -> tuple[Lineage, ...]:
        """The primary lineage of a case followed by its aliases."""
        return (self._cases[case_id].lineage,) + self.aliases(case_id)

    def seeds(self) -> list[TestCase]:
        return [case for case in self._cases.values() if case.lineage.is_seed]

    def mutants(self) -> list[TestCase]:
        return [case for case in self._cases.values() if not case.lineage.is_seed]

    def ids(self) -> list[str]:
        return list(self._cases)

    def topological_order(self) -> list[str]:
        """
        Orders case ids so that every case follows the cases its lineage references.

        Raises:
            FrameworkError: if lineages reference each other cyclically.
        """
        sorter: TopologicalSorter = TopologicalSorter()
        for case in self._cases.values():
            refs = {case.lineage.seed_id}
            for step in case.lineage.steps:
                refs.update(step.arguments)
            refs.discard(case.id)
            sorter.add(case.id, *sorted(refs))
        try:
            return list(sorter.static_order())
        except CycleError as e:
            raise FrameworkError(f"Pool lineages are cyclic: {e.args[1]}") from e

    def __contains__(self, case_id: object) -> bool:
        return case_id in self._cases

    def __len__(self) -> int:
        return len(self._cases)

    def __iter__(self) -> Iterator[TestCase]:
        return iter(list(self._cases.values()))

    def __repr__(self) -> str:
        return f"<Pool size={len(self)} truncated={self.truncated}>"


def pool_insert(pool: Pool, case: TestCase) -> bool:
    """Inserts a case iff its id is absent; never replaces an existing lineage."""
    return pool.insert(case)


@dataclass(frozen=True)
class Framework:
    """The triple of seeds, datamorphisms and metamorphisms over one input domain kind."""

    name: str
    domain_kind: DatumKind
    seeds: tuple[TestCase, ...]
    datamorphisms: tuple[Datamorphism, ...] = ()
    metamorphisms: tuple[Metamorphism, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(self.seeds))
        object.__setattr__(self, "datamorphisms", tuple(self.datamorphisms))
        ids = [seed.id for seed in self.seeds]
        if len(set(ids)) != len(ids):
            raise FrameworkError(f"Framework {self.name!r} has duplicate seeds")
        for seed in self.seeds:
            if not seed.lineage.is_seed:
                raise FrameworkError(f"Framework {self.name!r} seed {seed.id[:12]} has a non-empty lineage")
            if seed.datum.kind != self.domain_kind:
                raise FrameworkError(
                    f"Framework {self.name!r} seed {seed.id[:12]} is {seed.datum.kind.value}, "
                    f"domain is {self.domain_kind.value}"
                )
        names = [m.name for m in self.datamorphisms]
        if len(set(names)) != len(names):
            raise FrameworkError(f"Framework {self.name!r} has duplicate datamorphism names")
        object.__setattr__(self, "metamorphisms", tuple(self._normalize(m) for m in self.metamorphisms))

    def _normalize(self, metamorphism: Metamorphism) -> Metamorphism:
        normalized = []
        for name, params in metamorphism.morphisms:
            morphism = self.morphism(name)
            if morphism.arity != 1:
                raise FrameworkError(
                    f"Metamorphism {metamorphism.name!r} references {name!r} of arity {morphism.arity}; only unary is checked"
                )
            normalized.append((name, morphism.validate_params(params)))
        return replace(metamorphism, morphisms=tuple(normalized))

    @classmethod
    def from_data(
        cls,
        name: str,
        domain_kind: DatumKind,
        seed_datums: Iterable[Datum],
        datamorphisms: Iterable[Datamorphism] = (),
        metamorphisms: Iterable[Metamorphism] = (),
    ) -> "Framework":
        """Builds a framework from raw seed datums, dropping duplicate seeds."""
        seeds: dict[str, TestCase] = {}
        for datum in seed_datums:
            case = TestCase.seed(datum)
            if case.id in seeds:
                logger.warning(f"Framework {name!r}: dropping duplicate seed {case.id[:12]}")
                continue
            seeds[case.id] = case
        return cls(name, domain_kind, tuple(seeds.values()), tuple(datamorphisms), tuple(metamorphisms))

    def morphism(self, name: str) -> Datamorphism:
        for morphism in self.datamorphisms:
            if morphism.name == name:
                return morphism
        raise FrameworkError(f"Framework {self.name!r} has no datamorphism named {name!r}")

    def unary_morphisms(self) -> list[Datamorphism]:
        return [m for m in self.datamorphisms if m.arity == 1]

    def initial_pool(self) -> Pool:
        return Pool(self.seeds)

    def self_check(self) -> list[str]:
        """
        Checks seed conformance and transform determinism of every unary datamorphism on every seed.

        Returns:
            list[str]: problems found; empty when the framework is consistent.
        """
        problems = []
        for morphism in self.unary_morphisms():
            params = morphism.default_params()
            for seed in self.seeds:
                try:
                    first = apply_datamorphism(morphism, (seed.datum,), params)
                    second = apply_datamorphism(morphism, (seed.datum,), params)
                except Inapplicable:
                    continue
                except SchemaViolation as e:
                    problems.append(f"{morphism.name} on {seed.id[:12]}: {e}")
                    continue
                if first != second:
                    problems.append(f"{morphism.name} is not deterministic on {seed.id[:12]}")
                if first.kind != self.domain_kind:
                    problems.append(f"{morphism.name} leaves the domain on {seed.id[:12]}")
        if problems:
            logger.warning(f"Framework {self.name!r} self-check found {len(problems)} problems")
        return problems
