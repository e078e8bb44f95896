# app/services/optimal.py
"""
The "optimal" strategy: a genetic search over test cases.

The seeds are the initial population and the datamorphisms are the mutation
operators. Each generation keeps the elite, mutates each elite once, and fills
the rest of the population by tournament selection plus one random applicable
datamorphism. There is no crossover.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from app.errors import ConfigError, Inapplicable, SubjectError, UnknownFitness
from app.models.datum import magnitude
from app.models.framework import Framework, LineageStep, Pool, TestCase, apply_datamorphism
from app.models.records import InProcessSubject
from app.services.exploration import resolve_distance

logger = logging.getLogger(__name__)

FILL_ATTEMPT_FACTOR = 50


@dataclass(frozen=True)
class GaConfig:
    population_cap: int = 20
    generations: int = 10
    tournament_size: int = 2
    elitism_count: int = 1
    rng_seed: int = 0
    fitness: str = "max_numeric"
    # stop once the population is full and the best fitness has not improved for this many generations
    patience: int | None = None

    def __post_init__(self):
        if self.population_cap < 1 or self.generations < 0 or self.tournament_size < 1:
            raise ConfigError(f"Invalid GA configuration: {self}")
        if not 1 <= self.elitism_count <= self.population_cap:
            raise ConfigError(
                f"elitism_count must be between 1 and population_cap={self.population_cap}, got {self.elitism_count}"
            )


@dataclass
class FitnessContext:
    framework: Framework
    subject: InProcessSubject | None = None
    distance: str = "default"


FitnessFunction = Callable[[TestCase, Sequence[TestCase], FitnessContext], float]


def _max_numeric(case: TestCase, population: Sequence[TestCase], ctx: FitnessContext) -> float:
    value = magnitude(case.datum)
    return float("-inf") if value is None else value


def _diversity(case: TestCase, population: Sequence[TestCase], ctx: FitnessContext) -> float:
    others = [other for other in population if other.id != case.id]
    if not others:
        return 0.0
    metric = resolve_distance(ctx.distance)
    return sum(metric(case.datum, other.datum) for other in others) / len(others)


def _violations(case: TestCase, population: Sequence[TestCase], ctx: FitnessContext) -> float:
    subject = ctx.subject
    try:
        base = subject.evaluate(case.datum)
    except SubjectError:
        return 0.0
    failures = 0
    for metamorphism in ctx.framework.metamorphisms:
        try:
            mutants = [
                apply_datamorphism(ctx.framework.morphism(name), (case.datum,), params)
                for name, params in metamorphism.morphisms
            ]
            outputs = [subject.evaluate(mutant) for mutant in mutants]
        except (Inapplicable, SubjectError):
            continue
        if not metamorphism.holds(base, outputs):
            failures += 1
    return float(failures)


FITNESS_FUNCTIONS: dict[str, FitnessFunction] = {
    "max_numeric": _max_numeric,
    "diversity": _diversity,
    "violations": _violations,
}


def resolve_fitness(name: str) -> FitnessFunction:
    try:
        return FITNESS_FUNCTIONS[name]
    except KeyError:
        raise UnknownFitness(f"Unknown fitness {name!r}; registered: {sorted(FITNESS_FUNCTIONS)}") from None


@dataclass
class OptimalResult:
    pool: Pool
    # best fitness found so far, one entry per generation
    trace: list[float] = field(default_factory=list)


def _tournament(rng: random.Random, scores: Sequence[float], size: int) -> int:
    picks = [rng.randrange(len(scores)) for _ in range(size)]
    return max(picks, key=lambda i: (scores[i], -i))


def generate_optimal(
    fw: Framework,
    cfg: GaConfig,
    subject: InProcessSubject | None = None,
    distance: str = "default",
) -> OptimalResult:
    """
    Runs the genetic strategy for cfg.generations generations.

    Returns:
        OptimalResult: the final population as a pool (elite first, then the rest of the
        population, then any seeds that did not survive) and the best-fitness trace.

    Raises:
        UnknownFitness: if cfg.fitness is not registered.
        ConfigError: if the fitness needs a subject and none was given.
    """
    fitness = resolve_fitness(cfg.fitness)
    if cfg.fitness == "violations" and subject is None:
        raise ConfigError("Fitness 'violations' needs an in-process subject")
    ctx = FitnessContext(fw, subject, distance)
    rng = random.Random(cfg.rng_seed)
    morphisms = fw.unary_morphisms()
    population: list[TestCase] = list(fw.seeds)
    trace: list[float] = []
    best = float("-inf")
    stale = 0

    def score(members: list[TestCase]) -> list[float]:
        return [fitness(member, members, ctx) for member in members]

    def mutate(parent: TestCase) -> TestCase | None:
        morphism = rng.choice(morphisms)
        params = morphism.default_params()
        try:
            datum = apply_datamorphism(morphism, (parent.datum,), params)
        except Inapplicable:
            return None
        return parent.derive(datum, LineageStep(morphism.name, params))

    for generation in range(cfg.generations):
        if not morphisms or not population:
            logger.warning("Optimal strategy has no unary datamorphisms or seeds; stopping early.")
            break
        scores = score(population)
        ranked = sorted(range(len(population)), key=lambda i: (-scores[i], i))
        elite = [population[i] for i in ranked[: cfg.elitism_count]]
        offspring: list[TestCase] = list(elite)
        seen = {case.id for case in offspring}

        def admit(child: TestCase | None) -> None:
            if child is not None and child.id not in seen and len(offspring) < cfg.population_cap:
                offspring.append(child)
                seen.add(child.id)

        for member in elite:
            admit(mutate(member))
        attempts = 0
        while len(offspring) < cfg.population_cap and attempts < FILL_ATTEMPT_FACTOR * cfg.population_cap:
            attempts += 1
            admit(mutate(population[_tournament(rng, scores, cfg.tournament_size)]))

        population = offspring
        generation_best = max(score(population))
        if generation_best > best:
            best = generation_best
            stale = 0
        else:
            stale += 1
        trace.append(best)
        logger.debug(f"Generation {generation + 1}: population={len(population)} best={best}")
        if cfg.patience is not None and len(population) >= cfg.population_cap and stale >= cfg.patience:
            logger.info(f"Optimal strategy stopped after {generation + 1} generations: fitness peaked.")
            break

    scores = score(population)
    ranked = sorted(range(len(population)), key=lambda i: (-scores[i], i))
    pool = Pool(population[i] for i in ranked)
    for seed in fw.seeds:
        pool.insert(seed)
    logger.info(f"Optimal strategy for {fw.name!r} finished with {len(pool)} cases, best fitness {best}.")
    return OptimalResult(pool, trace)
