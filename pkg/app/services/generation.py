# app/services/generation.py
"""
Test-generation strategies that grow a pool from the seeds by applying datamorphisms:
exhaustive closure, k-way combinatorial, and random. Also measures k-way coverage
and replays lineages.

Composition convention: a k-tuple (f1, ..., fk) is written in composition order,
f1 o ... o fk (s), so fk is applied first. Lineages store application order.
"""
from __future__ import annotations

import itertools
import logging
import random
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

from app.errors import ConfigError, Inapplicable, LimitExceeded
from app.models.datum import Datum
from app.models.framework import (
    Datamorphism,
    Framework,
    Lineage,
    LineageStep,
    MorphParams,
    Pool,
    TestCase,
    apply_datamorphism,
)

logger = logging.getLogger(__name__)

RANDOM_ATTEMPT_FACTOR = 50


@dataclass(frozen=True)
class GenLimits:
    max_pool_size: int = 10000
    max_depth: int = 8
    param_grid: Mapping[str, Sequence[MorphParams]] | None = None
    distinct_only: bool = False

    def __post_init__(self):
        if self.max_pool_size < 1 or self.max_depth < 1:
            raise ConfigError(
                f"Generation limits must be positive: max_pool_size={self.max_pool_size}, max_depth={self.max_depth}"
            )

    def check_seeds(self, fw: Framework) -> None:
        if self.max_pool_size < len(fw.seeds):
            raise ConfigError(f"max_pool_size={self.max_pool_size} is smaller than the {len(fw.seeds)} seeds")

    def grid_for(self, morphism: Datamorphism) -> tuple[MorphParams, ...]:
        """Parameter sets to enumerate for a morphism; the schema defaults unless a grid is configured."""
        if self.param_grid and morphism.name in self.param_grid:
            return tuple(morphism.validate_params(params) for params in self.param_grid[morphism.name])
        return (morphism.default_params(),)


@dataclass
class KwayCoverage:
    per_n: dict[int, float] = field(default_factory=dict)

    @property
    def aggregate(self) -> float:
        return min(self.per_n.values()) if self.per_n else 1.0


def _try_apply(morphism: Datamorphism, case: TestCase, params: MorphParams) -> TestCase | None:
    try:
        datum = apply_datamorphism(morphism, (case.datum,), params)
    except Inapplicable:
        return None
    return case.derive(datum, LineageStep(morphism.name, params))


def kway_targets(names: Sequence[str], n: int, distinct_only: bool = False) -> Iterator[tuple[str, ...]]:
    """Ordered n-tuples of morphism names, in composition order."""
    if distinct_only:
        return itertools.permutations(names, n)
    return itertools.product(names, repeat=n)


def _embeds(applied: Sequence[str], target: Sequence[str]) -> bool:
    """True when target (composition order) is a subsequence of applied read right to left."""
    remaining = iter(reversed(applied))
    return all(name in remaining for name in target)


def _lineages_by_seed(pool: Pool) -> dict[str, list[tuple[str, ...]]]:
    by_seed: dict[str, list[tuple[str, ...]]] = {}
    for case in pool:
        for lineage in pool.lineages(case.id):
            by_seed.setdefault(lineage.seed_id, []).append(lineage.morphism_names())
    return by_seed


def measure_kway_coverage(pool: Pool, fw: Framework, k: int, distinct_only: bool = False) -> KwayCoverage:
    """
    For each n <= k, the fraction of (seed, ordered n-tuple) targets realized by some lineage
    that starts at the seed and embeds the tuple as a subsequence in composition order.
    """
    coverage = KwayCoverage()
    seeds = [seed.id for seed in fw.seeds]
    coverage.per_n[0] = (sum(1 for sid in seeds if sid in pool) / len(seeds)) if seeds else 1.0
    names = [m.name for m in fw.unary_morphisms()]
    by_seed = _lineages_by_seed(pool)
    for n in range(1, k + 1):
        total = 0
        covered = 0
        for sid in seeds:
            applied = by_seed.get(sid, [])
            for target in kway_targets(names, n, distinct_only):
                total += 1
                if any(_embeds(sequence, target) for sequence in applied):
                    covered += 1
        coverage.per_n[n] = covered / total if total else 1.0
    return coverage


class PoolGenerator:
    """
    Grows pools for one framework under one set of generation limits.

    Every strategy starts from the framework's seeds and returns a fresh pool; the
    generator itself keeps no state between calls.
    """

    def __init__(self, fw: Framework, limits: GenLimits | None = None):
        """
        Raises:
            ConfigError: If max_pool_size cannot even hold the seeds.
        """
        self.fw = fw
        self.limits = limits or GenLimits()
        self.limits.check_seeds(fw)
        logger.debug(f"PoolGenerator ready for {fw.name!r} ({len(fw.seeds)} seeds, limits {self.limits}).")

    def exhaustive(self) -> Pool:
        """
        Applies every unary datamorphism with every grid parameter to every pool member until
        no new datum appears, or until a limit is hit (the pool is then flagged truncated).

        Order is deterministic: pool insertion order x framework morphism order x grid order.
        """
        limits = self.limits
        pool = self.fw.initial_pool()
        queue = list(pool)
        morphisms = [(m, limits.grid_for(m)) for m in self.fw.unary_morphisms()]
        position = 0
        while position < len(queue):
            case = queue[position]
            position += 1
            for morphism, grid in morphisms:
                for params in grid:
                    child = _try_apply(morphism, case, params)
                    if child is None:
                        continue
                    # no lineage, primary or alias, may exceed max_depth
                    if case.lineage.depth >= limits.max_depth:
                        if child.id not in pool:
                            logger.warning(f"Exhaustive generation reached max_depth={limits.max_depth}; pool truncated.")
                            pool.truncated = True
                        continue
                    if child.id in pool:
                        pool.insert(child)
                        continue
                    if len(pool) >= limits.max_pool_size:
                        logger.warning(f"Exhaustive generation reached max_pool_size={limits.max_pool_size}; pool truncated.")
                        pool.truncated = True
                        return pool
                    pool.insert(child)
                    queue.append(child)
        logger.info(f"Exhaustive generation for {self.fw.name!r} produced {len(pool)} cases (truncated={pool.truncated}).")
        return pool

    def kway(self, k: int) -> Pool:
        """
        Builds a pool satisfying the k-way combinatorial coverage criterion.

        For each seed and each ordered n-tuple (n = 1..k) not yet embedded in some lineage,
        composes the tuple directly onto the seed and inserts the result. Datums that
        collide with an existing case still realize the tuple through an alias lineage.

        Raises:
            LimitExceeded: if the cases needed exceed max_pool_size, or k exceeds max_depth.
        """
        limits = self.limits
        if k < 0:
            raise ConfigError(f"k must be non-negative, got {k}")
        if k > limits.max_depth:
            raise LimitExceeded(f"k={k} needs lineages longer than max_depth={limits.max_depth}")
        ignored = [m.name for m in self.fw.datamorphisms if m.arity != 1]
        if ignored:
            logger.warning(f"k-way generation ignores non-unary datamorphisms: {ignored}")
        morphisms = {m.name: m for m in self.fw.unary_morphisms()}
        names = list(morphisms)
        pool = self.fw.initial_pool()
        sequences: dict[str, list[tuple[str, ...]]] = {seed.id: [()] for seed in self.fw.seeds}
        for seed in self.fw.seeds:
            for n in range(1, k + 1):
                for target in kway_targets(names, n, limits.distinct_only):
                    if any(_embeds(sequence, target) for sequence in sequences[seed.id]):
                        continue
                    case = seed
                    for name in reversed(target):
                        morphism = morphisms[name]
                        case = _try_apply(morphism, case, limits.grid_for(morphism)[0])
                        if case is None:
                            break
                    if case is None:
                        logger.warning(f"Tuple {target} is inapplicable to seed {seed.id[:12]}; left uncovered.")
                        continue
                    if case.id not in pool and len(pool) >= limits.max_pool_size:
                        raise LimitExceeded(
                            f"k-way coverage for k={k} needs more than max_pool_size={limits.max_pool_size} cases"
                        )
                    pool.insert(case)
                    sequences[seed.id].append(case.lineage.morphism_names())
        logger.info(f"{k}-way generation for {self.fw.name!r} produced {len(pool)} cases.")
        return pool

    def random(self, count: int, rng_seed: int, stop_at_kway: int | None = None) -> Pool:
        """
        Repeatedly picks a pool case, a unary datamorphism and a grid parameter uniformly at
        random and inserts the mutant, until `count` insertions succeed.

        Stops early, flagging the pool truncated, after 50 x count consecutive attempts that
        insert nothing, or when the pool size limit is reached. With stop_at_kway set, also
        stops as soon as the pool is k-way complete for that k.
        """
        if count < 0:
            raise ConfigError(f"count must be non-negative, got {count}")
        limits = self.limits
        rng = random.Random(rng_seed)
        pool = self.fw.initial_pool()
        cases = list(pool)
        morphisms = [(m, limits.grid_for(m)) for m in self.fw.unary_morphisms()]
        budget = RANDOM_ATTEMPT_FACTOR * count
        inserted = 0
        misses = 0
        while inserted < count:
            if not morphisms or not cases or misses >= budget:
                pool.truncated = True
                logger.warning(f"Random generation saturated after {inserted} of {count} insertions.")
                break
            if len(pool) >= limits.max_pool_size:
                pool.truncated = True
                logger.warning(f"Random generation reached max_pool_size={limits.max_pool_size}.")
                break
            case = rng.choice(cases)
            morphism, grid = rng.choice(morphisms)
            params = rng.choice(grid)
            if case.lineage.depth >= limits.max_depth:
                misses += 1
                continue
            child = _try_apply(morphism, case, params)
            if child is None or not pool.insert(child):
                misses += 1
                continue
            cases.append(child)
            inserted += 1
            misses = 0
            if stop_at_kway is not None and self.coverage(pool, stop_at_kway).aggregate >= 1.0:
                logger.info(f"Random generation reached {stop_at_kway}-way coverage after {inserted} insertions.")
                break
        logger.info(f"Random generation for {self.fw.name!r} produced {len(pool)} cases (truncated={pool.truncated}).")
        return pool

    def coverage(self, pool: Pool, k: int) -> KwayCoverage:
        return measure_kway_coverage(pool, self.fw, k, self.limits.distinct_only)


def generate_exhaustive(fw: Framework, limits: GenLimits | None = None) -> Pool:
    return PoolGenerator(fw, limits).exhaustive()


def generate_kway(fw: Framework, k: int, limits: GenLimits | None = None) -> Pool:
    return PoolGenerator(fw, limits).kway(k)


def generate_random(
    fw: Framework,
    count: int,
    rng_seed: int,
    limits: GenLimits | None = None,
    stop_at_kway: int | None = None,
) -> Pool:
    return PoolGenerator(fw, limits).random(count, rng_seed, stop_at_kway)


def replay_lineage(fw: Framework, pool: Pool, lineage: Lineage) -> Datum:
    """Recomputes a datum from its seed by re-applying every lineage step."""
    datum = pool.get(lineage.seed_id).datum
    for step in lineage.steps:
        extra = tuple(pool.get(case_id).datum for case_id in step.arguments)
        datum = apply_datamorphism(fw.morphism(step.morphism), (datum,) + extra, step.params)
    return datum


def verify_replay(fw: Framework, pool: Pool) -> list[str]:
    """
    Replays every lineage (primary and alias) in the pool.

    Returns:
        list[str]: ids of cases whose replay does not reproduce the stored datum.
    """
    mismatched = []
    for case in pool:
        for lineage in pool.lineages(case.id):
            if replay_lineage(fw, pool, lineage) != case.datum:
                mismatched.append(case.id)
                break
    return mismatched
