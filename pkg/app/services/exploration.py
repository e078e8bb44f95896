# app/services/exploration.py
"""
Exploratory strategy: bisect between two inputs the subject classifies differently
to locate the class boundary, using a binary midpoint datamorphism.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from app.errors import ConfigError, NoConvergence, SameClass
from app.models.datum import Bits, Datum, Number, NumVector
from app.models.framework import Datamorphism, LineageStep, Pool, TestCase, apply_datamorphism

logger = logging.getLogger(__name__)

Distance = Callable[[Datum, Datum], float]


def _absolute(x: Datum, y: Datum) -> float:
    return abs(x.value - y.value)


def _euclidean(x: Datum, y: Datum) -> float:
    return float(np.linalg.norm(np.asarray(x.values) - np.asarray(y.values)))


def _hamming(x: Datum, y: Datum) -> float:
    return float(np.count_nonzero(np.asarray(x.bits) != np.asarray(y.bits)))


def default_distance(x: Datum, y: Datum) -> float:
    """Absolute difference for Numbers, L2 for NumVectors, Hamming for Bits, else 0/1 equality."""
    if isinstance(x, Number) and isinstance(y, Number):
        return _absolute(x, y)
    if isinstance(x, NumVector) and isinstance(y, NumVector) and len(x) == len(y):
        return _euclidean(x, y)
    if isinstance(x, Bits) and isinstance(y, Bits) and x.width == y.width:
        return _hamming(x, y)
    return 0.0 if x == y else 1.0


DISTANCES: dict[str, Distance] = {
    "default": default_distance,
    "abs": _absolute,
    "l2": _euclidean,
    "hamming": _hamming,
}


def resolve_distance(name: str) -> Distance:
    try:
        return DISTANCES[name]
    except KeyError:
        raise ConfigError(f"Unknown distance {name!r}; available: {sorted(DISTANCES)}") from None


class Classifier(Protocol):
    def evaluate(self, datum: Datum) -> Datum: ...


@dataclass(frozen=True)
class ExploreConfig:
    epsilon: float = 1e-6
    max_iterations: int = 64
    distance: str = "default"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iterations < 0:
            raise ConfigError(f"max_iterations must be non-negative, got {self.max_iterations}")


@dataclass
class BoundaryResult:
    lo: TestCase
    hi: TestCase
    lo_class: Datum
    hi_class: Datum
    iterations: int
    start: tuple[TestCase, TestCase]
    trace: list[TestCase] = field(default_factory=list)
    # (lo, hi) retained after each iteration
    history: list[tuple[TestCase, TestCase]] = field(default_factory=list)

    def to_pool(self) -> Pool:
        """The two starting cases as seeds followed by every probed case."""
        return Pool([*self.start, *self.trace])


def explore_boundary(
    subject: Classifier,
    a: Datum,
    b: Datum,
    mid: Datamorphism,
    cfg: ExploreConfig | None = None,
) -> BoundaryResult:
    """
    Bisects between a and b: c = Mid(lo, hi); if P(a) != P(c) the a-side endpoint is kept
    and c replaces the b-side one, otherwise c replaces the a-side endpoint. Repeats until
    the endpoints are within epsilon.

    Raises:
        SameClass: P(a) == P(b).
        NoConvergence: max_iterations reached with the endpoints still further than epsilon.
        SubjectError: propagated from the subject.
    """
    cfg = cfg or ExploreConfig()
    if mid.arity != 2:
        raise ConfigError(f"Exploration needs a binary datamorphism, {mid.name!r} has arity {mid.arity}")
    metric = resolve_distance(cfg.distance)
    class_a = subject.evaluate(a)
    class_b = subject.evaluate(b)
    if class_a == class_b:
        raise SameClass(f"Both endpoints are classified as {class_a!r}")

    lo, hi = TestCase.seed(a), TestCase.seed(b)
    result = BoundaryResult(lo, hi, class_a, class_b, 0, (lo, hi))
    params = mid.default_params()
    distance = metric(lo.datum, hi.datum)
    while distance > cfg.epsilon:
        if result.iterations >= cfg.max_iterations:
            logger.error(f"Boundary exploration did not converge: distance {distance} after {result.iterations} iterations")
            raise NoConvergence(
                f"Distance {distance} > epsilon {cfg.epsilon} after {result.iterations} iterations"
            )
        datum = apply_datamorphism(mid, (lo.datum, hi.datum), params)
        probe = lo.derive(datum, LineageStep(mid.name, params, (hi.id,)))
        probe_class = subject.evaluate(datum)
        result.trace.append(probe)
        result.iterations += 1
        if probe_class != class_a:
            hi = probe
            result.hi_class = probe_class
        else:
            lo = probe
        result.history.append((lo, hi))
        distance = metric(lo.datum, hi.datum)
        logger.debug(f"Iteration {result.iterations}: distance {distance}")

    result.lo, result.hi = lo, hi
    logger.info(f"Boundary located in {result.iterations} iterations, final distance {distance}.")
    return result
