# app/subjects/sine.py
"""Sine framework: the reflection identity sin(x) = sin(pi - x) as a metamorphism."""
import math
from typing import Iterable, Optional, Sequence

import numpy as np

from app.errors import SubjectError
from app.models.datum import Datum, DatumKind, Number
from app.models.framework import Datamorphism, Framework, Metamorphism, MorphParams
from app.models.records import InProcessSubject

DEFAULT_SEED_COUNT = 16
FAULT_SLOPE = 0.001


def midpoint_grid(count: int) -> list[float]:
    """count points of [0, pi], each in the middle of its cell: pi * (i + 0.5) / count."""
    return [float(x) for x in np.pi * (np.arange(count) + 0.5) / count]


def _reflect(args: Sequence[Datum], params: MorphParams) -> Datum:
    return Number(math.pi - args[0].value)


def _same_output(base: Datum, mutants: Sequence[Datum], tolerance: float) -> bool:
    return all(abs(base.value - mutant.value) <= tolerance for mutant in mutants)


def sine_framework(count: int = DEFAULT_SEED_COUNT, values: Optional[Iterable[float]] = None, tolerance: float = 1e-9) -> Framework:
    """
    Numbers in [0, pi] with the datamorphism reflect(x) = pi - x and the metamorphism
    |P(x) - P(reflect(x))| <= tolerance.

    Args:
        count: Size of the default seed grid.
        values: Explicit seed values; replaces the grid when given.
        tolerance: Allowed output difference.
    """
    seeds = list(values) if values is not None else midpoint_grid(count)
    reflect = Datamorphism("reflect", _reflect, output_kind=DatumKind.NUMBER)
    relation = Metamorphism("sin_reflection", (("reflect", MorphParams()),), _same_output, tolerance)
    return Framework.from_data("sine", DatumKind.NUMBER, (Number(x) for x in seeds), (reflect,), (relation,))


def _number(datum: Datum) -> float:
    if not isinstance(datum, Number):
        raise SubjectError(f"sine subjects take a Number, got {datum.kind.value}")
    return datum.value


def sine_correct() -> InProcessSubject:
    return InProcessSubject("sine_correct", lambda datum: Number(math.sin(_number(datum))))


def sine_faulty() -> InProcessSubject:
    """sin(x) + 0.001 x: breaks the reflection identity everywhere except at pi / 2."""
    def evaluate(datum: Datum) -> Datum:
        x = _number(datum)
        return Number(math.sin(x) + FAULT_SLOPE * x)

    return InProcessSubject("sine_faulty", evaluate)
