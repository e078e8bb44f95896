# app/subjects/classifier.py
"""A two-class threshold classifier and the midpoint datamorphism used to explore its boundary."""
import math
from typing import Iterable, Sequence

import numpy as np

from app.errors import ConfigError, SubjectError
from app.models.datum import Datum, DatumKind, Number, NumVector, Text
from app.models.framework import Datamorphism, Framework, MorphParams
from app.models.records import InProcessSubject

CLASS_BELOW = "A"
CLASS_ABOVE = "B"


def threshold_classifier(threshold: float) -> InProcessSubject:
    """
    Classifies a Number x as "A" when x < threshold and "B" otherwise; the boundary
    point itself belongs to "B".

    Raises:
        ConfigError: If the threshold is not finite.
    """
    if not math.isfinite(threshold):
        raise ConfigError(f"Classifier threshold must be finite, got {threshold}")

    def evaluate(datum: Datum) -> Datum:
        if not isinstance(datum, Number):
            raise SubjectError(f"classifier takes a Number, got {datum.kind.value}")
        return Text(CLASS_BELOW if datum.value < threshold else CLASS_ABOVE)

    return InProcessSubject(f"classifier:{threshold:g}", evaluate)


def _compatible(args: Sequence[Datum], params: MorphParams) -> bool:
    first, second = args
    if isinstance(first, Number) and isinstance(second, Number):
        return True
    return isinstance(first, NumVector) and isinstance(second, NumVector) and len(first) == len(second)


def _midpoint(args: Sequence[Datum], params: MorphParams) -> Datum:
    first, second = args
    if isinstance(first, Number):
        return Number((first.value + second.value) / 2.0)
    return NumVector((np.asarray(first.values) + np.asarray(second.values)) / 2.0)


def midpoint_morphism() -> Datamorphism:
    """Binary datamorphism mid(x, y): the arithmetic midpoint of two Numbers or equally long NumVectors."""
    return Datamorphism("mid", _midpoint, arity=2, applicability=_compatible)


def classifier_framework(values: Iterable[float] = (0.0, 1.0)) -> Framework:
    return Framework.from_data("classifier", DatumKind.NUMBER, (Number(x) for x in values), (midpoint_morphism(),))
