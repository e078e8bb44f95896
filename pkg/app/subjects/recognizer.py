# app/subjects/recognizer.py
"""
A synthetic face-recognition analogue.

Each identity is a Record {id: Text, attrs: NumVector(13)}. The 13 datamorphisms each
shift one attribute by delta, and the subject scores how close an input's attributes
still are to the stored reference of its identity:

    similarity = 100 * (1 - clamp(L1(attrs, reference) / 13, 0, 1))

rounded to 6 decimals. A fixed fraction of edited inputs, picked by hash of the input,
is "not recognised" and fails with SubjectError. Seeds are always recognised.
"""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from app.errors import ConfigError, SubjectError
from app.models.datum import Datum, DatumKind, Number, NumVector, Record, Text, canonical_hash
from app.models.framework import Datamorphism, Framework, Metamorphism, MorphParams, ParamSpec
from app.models.records import InProcessSubject

logger = logging.getLogger(__name__)

ATTRIBUTES = (
    "bald",
    "bangs",
    "black_hair",
    "blond_hair",
    "brown_hair",
    "bushy_eyebrows",
    "eyeglasses",
    "male",
    "mouth_open",
    "mustache",
    "beard",
    "pale_skin",
    "young",
)
DEFAULT_SEED_COUNT = 200
DEFAULT_DELTA = 0.13
DEFAULT_THRESHOLD = 80.0
SCORE_DECIMALS = 6


@dataclass(frozen=True)
class RecognizerOptions:
    seeds: int = DEFAULT_SEED_COUNT
    rng_seed: int = 0
    delta: float = DEFAULT_DELTA
    error_fraction: float = 0.0
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if self.seeds < 1:
            raise ConfigError(f"synth_recognizer needs at least one seed, got {self.seeds}")
        if not -1.0 <= self.delta <= 1.0:
            raise ConfigError(f"delta must lie in [-1, 1], got {self.delta}")
        if not 0.0 <= self.error_fraction <= 1.0:
            raise ConfigError(f"error_fraction must lie in [0, 1], got {self.error_fraction}")


def identity_records(count: int, rng_seed: int) -> list[Record]:
    rng = np.random.default_rng(rng_seed)
    vectors = rng.uniform(0.0, 1.0, size=(count, len(ATTRIBUTES)))
    return [
        Record({"id": Text(f"identity-{i:04d}"), "attrs": NumVector(vector)})
        for i, vector in enumerate(vectors)
    ]


def attribute_morphism(index: int, delta: float = DEFAULT_DELTA) -> Datamorphism:
    """attr_<name>: adds the `delta` parameter to attribute `index`."""

    def transform(args: Sequence[Datum], params: MorphParams) -> Datum:
        record = args[0]
        attrs = list(record.get("attrs").values)
        attrs[index] += params.number("delta")
        return record.replace("attrs", NumVector(attrs))

    def applicable(args: Sequence[Datum], params: MorphParams) -> bool:
        record = args[0]
        if not isinstance(record, Record):
            return False
        try:
            attrs = record.get("attrs")
        except KeyError:
            return False
        return isinstance(attrs, NumVector) and len(attrs) == len(ATTRIBUTES)

    return Datamorphism(
        f"attr_{ATTRIBUTES[index]}",
        transform,
        param_schema=(ParamSpec("delta", DatumKind.NUMBER, Number(delta), -1.0, 1.0),),
        applicability=applicable,
        output_kind=DatumKind.RECORD,
    )


def similarity_metamorphism(index: int, threshold: float) -> Metamorphism:
    """The edited input must still score at least `threshold`."""

    def still_recognised(base: Datum, mutants: Sequence[Datum], tolerance: float) -> bool:
        return all(mutant.value + tolerance >= threshold for mutant in mutants)

    return Metamorphism(
        f"similarity_{ATTRIBUTES[index]}",
        ((f"attr_{ATTRIBUTES[index]}", MorphParams()),),
        still_recognised,
        tolerance=0.0,
    )


def _hash_fraction(datum: Datum) -> float:
    return int(canonical_hash(datum)[:16], 16) / float(1 << 64)


def recognizer_subject(references: dict[str, np.ndarray], error_fraction: float = 0.0) -> InProcessSubject:
    def evaluate(datum: Datum) -> Datum:
        if not isinstance(datum, Record):
            raise SubjectError(f"recognizer takes a Record, got {datum.kind.value}")
        try:
            identity = datum.get("id").value
            attrs = np.asarray(datum.get("attrs").values)
        except (KeyError, AttributeError) as e:
            raise SubjectError(f"recognizer input lacks {e}") from e
        reference = references.get(identity)
        if reference is None or attrs.shape != reference.shape:
            raise SubjectError(f"unknown identity {identity!r}")
        distance = float(np.abs(attrs - reference).sum())
        if distance > 0.0 and _hash_fraction(datum) < error_fraction:
            raise SubjectError("not recognised")
        score = 100.0 * (1.0 - min(max(distance / len(ATTRIBUTES), 0.0), 1.0))
        return Number(round(score, SCORE_DECIMALS))

    return InProcessSubject("synth_recognizer", evaluate)


def synthetic_recognizer(options: RecognizerOptions | None = None) -> tuple[InProcessSubject, Framework]:
    """
    Builds the recognizer subject together with its framework: generated identities as
    seeds, the 13 attribute datamorphisms and one similarity metamorphism per attribute.

    Returns:
        tuple[InProcessSubject, Framework]: The subject and the framework sharing its identities.
    """
    options = options or RecognizerOptions()
    records = identity_records(options.seeds, options.rng_seed)
    references = {record.get("id").value: np.asarray(record.get("attrs").values) for record in records}
    framework = Framework.from_data(
        "synth_recognizer",
        DatumKind.RECORD,
        records,
        tuple(attribute_morphism(i, options.delta) for i in range(len(ATTRIBUTES))),
        tuple(similarity_metamorphism(i, options.threshold) for i in range(len(ATTRIBUTES))),
    )
    logger.debug(f"Synthetic recognizer built with {options}")
    return recognizer_subject(references, options.error_fraction), framework
