# app/subjects/bitset.py
from typing import Sequence

from app.errors import ConfigError
from app.models.datum import Bits, Datum, DatumKind
from app.models.framework import Datamorphism, Framework, MorphParams


def set_bit_morphism(index: int) -> Datamorphism:
    """set_<index>: turns bit `index` on. Idempotent, and commutes with every other set_i."""

    def transform(args: Sequence[Datum], params: MorphParams) -> Datum:
        return args[0].with_bit(index, 1)

    def applicable(args: Sequence[Datum], params: MorphParams) -> bool:
        return isinstance(args[0], Bits) and index < args[0].width

    return Datamorphism(f"set_{index}", transform, applicability=applicable, output_kind=DatumKind.BITS)


def bitset_framework(width: int = 3, morphisms: int | None = None, seeds: Sequence[str] | None = None) -> Framework:
    """
    Bit vectors of the given width with one set-bit datamorphism per position, the first
    `morphisms` positions only when given. The default seed is all zeros.
    """
    count = width if morphisms is None else morphisms
    if width < 1 or not 0 <= count <= width:
        raise ConfigError(f"bitset needs width >= 1 and 0 <= morphisms <= width, got {width} and {count}")
    seed_strings = list(seeds) if seeds else ["0" * width]
    return Framework.from_data(
        "bitset",
        DatumKind.BITS,
        (Bits.from_string(text) for text in seed_strings),
        tuple(set_bit_morphism(i) for i in range(count)),
    )
