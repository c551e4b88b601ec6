"""Encoding variants: which cover operations the receiver draws from."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .quantum_core import PauliLabel


@dataclass(frozen=True)
class EncodingVariant:
    name: str
    cover: tuple[PauliLabel, ...]

    def __post_init__(self) -> None:
        if not self.cover:
            raise ValueError("cover set must be nonempty")
        if len(set(self.cover)) != len(self.cover):
            raise ValueError(f"cover set has duplicates: {format_cover(self.cover)}")

    @property
    def spec(self) -> str:
        """Round-trippable command-line spelling."""
        if self.name in ("original", "modified"):
            return self.name
        return "cover=" + format_cover(self.cover)


ORIGINAL = EncodingVariant("original", (PauliLabel.I, PauliLabel.Z))
MODIFIED = EncodingVariant("modified", (PauliLabel.I, PauliLabel.X))
FULL_PAULI = EncodingVariant("cover", (PauliLabel.I, PauliLabel.X, PauliLabel.IY, PauliLabel.Z))


def cover_set(ops: Iterable[PauliLabel]) -> EncodingVariant:
    return EncodingVariant("cover", tuple(ops))


def parse_cover(text: str) -> tuple[PauliLabel, ...]:
    """Parse ``"I,X,IY,Z"`` style token lists (case-insensitive)."""
    tokens = [t.strip().upper() for t in text.split(",") if t.strip()]
    if not tokens:
        raise ValueError("empty cover set")
    try:
        return tuple(PauliLabel(t) for t in tokens)
    except ValueError:
        bad = [t for t in tokens if t not in PauliLabel._value2member_map_]
        raise ValueError(f"unknown cover operator(s) {bad}; use I, X, IY, Z") from None


def parse_variant(text: str) -> EncodingVariant:
    """Parse ``original``, ``modified`` or ``cover=<ops>``."""
    key = text.strip().lower()
    if key == "original":
        return ORIGINAL
    if key == "modified":
        return MODIFIED
    if key.startswith("cover="):
        return cover_set(parse_cover(text.split("=", 1)[1]))
    raise ValueError(f"unknown variant {text!r}; use original, modified or cover=<ops>")


def format_cover(ops: Sequence[PauliLabel]) -> str:
    return ",".join(op.value for op in ops)


def as_cover(variant: EncodingVariant | Sequence[PauliLabel]) -> tuple[PauliLabel, ...]:
    if isinstance(variant, EncodingVariant):
        return variant.cover
    return cover_set(variant).cover
