"""
Charlie's passive inference and an intercept-resend eavesdropper.

Charlie only ever sees public data: both rounds of Bell announcements and
the sifting announcements. From the first round he learns whether each
message pair sits in the Phi set or the Psi set; together with the second
round outcome that fixes, for the original cover set {I, Z}, whether Alice's
two bits are equal.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .quantum_core import (
    SAME_BASIS_SUPPORT,
    Basis,
    BellLabel,
    PauliLabel,
    PureState,
    SingleQubitLabel,
    bell_distribution,
    measure_qubit,
    single_state,
    tensor,
)
from .variants import EncodingVariant, as_cover

MESSAGE_PAIRS = ("00", "01", "10", "11")
# Alice's encoding: bit pair -> operator, first bit is the high-order bit.
ENCODING = {
    "00": PauliLabel.I,
    "01": PauliLabel.X,
    "10": PauliLabel.IY,
    "11": PauliLabel.Z,
}
DECODING = {op: bits for bits, op in ENCODING.items()}


class BellClass(enum.Enum):
    PHI_SET = "PHI"
    PSI_SET = "PSI"

    @property
    def flip_bit(self) -> int:
        return 1 if self is BellClass.PSI_SET else 0


def classify(label: BellLabel) -> BellClass:
    return BellClass.PSI_SET if label.flip_bit else BellClass.PHI_SET


@dataclass(frozen=True)
class CharlieView:
    index: int
    first_round_class: BellClass
    second_round_outcome: BellLabel

    @property
    def key(self) -> tuple[BellClass, BellLabel]:
        """The position-independent part of the view."""
        return (self.first_round_class, self.second_round_outcome)


@dataclass(frozen=True)
class Posterior:
    probabilities: Mapping[str, Fraction]

    def __post_init__(self) -> None:
        if any(p < 0 for p in self.probabilities.values()):
            raise ValueError("negative posterior probability")
        if sum(self.probabilities.values()) != 1:
            raise ValueError("posterior does not sum to 1")

    @property
    def support(self) -> frozenset[str]:
        return frozenset(m for m, p in self.probabilities.items() if p > 0)

    def entropy_bits(self) -> float:
        return -sum(float(p) * math.log2(p) for p in self.probabilities.values() if p > 0)

    def as_floats(self) -> dict[str, float]:
        return {m: float(self.probabilities[m]) for m in MESSAGE_PAIRS}


def charlie_views(public: Mapping[str, Any], direction: int = 0) -> list[CharlieView]:
    """
    Build Charlie's views for one message direction from the public projection
    of a transcript (see ``SessionTranscript.public_projection``).
    """
    first = {a["index"]: BellLabel(a["outcome"]) for a in public["first_round"]}
    d = public["directions"][direction]
    second = {a["index"]: BellLabel(a["outcome"]) for a in d["second_round"]}
    return [
        CharlieView(i, classify(first[i]), second[i])
        for i in d["pair_indices"]
        if i in second
    ]


def charlie_posterior(
    view: CharlieView | tuple[BellClass, BellLabel],
    variant: EncodingVariant | Sequence[PauliLabel],
) -> Posterior:
    """
    Posterior over Alice's bit pair given Charlie's view, uniform prior.

    The pre-encoding phase bit is uniform and hidden from Charlie, and the
    phase bit of the outcome is therefore uniform too whatever Alice and Bob
    do. Only the parity bit carries information: it equals the pre-state
    parity XOR Alice's flip bit XOR Bob's flip bit. So the likelihood of a
    message is the fraction of cover operators whose flip bit matches.
    """
    klass, outcome = view.key if isinstance(view, CharlieView) else view
    cover = as_cover(variant)
    needed_flip = {
        m: outcome.flip_bit ^ klass.flip_bit ^ ENCODING[m].flip_bit for m in MESSAGE_PAIRS
    }
    weight = {
        m: Fraction(sum(1 for b in cover if b.flip_bit == needed_flip[m]), len(cover))
        for m in MESSAGE_PAIRS
    }
    total = sum(weight.values())
    if total == 0:
        raise ValueError("view is unreachable under this cover set")
    return Posterior({m: weight[m] / total for m in MESSAGE_PAIRS})


class Channel(enum.Enum):
    ALICE = "alice"
    BOB = "bob"


class Phase(enum.Enum):
    """Quantum transmissions Eve can attack."""

    DISTRIBUTION = "distribution"  # C_A2 / C_B2 sent to Charlie before round one
    RETURN = "return"  # M_A / M_B sent to Charlie before round two


@dataclass(frozen=True)
class EveRecord:
    channel: Channel
    phase: Phase
    index: int
    basis: Basis
    bit: int


@dataclass(frozen=True)
class InterceptResend:
    """
    Measure-and-resend attack on every qubit crossing the chosen channels.

    Eve cannot tell decoys from EPR halves while they are in transit, so she
    attacks every position; ``fraction`` < 1 attacks a seeded random subset.
    """

    channels: tuple[Channel, ...] = (Channel.ALICE,)
    phases: tuple[Phase, ...] = (Phase.DISTRIBUTION,)
    fraction: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")
        if not self.channels:
            raise ValueError("at least one channel must be attacked")

    def targets(self, channel: Channel, phase: Phase) -> bool:
        return channel in self.channels and phase in self.phases

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "intercept-resend",
            "channels": [c.value for c in self.channels],
            "phases": [p.value for p in self.phases],
            "fraction": self.fraction,
        }


def intercept_resend(
    state: PureState, qubit: int, rng: np.random.Generator
) -> tuple[PureState, Basis, int]:
    """
    Eve measures ``qubit`` in a uniformly random basis and resends the
    eigenstate she saw. Returns the resulting state, her basis and her bit.
    """
    basis = Basis.Z if rng.random() < 0.5 else Basis.X
    bit, resent = measure_qubit(state, qubit, basis, rng)
    return resent, basis, bit


def _eigen_branches(label: SingleQubitLabel) -> Iterable[tuple[Fraction, SingleQubitLabel]]:
    """(probability, resent state) for Eve's measure-and-resend on one qubit."""
    for basis in Basis:
        if basis is label.basis:
            yield Fraction(1, 2), label
        else:
            for bit in (0, 1):
                yield Fraction(1, 4), SingleQubitLabel.eigenstate(basis, bit)


def exact_intercept_resend_error(channels: Iterable[Channel] = (Channel.ALICE,)) -> float:
    """
    Expected decoy error rate when Eve measure-and-resends every decoy on the
    given channels, by exact enumeration over the same-basis decoy pairs,
    Eve's basis and outcome, and Charlie's Bell projection.
    """
    channels = set(channels)
    total = 0.0
    for (a, b), allowed in SAME_BASIS_SUPPORT.items():
        a_branches = list(_eigen_branches(a)) if Channel.ALICE in channels else [(Fraction(1), a)]
        b_branches = list(_eigen_branches(b)) if Channel.BOB in channels else [(Fraction(1), b)]
        for (pa, ra), (pb, rb) in itertools.product(a_branches, b_branches):
            dist = bell_distribution(tensor(single_state(ra), single_state(rb)), 0, 1)
            bad = sum(p for label, p in dist.items() if label not in allowed)
            total += float(pa * pb) * bad
    return total / len(SAME_BASIS_SUPPORT)
