"""
Three-party MDI-QSDC / MDI-QD session engine.

Alice and Bob each prepare EPR pairs (Psi+ or Psi-) and interleave decoy
qubits into the halves they send to Charlie. Charlie Bell-measures position by
position; positions where both parties sent EPR halves leave the retained
halves entangled (entanglement swapping). After sifting and decoy checking,
the sender normalizes her Psi+ pairs with sigma_z, encodes two bits per pair
with a Pauli, the receiver applies a random cover operation, and Charlie's
second Bell measurement lets the receiver decode.

Registers are simulated per position: at most four qubits are ever jointly
entangled (A1 A2 B1 B2), so every position carries its own small state.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import __version__
from .adversary import (
    DECODING,
    ENCODING,
    Channel,
    EveRecord,
    InterceptResend,
    Phase,
    intercept_resend,
)
from .quantum_core import (
    SAME_BASIS_SUPPORT,
    BellLabel,
    PauliLabel,
    PureState,
    Side,
    SingleQubitLabel,
    apply_pauli,
    bell_measure,
    bell_state,
    pauli_action_on_bell,
    single_state,
    tensor,
)
from .variants import ORIGINAL, EncodingVariant

SCHEMA_VERSION = "mdiqsdc.transcript/1"

_PSI = (BellLabel.PSI_PLUS, BellLabel.PSI_MINUS)
_SINGLES = tuple(SingleQubitLabel)


class Party(enum.Enum):
    ALICE = "alice"
    BOB = "bob"

    @property
    def other(self) -> "Party":
        return Party.BOB if self is Party.ALICE else Party.ALICE

    @property
    def side(self) -> Side:
        return Side.A if self is Party.ALICE else Side.B

    @property
    def channel(self) -> Channel:
        return Channel.ALICE if self is Party.ALICE else Channel.BOB


class Mode(enum.Enum):
    QSDC = "qsdc"
    QD = "qd"


class SlotKind(enum.Enum):
    EPR = "epr"
    DECOY = "decoy"


class Round(enum.Enum):
    FIRST = "first"
    SECOND = "second"


class SiftCase(enum.Enum):
    BOTH_EPR = "both_epr"
    ALICE_EPR_BOB_DECOY = "alice_epr_bob_decoy"
    ALICE_DECOY_BOB_EPR = "alice_decoy_bob_epr"
    BOTH_DECOY_SAME_BASIS = "both_decoy_same_basis"
    BOTH_DECOY_DIFFERENT_BASIS = "both_decoy_different_basis"


class ConfigError(ValueError):
    pass


class CapacityError(ValueError):
    """A supplied message does not fit the sifted channel."""


class DecodeError(RuntimeError):
    """No encoding operator explains an announced outcome."""


@dataclass(frozen=True)
class Slot:
    kind: SlotKind
    index: int  # into the party's EPR list or decoy list


@dataclass(frozen=True)
class PartyState:
    party: Party
    initial_bell_labels: tuple[BellLabel, ...]
    layout: tuple[Slot, ...]
    decoy_labels: tuple[SingleQubitLabel, ...]

    def __post_init__(self) -> None:
        if any(label not in _PSI for label in self.initial_bell_labels):
            raise ValueError("EPR pairs are prepared in Psi+ or Psi- only")
        n_epr = sum(1 for s in self.layout if s.kind is SlotKind.EPR)
        n_decoy = len(self.layout) - n_epr
        if n_epr != len(self.initial_bell_labels) or n_decoy != len(self.decoy_labels):
            raise ValueError("layout does not match prepared qubits")

    @property
    def decoy_positions(self) -> list[int]:
        return [i for i, s in enumerate(self.layout) if s.kind is SlotKind.DECOY]

    def label_at(self, position: int) -> BellLabel:
        slot = self.layout[position]
        if slot.kind is not SlotKind.EPR:
            raise ValueError(f"position {position} holds a decoy")
        return self.initial_bell_labels[slot.index]

    def decoy_at(self, position: int) -> SingleQubitLabel:
        slot = self.layout[position]
        if slot.kind is not SlotKind.DECOY:
            raise ValueError(f"position {position} holds an EPR half")
        return self.decoy_labels[slot.index]

    def slot_state(self, position: int) -> PureState:
        """Physical state behind a position: (retained, sent) for EPR, (sent,) for decoys."""
        slot = self.layout[position]
        if slot.kind is SlotKind.EPR:
            return bell_state(self.initial_bell_labels[slot.index])
        return single_state(self.decoy_labels[slot.index])

    def to_dict(self) -> dict[str, Any]:
        return {
            "party": self.party.value,
            "initial_bell_labels": [l.value for l in self.initial_bell_labels],
            "layout": [{"kind": s.kind.value, "index": s.index} for s in self.layout],
            "decoy_labels": [d.value for d in self.decoy_labels],
        }


@dataclass(frozen=True)
class Announcement:
    round: Round
    index: int
    outcome: BellLabel

    def to_dict(self) -> dict[str, Any]:
        return {"round": self.round.value, "index": self.index, "outcome": self.outcome.value}


@dataclass(frozen=True)
class SiftDecision:
    index: int
    case: SiftCase

    @property
    def retained(self) -> bool:
        """Retained for message use."""
        return self.case is SiftCase.BOTH_EPR

    def to_dict(self) -> dict[str, Any]:
        return {"index": self.index, "case": self.case.value, "retained": self.retained}


@dataclass(frozen=True)
class SessionConfig:
    n: int
    m: int
    variant: EncodingVariant = ORIGINAL
    mode: Mode = Mode.QSDC
    qd_split_fraction: float = 0.5
    checking_bit_fraction: float = 0.125
    seed: int = 0
    eavesdropper: Optional[InterceptResend] = None
    abort_threshold: float = 0.05
    # Bit strings ("0101..."); shorter than capacity -> padded with random bits.
    alice_message: Optional[str] = None
    bob_message: Optional[str] = None
    # Fault-injection hook for an active Charlie: rewrites announced outcomes.
    charlie_fault: Optional[Callable[[Announcement], BellLabel]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.m < 0:
            raise ConfigError("m must be nonnegative")
        if not 0.0 < self.qd_split_fraction < 1.0:
            raise ConfigError("qd_split_fraction must lie in (0, 1)")
        if not 0.0 <= self.checking_bit_fraction < 1.0:
            raise ConfigError("checking_bit_fraction must lie in [0, 1)")
        if not 0.0 <= self.abort_threshold <= 1.0:
            raise ConfigError("abort_threshold must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        for msg in (self.alice_message, self.bob_message):
            if msg is not None and set(msg) - {"0", "1"}:
                raise ConfigError("messages are bit strings of 0 and 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "m": self.m,
            "variant": self.variant.spec,
            "cover": [op.value for op in self.variant.cover],
            "mode": self.mode.value,
            "qd_split_fraction": self.qd_split_fraction,
            "checking_bit_fraction": self.checking_bit_fraction,
            "seed": self.seed,
            "abort_threshold": self.abort_threshold,
            "eavesdropper": None if self.eavesdropper is None else self.eavesdropper.to_dict(),
            "charlie_fault": self.charlie_fault is not None,
        }


# ---------------------------------------------------------------- preparation

def prepare_party(
    party: Party, n: int, m: int, rng: np.random.Generator
) -> tuple[PartyState, list[PureState]]:
    """Random Psi+/Psi- pairs, random decoys at random positions among n + m slots."""
    if n < 1 or m < 0:
        raise ConfigError("need n >= 1 and m >= 0")
    labels = tuple(_PSI[k] for k in rng.integers(0, 2, size=n))
    decoys = tuple(_SINGLES[k] for k in rng.integers(0, 4, size=m))
    decoy_slots = set(rng.choice(n + m, size=m, replace=False).tolist()) if m else set()
    layout = []
    e = d = 0
    for pos in range(n + m):
        if pos in decoy_slots:
            layout.append(Slot(SlotKind.DECOY, d))
            d += 1
        else:
            layout.append(Slot(SlotKind.EPR, e))
            e += 1
    state = PartyState(party, labels, tuple(layout), decoys)
    return state, [state.slot_state(p) for p in range(n + m)]


# ---------------------------------------------------------------- round one

def _maybe_intercept(
    eve: Optional[InterceptResend],
    channel: Channel,
    phase: Phase,
    index: int,
    state: PureState,
    qubit: int,
    rng: Optional[np.random.Generator],
    records: list[EveRecord],
) -> PureState:
    if eve is None or not eve.targets(channel, phase):
        return state
    if eve.fraction < 1.0 and rng.random() >= eve.fraction:
        return state
    state, basis, bit = intercept_resend(state, qubit, rng)
    records.append(EveRecord(channel, phase, index, basis, bit))
    return state


def _announce(
    round_: Round,
    index: int,
    outcome: BellLabel,
    fault: Optional[Callable[[Announcement], BellLabel]],
) -> Announcement:
    a = Announcement(round_, index, outcome)
    if fault is not None:
        a = Announcement(round_, index, fault(a))
    return a


def first_measurement_round(
    alice: PartyState,
    alice_states: Sequence[PureState],
    bob: PartyState,
    bob_states: Sequence[PureState],
    rng: np.random.Generator,
    eve: Optional[InterceptResend] = None,
    eve_rng: Optional[np.random.Generator] = None,
    eve_records: Optional[list[EveRecord]] = None,
    charlie_fault: Optional[Callable[[Announcement], BellLabel]] = None,
) -> tuple[list[Announcement], dict[int, PureState]]:
    """
    Charlie's Bell measurement on the i-th sent qubit of each party.

    Returns the announcements and, for positions where both parties sent EPR
    halves, the swapped two-qubit state of the retained halves (A1, B1).
    """
    if len(alice_states) != len(bob_states):
        raise ValueError("both parties must send the same number of qubits")
    records = eve_records if eve_records is not None else []
    announcements: list[Announcement] = []
    residuals: dict[int, PureState] = {}
    for pos, (a_state, b_state) in enumerate(zip(alice_states, bob_states)):
        a_sent = a_state.num_qubits - 1
        b_sent = b_state.num_qubits - 1
        a_state = _maybe_intercept(eve, Channel.ALICE, Phase.DISTRIBUTION, pos, a_state, a_sent, eve_rng, records)
        b_state = _maybe_intercept(eve, Channel.BOB, Phase.DISTRIBUTION, pos, b_state, b_sent, eve_rng, records)
        joint = tensor(a_state, b_state)
        outcome, rest = bell_measure(joint, a_sent, a_state.num_qubits + b_sent, rng)
        announcements.append(_announce(Round.FIRST, pos, outcome, charlie_fault))
        if alice.layout[pos].kind is SlotKind.EPR and bob.layout[pos].kind is SlotKind.EPR:
            residuals[pos] = rest
    return announcements, residuals


# ---------------------------------------------------------------- sifting

def sift(alice: PartyState, bob: PartyState) -> list[SiftDecision]:
    if len(alice.layout) != len(bob.layout):
        raise ValueError("layouts cover different index sets")
    decisions = []
    for pos, (sa, sb) in enumerate(zip(alice.layout, bob.layout)):
        if sa.kind is SlotKind.EPR and sb.kind is SlotKind.EPR:
            case = SiftCase.BOTH_EPR
        elif sa.kind is SlotKind.EPR:
            case = SiftCase.ALICE_EPR_BOB_DECOY
        elif sb.kind is SlotKind.EPR:
            case = SiftCase.ALICE_DECOY_BOB_EPR
        elif alice.decoy_at(pos).basis is bob.decoy_at(pos).basis:
            case = SiftCase.BOTH_DECOY_SAME_BASIS
        else:
            case = SiftCase.BOTH_DECOY_DIFFERENT_BASIS
        decisions.append(SiftDecision(pos, case))
    return decisions


def estimate_decoy_error(
    decisions: Sequence[SiftDecision],
    announcements: Sequence[Announcement],
    alice: PartyState,
    bob: PartyState,
) -> Optional[float]:
    """
    Fraction of same-basis decoy positions whose announced outcome is outside
    the two-outcome support of the prepared pair. ``None`` when no
    same-basis decoy position exists.
    """
    outcome = {a.index: a.outcome for a in announcements}
    checked = errors = 0
    for d in decisions:
        if d.case is not SiftCase.BOTH_DECOY_SAME_BASIS:
            continue
        checked += 1
        allowed = SAME_BASIS_SUPPORT[(alice.decoy_at(d.index), bob.decoy_at(d.index))]
        if outcome[d.index] not in allowed:
            errors += 1
    if checked == 0:
        return None
    return errors / checked


# ---------------------------------------------------------------- swapping bookkeeping

_P, _M = BellLabel.PSI_PLUS, BellLabel.PSI_MINUS
_FP, _FM = BellLabel.PHI_PLUS, BellLabel.PHI_MINUS
# (label A1A2, label B1B2) -> {outcome on A2B2: resulting state of A1B1}
SWAP_TABLE: dict[tuple[BellLabel, BellLabel], dict[BellLabel, BellLabel]] = {
    (_P, _P): {_P: _P, _M: _M, _FP: _FP, _FM: _FM},
    (_M, _P): {_P: _M, _M: _P, _FP: _FM, _FM: _FP},
    (_P, _M): {_M: _P, _P: _M, _FP: _FM, _FM: _FP},
    (_M, _M): {_M: _M, _P: _P, _FP: _FP, _FM: _FM},
}
del _P, _M, _FP, _FM


def swapped_label(alice_label: BellLabel, bob_label: BellLabel, outcome: BellLabel) -> BellLabel:
    """State of the retained halves after Charlie announces ``outcome``."""
    return SWAP_TABLE[(alice_label, bob_label)][outcome]


def normalize_initial_states(
    residuals: dict[int, PureState],
    normalizer: PartyState,
    indices: Sequence[int],
) -> tuple[dict[int, PureState], dict[int, BellLabel]]:
    """
    The normalizing party applies sigma_z to her retained half wherever her
    pair started as Psi+, after which every one of her pairs behaves as if it
    had been prepared in Psi-. Returns updated states and effective labels.
    """
    qubit = 0 if normalizer.party is Party.ALICE else 1
    out = dict(residuals)
    for pos in indices:
        if normalizer.label_at(pos) is BellLabel.PSI_PLUS:
            out[pos] = apply_pauli(out[pos], PauliLabel.Z, qubit)
    return out, {pos: BellLabel.PSI_MINUS for pos in indices}


# ---------------------------------------------------------------- encoding

def bits_to_pairs(bits: str) -> list[str]:
    if len(bits) % 2:
        raise ValueError("bit string length must be even")
    return [bits[k:k + 2] for k in range(0, len(bits), 2)]


def random_bits(count: int, rng: np.random.Generator) -> str:
    return "".join("1" if b else "0" for b in rng.integers(0, 2, size=count))


def place_checking_bits(
    num_pairs: int,
    fraction: float,
    message: Optional[str],
    rng: np.random.Generator,
) -> tuple[list[str], tuple[int, ...], str]:
    """
    Interleave random checking pairs at random pair slots of the message.

    Returns (all bit pairs in channel order, checking slots, message bits).
    A supplied message shorter than the capacity is padded with random bits.
    """
    n_check = int(fraction * num_pairs)
    capacity = 2 * (num_pairs - n_check)
    message = message or ""
    if len(message) > capacity:
        raise CapacityError(f"message of {len(message)} bits exceeds capacity {capacity}")
    message = message + random_bits(capacity - len(message), rng)
    slots = tuple(sorted(rng.choice(num_pairs, size=n_check, replace=False).tolist())) if n_check else ()
    check_values = bits_to_pairs(random_bits(2 * n_check, rng))
    msg_pairs = iter(bits_to_pairs(message))
    check_iter = iter(check_values)
    slot_set = set(slots)
    pairs = [next(check_iter) if k in slot_set else next(msg_pairs) for k in range(num_pairs)]
    return pairs, slots, message


def encode(
    bit_pairs: Sequence[str],
    rng: np.random.Generator,
    variant: EncodingVariant,
) -> tuple[list[PauliLabel], list[PauliLabel]]:
    """Sender operators from the bit pairs; receiver cover operators drawn uniformly."""
    for p in bit_pairs:
        if p not in ENCODING:
            raise ValueError(f"not a bit pair: {p!r}")
    sender_ops = [ENCODING[p] for p in bit_pairs]
    draws = rng.integers(0, len(variant.cover), size=len(bit_pairs))
    cover_ops = [variant.cover[k] for k in draws]
    return sender_ops, cover_ops


def apply_encoding(
    residuals: dict[int, PureState],
    indices: Sequence[int],
    sender_ops: Sequence[PauliLabel],
    cover_ops: Sequence[PauliLabel],
    sender: Party,
) -> dict[int, PureState]:
    if not len(indices) == len(sender_ops) == len(cover_ops):
        raise ValueError("operator lists do not match the number of pairs")
    s_qubit, r_qubit = (0, 1) if sender is Party.ALICE else (1, 0)
    out = dict(residuals)
    for pos, s_op, c_op in zip(indices, sender_ops, cover_ops):
        out[pos] = apply_pauli(apply_pauli(out[pos], s_op, s_qubit), c_op, r_qubit)
    return out


def second_measurement_round(
    residuals: dict[int, PureState],
    indices: Sequence[int],
    rng: np.random.Generator,
    eve: Optional[InterceptResend] = None,
    eve_rng: Optional[np.random.Generator] = None,
    eve_records: Optional[list[EveRecord]] = None,
    charlie_fault: Optional[Callable[[Announcement], BellLabel]] = None,
) -> list[Announcement]:
    records = eve_records if eve_records is not None else []
    out = []
    for pos in indices:
        state = residuals[pos]
        state = _maybe_intercept(eve, Channel.ALICE, Phase.RETURN, pos, state, 0, eve_rng, records)
        state = _maybe_intercept(eve, Channel.BOB, Phase.RETURN, pos, state, 1, eve_rng, records)
        outcome, _ = bell_measure(state, 0, 1, rng)
        out.append(_announce(Round.SECOND, pos, outcome, charlie_fault))
    return out


def decode(
    pre_labels: Sequence[BellLabel],
    cover_ops: Sequence[PauliLabel],
    announcements: Sequence[Announcement],
    sender: Party = Party.ALICE,
) -> list[str]:
    """Recover the sender's bit pairs from the known pre-encoding states and covers."""
    if not len(pre_labels) == len(cover_ops) == len(announcements):
        raise ValueError("decode inputs differ in length")
    s_side, r_side = sender.side, sender.other.side
    pairs = []
    for pre, cover, ann in zip(pre_labels, cover_ops, announcements):
        covered = pauli_action_on_bell(cover, r_side, pre)
        matches = [op for op in DECODING if pauli_action_on_bell(op, s_side, covered) is ann.outcome]
        if len(matches) != 1:
            raise DecodeError(f"announcement {ann.outcome} at {ann.index} is inconsistent")
        pairs.append(DECODING[matches[0]])
    return pairs


# ---------------------------------------------------------------- records

@dataclass(frozen=True)
class DirectionRecord:
    """One message direction: sender encodes, receiver covers and decodes."""

    sender: Party
    pair_indices: tuple[int, ...]
    checking_slots: tuple[int, ...]
    checking_values: tuple[str, ...]
    message: str
    sender_ops: tuple[PauliLabel, ...]
    cover_ops: tuple[PauliLabel, ...]
    second_round: tuple[Announcement, ...]
    decoded_pairs: tuple[str, ...]

    @property
    def receiver(self) -> Party:
        return self.sender.other

    @property
    def decoded_message(self) -> str:
        slots = set(self.checking_slots)
        return "".join(p for k, p in enumerate(self.decoded_pairs) if k not in slots)

    @property
    def check_error_rate(self) -> Optional[float]:
        return verify_checking_bits(self)

    def to_dict(self) -> dict[str, Any]:
        return {
            "sender": self.sender.value,
            "receiver": self.receiver.value,
            "pair_indices": list(self.pair_indices),
            "checking_bits": {
                "positions": [self.pair_indices[k] for k in self.checking_slots],
                "values": list(self.checking_values),
            },
            "message": self.message,
            "sender_ops": [op.value for op in self.sender_ops],
            "cover_ops": [op.value for op in self.cover_ops],
            "second_round": [a.to_dict() for a in self.second_round],
            "decoded": self.decoded_message,
            "check_error_rate": self.check_error_rate,
        }


def verify_checking_bits(record: DirectionRecord) -> Optional[float]:
    """Fraction of checking pairs decoded wrongly; ``None`` without checking pairs."""
    if not record.checking_slots:
        return None
    wrong = sum(
        1
        for slot, value in zip(record.checking_slots, record.checking_values)
        if record.decoded_pairs[slot] != value
    )
    return wrong / len(record.checking_slots)


@dataclass(frozen=True)
class SessionTranscript:
    config: SessionConfig
    alice: PartyState
    bob: PartyState
    first_round: tuple[Announcement, ...]
    sift_decisions: tuple[SiftDecision, ...]
    decoy_error_rate: Optional[float]
    delta: int
    aborted: bool
    directions: tuple[DirectionRecord, ...]
    eve_records: tuple[EveRecord, ...] = ()

    def _direction(self, sender: Party) -> Optional[DirectionRecord]:
        return next((d for d in self.directions if d.sender is sender), None)

    @property
    def retained_indices(self) -> list[int]:
        return [d.index for d in self.sift_decisions if d.retained]

    @property
    def alice_message(self) -> str:
        d = self._direction(Party.ALICE)
        return d.message if d else ""

    @property
    def bob_decoded(self) -> str:
        d = self._direction(Party.ALICE)
        return d.decoded_message if d else ""

    @property
    def bob_message(self) -> Optional[str]:
        d = self._direction(Party.BOB)
        return d.message if d else None

    @property
    def alice_decoded(self) -> Optional[str]:
        d = self._direction(Party.BOB)
        return d.decoded_message if d else None

    @property
    def check_error_rate(self) -> Optional[float]:
        """Pooled over all directions."""
        total = wrong = 0
        for d in self.directions:
            for slot, value in zip(d.checking_slots, d.checking_values):
                total += 1
                wrong += d.decoded_pairs[slot] != value
        return wrong / total if total else None

    @property
    def bit_errors(self) -> int:
        return sum(
            a != b for d in self.directions for a, b in zip(d.message, d.decoded_message)
        )

    def public_projection(self) -> dict[str, Any]:
        """Everything announced over the public channel, nothing private."""
        return {
            "first_round": [a.to_dict() for a in self.first_round],
            "decoy_positions": {
                "alice": self.alice.decoy_positions,
                "bob": self.bob.decoy_positions,
            },
            "decoy_bases": {
                "alice": [d.basis.value for d in self.alice.decoy_labels],
                "bob": [d.basis.value for d in self.bob.decoy_labels],
            },
            "sift": [d.to_dict() for d in self.sift_decisions],
            "aborted": self.aborted,
            "directions": [
                {
                    "sender": d.sender.value,
                    "pair_indices": list(d.pair_indices),
                    "second_round": [a.to_dict() for a in d.second_round],
                    "checking_bits": d.to_dict()["checking_bits"],
                }
                for d in self.directions
            ],
        }

    def to_dict(self) -> dict[str, Any]:
        a_to_b, b_to_a = self._direction(Party.ALICE), self._direction(Party.BOB)
        return {
            "schema": SCHEMA_VERSION,
            "generator": f"mdiqsdc {__version__}",
            "config": self.config.to_dict(),
            "parties": {"alice": self.alice.to_dict(), "bob": self.bob.to_dict()},
            "first_round": [a.to_dict() for a in self.first_round],
            "sift": [d.to_dict() for d in self.sift_decisions],
            "decoy_error_rate": self.decoy_error_rate,
            "delta": self.delta,
            "aborted": self.aborted,
            "directions": [d.to_dict() for d in self.directions],
            "alice_message": self.alice_message,
            "checking_bits": a_to_b.to_dict()["checking_bits"] if a_to_b else {"positions": [], "values": []},
            "bob_decoded": self.bob_decoded,
            "check_error_rate": self.check_error_rate,
            "bob_message": self.bob_message,
            "alice_decoded": self.alice_decoded,
            "bit_errors": self.bit_errors,
            "eve_records": [
                {
                    "channel": r.channel.value,
                    "phase": r.phase.value,
                    "index": r.index,
                    "basis": r.basis.value,
                    "bit": r.bit,
                }
                for r in self.eve_records
            ],
        }

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


# ---------------------------------------------------------------- session

_STREAMS = ("alice_prep", "bob_prep", "charlie", "alice_private", "bob_private", "eve", "public")


def _streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.default_rng(s) for name, s in zip(_STREAMS, children)}


def _run_direction(
    sender: PartyState,
    receiver: PartyState,
    indices: Sequence[int],
    residuals: dict[int, PureState],
    first_round: dict[int, BellLabel],
    config: SessionConfig,
    message: Optional[str],
    rngs: dict[str, np.random.Generator],
    eve_records: list[EveRecord],
) -> DirectionRecord:
    sender_rng = rngs["alice_private" if sender.party is Party.ALICE else "bob_private"]
    receiver_rng = rngs["alice_private" if receiver.party is Party.ALICE else "bob_private"]

    residuals, effective = normalize_initial_states(residuals, sender, indices)
    pairs, slots, message = place_checking_bits(
        len(indices), config.checking_bit_fraction, message, sender_rng
    )
    sender_ops, cover_ops = encode(pairs, receiver_rng, config.variant)
    residuals = apply_encoding(residuals, indices, sender_ops, cover_ops, sender.party)
    second = second_measurement_round(
        residuals, indices, rngs["charlie"], config.eavesdropper, rngs["eve"],
        eve_records, config.charlie_fault,
    )

    # The receiver knows his own initial label, the sender's effective label
    # (Psi- after normalization) and Charlie's first announcement.
    pre = []
    for pos in indices:
        if sender.party is Party.ALICE:
            pre.append(swapped_label(effective[pos], receiver.label_at(pos), first_round[pos]))
        else:
            pre.append(swapped_label(receiver.label_at(pos), effective[pos], first_round[pos]))
    decoded = decode(pre, cover_ops, second, sender.party)
    return DirectionRecord(
        sender=sender.party,
        pair_indices=tuple(indices),
        checking_slots=slots,
        checking_values=tuple(pairs[k] for k in slots),
        message=message,
        sender_ops=tuple(sender_ops),
        cover_ops=tuple(cover_ops),
        second_round=tuple(second),
        decoded_pairs=tuple(decoded),
    )


def run_session(config: SessionConfig) -> SessionTranscript:
    rngs = _streams(config.seed)
    alice, alice_states = prepare_party(Party.ALICE, config.n, config.m, rngs["alice_prep"])
    bob, bob_states = prepare_party(Party.BOB, config.n, config.m, rngs["bob_prep"])
    eve_records: list[EveRecord] = []

    first, residuals = first_measurement_round(
        alice, alice_states, bob, bob_states, rngs["charlie"],
        config.eavesdropper, rngs["eve"], eve_records, config.charlie_fault,
    )
    decisions = sift(alice, bob)
    decoy_error = estimate_decoy_error(decisions, first, alice, bob)
    retained = [d.index for d in decisions if d.retained]
    delta = config.n - len(retained)
    aborted = decoy_error is not None and decoy_error > config.abort_threshold

    directions: list[DirectionRecord] = []
    if not aborted:
        first_by_pos = {a.index: a.outcome for a in first}
        if config.mode is Mode.QSDC:
            parts = [(alice, bob, retained, config.alice_message)]
        else:
            order = list(retained)
            rngs["public"].shuffle(order)
            k = int(config.qd_split_fraction * len(order))
            parts = [
                (alice, bob, sorted(order[:k]), config.alice_message),
                (bob, alice, sorted(order[k:]), config.bob_message),
            ]
        for sender, receiver, indices, message in parts:
            directions.append(
                _run_direction(
                    sender, receiver, indices, residuals, first_by_pos, config,
                    message, rngs, eve_records,
                )
            )

    return SessionTranscript(
        config=config,
        alice=alice,
        bob=bob,
        first_round=tuple(first),
        sift_decisions=tuple(decisions),
        decoy_error_rate=decoy_error,
        delta=delta,
        aborted=aborted,
        directions=tuple(directions),
        eve_records=tuple(eve_records),
    )
