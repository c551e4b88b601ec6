"""
Exact pure-state algebra for registers of up to four qubits.

Conventions
-----------
* Qubit 0 is the most significant bit of the computational basis index, so
  ``tensor(a, b)`` places ``a``'s qubits before ``b``'s.
* ``PauliLabel.IY`` is the real matrix ``i*sigma_y``: ``|0> -> -|1>``,
  ``|1> -> |0>``.
* Bell-class comparisons ignore global phase.

Two independent paths describe how a Pauli operator moves a Bell state: the
state-vector path (``apply_pauli`` followed by ``bell_distribution``) and the
symbolic path (``pauli_action_on_bell``), which uses the fact that every Bell
state and every Pauli is labelled by a pair of bits (bit-flip, phase-flip).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from math import sqrt
from typing import Mapping

import numpy as np

MAX_QUBITS = 4
NORM_TOL = 1e-9
ALGEBRA_TOL = 1e-12
# Branches whose probability is below this are treated as impossible.
_PRUNE_TOL = 1e-15

_S = 1 / sqrt(2)


class BellLabel(enum.Enum):
    """The four EPR states; the value is the token used in tables and JSON."""

    PHI_PLUS = "PHI+"
    PHI_MINUS = "PHI-"
    PSI_PLUS = "PSI+"
    PSI_MINUS = "PSI-"

    @property
    def flip_bit(self) -> int:
        """1 for the Psi states (odd parity), 0 for the Phi states."""
        return _BELL_BITS[self][0]

    @property
    def phase_bit(self) -> int:
        """1 for the minus states."""
        return _BELL_BITS[self][1]

    @classmethod
    def from_bits(cls, flip: int, phase: int) -> "BellLabel":
        return _BITS_BELL[(flip & 1, phase & 1)]

    def __str__(self) -> str:
        return self.value


_BELL_BITS = {
    BellLabel.PHI_PLUS: (0, 0),
    BellLabel.PHI_MINUS: (0, 1),
    BellLabel.PSI_PLUS: (1, 0),
    BellLabel.PSI_MINUS: (1, 1),
}
_BITS_BELL = {bits: label for label, bits in _BELL_BITS.items()}


class PauliLabel(enum.Enum):
    """Encoding and cover operators. Values are the command-line tokens."""

    I = "I"
    X = "X"
    IY = "IY"
    Z = "Z"

    @property
    def matrix(self) -> np.ndarray:
        return _PAULI_MATRICES[self]

    @property
    def flip_bit(self) -> int:
        return _PAULI_BITS[self][0]

    @property
    def phase_bit(self) -> int:
        return _PAULI_BITS[self][1]

    @property
    def symbol(self) -> str:
        """Conventional typeset name, for human-readable output."""
        return {"I": "I", "X": "σx", "IY": "iσy", "Z": "σz"}[self.value]

    def __str__(self) -> str:
        return self.value


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


_PAULI_MATRICES = {
    PauliLabel.I: _frozen(np.array([[1, 0], [0, 1]], dtype=complex)),
    PauliLabel.X: _frozen(np.array([[0, 1], [1, 0]], dtype=complex)),
    # IY = Z @ X: columns are the images of |0> and |1>.
    PauliLabel.IY: _frozen(np.array([[0, 1], [-1, 0]], dtype=complex)),
    PauliLabel.Z: _frozen(np.array([[1, 0], [0, -1]], dtype=complex)),
}
_PAULI_BITS = {
    PauliLabel.I: (0, 0),
    PauliLabel.X: (1, 0),
    PauliLabel.IY: (1, 1),
    PauliLabel.Z: (0, 1),
}


class Basis(enum.Enum):
    Z = "Z"
    X = "X"


class SingleQubitLabel(enum.Enum):
    ZERO = "0"
    ONE = "1"
    PLUS = "+"
    MINUS = "-"

    @property
    def basis(self) -> Basis:
        return Basis.Z if self in (SingleQubitLabel.ZERO, SingleQubitLabel.ONE) else Basis.X

    @property
    def bit(self) -> int:
        """Index of this state within its basis (0 for |0> and |+>)."""
        return 0 if self in (SingleQubitLabel.ZERO, SingleQubitLabel.PLUS) else 1

    @classmethod
    def eigenstate(cls, basis: Basis, bit: int) -> "SingleQubitLabel":
        if basis is Basis.Z:
            return cls.ONE if bit else cls.ZERO
        return cls.MINUS if bit else cls.PLUS

    def __str__(self) -> str:
        return self.value


class Side(enum.Enum):
    """Which qubit of a two-qubit Bell pair an operator acts on."""

    A = "A"
    B = "B"


class StateError(ValueError):
    """Invalid state construction or out-of-range qubit index."""


@dataclass(frozen=True, eq=False)
class PureState:
    """
    Normalized amplitude vector over ``num_qubits`` qubits.

    The amplitude array is copied and made read-only on construction. The
    zero-qubit state ``EMPTY_STATE`` (a single amplitude 1) is the sentinel
    returned when a measurement consumes every qubit.
    """

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        size = amps.shape[0]
        if size == 0 or size & (size - 1):
            raise StateError(f"amplitude count {size} is not a power of two")
        if size > 2**MAX_QUBITS:
            raise StateError(f"more than {MAX_QUBITS} qubits")
        norm = float(np.vdot(amps, amps).real)
        # A finite norm implies every amplitude is finite.
        if not np.isfinite(norm):
            raise StateError("non-finite amplitude")
        if abs(norm - 1.0) > NORM_TOL:
            raise StateError(f"state not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def _trusted(cls, amps: np.ndarray) -> "PureState":
        """Wrap the output of a norm-preserving internal operation unchecked."""
        amps.setflags(write=False)
        state = object.__new__(cls)
        object.__setattr__(state, "amplitudes", amps)
        return state

    @property
    def num_qubits(self) -> int:
        return self.amplitudes.shape[0].bit_length() - 1

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def inner(self, other: "PureState") -> complex:
        """<self|other>."""
        _check_same_size(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __neg__(self) -> "PureState":
        return PureState(-self.amplitudes)

    def __repr__(self) -> str:
        return f"PureState(num_qubits={self.num_qubits}, amplitudes={np.round(self.amplitudes, 6).tolist()})"


EMPTY_STATE = PureState(np.array([1.0]))

_BELL_VECTORS = {
    BellLabel.PHI_PLUS: np.array([_S, 0, 0, _S]),
    BellLabel.PHI_MINUS: np.array([_S, 0, 0, -_S]),
    BellLabel.PSI_PLUS: np.array([0, _S, _S, 0]),
    BellLabel.PSI_MINUS: np.array([0, _S, -_S, 0]),
}
BELL_ORDER = tuple(BellLabel)
# Rows are <bell| in BELL_ORDER; all entries real.
_BELL_BRA = np.array([_BELL_VECTORS[label] for label in BELL_ORDER], dtype=complex)

_SINGLE_VECTORS = {
    SingleQubitLabel.ZERO: np.array([1.0, 0.0]),
    SingleQubitLabel.ONE: np.array([0.0, 1.0]),
    SingleQubitLabel.PLUS: np.array([_S, _S]),
    SingleQubitLabel.MINUS: np.array([_S, -_S]),
}


_BELL_STATES = {label: PureState(v) for label, v in _BELL_VECTORS.items()}
_SINGLE_STATES = {label: PureState(v) for label, v in _SINGLE_VECTORS.items()}


def bell_state(label: BellLabel) -> PureState:
    return _BELL_STATES[label]


def single_state(label: SingleQubitLabel) -> PureState:
    return _SINGLE_STATES[label]


def tensor(a: PureState, b: PureState) -> PureState:
    """Kronecker product; ``a`` occupies the more significant qubits."""
    if a.num_qubits + b.num_qubits > MAX_QUBITS:
        raise StateError(
            f"tensor of {a.num_qubits} and {b.num_qubits} qubits exceeds {MAX_QUBITS}"
        )
    return PureState._trusted(np.outer(a.amplitudes, b.amplitudes).reshape(-1))


def _check_qubit(state: PureState, qubit: int) -> None:
    if not 0 <= qubit < state.num_qubits:
        raise StateError(f"qubit {qubit} out of range for {state.num_qubits}-qubit state")


def _check_same_size(a: PureState, b: PureState) -> None:
    if a.num_qubits != b.num_qubits:
        raise StateError(f"dimension mismatch: {a.num_qubits} vs {b.num_qubits} qubits")


def apply_matrix(state: PureState, matrix: np.ndarray, qubit: int) -> PureState:
    """Apply an arbitrary 2x2 unitary to one qubit."""
    _check_qubit(state, qubit)
    n = state.num_qubits
    psi = state.amplitudes.reshape([2] * n)
    psi = np.tensordot(matrix, psi, axes=([1], [qubit]))
    psi = np.moveaxis(psi, 0, qubit)
    return PureState(psi.reshape(-1))


@lru_cache(maxsize=None)
def _pauli_permutation(num_qubits: int, qubit: int, op: PauliLabel) -> tuple[np.ndarray, np.ndarray]:
    """Index map and signs with (P psi)[k] = signs[k] * psi[source[k]]."""
    n = num_qubits
    k = np.arange(2**n)
    bit = (k >> (n - 1 - qubit)) & 1
    source = k ^ (op.flip_bit << (n - 1 - qubit))
    # Column source_bit of the matrix holds the image; read its entry on row `bit`.
    signs = op.matrix[bit, (source >> (n - 1 - qubit)) & 1]
    return source, signs


def apply_pauli(state: PureState, op: PauliLabel, qubit: int) -> PureState:
    _check_qubit(state, qubit)
    source, signs = _pauli_permutation(state.num_qubits, qubit, op)
    return PureState._trusted(signs * state.amplitudes[source])


def _pair_amplitudes(state: PureState, qubit_i: int, qubit_j: int) -> np.ndarray:
    """Unnormalized residual vectors, one row per Bell outcome in BELL_ORDER."""
    _check_qubit(state, qubit_i)
    _check_qubit(state, qubit_j)
    if qubit_i == qubit_j:
        raise StateError("Bell measurement needs two distinct qubits")
    n = state.num_qubits
    order = (qubit_i, qubit_j) + tuple(q for q in range(n) if q not in (qubit_i, qubit_j))
    psi = state.amplitudes.reshape([2] * n).transpose(order).reshape(4, -1)
    return _BELL_BRA @ psi


def bell_distribution(state: PureState, qubit_i: int, qubit_j: int) -> dict[BellLabel, float]:
    """Born-rule probabilities of projecting ``(qubit_i, qubit_j)`` onto each Bell state."""
    residuals = _pair_amplitudes(state, qubit_i, qubit_j)
    probs = _born(residuals)
    return {label: float(p) for label, p in zip(BELL_ORDER, probs)}


def bell_branches(
    state: PureState, qubit_i: int, qubit_j: int
) -> dict[BellLabel, tuple[float, PureState]]:
    """Every nonzero outcome with its probability and the renormalized rest."""
    residuals = _pair_amplitudes(state, qubit_i, qubit_j)
    probs = _born(residuals)
    return {
        label: (float(p), PureState._trusted(r / np.sqrt(p)))
        for label, p, r in zip(BELL_ORDER, probs, residuals)
        if p >= _PRUNE_TOL
    }


def _sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    # Plain Python is faster than cumsum/searchsorted for at most four entries.
    weights = [p if p >= _PRUNE_TOL else 0.0 for p in probs.tolist()]
    u = rng.random() * sum(weights)
    acc = 0.0
    last = 0
    for k, w in enumerate(weights):
        if w:
            acc += w
            last = k
            # Strict comparison never selects a zero-weight entry.
            if u < acc:
                return k
    return last


def _born(residuals: np.ndarray) -> np.ndarray:
    return (residuals.real**2 + residuals.imag**2).sum(axis=1)


def bell_measure(
    state: PureState, qubit_i: int, qubit_j: int, rng: np.random.Generator
) -> tuple[BellLabel, PureState]:
    """
    Projective Bell measurement on two qubits.

    Returns the sampled outcome and the renormalized state of the remaining
    qubits, in their original relative order (``EMPTY_STATE`` if none remain).
    """
    residuals = _pair_amplitudes(state, qubit_i, qubit_j)
    probs = _born(residuals)
    k = _sample_index(probs, rng)
    rest = residuals[k] / np.sqrt(probs[k])
    return BELL_ORDER[k], PureState._trusted(rest)


_BASIS_BRA = {
    Basis.Z: np.array([[1, 0], [0, 1]], dtype=complex),
    Basis.X: np.array([[_S, _S], [_S, -_S]], dtype=complex),
}


def measure_qubit(
    state: PureState, qubit: int, basis: Basis, rng: np.random.Generator
) -> tuple[int, PureState]:
    """
    Projective single-qubit measurement in the Z or X basis.

    The measured qubit is left in the observed eigenstate, so the returned
    state is also what a measure-and-resend attacker forwards.
    """
    _check_qubit(state, qubit)
    n = state.num_qubits
    psi = np.moveaxis(state.amplitudes.reshape([2] * n), qubit, 0).reshape(2, -1)
    bra = _BASIS_BRA[basis]
    branches = bra @ psi
    probs = np.sum(np.abs(branches) ** 2, axis=1)
    bit = _sample_index(probs, rng)
    rest = branches[bit] / np.sqrt(probs[bit])
    # Re-insert the eigenstate |e_bit> at position `qubit`.
    collapsed = np.outer(bra[bit].conj(), rest).reshape([2] * n)
    collapsed = np.moveaxis(collapsed, 0, qubit)
    return bit, PureState(collapsed.reshape(-1))


def pauli_action_on_bell(op: PauliLabel, side: Side, label: BellLabel) -> BellLabel:
    """
    Bell class reached by applying ``op`` to one qubit of ``label``.

    Symbolic: X flips the parity bit, Z flips the phase bit, IY = ZX flips
    both. Up to global phase the result does not depend on ``side``.
    """
    if not isinstance(side, Side):
        raise TypeError(f"side must be a Side, got {side!r}")
    return BellLabel.from_bits(label.flip_bit ^ op.flip_bit, label.phase_bit ^ op.phase_bit)


def equal_up_to_global_phase(a: PureState, b: PureState, tol: float = NORM_TOL) -> bool:
    return abs(a.inner(b)) >= 1 - tol


def identify_bell_state(state: PureState, tol: float = NORM_TOL) -> BellLabel:
    """Return the Bell label a two-qubit state equals up to global phase."""
    if state.num_qubits != 2:
        raise StateError("identify_bell_state needs a two-qubit state")
    for label in BELL_ORDER:
        if equal_up_to_global_phase(bell_state(label), state, tol):
            return label
    raise StateError("state is not a Bell state")


def as_probability_map(dist: Mapping[BellLabel, float], tol: float = _PRUNE_TOL) -> dict[BellLabel, float]:
    """Drop zero-probability outcomes from a distribution."""
    return {k: v for k, v in dist.items() if v > tol}


_Q = SingleQubitLabel
_B = BellLabel
# Bell outcomes allowed for a same-basis pair of single qubits (A, B).
SAME_BASIS_SUPPORT: dict[tuple[SingleQubitLabel, SingleQubitLabel], frozenset[BellLabel]] = {
    (_Q.ZERO, _Q.ZERO): frozenset({_B.PHI_PLUS, _B.PHI_MINUS}),
    (_Q.ONE, _Q.ONE): frozenset({_B.PHI_PLUS, _B.PHI_MINUS}),
    (_Q.ZERO, _Q.ONE): frozenset({_B.PSI_PLUS, _B.PSI_MINUS}),
    (_Q.ONE, _Q.ZERO): frozenset({_B.PSI_PLUS, _B.PSI_MINUS}),
    (_Q.PLUS, _Q.PLUS): frozenset({_B.PHI_PLUS, _B.PSI_PLUS}),
    (_Q.MINUS, _Q.MINUS): frozenset({_B.PHI_PLUS, _B.PSI_PLUS}),
    (_Q.PLUS, _Q.MINUS): frozenset({_B.PHI_MINUS, _B.PSI_MINUS}),
    (_Q.MINUS, _Q.PLUS): frozenset({_B.PHI_MINUS, _B.PSI_MINUS}),
}
del _Q, _B
