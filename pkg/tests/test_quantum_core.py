import itertools
from math import sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdiqsdc.quantum_core import (
    BELL_ORDER,
    EMPTY_STATE,
    Basis,
    BellLabel,
    PauliLabel,
    PureState,
    Side,
    SingleQubitLabel,
    StateError,
    apply_matrix,
    apply_pauli,
    bell_branches,
    bell_distribution,
    bell_measure,
    bell_state,
    equal_up_to_global_phase,
    identify_bell_state,
    measure_qubit,
    pauli_action_on_bell,
    single_state,
    tensor,
)

S = 1 / sqrt(2)
PHI_P, PHI_M, PSI_P, PSI_M = BELL_ORDER


def ket(bits: str) -> PureState:
    v = np.zeros(2 ** len(bits))
    v[int(bits, 2)] = 1
    return PureState(v)


# Hand-written vectors, independent of the module's tables.
RAW_BELL = {
    PHI_P: np.array([1, 0, 0, 1]) * S,
    PHI_M: np.array([1, 0, 0, -1]) * S,
    PSI_P: np.array([0, 1, 1, 0]) * S,
    PSI_M: np.array([0, 1, -1, 0]) * S,
}


def raw_bell_probs(vec: np.ndarray, i: int, j: int) -> dict:
    """Brute force: sum |<bell_ij, rest|psi>|^2 over every basis state of the rest."""
    n = int(np.log2(len(vec)))
    rest = [q for q in range(n) if q not in (i, j)]
    out = {}
    for label, b in RAW_BELL.items():
        total = 0.0
        for r in itertools.product((0, 1), repeat=len(rest)):
            amp = 0.0
            for ab in range(4):
                bits = [0] * n
                bits[i], bits[j] = ab >> 1, ab & 1
                for q, v in zip(rest, r):
                    bits[q] = v
                amp += b[ab] * vec[int("".join(map(str, bits)), 2)]
            total += abs(amp) ** 2
        out[label] = total
    return out


def random_state(num_qubits: int, seed: int) -> PureState:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2**num_qubits) + 1j * rng.normal(size=2**num_qubits)
    return PureState(v / np.linalg.norm(v))


class TestConstruction:
    def test_phi_plus_amplitudes(self):
        np.testing.assert_allclose(bell_state(PHI_P).amplitudes, [S, 0, 0, S], atol=1e-15)

    def test_psi_minus_amplitudes(self):
        np.testing.assert_allclose(bell_state(PSI_M).amplitudes, [0, S, -S, 0], atol=1e-15)

    def test_phi_plus_orthogonal_to_psi_plus(self):
        assert bell_state(PHI_P).inner(bell_state(PSI_P)) == 0

    def test_bell_states_orthonormal(self):
        for a, b in itertools.product(BELL_ORDER, repeat=2):
            overlap = abs(bell_state(a).inner(bell_state(b)))
            if a is b:
                assert abs(overlap - 1) < 1e-12
            else:
                assert overlap < 1e-12

    def test_single_states(self):
        np.testing.assert_allclose(single_state(SingleQubitLabel.PLUS).amplitudes, [S, S])
        np.testing.assert_allclose(single_state(SingleQubitLabel.ZERO).amplitudes, [1, 0])
        assert single_state(SingleQubitLabel.MINUS).norm() == pytest.approx(1, abs=1e-12)

    def test_basis_is_function_of_label(self):
        assert {l: l.basis for l in SingleQubitLabel} == {
            SingleQubitLabel.ZERO: Basis.Z,
            SingleQubitLabel.ONE: Basis.Z,
            SingleQubitLabel.PLUS: Basis.X,
            SingleQubitLabel.MINUS: Basis.X,
        }

    @pytest.mark.parametrize("bad", [[1, 1], [np.nan, 0], [1, 0, 0], [0.6, 0.6]])
    def test_rejects_invalid_amplitudes(self, bad):
        with pytest.raises(StateError):
            PureState(np.array(bad, dtype=float))

    def test_amplitudes_are_read_only(self):
        s = bell_state(PHI_P)
        with pytest.raises(ValueError):
            s.amplitudes[0] = 0

    def test_rejects_more_than_four_qubits(self):
        with pytest.raises(StateError):
            PureState(np.eye(32)[0])


class TestTensor:
    def test_zero_zero(self):
        z = single_state(SingleQubitLabel.ZERO)
        assert equal_up_to_global_phase(tensor(z, z), ket("00"))

    def test_psi_plus_squared(self):
        # (|01> + |10>)(|01> + |10>) / 2 = (|0101> + |0110> + |1001> + |1010>) / 2
        out = tensor(bell_state(PSI_P), bell_state(PSI_P)).amplitudes
        nonzero = {k: out[k] for k in np.flatnonzero(np.abs(out) > 1e-12)}
        assert nonzero.keys() == {0b0101, 0b0110, 0b1001, 0b1010}
        assert all(abs(v - 0.5) < 1e-12 for v in nonzero.values())

    def test_first_argument_is_most_significant(self):
        one, zero = single_state(SingleQubitLabel.ONE), single_state(SingleQubitLabel.ZERO)
        assert equal_up_to_global_phase(tensor(one, zero), ket("10"))

    def test_rejects_five_qubits(self):
        with pytest.raises(StateError):
            tensor(tensor(bell_state(PHI_P), bell_state(PHI_P)), single_state(SingleQubitLabel.ZERO))

    @given(st.integers(1, 2), st.integers(1, 2), st.integers(0, 2**32 - 1))
    def test_norm_preserved(self, na, nb, seed):
        s = tensor(random_state(na, seed), random_state(nb, seed + 1))
        assert s.norm() == pytest.approx(1, abs=1e-12)


class TestPauli:
    def test_x_on_zero(self):
        assert equal_up_to_global_phase(apply_pauli(ket("0"), PauliLabel.X, 0), ket("1"))

    def test_x_maps_phi_plus_to_psi_plus(self):
        out = apply_pauli(bell_state(PHI_P), PauliLabel.X, 0)
        assert equal_up_to_global_phase(out, bell_state(PSI_P))

    def test_z_maps_psi_plus_to_psi_minus(self):
        out = apply_pauli(bell_state(PSI_P), PauliLabel.Z, 0)
        assert equal_up_to_global_phase(out, bell_state(PSI_M))

    def test_iy_real_convention(self):
        np.testing.assert_allclose(apply_pauli(ket("0"), PauliLabel.IY, 0).amplitudes, [0, -1])
        np.testing.assert_allclose(apply_pauli(ket("1"), PauliLabel.IY, 0).amplitudes, [1, 0])

    @pytest.mark.parametrize("op", list(PauliLabel))
    def test_unitary_and_squares_to_plus_minus_identity(self, op):
        u = op.matrix
        np.testing.assert_allclose(u.conj().T @ u, np.eye(2), atol=1e-12)
        sq = u @ u
        assert np.allclose(sq, np.eye(2), atol=1e-12) or np.allclose(sq, -np.eye(2), atol=1e-12)

    def test_index_out_of_range(self):
        with pytest.raises(StateError):
            apply_pauli(bell_state(PHI_P), PauliLabel.X, 2)

    @settings(max_examples=60)
    @given(st.integers(1, 4), st.data(), st.sampled_from(list(PauliLabel)), st.integers(0, 2**32 - 1))
    def test_fast_path_matches_generic_matrix_path(self, n, data, op, seed):
        q = data.draw(st.integers(0, n - 1))
        s = random_state(n, seed)
        fast = apply_pauli(s, op, q)
        # Full Kronecker operator as the oracle.
        mats = [np.eye(2)] * n
        mats[q] = op.matrix
        full = mats[0]
        for m in mats[1:]:
            full = np.kron(full, m)
        np.testing.assert_allclose(fast.amplitudes, full @ s.amplitudes, atol=1e-12)
        np.testing.assert_allclose(apply_matrix(s, op.matrix, q).amplitudes, fast.amplitudes, atol=1e-12)
        assert fast.norm() == pytest.approx(1, abs=1e-12)


class TestBellDistribution:
    def test_eq2_product_is_uniform(self):
        s = tensor(bell_state(PSI_P), bell_state(PSI_P))  # A1 A2 B1 B2
        dist = bell_distribution(s, 1, 3)
        assert all(abs(p - 0.25) < 1e-12 for p in dist.values())

    def test_zero_zero(self):
        z = single_state(SingleQubitLabel.ZERO)
        dist = bell_distribution(tensor(z, z), 0, 1)
        assert dist == pytest.approx({PHI_P: 0.5, PHI_M: 0.5, PSI_P: 0.0, PSI_M: 0.0}, abs=1e-12)

    def test_plus_minus(self):
        s = tensor(single_state(SingleQubitLabel.PLUS), single_state(SingleQubitLabel.MINUS))
        dist = bell_distribution(s, 0, 1)
        assert dist == pytest.approx({PHI_P: 0.0, PHI_M: 0.5, PSI_P: 0.0, PSI_M: 0.5}, abs=1e-12)

    def test_same_qubit_rejected(self):
        with pytest.raises(StateError):
            bell_distribution(bell_state(PHI_P), 0, 0)

    @settings(max_examples=40)
    @given(st.integers(2, 4), st.data(), st.integers(0, 2**32 - 1))
    def test_matches_brute_force_and_sums_to_one(self, n, data, seed):
        i, j = data.draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
        s = random_state(n, seed)
        dist = bell_distribution(s, i, j)
        assert all(p >= 0 for p in dist.values())
        assert sum(dist.values()) == pytest.approx(1, abs=1e-9)
        assert dist == pytest.approx(raw_bell_probs(s.amplitudes, i, j), abs=1e-12)


class TestBellMeasure:
    def test_swapping_residual_phi_plus(self):
        s = tensor(bell_state(PSI_P), bell_state(PSI_P))
        rng = np.random.default_rng(0)
        seen = set()
        for _ in range(50):
            outcome, rest = bell_measure(s, 1, 3, rng)
            seen.add(outcome)
            if outcome is PHI_P:
                assert equal_up_to_global_phase(rest, bell_state(PHI_P))
        assert PHI_P in seen

    def test_eigenstate_measured_with_certainty(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            outcome, rest = bell_measure(bell_state(PSI_M), 0, 1, rng)
            assert outcome is PSI_M
            assert rest.num_qubits == 0
            assert rest.inner(EMPTY_STATE) == pytest.approx(1)

    def test_frequency_zero_zero(self):
        z = single_state(SingleQubitLabel.ZERO)
        s = tensor(z, z)
        rng = np.random.default_rng(12345)
        outcomes = [bell_measure(s, 0, 1, rng)[0] for _ in range(10_000)]
        assert set(outcomes) <= {PHI_P, PHI_M}
        assert 0.47 <= outcomes.count(PHI_P) / 10_000 <= 0.53

    def test_never_returns_zero_probability_outcome(self):
        s = tensor(single_state(SingleQubitLabel.PLUS), single_state(SingleQubitLabel.PLUS))
        rng = np.random.default_rng(7)
        assert {bell_measure(s, 0, 1, rng)[0] for _ in range(2000)} == {PHI_P, PSI_P}

    def test_deterministic_given_seed(self):
        s = random_state(4, 3)
        a = [bell_measure(s, 0, 2, np.random.default_rng(9))[0] for _ in range(5)]
        b = [bell_measure(s, 0, 2, np.random.default_rng(9))[0] for _ in range(5)]
        assert a == b

    def test_chi_squared_against_distribution(self):
        s = random_state(4, 11)
        dist = bell_distribution(s, 3, 0)
        rng = np.random.default_rng(2024)
        trials = 10_000
        counts = {l: 0 for l in BELL_ORDER}
        for _ in range(trials):
            counts[bell_measure(s, 3, 0, rng)[0]] += 1
        chi2 = sum((counts[l] - trials * dist[l]) ** 2 / (trials * dist[l]) for l in BELL_ORDER)
        # 3 degrees of freedom; 16.27 is the 0.1% critical value.
        assert chi2 < 16.27

    def test_residual_of_non_adjacent_pair_keeps_order(self):
        # |1> (x) Phi+ on qubits (1, 2) (x) |0>: measuring (1, 2) leaves |1>|0>.
        s = tensor(tensor(ket("1"), bell_state(PHI_P)), ket("0"))
        outcome, rest = bell_measure(s, 1, 2, np.random.default_rng(0))
        assert outcome is PHI_P
        assert equal_up_to_global_phase(rest, ket("10"))


class TestSymbolicAction:
    def test_z_on_phi_plus(self):
        assert pauli_action_on_bell(PauliLabel.Z, Side.A, PHI_P) is PHI_M

    def test_identity(self):
        assert pauli_action_on_bell(PauliLabel.I, Side.B, PSI_M) is PSI_M

    @pytest.mark.parametrize(
        "op,side,label", list(itertools.product(PauliLabel, Side, BELL_ORDER))
    )
    def test_agrees_with_state_vector(self, op, side, label):
        qubit = 0 if side is Side.A else 1
        dist = bell_distribution(apply_pauli(bell_state(label), op, qubit), 0, 1)
        certain = [l for l, p in dist.items() if abs(p - 1) < 1e-12]
        assert certain == [pauli_action_on_bell(op, side, label)]

    def test_side_must_be_enum(self):
        with pytest.raises(TypeError):
            pauli_action_on_bell(PauliLabel.X, "A", PHI_P)


class TestGlobalPhase:
    def test_negated(self):
        assert equal_up_to_global_phase(bell_state(PSI_P), -bell_state(PSI_P))

    def test_orthogonal(self):
        assert not equal_up_to_global_phase(bell_state(PSI_P), bell_state(PSI_M))

    def test_iy_squared_is_phase_only(self):
        s = apply_pauli(apply_pauli(bell_state(PHI_P), PauliLabel.IY, 0), PauliLabel.IY, 0)
        np.testing.assert_allclose(s.amplitudes, -bell_state(PHI_P).amplitudes, atol=1e-12)
        assert equal_up_to_global_phase(bell_state(PHI_P), s)

    def test_dimension_mismatch(self):
        with pytest.raises(StateError):
            equal_up_to_global_phase(bell_state(PHI_P), ket("0"))

    def test_identify(self):
        assert identify_bell_state(-bell_state(PSI_M)) is PSI_M
        with pytest.raises(StateError):
            identify_bell_state(ket("01"))


class TestSingleQubitMeasurement:
    def test_eigenstate_in_own_basis(self):
        bit, out = measure_qubit(ket("0"), 0, Basis.Z, np.random.default_rng(0))
        assert bit == 0 and equal_up_to_global_phase(out, ket("0"))

    def test_zero_in_x_basis_is_even(self):
        rng = np.random.default_rng(5)
        bits = []
        for _ in range(4000):
            bit, out = measure_qubit(ket("0"), 0, Basis.X, rng)
            want = SingleQubitLabel.MINUS if bit else SingleQubitLabel.PLUS
            assert equal_up_to_global_phase(out, single_state(want))
            bits.append(bit)
        assert 0.46 < np.mean(bits) < 0.54

    def test_collapse_inside_entangled_pair(self):
        bit, out = measure_qubit(bell_state(PHI_P), 1, Basis.Z, np.random.default_rng(3))
        assert equal_up_to_global_phase(out, ket(f"{bit}{bit}"))


class TestBranches:
    def test_branches_agree_with_distribution_and_sampling(self):

        s = random_state(3, 17)
        branches = bell_branches(s, 2, 0)
        dist = bell_distribution(s, 2, 0)
        assert {l: p for l, (p, _) in branches.items()} == pytest.approx(dist, abs=1e-12)
        r = np.random.default_rng(0)
        for _ in range(20):
            outcome, rest = bell_measure(s, 2, 0, r)
            assert equal_up_to_global_phase(rest, branches[outcome][1])

    def test_zero_branches_dropped(self):

        assert set(bell_branches(bell_state(PHI_M), 0, 1)) == {PHI_M}
