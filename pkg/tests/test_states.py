import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qficompress.states import (
    CNOT,
    HADAMARD,
    IDENTITY2,
    PROJECTORS,
    CompletenessError,
    EquatorialPhase,
    StateVector,
    apply_kraus,
    apply_unitary,
    basis_state,
    equal_up_to_phase,
    equatorial_state,
    fidelity,
    measure_projective,
    tensor,
    tensor_all,
)

S2 = 1 / math.sqrt(2)
phases = st.floats(min_value=-20.0, max_value=20.0, allow_nan=False)


def random_state(rng, n_qubits):
    v = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    return StateVector(v / np.linalg.norm(v))


def random_unitary(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


class TestEquatorialPhase:
    def test_canonical_range(self):
        assert EquatorialPhase(-math.pi / 2).theta == pytest.approx(3 * math.pi / 2)
        assert EquatorialPhase(2 * math.pi).theta == 0.0
        assert EquatorialPhase(5 * math.pi).theta == pytest.approx(math.pi)

    @given(phases, phases)
    def test_arithmetic_is_mod_2pi(self, a, b):
        s = EquatorialPhase(a) + EquatorialPhase(b)
        assert 0.0 <= s.theta < 2 * math.pi
        assert s.isclose(EquatorialPhase(a + b), atol=1e-9)
        assert (EquatorialPhase(a) - b).isclose(a - b, atol=1e-9)

    def test_distance_wraps(self):
        assert EquatorialPhase(0.01).distance(2 * math.pi - 0.01) == pytest.approx(0.02)


class TestConstruction:
    def test_equatorial_examples(self):
        np.testing.assert_allclose(equatorial_state(0).amplitudes, [S2, S2], atol=1e-15)
        np.testing.assert_allclose(equatorial_state(math.pi).amplitudes, [S2, -S2], atol=1e-15)
        np.testing.assert_allclose(equatorial_state(math.pi / 2).amplitudes, [S2, 1j * S2], atol=1e-15)

    def test_state_is_immutable(self):
        s = equatorial_state(0.3)
        with pytest.raises(ValueError):
            s.amplitudes[0] = 0

    def test_qubit_count(self):
        assert StateVector(np.ones(8) / math.sqrt(8)).qubit_count == 3
        assert StateVector(np.ones(3) / math.sqrt(3)).qubit_count is None
        assert basis_state("101").basis_dim == 8

    def test_normalize(self):
        s = StateVector([3.0, 4.0]).normalize()
        assert abs(s.norm - 1) < 1e-12
        with pytest.raises(ValueError):
            StateVector([0.0, 0.0]).normalize()


class TestTensor:
    def test_basis(self):
        np.testing.assert_array_equal(tensor(basis_state("0"), basis_state("0")).amplitudes, [1, 0, 0, 0])

    def test_equatorial_pair(self):
        t = 0.83
        w = np.exp(1j * t)
        expected = np.array([1, w, w, w**2]) / 2
        np.testing.assert_allclose(tensor(equatorial_state(t), equatorial_state(t)).amplitudes, expected, atol=1e-15)

    def test_qubit_zero_is_most_significant(self):
        assert np.argmax(np.abs(tensor(basis_state("1"), basis_state("0")).amplitudes)) == 2

    @given(phases, phases)
    def test_norm_multiplicative(self, a, b):
        assert abs(tensor(equatorial_state(a), equatorial_state(b)).norm - 1) < 1e-12

    def test_overflow_guard(self):
        big = StateVector(np.ones(2**13) / 2**6.5)
        with pytest.raises(OverflowError):
            tensor(big, big)


class TestApplyUnitary:
    def test_identity(self):
        s = equatorial_state(0.4)
        np.testing.assert_array_equal(apply_unitary(s, IDENTITY2, [0]).amplitudes, s.amplitudes)

    def test_cnot_truth_table(self):
        for src, dst in [("00", "00"), ("01", "01"), ("10", "11"), ("11", "10")]:
            out = apply_unitary(basis_state(src), CNOT, [0, 1])
            np.testing.assert_array_equal(out.amplitudes, basis_state(dst).amplitudes)

    def test_cnot_reversed_targets(self):
        out = apply_unitary(basis_state("01"), CNOT, [1, 0])
        np.testing.assert_array_equal(out.amplitudes, basis_state("11").amplitudes)

    def test_cnot_on_equatorial_pair(self):
        # CNOT(|e_t1>|e_t2>) = (|e_{t1+t2}>|0> + e^{i t2} |e_{t1-t2}>|1>) / sqrt(2)
        t1, t2 = 0.7, -1.3
        out = apply_unitary(tensor(equatorial_state(t1), equatorial_state(t2)), CNOT, [0, 1])
        expected = (
            tensor(equatorial_state(t1 + t2), basis_state("0")).amplitudes
            + np.exp(1j * t2) * tensor(equatorial_state(t1 - t2), basis_state("1")).amplitudes
        ) / math.sqrt(2)
        np.testing.assert_allclose(out.amplitudes, expected, atol=1e-12)

    def test_matches_kron_construction(self):
        rng = np.random.default_rng(3)
        psi = random_state(rng, 3)
        u = random_unitary(rng, 2)
        full = np.kron(np.kron(IDENTITY2, u), IDENTITY2)
        np.testing.assert_allclose(apply_unitary(psi, u, [1]).amplitudes, full @ psi.amplitudes, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 5))
    def test_norm_preserved(self, seed, n):
        rng = np.random.default_rng(seed)
        psi = random_state(rng, n)
        targets = list(rng.choice(n, size=2, replace=False))
        out = apply_unitary(psi, random_unitary(rng, 4), targets)
        assert abs(out.norm - 1) < 1e-12

    def test_rejects_bad_input(self):
        s = tensor(basis_state("0"), basis_state("0"))
        with pytest.raises(ValueError):
            apply_unitary(s, np.array([[1, 1], [0, 1]]), [0])
        with pytest.raises(IndexError):
            apply_unitary(s, HADAMARD, [2])
        with pytest.raises(ValueError):
            apply_unitary(s, CNOT, [0, 0])


class TestMeasurement:
    def test_basis_state(self):
        out = measure_projective(basis_state("0"), 0)
        assert out[0].probability == 1.0 and out[0].valid
        assert out[1].probability == 0.0 and not out[1].valid
        assert out[1].post_state.norm == 0.0

    def test_equatorial_is_fair(self):
        out = measure_projective(equatorial_state(1.1), 0)
        assert [o.probability for o in out] == pytest.approx([0.5, 0.5], abs=1e-15)

    def test_after_cnot(self):
        t1, t2 = 0.4, 1.5
        psi = apply_unitary(tensor(equatorial_state(t1), equatorial_state(t2)), CNOT, [0, 1])
        o0, o1 = measure_projective(psi, 1)
        assert o0.probability == pytest.approx(0.5, abs=1e-12)
        assert o1.probability == pytest.approx(0.5, abs=1e-12)
        assert equal_up_to_phase(o0.post_state, tensor(equatorial_state(t1 + t2), basis_state("0")))
        assert equal_up_to_phase(o1.post_state, tensor(equatorial_state(t1 - t2), basis_state("1")))

    def test_kraus_identity(self):
        s = equatorial_state(0.2)
        (o,) = apply_kraus(s, [IDENTITY2])
        assert o.probability == pytest.approx(1.0)
        np.testing.assert_allclose(o.post_state.amplitudes, s.amplitudes)

    def test_kraus_projectors_match_projective(self):
        rng = np.random.default_rng(11)
        psi = random_state(rng, 1)
        a = apply_kraus(psi, PROJECTORS)
        b = measure_projective(psi, 0)
        for x, y in zip(a, b):
            assert x.probability == pytest.approx(y.probability, abs=1e-15)
            assert equal_up_to_phase(x.post_state, y.post_state)

    def test_kraus_completeness_violation(self):
        with pytest.raises(CompletenessError) as info:
            apply_kraus(equatorial_state(0), [PROJECTORS[0]])
        assert info.value.residual == pytest.approx(1.0)

    def test_kraus_support_restriction(self):
        # operators complete only on span{|0>, |2>}
        m = np.diag([1.0, 0.0, 1.0, 0.0]).astype(complex)
        s = StateVector(np.array([1, 0, 1, 0]) / math.sqrt(2))
        with pytest.raises(CompletenessError):
            apply_kraus(s, [m])
        (o,) = apply_kraus(s, [m], support=[0, 2])
        assert o.probability == pytest.approx(1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 2 * math.pi))
    def test_global_phase_invariance(self, seed, phase):
        rng = np.random.default_rng(seed)
        psi = random_state(rng, 2)
        shifted = StateVector(psi.amplitudes * np.exp(1j * phase))
        for q in (0, 1):
            a = [o.probability for o in measure_projective(psi, q)]
            b = [o.probability for o in measure_projective(shifted, q)]
            np.testing.assert_allclose(a, b, atol=1e-14)
        assert fidelity(psi, shifted) == pytest.approx(1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_born_completeness(self, seed):
        rng = np.random.default_rng(seed)
        psi = random_state(rng, 3)
        for q in range(3):
            assert abs(sum(o.probability for o in measure_projective(psi, q)) - 1) < 1e-10


def test_tensor_all_order():
    s = tensor_all([basis_state("1"), basis_state("0"), basis_state("1")])
    np.testing.assert_array_equal(s.amplitudes, basis_state("101").amplitudes)
