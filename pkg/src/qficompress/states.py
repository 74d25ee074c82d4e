"""Dense pure-state simulation.

Amplitude ordering is row-major with qubit 0 as the most significant bit, so
``|q0 q1 ... q_{n-1}>`` lives at index ``q0 * 2**(n-1) + ... + q_{n-1}``.
Global phases are never canonicalized; use :func:`fidelity` or
:func:`equal_up_to_phase` to compare states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .constants import TOL

TWO_PI = 2.0 * math.pi


class CompletenessError(ValueError):
    """Kraus operators do not resolve the identity."""

    def __init__(self, residual: float):
        super().__init__(f"sum_k M_k^dag M_k deviates from identity by {residual:.3e}")
        self.residual = residual


def _qubits_for_dim(dim: int) -> int | None:
    if dim >= 1 and dim & (dim - 1) == 0:
        return dim.bit_length() - 1
    return None


@dataclass(frozen=True, eq=False)
class StateVector:
    """Immutable complex amplitude vector.

    The amplitudes are not forced to unit norm on construction (a discarded
    measurement branch carries a zero vector); call :meth:`normalize`.
    """

    amplitudes: np.ndarray
    qubit_count: int | None = field(default=None)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size == 0:
            raise ValueError("state must have at least one amplitude")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        inferred = _qubits_for_dim(amps.size)
        if self.qubit_count is None:
            object.__setattr__(self, "qubit_count", inferred)
        elif self.qubit_count != inferred:
            raise ValueError(f"qubit_count={self.qubit_count} inconsistent with dimension {amps.size}")

    @property
    def basis_dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, atol: float = TOL.norm) -> bool:
        return abs(self.norm**2 - 1.0) <= atol

    def normalize(self) -> "StateVector":
        n = self.norm
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / n)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __repr__(self):
        return f"StateVector(dim={self.basis_dim}, amplitudes={np.array2string(self.amplitudes, precision=4)})"


@dataclass(frozen=True)
class EquatorialPhase:
    """Phase on the Bloch-sphere equator, stored in [0, 2pi)."""

    theta: float

    def __post_init__(self):
        t = math.fmod(float(self.theta), TWO_PI)
        if t < 0.0:
            t += TWO_PI
        if t >= TWO_PI:
            t = 0.0
        object.__setattr__(self, "theta", t)

    def __add__(self, other: PhaseLike) -> "EquatorialPhase":
        return EquatorialPhase(self.theta + as_phase(other).theta)

    def __sub__(self, other: PhaseLike) -> "EquatorialPhase":
        return EquatorialPhase(self.theta - as_phase(other).theta)

    def __neg__(self) -> "EquatorialPhase":
        return EquatorialPhase(-self.theta)

    def __float__(self):
        return self.theta

    def distance(self, other: PhaseLike) -> float:
        """Shortest angular distance on the circle."""
        d = abs(self.theta - as_phase(other).theta)
        return min(d, TWO_PI - d)

    def isclose(self, other: PhaseLike, atol: float = TOL.algebraic) -> bool:
        return self.distance(other) <= atol

    @property
    def degrees(self) -> float:
        return math.degrees(self.theta)


PhaseLike = Union[float, EquatorialPhase]


def as_phase(value: PhaseLike) -> EquatorialPhase:
    return value if isinstance(value, EquatorialPhase) else EquatorialPhase(float(value))


@dataclass(frozen=True)
class MeasurementOutcome:
    label: int
    probability: float
    post_state: StateVector
    valid: bool = True


# Gates used throughout. CNOT has qubit 0 (of the pair) as control.
IDENTITY2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
    dtype=complex,
)
PROJECTORS = (
    np.array([[1, 0], [0, 0]], dtype=complex),
    np.array([[0, 0], [0, 1]], dtype=complex),
)


def equatorial_state(phase: PhaseLike) -> StateVector:
    """(|0> + e^{i theta}|1>)/sqrt(2)."""
    t = as_phase(phase).theta
    return StateVector(np.array([1.0, np.exp(1j * t)]) / math.sqrt(2.0))


def basis_state(bits: str | Sequence[int]) -> StateVector:
    """Computational basis state from a bit string, e.g. ``basis_state("10")``."""
    bits = [int(b) for b in bits]
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"bits must be 0/1, got {bits}")
    amps = np.zeros(2 ** len(bits), dtype=complex)
    amps[int("".join(map(str, bits)), 2) if bits else 0] = 1.0
    return StateVector(amps)


def tensor(a: StateVector, b: StateVector) -> StateVector:
    dim = a.basis_dim * b.basis_dim
    if dim > 2**TOL.max_qubits:
        raise OverflowError(f"tensor product of dimension {dim} exceeds {TOL.max_qubits} qubits")
    return StateVector(np.kron(a.amplitudes, b.amplitudes))


def tensor_all(states: Sequence[StateVector]) -> StateVector:
    if not states:
        raise ValueError("need at least one state")
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def _require_qubits(state: StateVector) -> int:
    if state.qubit_count is None:
        raise ValueError(f"state of dimension {state.basis_dim} is not a qubit register")
    return state.qubit_count


def is_unitary(u: np.ndarray, atol: float = TOL.algebraic) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=atol, rtol=0)


def apply_unitary(state: StateVector, u: np.ndarray, target_qubits: Sequence[int]) -> StateVector:
    """Apply ``u`` to ``target_qubits`` (first target = most significant bit of ``u``)."""
    n = _require_qubits(state)
    targets = [int(t) for t in target_qubits]
    u = np.asarray(u, dtype=complex)
    k = len(targets)
    if u.shape != (2**k, 2**k):
        raise ValueError(f"matrix of shape {u.shape} does not act on {k} qubits")
    if not is_unitary(u):
        raise ValueError("matrix is not unitary within tolerance")
    if len(set(targets)) != k:
        raise ValueError(f"duplicate target qubits {targets}")
    if any(t < 0 or t >= n for t in targets):
        raise IndexError(f"targets {targets} out of range for {n} qubits")

    psi = state.amplitudes.reshape((2,) * n)
    gate = u.reshape((2,) * (2 * k))
    # contract gate input axes with the target axes, then restore axis order
    out = np.tensordot(gate, psi, axes=(list(range(k, 2 * k)), targets))
    out = np.moveaxis(out, list(range(k)), targets)
    return StateVector(out.reshape(-1))


def _zero_outcome(label: int, dim: int) -> MeasurementOutcome:
    return MeasurementOutcome(label, 0.0, StateVector(np.zeros(dim, dtype=complex)), valid=False)


def measure_projective(state: StateVector, target_qubit: int) -> list[MeasurementOutcome]:
    """Computational-basis measurement of one qubit, keeping both branches."""
    n = _require_qubits(state)
    if not 0 <= target_qubit < n:
        raise IndexError(f"qubit {target_qubit} out of range for {n} qubits")
    psi = state.amplitudes.reshape((2,) * n)
    outcomes = []
    for bit in (0, 1):
        branch = np.zeros_like(psi)
        idx = [slice(None)] * n
        idx[target_qubit] = bit
        branch[tuple(idx)] = psi[tuple(idx)]
        vec = branch.reshape(-1)
        p = float(np.vdot(vec, vec).real)
        if p < TOL.prob_floor:
            outcomes.append(_zero_outcome(bit, state.basis_dim))
        else:
            outcomes.append(MeasurementOutcome(bit, p, StateVector(vec / math.sqrt(p))))
    return outcomes


def completeness_residual(operators: Sequence[np.ndarray], support: Sequence[int] | None = None) -> float:
    """Spectral-norm distance of sum_k M_k^dag M_k from identity, restricted to ``support``."""
    total = sum(np.asarray(m).conj().T @ np.asarray(m) for m in operators)
    total = np.asarray(total, dtype=complex)
    if support is not None:
        idx = np.asarray(support, dtype=int)
        total = total[np.ix_(idx, idx)]
    return float(np.linalg.norm(total - np.eye(total.shape[0]), ord=2))


def apply_kraus(
    state: StateVector,
    operators: Sequence[np.ndarray],
    support: Sequence[int] | None = None,
) -> list[MeasurementOutcome]:
    """Generalized measurement; outcome ``k`` is labelled by its position in ``operators``.

    ``support`` restricts the completeness check to a subset of basis indices
    (the state is expected to live there).
    """
    ops = [np.asarray(m, dtype=complex) for m in operators]
    dim = state.basis_dim
    for m in ops:
        if m.shape != (dim, dim):
            raise ValueError(f"operator shape {m.shape} does not match state dimension {dim}")
    residual = completeness_residual(ops, support)
    if residual > TOL.algebraic:
        raise CompletenessError(residual)

    outcomes = []
    for k, m in enumerate(ops):
        vec = m @ state.amplitudes
        p = float(np.vdot(vec, vec).real)
        if p < TOL.prob_floor:
            outcomes.append(_zero_outcome(k, dim))
        else:
            outcomes.append(MeasurementOutcome(k, p, StateVector(vec / math.sqrt(p))))
    return outcomes


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2 for normalized inputs; insensitive to global phase."""
    return abs(a.inner(b)) ** 2


def equal_up_to_phase(a: StateVector, b: StateVector, atol: float = TOL.algebraic) -> bool:
    if a.basis_dim != b.basis_dim:
        return False
    return abs(1.0 - fidelity(a, b)) <= atol


def align_global_phase(state: StateVector, reference: StateVector) -> StateVector:
    """Multiply ``state`` by the global phase that best matches ``reference``."""
    overlap = state.inner(reference)
    if abs(overlap) == 0.0:
        return state
    return StateVector(state.amplitudes * (overlap / abs(overlap)))
