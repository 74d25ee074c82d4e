"""QFI compression protocols.

Two families live here:

* the CNOT sum/difference block and its cascade over N equatorial qubits,
  tracked symbolically (phases as reals mod 2pi) with statevector oracles
  alongside;
* the general single-qubit compression of an arbitrary phase-imprinted pure
  state: split the energy distribution into mean-preserving components of
  support at most two, turn the split into diagonal Kraus operators, and
  re-encode each post-measurement state into one qubit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .constants import TOL
from .qfi import EnergyDistribution, qfi_variance
from .states import (
    CNOT,
    EquatorialPhase,
    PhaseLike,
    StateVector,
    apply_kraus,
    apply_unitary,
    as_phase,
    completeness_residual,
    equatorial_state,
    measure_projective,
    tensor_all,
)

MAX_CASCADE_QUBITS = 20


# ---------------------------------------------------------------------------
# CNOT sum/difference block and cascade


class BlockOutcome(NamedTuple):
    bit: int
    probability: float
    phase: EquatorialPhase


def two_qubit_block(theta1: PhaseLike, theta2: PhaseLike) -> list[BlockOutcome]:
    """CNOT then target measurement: outcome 0 adds the phases, outcome 1 subtracts."""
    t1, t2 = as_phase(theta1), as_phase(theta2)
    return [BlockOutcome(0, 0.5, t1 + t2), BlockOutcome(1, 0.5, t1 - t2)]


def simulate_two_qubit_block(theta1: PhaseLike, theta2: PhaseLike) -> list[tuple[int, float, StateVector]]:
    """Statevector version of :func:`two_qubit_block`.

    Returns ``(bit, probability, control_qubit_state)`` with the control state
    read off the post-measurement register (global phase kept).
    """
    psi = apply_unitary(tensor_all([equatorial_state(theta1), equatorial_state(theta2)]), CNOT, [0, 1])
    out = []
    for o in measure_projective(psi, 1):
        control = o.post_state.amplitudes.reshape(2, 2)[:, o.label]
        out.append((o.label, o.probability, StateVector(control)))
    return out


@dataclass(frozen=True)
class CascadeResult:
    outcome_bits: tuple[int, ...]  # m_2 .. m_N
    final_phase: EquatorialPhase
    probability: float
    k_zero_count: int

    @property
    def n_qubits(self) -> int:
        return len(self.outcome_bits) + 1

    @property
    def phase_multiplier(self) -> int:
        """Coefficient of theta in the output phase when all inputs share theta: 2k+2-N."""
        return 2 * self.k_zero_count + 2 - self.n_qubits

    @property
    def equal_phase_qfi(self) -> float:
        return float(self.phase_multiplier**2)

    def to_dict(self) -> dict:
        return {
            "bits": list(self.outcome_bits),
            "k": self.k_zero_count,
            "phase": self.final_phase.theta,
            "probability": self.probability,
            "qfi": self.equal_phase_qfi,
        }


def _check_cascade_size(n: int) -> None:
    if not 2 <= n <= MAX_CASCADE_QUBITS:
        raise ValueError(f"cascade needs 2 <= N <= {MAX_CASCADE_QUBITS}, got {n}")


def _cascade_phase(phases: Sequence[float], bits: Sequence[int]) -> float:
    return phases[0] + sum(-t if m else t for t, m in zip(phases[1:], bits))


def cascade_enumerate(phases: Sequence[PhaseLike]) -> list[CascadeResult]:
    """All 2^(N-1) branches of the CNOT cascade with qubit 1 as the control."""
    _check_cascade_size(len(phases))
    thetas = [as_phase(t).theta for t in phases]
    n_branches = 2 ** (len(thetas) - 1)
    p = 1.0 / n_branches
    return [
        CascadeResult(bits, EquatorialPhase(_cascade_phase(thetas, bits)), p, bits.count(0))
        for bits in itertools.product((0, 1), repeat=len(thetas) - 1)
    ]


def simulate_cascade(phases: Sequence[PhaseLike]) -> list[tuple[tuple[int, ...], float, StateVector]]:
    """Statevector oracle for the cascade: CNOT(0 -> j) for every j, then measure the targets.

    Returns ``(bits, probability, control_state)`` per branch in the same
    order as :func:`cascade_enumerate`.
    """
    n = len(phases)
    _check_cascade_size(n)
    psi = tensor_all([equatorial_state(t) for t in phases])
    for j in range(1, n):
        psi = apply_unitary(psi, CNOT, [0, j])

    branches = [((), 1.0, psi)]
    for j in range(1, n):
        nxt = []
        for bits, p, state in branches:
            for o in measure_projective(state, j):
                if o.valid:
                    nxt.append((bits + (o.label,), p * o.probability, o.post_state))
        branches = nxt

    out = []
    for bits, p, state in branches:
        flat = int("".join(map(str, bits)), 2)
        control = state.amplitudes.reshape(2, -1)[:, flat]
        out.append((bits, p, StateVector(control)))
    return out


@dataclass(frozen=True, eq=False)
class CascadeSample:
    n_qubits: int
    trials: int
    seed: int
    counts: np.ndarray  # indexed by branch, bits m_2..m_N read as a binary number

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.trials

    def k_counts(self) -> np.ndarray:
        """Counts of k (number of zero outcomes), k = 0..N-1."""
        m = self.n_qubits - 1
        ks = np.array([m - bin(i).count("1") for i in range(2**m)])
        return np.bincount(ks, weights=self.counts, minlength=m + 1).astype(np.int64)

    def mean_equal_phase_qfi(self) -> float:
        ks = np.arange(self.n_qubits)
        return float(np.dot(self.k_counts(), (2 * ks + 2 - self.n_qubits) ** 2) / self.trials)


def cascade_sample(phases: Sequence[PhaseLike], rng_seed: int, trials: int) -> CascadeSample:
    """Monte Carlo run of the cascade; every target outcome is a fair coin for equatorial inputs."""
    n = len(phases)
    _check_cascade_size(n)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(rng_seed)
    m = n - 1
    counts = np.zeros(2**m, dtype=np.int64)
    chunk = 1 << 20
    weights = 1 << np.arange(m - 1, -1, -1)
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        bits = rng.integers(0, 2, size=(size, m), dtype=np.int64)
        counts += np.bincount(bits @ weights, minlength=2**m)
        done += size
    return CascadeSample(n, trials, rng_seed, counts)


def classical_register_size(n: int) -> int:
    """ceil(log2 n) bits to store k, which takes n distinct values."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return (n - 1).bit_length()


# ---------------------------------------------------------------------------
# General compression


@dataclass(frozen=True)
class TwoPointComponent:
    weight: float
    energies: tuple[float, ...]
    conditionals: tuple[float, ...]

    @property
    def mean(self) -> float:
        return float(sum(e * q for e, q in zip(self.energies, self.conditionals)))

    @property
    def support_size(self) -> int:
        return len(self.energies)

    def distribution(self) -> EnergyDistribution:
        q = np.array(self.conditionals)
        return EnergyDistribution(self.energies, q / q.sum())

    def to_dict(self) -> dict:
        return {"weight": self.weight, "support": list(self.energies), "conditionals": list(self.conditionals)}


@dataclass(frozen=True, eq=False)
class CompressionEnsemble:
    components: tuple[TwoPointComponent, ...]
    measurement_ops: tuple[np.ndarray, ...]
    parent: EnergyDistribution

    @property
    def size(self) -> int:
        return len(self.components)

    def mixture(self) -> np.ndarray:
        """sum_k p_k p(E|k) on the parent's energy grid."""
        index = {e: i for i, e in enumerate(self.parent.energies.tolist())}
        total = np.zeros(self.parent.size)
        for c in self.components:
            for e, q in zip(c.energies, c.conditionals):
                total[index[e]] += c.weight * q
        return total

    def mixture_residual(self) -> float:
        return float(np.max(np.abs(self.mixture() - self.parent.probabilities)))

    def completeness_residual(self) -> float:
        return completeness_residual(self.measurement_ops)

    def average_qfi(self) -> float:
        return float(sum(c.weight * qfi_variance(c.distribution()) for c in self.components))

    def to_dict(self) -> dict:
        return {
            "parent": {"energies": self.parent.energies.tolist(), "probabilities": self.parent.probabilities.tolist()},
            "epsilon": self.parent.mean,
            "components": [c.to_dict() for c in self.components],
            "measurement_diagonals": [np.real(np.diag(m)).tolist() for m in self.measurement_ops],
        }


def _two_point(e_lo: float, e_hi: float, mean: float) -> tuple[float, float]:
    span = e_hi - e_lo
    return (e_hi - mean) / span, (mean - e_lo) / span


def _pick(candidates: list[int], residual: np.ndarray, energies: np.ndarray) -> int:
    # largest residual mass, ties to the smaller energy
    return min(candidates, key=lambda i: (-residual[i], energies[i]))


def decompose_two_point(parent: EnergyDistribution) -> CompressionEnsemble:
    """Split ``parent`` into mean-preserving components supported on at most two energies.

    Greedy pairing: take the heaviest remaining energy at or below the mean
    and the heaviest one above it, extract as much of the unique two-point
    distribution with the parent mean as the residual allows, and repeat.
    A remaining point sitting exactly at the mean becomes a singleton.
    Every extraction empties at least one support point, and the last one
    empties two, so at most d-1 components are produced (d >= 2).
    """
    dist = parent.pruned()
    e = dist.energies
    eps = dist.mean
    scale = max(1.0, float(np.max(np.abs(e - eps))))
    at_mean_tol = 1e-12 * scale
    residual = dist.probabilities.copy()
    alive = residual > 0

    components: list[TwoPointComponent] = []
    while alive.any():
        idx = np.flatnonzero(alive)
        centre = [i for i in idx if abs(e[i] - eps) <= at_mean_tol]
        if centre:
            i = centre[0]
            components.append(TwoPointComponent(float(residual[i]), (float(e[i]),), (1.0,)))
            residual[i] = 0.0
            alive[i] = False
            continue

        lows = [i for i in idx if e[i] < eps]
        highs = [i for i in idx if e[i] > eps]
        if not lows or not highs:
            leftover = float(residual[idx].sum())
            if leftover > 1e-12:
                raise ArithmeticError(f"residual mass {leftover:.3e} left on one side of the mean")
            break
        a, b = _pick(lows, residual, e), _pick(highs, residual, e)
        qa, qb = _two_point(e[a], e[b], eps)

        if len(lows) == 1 and len(highs) == 1:
            w = float(residual[a] + residual[b])
            spent = [a, b]
        else:
            wa, wb = residual[a] / qa, residual[b] / qb
            w = float(min(wa, wb))
            residual[a] -= w * qa
            residual[b] -= w * qb
            spent = [a] if wa < wb else [b]
            for i in (a, b):
                if residual[i] <= TOL.prob_floor:
                    spent.append(i)
        components.append(TwoPointComponent(w, (float(e[a]), float(e[b])), (float(qa), float(qb))))
        for i in set(spent):
            residual[i] = 0.0
            alive[i] = False

    ops = build_measurement_ops(components, dist)
    return CompressionEnsemble(tuple(components), tuple(ops), dist)


def conditional_outcome_probabilities(
    components: Sequence[TwoPointComponent], parent: EnergyDistribution
) -> np.ndarray:
    """Matrix of p(k|E) = p(E|k) p_k / p(E), shape (K, d)."""
    if np.any(parent.probabilities <= 0):
        raise ValueError("parent distribution has zero-probability entries; prune it first")
    index = {e: i for i, e in enumerate(parent.energies.tolist())}
    table = np.zeros((len(components), parent.size))
    for k, c in enumerate(components):
        for energy, q in zip(c.energies, c.conditionals):
            if energy not in index:
                raise ValueError(f"component energy {energy} is not in the parent support")
            i = index[energy]
            table[k, i] = c.weight * q / parent.probabilities[i]
    return table


def build_measurement_ops(components: Sequence[TwoPointComponent], parent: EnergyDistribution) -> list[np.ndarray]:
    table = conditional_outcome_probabilities(components, parent)
    # rounding can push p(k|E) a hair below zero or the column sums off 1
    table = np.clip(table, 0.0, None)
    table /= table.sum(axis=0, keepdims=True)
    return [np.diag(np.sqrt(row)).astype(complex) for row in table]


def build_measurement(ensemble: CompressionEnsemble) -> list[np.ndarray]:
    """Diagonal Kraus operators M_k = sum_E sqrt(p(k|E)) |E><E| in the parent's energy basis."""
    return build_measurement_ops(ensemble.components, ensemble.parent)


def lift_measurement(ops: Sequence[np.ndarray], energy_vectors: np.ndarray) -> list[np.ndarray]:
    """Express energy-basis Kraus operators on the full Hilbert space.

    ``energy_vectors`` has the normalized |E> as columns (see
    :meth:`Generator.decompose`); the lifted operators act as zero outside
    their span.
    """
    v = np.asarray(energy_vectors, dtype=complex)
    return [v @ np.asarray(m) @ v.conj().T for m in ops]


def encode_to_qubit(
    post_state: StateVector,
    component: TwoPointComponent,
    energies: Sequence[float],
) -> tuple[StateVector, tuple[float, float]]:
    """Map the component's (at most) two energy levels onto |0>, |1>.

    ``energies`` labels the basis of ``post_state``. Returns the qubit and the
    effective generator diagonal (E0, E1); a point mass encodes to |0> with
    E1 = E0.
    """
    energies = list(map(float, energies))
    if post_state.basis_dim != len(energies):
        raise ValueError("post_state dimension does not match the energy labels")
    try:
        idx = [energies.index(x) for x in component.energies]
    except ValueError as exc:
        raise ValueError("component energy missing from the energy labels") from exc
    amps = post_state.amplitudes
    outside = np.ones(len(energies), dtype=bool)
    outside[idx] = False
    leak = float(np.sum(np.abs(amps[outside]) ** 2))
    if leak > TOL.algebraic:
        raise ValueError(f"post_state leaks {leak:.3e} of its norm outside the component support")
    if len(idx) == 1:
        return StateVector([amps[idx[0]], 0.0]), (component.energies[0], component.energies[0])
    return StateVector([amps[idx[0]], amps[idx[1]]]), (component.energies[0], component.energies[1])


def encoded_qubit_qfi(qubit: StateVector, effective_energies: tuple[float, float]) -> float:
    p = qubit.probabilities() / qubit.norm**2
    e = np.asarray(effective_energies, dtype=float)
    mean = float(np.dot(p, e))
    return 4.0 * float(np.dot(p, (e - mean) ** 2))


@dataclass(frozen=True)
class CompressedBranch:
    outcome: int
    probability: float
    qubit: StateVector
    effective_energies: tuple[float, float]
    qfi: float


def compress(parent: EnergyDistribution, theta: float, ensemble: CompressionEnsemble | None = None) -> list[CompressedBranch]:
    """Run the whole pipeline on sum_E sqrt(p(E)) e^{-i theta E}|E>.

    Measures with the ensemble's Kraus operators and re-encodes every
    non-empty outcome into a qubit.
    """
    ens = ensemble if ensemble is not None else decompose_two_point(parent)
    psi = ens.parent.state(theta)
    branches = []
    for o, comp in zip(apply_kraus(psi, ens.measurement_ops), ens.components):
        if not o.valid:
            continue
        qubit, eff = encode_to_qubit(o.post_state, comp, ens.parent.energies)
        branches.append(CompressedBranch(o.label, o.probability, qubit, eff, encoded_qubit_qfi(qubit, eff)))
    return branches


def is_extreme(component: TwoPointComponent, mean: float, atol: float = TOL.algebraic) -> bool:
    """Check that the component is an extreme point of the mean-constrained simplex.

    It is extreme iff no nonzero f supported on it satisfies sum f = 0 and
    sum E f = 0, i.e. iff the 2 x s matrix [1; E] has full column rank s.
    """
    if abs(component.mean - mean) > atol or abs(sum(component.conditionals) - 1.0) > TOL.norm:
        return False
    e = np.asarray(component.energies, dtype=float)
    constraints = np.vstack([np.ones_like(e), e])
    return int(np.linalg.matrix_rank(constraints)) == e.size


def binomial_average_qfi(n: int) -> float:
    """sum_k B_{N-1,k} (2k+2-N)^2, evaluated from the binomial weights directly."""
    m = n - 1
    return sum(math.comb(m, k) * (2 * k + 2 - n) ** 2 for k in range(n)) / 2**m
