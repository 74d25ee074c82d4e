"""Quantum Fisher information of phase-imprinted pure states.

Convention: F = 4 Var(H), so ``|e_theta>`` carries 1 rad^-2 and
``|e_{2 theta}>`` carries 4 rad^-2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.linalg import expm

from .constants import TOL
from .states import StateVector

Family = Callable[[float], StateVector]


@dataclass(frozen=True, eq=False)
class EnergyDistribution:
    """Probability distribution over distinct generator eigenvalues."""

    energies: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        e = np.array(self.energies, dtype=float).reshape(-1)
        p = np.array(self.probabilities, dtype=float).reshape(-1)
        if e.size == 0 or e.size != p.size:
            raise ValueError("energies and probabilities must be non-empty and of equal length")
        if not np.all(np.isfinite(e)) or not np.all(np.isfinite(p)):
            raise ValueError("non-finite entries in distribution")
        if np.any(p < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(p.sum() - 1.0) > TOL.norm:
            raise ValueError(f"probabilities sum to {p.sum():.15g}, not 1")
        if np.unique(e).size != e.size:
            raise ValueError("energies must be distinct")
        e.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "probabilities", p)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]], renormalize: bool = False) -> "EnergyDistribution":
        pairs = list(pairs)
        e = np.array([x for x, _ in pairs], dtype=float)
        p = np.array([y for _, y in pairs], dtype=float)
        if renormalize:
            p = p / p.sum()
        return cls(e, p)

    @classmethod
    def point_mass(cls, energy: float) -> "EnergyDistribution":
        return cls([energy], [1.0])

    @property
    def size(self) -> int:
        return self.energies.size

    @property
    def mean(self) -> float:
        return float(np.dot(self.probabilities, self.energies))

    @property
    def variance(self) -> float:
        return float(np.dot(self.probabilities, (self.energies - self.mean) ** 2))

    def pruned(self, floor: float = TOL.prob_floor) -> "EnergyDistribution":
        """Drop entries with probability below ``floor`` and renormalize."""
        keep = self.probabilities >= floor
        p = self.probabilities[keep]
        return EnergyDistribution(self.energies[keep], p / p.sum())

    def state(self, theta: float) -> StateVector:
        """sum_E sqrt(p(E)) e^{-i theta E} |E>, in the order of ``energies``."""
        return StateVector(np.sqrt(self.probabilities) * np.exp(-1j * theta * self.energies))

    def family(self) -> Family:
        return self.state

    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.energies.tolist(), self.probabilities.tolist()))

    def __repr__(self):
        return f"EnergyDistribution({self.pairs()})"


@dataclass(frozen=True, eq=False)
class Generator:
    """Self-adjoint generator given by its spectral data.

    ``eigenvectors`` holds orthonormal columns; ``None`` means the
    computational basis (H diagonal).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None

    def __post_init__(self):
        ev = np.array(self.eigenvalues, dtype=float).reshape(-1)
        object.__setattr__(self, "eigenvalues", ev)
        if self.eigenvectors is not None:
            vecs = np.array(self.eigenvectors, dtype=complex)
            if vecs.shape != (ev.size, ev.size):
                raise ValueError(f"eigenvector matrix shape {vecs.shape} does not match {ev.size} eigenvalues")
            if not np.allclose(vecs.conj().T @ vecs, np.eye(ev.size), atol=TOL.algebraic, rtol=0):
                raise ValueError("eigenvectors are not orthonormal")
            object.__setattr__(self, "eigenvectors", vecs)

    @classmethod
    def from_hermitian(cls, h: np.ndarray) -> "Generator":
        h = np.asarray(h, dtype=complex)
        if not np.allclose(h, h.conj().T, atol=TOL.algebraic, rtol=0):
            raise ValueError("matrix is not self-adjoint")
        vals, vecs = np.linalg.eigh(h)
        return cls(vals, vecs)

    @classmethod
    def excitation_number(cls, n_qubits: int) -> "Generator":
        """H = sum_j |1><1|_j, which imprints e^{-i theta} per excited qubit."""
        idx = np.arange(2**n_qubits)
        return cls(np.array([bin(i).count("1") for i in idx], dtype=float))

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def matrix(self) -> np.ndarray:
        if self.eigenvectors is None:
            return np.diag(self.eigenvalues).astype(complex)
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def evolve(self, state: StateVector, theta: float) -> StateVector:
        """e^{-i theta H}|state>."""
        if self.eigenvectors is None:
            return StateVector(np.exp(-1j * theta * self.eigenvalues) * state.amplitudes)
        v = self.eigenvectors
        coeffs = v.conj().T @ state.amplitudes
        return StateVector(v @ (np.exp(-1j * theta * self.eigenvalues) * coeffs))

    def unitary(self, theta: float) -> np.ndarray:
        return expm(-1j * theta * self.matrix())

    def family(self, state: StateVector) -> Family:
        return lambda theta: self.evolve(state, theta)

    def decompose(self, state: StateVector, atol: float = 1e-9) -> tuple[EnergyDistribution, np.ndarray]:
        """Energy distribution of ``state`` and the normalized |E> vectors.

        Degenerate eigenvalues (within ``atol``) are merged: |E> is the
        normalized projection of ``state`` onto the eigenspace. Returns
        the distribution and a matrix whose columns are |E> (same order).
        Eigenspaces the state does not touch are omitted.
        """
        vecs = np.eye(self.dim, dtype=complex) if self.eigenvectors is None else self.eigenvectors
        coeffs = vecs.conj().T @ state.amplitudes
        order = np.argsort(self.eigenvalues, kind="stable")
        groups: list[list[int]] = []
        for i in order:
            if groups and abs(self.eigenvalues[i] - self.eigenvalues[groups[-1][0]]) <= atol:
                groups[-1].append(i)
            else:
                groups.append([i])

        energies, probs, columns = [], [], []
        for g in groups:
            proj = vecs[:, g] @ coeffs[g]
            weight = float(np.vdot(proj, proj).real)
            if weight < TOL.prob_floor:
                continue
            energies.append(float(np.mean(self.eigenvalues[g])))
            probs.append(weight)
            columns.append(proj / np.sqrt(weight))
        p = np.array(probs)
        return EnergyDistribution(energies, p / p.sum()), np.column_stack(columns)


def _check_normalized(psi: StateVector, where: str) -> None:
    if not psi.is_normalized(TOL.algebraic):
        raise ValueError(f"family returned a non-normalized state at {where} (norm {psi.norm:.12g})")


def _central_derivative(family: Family, theta: float, step: float) -> np.ndarray:
    plus, minus = family(theta + step), family(theta - step)
    _check_normalized(plus, f"theta={theta + step}")
    _check_normalized(minus, f"theta={theta - step}")
    return (plus.amplitudes - minus.amplitudes) / (2.0 * step)


def qfi_derivative(family: Family, theta: float, step: float = 1e-5, richardson: bool = False) -> float:
    """4(<dPsi|dPsi> - |<Psi|dPsi>|^2) with a central finite-difference derivative.

    With ``richardson=True`` the derivative is extrapolated from steps h and
    h/2, lowering the truncation error from O(h^2) to O(h^4).
    """
    if not 0.0 < step <= 1e-3:
        raise ValueError(f"step must lie in (0, 1e-3], got {step}")
    psi = family(theta)
    _check_normalized(psi, f"theta={theta}")
    d = _central_derivative(family, theta, step)
    if richardson:
        d_half = _central_derivative(family, theta, step / 2.0)
        d = (4.0 * d_half - d) / 3.0
    overlap = np.vdot(psi.amplitudes, d)
    return float(4.0 * (np.vdot(d, d).real - abs(overlap) ** 2))


def qfi_variance(dist: EnergyDistribution) -> float:
    """4 * (sum p E^2 - (sum p E)^2), evaluated as a centred second moment."""
    return 4.0 * dist.variance


def qfi_pure(state: StateVector, generator: Generator) -> float:
    """4 Var_psi(H) for a normalized state."""
    h = generator.matrix()
    psi = state.amplitudes
    hpsi = h @ psi
    mean = np.vdot(psi, hpsi).real
    return float(4.0 * (np.vdot(hpsi, hpsi).real - mean**2))


def average_qfi(outcomes: Sequence[tuple[float, EnergyDistribution]]) -> float:
    """sum_k p_k F_k over measurement outcomes ``(p_k, distribution_k)``."""
    total = sum(p for p, _ in outcomes)
    if abs(total - 1.0) > TOL.algebraic:
        raise ValueError(f"outcome probabilities sum to {total:.15g}, not 1")
    return float(sum(p * qfi_variance(dist) for p, dist in outcomes))


def qcrb_variance(qfi: float, trials: int) -> float:
    """Quantum Cramer-Rao bound on Var(theta) for ``trials`` independent probes."""
    if qfi <= 0:
        raise ValueError(f"QFI must be positive, got {qfi}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    return 1.0 / (qfi * trials)
