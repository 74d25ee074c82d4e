"""Dual-rail two-photon linear optics and the fusion-gate compression scheme.

Polarization qubits use |H> = |0> and |V> = |1>, so an equatorial photon is
(|H> + e^{i theta}|V>)/sqrt(2). Input ports are paths 1 and 2, PBS outputs
are paths 3 and 4.

Two-photon states are stored in the orthonormal Fock basis: a pair of
distinct modes ``(m, n)`` is |1_m 1_n>, a repeated mode ``(m, m)`` is
|2_m> = (a_m^dag)^2 |vac> / sqrt(2).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Literal, Mapping, NamedTuple

import numpy as np

from .constants import TOL
from .states import (
    PAULI_X,
    EquatorialPhase,
    PhaseLike,
    StateVector,
    as_phase,
    equal_up_to_phase,
    equatorial_state,
)

Polarization = Literal["H", "V"]
SQRT2 = math.sqrt(2.0)


class OpticalMode(NamedTuple):
    path: int
    polarization: str

    def __str__(self):
        return f"{self.polarization}{self.path}"


def H(path: int) -> OpticalMode:
    return OpticalMode(path, "H")


def V(path: int) -> OpticalMode:
    return OpticalMode(path, "V")


ModePair = tuple[OpticalMode, OpticalMode]
ModeMap = Mapping[OpticalMode, Mapping[OpticalMode, complex]]


def _key(a: OpticalMode, b: OpticalMode) -> ModePair:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True, eq=False)
class TwoPhotonState:
    amplitudes: Mapping[ModePair, complex] = field(default_factory=dict)

    def __post_init__(self):
        clean: dict[ModePair, complex] = {}
        for (a, b), amp in self.amplitudes.items():
            k = _key(OpticalMode(*a), OpticalMode(*b))
            clean[k] = clean.get(k, 0j) + complex(amp)
        object.__setattr__(self, "amplitudes", {k: v for k, v in clean.items() if v != 0})

    @classmethod
    def product(cls, first: Mapping[OpticalMode, complex], second: Mapping[OpticalMode, complex]) -> "TwoPhotonState":
        """One photon in each single-photon superposition (creation operators multiplied)."""
        return cls._from_polynomial(
            _accumulate((_key(m, n), a * b) for m, a in first.items() for n, b in second.items())
        )

    @classmethod
    def _from_polynomial(cls, coeffs: Mapping[ModePair, complex]) -> "TwoPhotonState":
        return cls({k: c * (SQRT2 if k[0] == k[1] else 1.0) for k, c in coeffs.items()})

    def _polynomial(self) -> dict[ModePair, complex]:
        return {k: a / (SQRT2 if k[0] == k[1] else 1.0) for k, a in self.amplitudes.items()}

    @property
    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def modes(self) -> set[OpticalMode]:
        return {m for pair in self.amplitudes for m in pair}

    def transform(self, mode_map: ModeMap) -> "TwoPhotonState":
        """Apply a linear single-photon map a_m^dag -> sum_n U[m][n] a_n^dag.

        Modes absent from ``mode_map`` are left untouched.
        """
        def image(m: OpticalMode) -> Mapping[OpticalMode, complex]:
            return mode_map.get(m, {m: 1.0})

        terms = (
            (_key(x, y), c * cx * cy)
            for (m, n), c in self._polynomial().items()
            for x, cx in image(m).items()
            for y, cy in image(n).items()
        )
        return TwoPhotonState._from_polynomial(_accumulate(terms))

    def project(self, keep) -> "TwoPhotonState":
        """Unnormalized restriction to basis pairs where ``keep(pair)`` holds."""
        return TwoPhotonState({k: a for k, a in self.amplitudes.items() if keep(k)})

    def probability(self, keep) -> float:
        return self.project(keep).norm ** 2

    def __iter__(self) -> Iterator[tuple[ModePair, complex]]:
        return iter(self.amplitudes.items())

    def isclose(self, other: "TwoPhotonState", atol: float = TOL.norm) -> bool:
        keys = set(self.amplitudes) | set(other.amplitudes)
        return all(abs(self.amplitudes.get(k, 0) - other.amplitudes.get(k, 0)) <= atol for k in keys)


def _accumulate(terms) -> dict[ModePair, complex]:
    out: dict[ModePair, complex] = {}
    for k, c in terms:
        out[k] = out.get(k, 0j) + c
    return out


# ---------------------------------------------------------------------------
# Jones calculus


def _rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, s], [-s, c]])


def jones_retarder(retardance: float, angle: float) -> np.ndarray:
    """Linear retarder with fast axis at ``angle`` (radians from H)."""
    plate = np.diag([1.0, np.exp(1j * retardance)])
    return _rotation(-angle) @ plate @ _rotation(angle)


def jones_hwp(angle: float) -> np.ndarray:
    """Half-wave plate; equals [[cos 2a, sin 2a], [sin 2a, -cos 2a]]."""
    return jones_retarder(math.pi, angle)


def jones_qwp(angle: float) -> np.ndarray:
    return jones_retarder(math.pi / 2.0, angle)


def prepare_equatorial_jones(theta: float) -> np.ndarray:
    """PBS (H) -> HWP at pi/8 - theta/4 -> QWP at 45 deg, as a Jones vector.

    With the retarder convention above this yields |e_{-theta}> up to a
    global phase; :data:`PREP_FRAME` maps it back to |e_theta>.
    """
    h = np.array([1.0, 0.0], dtype=complex)
    return jones_qwp(math.pi / 4.0) @ jones_hwp(math.pi / 8.0 - theta / 4.0) @ h


# theta-independent frame relating the waveplate chain to equatorial_state
PREP_FRAME = PAULI_X


def prepared_state(theta: float) -> StateVector:
    return StateVector(PREP_FRAME @ prepare_equatorial_jones(theta))


def waveplate_map(path: int, jones: np.ndarray) -> dict[OpticalMode, dict[OpticalMode, complex]]:
    """Mode map for a Jones matrix acting on one path (columns are images of H, V)."""
    j = np.asarray(jones, dtype=complex)
    return {
        H(path): {H(path): j[0, 0], V(path): j[1, 0]},
        V(path): {H(path): j[0, 1], V(path): j[1, 1]},
    }


# ---------------------------------------------------------------------------
# PBS and fusion gate

# transmits H, reflects V
PBS_MAP: dict[OpticalMode, dict[OpticalMode, complex]] = {
    H(1): {H(3): 1.0},
    V(1): {V(4): 1.0},
    H(2): {H(4): 1.0},
    V(2): {V(3): 1.0},
}


def pbs_transform(state: TwoPhotonState) -> TwoPhotonState:
    unknown = [m for m in state.modes() if m not in PBS_MAP]
    if unknown:
        raise ValueError(f"PBS input ports are paths 1 and 2; got modes {sorted(map(str, unknown))}")
    return state.transform(PBS_MAP)


def equatorial_photon(path: int, phase: PhaseLike) -> dict[OpticalMode, complex]:
    t = as_phase(phase).theta
    return {H(path): 1 / SQRT2, V(path): np.exp(1j * t) / SQRT2}


def equatorial_pair(theta1: PhaseLike, theta2: PhaseLike) -> TwoPhotonState:
    return TwoPhotonState.product(equatorial_photon(1, theta1), equatorial_photon(2, theta2))


def expected_pbs_output(theta1: PhaseLike, theta2: PhaseLike) -> TwoPhotonState:
    """The four-term post-PBS state written out by hand, for checking :func:`pbs_transform`."""
    t1, t2 = as_phase(theta1).theta, as_phase(theta2).theta
    return TwoPhotonState(
        {
            (H(3), H(4)): 0.5,
            (V(3), V(4)): 0.5 * np.exp(1j * (t1 + t2)),
            (H(3), V(3)): 0.5 * np.exp(1j * t2),
            (H(4), V(4)): 0.5 * np.exp(1j * t1),
        }
    )


def one_photon_per_path(pair: ModePair) -> bool:
    return {pair[0].path, pair[1].path} == {3, 4}


HERALD_HWP_ANGLE = math.radians(22.5)


@dataclass(frozen=True)
class FusionBranches:
    """Exact branch table of one fusion gate, from the two-photon simulation."""

    discard_probability: float
    herald_probabilities: tuple[float, float]
    steered_states: tuple[StateVector, StateVector]  # path-3 qubit for herald H (0) and V (1)


def simulate_fusion(theta1: PhaseLike, theta2: PhaseLike) -> FusionBranches:
    """PBS, HWP at 22.5 deg on path 4, then H/V detection on path 4."""
    out = pbs_transform(equatorial_pair(theta1, theta2))
    discard = out.probability(lambda k: not one_photon_per_path(k))
    rotated = out.project(one_photon_per_path).transform(waveplate_map(4, jones_hwp(HERALD_HWP_ANGLE)))

    probs, states = [], []
    for herald in ("H", "V"):
        amp = {"H": 0j, "V": 0j}
        for (a, b), c in rotated:
            path3, path4 = (a, b) if a.path == 3 else (b, a)
            if path4.polarization == herald:
                amp[path3.polarization] += c
        vec = np.array([amp["H"], amp["V"]])
        p = float(np.vdot(vec, vec).real)
        probs.append(p)
        states.append(StateVector(vec / math.sqrt(p)) if p > TOL.prob_floor else StateVector(np.zeros(2)))
    return FusionBranches(discard, (probs[0], probs[1]), (states[0], states[1]))


@dataclass(frozen=True)
class FusionOutcome:
    status: Literal["success", "discard"]
    herald_bit: int | None = None
    output_phase: EquatorialPhase | None = None
    pi_shift_bit: int = 0

    @property
    def success(self) -> bool:
        return self.status == "success"

    @property
    def compressed_phase(self) -> EquatorialPhase | None:
        """Phase with the heralded pi shift undone, i.e. theta1 + theta2."""
        if self.output_phase is None:
            return None
        return self.output_phase - math.pi * self.pi_shift_bit


# branch probabilities for equatorial inputs; simulate_fusion reproduces these for every phase pair
P_DISCARD = 0.5
P_HERALD = 0.25


def fusion_gate(theta1: PhaseLike, theta2: PhaseLike, rng: np.random.Generator) -> FusionOutcome:
    """One post-selected fusion. A V herald leaves the output at theta1 + theta2 + pi."""
    u = rng.random()
    if u < P_DISCARD:
        return FusionOutcome("discard")
    bit = 0 if u < P_DISCARD + P_HERALD else 1
    phase = as_phase(theta1) + as_phase(theta2) + math.pi * bit
    return FusionOutcome("success", bit, phase, bit)


def sample_fusion_counts(rng: np.random.Generator, trials: int) -> dict[str, int]:
    """Vectorized tallies of ``trials`` fusion attempts (discard / herald H / herald V)."""
    u = rng.random(trials)
    h = int(np.count_nonzero((u >= P_DISCARD) & (u < P_DISCARD + P_HERALD)))
    v = int(np.count_nonzero(u >= P_DISCARD + P_HERALD))
    return {"discard": trials - h - v, "herald_H": h, "herald_V": v}


# ---------------------------------------------------------------------------
# Iterative fusion tree


class Survivor(NamedTuple):
    multiplier: int  # output phase is multiplier * theta + pi * pi_bit
    pi_bit: int

    def phase(self, theta: float) -> EquatorialPhase:
        return EquatorialPhase(self.multiplier * theta + math.pi * self.pi_bit)

    @property
    def qfi(self) -> float:
        return float(self.multiplier**2)


@dataclass(frozen=True)
class TreeTrial:
    depth: int
    survivors: tuple[Survivor, ...]
    fusions: int
    discards: int

    @property
    def total_qfi(self) -> float:
        return sum(s.qfi for s in self.survivors)

    @property
    def classical_bits(self) -> int:
        return len(self.survivors)


def run_fusion_tree(n: int, theta: float, rng: np.random.Generator, buffer_survival: float = 1.0) -> TreeTrial:
    """Single pass of the iterative pairing on ``n`` equatorial copies.

    Each level pairs up the qubits that share a phase; an odd one out is set
    aside as a survivor. Fused qubits are held in a memory (surviving with
    ``buffer_survival``) until the next level. The loop stops once fewer
    than two qubits share the current phase.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    current = [Survivor(1, 0)] * n
    survivors: list[Survivor] = []
    depth = fusions = discards = 0
    while len(current) >= 2:
        depth += 1
        if len(current) % 2:
            survivors.append(current.pop())
        nxt = []
        for a, b in zip(current[::2], current[1::2]):
            fusions += 1
            out = fusion_gate(a.multiplier * theta + math.pi * a.pi_bit, b.multiplier * theta + math.pi * b.pi_bit, rng)
            if not out.success:
                discards += 1
                continue
            if buffer_survival < 1.0 and rng.random() >= buffer_survival:
                continue
            nxt.append(Survivor(a.multiplier + b.multiplier, a.pi_bit ^ b.pi_bit ^ out.pi_shift_bit))
        current = nxt
    survivors.extend(current)
    return TreeTrial(depth, tuple(survivors), fusions, discards)


@dataclass(frozen=True)
class FusionTreeStats:
    n: int
    theta: float
    trials: int
    depth_histogram: dict[int, int]
    survivor_histogram: dict[int, int]
    mean_qfi: float
    qfi_stderr: float
    max_depth: int
    max_survivors: int
    mean_classical_bits: float
    multiplier_histogram: dict[int, int]
    fusion_attempts: int
    discards: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "theta": self.theta,
            "trials": self.trials,
            "depth_histogram": {str(k): v for k, v in sorted(self.depth_histogram.items())},
            "survivor_histogram": {str(k): v for k, v in sorted(self.survivor_histogram.items())},
            "multiplier_histogram": {str(k): v for k, v in sorted(self.multiplier_histogram.items())},
            "mean_qfi": self.mean_qfi,
            "qfi_stderr": self.qfi_stderr,
            "max_depth": self.max_depth,
            "max_survivors": self.max_survivors,
            "mean_classical_bits": self.mean_classical_bits,
            "fusion_attempts": self.fusion_attempts,
            "discards": self.discards,
        }


def fusion_tree(
    n: int,
    theta: PhaseLike,
    rng: np.random.Generator,
    trials: int,
    buffer_survival: float = 1.0,
    keep_trials: bool = False,
) -> FusionTreeStats | tuple[FusionTreeStats, list[TreeTrial]]:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0.0 <= buffer_survival <= 1.0:
        raise ValueError("buffer_survival must lie in [0, 1]")
    t = as_phase(theta).theta
    depth_h: Counter = Counter()
    surv_h: Counter = Counter()
    mult_h: Counter = Counter()
    qfi = np.empty(trials)
    bits = 0
    attempts = discards = 0
    kept = []
    for i in range(trials):
        trial = run_fusion_tree(n, t, rng, buffer_survival)
        depth_h[trial.depth] += 1
        surv_h[len(trial.survivors)] += 1
        for s in trial.survivors:
            mult_h[s.multiplier] += 1
        qfi[i] = trial.total_qfi
        bits += trial.classical_bits
        attempts += trial.fusions
        discards += trial.discards
        if keep_trials:
            kept.append(trial)
    stats = FusionTreeStats(
        n=n,
        theta=t,
        trials=trials,
        depth_histogram=dict(depth_h),
        survivor_histogram=dict(surv_h),
        mean_qfi=float(qfi.mean()),
        qfi_stderr=float(qfi.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("nan"),
        max_depth=max(depth_h),
        max_survivors=max(surv_h),
        mean_classical_bits=bits / trials,
        multiplier_histogram=dict(mult_h),
        fusion_attempts=attempts,
        discards=discards,
    )
    return (stats, kept) if keep_trials else stats


def max_tree_depth(n: int) -> int:
    """floor(log2 n)."""
    return n.bit_length() - 1


# ---------------------------------------------------------------------------
# Post-selected CNOT accounting


@dataclass(frozen=True)
class ResourceRecord:
    n_qubits: int
    cnot_success_prob: float
    cascade_throughput: float  # all N-1 post-selected CNOTs succeed
    fusion_pair_throughput: float = P_DISCARD

    @property
    def expected_cascade_attempts(self) -> float:
        return 1.0 / self.cascade_throughput

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "cnot_success_prob": self.cnot_success_prob,
            "cascade_throughput": self.cascade_throughput,
            "expected_cascade_attempts": self.expected_cascade_attempts,
            "fusion_pair_throughput": self.fusion_pair_throughput,
        }


def cnot_resource_model(n_qubits: int = 2, success_prob: float = 1.0 / 9.0) -> ResourceRecord:
    if not 0.0 < success_prob <= 1.0:
        raise ValueError(f"success_prob must lie in (0, 1], got {success_prob}")
    if n_qubits < 2:
        raise ValueError("the cascade needs at least two qubits")
    return ResourceRecord(n_qubits, success_prob, success_prob ** (n_qubits - 1))


def steering_matches(theta1: PhaseLike, theta2: PhaseLike, atol: float = TOL.norm) -> bool:
    """True when the simulated herald-b state equals |e_{theta1+theta2+b pi}> up to global phase."""
    branches = simulate_fusion(theta1, theta2)
    total = as_phase(theta1) + as_phase(theta2)
    return all(
        equal_up_to_phase(branches.steered_states[b], equatorial_state(total + math.pi * b), atol)
        for b in (0, 1)
    )
