"""Numerical tolerances shared by every module."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    algebraic: float = 1e-10  # unitarity, completeness, support leakage
    norm: float = 1e-12
    prob_floor: float = 1e-14  # outcomes / distribution entries below this are treated as zero
    max_qubits: int = 24


TOL = Tolerances()
