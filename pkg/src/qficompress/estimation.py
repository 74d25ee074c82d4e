"""Fringe models, phase estimators and the error analysis of compressed-qubit experiments.

Angles are radians throughout. A compressed qubit has fringe frequency 2
(it carries 2 theta), an uncompressed one frequency 1; ``base_frequency``
selects which, and ``delta`` perturbs it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

COMPRESSED = 2.0
UNCOMPRESSED = 1.0


@dataclass(frozen=True)
class FringeModel:
    amplitude: float = 1.0
    delta: float = 0.0
    phi: float = 0.0
    base_frequency: float = COMPRESSED

    def __post_init__(self):
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValueError(f"amplitude must lie in [0, 1], got {self.amplitude}")

    @property
    def frequency(self) -> float:
        return self.base_frequency + self.delta

    @property
    def is_ideal(self) -> bool:
        return self.amplitude == 1.0 and self.delta == 0.0 and self.phi == 0.0


@dataclass(frozen=True)
class CountRecord:
    theta_set: float
    n_plus: int
    n_minus: int
    duration: float = 1.0

    def __post_init__(self):
        if self.n_plus < 0 or self.n_minus < 0:
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return self.n_plus + self.n_minus


class EstimationError(ValueError):
    pass


class PhaseEstimate(float):
    """A float that also remembers whether the count ratio had to be clamped."""

    clamped: bool

    def __new__(cls, value: float, clamped: bool = False):
        obj = super().__new__(cls, value)
        obj.clamped = clamped
        return obj


def fringe_probability(theta, model: FringeModel = FringeModel(), sign: int = +1):
    """1/2 (1 +/- A cos((f + delta) theta + phi)), clamped to [0, 1]."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    p = 0.5 * (1.0 + sign * model.amplitude * np.cos(model.frequency * np.asarray(theta) + model.phi))
    p = np.clip(p, 0.0, 1.0)
    return float(p) if np.ndim(p) == 0 else p


def optimal_basis_probability(theta, theta0: float, model: FringeModel = FringeModel(), sign: int = +1):
    """Projection onto |psi_{f theta0 +/- pi/2}>: 1/2 (1 +/- A sin(f (theta - theta0)))."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    p = 0.5 * (1.0 + sign * model.amplitude * np.sin(model.frequency * (np.asarray(theta) - theta0)))
    p = np.clip(p, 0.0, 1.0)
    return float(p) if np.ndim(p) == 0 else p


def simulate_counts(
    theta: float,
    model: FringeModel,
    mean_photons: float,
    rng: np.random.Generator,
    duration: float = 1.0,
) -> CountRecord:
    """Poisson counts in the |+>, |-> ports."""
    if mean_photons <= 0:
        raise ValueError("mean_photons must be positive")
    p = fringe_probability(theta, model, +1)
    n_plus, n_minus = rng.poisson([mean_photons * p, mean_photons * (1.0 - p)])
    return CountRecord(float(theta), int(n_plus), int(n_minus), duration)


def sweep(
    thetas: Iterable[float],
    model: FringeModel,
    mean_photons: float,
    rng: np.random.Generator,
    duration: float = 1.0,
) -> list[CountRecord]:
    return [simulate_counts(t, model, mean_photons, rng, duration) for t in thetas]


def sweep_angles_deg(start: float = -90.0, stop: float = 270.0, step: float = 2.5) -> np.ndarray:
    """Inclusive grid of set phases in degrees."""
    n = int(round((stop - start) / step))
    return start + step * np.arange(n + 1)


def _ratio(n_plus, n_minus, amplitude: float):
    n_plus = np.asarray(n_plus, dtype=float)
    n_minus = np.asarray(n_minus, dtype=float)
    total = n_plus + n_minus
    if np.any(total <= 0):
        raise EstimationError("zero total counts")
    if amplitude <= 0:
        raise EstimationError("fringe amplitude must be positive to invert")
    r = (n_plus - n_minus) / (amplitude * total)
    clamped = np.abs(r) > 1.0
    return np.clip(r, -1.0, 1.0), clamped


def arccos_estimates(n_plus, n_minus, model: FringeModel = FringeModel()) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized arccos(ratio)/(f + delta) - phi; returns (estimates, clamped mask).

    The offset is subtracted after the division; subtracting it from the
    arccos before dividing would model a frequency-coupled offset instead.
    Principal branch only, so the result lies in [-phi, pi/(f + delta) - phi].
    """
    r, clamped = _ratio(n_plus, n_minus, model.amplitude)
    return np.arccos(r) / model.frequency - model.phi, clamped


def estimate_arccos(record: CountRecord, model: FringeModel = FringeModel()) -> PhaseEstimate:
    est, clamped = arccos_estimates(record.n_plus, record.n_minus, model)
    return PhaseEstimate(float(est), bool(clamped))


def optimal_basis_estimates(n_plus, n_minus, theta0: float, model: FringeModel = FringeModel()):
    """Vectorized theta0 + arcsin(ratio)/(f + delta); returns (estimates, clamped mask)."""
    r, clamped = _ratio(n_plus, n_minus, model.amplitude)
    return theta0 + np.arcsin(r) / model.frequency, clamped


def estimate_optimal_basis(n_plus: int, n_minus: int, theta0: float, model: FringeModel = FringeModel()) -> PhaseEstimate:
    """Local estimator for counts taken in the basis {|psi_{2 theta0 + pi/2}>, |psi_{2 theta0 - pi/2}>}."""
    est, clamped = optimal_basis_estimates(n_plus, n_minus, theta0, model)
    return PhaseEstimate(float(est), bool(clamped))


# ---------------------------------------------------------------------------
# Fitting


@dataclass(frozen=True)
class FringeFit:
    model: FringeModel
    residual: float  # photon-weighted sum of squared ratio residuals
    converged: bool
    stderr: dict[str, float]
    identifiable: bool
    n_records: int

    def to_dict(self) -> dict:
        return {
            "model": asdict(self.model),
            "frequency": self.model.frequency,
            "residual": self.residual,
            "converged": self.converged,
            "stderr": self.stderr,
            "identifiable": self.identifiable,
            "n_records": self.n_records,
        }


class FitError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.4g})")
        self.residual = residual


def _linear_amplitude_phase(theta, y, w, freq):
    """Best (A, phi) for a fixed frequency: y - 1/2 = a cos(f theta) + b sin(f theta)."""
    design = np.column_stack([np.cos(freq * theta), np.sin(freq * theta)]) * 0.5
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(design * sw[:, None], (y - 0.5) * sw, rcond=None)
    a, b = coef
    amp = math.hypot(a, b)
    phi = math.atan2(-b, a)
    resid = float(np.sum(w * (y - 0.5 - design @ coef) ** 2))
    return amp, phi, resid


def fit_fringe(
    records: Sequence[CountRecord],
    base_frequency: float = COMPRESSED,
    frequency_range: tuple[float, float] = (0.25, 4.0),
    grid_points: int = 751,
    tol: float = 1e-9,
) -> FringeFit:
    """Least-squares fit of (A, delta, phi) to the ratio n+/(n+ + n-).

    The frequency is seeded on a grid with amplitude and phase solved
    linearly at each point; the best seed is then polished with
    Nelder-Mead. Residuals are weighted by the total counts of each record.
    Standard errors propagate binomial counting noise through the fit.
    """
    if len(records) < 8:
        raise ValueError(f"need at least 8 records, got {len(records)}")
    theta = np.array([r.theta_set for r in records], dtype=float)
    total = np.array([r.total for r in records], dtype=float)
    if np.any(total <= 0):
        raise ValueError("every record needs at least one count")
    y = np.array([r.n_plus for r in records], dtype=float) / total
    w = total / total.mean()

    grid = np.linspace(*frequency_range, grid_points)
    seeds = [(_linear_amplitude_phase(theta, y, w, f), f) for f in grid]
    (amp0, phi0, _), f0 = min(seeds, key=lambda s: s[0][2])

    def model_y(params):
        a, f, ph = params
        return 0.5 * (1.0 + a * np.cos(f * theta + ph))

    def cost(params):
        return float(np.sum(w * (y - model_y(params)) ** 2))

    res = minimize(
        cost,
        x0=[amp0, f0, phi0],
        method="Nelder-Mead",
        options={"xatol": tol, "fatol": 1e-15, "maxiter": 20000, "maxfev": 40000},
    )
    amp, freq, phi = res.x
    if amp < 0:
        amp, phi = -amp, phi + math.pi
    phi = math.remainder(phi, 2 * math.pi)
    residual = cost([amp, freq, phi]) * total.mean()
    if not res.success:
        raise FitError(f"fringe fit did not converge: {res.message}", residual)

    stderr, identifiable = _fit_errors(theta, total, amp, freq, phi)
    model = FringeModel(min(max(amp, 0.0), 1.0), freq - base_frequency, phi, base_frequency)
    return FringeFit(model, residual, bool(res.success), stderr, identifiable, len(records))


def _fit_errors(theta, total, amp, freq, phi) -> tuple[dict[str, float], bool]:
    # sandwich covariance for count-weighted least squares with binomial noise
    arg = freq * theta + phi
    m = np.clip(0.5 * (1.0 + amp * np.cos(arg)), 1e-9, 1 - 1e-9)
    jac = np.column_stack([0.5 * np.cos(arg), -0.5 * amp * theta * np.sin(arg), -0.5 * amp * np.sin(arg)])
    bread = jac.T @ (total[:, None] * jac)
    meat = jac.T @ ((total * m * (1 - m))[:, None] * jac)
    nan = float("nan")
    if np.linalg.cond(bread) > 1e12:
        return {"amplitude": nan, "delta": nan, "phi": nan}, False
    inv = np.linalg.inv(bread)
    cov = inv @ meat @ inv
    err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    identifiable = bool(amp > 3.0 * err[0])
    if not identifiable:
        return {"amplitude": float(err[0]), "delta": nan, "phi": nan}, False
    return {"amplitude": float(err[0]), "delta": float(err[1]), "phi": float(err[2])}, True


# ---------------------------------------------------------------------------
# Error statistics and Monte Carlo experiments


@dataclass(frozen=True)
class EstimationRecord:
    theta_true: float
    estimates: tuple[float, ...] = field(repr=False)
    std: float
    rmse: float
    bias: float
    mean_photons: float
    mean_error: float = 0.0  # signed, mean(estimate) - theta_true
    label: str = ""

    @property
    def sqrt_n_std(self) -> float:
        return math.sqrt(self.mean_photons) * self.std

    @property
    def sqrt_n_rmse(self) -> float:
        return math.sqrt(self.mean_photons) * self.rmse

    @property
    def sqrt_n_bias(self) -> float:
        return math.sqrt(self.mean_photons) * self.bias

    def to_dict(self, include_estimates: bool = False) -> dict:
        out = {
            "label": self.label,
            "theta_true": self.theta_true,
            "trials": len(self.estimates),
            "mean_photons": self.mean_photons,
            "std": self.std,
            "rmse": self.rmse,
            "bias": self.bias,
            "mean_error": self.mean_error,
            "sqrt_n_std": self.sqrt_n_std,
            "sqrt_n_rmse": self.sqrt_n_rmse,
            "sqrt_n_bias": self.sqrt_n_bias,
        }
        if include_estimates:
            out["estimates"] = list(self.estimates)
        return out


def error_statistics(estimates: Sequence[float], theta_true: float, mean_photons: float, label: str = "") -> EstimationRecord:
    """Sample std, RMSE about the true phase, and bias = sqrt(max(RMSE^2 - std^2, 0))."""
    est = np.asarray(estimates, dtype=float)
    if est.size < 2:
        raise ValueError("need at least two estimates")
    err = est - theta_true
    std = float(est.std(ddof=1))
    rmse = float(math.sqrt(np.mean(err**2)))
    bias = math.sqrt(max(rmse**2 - std**2, 0.0))
    return EstimationRecord(
        theta_true=float(theta_true),
        estimates=tuple(est.tolist()),
        std=std,
        rmse=rmse,
        bias=bias,
        mean_photons=float(mean_photons),
        mean_error=float(err.mean()),
        label=label,
    )


def monte_carlo_optimal(
    theta: float,
    model: FringeModel,
    mean_photons: float,
    trials: int,
    rng: np.random.Generator,
    theta0: float | None = None,
    true_amplitude: float | None = None,
) -> EstimationRecord:
    """Repeated optimal-basis experiments at ``theta`` (basis set at ``theta0``, default theta).

    ``true_amplitude`` lets the data visibility differ from the one the
    estimator assumes.
    """
    theta0 = theta if theta0 is None else theta0
    data_model = model if true_amplitude is None else FringeModel(true_amplitude, model.delta, model.phi, model.base_frequency)
    p = optimal_basis_probability(theta, theta0, data_model, +1)
    n_plus = rng.poisson(mean_photons * p, size=trials)
    n_minus = rng.poisson(mean_photons * (1.0 - p), size=trials)
    ok = (n_plus + n_minus) > 0
    est, _ = optimal_basis_estimates(n_plus[ok], n_minus[ok], theta0, model)
    return error_statistics(est, theta, mean_photons, label=f"optimal/f={model.base_frequency:g}")


def monte_carlo_arccos(
    theta: float,
    model: FringeModel,
    mean_photons: float,
    trials: int,
    rng: np.random.Generator,
    true_amplitude: float | None = None,
) -> EstimationRecord:
    data_model = model if true_amplitude is None else FringeModel(true_amplitude, model.delta, model.phi, model.base_frequency)
    p = fringe_probability(theta, data_model, +1)
    n_plus = rng.poisson(mean_photons * p, size=trials)
    n_minus = rng.poisson(mean_photons * (1.0 - p), size=trials)
    ok = (n_plus + n_minus) > 0
    est, _ = arccos_estimates(n_plus[ok], n_minus[ok], model)
    return error_statistics(est, theta, mean_photons, label=f"arccos/f={model.base_frequency:g}")


def drift_visibility(a0: float, eta: float, t: float) -> float:
    """Linear visibility decay A(t) = A0 (1 - eta t) over an acquisition running from t=0 to t=1."""
    return a0 * (1.0 - eta * t)


def drift_experiment(
    thetas: Sequence[float],
    model: FringeModel,
    mean_photons: float,
    trials: int,
    rng: np.random.Generator,
    eta: float,
) -> list[EstimationRecord]:
    """Sequential acquisition over ``thetas`` while the visibility decays.

    The i-th phase is recorded at time t_i = i / (M - 1); the estimator keeps
    the start-of-run amplitude ``model.amplitude``, so the mismatch grows along
    the run and turns into a phase-dependent bias of the arccos estimator.
    """
    m = len(thetas)
    records = []
    for i, theta in enumerate(thetas):
        t = i / (m - 1) if m > 1 else 0.0
        a_true = drift_visibility(model.amplitude, eta, t)
        records.append(monte_carlo_arccos(theta, model, mean_photons, trials, rng, true_amplitude=a_true))
    return records


def oscillation_amplitude(values: Sequence[float]) -> float:
    """Half the peak-to-peak spread."""
    v = np.asarray(values, dtype=float)
    return float((v.max() - v.min()) / 2.0)


# ---------------------------------------------------------------------------
# CSV I/O for count records

CSV_COLUMNS = ("theta_deg", "n_plus", "n_minus", "duration_s")


def records_to_csv(records: Iterable[CountRecord], header_lines: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([repr(round(math.degrees(r.theta_set), 12)), r.n_plus, r.n_minus, repr(float(r.duration))])
    return buf.getvalue()


def records_from_csv(text: str) -> list[CountRecord]:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines)
    missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"CSV is missing columns {sorted(missing)}")
    out = []
    for row in reader:
        out.append(
            CountRecord(
                math.radians(float(row["theta_deg"])),
                int(row["n_plus"]),
                int(row["n_minus"]),
                float(row["duration_s"]),
            )
        )
    return out
