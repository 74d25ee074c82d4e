"""Command-line front end.

Every command writes into the ``--out`` directory; angles are given in
degrees. Exit codes: 0 success, 2 configuration error, 3 a numerical check
on the result failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import compression, estimation, photonic
from .output import csv_header, fmt, metadata, write_atomic, write_json
from .qfi import EnergyDistribution, qfi_variance

log = logging.getLogger("qficompress")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
DEFAULT_ESTIMATE_PHASES_DEG = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0]


class ConfigError(Exception):
    pass


class ValidationFailure(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qficompress", description=__doc__.splitlines()[0])
    ap.add_argument("--command", required=True, choices=["cascade", "fusion", "decompose", "fringe", "estimate"])
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n", type=int, default=2, help="number of input qubits")
    ap.add_argument("--theta-deg", type=float, nargs="+", default=None,
                    help="phase(s); several values give distinct cascade phases or estimation points")
    ap.add_argument("--theta2-deg", type=float, default=None, help="second fusion input phase (pair mode)")
    ap.add_argument("--scan-step-deg", type=float, default=None, help="pair mode: also write a 2D (theta1, theta2) scan")
    ap.add_argument("--trials", type=int, default=None)
    ap.add_argument("--mean-photons", type=float, default=None)
    ap.add_argument("--dist-file", default=None, help="rows of 'E, p' for the decompose command")
    ap.add_argument("--model-a", type=float, default=1.0)
    ap.add_argument("--model-delta", type=float, default=0.0)
    ap.add_argument("--model-phi", type=float, default=0.0, help="fringe phase offset in degrees")
    ap.add_argument("--drift-eta", type=float, default=0.0, help="fractional visibility loss over the run")
    ap.add_argument("--qubit", choices=["compressed", "uncompressed"], default="compressed")
    ap.add_argument("--sweep-start-deg", type=float, default=-90.0)
    ap.add_argument("--sweep-stop-deg", type=float, default=270.0)
    ap.add_argument("--sweep-step-deg", type=float, default=2.5)
    ap.add_argument("--buffer-survival", type=float, default=1.0)
    ap.add_argument("--cnot-success", type=float, default=1.0 / 9.0)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("out", "verbose")}
    return dict(sorted(cfg.items()))


def _table(header: list[str], rows, meta: dict) -> str:
    buf = io.StringIO()
    for line in csv_header(meta):
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _model(args) -> estimation.FringeModel:
    base = estimation.COMPRESSED if args.qubit == "compressed" else estimation.UNCOMPRESSED
    try:
        return estimation.FringeModel(args.model_a, args.model_delta, math.radians(args.model_phi), base)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _require_positive(name: str, value) -> None:
    if value is None or value < 1:
        raise ConfigError(f"--{name} must be >= 1")


# ---------------------------------------------------------------------------


def cmd_cascade(args, out: Path) -> None:
    thetas_deg = args.theta_deg or [45.0]
    if len(thetas_deg) == 1:
        thetas_deg = thetas_deg * args.n
    n = len(thetas_deg)
    if not 2 <= n <= compression.MAX_CASCADE_QUBITS:
        raise ConfigError(f"cascade needs 2 <= N <= {compression.MAX_CASCADE_QUBITS}, got {n}")
    equal = len(set(thetas_deg)) == 1
    phases = [math.radians(t) for t in thetas_deg]
    branches = compression.cascade_enumerate(phases)
    meta = metadata("cascade", args.seed, _config(args))

    rows = [
        [
            "".join(map(str, b.outcome_bits)),
            b.k_zero_count,
            fmt(b.final_phase.degrees),
            fmt(b.probability),
            fmt(b.equal_phase_qfi) if equal else "",
        ]
        for b in branches
    ]
    write_atomic(out / "cascade_branches.csv", _table(["bits", "k", "phase_deg", "probability", "branch_qfi"], rows, meta))

    summary = {
        "n": n,
        "equal_phases": equal,
        "branches": len(branches),
        "classical_bits": compression.classical_register_size(n),
        "probability_sum": math.fsum(b.probability for b in branches),
    }
    if equal:
        avg = math.fsum(b.probability * b.equal_phase_qfi for b in branches)
        summary.update(average_qfi=avg, input_qfi=float(n), binomial_average_qfi=compression.binomial_average_qfi(n))
    if args.trials:
        sample = compression.cascade_sample(phases, args.seed, args.trials)
        summary["sample"] = {
            "trials": args.trials,
            "k_counts": sample.k_counts().tolist(),
            "mean_equal_phase_qfi": sample.mean_equal_phase_qfi() if equal else None,
        }
    summary["resources"] = photonic.cnot_resource_model(n, args.cnot_success).to_dict()
    write_json(out / "cascade_summary.json", meta, summary)
    if equal and abs(summary["average_qfi"] - n) > 1e-9:
        raise ValidationFailure(f"average QFI {summary['average_qfi']} differs from N={n}")


def cmd_fusion(args, out: Path) -> None:
    theta1 = math.radians((args.theta_deg or [45.0])[0])
    trials = args.trials if args.trials is not None else 10_000
    _require_positive("trials", trials)
    rng = np.random.default_rng(args.seed)
    meta = metadata("fusion", args.seed, _config(args))
    if args.theta2_deg is not None:
        _fusion_pair(args, out, theta1, math.radians(args.theta2_deg), trials, rng, meta)
        return
    _require_positive("n", args.n)
    if not 0.0 <= args.buffer_survival <= 1.0:
        raise ConfigError("--buffer-survival must lie in [0, 1]")
    stats, kept = photonic.fusion_tree(args.n, theta1, rng, trials, args.buffer_survival, keep_trials=True)
    rows = [
        [i, t.depth, len(t.survivors), fmt(t.total_qfi), t.classical_bits, " ".join(f"{s.multiplier}:{s.pi_bit}" for s in t.survivors)]
        for i, t in enumerate(kept)
    ]
    write_atomic(
        out / "fusion_trials.csv",
        _table(["trial", "depth", "survivors", "total_qfi", "classical_bits", "multiplier_pibit"], rows, meta),
    )
    payload = stats.to_dict()
    payload["depth_bound"] = photonic.max_tree_depth(args.n)
    payload["success_fraction"] = 1.0 - stats.discards / stats.fusion_attempts if stats.fusion_attempts else None
    if args.n >= 2:
        payload["resources"] = photonic.cnot_resource_model(args.n, args.cnot_success).to_dict()
    write_json(out / "fusion_tree.json", meta, payload)
    if stats.max_depth > photonic.max_tree_depth(args.n):
        raise ValidationFailure("fusion tree exceeded floor(log2 n) levels")


def _fusion_pair(args, out, theta1, theta2, trials, rng, meta) -> None:
    outcomes = [photonic.fusion_gate(theta1, theta2, rng) for _ in range(trials)]
    tally: dict[tuple, int] = {}
    for o in outcomes:
        key = (o.status, o.herald_bit)
        tally[key] = tally.get(key, 0) + 1
    branches = photonic.simulate_fusion(theta1, theta2)
    rows = []
    for status, bit in [("discard", None), ("success", 0), ("success", 1)]:
        count = tally.get((status, bit), 0)
        if status == "discard":
            rows.append(["discard", "", count, fmt(count / trials), fmt(branches.discard_probability), "", ""])
            continue
        phase = photonic.as_phase(theta1 + theta2 + math.pi * bit)
        rows.append(
            [
                "success",
                "HV"[bit],
                count,
                fmt(count / trials),
                fmt(branches.herald_probabilities[bit]),
                fmt(phase.degrees),
                fmt(photonic.as_phase(theta1 + theta2).degrees),
            ]
        )
    header = ["status", "herald", "count", "fraction", "expected", "output_phase_deg", "compressed_phase_deg"]
    write_atomic(out / "fusion_pair.csv", _table(header, rows, meta))

    success = sum(v for (s, _), v in tally.items() if s == "success")
    summary = {
        "theta1_deg": math.degrees(theta1),
        "theta2_deg": math.degrees(theta2),
        "trials": trials,
        "success_fraction": success / trials,
        "steering_verified": photonic.steering_matches(theta1, theta2),
    }
    if args.scan_step_deg:
        if args.scan_step_deg <= 0:
            raise ConfigError("--scan-step-deg must be positive")
        grid = np.arange(0.0, 360.0, args.scan_step_deg)
        scan = []
        for a in grid:
            for b in grid:
                br = photonic.simulate_fusion(math.radians(a), math.radians(b))
                s = br.steered_states[0].amplitudes
                phase = photonic.as_phase(float(np.angle(s[1] / s[0])))
                scan.append([fmt(a), fmt(b), fmt(1.0 - br.discard_probability), fmt(phase.degrees)])
        write_atomic(out / "fusion_scan.csv", _table(["theta1_deg", "theta2_deg", "success_probability", "output_phase_deg"], scan, meta))
        summary["scan_points"] = len(scan)
    write_json(out / "fusion_pair.json", meta, summary)
    if not summary["steering_verified"]:
        raise ValidationFailure("steered states do not match |e_{theta1+theta2+b pi}>")


def read_distribution(path: Path) -> EnergyDistribution:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read distribution file: {exc}") from exc
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = [f for f in line.replace(",", " ").split() if f]
        if len(fields) != 2:
            raise ConfigError(f"{path}:{lineno}: expected 'E, p', got {raw!r}")
        try:
            e, p = float(fields[0]), float(fields[1])
        except ValueError:
            if not pairs:
                continue  # header row
            raise ConfigError(f"{path}:{lineno}: non-numeric row {raw!r}") from None
        if not (math.isfinite(e) and math.isfinite(p)):
            raise ConfigError(f"{path}:{lineno}: non-finite value")
        if p < 0:
            raise ConfigError(f"{path}:{lineno}: negative probability {p}")
        pairs.append((e, p))
    if not pairs:
        raise ConfigError(f"{path}: no rows")
    energies = [e for e, _ in pairs]
    if len(set(energies)) != len(energies):
        raise ConfigError(f"{path}: repeated energies")
    total = math.fsum(p for _, p in pairs)
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"{path}: probabilities sum to {total!r}, not 1")
    return EnergyDistribution.from_pairs(pairs, renormalize=True)


def cmd_decompose(args, out: Path) -> None:
    if not args.dist_file:
        raise ConfigError("--dist-file is required for decompose")
    parent = read_distribution(Path(args.dist_file))
    ens = compression.decompose_two_point(parent)
    d = ens.parent.size
    encoded = compression.compress(ens.parent, 0.0, ens)
    avg_encoded = math.fsum(b.probability * b.qfi for b in encoded)
    checks = {
        "components": ens.size,
        "bound": max(d - 1, 1),
        "completeness_residual": ens.completeness_residual(),
        "mixture_residual": ens.mixture_residual(),
        "max_mean_error": max(abs(c.mean - ens.parent.mean) for c in ens.components),
        "parent_qfi": qfi_variance(ens.parent),
        "average_qfi": ens.average_qfi(),
        "average_encoded_qfi": avg_encoded,
        "classical_bits": (ens.size - 1).bit_length(),
    }
    ok = (
        ens.size <= checks["bound"]
        and checks["completeness_residual"] <= 1e-10
        and checks["mixture_residual"] <= 1e-10
        and checks["max_mean_error"] <= 1e-10
        and abs(avg_encoded - checks["parent_qfi"]) <= 1e-9
        and all(c.support_size <= 2 for c in ens.components)
    )
    checks["passed"] = ok
    meta = metadata("decompose", args.seed, _config(args))
    write_json(out / "ensemble.json", meta, {"ensemble": ens.to_dict(), "checks": checks})
    if not ok:
        raise ValidationFailure("decomposition failed its numerical checks")


def cmd_fringe(args, out: Path) -> None:
    model = _model(args)
    mean = args.mean_photons if args.mean_photons is not None else 277.0
    if mean <= 0:
        raise ConfigError("--mean-photons must be positive")
    if args.sweep_step_deg <= 0 or args.sweep_stop_deg <= args.sweep_start_deg:
        raise ConfigError("invalid sweep range")
    rng = np.random.default_rng(args.seed)
    grid = estimation.sweep_angles_deg(args.sweep_start_deg, args.sweep_stop_deg, args.sweep_step_deg)
    records = estimation.sweep(np.radians(grid), model, mean, rng)
    meta = metadata("fringe", args.seed, _config(args))
    write_atomic(out / "fringe.csv", estimation.records_to_csv(records, csv_header(meta)))
    payload: dict = {"rows": len(records), "mean_photons": mean}
    try:
        payload["fit"] = estimation.fit_fringe(records, base_frequency=model.base_frequency).to_dict()
    except (ValueError, estimation.FitError) as exc:
        payload["fit_error"] = str(exc)
    write_json(out / "fringe_fit.json", meta, payload)


def cmd_estimate(args, out: Path) -> None:
    model = _model(args)
    mean = args.mean_photons if args.mean_photons is not None else 522.0
    trials = args.trials if args.trials is not None else 10_000
    _require_positive("trials", trials)
    if trials < 2:
        raise ConfigError("--trials must be >= 2 for error statistics")
    if mean <= 0:
        raise ConfigError("--mean-photons must be positive")
    if not 0.0 <= args.drift_eta < 1.0:
        raise ConfigError("--drift-eta must lie in [0, 1)")
    thetas = [math.radians(t) for t in (args.theta_deg or DEFAULT_ESTIMATE_PHASES_DEG)]
    rng = np.random.default_rng(args.seed)

    compressed = estimation.FringeModel(model.amplitude, model.delta, model.phi, estimation.COMPRESSED)
    uncompressed = estimation.FringeModel(model.amplitude, model.delta, model.phi, estimation.UNCOMPRESSED)
    series = {"compressed_optimal": [], "uncompressed_optimal": []}
    for t in thetas:
        series["compressed_optimal"].append(estimation.monte_carlo_optimal(t, compressed, mean, trials, rng))
        series["uncompressed_optimal"].append(estimation.monte_carlo_optimal(t, uncompressed, mean, trials, rng))
    series["compressed_arccos_drift"] = estimation.drift_experiment(thetas, compressed, mean, trials, rng, args.drift_eta)

    qcrb = {"compressed_optimal": 0.5, "uncompressed_optimal": 1.0, "compressed_arccos_drift": 0.5}
    rows = []
    for name, recs in series.items():
        for r in recs:
            rows.append(
                [
                    fmt(math.degrees(r.theta_true)),
                    name,
                    fmt(r.sqrt_n_std),
                    fmt(r.sqrt_n_rmse),
                    fmt(r.sqrt_n_bias),
                    fmt(r.bias),
                    fmt(r.mean_error),
                    fmt(qcrb[name]),
                ]
            )
    meta = metadata("estimate", args.seed, _config(args))
    header = ["theta_deg", "series", "sqrt_n_std", "sqrt_n_rmse", "sqrt_n_bias", "bias", "mean_error", "qcrb_sqrt_n_std"]
    write_atomic(out / "estimate.csv", _table(header, rows, meta))
    drift = series["compressed_arccos_drift"]
    payload = {
        "mean_photons": mean,
        "trials": trials,
        "qcrb_sqrt_n_std": {"compressed": 0.5, "uncompressed": 1.0},
        "records": {name: [r.to_dict() for r in recs] for name, recs in series.items()},
        "drift": {
            "eta": args.drift_eta,
            "bias_oscillation_amplitude": estimation.oscillation_amplitude([r.mean_error for r in drift]),
            "sqrt_n_bias_oscillation_amplitude": estimation.oscillation_amplitude([r.mean_error for r in drift]) * math.sqrt(mean),
            "max_bias": max(r.bias for r in drift),
        },
    }
    write_json(out / "estimate.json", meta, payload)


COMMANDS = {
    "cascade": cmd_cascade,
    "fusion": cmd_fusion,
    "decompose": cmd_decompose,
    "fringe": cmd_fringe,
    "estimate": cmd_estimate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    out = Path(args.out)
    try:
        COMMANDS[args.command](args, out)
    except ConfigError as exc:
        print(f"qficompress: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationFailure as exc:
        print(f"qficompress: validation failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    log.info("wrote %s output to %s", args.command, out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
