"""Command-line front end: configuration, CSV input/output and experiment orchestration.

Commands
--------
simulate      synthesize a measurement set
calibrate     fit propagation parameters from a measurement CSV
locate        estimate the blind position from a measurement CSV
crlb-curve    RMSE lower bounds across a sampling-density sweep
mc-study      Monte Carlo estimator bias/RMSE study
corr-analyze  binned spatial cross-covariance of residuals
spectrum      spatial power spectrum of the cross-covariance

Every command reads a flat key=value config file (all keys optional, unknown
keys rejected) and writes its delimited report, a rendered PNG figure, a
metadata sidecar and a run manifest into --out. Outputs are a pure function
of config plus flags; rerunning a command reproduces the CSV bytes.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (CovarianceCurve, monte_carlo, residual_sets, spatial_covariance,
                       spatial_spectrum)
from .bounds import bound_sweep
from .correlation import KERNEL_NAMES, CorrelationKernel, build_covariance
from .errors import ConfigError, CsvFormatError, DegenerateInputError
from .estimator import calibrate, locate
from .geometry import SetupConfig, perimeter_positions
from .noisegen import CovarianceFactor, MeasurementSet, synthesize
from .propagation import PropagationParams
from . import plots

SCHEMA_VERSION = 1
MEASUREMENT_HEADER = ["x_m", "y_m", "repeat", "power_dbm"]
MAX_ABS_POWER_DBM = 200.0
DEFAULT_DENSITIES = (0.1, 0.2, 0.5, 1.0, 2.0, 4.0, 8.0, 12.0, 16.0, 20.0, 25.0)

CONFIG_DEFAULTS = {
    "side_length_m": 3.0,
    "spacing_m": 0.005,
    "wavelength_m": 0.125,
    "blind_x_m": 0.0,
    "blind_y_m": 0.0,
    "seed": 0,
    "correlation": "sinc2",
    "chi_m": None,
    "p_r0_dbm": -16.7,
    "eta": 3.36,
    "sigma_db": 1.68,
    "r0_m": 1.0,
}
_INT_KEYS = {"seed"}
_STR_KEYS = {"correlation"}


@dataclass(eq=False)
class RunManifest:
    """Record of one CLI run: enough to reproduce its outputs byte for byte."""

    command: str
    config_hash: str
    seed: int
    tool_version: str
    outputs: list[str]


def _fmt(value) -> str:
    """Round-trip float formatting for CSV cells."""
    return repr(float(value))


def load_config(path: str | Path | None) -> dict:
    """Parse a flat key=value config file; unknown keys are hard errors."""
    cfg = dict(CONFIG_DEFAULTS)
    if path is None:
        return cfg
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_DEFAULTS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        if key in _STR_KEYS:
            cfg[key] = value
        elif key in _INT_KEYS:
            cfg[key] = int(value)
        else:
            cfg[key] = float(value)
    return cfg


def config_hash(cfg: dict) -> str:
    payload = "\n".join(f"{k}={cfg[k]!r}" for k in sorted(cfg))
    return hashlib.sha256(payload.encode()).hexdigest()


def make_setup(cfg: dict) -> SetupConfig:
    return SetupConfig.square(
        side_length=cfg["side_length_m"], spacing=cfg["spacing_m"],
        wavelength=cfg["wavelength_m"],
        blind_position=(cfg["blind_x_m"], cfg["blind_y_m"]),
    )


def make_params(cfg: dict) -> PropagationParams:
    return PropagationParams(p_r0=cfg["p_r0_dbm"], eta=cfg["eta"],
                             sigma_db=cfg["sigma_db"], r0=cfg["r0_m"])


def make_kernel(cfg: dict) -> CorrelationKernel:
    return CorrelationKernel.from_name(cfg["correlation"], cfg["wavelength_m"], cfg["chi_m"])


def write_measurements(meas: MeasurementSet, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MEASUREMENT_HEADER)
        for m in range(meas.repeats):
            block = meas.powers[m * meas.n_positions:(m + 1) * meas.n_positions]
            for (x, y), p in zip(meas.positions, block):
                writer.writerow([_fmt(x), _fmt(y), m, _fmt(p)])


def ingest_measurements(path: str | Path) -> MeasurementSet:
    """Parse a measurement CSV into a MeasurementSet.

    Positions are deduplicated in file order; each (position, repeat) cell
    must appear exactly once. Malformed rows are rejected with their line
    number, as are powers outside +-200 dBm.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError("file is empty", line=1)
        if [h.strip() for h in header] != MEASUREMENT_HEADER:
            raise CsvFormatError(
                f"expected header {','.join(MEASUREMENT_HEADER)}, got {','.join(header)}", line=1
            )
        index: dict[tuple[float, float], int] = {}
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise CsvFormatError(f"expected 4 fields, got {len(row)}", line=lineno)
            try:
                x, y = float(row[0]), float(row[1])
                rep = int(row[2])
                power = float(row[3])
            except ValueError as exc:
                raise CsvFormatError(str(exc), line=lineno)
            if not np.isfinite(power) or abs(power) > MAX_ABS_POWER_DBM:
                raise CsvFormatError(f"power {row[3]} dBm fails unit sanity", line=lineno)
            if rep < 0:
                raise CsvFormatError(f"negative repeat index {rep}", line=lineno)
            key = (x, y)
            if key not in index:
                index[key] = len(index)
            rows.append((index[key], rep, power, lineno))
    if not rows:
        raise DegenerateInputError(f"{path}: no measurement rows")
    n = len(index)
    repeats = max(rep for _, rep, _, _ in rows) + 1
    powers = np.full(repeats * n, np.nan)
    for pos_idx, rep, power, lineno in rows:
        flat = rep * n + pos_idx
        if not np.isnan(powers[flat]):
            raise CsvFormatError("duplicate position/repeat measurement", line=lineno)
        powers[flat] = power
    if np.isnan(powers).any():
        raise CsvFormatError(
            f"incomplete repeat structure: {int(np.isnan(powers).sum())} missing cells"
        )
    positions = np.array(list(index.keys()), dtype=float)
    return MeasurementSet(positions=positions, powers=powers, repeats=repeats, seed=0)


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_sidecar(path: Path, command: str, cfg: dict, extra: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, "command": command,
               "config": cfg, "tool_version": __version__}
    payload.update(extra)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _covariance_rows(curve: CovarianceCurve) -> list[list[str]]:
    corr = curve.correlation
    rows = []
    for center, cov, rho, count in zip(curve.bin_centers, curve.covariance, corr, curve.counts):
        if count > 0:
            rows.append([_fmt(center), _fmt(cov), _fmt(rho), str(int(count))])
        else:
            rows.append([_fmt(center), "", "", "0"])
    return rows


def _read_covariance_csv(path: Path) -> CovarianceCurve:
    centers, covs, counts = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["sep_m", "covariance_db2"]:
            raise CsvFormatError(f"not a covariance CSV: header {','.join(header)}", line=1)
        for row in reader:
            centers.append(float(row[0]))
            covs.append(float(row[1]) if row[1] else np.nan)
            counts.append(int(row[3]))
    return CovarianceCurve(bin_centers=np.array(centers), covariance=np.array(covs),
                           counts=np.array(counts))


def _synthesize_sets(setup, params, kernel, n_sets: int, seed: int) -> MeasurementSet:
    """Stack independent synthetic draws as the repeats of one measurement set."""
    positions = perimeter_positions(setup)
    if kernel.kind == "independent":
        factor = CovarianceFactor(params.sigma_db**2 * np.eye(len(positions)))
    else:
        factor = CovarianceFactor(build_covariance(kernel, positions, params.sigma_db))
    set_seeds = np.random.SeedSequence(seed).generate_state(n_sets, dtype=np.uint64)
    blocks = []
    for s in range(n_sets):
        meas = synthesize(setup, params, kernel, repeats=1, seed=int(set_seeds[s]),
                          positions=positions, factor=factor)
        blocks.append(meas.powers)
    return MeasurementSet(positions=positions, powers=np.concatenate(blocks),
                          repeats=n_sets, seed=seed)


# --- command implementations; each returns the list of files it wrote ---


def _cmd_simulate(args, cfg, setup, params, kernel, out: Path) -> list[Path]:
    meas = synthesize(setup, params, kernel, repeats=args.repeats, seed=cfg["seed"],
                      temporal_std_db=args.temporal_noise_db)
    csv_path = out / "measurements.csv"
    write_measurements(meas, csv_path)
    png_path = out / "measurements.png"
    plots.save_measurements(meas, params, setup.blind_position, png_path)
    meta_path = out / "measurements.meta.json"
    _write_sidecar(meta_path, "simulate", cfg,
                   {"repeats": args.repeats, "temporal_noise_db": args.temporal_noise_db,
                    "seed": cfg["seed"]})
    return [csv_path, png_path, meta_path]


def _cmd_calibrate(args, cfg, setup, params, kernel, out: Path) -> list[Path]:
    meas = ingest_measurements(args.input)
    fit = calibrate(meas, setup.blind_position)
    csv_path = out / "calibration.csv"
    _write_csv(csv_path, ["p_r0_dbm", "eta", "sigma_db"],
               [[_fmt(fit.p_r0), _fmt(fit.eta), _fmt(fit.sigma_db)]])
    png_path = out / "calibration.png"
    plots.save_measurements(meas, fit, setup.blind_position, png_path)
    return [csv_path, png_path]


def _cmd_locate(args, cfg, setup, params, kernel, out: Path) -> list[Path]:
    meas = ingest_measurements(args.input)
    result = locate(meas, config=setup)
    csv_path = out / "location.csv"
    _write_csv(csv_path,
               ["x_mle_m", "y_mle_m", "p_r0_dbm", "eta", "objective", "converged"],
               [[_fmt(result.x_mle), _fmt(result.y_mle), _fmt(result.p_r0_mle),
                 _fmt(result.eta_mle), _fmt(result.objective_value),
                 "true" if result.converged else "false"]])
    png_path = out / "location.png"
    plots.save_location(meas, result.position, setup.blind_position,
                        setup.bounds_x, setup.bounds_y, png_path)
    return [csv_path, png_path]


def _cmd_crlb_curve(args, cfg, setup, params, kernel, out: Path) -> list[Path]:
    densities = [float(d) for d in args.densities.split(",")] if args.densities \
        else list(DEFAULT_DENSITIES)
    reports = bound_sweep(setup, params, kernel, densities, full_trace=args.full_trace)
    rows = []
    for r in reports:
        rows.append([
            _fmt(r.density_per_lambda), str(r.n), _fmt(r.n_eff), _fmt(r.rmse_crlb_indep),
            _fmt(r.rmse_crlb_correlated) if r.rmse_crlb_correlated is not None else "",
            _fmt(r.rmse_bienayme), "true" if r.degenerate else "false",
        ])
    csv_path = out / "crlb_curve.csv"
    _write_csv(csv_path, ["density_per_lambda", "n", "n_eff", "rmse_indep_m",
                          "rmse_corr_m", "rmse_bienayme_m", "degenerate"], rows)
    png_path = out / "crlb_curve.png"
    plots.save_bound_curves(reports, setup.wavelength, png_path)
    return [csv_path, png_path]


def _cmd_mc_study(args, cfg, setup, params, kernel, out: Path) -> list[Path]:
    # The density override was already folded into the setup spacing by run().
    report = monte_carlo(setup, params, kernel, runs=args.runs,
                         seed=cfg["seed"], repeats=args.repeats)
    csv_path = out / "mc_study.csv"
    _write_csv(csv_path, ["runs", "bias_m", "rmse_m", "efficiency_gap_m", "crlb_m"],
               [[str(report.runs), _fmt(report.bias_m), _fmt(report.rmse_m),
                 _fmt(report.efficiency_gap_m), _fmt(report.crlb_reference_m)]])
    written = [csv_path]
    if args.per_run:
        run_rows = [[str(i), _fmt(x), _fmt(y)]
                    for i, (x, y) in enumerate(report.estimates)]
        per_run_path = out / "mc_runs.csv"
        _write_csv(per_run_path, ["run", "x_mle_m", "y_mle_m"], run_rows)
        written.append(per_run_path)
    png_path = out / "mc_study.png"
    plots.save_monte_carlo(report, setup.wavelength, png_path)
    written.append(png_path)
    return written


def _analysis_curve(args, cfg, setup, params, kernel):
    if args.input:
        meas = ingest_measurements(args.input)
    else:
        meas = _synthesize_sets(setup, params, kernel, args.sets, cfg["seed"])
    fit = calibrate(meas, setup.blind_position)
    sets = residual_sets(meas, fit, setup.blind_position)
    bin_width = args.bin_width if args.bin_width else setup.spacing
    max_sep = args.max_sep if args.max_sep else 4.0 * setup.wavelength
    return spatial_covariance(sets, bin_width=bin_width, max_sep=max_sep)


def _cmd_corr_analyze(args, cfg, setup, params, kernel, out: Path) -> list[Path]:
    curve = _analysis_curve(args, cfg, setup, params, kernel)
    csv_path = out / "covariance.csv"
    _write_csv(csv_path, ["sep_m", "covariance_db2", "correlation", "count"],
               _covariance_rows(curve))
    png_path = out / "covariance.png"
    plots.save_covariance_curve(curve, setup.wavelength, png_path)
    return [csv_path, png_path]


def _cmd_spectrum(args, cfg, setup, params, kernel, out: Path) -> list[Path]:
    if args.covariance:
        curve = _read_covariance_csv(Path(args.covariance))
    else:
        curve = _analysis_curve(args, cfg, setup, params, kernel)
    spec = spatial_spectrum(curve, wavelength=setup.wavelength)
    csv_path = out / "spectrum.csv"
    _write_csv(csv_path, ["k_rad_per_m", "power_norm"],
               [[_fmt(k), _fmt(p)] for k, p in zip(spec.k_values, spec.power)])
    png_path = out / "spectrum.png"
    plots.save_spectrum(spec, setup.wavelength, png_path)
    return [csv_path, png_path]


_COMMANDS = {
    "simulate": _cmd_simulate,
    "calibrate": _cmd_calibrate,
    "locate": _cmd_locate,
    "crlb-curve": _cmd_crlb_curve,
    "mc-study": _cmd_mc_study,
    "corr-analyze": _cmd_corr_analyze,
    "spectrum": _cmd_spectrum,
}


def run(args: argparse.Namespace) -> RunManifest:
    """Execute one command and write its outputs and manifest."""
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.kernel is not None:
        if args.kernel not in KERNEL_NAMES:
            raise ConfigError(f"unknown kernel {args.kernel!r}")
        cfg["correlation"] = args.kernel
    if args.chi is not None:
        cfg["chi_m"] = args.chi
    if getattr(args, "density", None):
        wavelength = cfg["wavelength_m"]
        n = max(4, int(round(4 * cfg["side_length_m"] * args.density / wavelength)))
        cfg["spacing_m"] = 4 * cfg["side_length_m"] / n

    setup = make_setup(cfg)
    params = make_params(cfg)
    kernel = make_kernel(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    outputs = _COMMANDS[args.command](args, cfg, setup, params, kernel, out)
    manifest = RunManifest(
        command=args.command, config_hash=config_hash(cfg), seed=cfg["seed"],
        tool_version=__version__, outputs=[str(p) for p in outputs],
    )
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps({
        "schema_version": SCHEMA_VERSION,
        "command": manifest.command,
        "config_hash": manifest.config_hash,
        "seed": manifest.seed,
        "tool_version": manifest.tool_version,
        "outputs": manifest.outputs,
    }, indent=2, sort_keys=True) + "\n")
    return manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rssbounds",
        description="Far-field RSS localization: simulation, estimation and precision bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, density=True):
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--kernel", choices=sorted(KERNEL_NAMES), default=None,
                       help="correlation kernel override")
        p.add_argument("--chi", type=float, default=None,
                       help="correlation length override in meters")
        if density:
            p.add_argument("--density", type=float, default=None,
                           help="samples per wavelength (overrides config spacing)")

    p = sub.add_parser("simulate", help="synthesize a measurement set")
    common(p)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--temporal-noise-db", type=float, default=0.0,
                   help="per-repeat independent noise level")

    p = sub.add_parser("calibrate", help="fit propagation parameters from a CSV")
    common(p, density=False)
    p.add_argument("--input", required=True, help="measurement CSV")

    p = sub.add_parser("locate", help="estimate the blind position from a CSV")
    common(p, density=False)
    p.add_argument("--input", required=True, help="measurement CSV")

    p = sub.add_parser("crlb-curve", help="bounds across a density sweep")
    common(p, density=False)
    p.add_argument("--densities", default=None,
                   help="comma-separated samples-per-wavelength list")
    p.add_argument("--full-trace", action="store_true",
                   help="use the full trace of the inverse Fisher matrix")

    p = sub.add_parser("mc-study", help="Monte Carlo estimator study")
    common(p)
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--per-run", action="store_true", help="also write per-run estimates")

    p = sub.add_parser("corr-analyze", help="spatial cross-covariance of residuals")
    common(p)
    p.add_argument("--input", default=None, help="measurement CSV (repeats become sets)")
    p.add_argument("--sets", type=int, default=25, help="synthetic residual sets")
    p.add_argument("--bin-width", type=float, default=None)
    p.add_argument("--max-sep", type=float, default=None)

    p = sub.add_parser("spectrum", help="power spectrum of the cross-covariance")
    common(p)
    p.add_argument("--input", default=None, help="measurement CSV (repeats become sets)")
    p.add_argument("--sets", type=int, default=25)
    p.add_argument("--bin-width", type=float, default=None)
    p.add_argument("--max-sep", type=float, default=None)
    p.add_argument("--covariance", default=None,
                   help="existing covariance CSV to transform instead of recomputing")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run(args)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
