"""Figure rendering for the report-producing CLI commands.

Each report command writes a PNG next to its CSV. Rendering is headless
(Agg) and free of timestamps so repeated runs produce stable artifacts.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import CovarianceCurve, MonteCarloReport, SpectrumCurve
from .bounds import BoundReport
from .geometry import distances_to
from .noisegen import MeasurementSet
from .propagation import PropagationParams, mean_power


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_bound_curves(reports: list[BoundReport], wavelength: float, path) -> None:
    """RMSE bounds versus sampling density, log-log."""
    dens = np.array([r.density_per_lambda for r in reports])
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.loglog(dens, [r.rmse_crlb_indep for r in reports], "g-o", ms=4,
              label="CRLB, independent noise")
    ax.loglog(dens, [r.rmse_bienayme for r in reports], "b-s", ms=4,
              label="effective-count bound")
    exact_d = [r.density_per_lambda for r in reports if r.rmse_crlb_correlated is not None]
    exact_v = [r.rmse_crlb_correlated for r in reports if r.rmse_crlb_correlated is not None]
    if exact_v:
        ax.loglog(exact_d, exact_v, "k^", ms=6, mfc="none", label="CRLB, correlated noise")
    ax.axhline(wavelength / 2.0, color="0.5", ls="--", lw=1, label="half wavelength")
    ax.set_xlabel("samples per wavelength")
    ax.set_ylabel("RMSE bound (m)")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    _finish(fig, path)


def save_covariance_curve(curve: CovarianceCurve, wavelength: float, path) -> None:
    """Normalized spatial cross-covariance versus separation in wavelengths."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    sep = curve.bin_centers / wavelength
    ax.plot(sep, curve.correlation, "k-", lw=1)
    ax.axvline(0.5, color="r", ls="--", lw=1, label="half wavelength")
    ax.set_xlabel("separation (wavelengths)")
    ax.set_ylabel("normalized cross-covariance")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    _finish(fig, path)


def save_spectrum(curve: SpectrumCurve, wavelength: float, path) -> None:
    """Spatial power spectrum with the cutoff at twice the wavenumber."""
    k_cut = 2.0 * (2.0 * np.pi / wavelength)
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.plot(curve.k_values, curve.power, "k-", lw=1)
    ax.axvline(k_cut, color="r", ls="--", lw=1, label="4 pi / wavelength")
    ax.set_xlabel("spatial frequency k (rad/m)")
    ax.set_ylabel("normalized power")
    ax.set_xlim(0, min(curve.k_values.max(), 3 * k_cut))
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    _finish(fig, path)


def save_measurements(meas: MeasurementSet, params: PropagationParams | None,
                      blind, path) -> None:
    """Measured powers versus distance, with the model mean when available."""
    r = np.tile(distances_to(meas.positions, blind), meas.repeats)
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.plot(r, meas.powers, ".", ms=2, alpha=0.4, color="tab:blue", label="measurements")
    if params is not None:
        grid = np.linspace(r.min(), r.max(), 200)
        ax.plot(grid, mean_power(params, grid), "r-", lw=1.5, label="model mean")
    ax.set_xlabel("distance (m)")
    ax.set_ylabel("power (dBm)")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    _finish(fig, path)


def save_location(meas: MeasurementSet, estimate, blind, bounds_x, bounds_y, path) -> None:
    """Reference positions, true blind position and the estimate."""
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    ax.plot(meas.positions[:, 0], meas.positions[:, 1], ".", ms=2, color="0.6",
            label="reference positions")
    if blind is not None:
        ax.plot(blind[0], blind[1], "r+", ms=12, mew=2, label="blind radio")
    ax.plot(estimate[0], estimate[1], "bx", ms=10, mew=2, label="estimate")
    ax.set_xlim(bounds_x[0] - 0.2, bounds_x[1] + 0.2)
    ax.set_ylim(bounds_y[0] - 0.2, bounds_y[1] + 0.2)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.legend(fontsize=8, loc="upper right")
    _finish(fig, path)


def save_monte_carlo(report: MonteCarloReport, wavelength: float, path) -> None:
    """Empirical RMSE against its reference bound."""
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    bars = ["empirical RMSE", "reference bound", "bias"]
    values = [report.rmse_m, report.crlb_reference_m, report.bias_m]
    ax.bar(bars, values, color=["tab:red", "tab:blue", "0.6"])
    ax.axhline(wavelength / 2.0, color="0.4", ls="--", lw=1, label="half wavelength")
    ax.set_ylabel("meters")
    ax.set_title(f"{report.runs} runs, {report.nonconverged} non-converged")
    ax.legend(fontsize=8)
    _finish(fig, path)
