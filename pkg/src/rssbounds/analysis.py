"""Empirical spatial statistics and Monte Carlo estimator studies.

This module measures what the bounds module predicts: the spatial
cross-covariance of model residuals (whose first minimum locates the
correlation length), its spatial power spectrum (whose support ends at twice
the wavenumber), and the bias/RMSE/efficiency of the position estimator over
repeated synthetic experiments.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .bounds import bienayme_bound, crlb_rmse, fisher_independent, mean_jacobian
from .correlation import CorrelationKernel, build_covariance, effective_count, mean_correlation
from .errors import ConvergenceError, DegenerateInputError, SpanError
from .estimator import locate
from .geometry import SetupConfig, perimeter_positions
from .noisegen import CovarianceFactor, MeasurementSet, synthesize
from .propagation import PropagationParams, mean_power_vector

# Fraction of runs allowed to end without solver convergence.
MAX_NONCONVERGED_FRACTION = 0.01
MIN_MONTE_CARLO_RUNS = 100


@dataclass(eq=False)
class CovarianceCurve:
    """Binned spatial cross-covariance of residuals.

    ``covariance[k]`` averages residual products over all pairs whose
    separation falls in bin k (NaN where ``counts[k]`` is zero); bin 0 holds
    the residual variance.
    """

    bin_centers: np.ndarray
    covariance: np.ndarray
    counts: np.ndarray

    @property
    def correlation(self) -> np.ndarray:
        """Covariance normalized by the zero-separation variance."""
        return self.covariance / self.covariance[0]

    def first_minimum(self) -> int | None:
        """Index of the first local minimum past zero separation, if any."""
        c = self.covariance
        valid = self.counts > 0
        for k in range(1, len(c) - 1):
            if not (valid[k - 1] and valid[k] and valid[k + 1]):
                continue
            if c[k] <= c[k - 1] and c[k] <= c[k + 1]:
                return k
        return None


@dataclass(eq=False)
class SpectrumCurve:
    """Normalized spatial power spectrum: ``power`` sums to 1 over ``k_values``."""

    k_values: np.ndarray
    power: np.ndarray

    def power_fraction_below(self, k_cut: float) -> float:
        return float(self.power[self.k_values <= k_cut].sum())


@dataclass(eq=False)
class MonteCarloReport:
    """Aggregate estimator quality over repeated synthetic experiments."""

    runs: int
    bias_m: float
    rmse_m: float
    efficiency_gap_m: float
    crlb_reference_m: float
    nonconverged: int = 0
    estimates: np.ndarray | None = None


def residuals(meas: MeasurementSet, params: PropagationParams, blind) -> np.ndarray:
    """Deviations of measured powers from the model mean, one per measurement."""
    mean = mean_power_vector(params, meas.positions, blind)
    return meas.powers - np.tile(mean, meas.repeats)


def residual_sets(meas: MeasurementSet, params: PropagationParams, blind):
    """Split a measurement set into one (positions, residuals) pair per repeat."""
    res = residuals(meas, params, blind).reshape(meas.repeats, meas.n_positions)
    return [(meas.positions, res[m]) for m in range(meas.repeats)]


def spatial_covariance(sets, bin_width: float, max_sep: float) -> CovarianceCurve:
    """Binned cross-covariance of residual sets as a function of separation.

    ``sets`` is a sequence of (positions, residuals) pairs. Pairs of distinct
    positions are binned by rounding separation / bin_width; products are
    averaged within each bin over all sets. Bin 0 accumulates the
    zero-separation products, i.e. the residual variance.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    n_bins = int(round(max_sep / bin_width)) + 1
    sums = np.zeros(n_bins)
    counts = np.zeros(n_bins, dtype=np.int64)

    cached_key = None
    cached_pairs = None
    for positions, res in sets:
        res = np.asarray(res, dtype=float)
        if len(positions) < 2:
            raise DegenerateInputError("each residual set needs at least 2 positions")
        key = id(positions)
        if key != cached_key:
            d = pdist(positions)
            bins = np.round(d / bin_width).astype(np.int64)
            mask = bins < n_bins
            iu, ju = np.triu_indices(len(positions), 1)
            cached_pairs = (bins[mask], iu[mask], ju[mask])
            cached_key = key
        bins, iu, ju = cached_pairs
        products = res[iu] * res[ju]
        sums += np.bincount(bins, weights=products, minlength=n_bins)
        counts += np.bincount(bins, minlength=n_bins)
        sums[0] += float(res @ res)
        counts[0] += res.size

    with np.errstate(invalid="ignore"):
        covariance = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return CovarianceCurve(
        bin_centers=np.arange(n_bins) * bin_width,
        covariance=covariance,
        counts=counts,
    )


def spatial_spectrum(curve: CovarianceCurve, wavelength: float | None = None) -> SpectrumCurve:
    """Spatial power spectrum of a covariance curve (Blackman-Tukey estimate).

    The binned covariance is symmetrized about zero separation and Fourier
    transformed; magnitudes are normalized to unit total power. Empty interior
    bins are filled by linear interpolation. When ``wavelength`` is given the
    curve must span at least one wavelength, otherwise the spectral cutoff
    cannot be resolved.
    """
    span = curve.bin_centers[-1]
    if wavelength is not None and span < wavelength:
        raise SpanError(f"covariance span {span} m is below one wavelength {wavelength} m")
    c = curve.covariance.astype(float).copy()
    missing = ~np.isfinite(c)
    if missing.all():
        raise DegenerateInputError("covariance curve has no populated bins")
    if missing.any():
        idx = np.arange(len(c))
        c[missing] = np.interp(idx[missing], idx[~missing], c[~missing])
    symmetric = np.concatenate([c[::-1], c[1:]])
    power = np.abs(np.fft.rfft(symmetric))
    bin_width = curve.bin_centers[1] - curve.bin_centers[0] if len(c) > 1 else 1.0
    k_values = 2.0 * np.pi * np.fft.rfftfreq(len(symmetric), d=bin_width)
    total = power.sum()
    if total == 0:
        raise DegenerateInputError("covariance curve has no power")
    return SpectrumCurve(k_values=k_values, power=power / total)


def monte_carlo(cfg: SetupConfig, params: PropagationParams, kernel: CorrelationKernel,
                runs: int, density: float | None = None, seed: int = 0,
                repeats: int = 1) -> MonteCarloReport:
    """Estimator bias, RMSE and efficiency over ``runs`` synthetic experiments.

    Each run synthesizes a fresh measurement set (per-run seeds derived from
    the master seed) and locates the blind radio. The reference bound is the
    independent-noise CRLB for the independent kernel and the
    effective-measurement-corrected bound for correlated kernels; the
    efficiency gap is |RMSE - reference|.
    """
    if runs < MIN_MONTE_CARLO_RUNS:
        raise DegenerateInputError(f"need at least {MIN_MONTE_CARLO_RUNS} runs, got {runs}")
    run_cfg = cfg.with_density(density) if density is not None else cfg
    positions = perimeter_positions(run_cfg)
    n = len(positions)
    if kernel.kind == "independent":
        factor = CovarianceFactor(params.sigma_db**2 * np.eye(n))
    else:
        factor = CovarianceFactor(build_covariance(kernel, positions, params.sigma_db))

    jac = mean_jacobian(params, positions, run_cfg.blind_position)
    fim = fisher_independent(jac, params.sigma_db) if params.sigma_db > 0 else None
    if fim is None:
        reference = 0.0
    elif kernel.kind == "independent":
        reference = crlb_rmse(fim)
    else:
        rho_bar = mean_correlation(kernel, positions)
        reference = bienayme_bound(fim, n, effective_count(n, rho_bar))

    run_seeds = np.random.SeedSequence(seed).generate_state(runs, dtype=np.uint64)
    estimates = np.empty((runs, 2))
    nonconverged = 0
    for k in range(runs):
        meas = synthesize(run_cfg, params, kernel, repeats=repeats, seed=int(run_seeds[k]),
                          positions=positions, factor=factor)
        result = locate(meas, config=run_cfg)
        if not result.converged:
            nonconverged += 1
        estimates[k] = result.position

    if nonconverged > MAX_NONCONVERGED_FRACTION * runs:
        raise ConvergenceError(f"{nonconverged}/{runs} runs did not converge")

    blind = np.asarray(run_cfg.blind_position)
    errors = estimates - blind
    bias = float(np.hypot(*errors.mean(axis=0)))
    rmse = float(np.sqrt(np.mean(np.sum(errors**2, axis=1))))
    return MonteCarloReport(
        runs=runs, bias_m=bias, rmse_m=rmse,
        efficiency_gap_m=abs(rmse - reference),
        crlb_reference_m=reference, nonconverged=nonconverged,
        estimates=estimates,
    )
