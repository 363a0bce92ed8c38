"""Fisher information and lower bounds on localization RMSE.

Three bounds are computed per sampling density:

* the independent-noise CRLB, which falls off as 1/sqrt(n) indefinitely;
* the exact correlated-noise CRLB, available while the covariance matrix is
  well conditioned;
* the effective-measurement-corrected bound sqrt(n / n_eff) times the
  independent CRLB, which stays finite and exposes the precision floor set
  by the spatial correlation length.

The RMSE bound uses the (x, y) block of the inverse Fisher matrix with the
model nuisances (p_r0, eta) retained in the inversion; the full-trace
variant, which mixes units, is available behind ``full_trace=True``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlation import CorrelationKernel, build_covariance, effective_count, mean_correlation
from .errors import RankDeficiencyError, SingularCovarianceError
from .geometry import SetupConfig, perimeter_positions
from .noisegen import CLIP_FRACTION
from .propagation import PropagationParams

CONDITION_LIMIT = 1e12

PARAMETER_NAMES = ("x", "y", "p_r0", "eta")


@dataclass(eq=False)
class FisherMatrix:
    """4x4 Fisher information over [x, y, p_r0, eta]."""

    matrix: np.ndarray
    parameterization: tuple[str, ...] = PARAMETER_NAMES
    regularized: bool = False


@dataclass(eq=False)
class BoundReport:
    """Bound figures for one sampling density."""

    density_per_lambda: float
    n: int
    rho_bar: float
    n_eff: float
    rmse_crlb_indep: float
    rmse_crlb_correlated: float | None
    rmse_bienayme: float
    condition_number: float
    degenerate: bool


def mean_jacobian(params: PropagationParams, positions: np.ndarray, blind) -> np.ndarray:
    """Jacobian of the mean power vector w.r.t. [x, y, p_r0, eta] at ``blind``.

    Row i is [-b (x - x_i)/r_i^2, -b (y - y_i)/r_i^2, 1, -(10/ln 10) ln(r_i/r0)]
    with b = 10 eta / ln 10.
    """
    dx = blind[0] - positions[:, 0]
    dy = blind[1] - positions[:, 1]
    r2 = dx * dx + dy * dy
    if np.any(r2 == 0.0):
        raise ValueError("a reference position coincides with the blind position")
    b = 10.0 * params.eta / np.log(10.0)
    return np.stack([
        -b * dx / r2,
        -b * dy / r2,
        np.ones_like(r2),
        -(10.0 / np.log(10.0)) * (0.5 * np.log(r2) - np.log(params.r0)),
    ], axis=1)


def fisher_independent(jacobian: np.ndarray, sigma_db: float) -> FisherMatrix:
    """Fisher matrix J^T J / sigma^2 for independent noise of level sigma_db."""
    if sigma_db <= 0:
        raise ValueError("sigma_db must be positive")
    f = jacobian.T @ jacobian / sigma_db**2
    return FisherMatrix(matrix=(f + f.T) / 2.0)


def fisher(jacobian: np.ndarray, cov: np.ndarray, allow_singular: bool = False) -> FisherMatrix:
    """Fisher matrix J^T C^-1 J for Gaussian noise with covariance ``cov``.

    The covariance term of the information vanishes because C does not depend
    on the parameters. Singular or ill-conditioned covariances raise
    SingularCovarianceError unless ``allow_singular`` requests the
    eigenvalue-clipped pseudo-inverse, in which case the result is flagged.
    """
    w, v = np.linalg.eigh(np.asarray(cov, dtype=float))
    threshold = CLIP_FRACTION * cov.diagonal().max()
    kept = w > threshold
    condition = np.inf if w.min() <= 0 else float(w.max() / w.min())
    degenerate = (not kept.all()) or condition > CONDITION_LIMIT
    if degenerate and not allow_singular:
        raise SingularCovarianceError(
            f"covariance condition number {condition:.3g} exceeds {CONDITION_LIMIT:.0g}; "
            "pass allow_singular=True for the regularized pseudo-inverse"
        )
    basis = v[:, kept].T @ jacobian
    f = basis.T @ (basis / w[kept, None])
    return FisherMatrix(matrix=(f + f.T) / 2.0, regularized=degenerate)


def crlb_rmse(fim: FisherMatrix, full_trace: bool = False) -> float:
    """Lower bound on position RMSE from a Fisher matrix.

    Default: sqrt of the (x, y) trace of the inverse Fisher matrix.
    ``full_trace`` sums all four diagonal entries instead.
    """
    matrix = fim.matrix
    if not np.all(np.isfinite(matrix)) or np.linalg.cond(matrix) > CONDITION_LIMIT:
        raise RankDeficiencyError("Fisher matrix is rank deficient; bound undefined")
    inverse = np.linalg.inv(matrix)
    if full_trace:
        return float(np.sqrt(np.trace(inverse)))
    return float(np.sqrt(inverse[0, 0] + inverse[1, 1]))


def bienayme_bound(fim_indep: FisherMatrix, n: int, n_eff: float,
                   full_trace: bool = False) -> float:
    """Effective-measurement-corrected bound sqrt(n / n_eff) * independent CRLB."""
    if n_eff <= 0:
        raise ValueError("n_eff must be positive")
    return float(np.sqrt(n / n_eff)) * crlb_rmse(fim_indep, full_trace=full_trace)


def bound_report(cfg: SetupConfig, params: PropagationParams, kernel: CorrelationKernel,
                 full_trace: bool = False) -> BoundReport:
    """All bound figures for the sampling density of ``cfg``."""
    positions = perimeter_positions(cfg)
    n = len(positions)
    jac = mean_jacobian(params, positions, cfg.blind_position)
    fim_indep = fisher_independent(jac, params.sigma_db)
    rmse_indep = crlb_rmse(fim_indep, full_trace=full_trace)

    if kernel.kind == "independent":
        rho_bar = 0.0
        n_eff = float(n)
        # C = sigma^2 I: the correlated bound is the independent one.
        return BoundReport(
            density_per_lambda=cfg.density_per_wavelength, n=n, rho_bar=rho_bar,
            n_eff=n_eff, rmse_crlb_indep=rmse_indep, rmse_crlb_correlated=rmse_indep,
            rmse_bienayme=rmse_indep, condition_number=1.0, degenerate=False,
        )

    rho_bar = mean_correlation(kernel, positions)
    n_eff = effective_count(n, rho_bar)
    rmse_b = bienayme_bound(fim_indep, n, n_eff, full_trace=full_trace)

    cov = build_covariance(kernel, positions, params.sigma_db)
    w = np.linalg.eigvalsh(cov)
    condition = np.inf if w.min() <= 0 else float(w.max() / w.min())
    degenerate = w.min() <= CLIP_FRACTION * params.sigma_db**2 or condition > CONDITION_LIMIT
    rmse_corr = None
    if not degenerate:
        rmse_corr = crlb_rmse(fisher(jac, cov), full_trace=full_trace)
    return BoundReport(
        density_per_lambda=cfg.density_per_wavelength, n=n, rho_bar=rho_bar,
        n_eff=n_eff, rmse_crlb_indep=rmse_indep, rmse_crlb_correlated=rmse_corr,
        rmse_bienayme=rmse_b, condition_number=condition, degenerate=degenerate,
    )


def bound_sweep(cfg: SetupConfig, params: PropagationParams, kernel: CorrelationKernel,
                densities, full_trace: bool = False) -> list[BoundReport]:
    """Bound figures across a sweep of sampling densities (samples per wavelength)."""
    reports = []
    for density in densities:
        if density <= 0:
            raise ValueError("densities must be positive")
        reports.append(bound_report(cfg.with_density(density), params, kernel,
                                    full_trace=full_trace))
    return reports
