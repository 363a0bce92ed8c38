"""rssbounds: simulation and precision-bound analysis for far-field RSS localization.

Synthesizes spatially correlated received-signal-strength measurements,
estimates transmitter position by constrained maximum likelihood, and
computes Cramer-Rao lower bounds under independent noise, correlated
Gaussian noise and the effective-measurement-count correction, exposing the
localization precision floor of roughly half a wavelength.
"""

__version__ = "0.1.0"

from .geometry import SetupConfig, perimeter_positions, distance
from .propagation import PropagationParams, DEFAULT_PARAMS, mean_power, mean_power_vector
from .correlation import (CorrelationKernel, kernel_eval, build_covariance,
                          mean_correlation, effective_count)
from .noisegen import MeasurementSet, CovarianceFactor, sample_noise, synthesize
from .estimator import EstimateResult, calibrate, locate
from .bounds import (FisherMatrix, BoundReport, mean_jacobian, fisher,
                     fisher_independent, crlb_rmse, bienayme_bound,
                     bound_report, bound_sweep)
from .analysis import (CovarianceCurve, SpectrumCurve, MonteCarloReport,
                       residuals, residual_sets, spatial_covariance,
                       spatial_spectrum, monte_carlo)

__all__ = [
    "__version__",
    "SetupConfig", "perimeter_positions", "distance",
    "PropagationParams", "DEFAULT_PARAMS", "mean_power", "mean_power_vector",
    "CorrelationKernel", "kernel_eval", "build_covariance",
    "mean_correlation", "effective_count",
    "MeasurementSet", "CovarianceFactor", "sample_noise", "synthesize",
    "EstimateResult", "calibrate", "locate",
    "FisherMatrix", "BoundReport", "mean_jacobian", "fisher",
    "fisher_independent", "crlb_rmse", "bienayme_bound",
    "bound_report", "bound_sweep",
    "CovarianceCurve", "SpectrumCurve", "MonteCarloReport",
    "residuals", "residual_sets", "spatial_covariance",
    "spatial_spectrum", "monte_carlo",
]
