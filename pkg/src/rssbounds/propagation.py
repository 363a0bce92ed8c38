"""Log-normal shadowing model: mean received power over distance.

Powers are carried in dBm end to end; the equivalent non-logarithmic gain
form is intentionally not a second code path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FarFieldError
from .geometry import distances_to


@dataclass(frozen=True)
class PropagationParams:
    """Path-loss model constants: reference power, exponent, noise level.

    ``eta > 0`` is required (power must decay with distance).
    """

    p_r0: float
    eta: float
    sigma_db: float
    r0: float = 1.0

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.sigma_db < 0:
            raise ValueError("sigma_db must be nonnegative")
        if self.r0 <= 0:
            raise ValueError("r0 must be positive")


# Values obtained by calibrating the model on the reference 2.4 GHz dataset.
DEFAULT_PARAMS = PropagationParams(p_r0=-16.7, eta=3.36, sigma_db=1.68, r0=1.0)


def mean_power(params: PropagationParams, r, min_distance: float = 0.0):
    """Mean power in dBm at distance ``r`` (scalar or array) in meters.

    Raises ValueError for nonpositive distances and FarFieldError for
    distances below ``min_distance`` (the caller's far-field guard).
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise ValueError("distance must be positive")
    if min_distance > 0 and np.any(r_arr < min_distance):
        idx = int(np.argmax(np.atleast_1d(r_arr) < min_distance))
        raise FarFieldError(f"distance at index {idx} is below the far-field guard {min_distance} m")
    out = params.p_r0 - 10.0 * params.eta * np.log10(r_arr / params.r0)
    return float(out) if np.isscalar(r) or r_arr.ndim == 0 else out


def mean_power_vector(params: PropagationParams, positions: np.ndarray, blind,
                      min_distance: float = 0.0) -> np.ndarray:
    """Mean power at each reference position for a blind radio at ``blind``."""
    return mean_power(params, distances_to(positions, blind), min_distance=min_distance)
