import numpy as np
import pytest

from rssbounds import (CorrelationKernel, SetupConfig, DEFAULT_PARAMS,
                       mean_jacobian, mean_power, perimeter_positions)
from rssbounds.propagation import PropagationParams


@pytest.fixture(scope="session")
def default_cfg():
    return SetupConfig()


@pytest.fixture(scope="session")
def params():
    return DEFAULT_PARAMS


@pytest.fixture(scope="session")
def positions_2400(default_cfg):
    return perimeter_positions(default_cfg)


@pytest.fixture(scope="session")
def sinc2_kernel(default_cfg):
    return CorrelationKernel.diffraction(default_cfg.wavelength)


@pytest.fixture(scope="session")
def exp_kernel(default_cfg):
    return CorrelationKernel.exponential(default_cfg.wavelength / 2.0)


def coarse_cfg(density: float) -> SetupConfig:
    """Default geometry resampled to a cheap density for fast tests."""
    return SetupConfig().with_density(density)


def fd_jacobian(params, positions, blind, h=1e-6):
    """Central finite differences of the mean power w.r.t. [x, y, p_r0, eta]."""
    def mean_vec(x, y, p_r0, eta):
        p = PropagationParams(p_r0, eta, params.sigma_db, params.r0)
        r = np.hypot(positions[:, 0] - x, positions[:, 1] - y)
        return mean_power(p, r)

    x, y = blind
    cols = [
        (mean_vec(x + h, y, params.p_r0, params.eta)
         - mean_vec(x - h, y, params.p_r0, params.eta)) / (2 * h),
        (mean_vec(x, y + h, params.p_r0, params.eta)
         - mean_vec(x, y - h, params.p_r0, params.eta)) / (2 * h),
        (mean_vec(x, y, params.p_r0 + h, params.eta)
         - mean_vec(x, y, params.p_r0 - h, params.eta)) / (2 * h),
        (mean_vec(x, y, params.p_r0, params.eta + h * params.eta)
         - mean_vec(x, y, params.p_r0, params.eta - h * params.eta)) / (2 * h * params.eta),
    ]
    return np.stack(cols, axis=1)


def fd_column_error(params, positions, blind):
    """Column-normalized worst-case deviation of the analytic Jacobian from FD."""
    analytic = mean_jacobian(params, positions, blind)
    numeric = fd_jacobian(params, positions, blind)
    scale = np.maximum(np.abs(analytic).max(axis=0), 1.0)
    return (np.abs(numeric - analytic) / scale).max()
