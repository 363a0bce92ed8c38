"""Model calibration and bound-constrained maximum likelihood localization.

The position estimate minimizes the sum of squared deviations from the
path-loss model over theta = [x, y, p_r0, eta], subject to eta > 0 and the
box constraints of the localization square. Noise is processed as
independent (identity weighting), so any gap between the achieved RMSE and
the independent-noise bound is attributable to spatial correlations in the
data, not to the estimator.

Solver: damped Gauss-Newton with projection onto the box, eta floored at
ETA_FLOOR. The stop rules are a projected-gradient norm below GRAD_TOL or a
step norm below STEP_TOL, with at most MAX_ITERATIONS iterations. Five
starts are used by default: the box center plus the four side midpoints
(inset 5% of the side so a start never coincides with a reference position);
(p_r0, eta) are warm-started by a linear fit at each start position.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, RankDeficiencyError
from .geometry import SetupConfig, distances_to
from .noisegen import MeasurementSet
from .propagation import PropagationParams

ETA_FLOOR = 1e-3
GRAD_TOL = 1e-9
STEP_TOL = 1e-12
MAX_ITERATIONS = 500
_START_INSET = 0.05
# Squared-distance floor keeping the objective finite when a candidate lands
# exactly on a reference position (the objective there is effectively +inf,
# so such candidates are always rejected).
_R2_FLOOR = 1e-30


@dataclass(eq=False)
class EstimateResult:
    """Output of ``locate``: the estimated state and solver diagnostics."""

    x_mle: float
    y_mle: float
    p_r0_mle: float
    eta_mle: float
    objective_value: float
    iterations: int
    converged: bool
    active_constraints: tuple[str, ...] = ()

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.x_mle, self.y_mle, self.p_r0_mle, self.eta_mle])

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x_mle, self.y_mle])


def _fit_power_law(g: np.ndarray, powers: np.ndarray) -> tuple[float, float]:
    """Least-squares (p_r0, eta) for powers = p_r0 + eta * g."""
    design = np.stack([np.ones_like(g), g], axis=1)
    coef, *_ = np.linalg.lstsq(design, powers, rcond=None)
    return float(coef[0]), float(coef[1])


def calibrate(meas: MeasurementSet, blind) -> PropagationParams:
    """Fit (p_r0, eta) with the blind position known; sigma_db from the residuals.

    The fit is ordinary least squares against the regressor
    -10 log10(r / r0) with r0 = 1 m, which is the maximum-likelihood fit for
    equal per-measurement noise. sigma_db is the RMS residual.
    """
    r = distances_to(meas.positions, blind)
    if np.ptp(r) <= 1e-12 * max(r.max(), 1.0):
        raise RankDeficiencyError("all distances equal: eta is unidentifiable")
    g = np.tile(-10.0 * np.log10(r), meas.repeats)
    p_r0, eta = _fit_power_law(g, meas.powers)
    residual = meas.powers - (p_r0 + eta * g)
    sigma = float(np.sqrt(np.mean(residual**2)))
    if eta <= 0:
        raise RankDeficiencyError(f"calibration produced nonphysical eta = {eta:.4g}")
    return PropagationParams(p_r0=p_r0, eta=eta, sigma_db=sigma)


def _model_and_jacobian(positions: np.ndarray, theta: np.ndarray):
    """Mean powers and their Jacobian w.r.t. [x, y, p_r0, eta] at ``theta``."""
    x, y, p_r0, eta = theta
    dx = x - positions[:, 0]
    dy = y - positions[:, 1]
    r2 = np.maximum(dx * dx + dy * dy, _R2_FLOOR)
    log_r = 0.5 * np.log(r2)
    mean = p_r0 - (10.0 / np.log(10.0)) * eta * log_r
    b = 10.0 * eta / np.log(10.0)
    jac = np.stack([
        -b * dx / r2,
        -b * dy / r2,
        np.ones_like(r2),
        -(10.0 / np.log(10.0)) * log_r,
    ], axis=1)
    return mean, jac


def _project(theta: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(theta, lo), hi)


def _gauss_newton(positions, powers, theta0, lo, hi):
    """Damped Gauss-Newton descent from theta0. Returns (theta, V, iters, converged)."""
    theta = _project(np.asarray(theta0, dtype=float), lo, hi)
    mean, jac = _model_and_jacobian(positions, theta)
    resid = powers - mean
    value = float(resid @ resid)
    damping = 1e-3
    for iteration in range(1, MAX_ITERATIONS + 1):
        grad = -2.0 * jac.T @ resid
        proj_grad = grad.copy()
        proj_grad[(theta <= lo) & (grad > 0)] = 0.0
        proj_grad[(theta >= hi) & (grad < 0)] = 0.0
        if np.linalg.norm(proj_grad) < GRAD_TOL:
            return theta, value, iteration, True
        normal = jac.T @ jac
        rhs = jac.T @ resid
        while True:
            step = np.linalg.solve(normal + damping * np.eye(4), rhs)
            candidate = _project(theta + step, lo, hi)
            if np.linalg.norm(candidate - theta) < STEP_TOL:
                return theta, value, iteration, True
            cand_mean, cand_jac = _model_and_jacobian(positions, candidate)
            cand_resid = powers - cand_mean
            cand_value = float(cand_resid @ cand_resid)
            if cand_value < value:
                theta, mean, jac, resid, value = candidate, cand_mean, cand_jac, cand_resid, cand_value
                damping = max(damping * 0.1, 1e-12)
                break
            damping *= 10.0
            if damping > 1e12:
                return theta, value, iteration, False
    return theta, value, MAX_ITERATIONS, False


def _default_starts(lo, hi):
    cx = 0.5 * (lo[0] + hi[0])
    cy = 0.5 * (lo[1] + hi[1])
    inset_x = _START_INSET * (hi[0] - lo[0])
    inset_y = _START_INSET * (hi[1] - lo[1])
    return [
        (cx, cy),
        (lo[0] + inset_x, cy),
        (hi[0] - inset_x, cy),
        (cx, lo[1] + inset_y),
        (cx, hi[1] - inset_y),
    ]


def locate(meas: MeasurementSet, config: SetupConfig | None = None,
           init=None) -> EstimateResult:
    """Estimate the blind radio position by constrained least squares.

    The box constraint comes from ``config`` when given, otherwise from the
    bounding box of the reference positions (which is the localization square
    for perimeter-generated sets). When ``init`` is supplied it replaces the
    default multi-start; it must be feasible.
    """
    positions = meas.positions
    powers = meas.powers
    if meas.repeats > 1:
        # Identical weighting for every measurement: average over repeats and
        # scale, which preserves the argmin and saves repeated model evaluations.
        powers = meas.powers_by_repeat().mean(axis=0)
    if meas.powers.size < 4:
        raise DegenerateInputError("locate needs at least 4 measurements")
    centered = positions - positions.mean(axis=0)
    if len(positions) < 3 or np.linalg.matrix_rank(centered, tol=1e-9) < 2:
        raise DegenerateInputError("locate needs at least 3 non-collinear positions")

    if config is not None:
        bx, by = config.bounds_x, config.bounds_y
    else:
        bx = (positions[:, 0].min(), positions[:, 0].max())
        by = (positions[:, 1].min(), positions[:, 1].max())
    lo = np.array([bx[0], by[0], -np.inf, ETA_FLOOR])
    hi = np.array([bx[1], by[1], np.inf, np.inf])

    if init is not None:
        theta0 = np.asarray(init, dtype=float)
        if np.any(theta0 < lo) or np.any(theta0 > hi):
            raise ValueError(f"infeasible start {theta0}")
        starts = [theta0]
    else:
        starts = []
        for sx, sy in _default_starts(lo, hi):
            r = distances_to(positions, (sx, sy))
            g = -10.0 * np.log10(np.maximum(r, 1e-15))
            p_r0, eta = _fit_power_law(g, powers)
            starts.append(np.array([sx, sy, p_r0, max(eta, ETA_FLOOR)]))

    best = None
    for theta0 in starts:
        theta, value, iters, converged = _gauss_newton(positions, powers, theta0, lo, hi)
        if best is None or value < best[1]:
            best = (theta, value, iters, converged)
    theta, value, iters, converged = best

    # Report the objective on the full measurement vector, not the repeat mean.
    mean, _ = _model_and_jacobian(positions, theta)
    full_resid = meas.powers - np.tile(mean, meas.repeats)
    objective = float(full_resid @ full_resid)

    active = []
    for name, idx in (("x", 0), ("y", 1)):
        if theta[idx] <= lo[idx]:
            active.append(f"{name}_low")
        elif theta[idx] >= hi[idx]:
            active.append(f"{name}_high")
    if theta[3] <= ETA_FLOOR:
        active.append("eta_floor")

    return EstimateResult(
        x_mle=float(theta[0]), y_mle=float(theta[1]),
        p_r0_mle=float(theta[2]), eta_mle=float(theta[3]),
        objective_value=objective, iterations=iters, converged=converged,
        active_constraints=tuple(active),
    )
