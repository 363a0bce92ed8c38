"""Experiment geometry: the localization square and reference positions on its perimeter.

The default setup is a 3 m x 3 m square spanning x in [-1, 2], y in [-2, 1],
with the blind transmitter at the origin and one reference position every
half centimeter along the perimeter (2400 positions).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, FarFieldError

DEFAULT_SIDE_M = 3.0
DEFAULT_SPACING_M = 0.005
DEFAULT_WAVELENGTH_M = 0.125

# Relative tolerance for "spacing tiles the perimeter" checks.
_TILE_RTOL = 1e-9


@dataclass(frozen=True)
class SetupConfig:
    """Geometry, wavelength and model constants for one localization experiment.

    The rectangle bounds_x x bounds_y is both the surface whose perimeter
    carries the reference positions and the box constraint of the position
    estimator. The blind radio must lie strictly inside it.
    """

    side_length: float = DEFAULT_SIDE_M
    spacing: float = DEFAULT_SPACING_M
    wavelength: float = DEFAULT_WAVELENGTH_M
    blind_position: tuple[float, float] = (0.0, 0.0)
    bounds_x: tuple[float, float] = (-1.0, 2.0)
    bounds_y: tuple[float, float] = (-2.0, 1.0)
    min_far_field_distance: float | None = None

    def __post_init__(self):
        if self.side_length <= 0 or self.spacing <= 0 or self.wavelength <= 0:
            raise ConfigError("side_length, spacing and wavelength must be positive")
        if not math.isclose(self.bounds_x[1] - self.bounds_x[0], self.side_length) or \
           not math.isclose(self.bounds_y[1] - self.bounds_y[0], self.side_length):
            raise ConfigError("bounds_x and bounds_y must span side_length")
        bx, by = self.blind_position
        if not (self.bounds_x[0] < bx < self.bounds_x[1] and self.bounds_y[0] < by < self.bounds_y[1]):
            raise ConfigError("blind_position must lie strictly inside the bounds")
        ratio = self.perimeter / self.spacing
        if abs(ratio - round(ratio)) > _TILE_RTOL * max(ratio, 1.0):
            raise ConfigError(
                f"spacing {self.spacing} does not tile the perimeter {self.perimeter}"
            )
        if self.min_far_field_distance is None:
            # 2 wavelengths is a conventional far-field guard; inactive for the
            # default geometry where the nearest side is 1 m from the blind radio.
            object.__setattr__(self, "min_far_field_distance", 2.0 * self.wavelength)

    @property
    def perimeter(self) -> float:
        return 4.0 * self.side_length

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def n_positions(self) -> int:
        return int(round(self.perimeter / self.spacing))

    @property
    def density_per_wavelength(self) -> float:
        """Reference positions per wavelength of perimeter."""
        return self.wavelength / self.spacing

    def with_density(self, density: float) -> "SetupConfig":
        """Return a copy whose spacing realizes ``density`` samples per wavelength.

        The position count is rounded so the spacing tiles the perimeter
        exactly; the realized density can therefore differ slightly from the
        request at very low densities.
        """
        if density <= 0:
            raise ConfigError("density must be positive")
        n = max(4, int(round(self.perimeter * density / self.wavelength)))
        return replace(self, spacing=self.perimeter / n)

    @classmethod
    def square(cls, side_length: float, spacing: float, wavelength: float,
               blind_position: tuple[float, float] = (0.0, 0.0), **kwargs) -> "SetupConfig":
        """Build a config with the default asymmetric blind placement.

        The square is positioned so the blind radio sits at one third of the
        side from the nearest corner in each axis, reproducing the default
        x in [-1, 2], y in [-2, 1] layout for a 3 m side and blind at the origin.
        """
        bx, by = blind_position
        return cls(
            side_length=side_length,
            spacing=spacing,
            wavelength=wavelength,
            blind_position=blind_position,
            bounds_x=(bx - side_length / 3.0, bx + 2.0 * side_length / 3.0),
            bounds_y=(by - 2.0 * side_length / 3.0, by + side_length / 3.0),
            **kwargs,
        )


def perimeter_positions(cfg: SetupConfig) -> np.ndarray:
    """Reference positions along the perimeter, counter-clockwise from the lower-left corner.

    Returns an (n, 2) array with consecutive positions exactly ``cfg.spacing``
    apart along the perimeter. Raises FarFieldError if any position falls
    inside the far-field guard around the blind radio.
    """
    n = cfg.n_positions
    side = cfg.side_length
    x0, y0 = cfg.bounds_x[0], cfg.bounds_y[0]
    t = np.arange(n) * cfg.spacing
    edge = np.minimum((t // side).astype(int), 3)
    f = t - edge * side
    xs = np.select(
        [edge == 0, edge == 1, edge == 2, edge == 3],
        [x0 + f, np.full(n, x0 + side), x0 + side - f, np.full(n, x0)],
    )
    ys = np.select(
        [edge == 0, edge == 1, edge == 2, edge == 3],
        [np.full(n, y0), y0 + f, np.full(n, y0 + side), y0 + side - f],
    )
    positions = np.stack([xs, ys], axis=1)
    d = np.hypot(positions[:, 0] - cfg.blind_position[0], positions[:, 1] - cfg.blind_position[1])
    if d.min() < cfg.min_far_field_distance:
        raise FarFieldError(
            f"position {int(d.argmin())} is {d.min():.4g} m from the blind radio, "
            f"inside the {cfg.min_far_field_distance:.4g} m far-field guard"
        )
    return positions


def distance(a, b) -> float:
    """Euclidean distance between two 2-vectors."""
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


def distances_to(positions: np.ndarray, point) -> np.ndarray:
    """Euclidean distances from each row of ``positions`` to ``point``."""
    return np.hypot(positions[:, 0] - point[0], positions[:, 1] - point[1])
