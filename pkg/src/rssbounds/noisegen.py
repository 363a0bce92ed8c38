"""Correlated Gaussian noise synthesis and measurement-set generation.

Seed discipline
---------------
All randomness derives from one 64-bit master seed through counter-based
Philox streams keyed by ``numpy.random.SeedSequence(seed, spawn_key=...)``:

* spatial draw ``i``            -> spawn_key (0, i)
* temporal noise for repeat ``m`` -> spawn_key (1, m)

Draws are therefore independent of evaluation order: generating them in
parallel or serially yields identical results.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlation import CorrelationKernel, build_covariance
from .errors import DecompositionError
from .geometry import SetupConfig, perimeter_positions
from .propagation import PropagationParams, mean_power_vector

# Eigenvalues below this fraction of the noise variance are treated as zero.
CLIP_FRACTION = 1e-10
# Factorization fails if clipping removes more than this fraction of variance.
MAX_CLIPPED_VARIANCE = 0.999


@dataclass(eq=False)
class MeasurementSet:
    """Reference positions with measured or synthesized powers in dBm.

    ``powers`` is laid out in repeat-major blocks: entry ``m * n + i`` is the
    power at position ``i`` during repeat ``m``.
    """

    positions: np.ndarray
    powers: np.ndarray
    repeats: int = 1
    seed: int = 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.powers = np.asarray(self.powers, dtype=float)
        if self.powers.size != len(self.positions) * self.repeats:
            raise ValueError(
                f"{self.powers.size} powers for {len(self.positions)} positions "
                f"x {self.repeats} repeats"
            )
        if not np.all(np.isfinite(self.powers)):
            raise ValueError("powers must be finite")

    @property
    def n_positions(self) -> int:
        return len(self.positions)

    def powers_by_repeat(self) -> np.ndarray:
        """Powers reshaped to (repeats, n_positions)."""
        return self.powers.reshape(self.repeats, self.n_positions)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


class CovarianceFactor:
    """Square-root factor of an eigenvalue-clipped covariance matrix.

    The symmetric eigendecomposition is clipped at ``CLIP_FRACTION`` times the
    largest diagonal entry, so singular covariances (a diffraction kernel
    sampled beyond its Nyquist density) sample in the retained eigen-subspace.
    """

    def __init__(self, cov: np.ndarray):
        cov = np.asarray(cov, dtype=float)
        n = cov.shape[0]
        diag = cov.diagonal()
        if np.count_nonzero(cov - np.diag(diag)) == 0:
            # Diagonal covariance: no decomposition needed.
            self._root = None
            self._scale = np.sqrt(diag)
            self.rank = int(np.count_nonzero(diag))
            self.n = n
            return
        w, v = np.linalg.eigh(cov)
        threshold = CLIP_FRACTION * diag.max()
        kept = w > threshold
        total = np.clip(w, 0.0, None).sum()
        retained = w[kept].sum()
        if total > 0 and retained < (1.0 - MAX_CLIPPED_VARIANCE) * total:
            raise DecompositionError(
                f"eigenvalue clipping retained {retained / total:.2e} of the variance"
            )
        self._root = v[:, kept] * np.sqrt(w[kept])
        self._scale = None
        self.rank = int(kept.sum())
        self.n = n

    def sample(self, seed: int, draws: int) -> np.ndarray:
        """Independent zero-mean draws, one Philox sub-stream per draw index."""
        out = np.empty((draws, self.n))
        for i in range(draws):
            rng = _stream(seed, 0, i)
            if self._root is None:
                out[i] = self._scale * rng.standard_normal(self.n)
            else:
                out[i] = self._root @ rng.standard_normal(self.rank)
        return out


def sample_noise(cov: np.ndarray, seed: int, draws: int) -> np.ndarray:
    """Draw ``draws`` rows from N(0, C_reg) where C_reg is the clipped covariance."""
    return CovarianceFactor(cov).sample(seed, draws)


def synthesize(cfg: SetupConfig, params: PropagationParams, kernel: CorrelationKernel,
               repeats: int = 1, seed: int = 0, temporal_std_db: float = 0.0,
               positions: np.ndarray | None = None,
               factor: CovarianceFactor | None = None) -> MeasurementSet:
    """Synthesize one measurement set for the given setup.

    One spatially correlated noise vector is drawn and shared by all repeats;
    each repeat adds an independent per-measurement temporal noise of
    ``temporal_std_db`` (0 by default, so repeats duplicate the spatial draw,
    matching the observed negligible information content of repeated
    multiplexed measurements).

    ``positions`` and ``factor`` allow reuse of precomputed geometry and
    covariance factorizations across many calls with the same setup.
    """
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    if positions is None:
        positions = perimeter_positions(cfg)
    mean = mean_power_vector(params, positions, cfg.blind_position,
                             min_distance=cfg.min_far_field_distance)
    if factor is None:
        if kernel.kind == "independent":
            factor = CovarianceFactor(params.sigma_db**2 * np.eye(len(positions)))
        else:
            factor = CovarianceFactor(build_covariance(kernel, positions, params.sigma_db))
    spatial = factor.sample(seed, 1)[0]
    n = len(positions)
    powers = np.empty(n * repeats)
    for m in range(repeats):
        block = mean + spatial
        if temporal_std_db > 0.0:
            block = block + temporal_std_db * _stream(seed, 1, m).standard_normal(n)
        powers[m * n:(m + 1) * n] = block
    return MeasurementSet(positions=positions, powers=powers, repeats=repeats, seed=seed)
