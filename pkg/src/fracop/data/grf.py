"""Periodic Gaussian random fields sampled in Fourier space."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GrfSpec:
    """Spectral density ``(|k|^2 + tau^2)^-exponent`` on integer wavenumbers.

    The zero mode is removed and the rest normalised so each grid value has
    variance ``sigma**2``.
    """
    grid: tuple
    exponent: float = 2.0
    tau: float = 3.0
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        grid = (self.grid,) if np.isscalar(self.grid) else tuple(self.grid)
        object.__setattr__(self, "grid", tuple(int(n) for n in grid))
        if min(self.grid) < 8:
            raise ValueError("GRF grid lengths must be >= 8")


def spectral_density(spec: GrfSpec) -> np.ndarray:
    """Normalised density on the ``numpy.fft`` frequency layout."""
    freqs = np.meshgrid(*[np.fft.fftfreq(n, 1.0 / n) for n in spec.grid], indexing="ij")
    k2 = sum(f ** 2 for f in freqs)
    dens = (k2 + spec.tau ** 2) ** (-spec.exponent)
    dens.flat[0] = 0.0
    return dens * (spec.sigma ** 2 / dens.mean())


def sample_grf(spec: GrfSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    return _filter(rng.standard_normal(spec.grid), spectral_density(spec))


def _filter(white: np.ndarray, dens: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(np.sqrt(dens) * np.fft.fftn(white)).real


def sample_grf_batch(spec: GrfSpec, count: int) -> np.ndarray:
    """``count`` fields; sample ``i`` uses the seed stream ``(spec.seed, i)``."""
    dens = spectral_density(spec)
    out = np.empty((count,) + spec.grid)
    for i in range(count):
        rng = np.random.default_rng([spec.seed, i])
        out[i] = _filter(rng.standard_normal(spec.grid), dens)
    return out
