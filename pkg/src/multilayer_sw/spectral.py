"""Periodic Fourier grid and pseudo-spectral operators.

Transform convention: forward DFT unscaled, inverse scaled by 1/M, so that

    mean(f**2) == sum(|fft(f)|**2) / M**2

All operators act along the last axis, so a layer field of shape (N, M) is
handled row by row without reshaping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

__all__ = [
    "SpatialGrid",
    "ddx",
    "lambda_s",
    "heat_step",
    "dealias",
    "fourier_multiplier",
]


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid on [0, L) with M nodes (M even, M >= 8)."""

    M: int
    L: float = 4.0 * np.pi
    x: np.ndarray = field(init=False, repr=False, compare=False)
    k: np.ndarray = field(init=False, repr=False, compare=False)
    mode_index: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.M < 8 or self.M % 2:
            raise ValueError(f"M must be even and >= 8, got {self.M}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        x = np.arange(self.M) * (self.L / self.M)
        # rfft ordering: m = 0, 1, ..., M/2 (last entry is the Nyquist mode)
        m = np.arange(self.M // 2 + 1)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "mode_index", m)
        object.__setattr__(self, "k", 2.0 * np.pi * m / self.L)

    @property
    def dx(self) -> float:
        return self.L / self.M

    def integrate(self, f: np.ndarray) -> np.ndarray:
        """Riemann sum dx * sum_j f_j along the last axis (exact for resolved modes)."""
        return self.dx * np.sum(f, axis=-1)


def fourier_multiplier(f: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    """Apply a real-to-real Fourier multiplier given on the rfft wavenumbers."""
    f = np.asarray(f, dtype=float)
    fh = sfft.rfft(f, axis=-1)
    fh *= symbol
    return sfft.irfft(fh, n=f.shape[-1], axis=-1)


def ddx(f: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Spectral x-derivative; the Nyquist mode of the result is zero."""
    symbol = 1j * grid.k
    symbol[-1] = 0.0
    return fourier_multiplier(f, symbol)


def d2dx2(f: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Second derivative with the full -k**2 symbol (Nyquist kept)."""
    return fourier_multiplier(f, -grid.k**2)


def lambda_s(f: np.ndarray, grid: SpatialGrid, s: float) -> np.ndarray:
    """Bessel potential (1 - d^2/dx^2)^(s/2), i.e. multiplier (1 + k^2)^(s/2)."""
    if s == 0:
        return np.array(f, dtype=float, copy=True)
    return fourier_multiplier(f, (1.0 + grid.k**2) ** (0.5 * s))


def heat_step(f: np.ndarray, grid: SpatialGrid, kappa: float, dt: float) -> np.ndarray:
    """Exact solution operator of f_t = kappa f_xx over a time dt."""
    if kappa < 0 or dt < 0:
        raise ValueError("kappa and dt must be non-negative")
    if kappa == 0 or dt == 0:
        return np.array(f, dtype=float, copy=True)
    return fourier_multiplier(f, np.exp(-kappa * grid.k**2 * dt))


def dealias_mask(grid: SpatialGrid) -> np.ndarray:
    return (grid.mode_index <= grid.M / 3.0).astype(float)


def dealias(f: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Two-thirds rule: zero every mode with |m| > M/3."""
    return fourier_multiplier(f, dealias_mask(grid))
