"""Vertical (density-direction) operators for the N-layer system.

Layer vectors have shape (N,) and layer fields shape (N, M); every operator
acts along axis 0, so the same code serves both.  Operators that change the
layer dimension return the shorter array instead of padding.

Densities are always stored in the rescaled frame where the density jump
across the column is one, so consecutive layers differ by exactly 1/N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DensityGrid",
    "DimensionError",
    "apply_S",
    "apply_S0",
    "apply_St",
    "apply_Drho",
    "apply_Drho2",
    "apply_Mavg",
    "apply_Mavg2",
    "apply_T",
    "apply_C",
    "apply_Ru",
    "apply_Rd",
    "gamma_dense",
    "apply_gamma_fast",
    "restrict",
]


class DimensionError(ValueError):
    """Raised when an operator is applied to too few layers."""


@dataclass(frozen=True)
class DensityGrid:
    """Equidistributed midpoint densities of an N-layer stratification.

    ``rho_surf`` and ``rho_bott`` are the physical surface and bottom
    densities.  Internally everything is divided by ``rho_bott - rho_surf``
    (``scale``) so that the rescaled column spans a unit density interval.
    """

    N: int
    rho_surf: float = 1.0
    rho_bott: float = 2.0
    rho: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if not (self.rho_bott > self.rho_surf > 0):
            raise ValueError("densities must satisfy rho_bott > rho_surf > 0")
        i = np.arange(1, self.N + 1)
        object.__setattr__(self, "rho", self.surf + (i - 0.5) / self.N)

    @property
    def scale(self) -> float:
        return 1.0 / (self.rho_bott - self.rho_surf)

    @property
    def surf(self) -> float:
        """Rescaled surface density."""
        return self.rho_surf * self.scale

    @property
    def bott(self) -> float:
        """Rescaled bottom density, exactly ``surf + 1``."""
        return self.surf + 1.0

    @property
    def rho_physical(self) -> np.ndarray:
        return self.rho / self.scale

    def cell_edges(self) -> np.ndarray:
        """The N + 1 rescaled densities rho_{i -+ 1/2} bounding each layer."""
        return self.surf + np.arange(self.N + 1) / self.N


def _n(F, n):
    return np.shape(F)[0] if n is None else n


def _need(F, minimum, name):
    if np.shape(F)[0] < minimum:
        raise DimensionError(f"{name} needs at least {minimum} layers, got {np.shape(F)[0]}")


def apply_S(F: np.ndarray) -> np.ndarray:
    """Discrete integration: (SF)_i = (1/N) sum_{j >= i} F_j."""
    F = np.asarray(F, dtype=float)
    return np.cumsum(F[::-1], axis=0)[::-1] / F.shape[0]


def apply_St(F: np.ndarray) -> np.ndarray:
    """Transpose of S: (S^t F)_i = (1/N) sum_{j <= i} F_j."""
    F = np.asarray(F, dtype=float)
    return np.cumsum(F, axis=0) / F.shape[0]


def apply_S0(G: np.ndarray, N: int | None = None) -> np.ndarray:
    """S without its last column, mapping N-1 values to N values."""
    G = np.asarray(G, dtype=float)
    if N is None:
        N = G.shape[0] + 1
    if N < 2 or G.shape[0] != N - 1:
        raise DimensionError(f"S0 with N={N} expects {N - 1} values, got {G.shape[0]}")
    out = np.zeros((N,) + G.shape[1:])
    out[:-1] = np.cumsum(G[::-1], axis=0)[::-1] / N
    return out


def apply_Drho(F: np.ndarray, n: int | None = None) -> np.ndarray:
    """(D F)_i = N (F_i - F_{i+1}); ``n`` overrides the layer count N."""
    F = np.asarray(F, dtype=float)
    _need(F, 2, "D_rho")
    return _n(F, n) * (F[:-1] - F[1:])


def apply_Drho2(F: np.ndarray, n: int | None = None) -> np.ndarray:
    """(D^2 F)_i = N^2 (F_i - 2 F_{i+1} + F_{i+2})."""
    F = np.asarray(F, dtype=float)
    _need(F, 3, "D_rho^2")
    return _n(F, n) ** 2 * (F[:-2] - 2.0 * F[1:-1] + F[2:])


def apply_Mavg(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    _need(F, 2, "M")
    return 0.5 * (F[:-1] + F[1:])


def apply_Mavg2(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    _need(F, 3, "M^2")
    return 0.25 * (F[:-2] + 2.0 * F[1:-1] + F[2:])


def apply_T(F: np.ndarray) -> np.ndarray:
    """Discrete trace sqrt(N) P: keeps sqrt(N) F_1, zeros the rest."""
    F = np.asarray(F, dtype=float)
    out = np.zeros_like(F)
    out[0] = np.sqrt(F.shape[0]) * F[0]
    return out


def apply_C(F: np.ndarray) -> np.ndarray:
    F = np.array(F, dtype=float, copy=True)
    F[0] = 0.0
    return F


def apply_Ru(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    _need(F, 2, "R_u")
    return F[1:].copy()


def apply_Rd(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    _need(F, 2, "R_d")
    return F[:-1].copy()


def gamma_dense(grid: DensityGrid) -> np.ndarray:
    """Coupling matrix Gamma_ij = min(rho_i, rho_j) / (N rho_i).  Oracle path only."""
    rho = grid.rho
    return np.minimum.outer(rho, rho) / (grid.N * rho[:, None])


def apply_gamma_fast(grid: DensityGrid, F: np.ndarray) -> np.ndarray:
    """Gamma @ F in O(N) per column.

    Uses rho * Gamma = rho_1 (TS)^t (TS) + S^t C S.  The rank-one part is the
    column mean of F broadcast over layers; S^t is a prefix sum.
    """
    F = np.asarray(F, dtype=float)
    if F.shape[0] != grid.N:
        raise DimensionError(f"expected {grid.N} layers, got {F.shape[0]}")
    SF = apply_S(F)
    rank_one = grid.rho[0] * SF[0]
    out = apply_St(apply_C(SF)) + rank_one
    inv_rho = 1.0 / grid.rho
    return out * inv_rho.reshape((-1,) + (1,) * (F.ndim - 1))


def restrict(F_fine: np.ndarray, ratio: int) -> np.ndarray:
    """Sample a fine layer field at the midpoints of a grid ``ratio`` times coarser.

    For odd ``ratio`` the coarse midpoint i is exactly fine midpoint
    ratio*i + (ratio-1)/2, so this is pure row extraction.
    """
    if ratio < 1 or ratio % 2 == 0:
        raise ValueError("refinement ratio must be odd")
    Nf = np.shape(F_fine)[0]
    if Nf % ratio:
        raise DimensionError(f"{Nf} layers are not divisible by {ratio}")
    return np.asarray(F_fine)[(ratio - 1) // 2 :: ratio].copy()
