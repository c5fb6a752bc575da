"""Norms on layer vectors and layer fields.

Conventions
-----------
* ``lq_norm`` is normalized by the length n of the vector it receives:
  ``(sum |F_i|^q / n)^(1/q)``.  Vectors produced by D_rho (length N-1) and
  D_rho^2 (length N-2) are therefore normalized by their own length.
* x-integrals are Riemann sums ``dx * sum_j`` over the periodic grid, so a
  constant field c on [0, L) has L^2_x norm ``|c| sqrt(L)``.
* In ``hsk_norm`` terms with j >= N (no D_rho^j available) are omitted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import apply_Drho, apply_Drho2, apply_S, apply_T
from .spectral import SpatialGrid, ddx, lambda_s

__all__ = [
    "lq_norm",
    "mixed_norm",
    "hsk_norm",
    "wk_inf_norm",
    "drho_power",
    "DissipationIntegrals",
    "solution_norm_terms",
    "dissipation_integrands",
    "solution_norm",
]

_EXPONENTS = (1, 2, np.inf)


def _check_exponent(q):
    if q not in _EXPONENTS:
        raise ValueError(f"exponent must be 1, 2 or inf, got {q}")


def _lq(values: np.ndarray, q, axis=0) -> np.ndarray:
    values = np.abs(values)
    if q == np.inf:
        return np.max(values, axis=axis)
    n = values.shape[axis]
    if q == 1:
        return np.sum(values, axis=axis) / n
    # scale by the max so squaring neither underflows nor overflows
    peak = np.max(values, axis=axis, keepdims=True)
    safe = np.where(peak > 0, peak, 1.0)
    return np.squeeze(safe, axis=axis) * np.sqrt(np.sum((values / safe) ** 2, axis=axis) / n)


def lq_norm(F: np.ndarray, q=2) -> float:
    """Normalized l^q norm of a layer vector."""
    _check_exponent(q)
    F = np.asarray(F, dtype=float)
    if F.size == 0:
        return 0.0
    return float(_lq(F, q))


def _Lp_x(f: np.ndarray, grid: SpatialGrid, p) -> np.ndarray:
    f = np.abs(f)
    if p == np.inf:
        return np.max(f, axis=-1)
    return (grid.dx * np.sum(f**p, axis=-1)) ** (1.0 / p)


def mixed_norm(F: np.ndarray, grid: SpatialGrid, outer: str = "x", p=2, q=2) -> float:
    """Mixed norm of an (N, M) layer field.

    ``outer="x"`` gives L^p_x(l^q): the l^q norm is taken first at every
    grid point, then the L^p_x norm.  ``outer="layer"`` gives l^q(L^p_x).
    """
    _check_exponent(p)
    _check_exponent(q)
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if F.shape[0] == 0:
        return 0.0
    if outer == "x":
        return float(_Lp_x(_lq(F, q, axis=0), grid, p))
    if outer == "layer":
        return float(_lq(_Lp_x(F, grid, p), q, axis=0))
    raise ValueError(f"outer must be 'x' or 'layer', got {outer!r}")


def drho_power(F: np.ndarray, j: int, n: int | None = None) -> np.ndarray:
    """D_rho^j F for j in {0, 1, 2}."""
    if j == 0:
        return np.asarray(F, dtype=float)
    if j == 1:
        return apply_Drho(F, n)
    if j == 2:
        return apply_Drho2(F, n)
    raise ValueError(f"vertical order must be 0, 1 or 2, got {j}")


def hsk_norm(F: np.ndarray, grid: SpatialGrid, s: float, k: int) -> float:
    """sqrt( sum_{j<=k} || Lambda^{s-j} D_rho^j F ||^2_{l^2(L^2_x)} )."""
    if k not in (0, 1, 2):
        raise ValueError(f"k must be 0, 1 or 2, got {k}")
    if k > s:
        raise ValueError(f"need k <= s, got k={k}, s={s}")
    F = np.atleast_2d(np.asarray(F, dtype=float))
    total = 0.0
    for j in range(k + 1):
        if F.shape[0] <= j:
            break
        G = lambda_s(drho_power(F, j), grid, s - j)
        total += mixed_norm(G, grid, "layer", 2, 2) ** 2
    return float(np.sqrt(total))


def wk_inf_norm(F: np.ndarray, k: int) -> float:
    """sum_{l<=k} |D_rho^l F|_{l^inf}."""
    if k not in (0, 1, 2):
        raise ValueError(f"k must be 0, 1 or 2, got {k}")
    F = np.asarray(F, dtype=float)
    return float(sum(np.max(np.abs(drho_power(F, l))) for l in range(k + 1)))


@dataclass
class DissipationIntegrals:
    """Running time integrals of the squared dissipation norms.

    ``values`` holds, in order, the integrals over [0, t] of
    ||d_x H||^2_{H^{s-1,1}}, ||d_x S H||^2_{H^{s,2}}, ||d_x T S H||^2_{H^{s,0}}
    and ||d_x H||^2_{H^{s,2}}.
    """

    values: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def copy(self) -> "DissipationIntegrals":
        return DissipationIntegrals(self.values.copy())

    def add(self, increment: np.ndarray) -> None:
        self.values = self.values + increment


def dissipation_integrands(H: np.ndarray, grid: SpatialGrid, s: int = 3) -> np.ndarray:
    dH = ddx(H, grid)
    SdH = apply_S(dH)
    return np.array(
        [
            hsk_norm(dH, grid, s - 1, 1) ** 2,
            hsk_norm(SdH, grid, s, 2) ** 2,
            hsk_norm(apply_T(SdH), grid, s, 0) ** 2,
            hsk_norm(dH, grid, s, 2) ** 2,
        ]
    )


def solution_norm_terms(
    H: np.ndarray, U: np.ndarray, grid: SpatialGrid, kappa: float, s: int = 3
) -> dict:
    """Instantaneous terms of the composite solution norm."""
    SH = apply_S(H)
    return {
        "H_s-1,1": hsk_norm(H, grid, s - 1, 1),
        "SH_s,2": hsk_norm(SH, grid, s, 2),
        "TSH_s,0": hsk_norm(apply_T(SH), grid, s, 0),
        "U_s,2": hsk_norm(U, grid, s, 2),
        "kappa_H_s,2": np.sqrt(kappa) * hsk_norm(H, grid, s, 2),
    }


def solution_norm(
    H: np.ndarray,
    U: np.ndarray,
    grid: SpatialGrid,
    kappa: float,
    s: int = 3,
    diss: DissipationIntegrals | None = None,
    instantaneous_only: bool = False,
) -> float:
    """Composite norm: instantaneous terms plus time-integrated dissipation.

    The dissipation part needs the integrals accumulated by the solver from
    t = 0; omitting them is an error unless ``instantaneous_only`` is set.
    """
    value = sum(solution_norm_terms(H, U, grid, kappa, s).values())
    if instantaneous_only:
        return float(value)
    if diss is None:
        raise ValueError("dissipation integrals are required for the full solution norm")
    a = np.sqrt(np.maximum(diss.values, 0.0))
    value += np.sqrt(kappa) * (a[0] + a[1] + a[2]) + kappa * a[3]
    return float(value)
