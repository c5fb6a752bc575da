"""Continuous stratified profiles and their projections onto N layers.

A profile component is a finite sum of separable terms
``amp * phi(x) * psi(rho)`` where ``phi`` and ``psi`` have closed-form
derivatives (and ``psi`` a closed-form antiderivative).  Densities ``rho`` are
in the rescaled frame of :class:`~multilayer_sw.layers.DensityGrid`; the
rho-shapes are written in the offset variable ``z = rho - surf`` in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .layers import DensityGrid, apply_gamma_fast
from .norms import hsk_norm, mixed_norm
from .spectral import SpatialGrid, lambda_s

__all__ = [
    "Sech2",
    "CosX",
    "ConstX",
    "PolyRho",
    "CosRho",
    "Term",
    "SeparableField",
    "ContinuousProfile",
    "PRESETS",
    "make_profile",
    "project_PN",
    "project_PN_bar",
    "QuadratureError",
    "gauss_legendre",
    "montgomery_dx",
    "ConsistencyRemainder",
    "consistency_remainder",
    "profile_norm",
]


# --- x-shapes -------------------------------------------------------------


@dataclass(frozen=True)
class Sech2:
    center: float
    width: float = 1.0

    def __call__(self, x):
        return 1.0 / np.cosh((np.asarray(x) - self.center) / self.width) ** 2

    def dx(self, x):
        z = (np.asarray(x) - self.center) / self.width
        return -2.0 / self.width * np.tanh(z) / np.cosh(z) ** 2


@dataclass(frozen=True)
class CosX:
    """cos(k x + phase); periodic on the grid when k = 2 pi m / L."""

    k: float
    phase: float = 0.0

    def __call__(self, x):
        return np.cos(self.k * np.asarray(x) + self.phase)

    def dx(self, x):
        return -self.k * np.sin(self.k * np.asarray(x) + self.phase)


@dataclass(frozen=True)
class ConstX:
    def __call__(self, x):
        return np.ones_like(np.asarray(x, dtype=float))

    def dx(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


# --- rho-shapes (in z = rho - surf) -----------------------------------------


@dataclass(frozen=True)
class PolyRho:
    """Polynomial sum_n coef[n] z^n."""

    coef: tuple

    @property
    def _p(self) -> Polynomial:
        return Polynomial(self.coef)

    def __call__(self, z, order: int = 0):
        p = self._p.deriv(order) if order else self._p
        return p(np.asarray(z, dtype=float))

    def antiderivative(self, z):
        return self._p.integ()(np.asarray(z, dtype=float))


@dataclass(frozen=True)
class CosRho:
    """cos(a z + b)."""

    a: float
    b: float = 0.0

    def __call__(self, z, order: int = 0):
        arg = self.a * np.asarray(z, dtype=float) + self.b
        return self.a**order * np.cos(arg + order * np.pi / 2)

    def antiderivative(self, z):
        z = np.asarray(z, dtype=float)
        if self.a == 0:
            return z * np.cos(self.b)
        return np.sin(self.a * z + self.b) / self.a


@dataclass(frozen=True)
class Term:
    amp: float
    xshape: object
    rshape: object


@dataclass(frozen=True)
class SeparableField:
    """f(x, rho) = sum_m amp_m phi_m(x) psi_m(rho - surf).

    Evaluation methods return arrays of shape (len(rho), len(x)).
    """

    terms: tuple = ()
    surf: float = 1.0

    def _sum(self, x, rho, xfun, rfun):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = np.atleast_1d(np.asarray(rho, dtype=float)) - self.surf
        out = np.zeros((z.size, x.size))
        for t in self.terms:
            out += t.amp * np.outer(rfun(t.rshape, z), xfun(t.xshape, x))
        return out

    def __call__(self, x, rho, drho: int = 0):
        return self._sum(x, rho, lambda s, x: s(x), lambda s, z: s(z, drho))

    def dx(self, x, rho, drho: int = 0):
        return self._sum(x, rho, lambda s, x: s.dx(x), lambda s, z: s(z, drho))

    def cell_average(self, x, lo, hi):
        """Average over rho in [lo_i, hi_i] from closed-form antiderivatives."""
        lo = np.atleast_1d(lo) - self.surf
        hi = np.atleast_1d(hi) - self.surf
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros((lo.size, x.size))
        for t in self.terms:
            avg = (t.rshape.antiderivative(hi) - t.rshape.antiderivative(lo)) / (hi - lo)
            out += t.amp * np.outer(avg, t.xshape(x))
        return out

    def is_zero(self) -> bool:
        return all(t.amp == 0 for t in self.terms)

    def __add__(self, other: "SeparableField") -> "SeparableField":
        if self.surf != other.surf:
            raise ValueError("cannot add fields defined over different density frames")
        return SeparableField(self.terms + other.terms, self.surf)

    def __mul__(self, c: float) -> "SeparableField":
        return SeparableField(tuple(Term(c * t.amp, t.xshape, t.rshape) for t in self.terms), self.surf)

    __rmul__ = __mul__


@dataclass(frozen=True)
class ContinuousProfile:
    """Background (hbar, ubar) and deviations (h, u) of a continuous column."""

    h: SeparableField
    u: SeparableField
    hbar: SeparableField
    ubar: SeparableField

    def layer_data(self, sgrid: SpatialGrid, dgrid: DensityGrid, averaged: bool = False):
        """Return (Hbar, Ubar, H0, U0) for an N-layer run.

        ``averaged=False`` samples at the midpoint densities; ``True`` uses cell
        averages.  Background values are x-independent layer vectors.
        """
        proj = project_PN_bar if averaged else project_PN
        Hbar = proj(self.hbar, sgrid, dgrid)[:, 0].copy()
        Ubar = proj(self.ubar, sgrid, dgrid)[:, 0].copy()
        return Hbar, Ubar, proj(self.h, sgrid, dgrid), proj(self.u, sgrid, dgrid)

    def min_total_depth(self, sgrid: SpatialGrid, n_rho: int = 513) -> float:
        rho = self.h.surf + np.linspace(0.0, 1.0, n_rho)
        return float(np.min(self.hbar(sgrid.x, rho) + self.h(sgrid.x, rho)))


def _field(surf, *terms) -> SeparableField:
    return SeparableField(tuple(terms), surf)


def _background(surf, coef) -> SeparableField:
    return _field(surf, Term(1.0, ConstX(), PolyRho(tuple(coef))))


def _default(L, surf, amp):
    bump = Sech2(L / 2, 1.0)
    return ContinuousProfile(
        h=_field(surf, Term(amp, bump, PolyRho((1.0,))), Term(0.5 * amp, bump, CosRho(np.pi))),
        u=_field(surf),
        hbar=_background(surf, (1.2, -0.2)),
        ubar=_background(surf, (0.0,)),
    )


def _small(L, surf, amp):
    bump = Sech2(L / 2, 1.0)
    return ContinuousProfile(
        h=_field(surf, Term(amp, bump, PolyRho((1.0,))), Term(0.5 * amp, bump, CosRho(np.pi))),
        u=_field(surf, Term(0.5 * amp, bump, CosRho(np.pi / 2, 0.3))),
        hbar=_background(surf, (1.2, -0.2)),
        ubar=_background(surf, (0.0, 0.05)),
    )


def _uniform(L, surf, amp):
    return ContinuousProfile(
        h=_field(surf, Term(amp, Sech2(L / 2, 1.0), PolyRho((1.0,)))),
        u=_field(surf),
        hbar=_background(surf, (1.0,)),
        ubar=_background(surf, (0.0,)),
    )


def _mode(L, surf, amp):
    k = 2.0 * np.pi / L
    return ContinuousProfile(
        h=_field(surf, Term(amp, CosX(k), PolyRho((1.0, -0.5))), Term(0.5 * amp, CosX(2 * k, 0.4), CosRho(np.pi))),
        u=_field(surf),
        hbar=_background(surf, (1.0,)),
        ubar=_background(surf, (0.0,)),
    )


def _rest(L, surf, amp):
    return ContinuousProfile(_field(surf), _field(surf), _background(surf, (1.0,)), _background(surf, (0.0,)))


PRESETS: dict[str, tuple[Callable, float]] = {
    "default": (_default, 0.1),
    "small": (_small, 0.01),
    "uniform": (_uniform, 0.1),
    "mode": (_mode, 1e-6),
    "rest": (_rest, 0.0),
}


def make_profile(name: str, sgrid: SpatialGrid, dgrid: DensityGrid, amplitude: float | None = None) -> ContinuousProfile:
    """Build a named preset profile on the given grids."""
    try:
        factory, amp = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown profile preset {name!r}; choose from {sorted(PRESETS)}") from None
    return factory(sgrid.L, dgrid.surf, amp if amplitude is None else amplitude)


# --- projections ----------------------------------------------------------


def project_PN(f: SeparableField, sgrid: SpatialGrid, dgrid: DensityGrid) -> np.ndarray:
    """Sample f at (rho_i, x_j)."""
    return f(sgrid.x, dgrid.rho)


def project_PN_bar(f: SeparableField, sgrid: SpatialGrid, dgrid: DensityGrid) -> np.ndarray:
    """Average f over each layer's density cell [rho_{i-1/2}, rho_{i+1/2}]."""
    edges = dgrid.cell_edges()
    return f.cell_average(sgrid.x, edges[:-1], edges[1:])


# --- quadrature and the Montgomery term -------------------------------------


class QuadratureError(RuntimeError):
    pass


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_rule(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def gauss_legendre(
    fun: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rtol: float = 1e-12,
    atol: float = 1e-300,
    n: int = 16,
    max_depth: int = 30,
) -> np.ndarray:
    """Adaptive Gauss-Legendre quadrature of a vector-valued integrand.

    ``fun`` maps a 1-D array of nodes to an array of shape (..., len(nodes)).
    Each panel compares the n- and 2n-point rules and bisects until they agree
    to ``max(rtol * |I|, atol)`` in every component.
    """

    def rule(lo, hi, m):
        t, w = _gl_rule(m)
        half = 0.5 * (hi - lo)
        return half * (fun(lo + half * (t + 1.0)) @ w)

    def panel(lo, hi, depth):
        coarse = rule(lo, hi, n)
        fine = rule(lo, hi, 2 * n)
        err = np.max(np.abs(fine - coarse))
        if err <= max(rtol * np.max(np.abs(fine)), atol) or err == 0.0:
            return fine
        if depth >= max_depth:
            raise QuadratureError(f"no convergence on [{lo}, {hi}] (error {err:.3e})")
        mid = 0.5 * (lo + hi)
        return panel(lo, mid, depth + 1) + panel(mid, hi, depth + 1)

    if b == a:
        return 0.0 * fun(np.array([a]))[..., 0]
    return panel(a, b, 0)


def montgomery_dx(f: SeparableField, x, rho: float, bott: float | None = None, rtol: float = 1e-12) -> np.ndarray:
    """int_{surf}^{bott} min(r, rho) d_x f(x, r) dr for every x.

    The kink of min(., rho) is handled by integrating the two smooth pieces
    separately.
    """
    surf = f.surf
    bott = surf + 1.0 if bott is None else bott
    if not surf <= rho <= bott:
        raise ValueError(f"rho={rho} outside [{surf}, {bott}]")
    x = np.atleast_1d(np.asarray(x, dtype=float))

    def below(r):
        return f.dx(x, r).T * r

    def above(r):
        return f.dx(x, r).T * rho

    return gauss_legendre(below, surf, rho, rtol) + gauss_legendre(above, rho, bott, rtol)


@dataclass
class ConsistencyRemainder:
    """Layer field Gamma d_x P_N h - P_N(M d_x h / rho) on a grid pair."""

    R: np.ndarray
    sgrid: SpatialGrid
    dgrid: DensityGrid

    def norm(self, s: float = 3, k: int = 2) -> float:
        return hsk_norm(self.R, self.sgrid, s, k)

    def level_norms(self, s: int = 3) -> list[float]:
        """||Lambda^s R||, ||Lambda^{s-1} D R||, ||Lambda^{s-2} D^2 R|| in l^2(L^2_x)."""
        from .norms import drho_power

        out = []
        for j in range(3):
            if self.R.shape[0] <= j:
                out.append(0.0)
                continue
            G = lambda_s(drho_power(self.R, j), self.sgrid, s - j)
            out.append(mixed_norm(G, self.sgrid, "layer", 2, 2))
        return out


def consistency_remainder(h: SeparableField, sgrid: SpatialGrid, dgrid: DensityGrid) -> ConsistencyRemainder:
    """Discrepancy between the layer coupling and the continuous Montgomery term."""
    if not np.isclose(h.surf, dgrid.surf, rtol=0, atol=1e-14):
        raise ValueError("profile and density grid use different density frames")
    x = sgrid.x
    coupling = apply_gamma_fast(dgrid, h.dx(x, dgrid.rho))
    mont = np.empty((dgrid.N, sgrid.M))
    for i, r in enumerate(dgrid.rho):
        mont[i] = montgomery_dx(h, x, r, dgrid.bott) / r
    return ConsistencyRemainder(coupling - mont, sgrid, dgrid)


def profile_norm(f: SeparableField, sgrid: SpatialGrid, s: float, k: int, n_rho: int = 401) -> float:
    """sqrt( sum_{j<=k} sup_rho ||Lambda^{s-j} d_rho^j f(., rho)||^2_{L^2_x} ), sup over a fine rho sample."""
    rho = f.surf + np.linspace(0.0, 1.0, n_rho)
    total = 0.0
    for j in range(k + 1):
        vals = lambda_s(f(sgrid.x, rho, drho=j), sgrid, s - j)
        total += np.max(sgrid.dx * np.sum(vals**2, axis=-1))
    return float(np.sqrt(total))
