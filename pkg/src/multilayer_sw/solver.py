"""Time integration of the N-layer shallow water system with GM diffusivity.

    H_t + (Ubar + U) H_x + (Hbar + H) U_x = kappa H_xx
    U_t + (Ubar + U - kappa H_x / (Hbar + H)) U_x + Gamma H_x = 0

Space is pseudo-spectral on a periodic grid.  Time stepping is a Lawson
(integrating-factor) fourth-order Runge-Kutta scheme: the heat semigroup on H
is applied exactly, the remaining terms explicitly.  All propagations are
forward in time, so no backward heat operator is ever formed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .layers import DensityGrid, apply_C, apply_S, apply_T, apply_gamma_fast
from .norms import DissipationIntegrals, dissipation_integrands, mixed_norm, solution_norm
from .spectral import SpatialGrid, ddx, dealias, heat_step

__all__ = [
    "SolverError",
    "CavitationError",
    "BlowUpError",
    "SolverParams",
    "SolverState",
    "Diagnostics",
    "rhs",
    "step",
    "cfl_dt",
    "energy",
    "energy_dissipation_rate",
    "diagnose",
    "simulate",
]

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Base class for failures during time integration; carries the failing time."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class CavitationError(SolverError):
    pass


class BlowUpError(SolverError):
    pass


@dataclass
class SolverParams:
    dgrid: DensityGrid
    sgrid: SpatialGrid
    Hbar: np.ndarray
    Ubar: np.ndarray
    kappa: float = 0.05
    h_star: float = 0.5
    cfl: float = 0.4
    t_end: float = 1.0
    dealias: bool = True
    dt: float | None = None
    output_interval: float | None = None
    s: int = 3
    track_dissipation: bool = True

    def __post_init__(self):
        N = self.dgrid.N
        self.Hbar = np.asarray(self.Hbar, dtype=float).reshape(N)
        self.Ubar = np.asarray(self.Ubar, dtype=float).reshape(N)
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not self.h_star > 0:
            raise ValueError(f"h_star must be positive, got {self.h_star}")
        if not 0 < self.cfl < 1:
            raise ValueError(f"cfl must lie in (0, 1), got {self.cfl}")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if np.min(self.Hbar) < self.h_star:
            i = int(np.argmin(self.Hbar))
            raise ValueError(f"Hbar[{i}] = {self.Hbar[i]} is below h_star = {self.h_star}")

    @property
    def hbar_col(self):
        return self.Hbar[:, None]

    @property
    def ubar_col(self):
        return self.Ubar[:, None]


@dataclass
class SolverState:
    H: np.ndarray
    U: np.ndarray
    t: float = 0.0
    diss: DissipationIntegrals = field(default_factory=DissipationIntegrals)
    steps: int = 0

    def copy(self) -> "SolverState":
        return SolverState(self.H.copy(), self.U.copy(), self.t, self.diss.copy(), self.steps)


@dataclass
class Diagnostics:
    t: float
    mass: np.ndarray
    energy: float
    min_depth: float
    max_depth: float
    solution_norm: float
    dissipation: np.ndarray


def _check_depth(H, params, t, floor):
    depth = params.hbar_col + H
    if not np.all(np.isfinite(depth)):
        raise BlowUpError(f"non-finite depth at t={t}", t)
    i, j = np.unravel_index(np.argmin(depth), depth.shape)
    if depth[i, j] < floor:
        raise CavitationError(
            f"layer {i + 1} at x={params.sgrid.x[j]:.6g}: depth {depth[i, j]:.6g} < {floor:.6g} (t={t:.6g})",
            t,
        )
    return depth


def rhs(state: SolverState, params: SolverParams):
    """Explicit tendencies (dH, dU); the kappa H_xx term is left to the integrating factor."""
    return _tendency(state.H, state.U, params, state.t)


def _tendency(H, U, params, t=None):
    g = params.sgrid
    depth = params.hbar_col + H
    if np.min(depth) <= 0:
        _check_depth(H, params, t, 0.0)
    Hx = ddx(H, g)
    Ux = ddx(U, g)
    vel = params.ubar_col + U
    dH = vel * Hx + depth * Ux
    dU = (vel - params.kappa * Hx / depth) * Ux
    if params.dealias:
        dH = dealias(dH, g)
        dU = dealias(dU, g)
    return -dH, -dU - apply_gamma_fast(params.dgrid, Hx)


def step(state: SolverState, params: SolverParams, dt: float) -> SolverState:
    """Advance one Lawson-RK4 step of size dt and update the dissipation integrals."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    g, kappa = params.sgrid, params.kappa

    def E(f, tau):
        return heat_step(f, g, kappa, tau)

    H0, U0, t = state.H, state.U, state.t
    h2 = 0.5 * dt
    k1H, k1U = _tendency(H0, U0, params, t)
    Ha, Ua = E(H0 + h2 * k1H, h2), U0 + h2 * k1U
    k2H, k2U = _tendency(Ha, Ua, params, t + h2)
    E_H0 = E(H0, h2)
    Hb, Ub = E_H0 + h2 * k2H, U0 + h2 * k2U
    k3H, k3U = _tendency(Hb, Ub, params, t + h2)
    Hc, Uc = E(E_H0 + dt * k3H, h2), U0 + dt * k3U
    k4H, k4U = _tendency(Hc, Uc, params, t + dt)

    H1 = E(E(H0 + dt / 6 * k1H, h2) + dt / 3 * (k2H + k3H), h2) + dt / 6 * k4H
    U1 = U0 + dt / 6 * (k1U + 2 * k2U + 2 * k3U + k4U)

    t1 = t + dt
    if not (np.all(np.isfinite(H1)) and np.all(np.isfinite(U1))):
        raise BlowUpError(f"non-finite state at t={t1}", t1)
    _check_depth(H1, params, t1, 0.5 * params.h_star)

    diss = state.diss.copy()
    if params.track_dissipation:
        # Simpson's rule in time with the midpoint stage
        f0 = dissipation_integrands(H0, g, params.s)
        fm = dissipation_integrands(Hb, g, params.s)
        f1 = dissipation_integrands(H1, g, params.s)
        diss.add(dt / 6 * (f0 + 4 * fm + f1))
    return SolverState(H1, U1, t1, diss, state.steps + 1)


def cfl_dt(state: SolverState, params: SolverParams) -> float:
    """cfl * dx / (max|Ubar + U| + sqrt(max(Hbar + H))); diffusion is exact and imposes nothing."""
    speed = np.max(np.abs(params.ubar_col + state.U)) + np.sqrt(np.max(params.hbar_col + state.H))
    return params.cfl * params.sgrid.dx / speed


def energy(H: np.ndarray, U: np.ndarray, params: SolverParams) -> float:
    """1/2 |CSH|^2 + rho_1/2 |TSH|^2 + 1/2 int <U, rho (Hbar + H) U>, all in l^2(L^2_x)."""
    g = params.sgrid
    depth = _check_depth(H, params, None, 0.0)
    SH = apply_S(H)
    rho = params.dgrid.rho
    kinetic = g.dx * np.sum(np.mean(U * rho[:, None] * depth * U, axis=0))
    return float(
        0.5 * mixed_norm(apply_C(SH), g) ** 2
        + 0.5 * rho[0] * mixed_norm(apply_T(SH), g) ** 2
        + 0.5 * kinetic
    )


def energy_dissipation_rate(H: np.ndarray, params: SolverParams) -> float:
    """kappa (|d_x CSH|^2 + rho_1 |d_x TSH|^2): the energy decay rate of the linearized, layer-uniform system."""
    g = params.sgrid
    SHx = apply_S(ddx(H, g))
    return float(
        params.kappa
        * (mixed_norm(apply_C(SHx), g) ** 2 + params.dgrid.rho[0] * mixed_norm(apply_T(SHx), g) ** 2)
    )


def diagnose(state: SolverState, params: SolverParams) -> Diagnostics:
    g = params.sgrid
    depth = params.hbar_col + state.H
    if params.track_dissipation:
        snorm = solution_norm(state.H, state.U, g, params.kappa, params.s, state.diss)
    else:
        snorm = solution_norm(state.H, state.U, g, params.kappa, params.s, instantaneous_only=True)
    return Diagnostics(
        t=state.t,
        mass=g.integrate(state.H),
        energy=energy(state.H, state.U, params),
        min_depth=float(np.min(depth)),
        max_depth=float(np.max(depth)),
        solution_norm=snorm,
        dissipation=state.diss.values.copy(),
    )


def simulate(params: SolverParams, H0: np.ndarray, U0: np.ndarray, callback=None):
    """Evolve (H0, U0) to ``params.t_end``.

    Returns ``(final_state, diagnostics)``, with a diagnostics record at t=0,
    at every multiple of ``output_interval`` and at ``t_end``.  Steps use
    ``params.dt`` when set, otherwise the CFL step; both are shortened to land
    exactly on output times.  Raises :class:`CavitationError` when the total
    depth drops below ``h_star / 2`` and :class:`BlowUpError` on non-finite
    values.
    """
    N, M = params.dgrid.N, params.sgrid.M
    H0 = np.asarray(H0, dtype=float).reshape(N, M)
    U0 = np.asarray(U0, dtype=float).reshape(N, M)
    if not (np.all(np.isfinite(H0)) and np.all(np.isfinite(U0))):
        raise ValueError("initial data must be finite")
    depth0 = params.hbar_col + H0
    if np.min(depth0) < params.h_star:
        raise CavitationError(f"initial depth {np.min(depth0):.6g} below h_star = {params.h_star}", 0.0)

    state = SolverState(H0.copy(), U0.copy())
    history = [diagnose(state, params)]
    if callback:
        callback(state, history[-1])

    interval = params.output_interval or params.t_end
    n_out = max(1, int(round(params.t_end / interval))) if params.t_end > 0 else 0
    targets = [min(params.t_end, (j + 1) * interval) for j in range(n_out)]
    if targets and targets[-1] < params.t_end:
        targets.append(params.t_end)

    for target in targets:
        while target - state.t > 1e-12 * max(1.0, target):
            dt = params.dt if params.dt is not None else cfl_dt(state, params)
            dt = min(dt, target - state.t)
            state = step(state, params, dt)
        state.t = target
        history.append(diagnose(state, params))
        if callback:
            callback(state, history[-1])
        log.debug("t=%.6g steps=%d energy=%.6e", state.t, state.steps, history[-1].energy)
    return state, history
