"""Verification studies: identity suite, rate fitting, consistency,
self-convergence and single-layer dispersion."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.fft as sfft

from .layers import (
    DensityGrid,
    apply_C,
    apply_Drho,
    apply_Drho2,
    apply_gamma_fast,
    apply_Mavg,
    apply_Mavg2,
    apply_Rd,
    apply_Ru,
    apply_S,
    apply_S0,
    apply_St,
    apply_T,
    gamma_dense,
    restrict,
)
from .norms import DissipationIntegrals, dissipation_integrands, solution_norm, solution_norm_terms
from .solver import SolverParams, SolverState, cfl_dt, step
from .spectral import SpatialGrid
from .stratification import consistency_remainder, make_profile

__all__ = [
    "RateFit",
    "StudyConfig",
    "StudyReport",
    "DispersionConfig",
    "fit_rate",
    "consistency_study",
    "convergence_study",
    "dispersion_study",
    "dispersion_roots",
    "run_identity_suite",
]

log = logging.getLogger(__name__)


@dataclass
class RateFit:
    """Least-squares line through (ln N, ln err)."""

    slope: float
    intercept: float
    residual: float
    N_list: list
    err_list: list
    degenerate: bool = False
    reason: str = ""

    def in_window(self, lo: float, hi: float) -> bool:
        return not self.degenerate and lo <= self.slope <= hi


def _plain(values):
    return [int(v) if float(v).is_integer() else float(v) for v in values]


def fit_rate(N_list, err_list) -> RateFit:
    """Fit err ~ C N^slope.  Non-positive errors give a degenerate fit, not an exception."""
    N = np.asarray(N_list, dtype=float)
    err = np.asarray(err_list, dtype=float)
    if N.size != err.size:
        raise ValueError("N_list and err_list differ in length")
    if N.size < 3:
        raise ValueError("rate fit requires at least 3 points")
    if np.any(~np.isfinite(err)) or np.any(err <= 0):
        return RateFit(math.nan, math.nan, math.nan, _plain(N_list), err.tolist(), True, "non-positive or non-finite error")
    A = np.vstack([np.log(N), np.ones_like(N)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, np.log(err), rcond=None)
    residual = float(np.linalg.norm(A @ [slope, intercept] - np.log(err)))
    return RateFit(float(slope), float(intercept), residual, _plain(N_list), err.tolist())


@dataclass
class StudyConfig:
    profile: str = "default"
    amplitude: float | None = None
    N_list: tuple = (8, 16, 32, 64, 128)
    ratio: int = 3
    N_ref: int | None = None
    s: int = 3
    M: int = 256
    L: float = 4.0 * np.pi
    rho_surf: float = 1.0
    rho_bott: float = 2.0
    kappa: float = 0.05
    h_star: float = 0.5
    cfl: float = 0.4
    t_end: float = 0.5
    dealias: bool = True
    slope_min: float = -2.25
    slope_max: float = -1.75
    metric: str = "instantaneous"
    threads: int = 1

    def validate(self, nested: bool = False) -> None:
        if len(self.N_list) < 3:
            raise ValueError("N_list needs at least 3 entries for a rate fit")
        if any(int(n) != n or n < 1 for n in self.N_list):
            raise ValueError("N_list entries must be positive integers")
        if self.slope_min > self.slope_max:
            raise ValueError("slope_min must not exceed slope_max")
        if not nested:
            return
        if self.ratio < 3 or self.ratio % 2 == 0:
            raise ValueError("refinement ratio must be odd and >= 3")
        if self.N_ref is None:
            raise ValueError("N_ref is required for a convergence study")
        top = max(self.N_list)
        q, m = self.N_ref, 0
        while q > top and q % self.ratio == 0:
            q //= self.ratio
            m += 1
        if q != top or m < 1:
            raise ValueError(f"N_ref={self.N_ref} is not ratio^m * max(N_list) with m >= 1")
        for n in self.N_list:
            r = self.N_ref // n
            if self.N_ref % n or r % 2 == 0:
                raise ValueError(f"N_ref / N must be an odd integer (N={n})")
        if self.metric not in ("instantaneous", "full"):
            raise ValueError("metric must be 'instantaneous' or 'full'")


@dataclass
class StudyReport:
    study: str
    fit: RateFit
    window: tuple
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.fit.in_window(*self.window)

    def to_dict(self) -> dict:
        fit = asdict(self.fit)
        return {
            "study": self.study,
            "N": fit.pop("N_list"),
            "errors": fit.pop("err_list"),
            "fit": fit,
            "window": list(self.window),
            "passed": self.passed,
            "details": self.details,
        }

    def csv_rows(self):
        return [("N", "error")] + list(zip(self.fit.N_list, self.fit.err_list))


def _grids(cfg, N):
    return SpatialGrid(cfg.M, cfg.L), DensityGrid(N, cfg.rho_surf, cfg.rho_bott)


def consistency_study(cfg: StudyConfig) -> StudyReport:
    """||R_N||_{H^{s,2}} over N_list and its fitted rate."""
    cfg.validate()
    errs, levels = [], []
    for N in cfg.N_list:
        sg, dg = _grids(cfg, N)
        profile = make_profile(cfg.profile, sg, dg, cfg.amplitude)
        rem = consistency_remainder(profile.h, sg, dg)
        errs.append(rem.norm(cfg.s, 2))
        levels.append(rem.level_norms(cfg.s))
    fit = fit_rate(cfg.N_list, errs)
    levels = np.array(levels)
    level_fits = {}
    for j in range(3):
        col = levels[:, j]
        f = fit_rate(cfg.N_list, col)
        level_fits[f"level_{j}"] = {"errors": col.tolist(), "slope": f.slope, "degenerate": f.degenerate}
    return StudyReport("consistency", fit, (cfg.slope_min, cfg.slope_max), {"levels": level_fits, "s": cfg.s})


class _Run:
    """One N-layer simulation stepped with a shared, fixed dt."""

    def __init__(self, cfg, N):
        sg, dg = _grids(cfg, N)
        profile = make_profile(cfg.profile, sg, dg, cfg.amplitude)
        Hbar, Ubar, H0, U0 = profile.layer_data(sg, dg)
        self.params = SolverParams(
            dg, sg, Hbar, Ubar, kappa=cfg.kappa, h_star=cfg.h_star, cfl=cfg.cfl,
            t_end=cfg.t_end, dealias=cfg.dealias, s=cfg.s, track_dissipation=False,
        )
        self.state = SolverState(H0, U0)
        self.N = N

    def advance(self, dt):
        self.state = step(self.state, self.params, dt)


def convergence_study(cfg: StudyConfig) -> StudyReport:
    """Self-convergence of N-layer solutions against a nested fine reference.

    Every run starts from the midpoint projection of the same profile and uses
    the same spatial grid and time step.  The reference is restricted to each
    coarse density grid by row extraction (odd ratios nest midpoints exactly).
    The error is the instantaneous composite norm of the difference at t_end,
    or with ``metric="full"`` that plus the time-integrated dissipation terms.
    """
    cfg.validate(nested=True)
    runs = {N: _Run(cfg, N) for N in sorted(set(cfg.N_list) | {cfg.N_ref})}
    dt = min(cfl_dt(r.state, r.params) for r in runs.values())
    n_steps = max(1, math.ceil(cfg.t_end / dt)) if cfg.t_end > 0 else 0
    dt = cfg.t_end / n_steps if n_steps else 0.0
    ref = runs[cfg.N_ref]
    sg = ref.params.sgrid
    diss = {N: DissipationIntegrals() for N in cfg.N_list}

    def diff(N):
        r = cfg.N_ref // N
        return runs[N].state.H - restrict(ref.state.H, r), runs[N].state.U - restrict(ref.state.U, r)

    def integrands():
        return {N: dissipation_integrands(diff(N)[0], sg, cfg.s) for N in cfg.N_list}

    full = cfg.metric == "full"
    prev = integrands() if full else None
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        for _ in range(n_steps):
            if pool:
                list(pool.map(lambda r: r.advance(dt), runs.values()))
            else:
                for r in runs.values():
                    r.advance(dt)
            if full:
                cur = integrands()
                for N in cfg.N_list:
                    diss[N].add(0.5 * dt * (prev[N] + cur[N]))
                prev = cur
    finally:
        if pool:
            pool.shutdown()

    errs, terms = [], {}
    for N in cfg.N_list:
        dH, dU = diff(N)
        terms[str(N)] = {k: float(v) for k, v in solution_norm_terms(dH, dU, sg, cfg.kappa, cfg.s).items()}
        if full:
            errs.append(solution_norm(dH, dU, sg, cfg.kappa, cfg.s, diss[N]))
        else:
            errs.append(sum(terms[str(N)].values()))
    fit = fit_rate(cfg.N_list, errs)
    details = {"N_ref": cfg.N_ref, "dt": dt, "steps": n_steps, "metric": cfg.metric, "terms": terms}
    return StudyReport("convergence", fit, (cfg.slope_min, cfg.slope_max), details)


@dataclass
class DispersionConfig:
    M: int = 64
    L: float = 4.0 * np.pi
    kappa: float = 0.05
    Hbar: float = 1.0
    amplitude: float = 1e-6
    modes: tuple = (1, 2, 3)
    t_end: float = 4.0
    samples: int = 16
    cfl: float = 0.4
    tolerance: float = 0.01


def dispersion_roots(k: float, kappa: float, Hbar: float) -> tuple[complex, complex]:
    """Roots of lam^2 + kappa k^2 lam + Hbar k^2 = 0, growing-branch first."""
    disc = np.sqrt(complex(kappa**2 * k**4 - 4.0 * Hbar * k**2))
    return (-kappa * k**2 + disc) / 2.0, (-kappa * k**2 - disc) / 2.0


def dispersion_study(cfg: DispersionConfig) -> dict:
    """Measure frequency and decay of single-layer linear modes.

    Each run is initialised on one eigenvector of the linearized system, so
    the Fourier coefficient of H at that mode evolves as exp(lam t).  Frequency
    and decay are the slopes of the unwrapped phase and of ln|coefficient|.
    """
    sg = SpatialGrid(cfg.M, cfg.L)
    dg = DensityGrid(1)
    params = SolverParams(
        dg, sg, [cfg.Hbar], [0.0], kappa=cfg.kappa, h_star=0.5 * cfg.Hbar, cfl=cfg.cfl,
        t_end=cfg.t_end, track_dissipation=False,
    )
    rows = []
    for m in cfg.modes:
        k = float(sg.k[m])
        lam, _ = dispersion_roots(k, cfg.kappa, cfg.Hbar)
        wave = np.exp(1j * k * sg.x)
        H = 2.0 * cfg.amplitude * np.real(wave)
        U = 2.0 * cfg.amplitude * np.real(1j * (lam + cfg.kappa * k**2) / (k * cfg.Hbar) * wave)
        state = SolverState(H[None, :], U[None, :])
        times, coef = [0.0], [sfft.rfft(state.H[0])[m]]
        for j in range(1, cfg.samples + 1):
            target = cfg.t_end * j / cfg.samples
            while target - state.t > 1e-12:
                state = step(state, params, min(cfl_dt(state, params), target - state.t))
            times.append(target)
            coef.append(sfft.rfft(state.H[0])[m])
        times, coef = np.array(times), np.array(coef)
        freq = float(np.polyfit(times, np.unwrap(np.angle(coef)), 1)[0])
        decay = float(-np.polyfit(times, np.log(np.abs(coef)), 1)[0])
        overdamped = cfg.kappa**2 * k**4 >= 4.0 * cfg.Hbar * k**2
        pred_freq, pred_decay = float(abs(lam.imag)), float(-lam.real)
        freq_err = abs(abs(freq) - pred_freq) / pred_freq if pred_freq > 0 else abs(freq)
        decay_err = abs(decay - pred_decay) / pred_decay
        rows.append({
            "mode": m, "k": k, "overdamped": bool(overdamped),
            "predicted_frequency": pred_freq, "measured_frequency": abs(freq),
            "predicted_decay": pred_decay, "measured_decay": decay,
            "frequency_rel_error": float(freq_err), "decay_rel_error": float(decay_err),
            "passed": bool(freq_err <= cfg.tolerance and decay_err <= cfg.tolerance),
        })
    return {"study": "dispersion", "kappa": cfg.kappa, "Hbar": cfg.Hbar, "modes": rows,
            "passed": all(r["passed"] for r in rows)}


# --- identity suite -------------------------------------------------------


def _dense_S(N):
    return np.triu(np.ones((N, N))) / N


def _dense_T(N):
    T = np.zeros((N, N))
    T[0, 0] = np.sqrt(N)
    return T


def _dense_C(N):
    C = np.eye(N)
    C[0, 0] = 0.0
    return C


def _rel(a, b):
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), np.finfo(float).tiny)
    return float(np.max(np.abs(a - b)) / scale)


def _identities(N, F, G, dgrid):
    """Yield (name, residual) for every identity defined at this N."""
    yield "abel", _rel(apply_S(F * G), F * apply_S(G) - apply_S0(apply_Drho(F) * apply_Ru(apply_S(G))))
    yield "leibniz_1", _rel(
        apply_Drho(F * G), apply_Drho(F) * apply_Mavg(G) + apply_Mavg(F) * apply_Drho(G)
    )
    if N >= 3:
        MDF, MDG = apply_Mavg(apply_Drho(F)), apply_Mavg(apply_Drho(G))
        yield "leibniz_2", _rel(
            apply_Drho2(F * G),
            apply_Drho2(F) * apply_Mavg2(G) + apply_Mavg2(F) * apply_Drho2(G) + 2 * MDF * MDG,
        )
        yield "drho2_S", _rel(apply_Drho2(apply_S(F)), apply_Rd(apply_Drho(F)))
    S, T, C = _dense_S(N), _dense_T(N), _dense_C(N)
    TS = T @ S
    yield "gamma_decomposition", _rel(
        dgrid.rho[:, None] * gamma_dense(dgrid), dgrid.rho[0] * TS.T @ TS + S.T @ C @ S
    )
    yield "gamma_fast", _rel(apply_gamma_fast(dgrid, F), gamma_dense(dgrid) @ F)
    yield "drho_S", _rel(apply_Drho(apply_S(F)), apply_Rd(F))
    yield "drho_St", _rel(apply_Drho(apply_St(F)), -apply_Ru(F))
    rank_one = apply_St(apply_T(apply_T(apply_S(F))))
    yield "drho_TS_rank_one", float(np.max(np.abs(apply_Drho(rank_one))) / max(np.max(np.abs(F)), 1e-300))


def run_identity_suite(max_N: int = 257, seed: int = 0, tol: float = 1e-12, corrupt: bool = False) -> dict:
    """Check the exact discrete identities for N = 2..max_N with seeded random vectors.

    ``corrupt`` perturbs every oracle by a relative 1e-6, which must make the
    suite fail; it exists to exercise the failure path.
    """
    if max_N < 2:
        raise ValueError("max_N must be at least 2")
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {}
    checked: dict[str, int] = {}
    for N in range(2, max_N + 1):
        F = rng.standard_normal(N)
        G = rng.standard_normal(N)
        dgrid = DensityGrid(N, 1.0 + rng.random(), 2.0 + 3.0 * rng.random())
        for name, res in _identities(N, F, G, dgrid):
            if corrupt:
                res += 1e-6
            worst[name] = max(worst.get(name, 0.0), res)
            checked[name] = checked.get(name, 0) + 1
    report = {}
    for name in ("abel", "leibniz_1", "leibniz_2", "gamma_decomposition", "gamma_fast",
                 "drho_S", "drho2_S", "drho_St", "drho_TS_rank_one"):
        if name in worst:
            report[name] = {"max_residual": worst[name], "cases": checked[name], "passed": worst[name] <= tol}
        else:
            report[name] = {"skipped": "N<3", "passed": True}
    return {"max_N": max_N, "seed": seed, "tolerance": tol, "identities": report,
            "passed": all(v["passed"] for v in report.values())}
