"""Command-line entry point.

Exit status: 0 success, 1 verification failed (rate outside window, identity
residual too large), 2 configuration error, 3 cavitation guard tripped,
4 numerical blow-up.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from contextlib import nullcontext
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .harness import (
    DispersionConfig,
    StudyConfig,
    consistency_study,
    convergence_study,
    dispersion_study,
    run_identity_suite,
)
from .io import ConfigError, load_config, write_csv, write_json
from .layers import DensityGrid
from .solver import BlowUpError, CavitationError, SolverError, SolverParams, simulate
from .spectral import SpatialGrid
from .stratification import ConstX, PolyRho, SeparableField, Sech2, Term, make_profile

log = logging.getLogger("multilayer_sw")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_GUARD, EXIT_NUMERIC = 0, 1, 2, 3, 4


def _section(cfg, name):
    return cfg.get(name, {})


def build_profile(cfg, sgrid, dgrid):
    prof = _section(cfg, "profile")
    profile = make_profile(prof.get("preset", "default"), sgrid, dgrid, prof.get("amplitude"))
    surf = dgrid.surf
    changes = {}
    for key in ("hbar", "ubar"):
        if key in prof:
            changes[key] = SeparableField((Term(1.0, ConstX(), PolyRho(prof[key])),), surf)
    for key, target in (("h_poly", "h"), ("u_poly", "u")):
        if key in prof:
            extra = SeparableField((Term(1.0, Sech2(sgrid.L / 2, 1.0), PolyRho(prof[key])),), surf)
            changes[target] = getattr(profile, target) + extra
    return replace(profile, **changes) if changes else profile


def _simulate_setup(cfg):
    grid = _section(cfg, "grid")
    dens = _section(cfg, "density")
    sol = dict(_section(cfg, "solver"))
    try:
        sgrid = SpatialGrid(grid.get("M", 256), grid.get("L", 4 * np.pi))
        dgrid = DensityGrid(dens.get("N", 2), dens.get("rho_surf", 1.0), dens.get("rho_bott", 2.0))
        profile = build_profile(cfg, sgrid, dgrid)
        Hbar, Ubar, H0, U0 = profile.layer_data(sgrid, dgrid, _section(cfg, "profile").get("averaged", False))
        params = SolverParams(dgrid, sgrid, Hbar, Ubar, **sol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if np.min(Hbar[:, None] + H0) < params.h_star:
        raise ConfigError(f"initial total depth {np.min(Hbar[:, None] + H0):.6g} is below h_star = {params.h_star}")
    return params, H0, U0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, ("grid", "density", "profile", "solver"))
    params, H0, U0 = _simulate_setup(cfg)
    N = params.dgrid.N
    rows = [["t"] + [f"mass_{i + 1}" for i in range(N)] + ["energy", "min_depth", "max_depth", "solution_norm"]]
    records = []

    def collect(state, d):
        records.append(d)
        rows.append([d.t, *d.mass, d.energy, d.min_depth, d.max_depth, d.solution_norm])

    status, code, fail_t, final = "ok", EXIT_OK, None, None
    started = time.perf_counter()
    try:
        final, _ = simulate(params, H0, U0, callback=collect)
    except CavitationError as exc:
        status, code, fail_t = f"cavitation: {exc}", EXIT_GUARD, exc.t
    except BlowUpError as exc:
        status, code, fail_t = f"blow-up: {exc}", EXIT_NUMERIC, exc.t
    wall = time.perf_counter() - started

    last = records[-1]
    summary = {
        "command": "simulate",
        "status": status,
        "failure_time": fail_t,
        "steps": final.steps if final else None,
        "N": N,
        "M": params.sgrid.M,
        "kappa": params.kappa,
        "t_end": params.t_end,
        "final": {
            "t": last.t,
            "energy": last.energy,
            "solution_norm": last.solution_norm,
            "min_depth": last.min_depth,
            "max_depth": last.max_depth,
            "mass": last.mass,
        },
        "max_mass_drift": float(np.max(np.abs(last.mass - records[0].mass))),
        "guard_floor": 0.5 * params.h_star,
    }
    out = Path(args.out)
    write_csv(out / "diagnostics.csv", rows)
    write_json(out / "summary.json", summary)
    write_json(out / "timing.json", {"wall_time_s": wall})
    print(f"simulate: {status}; {len(records)} diagnostic rows -> {out}")
    return code


CONVERGE_DEFAULTS = {"profile": "small", "N_list": (5, 15, 45), "N_ref": 135, "slope_min": -2.3, "slope_max": -1.7}


def _study_config(cfg, include_solver: bool, defaults=None) -> StudyConfig:
    grid, dens, prof, study = (_section(cfg, k) for k in ("grid", "density", "profile", "study"))
    kw = dict(defaults or {})
    kw.update({k: grid[k] for k in ("M", "L") if k in grid})
    kw.update({k: dens[k] for k in ("rho_surf", "rho_bott") if k in dens})
    if "preset" in prof:
        kw["profile"] = prof["preset"]
    if "amplitude" in prof:
        kw["amplitude"] = prof["amplitude"]
    extra = set(prof) - {"preset", "amplitude"}
    if extra:
        raise ConfigError(f"studies support only profile.preset and profile.amplitude (got {sorted(extra)})")
    if "N" in dens:
        raise ConfigError("density.N is not used by studies; set study.N_list")
    kw.update({k: v for k, v in study.items()})
    if include_solver:
        sol = _section(cfg, "solver")
        for k in ("dt", "output_interval"):
            if k in sol:
                raise ConfigError(f"solver.{k} is not used by the convergence study")
        kw.update(sol)
    if "N_list" in kw:
        kw["N_list"] = tuple(kw["N_list"])
    return StudyConfig(**kw)


def _write_study(report, out: Path, stem: str) -> int:
    write_json(out / f"{stem}.json", report.to_dict())
    write_csv(out / f"{stem}.csv", report.csv_rows())
    fit = report.fit
    print(f"{stem}: slope={fit.slope:.4f} window={list(report.window)} -> {'PASS' if report.passed else 'FAIL'}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_consistency(args) -> int:
    cfg = load_config(args.config, ("grid", "density", "profile", "study")) if args.config else {}
    scfg = _study_config(cfg, include_solver=False)
    try:
        scfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return _write_study(consistency_study(scfg), Path(args.out), "consistency")


def cmd_converge(args) -> int:
    cfg = load_config(args.config, ("grid", "density", "profile", "solver", "study")) if args.config else {}
    scfg = replace(_study_config(cfg, include_solver=True, defaults=CONVERGE_DEFAULTS), threads=args.threads)
    try:
        scfg.validate(nested=True)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        report = convergence_study(scfg)
    except CavitationError as exc:
        print(f"converge: guard tripped: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except BlowUpError as exc:
        print(f"converge: blow-up: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return _write_study(report, Path(args.out), "convergence")


def cmd_dispersion(args) -> int:
    cfg = load_config(args.config, ("dispersion",)) if args.config else {}
    try:
        dcfg = DispersionConfig(**_section(cfg, "dispersion"))
        report = dispersion_study(dcfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    write_json(Path(args.out) / "dispersion.json", report)
    for row in report["modes"]:
        print(f"mode {row['mode']}: freq err {row['frequency_rel_error']:.2e}, decay err {row['decay_rel_error']:.2e}")
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_identities(args) -> int:
    cfg = load_config(args.config, ("identities",)) if args.config else {}
    sec = _section(cfg, "identities")
    max_N = args.max_n if args.max_n is not None else sec.get("max_N", 257)
    if max_N < 2:
        raise ConfigError("max_N must be at least 2")
    report = run_identity_suite(max_N, args.seed, sec.get("tolerance", 1e-12), corrupt=args.corrupt_oracle)
    write_json(Path(args.out) / "identities.json", report)
    for name, entry in report["identities"].items():
        detail = entry.get("skipped") or f"max residual {entry['max_residual']:.3e}"
        print(f"{name:22s} {'ok' if entry['passed'] else 'FAIL'}  {detail}")
    return EXIT_OK if report["passed"] else EXIT_FAIL


COMMANDS = {
    "identities": cmd_identities,
    "simulate": cmd_simulate,
    "consistency": cmd_consistency,
    "converge": cmd_converge,
    "dispersion": cmd_dispersion,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlsw", description="N-layer shallow water engine and verification studies")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name == "simulate", help="INI-style run configuration")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        if name == "identities":
            p.add_argument("--max-n", type=int, default=None)
            p.add_argument("--corrupt-oracle", action="store_true", help="perturb the oracles to exercise the failure path")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    workers = sfft.set_workers(args.threads) if args.threads > 1 else nullcontext()
    try:
        with workers:
            return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_GUARD if isinstance(exc, CavitationError) else EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
