"""Run configuration files and atomic CSV/JSON output."""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

__all__ = ["ConfigError", "SCHEMA", "load_config", "write_json", "write_csv", "dumps_json"]


class ConfigError(ValueError):
    """Malformed or out-of-range run configuration (CLI exit status 2)."""


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _opt_float(text):
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


def _opt_int(text):
    return None if text.strip().lower() in ("", "none", "auto") else int(text)


SCHEMA: dict[str, dict[str, object]] = {
    "grid": {"M": int, "L": float},
    "density": {"N": int, "rho_surf": float, "rho_bott": float},
    "profile": {
        "preset": str, "amplitude": _opt_float, "averaged": _bool,
        "hbar": _floats, "ubar": _floats, "h_poly": _floats, "u_poly": _floats,
    },
    "solver": {
        "kappa": float, "h_star": float, "cfl": float, "t_end": float, "dealias": _bool,
        "dt": _opt_float, "output_interval": _opt_float, "s": int,
    },
    "study": {
        "N_list": _ints, "ratio": int, "N_ref": _opt_int, "s": int,
        "slope_min": float, "slope_max": float, "metric": str,
    },
    "dispersion": {
        "M": int, "L": float, "kappa": float, "Hbar": float, "amplitude": float,
        "modes": _ints, "t_end": float, "samples": int, "cfl": float, "tolerance": float,
    },
    "identities": {"max_N": int, "tolerance": float},
}


def load_config(path, allowed_sections) -> dict:
    """Parse an INI-style file into ``{section: {key: value}}``.

    Unknown sections and keys are rejected so typos cannot pass silently.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out: dict[str, dict] = {}
    for section in parser.sections():
        if section not in allowed_sections:
            raise ConfigError(f"unknown section [{section}] (allowed: {', '.join(allowed_sections)})")
        schema = SCHEMA[section]
        out[section] = {}
        for key, raw in parser.items(section):
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            try:
                out[section][key] = schema[key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {exc}") from exc
    return out


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _clean(obj):
    # NaN/inf are not valid JSON
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.floating):
        return _clean(float(obj))
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, default=_default, ensure_ascii=False) + "\n"


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    _atomic_write(path, dumps_json(obj))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, rows) -> None:
    """Write rows (first row is the header) with LF endings and 17-digit floats."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())
