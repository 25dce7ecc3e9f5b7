"""Run configuration: an INI file with ``[run]``, ``[measure]`` and ``[grid]`` sections.

Lists are comma separated.  For ``sweep`` the ``lambda`` key may hold one
grid per radius, separated by semicolons, in the order of ``r``.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, replace

from .measures import SPEC_TYPES, MeasureSpec, seed_intensity_for_length, spec_from_dict
from .errors import CoxPercError

EXPERIMENTS = ("sweep", "limit-large-r", "limit-singular", "limit-ac", "diagnose-stab", "calibrate")

RUN_KEYS = {"experiment", "seed", "replicates", "workers", "out", "snapshot", "export_points"}
GRID_KEYS = {"r", "lambda", "K", "rho", "c", "n"}
MEASURE_COMMON = {"kind", "normalization", "target", "calibration_replicates", "calibration_seed", "calibration_cache"}
MEASURE_KEYS = {
    "shot_noise": {"kernel_radius", "kernel_height", "center_intensity", "dim"},
    "modulated_boolean": {"grain_radius", "grain_intensity", "inside", "outside", "dim"},
    "voronoi": {"seed_intensity", "length_intensity"},
    "delaunay": {"seed_intensity", "length_intensity"},
    "lines": {"line_intensity", "length_intensity"},
    "constant": {"density", "dim"},
}
NONNEG = {
    "kernel_height", "center_intensity", "grain_intensity", "inside", "outside", "seed_intensity",
    "line_intensity", "length_intensity", "density", "normalization", "target",
}
POSITIVE = {"kernel_radius", "grain_radius"}

# grid keys each experiment needs
REQUIRED_GRID = {
    "sweep": ("r", "lambda", "K"),
    "limit-large-r": ("rho", "r", "K"),
    "limit-singular": ("c", "lambda", "K"),
    "limit-ac": ("rho", "lambda", "K"),
    "diagnose-stab": ("n",),
    "calibrate": (),
}


class ConfigError(CoxPercError, ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    measure: dict
    seed: int
    replicates: int = 1000
    workers: int = 1
    out: str = "out"
    snapshot: bool = False
    export_points: int = 0
    r: tuple = ()
    lam: tuple = ()
    K: float = 0.0
    rho: tuple = ()
    c: tuple = ()
    n: tuple = ()

    def measure_spec(self) -> MeasureSpec:
        """The measure spec before any normalization to a target."""
        data = {k: v for k, v in self.measure.items() if k not in MEASURE_COMMON - {"kind", "normalization"}}
        data.pop("length_intensity", None)
        kind = data["kind"]
        if "length_intensity" in self.measure:
            key = "line_intensity" if kind == "lines" else "seed_intensity"
            data[key] = seed_intensity_for_length(kind, self.measure["length_intensity"])
        if "dim" in data:
            data["dim"] = int(data["dim"])
        return spec_from_dict(data)

    def lam_grids(self) -> list[tuple]:
        """Per-radius intensity grids (a single shared grid is repeated)."""
        if self.lam and isinstance(self.lam[0], tuple):
            return list(self.lam)
        return [self.lam] * max(1, len(self.r))


def _split(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _floats(key: str, text: str, errors: list) -> tuple:
    try:
        vals = tuple(float(x) for x in _split(text))
    except ValueError:
        errors.append(f"[grid] {key}: expected comma-separated numbers, got {text!r}")
        return ()
    if not vals:
        errors.append(f"[grid] {key}: empty list")
    elif any(not math.isfinite(v) for v in vals):
        errors.append(f"[grid] {key}: non-finite value")
    elif any(v < 0 for v in vals):
        errors.append(f"[grid] {key}: values must be non-negative")
    return vals


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def parse_config(text: str, overrides: dict | None = None, experiment: str | None = None) -> RunConfig:
    """Validate ``text``; raises :class:`ConfigError` listing every problem.

    ``overrides`` (from command-line flags) replace ``[run]`` values before
    validation; ``experiment`` is the requested subcommand.
    """
    errors: list[str] = []
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"malformed config: {exc}"]) from None
    for sec in parser.sections():
        if sec not in ("run", "measure", "grid"):
            errors.append(f"unknown section [{sec}]")
    run = dict(parser["run"]) if parser.has_section("run") else {}
    meas = dict(parser["measure"]) if parser.has_section("measure") else {}
    grid = dict(parser["grid"]) if parser.has_section("grid") else {}
    for k, v in (overrides or {}).items():
        if v is not None:
            run[k] = str(v)

    for k in sorted(set(run) - RUN_KEYS):
        errors.append(f"[run] unknown key {k!r}")
    for k in sorted(set(grid) - GRID_KEYS):
        errors.append(f"[grid] unknown key {k!r}")

    exp = run.get("experiment", experiment)
    if experiment is not None and exp != experiment:
        errors.append(f"[run] experiment {exp!r} does not match subcommand {experiment!r}")
    if exp not in EXPERIMENTS:
        errors.append(f"[run] experiment must be one of {', '.join(EXPERIMENTS)}, got {exp!r}")

    values: dict = {}
    if "seed" not in run:
        errors.append("[run] seed is required (no implicit entropy)")
    for key, default in (("seed", None), ("replicates", 1000), ("workers", 1), ("export_points", 0)):
        if key not in run:
            if default is not None:
                values[key] = default
            continue
        try:
            values[key] = int(run[key])
        except ValueError:
            errors.append(f"[run] {key}: expected an integer, got {run[key]!r}")
            continue
        low = 0 if key in ("seed", "export_points") else 1
        if values[key] < low:
            errors.append(f"[run] {key}: must be >= {low}")
    values["out"] = run.get("out", "out")
    try:
        values["snapshot"] = _bool(run.get("snapshot", "false"))
    except ValueError:
        errors.append(f"[run] snapshot: expected a boolean, got {run['snapshot']!r}")

    kind = meas.get("kind")
    measure: dict = {}
    if kind is None:
        errors.append("[measure] kind is required")
    elif kind not in MEASURE_KEYS:
        errors.append(f"[measure] kind must be one of {', '.join(sorted(SPEC_TYPES))}, got {kind!r}")
    else:
        allowed = MEASURE_KEYS[kind] | MEASURE_COMMON
        measure["kind"] = kind
        for k in sorted(set(meas) - allowed):
            errors.append(f"[measure] unknown key {k!r} for kind {kind!r}")
        for k, v in meas.items():
            if k in ("kind", "calibration_cache") or k not in allowed:
                if k == "calibration_cache":
                    measure[k] = v
                continue
            try:
                num = float(v)
            except ValueError:
                errors.append(f"[measure] {k}: expected a number, got {v!r}")
                continue
            if not math.isfinite(num):
                errors.append(f"[measure] {k}: must be finite")
            elif k in NONNEG and num < 0:
                errors.append(f"[measure] {k}: must be non-negative, got {num}")
            elif k in POSITIVE and num <= 0:
                errors.append(f"[measure] {k}: must be positive, got {num}")
            elif k in ("calibration_replicates", "calibration_seed", "dim"):
                if num != int(num) or num < (1 if k == "calibration_replicates" else 0):
                    errors.append(f"[measure] {k}: expected a non-negative integer")
                num = int(num)
            measure[k] = num
        if "normalization" in measure and "target" in measure:
            errors.append("[measure] give either normalization or target, not both")
        if kind in ("voronoi", "delaunay", "lines"):
            own = "line_intensity" if kind == "lines" else "seed_intensity"
            if (own in measure) == ("length_intensity" in measure):
                errors.append(f"[measure] give exactly one of {own} or length_intensity")
        else:
            for k in sorted(MEASURE_KEYS[kind] - {"dim"} - set(measure)):
                errors.append(f"[measure] {k} is required for kind {kind!r}")

    for key in GRID_KEYS & set(grid):
        if key == "lambda" and ";" in grid[key]:
            parts = [_floats(key, p, errors) for p in grid[key].split(";")]
            values["lam"] = tuple(parts)
        elif key == "K":
            vals = _floats(key, grid[key], errors)
            if len(vals) != 1:
                errors.append("[grid] K: expected a single value") if vals else None
            elif vals[0] <= 0:
                errors.append("[grid] K: must be positive")
            else:
                values["K"] = vals[0]
        else:
            values["lam" if key == "lambda" else key] = _floats(key, grid[key], errors)
    if exp in REQUIRED_GRID:
        for key in REQUIRED_GRID[exp]:
            if key not in grid:
                errors.append(f"[grid] {key} is required for experiment {exp!r}")
    if isinstance(values.get("lam", ()), tuple) and values.get("lam") and isinstance(values["lam"][0], tuple):
        if len(values["lam"]) != len(values.get("r", ())):
            errors.append("[grid] lambda: need one ';'-separated grid per radius")
    if any(x <= 0 for x in values.get("r", ())):
        errors.append("[grid] r: radii must be positive")
    if exp == "limit-ac" and kind not in (None, "modulated_boolean"):
        errors.append("[measure] limit-ac needs kind = modulated_boolean")
    if exp == "limit-singular" and kind not in (None, "voronoi", "delaunay", "lines"):
        errors.append("[measure] limit-singular needs a tessellation kind")
    if errors:
        raise ConfigError(errors)
    cfg = RunConfig(experiment=exp, measure=measure, **values)
    try:
        cfg.measure_spec()
    except CoxPercError as exc:
        raise ConfigError([f"[measure] {exc}"]) from None
    return cfg


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical INI text; ``parse_config(serialize_config(c)) == c``."""
    lines = ["[run]", f"experiment = {cfg.experiment}"]
    for key in ("seed", "replicates", "workers", "out", "snapshot", "export_points"):
        val = getattr(cfg, key)
        lines.append(f"{key} = {str(val).lower() if isinstance(val, bool) else val}")
    lines += ["", "[measure]", f"kind = {cfg.measure['kind']}"]
    for k in sorted(cfg.measure):
        if k != "kind":
            lines.append(f"{k} = {_fmt(cfg.measure[k])}")
    lines += ["", "[grid]"]
    for key, attr in (("r", "r"), ("lambda", "lam"), ("rho", "rho"), ("c", "c"), ("n", "n")):
        val = getattr(cfg, attr)
        if not val:
            continue
        if isinstance(val[0], tuple):
            lines.append(f"{key} = " + "; ".join(", ".join(_fmt(x) for x in g) for g in val))
        else:
            lines.append(f"{key} = " + ", ".join(_fmt(x) for x in val))
    if cfg.K:
        lines.append(f"K = {_fmt(cfg.K)}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: RunConfig) -> str:
    """Hash of the settings that determine results (worker count and output path excluded)."""
    canon = serialize_config(replace(cfg, workers=1, out="", snapshot=False, export_points=0))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]
