"""Command-line entry point: ``coxperc <experiment> --config PATH``.

Exit codes: 0 success, 2 invalid configuration or parameters, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXPERIMENTS, ConfigError, RunConfig, config_hash, parse_config, serialize_config
from .cox import PointPattern
from .errors import ParameterError, UnsupportedDiagnosticError, UnsupportedDimensionError
from .estimates import EstimateWithCI, proportion
from .experiments import (
    ExperimentResult,
    ResultRow,
    coupled_limit_ac,
    coupled_limit_large_radius,
    coupled_limit_singular,
    replicate_pattern,
    sweep_lambda,
)
from .geom import cube
from .measures import (
    aec_check,
    calibrate,
    calibration_constant,
    exact_mean_mass,
    is_singular,
    sample_measure,
    spec_to_dict,
    stabilization_diagnostics,
)
from .rng import substream
from .svg import curves_svg, snapshot_svg

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3
VALIDATION_ERRORS = (ConfigError, ParameterError, UnsupportedDiagnosticError, UnsupportedDimensionError)


def _prepare_spec(cfg: RunConfig, out: Path):
    """The measure spec with its normalization, plus calibration provenance."""
    spec = cfg.measure_spec()
    info: dict = {}
    target = cfg.measure.get("target")
    cache = cfg.measure.get("calibration_cache") or str(out / "calibration.json")
    reps = int(cfg.measure.get("calibration_replicates", 200))
    cseed = int(cfg.measure.get("calibration_seed", cfg.seed))
    if is_singular(spec) and (target is not None or cfg.experiment == "calibrate"):
        info = calibration_constant(spec, reps, cseed, cache)
        info = {**info, "cache": cache}
    if target is not None:
        spec = calibrate(spec, target, replicates=reps, seed=cseed, cache=cache if is_singular(spec) else None)
        info = {**info, "target": target}
    if not is_singular(spec):
        info = {**info, "exact_mean_mass": exact_mean_mass(replace(spec, normalization=1.0))}
    info["normalization"] = spec.normalization
    return spec, info


def _stab_rows(cfg: RunConfig, spec, n: float) -> list[ResultRow]:
    diag = stabilization_diagnostics(spec, n, cfg.replicates, cfg.seed)
    rows = [
        ResultRow(spec.kind, 0.0, 0.0, n, "stab_prob", EstimateWithCI(diag.empirical_prob, diag.std_error, diag.replicates, float(diag.replicates), cfg.seed)),
        ResultRow(spec.kind, 0.0, 0.0, n, "stab_bound", EstimateWithCI(diag.theory_bound, 0.0, diag.replicates, float(diag.replicates), cfg.seed)),
    ]
    if spec.dim == 2:
        fails = 0
        for i in range(cfg.replicates):
            real = sample_measure(spec, cube(2 * n), np.random.default_rng(substream(cfg.seed, "aec", repr(n), i)))
            res = aec_check(real, n)
            fails += not res.q_n_support_connected_in_q_2n
        rows.append(ResultRow(spec.kind, 0.0, 0.0, n, "aec_fail", proportion(fails, cfg.replicates, cfg.seed)))
    return rows


def plan_units(cfg: RunConfig, spec) -> list[tuple[str, callable]]:
    """Independent units of work; each returns result rows and can be checkpointed."""
    kw = dict(workers=cfg.workers)
    exp = cfg.experiment
    if exp == "sweep":
        return [
            (f"sweep/r={r!r}", lambda r=r, g=g: sweep_lambda(spec, r, list(g), cfg.K, cfg.replicates, cfg.seed, **kw).rows)
            for r, g in zip(cfg.r, cfg.lam_grids())
        ]
    if exp == "limit-large-r":
        return [
            (f"large-r/rho={rho!r}", lambda rho=rho: coupled_limit_large_radius(spec, rho, cfg.r, cfg.K, cfg.replicates, cfg.seed, **kw).rows)
            for rho in cfg.rho
        ]
    if exp == "limit-singular":
        return [
            (f"singular/c={c!r}", lambda c=c: coupled_limit_singular(spec, c, cfg.lam, cfg.K, cfg.replicates, cfg.seed, **kw).rows)
            for c in cfg.c
        ]
    if exp == "limit-ac":
        return [
            (f"ac/rho={rho!r}", lambda rho=rho: coupled_limit_ac(spec, rho, cfg.lam, cfg.K, cfg.replicates, cfg.seed, **kw).rows)
            for rho in cfg.rho
        ]
    if exp == "diagnose-stab":
        return [(f"stab/n={n!r}", lambda n=n: _stab_rows(cfg, spec, n)) for n in cfg.n]
    if exp == "calibrate":
        def unit():
            if is_singular(spec):
                ent = calibration_constant(spec, int(cfg.measure.get("calibration_replicates", 200)),
                                           int(cfg.measure.get("calibration_seed", cfg.seed)))
                raw = EstimateWithCI(ent["raw_intensity"], ent["std_error"], ent["replicates"], float(ent["replicates"]), ent["seed"])
            else:
                raw = EstimateWithCI(exact_mean_mass(replace(spec, normalization=1.0)), 0.0, 1, 1.0, cfg.seed)
            norm = EstimateWithCI(spec.normalization, 0.0, raw.replicates, raw.effective_weight_sum, cfg.seed)
            return [ResultRow(spec.kind, 0.0, 0.0, 0.0, "raw_mean_mass", raw),
                    ResultRow(spec.kind, 0.0, 0.0, 0.0, "normalization", norm)]
        return [("calibrate", unit)]
    raise ParameterError(f"unknown experiment {exp!r}")


def _row_to_json(row: ResultRow) -> dict:
    return {"spec": row.spec, "lam": row.lam, "r": row.r, "K": row.K, "quantity": row.quantity,
            "estimate": {**asdict(row.estimate), "flags": list(row.estimate.flags)}}


def _row_from_json(d: dict) -> ResultRow:
    est = dict(d["estimate"])
    est["flags"] = tuple(est.get("flags", ()))
    return ResultRow(d["spec"], d["lam"], d["r"], d["K"], d["quantity"], EstimateWithCI(**est))


def _load_checkpoint(path: Path, chash: str) -> dict:
    done: dict = {}
    if not path.exists():
        return done
    for line in path.read_text(encoding="utf-8").splitlines():
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            continue  # torn final line from an interrupted write
        if rec.get("config_hash") == chash:
            done[rec["unit"]] = [_row_from_json(x) for x in rec["rows"]]
    return done


def _write_curves(result: ExperimentResult, path: Path, title: str) -> None:
    series: dict = {}
    for row in result.rows:
        if row.quantity != "theta":
            continue
        key = f"{row.spec} r={row.r:g}"
        xs, ys, ss = series.setdefault(key, ([], [], []))
        xs.append(row.lam)
        ys.append(row.estimate.mean)
        ss.append(row.estimate.std_error)
    if series:
        path.write_text(curves_svg(series, title), encoding="utf-8")


def _snapshot(cfg: RunConfig, spec, out: Path) -> list[str]:
    """One Palm realization with its Cox points: SVG, plus segment CSV for tessellations."""
    side = cfg.K if cfg.K else 4.0
    lam = max((max(g) for g in cfg.lam_grids() if g), default=1.0)
    r = cfg.r[0] if cfg.r else 1.0
    if cfg.experiment == "limit-large-r" and cfg.rho:
        lam = cfg.rho[0] / r**spec.dim
        side = cfg.K * r
    if spec.dim != 2:
        return []
    pts, w, moved = replicate_pattern(spec, r, lam, side, cfg.seed, 0)
    written = []
    window = cube(side)
    if moved is not None and hasattr(moved, "system"):
        system = moved.system.clipped(window)
        system.to_csv(out / "snapshot_segments.csv")
        written.append("snapshot_segments.csv")
        segs = np.stack([system.a, system.b], axis=1) if len(system) else None
        svg = snapshot_svg(window, segments=segs, points=pts)
    elif moved is not None:
        cells = 160
        h = side / cells
        axes = [window.lower[k] + (np.arange(cells) + 0.5) * h for k in range(2)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 2)
        dens = moved.density_at(grid).reshape(cells, cells)
        svg = snapshot_svg(window, density=dens, points=pts)
    else:
        svg = snapshot_svg(window, points=pts)
    (out / "snapshot.svg").write_text(svg, encoding="utf-8")
    written.append("snapshot.svg")
    return written


def _export_points(cfg: RunConfig, spec, out: Path) -> list[str]:
    """Palm patterns of the first replicates of the first sweep unit."""
    if not cfg.r or not cfg.lam:
        return []
    r, grid = cfg.r[0], cfg.lam_grids()[0]
    side = cfg.K * (r if cfg.experiment == "limit-large-r" else 1.0)
    lam = cfg.rho[0] / r**spec.dim if cfg.experiment == "limit-large-r" else max(grid)
    folder = out / "points"
    folder.mkdir(exist_ok=True)
    names = []
    for i in range(cfg.export_points):
        pts, _, _ = replicate_pattern(spec, r, lam, side, cfg.seed, i)
        name = f"replicate_{i:05d}.csv"
        PointPattern(pts, cube(side, dim=spec.dim), lam, cfg.seed).to_csv(folder / name)
        names.append(f"points/{name}")
    return names


def run(cfg: RunConfig) -> int:
    """Execute a validated config; returns the process exit code."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    chash = config_hash(cfg)
    manifest = {
        "tool": "coxperc",
        "version": __version__,
        "experiment": cfg.experiment,
        "config_hash": chash,
        "config": serialize_config(cfg),
        "seed": cfg.seed,
        "workers": cfg.workers,
        "status": "running",
        "units": {},
        "outputs": [],
    }
    t0 = time.perf_counter()
    ckpt = out / "checkpoint.jsonl"
    result = ExperimentResult(cfg.experiment, config_hash=chash)
    try:
        spec, calib = _prepare_spec(cfg, out)
        manifest["measure"] = spec_to_dict(spec)
        manifest["calibration"] = calib
        done = _load_checkpoint(ckpt, chash)
        for unit_id, func in plan_units(cfg, spec):
            if unit_id in done:
                rows = done[unit_id]
                manifest["units"][unit_id] = {"resumed": True}
            else:
                t1 = time.perf_counter()
                rows = func()
                with open(ckpt, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps({"config_hash": chash, "unit": unit_id, "rows": [_row_to_json(x) for x in rows]}) + "\n")
                manifest["units"][unit_id] = {"seconds": round(time.perf_counter() - t1, 3)}
            result.rows.extend(rows)
    except VALIDATION_ERRORS as exc:
        return _fail(out, manifest, result, exc, EXIT_INVALID)
    except (KeyboardInterrupt, Exception) as exc:  # noqa: BLE001
        return _fail(out, manifest, result, exc, EXIT_RUNTIME)

    result.to_csv(out / "results.csv")
    manifest["outputs"].append("results.csv")
    if cfg.experiment in ("sweep", "limit-ac", "limit-singular"):
        _write_curves(result, out / "curves.svg", f"{cfg.experiment}: {spec.kind}")
        if (out / "curves.svg").exists():
            manifest["outputs"].append("curves.svg")
    if cfg.snapshot:
        manifest["outputs"] += _snapshot(cfg, spec, out)
    if cfg.export_points:
        manifest["outputs"] += _export_points(cfg, spec, out)
    if (out / "calibration.json").exists():
        manifest["outputs"].append("calibration.json")
    manifest["status"] = "complete"
    manifest["wall_clock"] = round(time.perf_counter() - t0, 3)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    ckpt.unlink(missing_ok=True)
    return EXIT_OK


def _fail(out: Path, manifest: dict, result: ExperimentResult, exc: BaseException, code: int) -> int:
    manifest["status"] = "interrupted" if isinstance(exc, KeyboardInterrupt) else "failed"
    manifest["error"] = f"{type(exc).__name__}: {exc}"
    if result.rows:
        result.to_csv(out / "results.partial.csv")
        manifest["outputs"].append("results.partial.csv")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    print(f"error: {exc}", file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coxperc", description="Cox-process continuum percolation experiments")
    parser.add_argument("--version", action="version", version=f"coxperc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--workers", type=int, help="worker processes for replicates")
        p.add_argument("--out", help="output directory")
        p.add_argument("--snapshot", action="store_true", help="write an SVG of one realization with its points")
        p.add_argument("--export-points", type=int, default=None, metavar="N",
                       help="write the Palm point patterns of the first N replicates as CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    overrides = {"seed": args.seed, "workers": args.workers, "out": args.out, "export_points": args.export_points}
    if args.snapshot:
        overrides["snapshot"] = "true"
    try:
        cfg = parse_config(text, overrides, experiment=args.command)
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_INVALID
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
