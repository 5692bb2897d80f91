"""Command-line entry point: ``driftlab {simulate, diagnose, validate-kernel, sweep}``.

Exit codes: 0 success, 1 kernel validation failure, 2 configuration or usage
error, 3 numerical failure, 4 sweep with failed points.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .config import RunConfig, dump_config, load_config, validate_config
from .errors import (CadenceError, CFLError, ConfigError, DimensionError, DomainError, DriftlabError,
                     GridMismatchError, HypothesisViolation, IterationError, NumericalError, PreconditionError,
                     SingularityError)
from .grid import Grid, GridField
from .io import (build_manifest, read_gridfield, verify_manifest, write_csv, write_gridfield,
                 write_json_line, write_ledger, write_manifest)

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_SWEEP = 0, 1, 2, 3, 4
DIAGNOSTICS = ("decay", "truncation", "linfty", "holder", "audit", "isoperimetric", "zoom", "lemmaA",
               "comparison")


class UsageError(Exception):
    """Bad command-line arguments (exit code 2)."""


def preset_path(name: str) -> Path:
    """Path of a bundled preset configuration (``sqg``, ``heat2d``, ``heat_unit``, ...)."""
    p = resources.files("driftlab") / "presets" / f"{name}.yaml"
    if not p.is_file():
        raise ConfigError(f"unknown preset {name!r}", "preset")
    return Path(str(p))


def _load(path_or_preset: str) -> RunConfig:
    if path_or_preset.startswith("preset:"):
        return load_config(preset_path(path_or_preset.split(":", 1)[1]))
    return load_config(path_or_preset)


def _log(args, msg: str) -> None:
    if not getattr(args, "quiet", False):
        print(msg, file=sys.stderr)


def _calibration(cfg: RunConfig) -> dict:
    from .extension import calibrate_dtn_constant, mode_profile
    s = cfg.s
    return {"s": s, "d_s": mode_profile(s).d_s, "d_s_calibrated": calibrate_dtn_constant(s)}


# -- simulate ------------------------------------------------------------------------------

def run_simulation(cfg: RunConfig, out: Path) -> dict:
    """Simulate, write snapshots, ledger, step audit, resolved config and manifest."""
    from .solver import simulate
    out.mkdir(parents=True, exist_ok=True)
    traj = simulate(cfg)
    outputs = []
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    for i in range(len(traj.times)):
        outputs.append(write_gridfield(snap_dir / f"u_{i:05d}.bin", traj.snapshot(i)))
        if traj.drifts is not None:
            for c in range(traj.grid.d):
                outputs.append(write_gridfield(snap_dir / f"B{c}_{i:05d}.bin",
                                               GridField(traj.grid, traj.drifts[i, c], float(traj.times[i]))))
    outputs.append(write_ledger(out / "ledger.csv", traj.ledger))
    info_rows = [(r.t, r.dt, r.energy_defect, r.divergence, r.picard_residual, r.inversion_iterations,
                  r.mean_drift, r.substeps) for r in traj.info]
    outputs.append(write_csv(out / "steps.csv",
                             ["t[time]", "dt[time]", "energy_defect[1]", "divergence[1]", "picard_residual[1]",
                              "inversion_iterations[1]", "mean[u]", "substeps[1]"], info_rows))
    cfg_path = out / "config.yaml"
    cfg_path.write_text(dump_config(cfg))
    outputs.append(cfg_path)
    man = build_manifest(cfg.to_dict(), outputs, out, cfg.seed, _calibration(cfg),
                         {"n_snapshots": len(traj.times), "n_steps": len(traj.ledger)})
    write_manifest(out / "manifest.json", man)
    defects = [r.energy_defect for r in traj.info]
    return {"out": str(out), "steps": len(traj.ledger), "snapshots": len(traj.times),
            "max_energy_defect": max(defects) if defects else 0.0,
            "final_linf": float(np.max(np.abs(traj.fields[-1])))}


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    out = Path(args.out or cfg["output"]["dir"])
    summary = run_simulation(cfg, out)
    _log(args, f"wrote {summary['snapshots']} snapshots and {summary['steps']} ledger rows to {out}")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _config_from_args(args) -> RunConfig:
    path = args.config or getattr(args, "config_path", None)
    if path is None:
        raise UsageError("a configuration file is required (--config PATH or preset:NAME)")
    cfg = _load(path)
    if args.seed is not None:
        cfg = validate_config({**cfg.to_dict(), "seed": int(args.seed)})
    return cfg


# -- loading runs --------------------------------------------------------------------------

def load_run(run_dir) -> "object":
    """Trajectory rebuilt from a run directory written by ``simulate``."""
    from .solver import build_model, trajectory_from_fields
    run_dir = Path(run_dir)
    man_path = run_dir / "manifest.json"
    if not man_path.exists():
        raise PreconditionError(f"{run_dir} has no manifest.json")
    bad = verify_manifest(man_path)
    if bad:
        raise PreconditionError(f"outputs missing or modified: {', '.join(bad[:5])}")
    man = json.loads(man_path.read_text())
    cfg = validate_config(man["config"])
    snaps = sorted((run_dir / "snapshots").glob("u_*.bin"))
    fields = [read_gridfield(p) for p in snaps]
    grid = fields[0].grid
    times = [f.time_tag for f in fields]
    drifts = None
    if (run_dir / "snapshots" / "B0_00000.bin").exists():
        drifts = np.stack([np.stack([read_gridfield(run_dir / "snapshots" / f"B{c}_{i:05d}.bin").values
                                     for c in range(grid.d)]) for i in range(len(snaps))])
    traj = trajectory_from_fields(grid, cfg.s, times, [f.values for f in fields], drifts)
    traj.model = build_model(cfg)
    traj.config = cfg
    return traj


# -- diagnose ------------------------------------------------------------------------------

def _need_run(args):
    if not args.run:
        raise UsageError(f"diagnostic {args.diagnostic!r} needs --run RUN_DIR")
    return load_run(args.run)


def _diag_out(args) -> Path:
    if args.out:
        out = Path(args.out)
    elif args.run:
        out = Path(args.run) / "diagnostics"
    else:
        out = Path("diagnostics")
    out.mkdir(parents=True, exist_ok=True)
    return out


def diagnose(args) -> dict:
    from . import algebra
    from .degiorgi import (audit_trajectory, decay_exponent, holder_quotient, linfty_level, ramp_family_sweep,
                           truncation_energies, zoom_sequence)
    from .degiorgi.audit import AUDIT_COLUMNS
    from .kernel import KernelSpec
    from .nonlocal_op import build_plan
    did = args.diagnostic
    out = _diag_out(args)
    if did == "decay":
        traj = _need_run(args)
        window = args.window or (float(traj.times[1]), float(traj.times[-1]))
        fit = decay_exponent(traj, window)
        sel = (traj.times >= window[0]) & (traj.times <= window[1])
        sup = np.max(np.abs(traj.fields[sel]).reshape(int(sel.sum()), -1), axis=1)
        write_csv(out / "decay.csv", ["t[time]", "sup[u]"], zip(traj.times[sel], sup))
        return {"diagnostic": did, **fit.to_dict(), "predicted": -traj.grid.d / (4 * traj.s)}
    if did == "truncation":
        traj = _need_run(args)
        lad = truncation_energies(traj, args.lam, args.K or 10)
        write_csv(out / "truncation.csv", ["k[1]", "level[u]", "T[time]", "U[u^2*len^d]"],
                  zip(range(lad.K + 1), lad.levels, lad.times, lad.U))
        return {"diagnostic": did, "lambda": lad.lam, "U": lad.U.tolist(), "monotone": lad.is_monotone(),
                "cadence_defect": lad.cadence_defect, "warnings": lad.warnings}
    if did == "linfty":
        traj = _need_run(args)
        res = linfty_level(traj, args.tolerance, args.K or 20)
        write_csv(out / "linfty.csv", ["level[u]", "lower[u]", "energy[u^2*len^d]", "ledger_sup[u]"],
                  [(res.level, res.lower, res.energy, res.ledger_sup)])
        return {"diagnostic": did, "level": res.level, "lower": res.lower, "ledger_sup": res.ledger_sup,
                "sound": res.level >= res.ledger_sup - args.tolerance}
    if did == "holder":
        traj = _need_run(args)
        res = holder_quotient(traj, args.alpha, radius=args.radius, seed=args.seed or 0)
        write_csv(out / "holder.csv", ["alpha[1]", "radius[len]", "quotient[u/len^alpha]"],
                  [(res.alpha, res.radius, res.quotient)])
        return {"diagnostic": did, "alpha": res.alpha, "radius": res.radius, "quotient": res.quotient,
                "pairs": res.n_pairs}
    if did == "audit":
        traj = _need_run(args)
        plan = build_plan(KernelSpec(traj.grid.d, traj.s), traj.grid)
        rows = audit_trajectory(traj, plan)
        write_csv(out / "audit.csv", [f"{c}[1]" for c in AUDIT_COLUMNS],
                  [tuple(r.to_dict()[c] for c in AUDIT_COLUMNS) for r in rows])
        cs = [r.constant for r in rows]
        return {"diagnostic": did, "max_constant": max(cs) if cs else 0.0, "rows": len(rows)}
    if did == "isoperimetric":
        d = args.d or 2
        s = args.s or 0.5
        grid = Grid(d, 64, 4.0)
        center = [2.0 + grid.h / 2] * d
        sw = ramp_family_sweep(grid, s, args.p, args.r, center=center)
        write_csv(out / "isoperimetric.csv", ["A[len^(d+2-2s)]", "B[len^(d+2-2s)]", "C[len^(d+2-2s)]", "K[1]",
                                              "lhs[1]", "rhs_core[1]", "ratio[1]"],
                  [(m.A, m.B, m.C, m.K, m.lhs, m.rhs_core, m.ratio) for m in sw.results])
        return {"diagnostic": did, "d": d, "s": s, "p": args.p, "rho": sw.rho, "c_fit": sw.c_fit,
                "violations": sw.violations}
    if did == "zoom":
        traj = _need_run(args)
        res = zoom_sequence(traj, args.sigma, args.lambda_star, args.K or 6)
        write_csv(out / "zoom.csv", ["level[1]", "osc[1]"], enumerate(res.osc))
        return {"diagnostic": did, **res.summary()}
    if did == "lemmaA":
        reps = [algebra.comparability_scan(v, int(args.n), seed=args.seed or 0) for v in args.variants]
        write_json_line(out / "lemmaA.json", [r.to_dict() for r in reps])
        return {"diagnostic": did, "reports": [{k: r.to_dict()[k] for k in
                                                ("variant", "c_lower", "c_upper", "violations", "proof_C_fit")}
                                               for r in reps]}
    if did == "comparison":
        from .kernel import modulation_from_dict
        d = args.d or 1
        s = args.s or 0.5
        grid = Grid(d, 32 if d == 1 else 16)
        mod = modulation_from_dict({"type": "exp_sum", "contrast": args.lam})
        pg = build_plan(KernelSpec(d, s, args.lam, "modulated", mod), grid)
        pf = build_plan(KernelSpec(d, s), grid)
        band = algebra.comparison_batch(pg, pf, int(args.n) if args.n < 10**4 else 100, seed=args.seed or 0)
        write_csv(out / "comparison.csv", ["sample[1]", "ratio[1]"], enumerate(band.ratios))
        return {"diagnostic": did, **band.to_dict()}
    raise UsageError(f"unknown diagnostic {did!r}; valid ids: {', '.join(DIAGNOSTICS)}")


def cmd_diagnose(args) -> int:
    if args.diagnostic not in DIAGNOSTICS:
        raise UsageError(f"unknown diagnostic {args.diagnostic!r}; valid ids: {', '.join(DIAGNOSTICS)}")
    summary = diagnose(args)
    out = _diag_out(args)
    write_json_line(out / f"{args.diagnostic}.summary.json", _clean(summary))
    print(json.dumps(_clean(summary), sort_keys=True, default=_jsonable))
    return EXIT_OK


def _clean(o):
    """Replace non-finite floats by None so printed summaries are strict JSON."""
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (float, np.floating)) and not np.isfinite(o):
        return None
    return o


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    return str(o)


# -- validate-kernel -----------------------------------------------------------------------

def validate_kernel_config(cfg: RunConfig, seed: int = 0) -> list:
    from .kernel import tabulate, validate_angular_cancellation, validate_ellipticity, validate_symmetry
    from .solver import build_kernel
    spec = build_kernel(cfg)
    L = cfg["grid"]["L"]
    reps = [validate_symmetry(spec, 500, seed, L), validate_ellipticity(spec, 2000, seed, L)]
    if spec.family != "tabulated":
        reps.append(validate_angular_cancellation(spec, [0.1, 0.3, 1.0], 32, seed, L))
    if spec.family == "fractional":
        seps = np.geomspace(1e-3, 4 * L, 400)
        tab = tabulate(spec, seps)
        reps.append(validate_ellipticity(tab, 2000, seed, L))
        reps[-1].condition = "tabulated_roundtrip"
    return reps


def cmd_validate_kernel(args) -> int:
    cfg = _config_from_args(args)
    reps = validate_kernel_config(cfg, args.seed or 0)
    ok = all(r.passed for r in reps)
    print(json.dumps(_clean({"pass": ok, "reports": [r.to_dict() for r in reps]}), sort_keys=True,
                     default=_jsonable))
    if not ok:
        for r in reps:
            if not r.passed:
                _log(args, f"{r.condition} failed: worst ratio {r.worst_ratio:.6g} at {r.witness}")
    return EXIT_OK if ok else EXIT_VALIDATION


# -- sweep ---------------------------------------------------------------------------------

SWEEP_KEYS = {"schema", "base", "axes", "mode", "metrics", "name"}
SWEEP_METRICS = ("max_energy_defect", "final_linf", "linfty_level")


def load_sweep(path) -> dict:
    raw = yaml.safe_load(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ConfigError("sweep file must be a mapping", None)
    for k in raw:
        if k not in SWEEP_KEYS:
            raise ConfigError(f"unknown key {k!r}", str(k))
    if raw.get("schema") != 1:
        raise ConfigError("sweep schema must be 1", "schema")
    base = raw.get("base")
    if isinstance(base, str):
        p = Path(base)
        if not p.is_absolute() and not base.startswith("preset:"):
            p = Path(path).parent / p
        base_cfg = _load(str(p) if not base.startswith("preset:") else base)
    elif isinstance(base, dict):
        base_cfg = validate_config(base)
    else:
        raise ConfigError("sweep needs a base configuration", "base")
    axes = raw.get("axes") or {}
    if not axes or not all(isinstance(v, list) and v for v in axes.values()):
        raise ConfigError("sweep axes must be non-empty lists", "axes")
    mode = raw.get("mode", "grid")
    if mode not in ("grid", "zip"):
        raise ConfigError("sweep mode must be grid or zip", "mode")
    metrics = raw.get("metrics", ["max_energy_defect", "final_linf"])
    for m in metrics:
        if m not in SWEEP_METRICS:
            raise ConfigError(f"unknown metric {m!r}", "metrics")
    return {"base": base_cfg, "axes": axes, "mode": mode, "metrics": list(metrics)}


def sweep_points(sweep: dict) -> list:
    names = list(sweep["axes"])
    values = [sweep["axes"][n] for n in names]
    if sweep["mode"] == "zip":
        if len({len(v) for v in values}) != 1:
            raise ConfigError("zip sweeps need equal axis lengths", "axes")
        combos = list(zip(*values))
    else:
        combos = [tuple(c) for c in np.array(np.meshgrid(*[np.arange(len(v)) for v in values],
                                                         indexing="ij")).reshape(len(values), -1).T]
        combos = [tuple(values[a][i] for a, i in enumerate(c)) for c in combos]
    pts = []
    for combo in combos:
        cfg = sweep["base"]
        for n, v in zip(names, combo):
            cfg = cfg.replace(n, v.item() if isinstance(v, np.generic) else v)
        pts.append((dict(zip(names, combo)), cfg))
    return pts


def config_digest(cfg: RunConfig) -> str:
    return hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()


def _run_point(job: tuple) -> dict:
    index, params, cfg_dict, out, metrics = job
    cfg = validate_config(cfg_dict)
    pdir = Path(out) / f"point_{index:04d}"
    digest = config_digest(cfg)
    done = pdir / "point.json"
    if done.exists():
        prev = json.loads(done.read_text())
        if prev.get("digest") == digest and prev.get("status") == "ok" and not verify_manifest(pdir / "manifest.json"):
            prev["resumed"] = True
            return prev
    rec = {"index": index, "params": params, "digest": digest, "status": "ok", "error": ""}
    try:
        summ = run_simulation(cfg, pdir)
        rec["max_energy_defect"] = summ["max_energy_defect"]
        rec["final_linf"] = summ["final_linf"]
        if "linfty_level" in metrics:
            from .degiorgi import linfty_level
            rec["linfty_level"] = linfty_level(load_run(pdir), 0.0, 20).level
    except (DriftlabError, ConfigError, ValueError, ArithmeticError) as exc:
        rec["status"] = "failed"
        rec["error"] = f"{type(exc).__name__}: {exc}"
    pdir.mkdir(parents=True, exist_ok=True)
    done.write_text(json.dumps(rec, sort_keys=True, default=_jsonable) + "\n")
    rec["resumed"] = False
    return rec


def run_sweep(sweep: dict, out: Path, threads: int = 1) -> list:
    out.mkdir(parents=True, exist_ok=True)
    pts = sweep_points(sweep)
    jobs = [(i, {k: (v.item() if isinstance(v, np.generic) else v) for k, v in p.items()}, c.to_dict(), str(out),
             sweep["metrics"]) for i, (p, c) in enumerate(pts)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            recs = list(ex.map(_run_point, jobs))
    else:
        recs = [_run_point(j) for j in jobs]
    names = list(sweep["axes"])
    header = ["index[1]"] + [f"{n}[cfg]" for n in names] + ["status[1]"] + [f"{m}[1]" for m in sweep["metrics"]]
    rows = []
    for r in sorted(recs, key=lambda r: r["index"]):
        rows.append([r["index"]] + [r["params"][n] for n in names] + [r["status"]]
                    + [r.get(m, float("nan")) for m in sweep["metrics"]])
    write_csv(out / "summary.csv", header, rows)
    return recs


def cmd_sweep(args) -> int:
    path = args.config or args.config_path
    if path is None:
        raise UsageError("sweep needs a sweep file (--config PATH)")
    sweep = load_sweep(path)
    out = Path(args.out or "sweep")
    recs = run_sweep(sweep, out, max(1, args.threads or 1))
    failed = [r for r in recs if r["status"] != "ok"]
    print(json.dumps({"points": len(recs), "failed": len(failed), "resumed": sum(r["resumed"] for r in recs),
                      "summary": str(out / "summary.csv")}, sort_keys=True))
    for r in failed:
        _log(args, f"point {r['index']} failed: {r['error']}")
    return EXIT_OK if not failed else EXIT_SWEEP


# -- parser --------------------------------------------------------------------------------

def _add_global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    """Global flags; subcommand copies use SUPPRESS so they never mask values given earlier."""
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=d(None), help="configuration file or preset:NAME")
    p.add_argument("--out", default=d(None), help="output directory")
    p.add_argument("--seed", type=int, default=d(None), help="override the configured seed")
    p.add_argument("--threads", type=int, default=d(1), help="worker processes for sweeps")
    p.add_argument("--quiet", action="store_true", default=d(False), help="suppress progress messages")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _add_global_flags(common, suppress=True)

    p = argparse.ArgumentParser(prog="driftlab", description="Nonlocal drift-diffusion runs and regularity diagnostics.")
    _add_global_flags(p, suppress=False)
    p.add_argument("--version", action="version", version=f"driftlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", parents=[common], help="run a simulation from a configuration")
    sp.add_argument("config_path", nargs="?", help="configuration file (alternative to --config)")
    sp.set_defaults(func=cmd_simulate)

    dp = sub.add_parser("diagnose", parents=[common], help="run a diagnostic on a run directory")
    dp.add_argument("diagnostic", help=f"one of: {', '.join(DIAGNOSTICS)}")
    dp.add_argument("--run", help="run directory written by simulate")
    dp.add_argument("--window", type=float, nargs=2, help="decay fit window t0 t1")
    dp.add_argument("--lam", type=float, default=2.0, help="truncation level or kernel contrast")
    dp.add_argument("--K", type=int, default=None, help="number of truncation or zoom levels")
    dp.add_argument("--tolerance", type=float, default=0.0, help="linfty energy tolerance")
    dp.add_argument("--alpha", type=float, default=0.3)
    dp.add_argument("--radius", type=float, default=0.1)
    dp.add_argument("--sigma", type=float, default=0.5)
    dp.add_argument("--lambda-star", dest="lambda_star", type=float, default=0.05)
    dp.add_argument("--p", type=float, default=2.0)
    dp.add_argument("--r", type=float, default=1.0)
    dp.add_argument("--d", type=int, default=None)
    dp.add_argument("--s", type=float, default=None)
    dp.add_argument("--n", type=float, default=1e5, help="sample count")
    dp.add_argument("--variants", nargs="+", default=["Z4", "Z5"])
    dp.set_defaults(func=cmd_diagnose)

    vp = sub.add_parser("validate-kernel", parents=[common], help="check kernel structural conditions")
    vp.add_argument("config_path", nargs="?")
    vp.set_defaults(func=cmd_validate_kernel)

    wp = sub.add_parser("sweep", parents=[common], help="run a parameter sweep")
    wp.add_argument("config_path", nargs="?")
    wp.set_defaults(func=cmd_sweep)
    return p


def main(argv: Optional[list] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        key = f" [{exc.key}]" if getattr(exc, "key", None) else ""
        print(f"configuration error{key}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UsageError, FileNotFoundError, PreconditionError, DomainError, CadenceError, HypothesisViolation,
            DimensionError, GridMismatchError, SingularityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, CFLError, IterationError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
