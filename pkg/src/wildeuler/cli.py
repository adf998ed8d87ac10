"""Command-line front door: paths, frames, scheme runs, verification, calibration and reports.

Every command writes into ``<out>/<command>/`` together with a manifest and exits 0
iff all of its checks pass. Outputs are pure functions of the config and inputs.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

import numpy as np

from . import io
from .calibration import TABLE_PATH, CalibrationTable, calibrate_gain, calibrate_segments
from .config import ConfigError, RunConfig
from .convex_integration import (SubsolutionState, functional_single, relative_l2, weak_metric_D,
                                 x0_checklist)
from .pipeline import (make_frame, make_grid, make_initial_data, make_noise, oscillation_params, pressure,
                       run_one, table_for)
from .stochastics import holder_process, sample_wiener, stop_path
from .transform import weak_residuals
from .verification import (Check, check_frame, check_geometry, check_ito, check_kernels, check_oscillatory,
                           check_paths, check_scheme, check_waves)
from .waves import CutoffSpec


def _finish(outdir: Path, command: str, cfg: RunConfig, checks: list, inputs=(), extra: dict | None = None) -> int:
    ok = all(c.ok for c in checks)
    io.write_json(outdir / "report.json", {"command": command, "ok": ok,
                                           "checks": [c.as_dict() for c in checks]} | (extra or {}))
    io.write_manifest(outdir, command, cfg.to_dict(), inputs)
    for c in checks:
        print(f"{'PASS' if c.ok else 'FAIL'} {c.name}: {c.value:.6g} (threshold {c.threshold:.6g})")
    print(f"{command}: {'ok' if ok else 'FAILED'} -> {outdir}")
    return 0 if ok else 1


def _slice(a: np.ndarray) -> np.ndarray:
    """Leading 2D slice of a spatial array."""
    return a[(Ellipsis,) + (slice(None), slice(None)) + (0,) * (a.ndim - 2)] if a.ndim > 2 else a


# -- commands -------------------------------------------------------------------------

def cmd_simulate_paths(cfg: RunConfig, outdir: Path) -> int:
    g, nz = cfg.grid, cfg.noise
    rows = []
    for seed in nz.path_seeds:
        base = sample_wiener(seed, g.T, g.dt)
        cert = holder_process(base, nz.a)
        st = stop_path(base, nz.a, nz.M, cert)
        io.write_path_table(outdir / "paths" / f"path_{seed}.txt", st, cert)
        rows.append([seed, st.tau_index, st.tau, float(cert.O_values[-1]), st.norm, int(st.exceeded)])
    io.write_csv_rows(outdir / "tau_table.csv", ["seed", "tau_index", "tau", "O_T", "norm", "exceeded"], rows)
    return _finish(outdir, "simulate-paths", cfg, check_paths(cfg))


def _dump_frame(fr, d: Path) -> None:
    for name in ("h", "r", "M", "rho", "V", "v0", "Psi0", "beta", "times"):
        io.write_field(d / f"{name}.bin", getattr(fr, name), field=name, kind=fr.kind)
    io.write_csv_slice(d / "r_final.csv", fr.grid, _slice(fr.r[-1]), "r")
    io.write_json(d / "frame.json", {"kind": fr.kind, "bounds": fr.bounds, "meta": fr.meta,
                                     "nt": fr.nt, "res": fr.grid.res, "N": fr.N})


def cmd_build_frame(cfg: RunConfig, outdir: Path) -> int:
    checks = []
    for seed in cfg.noise.path_seeds:
        fr = make_frame(cfg, seed)
        _dump_frame(fr, outdir / "frames" / f"seed_{seed}")
        checks += check_frame(cfg, fr)
    return _finish(outdir, "build-frame", cfg, checks)


def cmd_run_scheme(cfg: RunConfig, outdir: Path) -> int:
    table = table_for(cfg)
    checks, rows, summary = [], [], []
    finals = {}
    for p in cfg.noise.path_seeds:
        fr = make_frame(cfg, p)
        mom0 = make_initial_data(cfg).mom0
        for s in cfg.scheme.seeds:
            res = run_one(cfg, fr, s, table)
            tag = f"p{p}_s{s}"
            d = outdir / "runs" / tag
            io.write_field(d / "v.bin", res.state.v, field="v", path_seed=p, scheme_seed=s)
            io.write_field(d / "F.bin", res.state.F, field="F", path_seed=p, scheme_seed=s)
            wr = weak_residuals(fr, res.state.v, pressure(cfg), cfg.tol.test_count, mom0)
            io.write_json(d / "trace.json", res.as_dict() | {"e": res.state.e, "delta": res.state.delta,
                                                             "weak_residuals": wr.as_dict()})
            for k, I in enumerate(res.I_values):
                step = res.trace[k - 1] if k else None
                rows.append([p, s, k, step.n if step else 0, int(step.accepted) if step else 1, I,
                             step.gain if step else 0.0, step.delta if step else res.state.delta])
            checks += check_scheme(cfg, res, f"[{tag}]")
            checks.append(Check(f"scheme[{tag}].converged", abs(res.I_values[-1]), cfg.tol.I, res.converged,
                                {"stalled": res.stalled, "steps": len(res.trace)}))
            checks.append(Check(f"scheme[{tag}].weak_residuals",
                                max(wr.continuity, wr.momentum, wr.initial), cfg.tol.weak, wr.ok(cfg.tol.weak)))
            finals[(p, s)] = res.state.v
            summary.append({"path_seed": p, "scheme_seed": s, "I_initial": res.I_values[0],
                            "I_final": res.I_values[-1], "stalled": res.stalled, "converged": res.converged})
        seeds = cfg.scheme.seeds
        for i in range(len(seeds)):
            for j in range(i + 1, len(seeds)):
                a, b = finals[(p, seeds[i])], finals[(p, seeds[j])]
                dist = relative_l2(fr.grid, fr.times, a, b)
                checks.append(Check(f"demo[p{p}].distance_{seeds[i]}_{seeds[j]}", dist, 0.1, dist >= 0.1,
                                    {"weak_D": weak_metric_D(fr.grid, a, b, cfg.tol.test_count)}))
    io.write_csv_rows(outdir / "I_trace.csv", ["path_seed", "scheme_seed", "step", "n", "accepted", "I", "gain",
                                               "delta"], rows)
    ens = {}
    for r in summary:
        ens.setdefault(r["scheme_seed"], []).append(r["I_final"])
    extra = {"runs": summary, "ensemble_I_final": {str(k): float(np.mean(v)) for k, v in sorted(ens.items())}}
    return _finish(outdir, "run-scheme", cfg, checks, extra=extra)


def _reload_runs(cfg: RunConfig, artifacts: Path) -> list[Check]:
    checks = []
    frames = {}
    for d in sorted((artifacts / "runs").iterdir()):
        trace = json.loads((d / "trace.json").read_text())
        v, hv = io.read_field(d / "v.bin")
        F, _ = io.read_field(d / "F.bin")
        p = int(hv["path_seed"])
        fr = frames.setdefault(p, make_frame(cfg, p))
        st = SubsolutionState(fr, v, F, float(trace["e"]), float(trace["delta"]), fr.M_of(v))
        chk = x0_checklist(st, cfg.tol.weak, cfg.tol.test_count)
        I = np.asarray(trace["I_values"], float)
        checks.append(Check(f"artifact[{d.name}].checklist", chk.margin, 0.0, chk.ok, chk.as_dict()))
        checks.append(Check(f"artifact[{d.name}].I_reproduced", abs(functional_single(st) - I[-1]), 1e-12,
                            abs(functional_single(st) - I[-1]) <= 1e-12))
        checks.append(Check(f"artifact[{d.name}].I_monotone", float(-np.diff(I).min(initial=0.0)), 0.0,
                            bool(np.all(np.diff(I) >= 0) and I.max() <= 1e-12)))
    return checks


def cmd_verify(cfg: RunConfig, outdir: Path, artifacts: Path | None = None) -> int:
    table = table_for(cfg)
    params = oscillation_params(cfg, table)
    checks = check_paths(cfg) + check_kernels(cfg) + check_geometry(cfg, table) + check_waves(cfg)
    checks += check_oscillatory(cfg, params)
    p = cfg.noise.path_seeds[0]
    fr = make_frame(cfg, p)
    checks += check_frame(cfg, fr)
    if cfg.noise.kind == "additive":
        noise = make_noise(cfg, p)
        checks += check_ito(cfg, make_initial_data(cfg), noise.G, noise.path)
    if artifacts is not None:
        checks += _reload_runs(cfg, artifacts)
    else:
        checks += check_scheme(cfg, run_one(cfg, fr, cfg.scheme.seeds[0], table), f"[p{p}]")
    return _finish(outdir, "verify", cfg, checks, inputs=[] if artifacts is None else
                   sorted(q for q in artifacts.rglob("*") if q.is_file()))


def cmd_calibrate(cfg: RunConfig, outdir: Path, samples: int = 64, gain_seeds=(100, 101),
                  install: bool = False) -> int:
    cut = CutoffSpec(plateau=cfg.scheme.plateau, order=cfg.scheme.cutoff_order)
    seg = {N: calibrate_segments(N, samples, cutoff=cut) for N in (2, 3)}
    table = CalibrationTable({N: s["c_seg"] for N, s in seg.items()}, {N: s["c_osc"] for N, s in seg.items()},
                             0.0, 0.1, {"order": cut.order, "plateau": cut.plateau})
    results = [run_one(cfg, make_frame(cfg, p), 0, table) for p in gain_seeds]
    gain = calibrate_gain(results)
    table.kappa = gain["kappa"]
    table.meta = {"segments": {str(N): s for N, s in seg.items()}, "gain": gain | {"path_seeds": list(gain_seeds)},
                  "grid": {"N": cfg.grid.N, "res": cfg.grid.res}, "safety": 0.9}
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "calibration.json").write_text(table.dumps())
    if install:
        shutil.copyfile(outdir / "calibration.json", TABLE_PATH)
    checks = [Check(f"calibration.c_seg[{N}]", s["c_seg"], 0.0, s["c_seg"] > 0) for N, s in seg.items()]
    checks += [Check(f"calibration.chi0[{N}]", table.chi0, 0.0, s["chi0_ok"]) for N, s in seg.items()]
    checks.append(Check("calibration.kappa", table.kappa, 0.0, table.kappa > 0, gain))
    return _finish(outdir, "calibrate", cfg, checks)


def cmd_report(cfg: RunConfig, outdir: Path, inputs: list[Path]) -> int:
    checks, rows = [], []
    for d in inputs:
        rep = json.loads((d / "report.json").read_text())
        for c in rep["checks"]:
            checks.append(Check(f"{rep['command']}:{c['name']}", c["value"], c["threshold"], c["ok"]))
            rows.append([rep["command"], c["name"], c["value"], c["threshold"], int(c["ok"])])
    io.write_csv_rows(outdir / "checks.csv", ["command", "check", "value", "threshold", "ok"], rows)
    return _finish(outdir, "report", cfg, checks, inputs=[d / "report.json" for d in inputs])


# -- entry point ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wildeuler", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("simulate-paths", "build-frame", "run-scheme", "verify", "calibrate", "report"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON run config (defaults if omitted)")
        p.add_argument("--out", type=Path, help="output root (overrides config.output)")
        if name == "verify":
            p.add_argument("--artifacts", type=Path, help="run-scheme output directory to re-check")
        if name == "calibrate":
            p.add_argument("--samples", type=int, default=64)
            p.add_argument("--install", action="store_true", help="overwrite the shipped table")
        if name == "report":
            p.add_argument("inputs", nargs="+", type=Path, help="command output directories")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig().validate()
    except (ConfigError, OSError, json.JSONDecodeError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    outdir = Path(args.out or cfg.output) / args.command
    if args.command == "simulate-paths":
        return cmd_simulate_paths(cfg, outdir)
    if args.command == "build-frame":
        return cmd_build_frame(cfg, outdir)
    if args.command == "run-scheme":
        return cmd_run_scheme(cfg, outdir)
    if args.command == "verify":
        return cmd_verify(cfg, outdir, args.artifacts)
    if args.command == "calibrate":
        return cmd_calibrate(cfg, outdir, args.samples, install=args.install)
    return cmd_report(cfg, outdir, args.inputs)


if __name__ == "__main__":
    sys.exit(main())
