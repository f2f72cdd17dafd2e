"""Command line entry point: verify, fit, solve, curve, analyze.

Exit codes: 0 success, 2 a numerical check failed, 3 invalid configuration.
Every command writes a manifest.json listing its artifacts, the producing
module and the configuration hash.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .errors import BlowupLabError, ConfigurationError, FitError, ParameterError, RegionError
from .grid import FieldPair, ModelParams, build_grid

EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 2, 3


class Manifest:
    def __init__(self, command: str, config: dict):
        self.command = command
        self.config = config
        self.hash = hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode()).hexdigest()[:16]
        self.artifacts = []

    def add(self, path, module: str) -> None:
        self.artifacts.append({"path": str(path), "module": module})

    def write(self, out: Path, status: str) -> Path:
        path = out / "manifest.json"
        data = {"command": self.command, "config_hash": self.hash, "config": self.config,
                "status": status,
                "artifacts": [{**a, "path": os.path.relpath(a["path"], out)} for a in self.artifacts]}
        path.write_text(json.dumps(data, indent=2, sort_keys=True, default=str))
        return path


def _set_threads(n: int | None) -> None:
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def _solve_config(args):
    from .wave_solver.config import SolveConfig
    text = Path(args.config).read_text() if getattr(args, "config", None) else ""
    if getattr(args, "from_dir", None):
        text = (Path(args.from_dir) / "config.txt").read_text() + text
    overrides = {}
    for kv in args.set or []:
        if "=" not in kv:
            raise ConfigurationError(f"--set expects key=value, got {kv!r}")
        k, v = kv.split("=", 1)
        overrides[k.strip().replace("-", "_")] = v.strip()
    for key in ("p", "preset", "d", "T", "x0", "A", "sigma", "nx", "levels", "t_max", "x_min", "x_max",
                "zoom_nodes", "zoom_s_max"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return SolveConfig.from_text(text, **overrides)


# ----------------------------------------------------------------------------
# commands


def cmd_verify(args, out: Path) -> int:
    from . import verify
    params = ModelParams(args.p)
    names = args.checks.split(",") if args.checks else None
    try:
        reports = verify.run_suite(params, names, threads=args.threads or 1, seed=args.seed)
    except KeyError as exc:
        raise ConfigurationError(str(exc)) from exc
    man = Manifest("verify", {"p": args.p, "checks": names or list(verify.CHECKS), "seed": args.seed})
    for path in verify.write_reports(reports, out):
        man.add(path, "verify")
    failed = [r.check for r in reports if not r.passed]
    for r in reports:
        print(f"{r.check:14s} {r.verdict:4s}  worst {r.worst_deviation:.3g} ({r.worst_item})")
    man.write(out, "fail" if failed else "pass")
    return EXIT_CHECK if failed else EXIT_OK


def cmd_fit(args, out: Path) -> int:
    from .grid import load_field_csv
    from .modulation import FitConfig, fit, fit_from_json
    params = ModelParams(args.p)
    data = np.loadtxt(args.input, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] < 3:
        y, w = load_field_csv(args.input)
        ws = np.zeros_like(w)
    else:
        y, w, ws = data[:, 0], data[:, 1], data[:, 2]
    grid = build_grid(params, y.size)
    if np.max(np.abs(grid.nodes - y)) > 1e-12:
        raise ConfigurationError("input y column does not match the Gauss-Jacobi nodes for this p and size")
    init = fit_from_json(Path(args.init).read_text(), params.p)
    man = Manifest("fit", {"p": args.p, "m": args.m, "input": str(args.input), "init": str(args.init),
                           "theta1": args.theta1})
    try:
        res = fit(params, grid, FieldPair(w, ws), args.m, init, FitConfig(), args.theta1)
    except (FitError, RegionError) as exc:
        path = out / "fit_error.json"
        path.write_text(json.dumps({"error": str(exc)}, indent=2))
        man.add(path, "modulation")
        man.write(out, "fail")
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    path = out / "fit.json"
    path.write_text(res.to_json())
    man.add(path, "modulation")
    man.write(out, "pass")
    print(res.to_json())
    return EXIT_OK


def _write_table(path: Path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def cmd_solve(args, out: Path) -> int:
    from .wave_solver.curve import solver_config
    from .wave_solver.presets import make_preset
    from .wave_solver.solver import ZoomConfig, evolve, evolve_zoom, uniform_state
    cfg = _solve_config(args)
    params = ModelParams(cfg.p)
    preset = make_preset(cfg.preset, params, **cfg.preset_kwargs())
    scfg = solver_config(cfg, preset)
    st = uniform_state(cfg.x_min, cfg.x_max, cfg.nx, preset.u0, preset.u1)
    man = Manifest("solve", asdict(cfg))
    (out / "config.txt").write_text(cfg.to_text())
    man.add(out / "config.txt", "cli")
    if cfg.zoom_nodes > 0:
        run = evolve_zoom(st, cfg.x0, cfg.t_max, scfg, ZoomConfig(n_nodes=cfg.zoom_nodes, s_max=cfg.zoom_s_max))
    else:
        run = evolve(st, cfg.t_max, scfg)
    s = run.state
    _write_table(out / "state.csv", ["x", "u", "ut", "mask"], zip(s.x, s.u, s.ut, s.mask.astype(float)))
    man.add(out / "state.csv", "wave_solver")
    tab = run.blowup_table()
    _write_table(out / "blowup.csv", ["x", "T", "dx", "kind"], tab)
    man.add(out / "blowup.csv", "wave_solver")
    info = {"t_final": s.t, "steps": run.steps, "ended_early": run.ended_early,
            "blown_up_nodes": int(s.mask.sum()), "first_blowup": None}
    if tab.size:
        i = int(np.argmin(tab[:, 1]))
        info["first_blowup"] = {"x": float(tab[i, 0]), "T": float(tab[i, 1])}
    if hasattr(run, "T0"):
        info["x0"], info["T_x0"] = run.x0, run.T0
    (out / "run.json").write_text(json.dumps(info, indent=2, default=float))
    man.add(out / "run.json", "wave_solver")
    man.write(out, "pass")
    print(json.dumps(info, default=float))
    return EXIT_OK


def cmd_curve(args, out: Path) -> int:
    from .wave_solver.curve import estimate_T
    from .wave_solver.presets import make_preset
    cfg = _solve_config(args)
    curve = estimate_T(cfg)
    man = Manifest("curve", asdict(cfg))
    curve.to_csv(out / "curve.csv")
    man.add(out / "curve.csv", "wave_solver.curve")
    ok = np.isfinite(curve.T)
    if args.fit_halfwidth:
        ok &= np.abs(curve.x - cfg.x0) <= args.fit_halfwidth
    report = {"order": curve.order, "n_samples": int(ok.sum()), "lipschitz": curve.is_lipschitz(),
              "x0_candidates": curve.x0_candidates()}
    status = "pass"
    if ok.sum() >= 3:
        w = 1 / np.maximum(curve.err[ok], 1e-15)
        coef, cov = np.polyfit(curve.x[ok], curve.T[ok], 1, w=w, cov="unscaled")
        report["slope"], report["slope_se"] = float(coef[0]), float(np.sqrt(cov[0, 0]))
        preset = make_preset(cfg.preset, ModelParams(cfg.p), **cfg.preset_kwargs())
        if preset.blowup_curve is not None:
            exact_slope = float(cfg.d)
            report["exact_slope"] = exact_slope
            report["slope_within_2se"] = bool(abs(coef[0] - exact_slope) <= 2 * report["slope_se"] + 1e-12)
            status = "pass" if report["slope_within_2se"] else "fail"
    if not report["lipschitz"]:
        status = "fail"
    (out / "curve.json").write_text(json.dumps(report, indent=2, default=float))
    man.add(out / "curve.json", "wave_solver.curve")
    man.write(out, status)
    print(json.dumps(report, default=float))
    return EXIT_OK if status == "pass" else EXIT_CHECK


def cmd_analyze(args, out: Path) -> int:
    from . import analysis as an
    from .wave_solver.curve import BlowupCurve, curve_from_zoom, estimate_T, solver_config
    from .wave_solver.presets import make_preset
    from .wave_solver.similarity import to_similarity
    from .wave_solver.solver import ZoomConfig, evolve_zoom, uniform_state
    cfg = _solve_config(args)
    params = ModelParams(cfg.p)
    preset = make_preset(cfg.preset, params, **cfg.preset_kwargs())
    scfg = solver_config(cfg, preset)
    x0 = cfg.x0 if args.at is None else args.at
    st = uniform_state(cfg.x_min, cfg.x_max, cfg.nx, preset.u0, preset.u1)
    nodes = cfg.zoom_nodes or 4001
    run = evolve_zoom(st, x0, cfg.t_max, scfg, ZoomConfig(n_nodes=nodes, s_max=cfg.zoom_s_max))
    man = Manifest("analyze", {**asdict(cfg), "at": x0})
    if not np.isfinite(run.T0):
        raise BlowupLabError(f"no blow-up at x0 = {x0} before t_max = {cfg.t_max}")
    s_hi = cfg.zoom_s_max - 2.5
    tr = to_similarity(run, x0, run.T0, s_grid=np.arange(1.0, s_hi + 1e-9, 0.25), n=args.n)
    tr.write(out / "trace")
    man.add(out / "trace" / "trace.json", "wave_solver.similarity")
    cls = an.classify_point(tr)
    laws = []
    summary = {"x0": x0, "T_x0": run.T0, "classification": cls.label, "reason": cls.reason,
               "E_plateau": cls.E_plateau, "E_min": cls.E_min}
    try:
        k, dec = an.count_solitons(tr, k_max=args.k_max)
    except FitError as exc:
        k, dec = None, None
        summary["fit_error"] = str(exc)
    summary["k"] = k
    if dec is not None:
        dec.to_csv(out / "decomposition.csv")
        man.add(out / "decomposition.csv", "analysis")
        tau_lo = an.trusted_tau_min(cfg.zoom_s_max)
        laws.append(an.blowup_speed(run, x0, run.T0, k, cfg.p, tau_range=(tau_lo, 0.5)))
        if k >= 2:
            laws.append(an.zeta_law(dec, cfg.p))
            laws.append(an.gap_law(dec, (cfg.p - 1) / 2))
            curve = curve_from_zoom([run], x0, n_samples=200, x_min=tau_lo / 10, x_max=0.3)
            curve.meta["T0"] = run.T0
            curve.to_csv(out / "curve.csv")
            man.add(out / "curve.csv", "wave_solver.curve")
            laws.append(an.corner_law(curve, x0, k, cfg.p, T0=run.T0, window=(tau_lo, 1e-2)))
        else:
            slope, slope_err = args.slope, args.slope_err
            if slope is None and preset.blowup_curve is not None:
                slope, slope_err = float(cfg.d), 0.0
            if slope is None:
                coarse = estimate_T(replace(cfg, nx=args.curve_nx, levels=3))
                near = np.abs(coarse.x - x0) <= args.slope_halfwidth
                slope, slope_err = an.local_slope(BlowupCurve(coarse.x[near], coarse.T[near], coarse.err[near]))
                summary["slope_estimate"] = {"slope": slope, "err": slope_err}
            laws.append(an.slope_vs_profile(dec, slope, slope_err))
    for law in laws:
        for path in law.write(out / "laws"):
            man.add(path, "analysis")
    summary["laws"] = {law.law: law.verdict for law in laws}
    (out / "analysis.json").write_text(json.dumps(an._plain(summary), indent=2, default=float))
    man.add(out / "analysis.json", "analysis")
    failed = any(law.verdict == "fail" for law in laws)
    man.write(out, "fail" if failed else "pass")
    print(json.dumps(an._plain(summary), default=float))
    return EXIT_CHECK if failed else EXIT_OK


# ----------------------------------------------------------------------------


def _add_solve_args(sp):
    sp.add_argument("--config", help="key=value configuration file")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a configuration key")
    for key, typ in (("p", float), ("preset", str), ("d", float), ("T", float), ("x0", float),
                     ("A", float), ("sigma", float), ("nx", int), ("levels", int), ("t_max", float),
                     ("x_min", float), ("x_max", float), ("zoom_nodes", int), ("zoom_s_max", float)):
        sp.add_argument(f"--{key.replace('_', '-')}", dest=key, type=typ)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blowuplab", description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=None, help="cap on worker and BLAS threads")
    ap.add_argument("--seed", type=int, default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("verify", help="run the oracle suite")
    sp.add_argument("--p", type=float, default=3.0)
    sp.add_argument("--checks", help="comma separated subset of checks")
    sp.add_argument("--out", default="out/verify")

    sp = sub.add_parser("fit", help="modulation fit of a sampled state")
    sp.add_argument("--p", type=float, default=3.0)
    sp.add_argument("--input", required=True, help="CSV with columns y,w[,w_s] on the Gauss-Jacobi nodes")
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--init", required=True, help="JSON list of {d, nu}")
    sp.add_argument("--theta1", type=int, default=-1, choices=(-1, 1))
    sp.add_argument("--out", default="out/fit")

    sp = sub.add_parser("solve", help="evolve one preset")
    _add_solve_args(sp)
    sp.add_argument("--out", default="out/solve")

    sp = sub.add_parser("curve", help="blow-up curve from nested resolutions")
    _add_solve_args(sp)
    sp.add_argument("--from", dest="from_dir", help="reuse config.txt written by solve")
    sp.add_argument("--fit-halfwidth", type=float, default=0.5, help="slope fit over |x - x0| <= this")
    sp.add_argument("--out", default="out/curve")

    sp = sub.add_parser("analyze", help="classify a blow-up point and fit the laws")
    _add_solve_args(sp)
    sp.add_argument("--at", type=float, help="blow-up point (defaults to x0)")
    sp.add_argument("--k-max", type=int, default=3)
    sp.add_argument("--n", type=int, default=120, help="similarity grid size")
    sp.add_argument("--slope", type=float, help="T'(x0) for the single-soliton comparison")
    sp.add_argument("--slope-err", type=float, default=0.0)
    sp.add_argument("--curve-nx", type=int, default=401, help="coarse grid for the slope estimate")
    sp.add_argument("--slope-halfwidth", type=float, default=0.1)
    sp.add_argument("--out", default="out/analyze")
    return ap


COMMANDS = {"verify": cmd_verify, "fit": cmd_fit, "solve": cmd_solve, "curve": cmd_curve,
            "analyze": cmd_analyze}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    _set_threads(args.threads)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, out)
    except (ConfigurationError, ParameterError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowupLabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
