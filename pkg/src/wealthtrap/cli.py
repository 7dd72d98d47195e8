"""Command-line front end: solve, sweep, simulate.

solve runs HJB -> KFE -> diagnostics on one config and emits solution.csv,
distribution.csv, shares.json, report.json, manifest.json. sweep repeats
that over a list of values for one calibration field, one sub-directory per
value, plus a summary CSV. simulate replays the stored policies through the
Monte Carlo oracle and reports the comparison.

All numeric output uses 12 significant digits and ordered JSON keys, so a
re-run with identical inputs is byte-identical except for manifest.json,
which carries wall-clock timings.
"""

import argparse
import csv
import hashlib
import json
import math
import os
import shutil
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .diagnostics import build_report, euler_decomposition
from .hjb import PolicyTriple, _signal_region, solve_hjb, surplus
from .kfe import DensityTriple, solve_kfe
from .mc import SimConfig, compare, simulate
from .model import Calibration, CalibrationError, Grid, load_calibration

WORKERS_ENV = "WEALTHTRAP_WORKERS"

SOLUTION_HEADER = ("k,V_L,V_W,V_H,c_L,c_W,c_H,mu_L,mu_W,mu_H,signal_flag,D")
SWEEP_HEADER = ("param_value,kstar,kss_L,kss_H,pi_L,pi_W,pi_H,gini,"
                "mean_wealth,regime_class")


def _fmt(v):
    """12-significant-digit, locale-independent cell; blanks for missing."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    return format(v, ".12g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(key): _jsonable(val) for key, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return None
        return float(format(v, ".12g"))
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj]
    return obj


def _write_text(path, text):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _write_json(path, obj):
    _write_text(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _regime_class(signal, cal, grid):
    if not signal.flags.any():
        return "none"
    first_feasible = int(np.argmax(grid.nodes >= cal.phi))
    return "immediate" if signal.kstar_index == first_feasible else "interior"


def _run_pipeline(cal):
    timings = {}
    t0 = time.perf_counter()
    sol = solve_hjb(cal)
    timings["hjb_s"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    density = solve_kfe(sol, cal)
    timings["kfe_s"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    report = build_report(sol, density, cal)
    timings["diagnostics_s"] = time.perf_counter() - t0
    return sol, density, report, timings


def _write_solution_csv(path, sol, cal):
    grid = sol.grid
    v, p = sol.values, sol.policies
    D = surplus(v.V_W, v.V_H, cal, grid)
    lines = [SOLUTION_HEADER]
    for i in range(grid.N):
        lines.append(",".join((
            _fmt(grid.nodes[i]),
            _fmt(v.V_L[i]), _fmt(v.V_W[i]), _fmt(v.V_H[i]),
            _fmt(p.c_L[i]), _fmt(p.c_W[i]), _fmt(p.c_H[i]),
            _fmt(p.mu_L[i]), _fmt(p.mu_W[i]), _fmt(p.mu_H[i]),
            "1" if sol.signal.flags[i] else "0",
            _fmt(D[i]),
        )))
    _write_text(path, "\n".join(lines) + "\n")


def _write_distribution_csv(path, density, grid):
    g_total = density.g_L + density.g_W + density.g_H
    lines = ["k,g_L,g_W,g_H,g_total"]
    for i in range(grid.N):
        lines.append(",".join((
            _fmt(grid.nodes[i]), _fmt(density.g_L[i]), _fmt(density.g_W[i]),
            _fmt(density.g_H[i]), _fmt(g_total[i]))))
    _write_text(path, "\n".join(lines) + "\n")


def _report_obj(report, sol, density, cal, config_path, config_sha, override=None):
    grid = sol.grid
    kstar = report.kstar if math.isfinite(report.kstar) else None
    regime_class = _regime_class(sol.signal, cal, grid)
    regime_note = None if kstar is not None else "no signaling (kstar = +inf)"

    euler = {}
    for name, kss in (("L", report.kss_L), ("H", report.kss_H)):
        if kss is None:
            continue
        terms = euler_decomposition(sol.policies, sol.values, cal, grid, kss,
                                    name, signal=sol.signal)
        euler[name] = terms._asdict()

    sep = report.separation._asdict() if report.separation is not None else None
    obj = {
        "kss_L": report.kss_L, "kss_H": report.kss_H,
        "kss_L_det": report.kss_L_det, "kss_H_det": report.kss_H_det,
        "kstar": kstar,
        "mpc_at": report.mpc_at, "apc_at": report.apc_at,
        "weighted_mpc": report.weighted_mpc,
        "gini": report.gini, "mean_wealth": report.mean_wealth,
        "shares": {"pi_L": report.shares[0], "pi_W": report.shares[1],
                   "pi_H": report.shares[2]},
        "euler_gap": report.euler_gap,
        "euler_decomposition": euler,
        "peaks": [list(p) for p in report.peaks],
        "phenotype_shares": report.phenotype_shares,
        "phenotype_folded": report.phenotype_folded,
        "separation": sep,
        "regime_class": regime_class,
        "regime_note": regime_note,
        "provenance": {
            "config_path": config_path,
            "config_sha256": config_sha,
            "override": override,
            "N": cal.N, "k_min": cal.k_min, "k_max": cal.k_max,
            "dk": grid.dk, "dt": cal.dt, "tol": cal.tol,
            "iterations": sol.report.iterations,
            "converged": sol.report.converged,
            "warnings": list(sol.report.warnings),
            "mass_error": density.mass_error,
            "max_negativity": density.max_negativity,
        },
    }
    return obj


def _emit_solve_outputs(out_dir, cal, sol, density, report,
                        config_path, config_sha, override=None):
    grid = sol.grid
    _write_solution_csv(os.path.join(out_dir, "solution.csv"), sol, cal)
    _write_distribution_csv(os.path.join(out_dir, "distribution.csv"), density, grid)
    _write_json(os.path.join(out_dir, "shares.json"), {
        "pi_L": report.shares[0], "pi_W": report.shares[1],
        "pi_H": report.shares[2],
        "mass_error": density.mass_error,
        "max_negativity": density.max_negativity,
    })
    _write_json(os.path.join(out_dir, "report.json"),
                _report_obj(report, sol, density, cal, config_path, config_sha,
                            override))
    names = ["solution.csv", "distribution.csv", "shares.json", "report.json"]
    return {name: _sha256(os.path.join(out_dir, name)) for name in names}


def _write_manifest(out_dir, command, config_path, config_sha, files,
                    timings, iterations, converged, extra=None):
    manifest = {
        "command": command,
        "config_path": config_path,
        "config_sha256": config_sha,
        "out_dir": out_dir,
        "files": files,
        "timings": timings,
        "iterations": iterations,
        "converged": converged,
    }
    if extra:
        manifest.update(extra)
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest


def cmd_solve(config_path, out_dir):
    """Full pipeline on one config; returns the run manifest."""
    cal = load_calibration(config_path)
    config_sha = _sha256(config_path)
    os.makedirs(out_dir, exist_ok=True)

    t0 = time.perf_counter()
    sol, density, report, timings = _run_pipeline(cal)
    files = _emit_solve_outputs(out_dir, cal, sol, density, report,
                                config_path, config_sha)
    timings["total_s"] = time.perf_counter() - t0
    return _write_manifest(out_dir, "solve", config_path, config_sha, files,
                           timings, {"hjb": sol.report.iterations},
                           sol.report.converged)


def _sweep_one(job):
    """One sweep sub-run; never raises (failures are reported in the row)."""
    cal_dict, param, value, subdir, config_path, config_sha = job
    row = {name: None for name in SWEEP_HEADER.split(",")}
    row["param_value"] = value
    try:
        if param == "N":
            value = int(value)
        cal = Calibration(**{**cal_dict, param: value})
        tmp = subdir + ".tmp"
        shutil.rmtree(tmp, ignore_errors=True)
        os.makedirs(tmp)
        sol, density, report, timings = _run_pipeline(cal)
        files = _emit_solve_outputs(tmp, cal, sol, density, report,
                                    config_path, config_sha,
                                    override={param: value})
        _write_manifest(tmp, "solve", config_path, config_sha, files, timings,
                        {"hjb": sol.report.iterations}, sol.report.converged,
                        extra={"override": {param: value}})
        if os.path.isdir(subdir):
            shutil.rmtree(subdir)
        os.replace(tmp, subdir)
        row.update(
            kstar=report.kstar,
            kss_L=report.kss_L, kss_H=report.kss_H,
            pi_L=report.shares[0], pi_W=report.shares[1], pi_H=report.shares[2],
            gini=report.gini, mean_wealth=report.mean_wealth,
            regime_class=_regime_class(sol.signal, cal, sol.grid))
        return row, sol.report.converged, None
    except Exception as exc:  # sub-run failures must not kill the sweep
        row["regime_class"] = "error"
        return row, False, f"{type(exc).__name__}: {exc}"


def cmd_sweep(config_path, param, values, out_dir):
    """One cmd_solve per value of a calibration field, plus a summary CSV."""
    cal = load_calibration(config_path)
    if param not in Calibration.fields:
        raise CalibrationError(f"unknown sweep parameter {param!r}")
    config_sha = _sha256(config_path)
    os.makedirs(out_dir, exist_ok=True)

    jobs = [(cal.as_dict(), param, v,
             os.path.join(out_dir, f"{param}_{_fmt(v)}"), config_path, config_sha)
            for v in values]
    workers = int(os.environ.get(WORKERS_ENV, "1") or "1")
    t0 = time.perf_counter()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(job) for job in jobs]

    lines = [SWEEP_HEADER]
    failures = {}
    all_ok = True
    for (row, converged, err), value in zip(results, values):
        lines.append(",".join(_fmt(row[name]) if name != "regime_class"
                              else (row[name] or "")
                              for name in SWEEP_HEADER.split(",")))
        if err is not None:
            failures[_fmt(value)] = err
        all_ok = all_ok and converged
    summary_path = os.path.join(out_dir, "sweep_summary.csv")
    _write_text(summary_path, "\n".join(lines) + "\n")

    files = {"sweep_summary.csv": _sha256(summary_path)}
    manifest = _write_manifest(
        out_dir, "sweep", config_path, config_sha, files,
        {"total_s": time.perf_counter() - t0}, {}, all_ok,
        extra={"param": param, "values": list(values), "failures": failures,
               "workers": workers})
    return manifest


def _read_solution_csv(path, grid):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = SOLUTION_HEADER.split(",")
        if reader.fieldnames != expected:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        rows = list(reader)
    if len(rows) != grid.N:
        raise ValueError(f"{path}: {len(rows)} rows for an N={grid.N} grid")
    cols = {name: np.array([float(r[name]) if r[name] != "" else np.nan
                            for r in rows]) for name in expected}
    if not np.allclose(cols["k"], grid.nodes, atol=1e-9):
        raise ValueError(f"{path}: grid does not match the config")
    return cols


def _read_distribution_csv(path, grid):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if len(rows) != grid.N:
        raise ValueError(f"{path}: {len(rows)} rows for an N={grid.N} grid")
    g = {name: np.array([float(r[name]) for r in rows])
         for name in ("g_L", "g_W", "g_H")}
    return DensityTriple(g["g_L"], g["g_W"], g["g_H"], 0.0, 0.0)


def cmd_simulate(config_path, solve_dir, out_dir, n_paths=1, horizon=10_000.0,
                 dt_sim=0.05, burn_in=None, seed=12345, mode="single-long-path"):
    """Monte Carlo replay of a stored solve; returns the run manifest."""
    cal = load_calibration(config_path)
    config_sha = _sha256(config_path)
    grid = Grid(cal)

    for name in ("solution.csv", "distribution.csv", "report.json"):
        if not os.path.isfile(os.path.join(solve_dir, name)):
            raise FileNotFoundError(f"solve artifact missing: {os.path.join(solve_dir, name)}")
    with open(os.path.join(solve_dir, "report.json")) as fh:
        solve_report = json.load(fh)
    if not solve_report.get("provenance", {}).get("converged", False):
        raise ValueError(f"{solve_dir}: stored solve did not converge")

    cols = _read_solution_csv(os.path.join(solve_dir, "solution.csv"), grid)
    density = _read_distribution_csv(os.path.join(solve_dir, "distribution.csv"), grid)
    policy = PolicyTriple(cols["c_L"], cols["c_W"], cols["c_H"],
                          cols["mu_L"], cols["mu_W"], cols["mu_H"])
    flags = cols["signal_flag"].astype(bool)
    signal = _signal_region(flags, grid)

    if burn_in is None:
        burn_in = 0.1 * horizon
    simcfg = SimConfig(n_paths=n_paths, horizon=horizon, dt_sim=dt_sim,
                       burn_in=burn_in, seed=seed, mode=mode)

    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    emp = simulate(cal, policy, signal, simcfg)
    sim_s = time.perf_counter() - t0
    result = compare(emp, density, grid)

    hist_total = emp.hist_L + emp.hist_W + emp.hist_H
    lines = ["k,g_L,g_W,g_H,g_total,sample_count"]
    for i in range(grid.N):
        lines.append(",".join((
            _fmt(grid.nodes[i]),
            _fmt(emp.hist_L[i] / grid.dk), _fmt(emp.hist_W[i] / grid.dk),
            _fmt(emp.hist_H[i] / grid.dk), _fmt(hist_total[i] / grid.dk),
            str(int(round(hist_total[i] * emp.sample_count))))))
    mc_csv = os.path.join(out_dir, "mc_distribution.csv")
    _write_text(mc_csv, "\n".join(lines) + "\n")

    mc_json = os.path.join(out_dir, "mc_compare.json")
    _write_json(mc_json, {
        "share_gaps": result.share_gaps,
        "l1_distance": result.l1_distance,
        "mean_gap": result.mean_gap,
        "empirical_shares": emp.shares,
        "sample_count": emp.sample_count,
        "excursions": emp.excursions,
        "n_exercises": emp.n_exercises,
        "transitions": emp.transitions,
        "sim": {"n_paths": simcfg.n_paths, "horizon": simcfg.horizon,
                "dt_sim": simcfg.dt_sim, "burn_in": simcfg.burn_in,
                "seed": simcfg.seed, "mode": simcfg.mode},
        "timing_note": ("signal exercised at the first discrete step with "
                        "k >= kstar; timing bias is O(dt_sim)"),
    })

    files = {"mc_distribution.csv": _sha256(mc_csv),
             "mc_compare.json": _sha256(mc_json)}
    return _write_manifest(out_dir, "simulate", config_path, config_sha, files,
                           {"simulate_s": sim_s}, {}, True,
                           extra={"solve_dir": solve_dir})


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="wealthtrap",
        description="Three-regime poverty-trap model: solve, sweep, simulate.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one config and emit artifacts")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--out", required=True)

    p_sweep = sub.add_parser("sweep", help="solve over a list of parameter values")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--param", required=True)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated list, e.g. 6,9,12")

    p_sim = sub.add_parser("simulate", help="Monte Carlo check of a stored solve")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--solve-dir", required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--paths", type=int, default=1)
    p_sim.add_argument("--horizon", type=float, default=10_000.0)
    p_sim.add_argument("--dt", type=float, default=0.05)
    p_sim.add_argument("--burn-in", type=float, default=None)
    p_sim.add_argument("--seed", type=int, default=12345)
    p_sim.add_argument("--mode", choices=["ensemble", "single-long-path"],
                       default="single-long-path")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            manifest = cmd_solve(args.config, args.out)
            return 0 if manifest["converged"] else 2
        if args.command == "sweep":
            values = [float(v) for v in args.values.split(",") if v.strip() != ""]
            manifest = cmd_sweep(args.config, args.param, values, args.out)
            return 0 if manifest["converged"] else 2
        manifest = cmd_simulate(args.config, args.solve_dir, args.out,
                                n_paths=args.paths, horizon=args.horizon,
                                dt_sim=args.dt, burn_in=args.burn_in,
                                seed=args.seed, mode=args.mode)
        return 0
    except (CalibrationError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
