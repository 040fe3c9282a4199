"""Experiment runner: config parsing, run orchestration, trace/figure export.

Subcommands:
  run <config.json> [-o DIR]      execute one configured run
  sweep <template.json> <grid.json> [-o DIR]
  check [substr ...]              run the acceptance suite
  list-problems

Outputs per run: trace.csv (fixed header), summary.json, trace.png.
Exit codes: 0 success, 1 config error, 2 run did not converge / point failed.
HOCP_THREADS caps sweep parallelism.
"""

from __future__ import annotations

import concurrent.futures
import copy
import json
import os
import subprocess
import sys
import time

import numpy as np

from .backend import FLOAT64, Float64Backend, make_backend
from .bundle_loop import BundleInit, OracleCache
from .diagnostics import estimate_r_order
from .drivers import EpsSchedule, GlobalConfig, run_global, run_local
from .model import Bundle, Cut, TrustRegion, model_eval
from .problems import (
    generate_maxeig_instance,
    generate_sumabs_instance,
    list_problems,
    load_instance,
    problem_from_instance,
)

CSV_HEADER = "j,eps,f,dist,bundle_size,inner_iters,oracle_calls,boundary_active,gap,crit"

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "configs")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# config handling


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _build_problem(cfg, backend):
    pr = cfg.get("problem")
    if not isinstance(pr, dict) or "name" not in pr:
        raise ConfigError('config needs "problem": {"name": ...}')
    name = pr["name"]
    if "instance_file" in pr:
        path = pr["instance_file"]
        if not os.path.isabs(path):
            cand = os.path.join(CONFIG_DIR, path)
            path = cand if os.path.exists(cand) else path
        inst = load_instance(path)
        problem = problem_from_instance(inst, backend)
    elif name == "maxroot":
        inst = {"problem": "maxroot", "n": int(pr.get("n", 1))}
        problem = problem_from_instance(inst, backend)
    elif name == "sumabs":
        inst = generate_sumabs_instance(
            seed=int(pr.get("seed", 0)), n=int(pr.get("n", 10)), m=int(pr.get("m", 8))
        )
        problem = problem_from_instance(inst, backend)
    elif name == "maxeig":
        inst = generate_maxeig_instance(
            seed=int(pr.get("seed", 0)), n=int(pr.get("n", 4)), m=int(pr.get("m", 6))
        )
        problem = problem_from_instance(inst, backend)
    elif name in ("halfhalf", "threebranch"):
        problem = problem_from_instance({"problem": name}, backend)
    else:
        raise ConfigError(f"unknown problem {name!r} (known: {', '.join(list_problems())})")
    xs = problem.instance.get("xstar")
    if xs is not None and problem.xstar is None:
        problem.xstar = np.asarray(xs, dtype=float)
    return problem


def _starting_point(cfg, problem, backend):
    x1 = cfg.get("x1")
    if isinstance(x1, list):
        vals = [backend.from_float(float(v)) for v in x1]
    elif isinstance(x1, dict) and "random_uniform" in x1:
        ru = x1["random_uniform"]
        rng = np.random.Generator(np.random.Philox(int(ru.get("seed", 0))))
        raw = rng.uniform(float(ru["low"]), float(ru["high"]), size=problem.dim)
        vals = [backend.from_float(float(v)) for v in raw]
    elif isinstance(x1, dict) and "linspace" in x1:
        ls = x1["linspace"]
        raw = np.linspace(float(ls["low"]), float(ls["high"]), problem.dim)
        vals = [backend.from_float(float(v)) for v in raw]
    else:
        raise ConfigError('config needs "x1": [..] or {"random_uniform": {...}}')
    if len(vals) != problem.dim:
        raise ConfigError(f"x1 has {len(vals)} coordinates, problem has dim {problem.dim}")
    dtype = float if isinstance(backend, Float64Backend) else object
    return np.array(vals, dtype=dtype)


def _validate_run_config(cfg):
    q = int(cfg.get("q", 1))
    p = int(cfg.get("p", 1))
    sigma = float(cfg.get("sigma", 0.5))
    kappa = float(cfg.get("kappa", 0.75))
    if q < 1 or p < 1:
        raise ConfigError("q and p must be >= 1")
    if not (0 < sigma < 1) or not (0 < kappa < 1):
        raise ConfigError("sigma and kappa must lie in (0, 1)")
    if (q + sigma) / p <= 1:
        raise ConfigError("(q + sigma) / p must exceed 1")
    strategy = cfg.get("solver", "auto")
    if strategy not in ("auto", "exact1d", "lp", "smoothed"):
        raise ConfigError(f"unknown solver strategy {strategy!r}")
    if strategy == "lp" and q != 1:
        raise ConfigError("the lp strategy requires q = 1")
    method = cfg.get("method", "local")
    if method not in ("local", "global", "probe"):
        raise ConfigError(f"unknown method {method!r}")
    return q, p, sigma, kappa, strategy, method


# ---------------------------------------------------------------------------
# output writers


def _fmt(x, backend):
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return backend.format(x)


def write_trace_csv(path, trace, backend):
    cum = 0
    lines = [CSV_HEADER]
    for row in trace:
        cum += int(row["oracle_calls"])
        lines.append(
            ",".join(
                [
                    str(int(row["j"])),
                    _fmt(row["eps"], backend),
                    _fmt(row["f"], backend),
                    repr(float(row["dist"])),
                    str(int(row["bundle_size"])),
                    str(int(row["inner_iters"])),
                    str(cum),
                    str(int(bool(row["boundary_active"]))),
                    _fmt(row["gap"], backend),
                    _fmt(row["crit"], backend),
                ]
            )
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def render_trace_figure(path, trace, backend, title):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    js = [int(row["j"]) for row in trace]
    eps = [float(row["eps"]) for row in trace]
    fs = [float(row["f"]) for row in trace]
    dists = [float(row["dist"]) for row in trace]
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.4))
    ax = axes[0]
    ax.semilogy(js, eps, "o-", label="radius")
    if all(np.isfinite(dists)) and all(d > 0 for d in dists):
        ax.semilogy(js, dists, "s-", label="distance to minimizer")
    ax.set_xlabel("iteration j")
    ax.legend(fontsize=8)
    ax.set_title(title, fontsize=9)
    ax = axes[1]
    fmin = min(fs)
    shifted = [f - fmin for f in fs]
    if any(s > 0 for s in shifted):
        ax.semilogy(js, [max(s, 1e-300) for s in shifted], "o-")
        ax.set_ylabel("f - best f")
    else:
        ax.plot(js, fs, "o-")
        ax.set_ylabel("f")
    ax.set_xlabel("iteration j")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _rate_report_dict(rep):
    if rep is None:
        return None
    return {
        "fitted_slope": rep.fitted_slope,
        "fitted_order": rep.fitted_order,
        "envelope_pass": rep.envelope_pass,
        "envelope_j0": rep.envelope_j0,
        "violations": rep.violations,
        "nstep_ratios": rep.nstep_ratios,
        "used_points": rep.used_points,
    }


# ---------------------------------------------------------------------------
# run execution


def _execute_local(cfg, problem, backend, q, p, sigma, kappa, strategy, outdir):
    eps1 = backend.from_float(float(cfg.get("eps1", 0.5)))
    schedule = EpsSchedule(eps1=eps1, q=q, p=p, sigma=sigma, kappa=kappa, backend=backend)
    x1 = _starting_point(cfg, problem, backend)
    init_cfg = cfg.get("init", {})
    cache = OracleCache(problem)
    init_strategy = init_cfg.get("strategy", "singleton")
    init = BundleInit(
        init_strategy,
        count=int(init_cfg.get("count", 1)),
        memory=cache if init_strategy == "memory" else None,
    )
    t0 = time.time()
    run = run_local(
        problem,
        x1,
        schedule,
        init=init,
        solver_strategy=strategy,
        eps_thr=cfg.get("eps_thr"),
        max_iter=int(cfg.get("max_iter", 60)),
        seed=int(cfg.get("seed", 0)),
        stop_on_boundary=bool(cfg.get("stop_on_boundary", True)),
        cache=cache,
    )
    wall = time.time() - t0
    write_trace_csv(os.path.join(outdir, "trace.csv"), run.trace, backend)
    render_trace_figure(
        os.path.join(outdir, "trace.png"),
        run.trace,
        backend,
        f"{problem.name} local q={q} p={p}",
    )
    rate = None
    dists = [row["dist"] for row in run.trace]
    if problem.xstar is not None and all(np.isfinite(dists)):
        try:
            rate = estimate_r_order(dists, schedule)
        except Exception:
            rate = None
    f_final = problem.value_only(run.x_final)
    summary = {
        "method": "local",
        "problem": problem.name,
        "termination": run.termination,
        "iterations": run.termination_iteration,
        "total_oracle_calls": run.oracle_calls,
        "objective_evals": cache.jet_evals + 1,
        "f_final": _fmt(f_final, backend),
        "x_final": [_fmt(v, backend) for v in np.asarray(run.x_final).ravel()],
        "rate_report": _rate_report_dict(rate),
        "wall_time_s": wall,
    }
    return summary, 0 if run.termination == "EpsThreshold" else 2


def _execute_global(cfg, problem, backend, q, p, sigma, kappa, strategy, outdir):
    g = cfg.get("global", {})
    gcfg = GlobalConfig(
        delta1=float(g.get("delta1", 1.0)),
        tau1=float(g.get("tau1", 0.1)),
        p=p,
        theta_delta=float(g.get("theta_delta", 0.5)),
        theta_tau=float(g.get("theta_tau", 0.5)),
        max_outer=int(g.get("max_outer", 40)),
        max_phase_iter=int(g.get("max_phase_iter", 50)),
        local_budget=int(g.get("local_budget", 30)),
    )
    x0 = _starting_point(cfg, problem, backend)
    t0 = time.time()
    res = run_global(
        problem,
        x0,
        gcfg,
        q=q,
        sigma=sigma,
        kappa=kappa,
        solver_strategy=strategy,
        eps_thr=cfg.get("eps_thr"),
        seed=int(cfg.get("seed", 0)),
    )
    wall = time.time() - t0
    # outer trace reuses the CSV contract: j = outer index, eps = Delta_j,
    # bundle_size = descent steps taken, gap = tau_j, crit = last decrease measure
    trace, prev_calls = [], 0
    for row in res.outer_trace:
        lam = row["lambda_history"][-1] if row["lambda_history"] else float("nan")
        trace.append(
            {
                "j": row["j"],
                "eps": row["delta"],
                "f": row["f"],
                "dist": row["dist"],
                "bundle_size": len(row["lambda_history"]),
                "inner_iters": row["attempt_iterations"],
                "oracle_calls": row["oracle_calls"] - prev_calls,
                "boundary_active": row["attempt_termination"] == "TrustRegionActive",
                "gap": row["tau"],
                "crit": lam,
            }
        )
        prev_calls = row["oracle_calls"]
    write_trace_csv(os.path.join(outdir, "trace.csv"), trace, backend)
    render_trace_figure(
        os.path.join(outdir, "trace.png"), trace, backend, f"{problem.name} global q={q}"
    )
    f_final = problem.value_only(np.asarray(res.x_final))
    summary = {
        "method": "global",
        "problem": problem.name,
        "termination": res.status,
        "outer_iterations": len(res.outer_trace),
        "total_oracle_calls": res.oracle_calls,
        "f_final": _fmt(f_final, backend),
        "x_final": [_fmt(v, backend) for v in np.asarray(res.x_final).ravel()],
        "attempt_terminations": [r["attempt_termination"] for r in res.outer_trace],
        "wall_time_s": wall,
    }
    return summary, 0 if res.status == "Converged" else 2


def _execute_probe(cfg, problem, backend, q, p, sigma, kappa, strategy, outdir):
    """Model-error sweep: max |f - model| over shrinking radii, slope per degree."""
    pr = cfg.get("probe", {})
    xhat = float(pr.get("center", 0.975))
    radii = [float(e) for e in pr.get("radii", [0.2, 0.1, 0.05, 0.025])]
    degrees = [int(d) for d in pr.get("degrees", [1, 2, 3])]
    n_cuts = int(pr.get("cuts", 15))
    n_samples = int(pr.get("samples", 401))
    if problem.dim != 1:
        raise ConfigError("probe method requires a one-dimensional problem")
    t0 = time.time()
    rows, slopes = [], {}
    for deg in degrees:
        errs = []
        for eps in radii:
            tr = TrustRegion(np.array([xhat]), eps)
            b = Bundle(tr, backend=FLOAT64)
            for y in np.linspace(xhat - eps, xhat + eps, n_cuts):
                r = problem.oracle(np.array([y]), deg)
                b.add_cut(Cut(center=np.array([y]), jet=r.jet, flagged=r.flagged))
            err = max(
                abs(
                    float(problem.value_only(np.array([z])))
                    - float(model_eval(b, np.array([z]))[0])
                )
                for z in np.linspace(xhat - eps, xhat + eps, n_samples)
            )
            errs.append(err)
            rows.append((deg, eps, err))
        slopes[deg] = float(np.polyfit(np.log(radii), np.log(errs), 1)[0])
    wall = time.time() - t0
    with open(os.path.join(outdir, "probe.csv"), "w") as fh:
        fh.write("degree,radius,max_error\n")
        for deg, eps, err in rows:
            fh.write(f"{deg},{repr(eps)},{repr(err)}\n")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.6))
    for deg in degrees:
        es = [r[1] for r in rows if r[0] == deg]
        vs = [r[2] for r in rows if r[0] == deg]
        ax.loglog(es, vs, "o-", label=f"degree {deg} (slope {slopes[deg]:.2f})")
    ax.set_xlabel("radius")
    ax.set_ylabel("max model error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(os.path.join(outdir, "probe.png"), dpi=130)
    plt.close(fig)
    ok = all(slopes[d] >= d + 1 - 0.3 for d in degrees)
    summary = {
        "method": "probe",
        "problem": problem.name,
        "center": xhat,
        "slopes": {str(d): slopes[d] for d in degrees},
        "slope_target": {str(d): d + 1 for d in degrees},
        "pass": ok,
        "wall_time_s": wall,
    }
    return summary, 0 if ok else 2


def execute_run(cfg, outdir):
    q, p, sigma, kappa, strategy, method = _validate_run_config(cfg)
    try:
        backend = make_backend(cfg.get("backend", "binary64"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    problem = _build_problem(cfg, backend)
    os.makedirs(outdir, exist_ok=True)
    if method == "local":
        summary, code = _execute_local(
            cfg, problem, backend, q, p, sigma, kappa, strategy, outdir
        )
    elif method == "global":
        summary, code = _execute_global(
            cfg, problem, backend, q, p, sigma, kappa, strategy, outdir
        )
    else:
        summary, code = _execute_probe(
            cfg, problem, backend, q, p, sigma, kappa, strategy, outdir
        )
    summary["config"] = cfg
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1)
    return summary, code


# ---------------------------------------------------------------------------
# subcommands


def resolve_config_path(arg):
    if os.path.exists(arg):
        return arg
    cand = os.path.join(CONFIG_DIR, arg)
    if os.path.exists(cand):
        return cand
    cand = os.path.join(CONFIG_DIR, arg + ".json")
    if os.path.exists(cand):
        return cand
    raise ConfigError(f"config {arg!r} not found (looked in cwd and {CONFIG_DIR})")


def cmd_run(args):
    try:
        path = resolve_config_path(args.config)
        cfg = load_config(path)
        name = cfg.get("name", os.path.splitext(os.path.basename(path))[0])
        outdir = args.output or os.path.join("runs", name)
        summary, code = execute_run(cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    print(
        f"{name}: {summary.get('termination', summary.get('pass'))}  "
        f"-> {outdir}/ (trace/probe csv, png, summary.json)"
    )
    return code


def _merge(template, point):
    cfg = copy.deepcopy(template)
    for k, v in point.items():
        if isinstance(v, dict) and isinstance(cfg.get(k), dict):
            cfg[k].update(v)
        else:
            cfg[k] = v
    return cfg


def _grid_points(grid):
    if "points" in grid:
        pts = grid["points"]
    elif "param" in grid and "values" in grid:
        pts = [{grid["param"]: v} for v in grid["values"]]
    else:
        raise ConfigError('grid needs "points": [...] or "param" + "values"')
    if not pts:
        raise ConfigError("grid is empty")
    return pts


def _point_label(point, idx):
    parts = [
        f"{k}={v}" for k, v in point.items() if isinstance(v, (int, float, str))
    ]
    return "_".join(parts).replace("/", "-") if parts else f"point{idx}"


def _run_point_subprocess(cfg_path, outdir):
    proc = subprocess.run(
        [sys.executable, "-m", "hocp.cli", "run", cfg_path, "-o", outdir],
        capture_output=True,
        text=True,
    )
    return proc.returncode, proc.stdout + proc.stderr


def cmd_sweep(args):
    try:
        template = load_config(resolve_config_path(args.template))
        grid = load_config(resolve_config_path(args.grid))
        points = _grid_points(grid)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    base = args.output or os.path.join(
        "runs", grid.get("name", template.get("name", "sweep")) + "_sweep"
    )
    os.makedirs(base, exist_ok=True)
    jobs = []
    for i, point in enumerate(points):
        label = _point_label(point, i)
        outdir = os.path.join(base, label)
        os.makedirs(outdir, exist_ok=True)
        cfg_path = os.path.join(outdir, "config.json")
        with open(cfg_path, "w") as fh:
            json.dump(_merge(template, point), fh, indent=1)
        jobs.append((label, cfg_path, outdir))
    threads = max(1, int(os.environ.get("HOCP_THREADS", os.cpu_count() or 1)))
    results = {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        futs = {
            pool.submit(_run_point_subprocess, cfg_path, outdir): label
            for label, cfg_path, outdir in jobs
        }
        for fut in concurrent.futures.as_completed(futs):
            label = futs[fut]
            code, out = fut.result()
            results[label] = {"exit_code": code, "output": out.strip()}
            print(f"[{label}] exit {code}")
    combined = {
        "grid_points": len(jobs),
        "failed": sorted(l for l, r in results.items() if r["exit_code"] != 0),
        "results": {l: results[l] for l, _, _ in jobs},
    }
    with open(os.path.join(base, "sweep_summary.json"), "w") as fh:
        json.dump(combined, fh, indent=1)
    print(f"sweep -> {base}/ ({len(jobs)} points, {len(combined['failed'])} failed)")
    return 2 if combined["failed"] else 0


def cmd_check(args):
    from .acceptance import run_all

    names = args.criteria or None
    results = run_all(names)
    width = max(len(r.name) for r in results) if results else 10
    all_pass = True
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        all_pass &= r.passed
        print(f"{mark}  {r.name:<{width}}  [{r.seconds:6.1f}s]  {r.details}")
    print("all criteria pass" if all_pass else "FAILURES present")
    return 0 if all_pass else 2


def cmd_list_problems(args):
    for name in list_problems():
        print(name)
    return 0


def main(argv=None):
    import argparse

    ap = argparse.ArgumentParser(
        prog="hocp", description="higher-order cutting-plane experiment runner"
    )
    sub = ap.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="execute one configured run")
    p_run.add_argument("config", help="config path or bundled config name")
    p_run.add_argument("-o", "--output", default=None, help="output directory")
    p_run.set_defaults(fn=cmd_run)
    p_sw = sub.add_parser("sweep", help="run a template over a parameter grid")
    p_sw.add_argument("template")
    p_sw.add_argument("grid")
    p_sw.add_argument("-o", "--output", default=None)
    p_sw.set_defaults(fn=cmd_sweep)
    p_ck = sub.add_parser("check", help="run the acceptance suite")
    p_ck.add_argument("criteria", nargs="*", help="optional name filters")
    p_ck.set_defaults(fn=cmd_check)
    p_ls = sub.add_parser("list-problems")
    p_ls.set_defaults(fn=cmd_list_problems)
    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
