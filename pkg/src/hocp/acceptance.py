"""End-to-end acceptance suite: envelope, invariant, and agreement checks.

Each criterion is a function returning a CriterionResult; `run_all`
executes them in order.  The traces produced by the long benchmark runs
(criteria 1, 5, 6) are cached and reused by the final envelope check.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .backend import FLOAT64, make_backend
from .bundle_loop import BundleInit, OracleCache
from .diagnostics import cauchy_constant, min_norm_convex_hull
from .drivers import EpsSchedule, GlobalConfig, run_global, run_local
from .model import Bundle, Cut, TrustRegion, model_eval
from .problems import (
    finite_difference_check,
    generate_maxeig_instance,
    generate_sumabs_instance,
    problem_threebranch,
    problem_halfhalf,
    problem_maxeig,
    problem_maxroot,
    problem_sumabs,
)
from .subproblem import solve_exact_1d, solve_lp_q1, solve_smoothed_multistart
from .tensors import jet_from_derivatives


@dataclass
class CriterionResult:
    name: str
    passed: bool
    details: str
    seconds: float = 0.0


@dataclass
class _SharedRuns:
    """Traces reused between criteria (1, 5, 6 feed criterion 11)."""

    eps_threshold_runs: list = field(default_factory=list)  # (label, LocalRunResult)


def _envelope_j0(dists, epss):
    """First 1-based index from which dist_j <= eps_j holds to the end."""
    J = len(dists)
    for j0 in range(1, J + 1):
        if all(d <= e for d, e in zip(dists[j0 - 1 :], epss[j0 - 1 :])):
            return j0
    return None


def criterion_1_sharp_1d_envelope(shared: _SharedRuns):
    """1-D sharp problem, exact solver, 512-bit floats, q = 1..5."""
    be = make_backend("bigfloat(512)")
    prob = problem_maxroot(1, be)
    x1 = np.array([be.from_float(0.1)], dtype=object)
    msgs, ok = [], True
    for q in (1, 2, 3, 4, 5):
        sch = EpsSchedule(eps1=be.from_float(0.5), q=q, p=1, backend=be)
        run = run_local(prob, x1, sch, solver_strategy="exact1d", eps_thr=1e-60)
        dists = [row["dist"] for row in run.trace]
        epss = [float(row["eps"]) for row in run.trace]
        sizes = [row["bundle_size"] for row in run.trace]
        env = all(d <= e for d, e in zip(dists[1:], epss[1:]))
        two = all(s == 2 for s in sizes)
        term = run.termination == "EpsThreshold"
        ok &= env and two and term
        msgs.append(f"q={q}: term={run.termination} env(j>=2)={env} |W|==2={two}")
        if term:
            shared.eps_threshold_runs.append((f"sharp1d-q{q}", run))
    return ok, "; ".join(msgs)


def criterion_2_schedule_arithmetic(shared):
    rng = np.random.Generator(np.random.Philox(20240812))
    ok, worst = True, 0.0
    for _ in range(20):
        q = int(rng.integers(1, 6))
        p = int(rng.integers(1, q + 1))
        sch = EpsSchedule(
            eps1=float(rng.uniform(0.05, 2.0)),
            q=q,
            p=p,
            sigma=float(rng.uniform(0.05, 0.95)),
            kappa=float(rng.uniform(0.05, 0.95)),
        )
        Q = sch.order
        eps = [float(sch.eps_at(j)) for j in range(1, 22)]
        ratios = [eps[j + 1] / eps[j] ** Q for j in range(20) if eps[j + 1] > 0]
        rel = (max(ratios) - min(ratios)) / abs(ratios[0])
        worst = max(worst, rel)
        ok &= rel <= 1e-12
        steps = [eps[j + 1] / eps[j] for j in range(20) if eps[j + 1] > 0]
        ok &= all(b < a for a, b in zip(steps, steps[1:]))
    return ok, f"worst ratio spread {worst:.2e} (<= 1e-12); step ratios decreasing"


def criterion_3_remainder_scaling(shared):
    prob = problem_threebranch()
    xhat = 0.975  # near the crossing of two selection branches (a kink)
    msgs, ok = [], True
    for q in (1, 2, 3):
        errs, epss = [], [0.2, 0.1, 0.05, 0.025]
        for eps in epss:
            tr = TrustRegion(np.array([xhat]), eps)
            b = Bundle(tr, backend=FLOAT64)
            for y in np.linspace(xhat - eps, xhat + eps, 15):
                r = prob.oracle(np.array([y]), q)
                b.add_cut(Cut(center=np.array([y]), jet=r.jet, flagged=r.flagged))
            zs = np.linspace(xhat - eps, xhat + eps, 401)
            errs.append(
                max(
                    abs(float(prob.value_only(np.array([z]))) - float(model_eval(b, np.array([z]))[0]))
                    for z in zs
                )
            )
        slope = float(np.polyfit(np.log(epss), np.log(errs), 1)[0])
        need = (q + 1) - 0.3
        ok &= slope >= need
        msgs.append(f"q={q}: slope={slope:.2f} (>= {need})")
    return ok, "; ".join(msgs)


def criterion_4_inner_iteration_bound(shared):
    msgs, ok = [], True
    rng = np.random.Generator(np.random.Philox(4))
    for n in (2, 5, 25):
        prob = problem_maxroot(n, FLOAT64)
        d = rng.standard_normal(n)
        x1 = 0.3 * d / np.linalg.norm(d)
        sch = EpsSchedule(eps1=0.5, q=2, p=1)
        run = run_local(
            prob, x1, sch, solver_strategy="smoothed", eps_thr=1e-5, stop_on_boundary=False
        )
        inner = [row["inner_iters"] for row in run.trace]
        good = max(inner) <= 2 * n
        ok &= good
        msgs.append(f"n={n}: max inner {max(inner)} (<= {2 * n})")
    prob = problem_maxroot(100, FLOAT64)
    x1 = np.linspace(0.001, 0.1, 100)
    sch = EpsSchedule(eps1=0.5, q=1, p=1)
    run = run_local(
        prob, x1, sch, solver_strategy="lp", eps_thr=1e-7, stop_on_boundary=False
    )
    inner = [row["inner_iters"] for row in run.trace]
    f_fin = float(prob.value_only(run.x_final))
    good = max(inner) <= 200 and f_fin <= 1e-6 and run.termination == "EpsThreshold"
    ok &= good
    msgs.append(f"n=100 lp: max inner {max(inner)} (<= 200), f_final={f_fin:.1e} (<= 1e-6)")
    return ok, "; ".join(msgs)


def criterion_5_halfhalf(shared):
    prob = problem_halfhalf()
    x1 = np.full(8, 20.08)
    sch = EpsSchedule(eps1=30.0, q=2, p=2)
    cache = OracleCache(prob)
    run = run_local(
        prob,
        x1,
        sch,
        init=BundleInit("memory", memory=cache),
        solver_strategy="smoothed",
        eps_thr=1e-3,
        stop_on_boundary=False,
        cache=cache,
    )
    dists = [row["dist"] for row in run.trace]
    epss = [float(row["eps"]) for row in run.trace]
    fs = [row["f"] for row in run.trace]
    term = run.termination == "EpsThreshold"
    J = run.termination_iteration
    final_ok = float(np.linalg.norm(run.x_final)) <= 10 * float(sch.eps_at(J))
    j0 = _envelope_j0(dists, epss)
    j0_ok = j0 is not None and j0 <= 8
    nondescent = any(b > a for a, b in zip(fs, fs[1:]))
    one_call = all(row["oracle_calls"] == 1 for row in run.trace[1:])
    ok = term and final_ok and j0_ok and nondescent and one_call
    if term:
        shared.eps_threshold_runs.append(("halfhalf", run))
    return ok, (
        f"term={run.termination}, |x_J|<=10*eps_J={final_ok}, j0={j0} (<= 8), "
        f"non-descent={nondescent}, 1 oracle call/iter (memory)={one_call}"
    )


def criterion_6_sumabs(shared):
    inst = generate_sumabs_instance(seed=42, n=10, m=8)
    prob = problem_sumabs(inst)
    rng = np.random.Generator(np.random.Philox(1))
    x1 = rng.uniform(-2, 2, size=10)
    sch = EpsSchedule(eps1=10.0, q=2, p=2)
    run = run_local(
        prob, x1, sch, solver_strategy="smoothed", eps_thr=1e-3, stop_on_boundary=False
    )
    dists = [row["dist"] for row in run.trace]
    epss = [float(row["eps"]) for row in run.trace]
    sizes = [row["bundle_size"] for row in run.trace]
    term = run.termination == "EpsThreshold"
    J = run.termination_iteration
    final_ok = float(np.linalg.norm(run.x_final)) <= 10 * float(sch.eps_at(J))
    j0 = _envelope_j0(dists, epss)
    j0_ok = j0 is not None and j0 <= 8
    third = max(1, len(sizes) // 3)
    growth = max(sizes[-third:]) >= max(sizes[:third])
    ok = term and final_ok and j0_ok and growth
    if term:
        shared.eps_threshold_runs.append(("sumabs", run))
    return ok, (
        f"term={run.termination}, |x_J|<=10*eps_J={final_ok}, j0={j0} (<= 8), "
        f"bundle growth {max(sizes[:third])} -> {max(sizes[-third:])}"
    )


def criterion_7_strategy_agreement(shared):
    rng = np.random.Generator(np.random.Philox(7))
    worst = 0.0
    for trial in range(50):
        K = int(rng.integers(1, 6))
        x = rng.normal(size=1)
        eps = float(rng.uniform(0.2, 1.2))
        cuts = [
            Cut(
                center=(y := x + rng.uniform(-eps, eps, size=1)),
                jet=jet_from_derivatives(y, float(rng.normal()), rng.normal(size=1)),
            )
            for _ in range(K)
        ]
        tre, trm = TrustRegion(x, eps), TrustRegion(x, eps, norm="max")
        be_, bm_ = Bundle(tre, backend=FLOAT64), Bundle(trm, backend=FLOAT64)
        for c in cuts:
            be_.add_cut(c)
            bm_.add_cut(c)
        e = float(solve_exact_1d(be_, tre).theta)
        l = solve_lp_q1(bm_, trm).theta
        s = solve_smoothed_multistart(be_, tre, tol=1e-10, seed=trial).theta
        worst = max(worst, abs(e - l), abs(e - s))
    ok = worst <= 1e-6

    worst_q = 0.0
    for trial in range(20):
        n = int(rng.integers(1, 4))
        x = rng.normal(size=n)
        eps = float(rng.uniform(0.3, 1.2))
        M = rng.normal(size=(n, n))
        H = M.T @ M + 0.1 * np.eye(n)
        g = rng.normal(size=n)
        v = float(rng.normal())
        tr = TrustRegion(x, eps)
        b = Bundle(tr, backend=FLOAT64)
        b.add_cut(Cut(center=x.copy(), jet=jet_from_derivatives(x.copy(), v, g, H)))
        sol = solve_smoothed_multistart(b, tr, tol=1e-10, seed=trial)
        d = -np.linalg.solve(H, g)
        if np.linalg.norm(d) > eps:
            lo, hi = 0.0, 1e10
            for _ in range(300):
                mu = 0.5 * (lo + hi)
                d = -np.linalg.solve(H + mu * np.eye(n), g)
                if np.linalg.norm(d) > eps:
                    lo = mu
                else:
                    hi = mu
        ref = v + g @ d + 0.5 * d @ H @ d
        worst_q = max(worst_q, abs(sol.theta - ref))
    ok &= worst_q <= 1e-8
    return ok, f"3-way worst diff {worst:.1e} (<= 1e-6); quadratic worst {worst_q:.1e} (<= 1e-8)"


def criterion_8_min_norm(shared):
    rng = np.random.Generator(np.random.Philox(8))
    worst_gap, worst_cert = 0.0, 0.0
    for _ in range(100):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 7))
        P = rng.normal(size=(m, n)) * float(rng.uniform(0.2, 5.0))
        v, w = min_norm_convex_hull(list(P), tol=1e-12)
        # brute force over random simplex weights
        W = rng.dirichlet(np.ones(m), size=10000)
        bf = np.linalg.norm(W @ P, axis=1).min()
        worst_gap = max(worst_gap, float(np.linalg.norm(v)) - bf)
        nv2 = float(v @ v)
        worst_cert = max(worst_cert, float(np.max(nv2 - P @ v)))
    ok = worst_gap <= 1e-3 and worst_cert <= 1e-9
    return ok, f"norm vs brute force gap {worst_gap:.1e} (<= 1e-3); certificate slack {worst_cert:.1e} (<= 1e-9)"


def criterion_9_derivatives(shared):
    rng = np.random.Generator(np.random.Philox(99))
    a_diag = np.array([1.0 if i % 2 == 0 else 0.0 for i in range(8)])
    maxeig = problem_maxeig(generate_maxeig_instance(seed=7, n=4, m=6))
    A = maxeig.instance["A"]

    def eig_gap(x):
        w = np.linalg.eigvalsh(A[0] + sum(x[i] * A[i + 1] for i in range(len(x))))
        return w[-1] - w[-2]

    probs = {
        "maxroot3": problem_maxroot(3, FLOAT64),
        "halfhalf": problem_halfhalf(),
        "threebranch": problem_threebranch(),
        "sumabs": problem_sumabs(generate_sumabs_instance(seed=5, n=6, m=5)),
        "maxeig": maxeig,
    }
    msgs, ok = [], True
    for name, p in probs.items():
        worst = {1: 0.0, 2: 0.0}
        pts = 0
        while pts < 10:
            x = rng.uniform(-1.5, 1.5, size=p.dim)
            if name == "threebranch":
                x = rng.uniform(0.3, 2.0, size=1)
            if name == "maxroot3":
                a = np.sort(np.abs(x))
                if a[-1] - a[-2] < 0.1 or a[-1] < 0.1:
                    continue
            if name == "halfhalf" and abs(x @ (a_diag * x)) < 0.3:
                continue
            if name == "maxeig" and eig_gap(x) < 0.1:
                continue
            rep = finite_difference_check(p, x, q=2)
            for o in (1, 2):
                worst[o] = max(worst[o], rep["orders"][o])
            pts += 1
        good = worst[1] <= 1e-6 and worst[2] <= 1e-5
        ok &= good
        msgs.append(f"{name}: g={worst[1]:.1e} H={worst[2]:.1e}")
    return ok, "; ".join(msgs)


def criterion_10_globalized(shared):
    prob = problem_maxroot(2, FLOAT64)
    cfg = GlobalConfig(delta1=1.0, tau1=0.1, p=1)
    res = run_global(
        prob, np.array([5.0, -3.0]), cfg, q=1, solver_strategy="smoothed", eps_thr=1e-9
    )
    dist = float(np.linalg.norm(np.asarray(res.x_final, dtype=float)))
    success = any(
        row["attempt_termination"] in ("EpsThreshold", "MaxIterations")
        for row in res.outer_trace
    )
    ok = res.status == "Converged" and dist <= 1e-6 and success
    return ok, f"status={res.status}, final dist {dist:.1e} (<= 1e-6), successful attempt={success}"


def criterion_11_step_envelope(shared: _SharedRuns):
    """Distance to the final iterate bounded by C*eps_j on every converged trace."""
    if not shared.eps_threshold_runs:
        return False, "no EpsThreshold traces available (criteria 1, 5, 6 must run first)"
    msgs, ok = [], True
    for label, run in shared.eps_threshold_runs:
        C = cauchy_constant(run.schedule)
        xJ = run.iterates[-1]
        dists, epss = [], []
        for row, x in zip(run.trace, run.iterates):
            d = np.asarray(x) - np.asarray(xJ)
            dists.append(float(np.sqrt(sum(float(v) ** 2 for v in d))))
            epss.append(float(row["eps"]))
        j0 = _envelope_j0(dists, [C * e for e in epss])
        good = j0 is not None and j0 <= 8
        ok &= good
        msgs.append(f"{label}: C={C:.3f} j0={j0}")
    return ok, "; ".join(msgs)


CRITERIA = [
    ("1 sharp-1d envelope (512-bit)", criterion_1_sharp_1d_envelope),
    ("2 schedule arithmetic", criterion_2_schedule_arithmetic),
    ("3 remainder scaling", criterion_3_remainder_scaling),
    ("4 inner-iteration bound", criterion_4_inner_iteration_bound),
    ("5 half-and-half run", criterion_5_halfhalf),
    ("6 sum-abs run", criterion_6_sumabs),
    ("7 strategy agreement", criterion_7_strategy_agreement),
    ("8 min-norm oracle", criterion_8_min_norm),
    ("9 derivative correctness", criterion_9_derivatives),
    ("10 globalized run", criterion_10_globalized),
    ("11 step envelope on converged traces", criterion_11_step_envelope),
]


def run_all(names=None):
    shared = _SharedRuns()
    results = []
    for name, fn in CRITERIA:
        if names is not None and not any(s in name for s in names):
            continue
        t0 = time.time()
        try:
            passed, details = fn(shared)
        except Exception as exc:  # a crashed criterion is a failed criterion
            passed, details = False, f"exception: {exc!r}"
        results.append(CriterionResult(name, bool(passed), details, time.time() - t0))
    return results
