"""Outer drivers: the vanishing trust-region schedule, the local
superlinear method, and its globalized wrapper.

The local method re-centers a fresh bundle at each iterate with radius
eps_j = eps1 * kappa^(Q^(j-1) - 1), Q = (q + sigma)/p, and stops either
when eps_j falls below a threshold or when the trust-region constraint
is active at any iteration past the first.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .backend import FLOAT64
from .bundle_loop import BundleInit, OracleCache, build_bundle
from .diagnostics import criticality_measure
from .model import TrustRegion

DEFAULT_SIGMA = 0.5
DEFAULT_KAPPA = 0.75
DEFAULT_EPS_THR = {"exact1d": 1e-60, "lp": 1e-7, "smoothed": 1e-3}


@dataclass(frozen=True)
class EpsSchedule:
    eps1: object
    q: int
    p: int = 1
    sigma: float = DEFAULT_SIGMA
    kappa: float = DEFAULT_KAPPA
    backend: object = FLOAT64

    def __post_init__(self):
        if not (self.eps1 > 0):
            raise ValueError("eps1 must be positive")
        if not (0 < self.kappa < 1):
            raise ValueError("kappa must lie in (0, 1)")
        if not (0 < self.sigma < 1):
            raise ValueError("sigma must lie in (0, 1)")
        if self.q < 1 or self.p < 1:
            raise ValueError("q and p must be >= 1")
        if not (self.order > 1):
            raise ValueError("schedule order (q + sigma)/p must exceed 1")
        if self.q < self.p:
            warnings.warn("q < p: superlinear rate not guaranteed", stacklevel=2)

    @property
    def order(self):
        return (self.q + self.sigma) / self.p

    def eps_at(self, j):
        """eps_j = eps1 * kappa^(Q^(j-1) - 1), computed in the backend."""
        if j < 1:
            raise ValueError("iteration index is 1-based")
        be = self.backend
        Q = (be.from_float(float(self.q)) + be.from_float(self.sigma)) / be.from_float(
            float(self.p)
        )
        expo = be.power(Q, be.from_float(float(j - 1))) - be.from_float(1.0)
        return be.from_float(1.0) * self.eps1 * be.power(be.from_float(self.kappa), expo)


@dataclass
class LocalRunResult:
    iterates: list
    trace: list  # one dict per iteration j
    termination: str  # EpsThreshold | TrustRegionActive | MaxIterations | SubproblemDegraded
    termination_iteration: int
    schedule: EpsSchedule
    cache: OracleCache
    bundle_results: list = field(default_factory=list)

    @property
    def x_final(self):
        return self.iterates[-1]

    @property
    def oracle_calls(self):
        return self.cache.oracle_calls


def _resolve_strategy(strategy, problem, q):
    if strategy != "auto":
        return strategy
    if problem.dim == 1:
        return "exact1d"
    if q == 1:
        return "lp"
    return "smoothed"


def _dist(problem, x):
    if problem.xstar is None:
        return float("nan")
    d = np.asarray(x) - np.asarray(problem.xstar)
    return float(np.sqrt(sum(float(v) * float(v) for v in d)))


def run_local(
    problem,
    x1,
    schedule: EpsSchedule,
    init: BundleInit = None,
    solver_strategy="auto",
    eps_thr=None,
    max_iter=60,
    seed=0,
    max_inner=None,
    solver_tol=None,
    cache: OracleCache = None,
    stop_on_boundary=True,
):
    be = problem.backend
    strategy = _resolve_strategy(solver_strategy, problem, schedule.q)
    if eps_thr is None:
        eps_thr = DEFAULT_EPS_THR[strategy]
    norm = "max" if strategy == "lp" else "euclidean"
    if init is None:
        init = BundleInit()
    if cache is None:
        cache = OracleCache(problem)
    if init.strategy == "memory" and init.memory is None:
        init = BundleInit(strategy="memory", memory=cache)

    x = np.array(x1)
    iterates = [x]
    trace, bundle_results = [], []
    termination, term_j = "MaxIterations", max_iter

    for j in range(1, max_iter + 1):
        eps_j = schedule.eps_at(j)
        if eps_j <= be.from_float(eps_thr):
            termination, term_j = "EpsThreshold", j
            break
        tr = TrustRegion(x, eps_j, norm=norm)
        res = build_bundle(
            problem,
            x,
            tr,
            q=schedule.q,
            sigma=schedule.sigma,
            init=init,
            solver_strategy=strategy,
            max_inner=max_inner,
            solver_tol=solver_tol,
            seed=seed + 1000 * j,
            cache=cache,
        )
        bundle_results.append(res)
        trace.append(
            {
                "j": j,
                "eps": eps_j,
                "f": cache.value(x),
                "dist": _dist(problem, x),
                "bundle_size": len(res.bundle),
                "inner_iters": res.inner_iterations,
                "oracle_calls": res.oracle_calls,
                "boundary_active": bool(res.solution.boundary_active),
                "gap": res.gap_history[-1],
                "crit": criticality_measure(res.bundle),
            }
        )
        x = np.array(res.solution.z)
        iterates.append(x)
        if res.solution.degraded:
            termination, term_j = "SubproblemDegraded", j
            break
        if stop_on_boundary and res.solution.boundary_active and j >= 2:
            termination, term_j = "TrustRegionActive", j
            break

    return LocalRunResult(
        iterates=iterates,
        trace=trace,
        termination=termination,
        termination_iteration=term_j,
        schedule=schedule,
        cache=cache,
        bundle_results=bundle_results,
    )


def decrease_measure(problem, x, delta, p, bundle_result, cache: OracleCache = None):
    """(f(x) - f(zbar)) / delta^p for the bundle loop's minimizer zbar."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if cache is None:
        cache = OracleCache(problem)
    fx = cache.value(np.asarray(x))
    fz = cache.value(bundle_result.solution.z)
    be = problem.backend
    return (fx - fz) / be.power(delta, be.from_float(float(p)))


@dataclass
class GlobalConfig:
    delta1: float
    tau1: float
    p: int = 1
    theta_delta: float = 0.5
    theta_tau: float = 0.5
    max_outer: int = 40
    max_phase_iter: int = 50
    local_budget: int = 30

    def __post_init__(self):
        if self.delta1 <= 0 or self.tau1 <= 0:
            raise ValueError("delta1 and tau1 must be positive")
        if not (0 < self.theta_delta < 1 and 0 < self.theta_tau < 1):
            raise ValueError("shrink factors must lie in (0, 1)")
        if min(self.max_outer, self.max_phase_iter, self.local_budget) < 1:
            raise ValueError("iteration caps must be positive")


@dataclass
class GlobalRunResult:
    status: str  # Converged | NotConverged
    x_final: object
    f_final: object
    local_result: object
    outer_trace: list
    cache: OracleCache

    @property
    def oracle_calls(self):
        return self.cache.oracle_calls


def run_global(
    problem,
    x0,
    cfg: GlobalConfig,
    q,
    sigma=DEFAULT_SIGMA,
    kappa=DEFAULT_KAPPA,
    init: BundleInit = None,
    solver_strategy="auto",
    eps_thr=None,
    seed=0,
    max_inner=None,
):
    be = problem.backend
    if q < cfg.p:
        warnings.warn("q < p in globalized run", stacklevel=2)
    strategy = _resolve_strategy(solver_strategy, problem, q)
    norm = "max" if strategy == "lp" else "euclidean"
    cache = OracleCache(problem)
    if init is None:
        init = BundleInit()

    x = np.array(x0)
    delta, tau = cfg.delta1, cfg.tau1
    outer_trace = []

    for j in range(1, cfg.max_outer + 1):
        # descent phase: take model steps while they certify enough decrease
        lam_history = []
        for _ in range(cfg.max_phase_iter):
            tr = TrustRegion(x, be.from_float(delta), norm=norm)
            res = build_bundle(
                problem,
                x,
                tr,
                q=q,
                sigma=sigma,
                init=init,
                solver_strategy=strategy,
                max_inner=max_inner,
                seed=seed + 7919 * j,
                cache=cache,
            )
            lam = decrease_measure(problem, x, be.from_float(delta), cfg.p, res, cache)
            lam_history.append(float(lam))
            if lam < tau:
                break
            x = np.array(res.solution.z)

        # local attempt from the stalled point with eps1 = delta
        schedule = EpsSchedule(
            eps1=be.from_float(delta), q=q, p=cfg.p, sigma=sigma, kappa=kappa, backend=be
        )
        local_init = BundleInit(strategy="memory", memory=cache) if init.strategy == "memory" else init
        attempt = run_local(
            problem,
            x,
            schedule,
            init=local_init,
            solver_strategy=strategy,
            eps_thr=eps_thr,
            max_iter=cfg.local_budget,
            seed=seed + 104729 * j,
            max_inner=max_inner,
            cache=cache,
        )
        outer_trace.append(
            {
                "j": j,
                "delta": delta,
                "tau": tau,
                "lambda_history": lam_history,
                "attempt_termination": attempt.termination,
                "attempt_iterations": attempt.termination_iteration,
                "f": float(cache.value(x)),
                "dist": _dist(problem, x),
                "oracle_calls": cache.oracle_calls,
            }
        )
        if attempt.termination in ("EpsThreshold", "MaxIterations"):
            xf = attempt.x_final
            return GlobalRunResult(
                status="Converged",
                x_final=xf,
                f_final=cache.value(xf),
                local_result=attempt,
                outer_trace=outer_trace,
                cache=cache,
            )
        # aborted attempt: keep its best point if it actually descended
        best = min(attempt.iterates, key=lambda p_: float(cache.value(p_)))
        if float(cache.value(best)) < float(cache.value(x)):
            x = np.array(best)
        delta *= cfg.theta_delta
        tau *= cfg.theta_tau

    return GlobalRunResult(
        status="NotConverged",
        x_final=x,
        f_final=cache.value(x),
        local_result=None,
        outer_trace=outer_trace,
        cache=cache,
    )
