"""Inner loop: grow the cut collection until the model matches f at its
own trust-region minimizer.

Each inner iteration solves the current model subproblem, evaluates the
objective at the minimizer z̄ (value only), and stops once
f(z̄) − model(z̄) ≤ ε^{q+σ}; otherwise the oracle call is completed with
the jet at z̄ and the new cut is appended.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backend import FLOAT64
from .model import Bundle, Cut, DuplicateCenterError, TrustRegion
from .subproblem import solve


class OracleCache:
    """Memoizing oracle wrapper counting distinct evaluated points.

    A point that only ever gets a value evaluation is an objective call
    without a jet call; completing it later with a jet does not create a
    new point. `oracle_calls` is the number of distinct points touched.
    """

    def __init__(self, problem):
        self.problem = problem
        self._values = {}
        self._jets = {}  # key -> (q, OracleResponse)
        self.value_evals = 0
        self.jet_evals = 0

    @staticmethod
    def _key(x):
        return tuple(np.asarray(x).ravel().tolist())

    @property
    def oracle_calls(self):
        return len(self._values.keys() | self._jets.keys())

    def value(self, x):
        k = self._key(x)
        if k in self._values:
            return self._values[k]
        if k in self._jets:
            v = self._jets[k][1].value
        else:
            v = self.problem.value_only(x)
            self.value_evals += 1
        self._values[k] = v
        return v

    def jet_response(self, x, q):
        k = self._key(x)
        hit = self._jets.get(k)
        if hit is not None and hit[0] >= q:
            return hit[1]
        resp = self.problem.oracle(x, q)
        self.jet_evals += 1
        self._jets[k] = (q, resp)
        self._values[k] = resp.value
        return resp

    def cuts_in(self, tr: TrustRegion, backend=FLOAT64):
        """Stored jets whose centers lie inside tr, as cuts."""
        out, seen = [], set()
        for k, (_, resp) in self._jets.items():
            if k in seen:
                continue
            seen.add(k)
            center = np.array(resp.jet.center)
            if tr.contains(center, backend):
                out.append(Cut(center=center, jet=resp.jet, flagged=resp.flagged))
        return out


@dataclass
class BundleInit:
    strategy: str = "singleton"  # "singleton" | "memory" | "random"
    count: int = 1  # extra random points for "random"
    memory: OracleCache = None

    def __post_init__(self):
        if self.strategy not in ("singleton", "memory", "random"):
            raise ValueError(f"unknown init strategy {self.strategy!r}")
        if self.strategy == "random" and self.count < 1:
            raise ValueError("random init needs count >= 1")


def memory_filter(memory: OracleCache, tr: TrustRegion, backend=FLOAT64):
    if memory is None:
        return []
    return memory.cuts_in(tr, backend)


@dataclass
class BundleLoopResult:
    bundle: Bundle
    solution: object
    inner_iterations: int
    oracle_calls: int
    gap_history: list
    converged: bool
    stagnated: bool = False
    max_inner_hit: bool = False
    theta_history: list = field(default_factory=list)


def default_max_inner(problem):
    if problem.selection_count is not None:
        return 10 * problem.selection_count
    return 50 + 10 * problem.dim


def build_bundle(
    problem,
    x,
    tr: TrustRegion,
    q,
    sigma,
    init: BundleInit = None,
    solver_strategy="auto",
    max_inner=None,
    solver_tol=None,
    seed=0,
    cache: OracleCache = None,
):
    be = problem.backend
    if init is None:
        init = BundleInit()
    if cache is None:
        cache = init.memory if init.memory is not None else OracleCache(problem)
    if max_inner is None:
        max_inner = default_max_inner(problem)
    calls_before = cache.oracle_calls

    bundle = Bundle(tr, backend=be)
    resp = cache.jet_response(x, q)
    bundle.add_cut(Cut(center=np.array(x), jet=resp.jet, flagged=resp.flagged))
    if init.strategy == "memory":
        for cut in memory_filter(cache, tr, be):
            try:
                bundle.add_cut(cut)
            except DuplicateCenterError:
                pass
    elif init.strategy == "random":
        rng = np.random.Generator(np.random.Philox(seed))
        n = problem.dim
        added = 0
        while added < init.count:
            d = rng.uniform(-1.0, 1.0, size=n)
            if tr.norm == "euclidean" and np.linalg.norm(d) > 1.0:
                continue
            pt = np.array([xi + be.from_float(float(di)) * tr.radius for xi, di in zip(x, d)])
            try:
                r = cache.jet_response(pt, q)
                bundle.add_cut(Cut(center=pt, jet=r.jet, flagged=r.flagged))
            except DuplicateCenterError:
                pass
            added += 1

    threshold = be.power(tr.radius, be.from_float(q + sigma))
    gap_history, theta_history = [], []
    converged = stagnated = max_inner_hit = False
    sol = None
    inner = 0
    def _solve(refine):
        if solver_tol is None:
            return solve(
                bundle, tr, strategy=solver_strategy, seed=seed + inner, refine=refine
            )
        return solve(
            bundle,
            tr,
            tol=solver_tol,
            strategy=solver_strategy,
            seed=seed + inner,
            refine=refine,
        )

    while True:
        sol = _solve(refine=False)
        inner += 1
        fz = cache.value(sol.z)
        gap = fz - sol.theta
        gap_history.append(gap)
        theta_history.append(sol.theta)
        if gap <= threshold:
            if sol.stats.get("refined") is False:
                # the quick solve returned an arbitrary vertex of the optimal
                # face; recompute with the tie-break and certify the gap there
                refined = _solve(refine=True)
                gap_r = cache.value(refined.z) - refined.theta
                if gap_r <= threshold:
                    sol, gap = refined, gap_r
                    gap_history[-1] = gap_r
                    converged = True
                    break
                sol = refined  # cut at the refined point and keep going
            else:
                converged = True
                break
        if inner >= max_inner:
            max_inner_hit = True
            break
        # solver roundoff can push z a few ulps outside the ball; pull it back
        # (retract toward the center until the containment check accepts it,
        # since coordinate-level rounding can exceed the ball's own slack at
        # tiny radii)
        z_cut = np.array(sol.z)
        if not tr.contains(z_cut, be):
            step = np.asarray(z_cut) - tr.center
            fac = 1e-15
            for _ in range(16):
                z_cut = tr.center + step
                d = tr.distance(z_cut, be)
                if d <= tr.radius:
                    break
                # rescale by the measured overshoot; escalate the safety
                # margin since sub-ulp shrinks leave the rounded point fixed
                step = step * (tr.radius / d) * be.from_float(1.0 - fac)
                fac *= 10.0
        r = cache.jet_response(z_cut, q)
        try:
            bundle.add_cut(Cut(center=z_cut, jet=r.jet, flagged=r.flagged))
        except DuplicateCenterError:
            stagnated = True
            break

    return BundleLoopResult(
        bundle=bundle,
        solution=sol,
        inner_iterations=inner,
        oracle_calls=cache.oracle_calls - calls_before,
        gap_history=gap_history,
        converged=converged,
        stagnated=stagnated,
        max_inner_hit=max_inner_hit,
        theta_history=theta_history,
    )
