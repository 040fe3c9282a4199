"""Criticality and convergence-rate instrumentation.

The criticality surrogate is the minimum-norm element of the convex hull
of the bundle's cut gradients; the rate report fits an R-order proxy to a
distance sequence via log(-log d) regression and checks the schedule
envelope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def min_norm_convex_hull(gradients, tol=1e-12, max_iter=10000):
    """Minimum-norm point of conv(gradients) by Wolfe's corral algorithm.

    Returns (point, weights) where weights covers the full input list
    (zeros off the final corral).
    """
    P = np.array([np.asarray(g, dtype=float).ravel() for g in gradients])
    m, n = P.shape
    scale = max(1.0, float(np.abs(P).max()))
    norms2 = np.einsum("ij,ij->i", P, P)
    corral = [int(np.argmin(norms2))]
    w = np.array([1.0])

    for _ in range(max_iter):
        x = w @ P[corral]
        xx = float(x @ x)
        dots = P @ x
        j = int(np.argmin(dots))
        if dots[j] >= xx - tol * scale * scale or j in corral:
            break
        corral.append(j)
        w = np.append(w, 0.0)
        # minor cycle: affine minimizer over the corral, stepping back onto
        # the simplex and dropping vanished vertices
        for _ in range(max_iter):
            S = P[corral]
            k = len(corral)
            M = np.empty((k + 1, k + 1))
            M[:k, :k] = S @ S.T
            M[:k, k] = 1.0
            M[k, :k] = 1.0
            M[k, k] = 0.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            try:
                v = np.linalg.solve(M, rhs)[:k]
            except np.linalg.LinAlgError:
                v, *_ = np.linalg.lstsq(M, rhs, rcond=None)
                v = v[:k]
            if v.min() > 1e-14:
                w = v
                break
            mask = v < 1e-14
            theta = min(
                w[i] / (w[i] - v[i]) for i in range(k) if mask[i] and w[i] > v[i]
            )
            w = w + theta * (v - w)
            keep = w > 1e-14
            keep[np.argmin(np.where(mask, w, np.inf))] = False
            corral = [c for c, kp in zip(corral, keep) if kp]
            w = w[keep]
            w = w / w.sum()

    x = w @ P[corral]
    full = np.zeros(m)
    for c, wi in zip(corral, w):
        full[c] += wi
    return x, full


def criticality_measure(bundle, tol=1e-12):
    """Norm of the min-norm point of the hull of all cut gradients."""
    grads = [np.asarray(c.jet.grad_vector(), dtype=float) for c in bundle.cuts]
    v, _ = min_norm_convex_hull(grads, tol=tol)
    return float(np.linalg.norm(v))


@dataclass
class RateReport:
    distances: list
    fitted_slope: float  # slope of log(-log d_j) vs j
    fitted_order: float  # exp(slope): per-step R-order proxy
    envelope_pass: list  # per-j bool: d_j <= C * eps_j
    envelope_j0: int  # first index from which the envelope holds to the end
    violations: int
    nstep_ratios: list  # log d_{j+1} / log d_j
    used_points: int


def estimate_r_order(distances, schedule, envelope_constant=None):
    """Fit an R-order proxy to a positive distance sequence.

    `schedule` provides eps_at(j) (1-based) for the envelope check;
    `envelope_constant` defaults to the schedule's Cauchy-series constant.
    """
    d = [float(v) for v in distances]
    if any(v < 0 for v in d):
        raise ValueError("distances must be nonnegative")
    tiny = 1e-290
    usable = [(j, v) for j, v in enumerate(d, start=1) if tiny < v < 1.0]
    if len(usable) < 4:
        raise ValueError("need at least 4 usable positive distances below 1")

    js = np.array([j for j, _ in usable], dtype=float)
    ys = np.array([np.log(-np.log(v)) for _, v in usable])
    slope, _ = np.polyfit(js, ys, 1)
    if envelope_constant is None:
        envelope_constant = cauchy_constant(schedule)

    env, j0 = [], None
    for j, v in enumerate(d, start=1):
        ok = v <= envelope_constant * float(schedule.eps_at(j))
        env.append(ok)
        j0 = j if (ok and j0 is None) else (j0 if ok else None)
    if j0 is None:
        j0 = len(d) + 1

    ratios = []
    for a, b in zip(d[:-1], d[1:]):
        if tiny < a < 1.0 and tiny < b < 1.0:
            ratios.append(float(np.log(b) / np.log(a)))
        else:
            ratios.append(float("nan"))

    return RateReport(
        distances=d,
        fitted_slope=float(slope),
        fitted_order=float(np.exp(slope)),
        envelope_pass=env,
        envelope_j0=j0,
        violations=sum(1 for ok in env if not ok),
        nstep_ratios=ratios,
        used_points=len(usable),
    )


def cauchy_constant(schedule, cutoff=1e-30, max_terms=100000):
    """C = sum_{l>=0} kappa^(Q^l - 1), truncated once terms drop below cutoff."""
    kappa = float(schedule.kappa)
    Q = float(schedule.order)
    total, Ql = 0.0, 1.0
    for _ in range(max_terms):
        term = kappa ** (Ql - 1.0)
        total += term
        if term < cutoff:
            break
        Ql *= Q
    return total
