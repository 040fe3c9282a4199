"""Trust-region minimization of the cutting-plane model.

Three strategies:

* exact enumeration in one dimension (critical points of each cut,
  pairwise crossings, interval endpoints);
* an epigraph LP solved by a dense two-phase simplex for first-order
  models over a max-norm ball;
* log-sum-exp homotopy smoothing with multi-start projected descent for
  the general Euclidean case.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import dger as _dger

from .backend import FLOAT64, Float64Backend
from .model import Bundle, TrustRegion
from .poly1d import Poly1D, ZeroPolynomialError, poly_roots_in_interval
from .tensors import jet_restrict_1d

TOL_BND = 1e-6


class IncompatibleStrategyError(ValueError):
    pass


@dataclass
class SubproblemSolution:
    z: np.ndarray
    theta: object
    boundary_active: bool
    multipliers: object = None  # (indices, weights) over active cuts, or None
    degraded: bool = False
    stats: dict = field(default_factory=dict)


def _boundary_active(tr: TrustRegion, z, backend):
    return tr.distance(z, backend) >= tr.radius * (1 - TOL_BND)


def solve(bundle: Bundle, tr: TrustRegion, tol=None, strategy="auto", seed=0, refine=True):
    """Dispatch to a concrete strategy; "auto" picks by dimension/order/norm.

    `refine=False` lets the LP strategy skip its (slow) tie-break phase and
    return a vertex of the optimal face; other strategies ignore it.
    """
    n = len(tr.center)
    q = max(c.jet.degree for c in bundle.cuts)
    if strategy == "auto":
        if n == 1:
            strategy = "exact1d"
        elif q == 1 and tr.norm == "max":
            strategy = "lp"
        else:
            strategy = "smoothed"
    if strategy == "exact1d":
        if n != 1:
            raise IncompatibleStrategyError("exact1d requires n = 1")
        return solve_exact_1d(bundle, tr, tol)
    if strategy == "lp":
        if q != 1 or tr.norm != "max":
            raise IncompatibleStrategyError("lp requires q = 1 and max norm")
        return solve_lp_q1(bundle, tr, tol if tol is not None else 1e-9, refine=refine)
    if strategy == "smoothed":
        if tr.norm != "euclidean":
            raise IncompatibleStrategyError("smoothed requires the Euclidean norm")
        return solve_smoothed_multistart(
            bundle, tr, tol if tol is not None else 1e-9, seed=seed
        )
    raise IncompatibleStrategyError(f"unknown strategy {strategy!r}")


# ---------------------------------------------------------------------------
# exact enumeration, n = 1

def solve_exact_1d(bundle: Bundle, tr: TrustRegion, tol=None):
    be = bundle.backend
    x = tr.center[0]
    eps = tr.radius
    a, b = x - eps, x + eps
    if tol is None:
        # root bracket width near the backend's full working precision
        tol = (b - a) * be.eps * 2.0 ** 24

    polys = [jet_restrict_1d(c.jet) for c in bundle.cuts]
    candidates = [a, b]
    for p in polys:
        try:
            candidates += poly_roots_in_interval(p.derivative(), a, b, tol)
        except ZeroPolynomialError:
            pass  # constant cut: no interior critical point
    for i in range(len(polys)):
        for j in range(i + 1, len(polys)):
            try:
                candidates += poly_roots_in_interval(polys[i] - polys[j], a, b, tol)
            except ZeroPolynomialError:
                pass  # identical cut polynomials: no crossing information

    candidates.sort()
    best_z, best_v = None, None
    for z in candidates:
        v = max(p(z) for p in polys)
        if best_v is None or v < best_v:
            best_z, best_v = z, v
    zbar = np.array([best_z], dtype=object if not isinstance(be, Float64Backend) else float)
    if not isinstance(be, Float64Backend):
        zbar = np.array([best_z], dtype=object)
    boundary = _boundary_active(tr, zbar, be)
    mult = None
    if not boundary:
        from .diagnostics import min_norm_convex_hull

        vals = [p(best_z) for p in polys]
        thr = 1e-8 * (1 + abs(best_v))
        act = [k for k, v in enumerate(vals) if best_v - v <= thr]
        grads = [np.array([float(polys[k].derivative()(best_z))]) for k in act]
        _, w = min_norm_convex_hull(grads, tol=1e-12)
        mult = (act, w)
    return SubproblemSolution(
        z=zbar,
        theta=best_v,
        boundary_active=bool(boundary),
        multipliers=mult,
        stats={"candidates": len(candidates)},
    )


# ---------------------------------------------------------------------------
# dense two-phase simplex for the q = 1 / max-norm epigraph LP

def _simplex(A, b, c, maxit=200000):
    """min c x s.t. A x = b (b >= 0), x >= 0; two-phase dense tableau.

    Pricing is Dantzig's rule, falling back to Bland's rule after a run of
    degenerate pivots to guarantee termination.  Returns
    (x, basis, reduced_costs, objective, duals).
    """
    m, n = A.shape
    tol = 1e-9 * (1 + np.abs(A).max() + np.abs(b).max())

    # phase 1 tableau with artificials (Fortran order: the rank-1 pivot
    # update and the column reads in the ratio test are the hot path)
    T = np.zeros((m + 1, n + m + 1), order="F")
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(n, n + m))
    # phase-1 cost: sum of artificials, expressed in reduced form
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()

    def pivot(r, col):
        T[r] = T[r] / T[r, col]
        colvals = T[:, col].copy()
        colvals[r] = 0.0
        _dger(-1.0, colvals, T[r].copy(), a=T, overwrite_a=1)
        T[:, col] = 0.0
        T[r, col] = 1.0
        basis[r] = col

    def run(ncols):
        bland, stall = False, 0
        for _ in range(maxit):
            rc = T[m, :ncols]
            if bland:
                cand = np.nonzero(rc < -tol)[0]
                if len(cand) == 0:
                    return
                col = int(cand[0])
            else:
                col = int(np.argmin(rc))
                if rc[col] >= -tol:
                    return
            colv = T[:m, col]
            pos = colv > tol
            if not pos.any():
                raise RuntimeError("LP unbounded")
            ratios = np.where(pos, T[:m, -1] / np.where(pos, colv, 1.0), np.inf)
            best = ratios.min()
            ties = np.nonzero(ratios <= best + tol)[0]
            r = int(min(ties, key=lambda i: basis[i])) if bland else int(ties[0])
            obj_before = T[m, -1]
            pivot(r, col)
            if not bland:
                stall = stall + 1 if T[m, -1] >= obj_before - tol else 0
                if stall > 2 * (m + ncols):
                    bland = True
        raise RuntimeError("simplex iteration limit")

    run(n + m)
    if T[m, -1] < -1e-7 * (1 + np.abs(b).sum()):
        raise RuntimeError("LP infeasible (phase 1)")
    # drive remaining artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= n:
            for j in range(n):
                if abs(T[i, j]) > tol:
                    pivot(i, j)
                    break

    # phase 2
    T[m, :] = 0.0
    T[m, :n] = c
    for i in range(m):
        if basis[i] < n:
            T[m] -= c[basis[i]] * T[i]
    T[m, n : n + m] = -T[m, n : n + m]  # keep artificial columns non-entering
    Tart = T[:, n : n + m].copy()
    run(n)

    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i, -1]
    # duals: pi = -reduced cost of the artificial (identity) columns
    pi = -T[m, n : n + m]
    return x, basis, T[m, :n].copy(), -T[m, -1], pi


def solve_lp_q1(bundle: Bundle, tr: TrustRegion, tol=1e-9, refine=True):
    n = len(tr.center)
    K = len(bundle)
    x = np.asarray(tr.center, dtype=float)
    eps = float(tr.radius)
    lower = x - eps
    V = np.array([float(c.jet.value) for c in bundle.cuts])
    Y = np.array([np.asarray(c.center, dtype=float) for c in bundle.cuts])
    G = np.array([np.asarray(c.jet.grad_vector(), dtype=float) for c in bundle.cuts])

    # cut value at the box's lower corner, and a lower bound L for theta
    corner_vals = V + np.einsum("ki,ki->k", G, lower - Y)
    L = float((V + G @ x - np.einsum("ki,ki->k", G, Y) - eps * np.abs(G).sum(axis=1)).min())

    # variables: u (n), w (n), s (K), t (1)
    nv = 2 * n + K + 1
    A = np.zeros((K + n, nv))
    b = np.zeros(K + n)
    for k in range(K):
        A[k, :n] = G[k]
        A[k, 2 * n + k] = 1.0
        A[k, -1] = -1.0
        b[k] = L - corner_vals[k]
    for i in range(n):
        A[K + i, i] = 1.0
        A[K + i, n + i] = 1.0
        b[K + i] = 2 * eps
    c = np.zeros(nv)
    c[-1] = 1.0

    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    sign = np.where(neg[:K], -1.0, 1.0)

    xsol, basis, rc, obj, pi = _simplex(A, b, c)
    theta = L + xsol[-1]
    vertex_z = lower + xsol[:n]

    if not refine:
        z = vertex_z
        boundary = _boundary_active(tr, z, FLOAT64)
        lam = np.maximum(-(pi[:K] * sign), 0.0)
        mult = None
        if lam.sum() > 0:
            lam = lam / lam.sum()
            act = [k for k in range(K) if lam[k] > 1e-12]
            mult = (act, lam[act])
        return SubproblemSolution(
            z=z,
            theta=float(theta),
            boundary_active=bool(boundary),
            multipliers=mult,
            stats={"cuts": K, "refined": False},
        )

    # tie-break on the (possibly huge) optimal face: among near-optimal z,
    # minimize the max-norm step from the trust-region center
    face_tol = 1e-9 * (1 + abs(theta))
    # variables: u (n), w (n), s (K), rho (1), sl (n), su (n)
    nv2 = 2 * n + K + 1 + 2 * n
    m2 = K + n + 2 * n
    A2 = np.zeros((m2, nv2))
    b2 = np.zeros(m2)
    for k in range(K):
        A2[k, :n] = G[k]
        A2[k, 2 * n + k] = 1.0
        b2[k] = theta + face_tol - corner_vals[k]
    for i in range(n):
        A2[K + i, i] = 1.0
        A2[K + i, n + i] = 1.0
        b2[K + i] = 2 * eps
    rho = 2 * n + K
    for i in range(n):
        # u_i - rho + sl_i = eps  (z_i - x_i <= rho)
        A2[K + n + i, i] = 1.0
        A2[K + n + i, rho] = -1.0
        A2[K + n + i, rho + 1 + i] = 1.0
        b2[K + n + i] = eps
        # u_i + rho - su_i = eps  (x_i - z_i <= rho)
        A2[K + 2 * n + i, i] = 1.0
        A2[K + 2 * n + i, rho] = 1.0
        A2[K + 2 * n + i, rho + 1 + n + i] = -1.0
        b2[K + 2 * n + i] = eps
    c2 = np.zeros(nv2)
    c2[rho] = 1.0
    neg2 = b2 < 0
    A2[neg2] *= -1.0
    b2[neg2] *= -1.0
    xsol2, *_ = _simplex(A2, b2, c2)
    xsol = xsol2
    z = lower + xsol[:n]
    boundary = _boundary_active(tr, z, FLOAT64)
    lam = np.maximum(-(pi[:K] * sign), 0.0)
    mult = None
    if lam.sum() > 0:
        lam = lam / lam.sum()
        act = [k for k in range(K) if lam[k] > 1e-12]
        mult = (act, lam[act])
    return SubproblemSolution(
        z=z,
        theta=float(theta),
        boundary_active=bool(boundary),
        multipliers=mult,
        stats={"cuts": K, "refined": True},
    )


# ---------------------------------------------------------------------------
# log-sum-exp homotopy with multi-start projected descent (Euclidean ball)

def _project_ball(Z, x, eps):
    d = Z - x
    nrm = np.linalg.norm(d, axis=-1, keepdims=True)
    scale = np.where(nrm > eps, eps / np.maximum(nrm, 1e-300), 1.0)
    return x + d * scale


def solve_smoothed_multistart(
    bundle: Bundle,
    tr: TrustRegion,
    tol=1e-9,
    seed=0,
    n_rand=None,
    max_stages=14,
    max_inner=120,
):
    if not isinstance(bundle.backend, Float64Backend):
        raise IncompatibleStrategyError("smoothed solver runs in binary64")
    n = len(tr.center)
    x = np.asarray(tr.center, dtype=float)
    eps = float(tr.radius)
    K = len(bundle)
    if n_rand is None:
        n_rand = 2 * n

    qa = bundle._quad_arrays()

    if qa is not False:
        Y, V, G, H = qa
        pure_linear = not np.any(H)
        # cut k at z: V_k + G_k.(z - Y_k) + 0.5 (z - Y_k) H_k (z - Y_k);
        # expand around z so each batch needs one matmul / tensordot
        YG = (Y * G).sum(axis=1)
        if not pure_linear:
            HY = np.einsum("kij,kj->ki", H, Y)
            cY = 0.5 * (Y * HY).sum(axis=1)

        def _hz(Z):
            # (S, K, n) with entry [s, k] = H_k z_s (H symmetric)
            return np.tensordot(Z, H, axes=(1, 2))

        def batch_vals(Z, hz=None):
            vals = V[None, :] + Z @ G.T - YG[None, :]
            if not pure_linear:
                if hz is None:
                    hz = _hz(Z)
                vals += 0.5 * (hz * Z[:, None, :]).sum(axis=2) - Z @ HY.T + cY[None, :]
            return vals

        def batch_grads(Z, hz=None):
            if pure_linear:
                return np.broadcast_to(G[None, :, :], (len(Z),) + G.shape).copy()
            if hz is None:
                hz = _hz(Z)
            return G[None, :, :] + hz - HY[None, :, :]

    else:

        def batch_vals(Z, hz=None):
            return np.array([bundle.cut_values(z) for z in Z])

        def batch_grads(Z, hz=None):
            return np.array([bundle.cut_gradients(z) for z in Z])

        def _hz(Z):
            return None

    def phi(Z, t):
        vals = batch_vals(Z)
        M = vals.max(axis=1)
        w = np.exp((vals - M[:, None]) / t)
        s = w.sum(axis=1)
        return M + t * np.log(s), w / s[:, None]

    def phi_grad(Z, t):
        hz = _hz(Z) if qa is not False and not pure_linear else None
        vals = batch_vals(Z, hz)
        M = vals.max(axis=1)
        w = np.exp((vals - M[:, None]) / t)
        s = w.sum(axis=1)
        f = M + t * np.log(s)
        w = w / s[:, None]
        g = np.einsum("sk,ski->si", w, batch_grads(Z, hz))
        return f, g, w

    rng = np.random.Generator(np.random.Philox(seed))
    starts = [np.asarray(c.center, dtype=float) for c in bundle.cuts]
    starts.append(x.copy())
    for _ in range(n_rand):
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        starts.append(x + eps * rng.uniform() ** (1.0 / n) * v)
    Z = _project_ball(np.array(starts), x, eps)
    S = len(Z)

    vals0 = batch_vals(np.array([x]))
    spread = float(vals0.max() - vals0.min())
    t0 = max(eps, spread, 1e-12)
    theta_guess = float(batch_vals(Z).max(axis=1).min())
    t_min = max(tol, 1e-12) * (1.0 + abs(theta_guess))
    n_stages = 1
    while t0 / 10.0 ** (n_stages - 1) > t_min and n_stages < 60:
        n_stages += 1
    degraded = n_stages > max_stages
    n_stages = min(n_stages, max_stages)

    alpha = np.full(S, eps)
    total_inner = 0
    last_dir = np.zeros_like(Z)
    t = t0
    for stage in range(n_stages):
        f, g, _ = phi_grad(Z, t)
        prev_z, prev_g = None, None
        for _ in range(max_inner):
            total_inner += 1
            # Barzilai-Borwein step proposal, safeguarded by backtracking
            if prev_z is not None:
                dz = Z - prev_z
                dg = g - prev_g
                num = np.einsum("si,si->s", dz, dg)
                den = np.einsum("si,si->s", dg, dg)
                ok = (den > 1e-300) & (num > 0)
                alpha = np.where(ok, num / np.maximum(den, 1e-300), alpha)
            alpha = np.clip(alpha, 1e-14 * eps, 1e6 * eps + 1e6)
            prev_z, prev_g = Z, g
            accepted = np.zeros(S, dtype=bool)
            cand = Z.copy()
            fc = f.copy()
            a = alpha.copy()
            for _ in range(40):
                trial = _project_ball(Z - a[:, None] * g, x, eps)
                ft, _ = phi(trial, t)
                better = ~accepted & (ft <= f + 1e-12 * (1 + np.abs(f)))
                cand[better] = trial[better]
                fc[better] = ft[better]
                accepted |= better
                if accepted.all():
                    break
                a = np.where(accepted, a, a / 4.0)
            alpha = np.where(accepted, np.maximum(a, 1e-14 * eps), alpha)
            step = cand - Z
            last_dir = np.where(
                (np.abs(step).max(axis=1) > 0)[:, None], step, last_dir
            )
            Z = cand
            f, g, _ = phi_grad(Z, t)
            if np.abs(step).max() <= 1e-3 * t + 1e-15 * (1 + eps):
                break
        t = max(t / 10.0, t_min)

    # polish on the true (non-smoothed) model along the last descent direction
    true_vals = batch_vals(Z).max(axis=1)
    for factor in (1.0, 0.5, 0.25, 0.1, 0.01):
        trial = _project_ball(Z + factor * last_dir, x, eps)
        tv = batch_vals(trial).max(axis=1)
        better = tv < true_vals
        Z[better] = trial[better]
        true_vals[better] = tv[better]

    # never return worse than a probed start
    start_arr = _project_ball(np.array(starts), x, eps)
    start_vals = batch_vals(start_arr).max(axis=1)
    all_Z = np.vstack([Z, start_arr])
    all_v = np.concatenate([true_vals, start_vals])
    order = np.lexsort(np.vstack([all_Z.T[::-1], all_v]))
    best = order[0]
    zbar = all_Z[best]
    theta = float(all_v[best])

    boundary = _boundary_active(tr, zbar, FLOAT64)
    mult = None
    if not boundary:
        vals = batch_vals(zbar[None])[0]
        M = vals.max()
        w = np.exp((vals - M) / t_min)
        thr = 1e-8 * (1 + abs(M))
        act = [k for k in range(K) if M - vals[k] <= thr]
        wact = w[act]
        mult = (act, wact / wact.sum())
    return SubproblemSolution(
        z=zbar,
        theta=theta,
        boundary_active=bool(boundary),
        multipliers=mult,
        degraded=degraded,
        stats={"starts": S, "stages": n_stages, "inner_iterations": total_inner},
    )
