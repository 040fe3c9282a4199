"""Test problems with analytic derivative oracles.

Each problem exposes a value-only evaluation and an oracle returning the
Taylor jet of the branch that attains the max at the query point (ties
broken by smallest index).  Non-smooth query points are answered with a
flagged response rather than an error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .backend import FLOAT64, Float64Backend
from .tensors import SymTensor, TaylorJet, jet_from_derivatives, multi_indices


@dataclass(frozen=True)
class OracleResponse:
    value: object
    jet: TaylorJet
    flagged: bool = False


@dataclass
class Problem:
    name: str
    dim: int
    oracle: object            # (x, q) -> OracleResponse
    value_only: object        # x -> scalar
    xstar: object = None      # known minimizer, or None
    fstar: object = None
    growth_order: int = 1
    selection_count: object = None  # int or None for infinite
    max_q: int = 2
    backend: object = FLOAT64
    instance: dict = field(default_factory=dict)

    def check_q(self, q):
        if q < 1 or q > self.max_q:
            raise ValueError(f"{self.name} supports 1 <= q <= {self.max_q}, got {q}")


# ---------------------------------------------------------------------------
# max-root: f(x) = max_i sqrt(|x_i| + 1/4) - 1/2, minimum 0 at the origin

def _sqrt_branch_derivatives(u, m, be):
    """m-th derivative of t -> sqrt(t + 1/4) at t = u."""
    c = be.from_float(0.5)
    base = be.sqrt(u + be.from_float(0.25))
    # (1/2)(1/2-1)...(1/2-m+1) * (u+1/4)^(1/2-m)
    coeff = be.from_float(1.0)
    for k in range(m):
        coeff = coeff * (c - k)
    return coeff * base / (u + be.from_float(0.25)) ** m


def problem_maxroot(n, backend=FLOAT64):
    """Finite max-type test function with 2n selection branches and a sharp minimum."""
    be = backend
    half = be.from_float(0.5)
    quarter = be.from_float(0.25)

    def stable_value(a):
        # sqrt(a + 1/4) - 1/2 without cancellation for tiny a
        return a / (be.sqrt(a + quarter) + half)

    def active_index(x):
        best, besta = 0, abs(x[0])
        for i in range(1, n):
            if abs(x[i]) > besta:
                best, besta = i, abs(x[i])
        return best, besta

    def value_only(x):
        _, a = active_index(x)
        return stable_value(a)

    def oracle(x, q):
        prob.check_q(q)
        i, a = active_index(x)
        s = -1.0 if x[i] < 0 else 1.0
        val = stable_value(a)
        tensors = [SymTensor(0, n, np.array([val], dtype=_dtype(be)))]
        base = be.from_float(1.0)  # s^m accumulator
        for m in range(1, q + 1):
            base = base * s
            d = _sqrt_branch_derivatives(a, m, be) * base
            t = SymTensor.zeros(m, n, dtype=_dtype(be))
            # only the pure i...i multi-index is nonzero
            pure = tuple([i] * m)
            t.coeffs[multi_indices(n, m).index(pure)] = d
            tensors.append(t)
        jet = TaylorJet(np.asarray(x), q, tuple(tensors))
        return OracleResponse(val, jet, flagged=False)

    prob = Problem(
        name="maxroot",
        dim=n,
        oracle=oracle,
        value_only=value_only,
        xstar=np.array([be.from_float(0.0)] * n, dtype=_dtype(be)),
        fstar=be.from_float(0.0),
        growth_order=1,
        selection_count=2 * n,
        max_q=5,
        backend=be,
        instance={"problem": "maxroot", "n": n},
    )
    return prob


def _dtype(be):
    return float if isinstance(be, Float64Backend) else object


# ---------------------------------------------------------------------------
# sum of absolute values of quartic terms (finite max-type, |S| = 2^m)

def generate_sumabs_instance(seed, n, m):
    """Random instance: vectors g_i in a zero convex combination, SPD H_i, c_i > 0."""
    if not 1 <= m <= n + 1:
        raise ValueError("need 1 <= m <= n + 1")
    rng = np.random.Generator(np.random.Philox(seed))
    for _ in range(100):
        lam = rng.uniform(0.5, 1.5, size=m)
        lam = lam / lam.sum()
        g = rng.standard_normal((m, n))
        if m >= 2:
            g[m - 1] = -(lam[:-1] @ g[:-1]) / lam[m - 1]
        else:
            g[0] = np.zeros(n)
        # affine independence: rank of differences to the last vector
        if m >= 2:
            diffs = g[:-1] - g[-1]
            sv = np.linalg.svd(diffs, compute_uv=False)
            scale = max(np.abs(g).max(), 1.0)
            if sv.min() <= 1e-10 * scale:
                continue
        H = np.empty((m, n, n))
        for i in range(m):
            Q = rng.standard_normal((n, n))
            H[i] = Q.T @ Q + 0.1 * np.eye(n)
        c = rng.uniform(0.5, 1.5, size=m)
        return {
            "problem": "sumabs",
            "seed": int(seed),
            "n": n,
            "m": m,
            "lam": lam,
            "g": g,
            "H": H,
            "c": c,
        }
    raise RuntimeError("instance generation failed repeatedly (rank test)")


def _norm4_tensor3(x, factor):
    """Order-3 tensor of z -> factor * ||z||^4 at x."""
    n = len(x)
    t = SymTensor.zeros(3, n)
    for e, (a, b, c) in enumerate(multi_indices(n, 3)):
        v = 0.0
        if b == c:
            v += x[a]
        if a == c:
            v += x[b]
        if a == b:
            v += x[c]
        t.coeffs[e] = 8.0 * factor * v
    return t


def _norm4_tensor4(n, factor):
    """Order-4 tensor of z -> factor * ||z||^4 (constant in x)."""
    t = SymTensor.zeros(4, n)
    for e, (a, b, c, d) in enumerate(multi_indices(n, 4)):
        v = 0.0
        if a == b and c == d:
            v += 1.0
        if a == c and b == d:
            v += 1.0
        if a == d and b == c:
            v += 1.0
        t.coeffs[e] = 8.0 * factor * v
    return t


def problem_sumabs(instance):
    n, m = instance["n"], instance["m"]
    g, H, c = instance["g"], instance["H"], instance["c"]

    def terms(x):
        nx2 = float(x @ x)
        return g @ x + 0.5 * np.einsum("i,kij,j->k", x, H, x) + (c / 24.0) * nx2 * nx2

    def value_only(x):
        return float(np.abs(terms(x)).sum())

    def oracle(x, q):
        prob.check_q(q)
        x = np.asarray(x, dtype=float)
        t = terms(x)
        s = np.where(t < 0, -1.0, 1.0)
        val = float(np.abs(t).sum())
        nx2 = float(x @ x)
        grad = s @ (g + np.einsum("kij,j->ki", H, x) + np.outer(c / 6.0 * nx2, x))
        hess = None
        if q >= 2:
            hess = np.einsum("k,kij->ij", s, H) + (s @ c) / 6.0 * (
                nx2 * np.eye(n) + 2.0 * np.outer(x, x)
            )
        higher = []
        if q >= 3:
            higher.append(_norm4_tensor3(x, (s @ c) / 24.0))
        if q >= 4:
            higher.append(_norm4_tensor4(n, (s @ c) / 24.0))
        jet = jet_from_derivatives(x, val, grad, hess if q >= 2 else None, higher)
        return OracleResponse(val, jet, flagged=bool(np.any(t == 0.0)))

    prob = Problem(
        name="sumabs",
        dim=n,
        oracle=oracle,
        value_only=value_only,
        xstar=np.zeros(n),
        fstar=0.0,
        growth_order=2,
        selection_count=2 ** m,
        max_q=4,
        instance=instance,
    )
    return prob


# ---------------------------------------------------------------------------
# largest-eigenvalue minimization (infinite selection set)

def generate_maxeig_instance(seed, n, m):
    """Random symmetric matrices A_0..A_n of size m x m, A_0 shifted so f(0) = 1."""
    rng = np.random.Generator(np.random.Philox(seed))
    A = np.empty((n + 1, m, m))
    for i in range(n + 1):
        M = rng.standard_normal((m, m))
        A[i] = 0.5 * (M + M.T)
    mu = np.linalg.eigvalsh(A[0])[-1] - 1.0
    A[0] -= mu * np.eye(m)
    return {"problem": "maxeig", "seed": int(seed), "n": n, "m": m, "A": A}


def problem_maxeig(instance):
    n, msz = instance["n"], instance["m"]
    A = instance["A"]

    def matrix_at(x):
        return A[0] + np.einsum("i,ijk->jk", x, A[1:])

    def value_only(x):
        return float(np.linalg.eigvalsh(matrix_at(x))[-1])

    def oracle(x, q):
        prob.check_q(q)
        x = np.asarray(x, dtype=float)
        M = matrix_at(x)
        lams, U = np.linalg.eigh(M)
        lam1 = lams[-1]
        u1 = U[:, -1]
        scale = max(np.abs(lams).max(), 1.0)
        gap = lam1 - lams[-2] if msz > 1 else np.inf
        flagged = gap < 1e-12 * scale
        Au1 = np.einsum("ijk,k->ij", A[1:], u1)  # (n, m)
        grad = Au1 @ u1
        hess = None
        if q >= 2:
            hess = np.zeros((n, n))
            # cross terms with the non-degenerate part of the spectrum
            cross = Au1 @ U[:, :-1]  # (n, m-1): u1^T A_i u_k
            denom = lam1 - lams[:-1]
            keep = denom > 1e-12 * scale
            if np.any(keep):
                hess = 2.0 * (cross[:, keep] / denom[keep]) @ cross[:, keep].T
        jet = jet_from_derivatives(x, float(lam1), grad, hess if q >= 2 else None)
        return OracleResponse(float(lam1), jet, flagged=bool(flagged))

    prob = Problem(
        name="maxeig",
        dim=n,
        oracle=oracle,
        value_only=value_only,
        xstar=None,
        fstar=None,
        growth_order=2,
        selection_count=None,
        max_q=2,
        instance=instance,
    )
    return prob


# ---------------------------------------------------------------------------
# Half-and-half: sqrt(x'Ax) + x'Bx on R^8

def problem_halfhalf():
    n = 8
    a_diag = np.array([1.0 if i % 2 == 0 else 0.0 for i in range(n)])  # indices 1,3,5,7 (1-based)
    b_diag = np.array([1.0 / (i + 1) ** 2 for i in range(n)])

    def value_only(x):
        return float(math.sqrt(float(a_diag @ (x * x))) + b_diag @ (x * x))

    def oracle(x, q):
        prob.check_q(q)
        x = np.asarray(x, dtype=float)
        quad_a = float(a_diag @ (x * x))
        if quad_a == 0.0:
            # A-null direction (or the origin): fall back to the smooth branch x'Bx
            val = float(b_diag @ (x * x))
            grad = 2.0 * b_diag * x
            hess = 2.0 * np.diag(b_diag) if q >= 2 else None
            return OracleResponse(val, jet_from_derivatives(x, val, grad, hess), flagged=True)
        s = math.sqrt(quad_a)
        val = s + float(b_diag @ (x * x))
        ax = a_diag * x
        grad = ax / s + 2.0 * b_diag * x
        hess = None
        if q >= 2:
            hess = np.diag(a_diag) / s - np.outer(ax, ax) / s ** 3 + 2.0 * np.diag(b_diag)
        return OracleResponse(val, jet_from_derivatives(x, val, grad, hess), flagged=False)

    prob = Problem(
        name="halfhalf",
        dim=n,
        oracle=oracle,
        value_only=value_only,
        xstar=np.zeros(n),
        fstar=0.0,
        growth_order=2,
        selection_count=None,
        max_q=2,
        instance={"problem": "halfhalf"},
    )
    return prob


# ---------------------------------------------------------------------------
# one-dimensional three-branch demo function

def _threebranch_branches(x, s):
    """Values and derivatives (up to order 3) of the three branches at x.

    s is the sign branch used for |x|; valid away from x = 0 for orders >= 2.
    """
    u = s * x  # |x|
    r = math.sqrt(u) if u > 0 else 0.0
    b1 = -((x + 0.5) ** 2) + 0.25 * u * r + 0.5
    b2 = x ** 2 + 0.5 * u * r - 0.25
    b3 = -1.0 / (u + 0.25) + 2.0
    vals = (b1, b2, b3)

    def derivs(idx, q):
        out = []
        if idx == 0:
            d = [-2.0 * (x + 0.5) + 0.25 * 1.5 * s * r,
                 -2.0 + 0.25 * 0.75 / r if r > 0 else -2.0,
                 -0.25 * 0.375 * s / r ** 3 if r > 0 else 0.0]
        elif idx == 1:
            d = [2.0 * x + 0.5 * 1.5 * s * r,
                 2.0 + 0.5 * 0.75 / r if r > 0 else 2.0,
                 -0.5 * 0.375 * s / r ** 3 if r > 0 else 0.0]
        else:
            d = [s / (u + 0.25) ** 2,
                 -2.0 / (u + 0.25) ** 3,
                 6.0 * s / (u + 0.25) ** 4]
        return d[:q]

    return vals, derivs


def problem_threebranch():
    def value_only(x):
        v, _ = _threebranch_branches(float(x[0]), 1.0 if x[0] >= 0 else -1.0)
        return max(v)

    def oracle(x, q):
        prob.check_q(q)
        x0 = float(x[0])
        s = 1.0 if x0 >= 0 else -1.0
        vals, derivs = _threebranch_branches(x0, s)
        idx = int(np.argmax(vals))  # ties: listed order
        val = vals[idx]
        d = derivs(idx, q)
        tensors = [SymTensor(0, 1, np.array([val]))]
        for m in range(1, q + 1):
            tensors.append(SymTensor(m, 1, np.array([d[m - 1]])))
        jet = TaylorJet(np.array([x0]), q, tuple(tensors))
        return OracleResponse(val, jet, flagged=(x0 == 0.0 and q >= 2))

    prob = Problem(
        name="threebranch",
        dim=1,
        oracle=oracle,
        value_only=value_only,
        xstar=None,
        fstar=None,
        growth_order=1,
        selection_count=6,
        max_q=3,
        instance={"problem": "threebranch"},
    )
    return prob


# ---------------------------------------------------------------------------
# finite-difference verification and instance serialization

def finite_difference_check(problem, x, q, h=1e-6, h2=5e-4):
    """Relative errors of oracle tensors (orders 1..min(q,2)) vs central differences.

    Separate steps for gradient (h) and Hessian (h2): second differences
    lose ~eps/h^2 to roundoff, so the Hessian step must be much larger.
    """
    x = np.asarray(x, dtype=float)
    resp = problem.oracle(x, q)
    f = problem.value_only
    n = problem.dim
    report = {"flagged": resp.flagged, "orders": {}}

    g = resp.jet.grad_vector().astype(float)
    fd_g = np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fd_g[i] = (f(x + e) - f(x - e)) / (2 * h)
    scale = max(np.abs(g).max(), 1.0)
    report["orders"][1] = float(np.abs(fd_g - g).max() / scale)

    if q >= 2:
        H = resp.jet.hess_matrix().astype(float)
        fd_H = np.empty((n, n))
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = h2
            fd_H[i, i] = (f(x + ei) - 2 * f(x) + f(x - ei)) / h2 ** 2
            for j in range(i + 1, n):
                ej = np.zeros(n)
                ej[j] = h2
                fd_H[i, j] = fd_H[j, i] = (
                    f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
                ) / (4 * h2 ** 2)
        scale = max(np.abs(H).max(), 1.0)
        report["orders"][2] = float(np.abs(fd_H - H).max() / scale)
    return report


def _encode(obj):
    if isinstance(obj, np.ndarray):
        return {"__array__": obj.shape, "hex": [float(v).hex() for v in obj.ravel()]}
    return obj


def save_instance(instance, path):
    """Write an instance dict as JSON with bit-exact hex floats."""
    doc = {k: _encode(v) for k, v in instance.items()}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_instance(path):
    with open(path) as fh:
        doc = json.load(fh)
    out = {}
    for k, v in doc.items():
        if isinstance(v, dict) and "__array__" in v:
            arr = np.array([float.fromhex(h) for h in v["hex"]])
            out[k] = arr.reshape(v["__array__"])
        else:
            out[k] = v
    return out


_BUILDERS = {
    "maxroot": lambda inst, backend=FLOAT64: problem_maxroot(inst["n"], backend),
    "sumabs": lambda inst, backend=FLOAT64: problem_sumabs(inst),
    "maxeig": lambda inst, backend=FLOAT64: problem_maxeig(inst),
    "halfhalf": lambda inst, backend=FLOAT64: problem_halfhalf(),
    "threebranch": lambda inst, backend=FLOAT64: problem_threebranch(),
}


def problem_from_instance(instance, backend=FLOAT64):
    name = instance["problem"]
    if name not in _BUILDERS:
        raise ValueError(f"unknown problem {name!r}")
    return _BUILDERS[name](instance, backend)


def list_problems():
    return sorted(_BUILDERS)
