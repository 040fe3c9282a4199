"""Max-of-Taylor-expansions model over a trust region.

A bundle is an ordered set of cuts (expansion centers with their jets)
collected inside a trust-region ball; the model value at z is the max of
the cut polynomials.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backend import FLOAT64, Float64Backend
from .tensors import TaylorJet, jet_eval, jet_gradient


class EmptyBundleError(ValueError):
    pass


class DuplicateCenterError(ValueError):
    """Solver returned an existing center; signals subproblem stagnation."""


@dataclass(frozen=True)
class TrustRegion:
    center: np.ndarray
    radius: object
    norm: str = "euclidean"  # "euclidean" | "max"

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("trust-region radius must be positive")
        if self.norm not in ("euclidean", "max"):
            raise ValueError(f"unknown norm {self.norm!r}")

    def distance(self, z, backend=FLOAT64):
        d = np.asarray(z) - self.center
        if self.norm == "max":
            return max(abs(v) for v in d)
        return backend.sqrt((d * d).sum())

    def contains(self, z, backend=FLOAT64, slack=1e-12):
        return self.distance(z, backend) <= self.radius * (1 + slack)


@dataclass(frozen=True)
class Cut:
    center: np.ndarray
    jet: TaylorJet
    flagged: bool = False


class Bundle:
    """Ordered, append-only list of cuts gathered in one trust region."""

    def __init__(self, region: TrustRegion, cuts=(), backend=FLOAT64):
        self.region = region
        self.backend = backend
        self.cuts = []
        self._cache = None
        for c in cuts:
            self.add_cut(c)

    def __len__(self):
        return len(self.cuts)

    def add_cut(self, cut: Cut):
        if not self.region.contains(cut.center, self.backend):
            raise ValueError("cut center lies outside the trust region")
        eps = self.region.radius
        for c in self.cuts:
            diff = np.asarray(cut.center) - c.center
            if max(abs(v) for v in diff) < 1e-14 * eps:
                raise DuplicateCenterError("duplicate cut center")
        self.cuts.append(cut)
        self._cache = None

    # --- fast path for float64 bundles whose jets all have degree <= 2 ----
    def _quad_arrays(self):
        if self._cache is None:
            ok = isinstance(self.backend, Float64Backend) and all(
                c.jet.degree <= 2 for c in self.cuts
            )
            if not ok:
                self._cache = False
            else:
                n = self.cuts[0].jet.dim
                Y = np.array([c.center for c in self.cuts], dtype=float)
                V = np.array([c.jet.value for c in self.cuts], dtype=float)
                G = np.array([c.jet.grad_vector() for c in self.cuts], dtype=float)
                H = np.array([c.jet.hess_matrix() for c in self.cuts], dtype=float)
                self._cache = (Y, V, G, H)
        return self._cache

    def cut_values(self, z):
        """Values of every cut polynomial at z."""
        if not self.cuts:
            raise EmptyBundleError("empty bundle")
        qa = self._quad_arrays()
        if qa is not False:
            Y, V, G, H = qa
            d = np.asarray(z, dtype=float) - Y
            return V + np.einsum("ki,ki->k", G, d) + 0.5 * np.einsum(
                "ki,kij,kj->k", d, H, d
            )
        return np.array([jet_eval(c.jet, z) for c in self.cuts])

    def cut_gradients(self, z):
        if not self.cuts:
            raise EmptyBundleError("empty bundle")
        qa = self._quad_arrays()
        if qa is not False:
            Y, V, G, H = qa
            d = np.asarray(z, dtype=float) - Y
            return G + np.einsum("kij,kj->ki", H, d)
        return np.array([jet_gradient(c.jet, z) for c in self.cuts])

    def gradients_at_centers(self):
        return [c.jet.grad_vector() for c in self.cuts]


def model_eval(bundle: Bundle, z):
    """Model value at z and the first cut index attaining it."""
    vals = bundle.cut_values(z)
    idx = 0
    best = vals[0]
    for k in range(1, len(vals)):
        if vals[k] > best:
            best, idx = vals[k], k
    return best, idx


def model_gap(problem, bundle: Bundle, z):
    """f(z) minus the model value at z (one objective evaluation)."""
    value, _ = model_eval(bundle, z)
    return problem.value_only(z) - value


def active_cuts(bundle: Bundle, z, tol_act=1e-8):
    """Indices of cuts within tol_act * (1 + |model value|) of the max at z."""
    vals = bundle.cut_values(z)
    best = max(vals)
    thr = tol_act * (1 + abs(best))
    return [k for k, v in enumerate(vals) if best - v <= thr]


def remainder_probe(problem, bundle: Bundle, sample_count, seed):
    """Max |f - model| over uniform trust-region samples (deterministic in seed)."""
    if sample_count < 1:
        raise ValueError("need sample_count >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    tr = bundle.region
    n = len(tr.center)
    worst = 0.0
    for _ in range(sample_count):
        if tr.norm == "max":
            z = tr.center + tr.radius * rng.uniform(-1.0, 1.0, size=n)
        else:
            v = rng.standard_normal(n)
            v /= np.linalg.norm(v)
            r = tr.radius * rng.uniform() ** (1.0 / n)
            z = tr.center + r * v
        value, _ = model_eval(bundle, z)
        err = abs(problem.value_only(z) - value)
        if err > worst:
            worst = err
    return worst


def bundle_dump(bundle: Bundle):
    """JSON-ready description of every cut (center and tensor coefficients)."""
    rows = []
    for c in bundle.cuts:
        rows.append(
            {
                "center": [float(v).hex() for v in np.asarray(c.center, dtype=float)],
                "degree": c.jet.degree,
                "flagged": c.flagged,
                "tensors": [
                    [float(v).hex() for v in np.asarray(t.coeffs, dtype=float)]
                    for t in c.jet.tensors
                ],
            }
        )
    return {
        "region": {
            "center": [float(v).hex() for v in np.asarray(bundle.region.center, dtype=float)],
            "radius": float(bundle.region.radius),
            "norm": bundle.region.norm,
        },
        "cuts": rows,
    }
