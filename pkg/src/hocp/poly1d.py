"""Univariate polynomials and real-root isolation on an interval.

Coefficients are stored in ascending order and may be floats or mpf
values from a bigfloat backend.  Root isolation uses a Sturm sequence to
count roots, recursive subdivision to separate them, and safeguarded
bisection/Newton refinement to the requested width.
"""

from __future__ import annotations


class ZeroPolynomialError(ValueError):
    """Raised when a (numerically) zero polynomial is handed to the root finder."""


class Poly1D:
    """Dense univariate polynomial, ascending coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        coeffs = list(coeffs)
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        if not coeffs:
            coeffs = [0.0]
        self.coeffs = coeffs

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def is_zero(self, tol=0.0):
        return all(abs(c) <= tol for c in self.coeffs)

    def __call__(self, x):
        acc = self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            acc = acc * x + c
        return acc

    def derivative(self):
        if self.degree == 0:
            return Poly1D([0.0 * self.coeffs[0]])
        return Poly1D([k * c for k, c in enumerate(self.coeffs) if k > 0])

    def __sub__(self, other):
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + [0.0] * (n - len(self.coeffs))
        b = other.coeffs + [0.0] * (n - len(other.coeffs))
        return Poly1D([x - y for x, y in zip(a, b)])

    def scale(self, s):
        return Poly1D([c * s for c in self.coeffs])

    def max_coeff(self):
        return max(abs(c) for c in self.coeffs)

    def __repr__(self):
        return f"Poly1D({self.coeffs})"


def poly_shift(p: Poly1D, y):
    """Coefficients of z -> p(z - y), i.e. recenter from (z - y) powers to z."""
    out = [p.coeffs[-1]]
    for c in reversed(p.coeffs[:-1]):
        # Horner step: out <- out * (z - y) + c
        new = [0.0] * (len(out) + 1)
        for k, v in enumerate(out):
            new[k + 1] = new[k + 1] + v
            new[k] = new[k] - y * v
        new[0] = new[0] + c
        out = new
    return Poly1D(out)


def _polydiv(a, b, zero_tol):
    """Remainder of a / b with near-zero coefficient trimming."""
    r = list(a.coeffs)
    bc = b.coeffs
    db = len(bc) - 1
    lead = bc[-1]
    while len(r) - 1 >= db and any(abs(c) > zero_tol for c in r):
        k = len(r) - 1 - db
        f = r[-1] / lead
        for i in range(db + 1):
            r[k + i] = r[k + i] - f * bc[i]
        r.pop()
        while len(r) > 1 and abs(r[-1]) <= zero_tol:
            r.pop()
    return Poly1D(r)


def sturm_chain(p: Poly1D):
    """Sturm sequence of p, ending when the remainder is numerically zero."""
    scale = p.max_coeff()
    zero_tol = scale * (1e-30 if isinstance(scale, float) else 0)
    chain = [p, p.derivative()]
    while chain[-1].degree > 0:
        rem = _polydiv(chain[-2], chain[-1], zero_tol)
        if rem.is_zero(zero_tol):
            break
        chain.append(rem.scale(-1))
    return chain


def _variations(chain, x):
    signs = []
    for q in chain:
        v = q(x)
        if v > 0:
            signs.append(1)
        elif v < 0:
            signs.append(-1)
    count = 0
    for a, b in zip(signs, signs[1:]):
        if a != b:
            count += 1
    return count


def _count_roots(chain, a, b):
    return _variations(chain, a) - _variations(chain, b)


def _refine_sign_change(p, a, b, fa, fb, tol, newton_from=40):
    """Bracketed root refinement: bisection, switching to Newton once narrow."""
    dp = p.derivative()
    it = 0
    while (b - a) > tol:
        it += 1
        m = (a + b) / 2
        if it > newton_from:
            # Newton polish from the midpoint, accepted only inside the bracket
            d = dp(m)
            if d != 0:
                cand = m - p(m) / d
                if a < cand < b:
                    # verify convergence by re-bracketing around cand
                    h = (b - a) / 4
                    lo, hi = max(a, cand - h), min(b, cand + h)
                    flo, fhi = p(lo), p(hi)
                    if (flo > 0) != (fhi > 0):
                        a, b, fa, fb = lo, hi, flo, fhi
                        continue
        fm = p(m)
        if fm == 0:
            return m
        if (fa > 0) != (fm > 0):
            b, fb = m, fm
        else:
            a, fa = m, fm
    return (a + b) / 2


def _refine_by_count(chain, a, b, tol):
    """Refine an isolating interval by Sturm counts (handles even multiplicity)."""
    p = chain[0]
    while (b - a) > tol:
        m = (a + b) / 2
        if p(m) == 0:
            return m
        if _count_roots(chain, a, m) >= 1:
            b = m
        else:
            a = m
    return (a + b) / 2


def poly_roots_in_interval(p: Poly1D, a, b, tol):
    """All real roots of p in [a, b], each located to width <= tol.

    Roots closer than tol are merged to their midpoint.  Raises
    ZeroPolynomialError for the zero polynomial.
    """
    if not a < b:
        raise ValueError("need a < b")
    if tol <= 0:
        raise ValueError("need tol > 0")
    scale = p.max_coeff()
    if scale == 0:
        raise ZeroPolynomialError("zero polynomial has no isolated roots")
    p = p.scale(1 / scale)
    if p.degree == 0:
        return []
    if p.degree == 1:
        r = -p.coeffs[0] / p.coeffs[1]
        return [r] if a <= r <= b else []

    chain = sturm_chain(p)
    roots = []

    # Sturm counting requires nonzero endpoint values; absorb endpoint roots.
    lo, hi = a, b
    nudge = tol / 8
    while p(lo) == 0:
        roots.append(lo)
        lo = lo + nudge
    while p(hi) == 0:
        roots.append(hi)
        hi = hi - nudge
    if lo < hi:
        stack = [(lo, hi, _count_roots(chain, lo, hi))]
        while stack:
            x0, x1, cnt = stack.pop()
            if cnt <= 0:
                continue
            if cnt == 1 or (x1 - x0) <= tol:
                f0, f1 = p(x0), p(x1)
                if (f0 > 0) != (f1 > 0):
                    roots.append(_refine_sign_change(p, x0, x1, f0, f1, tol))
                else:
                    roots.append(_refine_by_count(chain, x0, x1, tol))
                continue
            m = (x0 + x1) / 2
            while p(m) == 0:
                roots.append(m)
                cnt -= 1
                m = m + nudge
                if cnt <= 0 or not x0 < m < x1:
                    break
            if cnt <= 0 or not x0 < m < x1:
                continue
            cl = _count_roots(chain, x0, m)
            stack.append((x0, m, cl))
            stack.append((m, x1, cnt - cl))

    roots.sort()
    merged = []
    for r in roots:
        if merged and abs(r - merged[-1][-1]) <= tol:
            merged[-1].append(r)
        else:
            merged.append([r])
    return [cluster[0] if len(cluster) == 1 else sum(cluster) / len(cluster) for cluster in merged]
