"""Univariate polynomial and root-isolation tests."""

import numpy as np
import pytest

from hocp.backend import make_backend
from hocp.poly1d import Poly1D, ZeroPolynomialError, poly_roots_in_interval, poly_shift


def test_simple_root():
    # [TRIVIAL] z^2 - 1 on [0, 2] -> {1}
    p = Poly1D([-1.0, 0.0, 1.0])
    roots = poly_roots_in_interval(p, 0.0, 2.0, 1e-12)
    assert len(roots) == 1
    assert float(roots[0]) == pytest.approx(1.0, abs=1e-10)


def test_no_real_roots():
    # [TRIVIAL] z^2 + 1 has no real roots
    p = Poly1D([1.0, 0.0, 1.0])
    assert poly_roots_in_interval(p, -10.0, 10.0, 1e-12) == []


def test_zero_polynomial_signals():
    with pytest.raises(ZeroPolynomialError):
        poly_roots_in_interval(Poly1D([0.0, 0.0]), -1.0, 1.0, 1e-12)


def test_factored_cubic_bigfloat():
    # [DERIVED] (z - 0.25)(z + 0.3)(z - 0.9) on [-0.4, 0.6]: roots -0.3, 0.25
    # (0.9 lies outside); residuals checked at tol = 1e-30 in 256-bit floats
    be = make_backend("bigfloat(256)")
    r1, r2, r3 = (be.from_float(v) for v in (0.25, -0.3, 0.9))
    one = be.from_float(1.0)
    # expand the product by convolution
    coeffs = [one]
    for r in (r1, r2, r3):
        new = [be.from_float(0.0)] * (len(coeffs) + 1)
        for i, c in enumerate(coeffs):
            new[i] = new[i] - r * c
            new[i + 1] = new[i + 1] + c
        coeffs = new
    p = Poly1D(coeffs)
    roots = poly_roots_in_interval(p, be.from_float(-0.4), be.from_float(0.6), be.from_float(1e-30))
    assert len(roots) == 2
    vals = sorted(float(r) for r in roots)
    assert vals[0] == pytest.approx(-0.3, abs=1e-25)
    assert vals[1] == pytest.approx(0.25, abs=1e-25)
    scale = max(abs(float(c)) for c in coeffs)
    for r in roots:
        assert abs(float(p(r))) <= 1e-28 * scale


def test_random_factored_polynomials():
    # property: recovers exactly the roots of analytically factored
    # polynomials, residual <= tol * max coefficient
    rng = np.random.Generator(np.random.Philox(31))
    for _ in range(25):
        k = int(rng.integers(1, 5))
        roots_true = np.sort(rng.uniform(-1, 1, size=k))
        # keep roots separated so isolation is well-posed
        if k > 1 and np.min(np.diff(roots_true)) < 1e-3:
            continue
        coeffs = np.array([1.0])
        for r in roots_true:
            coeffs = np.convolve(coeffs, np.array([-r, 1.0]))
        p = Poly1D(list(coeffs))
        got = sorted(float(v) for v in poly_roots_in_interval(p, -2.0, 2.0, 1e-12))
        assert len(got) == k
        assert np.allclose(got, roots_true, atol=1e-9)
        for r in got:
            assert abs(p(r)) <= 1e-9 * max(abs(coeffs))


def test_double_root_merged():
    # roots closer than tol merge to one representative
    p = Poly1D(list(np.convolve([-0.5, 1.0], [-0.5, 1.0])))  # (z-1/2)^2
    roots = poly_roots_in_interval(p, 0.0, 1.0, 1e-9)
    assert len(roots) == 1
    assert float(roots[0]) == pytest.approx(0.5, abs=1e-4)


def test_poly_shift_identity():
    # [DERIVED] poly_shift re-centers: q(z) = p(z) when built from local coeffs
    p_local = Poly1D([1.0, -2.0, 0.5])  # in powers of (z - y)
    y = 0.7
    q = poly_shift(p_local, y)
    for z in np.linspace(-2, 2, 9):
        d = z - y
        assert q(z) == pytest.approx(1.0 - 2.0 * d + 0.5 * d * d, rel=1e-12, abs=1e-12)


def test_derivative():
    p = Poly1D([1.0, 2.0, 3.0])  # 1 + 2z + 3z^2
    dp = p.derivative()
    for z in (-1.0, 0.0, 2.0):
        assert dp(z) == pytest.approx(2.0 + 6.0 * z)
