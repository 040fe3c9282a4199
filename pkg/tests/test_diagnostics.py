"""Tests for criticality measures and rate estimation.

Labels: [TRIVIAL] = definitional, [DERIVED] = checked against a brute-force
or closed-form oracle.
"""

import math

import numpy as np
import pytest

from hocp.diagnostics import (
    cauchy_constant,
    criticality_measure,
    estimate_r_order,
    min_norm_convex_hull,
)
from hocp.drivers import EpsSchedule
from hocp.model import Bundle, Cut, TrustRegion
from hocp.tensors import jet_from_derivatives


# ---------------------------------------------------------------------------
# minimum-norm point of the convex hull


def test_min_norm_single_point():
    # [TRIVIAL] hull of one point is that point
    v, w = min_norm_convex_hull([np.array([3.0, -4.0])])
    np.testing.assert_allclose(v, [3.0, -4.0])
    np.testing.assert_allclose(w, [1.0])


def test_min_norm_opposite_points():
    # [DERIVED] conv{e1, -e1} contains 0
    v, w = min_norm_convex_hull([np.array([1.0, 0.0]), np.array([-1.0, 0.0])])
    assert np.linalg.norm(v) < 1e-10
    np.testing.assert_allclose(w, [0.5, 0.5], atol=1e-10)


def test_min_norm_right_angle():
    # [DERIVED] conv{(1,0), (0,1)}: closest point to 0 is (1/2, 1/2)
    v, w = min_norm_convex_hull([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
    np.testing.assert_allclose(v, [0.5, 0.5], atol=1e-10)
    np.testing.assert_allclose(w, [0.5, 0.5], atol=1e-10)


def test_min_norm_interior_zero_not_reachable():
    # [DERIVED] hull strictly away from 0: answer is the nearest vertex/face
    pts = [np.array([2.0, 1.0]), np.array([3.0, 1.0]), np.array([2.5, 2.0])]
    v, w = min_norm_convex_hull(pts)
    # nearest point of that triangle to the origin lies on the edge
    # between (2,1) and (3,1)?  the segment is y=1, x in [2,3]; closest is (2,1)
    np.testing.assert_allclose(v, [2.0, 1.0], atol=1e-9)
    assert w[0] == pytest.approx(1.0, abs=1e-9)


def test_min_norm_vs_random_search():
    # [DERIVED] random hulls vs 10000 Dirichlet samples of the simplex
    rng = np.random.Generator(np.random.Philox(3))
    for _ in range(10):
        m, n = int(rng.integers(2, 6)), int(rng.integers(2, 5))
        P = rng.standard_normal((m, n))
        v, w = min_norm_convex_hull(list(P))
        # weights are a certificate: on the simplex and reproduce v
        assert np.all(w >= -1e-12)
        assert w.sum() == pytest.approx(1.0, abs=1e-10)
        np.testing.assert_allclose(w @ P, v, atol=1e-9)
        lam = rng.dirichlet(np.ones(m), size=10000)
        sample_norms = np.linalg.norm(lam @ P, axis=1)
        assert np.linalg.norm(v) <= sample_norms.min() + 1e-3


def test_min_norm_wolfe_certificate():
    # [DERIVED] optimality: <p, v> >= ||v||^2 for every input point p
    rng = np.random.Generator(np.random.Philox(9))
    for _ in range(10):
        P = rng.standard_normal((6, 3))
        v, _ = min_norm_convex_hull(list(P))
        vv = float(v @ v)
        for p in P:
            assert p @ v >= vv - 1e-9


def test_min_norm_scaling_equivariance():
    # [TRIVIAL] scaling all points scales the answer
    rng = np.random.Generator(np.random.Philox(12))
    P = rng.standard_normal((4, 3)) + 2.0
    v1, _ = min_norm_convex_hull(list(P))
    v2, _ = min_norm_convex_hull(list(10.0 * P))
    np.testing.assert_allclose(v2, 10.0 * v1, atol=1e-8)


def test_criticality_measure_bundle():
    # [DERIVED] cuts with gradients +/- g straddling a kink: measure ~ 0;
    # one-sided gradients: measure = ||g||
    x = np.zeros(2)
    tr = TrustRegion(x, 1.0)
    g = np.array([0.6, -0.8])

    def cut_at(y, grad):
        y = np.asarray(y, dtype=float)
        return Cut(y, jet_from_derivatives(y, 0.0, np.asarray(grad, dtype=float)))

    b_kink = Bundle(tr, cuts=[cut_at([0.1, 0.0], g), cut_at([-0.1, 0.0], -g)])
    assert criticality_measure(b_kink) < 1e-10
    b_side = Bundle(tr, cuts=[cut_at([0.1, 0.0], g), cut_at([0.2, 0.0], 1.5 * g)])
    assert criticality_measure(b_side) == pytest.approx(1.0, abs=1e-10)


# ---------------------------------------------------------------------------
# rate estimation


def test_estimate_r_order_on_schedule():
    # [DERIVED] feeding the schedule's own radii recovers the schedule
    # order: log(-log eps_j) grows with slope log Q
    s = EpsSchedule(eps1=0.5, q=2, p=1, sigma=0.5, kappa=0.75)
    d = [float(s.eps_at(j)) for j in range(1, 12)]
    rep = estimate_r_order(d, s)
    # early terms are pre-asymptotic; the fitted order still lands near Q
    assert rep.fitted_order == pytest.approx(2.5, rel=0.15)
    assert rep.envelope_j0 == 1
    assert rep.violations == 0


def test_estimate_r_order_linear_sequence():
    # [DERIVED] d_j = 2^-j is linear: fitted order ~ 1, and it eventually
    # falls out of the superlinear envelope
    s = EpsSchedule(eps1=0.5, q=2, p=1, sigma=0.5, kappa=0.75)
    d = [2.0 ** (-j) for j in range(1, 25)]
    rep = estimate_r_order(d, s)
    assert rep.fitted_order < 1.3
    assert rep.violations > 0


def test_estimate_r_order_envelope_reset():
    # [TRIVIAL] j0 is the first index from which the envelope holds to the
    # end; a late violation resets it past the sequence
    s = EpsSchedule(eps1=1.0, q=1, p=1, sigma=0.5, kappa=0.5)
    eps = [float(s.eps_at(j)) for j in range(1, 9)]
    C = cauchy_constant(s)
    d = [0.5 * e for e in eps]
    d[5] = 10.0 * C  # violate once at j = 6
    rep = estimate_r_order(d, s)
    assert rep.envelope_j0 == 7
    assert rep.violations >= 1


def test_estimate_r_order_validation():
    s = EpsSchedule(eps1=0.5, q=1)
    with pytest.raises(ValueError):
        estimate_r_order([0.5, -0.1, 0.2, 0.1], s)
    with pytest.raises(ValueError):
        estimate_r_order([2.0, 3.0, 4.0, 5.0], s)  # nothing below 1


def test_nstep_ratios():
    # [DERIVED] for d_j = a^(r^j) the ratio log d_{j+1} / log d_j equals r
    s = EpsSchedule(eps1=0.5, q=2, p=1)
    r = 1.7
    d = [0.5 ** (r ** j) for j in range(1, 10)]
    rep = estimate_r_order(d, s)
    finite = [x for x in rep.nstep_ratios if math.isfinite(x)]
    for x in finite:
        assert x == pytest.approx(r, rel=1e-10)


# ---------------------------------------------------------------------------
# envelope constant


def test_cauchy_constant_series():
    # [DERIVED] direct summation of kappa^(Q^l - 1)
    s = EpsSchedule(eps1=1.0, q=1, p=1, sigma=0.5, kappa=0.75)
    Q = 1.5
    direct, Ql = 0.0, 1.0
    for _ in range(200):
        direct += 0.75 ** (Ql - 1.0)
        Ql *= Q
    assert cauchy_constant(s) == pytest.approx(direct, rel=1e-12)
    # geometric-type lower/upper sanity: first term is 1
    assert cauchy_constant(s) > 1.0


def test_cauchy_constant_large_order_close_to_one():
    # [TRIVIAL] huge order: later terms vanish, C -> 1 + kappa^(Q-1) + ...
    s = EpsSchedule(eps1=1.0, q=50, p=1, sigma=0.5, kappa=0.5)
    C = cauchy_constant(s)
    assert 1.0 < C < 1.0 + 2.0 * 0.5 ** (50.5 - 1.0)
