"""Symmetric-tensor and Taylor-jet tests against independent oracles."""

import math

import numpy as np
import pytest

from hocp.tensors import (
    DimensionMismatch,
    SymTensor,
    TaylorJet,
    jet_eval,
    jet_from_derivatives,
    jet_gradient,
    jet_restrict_1d,
    multi_indices,
    tensor_apply,
    tensor_gradient,
)


def test_order1_is_inner_product():
    # [TRIVIAL] order-1 contraction reduces to g.v
    g = np.array([1.0, -2.0, 3.0])
    v = np.array([0.5, 0.25, -1.0])
    assert tensor_apply(SymTensor.from_vector(g), v) == pytest.approx(g @ v)


def test_order2_identity():
    # [TRIVIAL] v^T I v = |v|^2: v=(1,2) -> 5
    t = SymTensor.from_matrix(np.eye(2))
    assert tensor_apply(t, np.array([1.0, 2.0])) == pytest.approx(5.0)


def test_order3_cubic():
    # [DERIVED] third derivative of x^3 is 6; contraction with v=2 gives 6*8=48
    t = SymTensor(3, 1, np.array([6.0]))
    assert tensor_apply(t, np.array([2.0])) == pytest.approx(48.0)


def test_apply_matches_dense_contraction():
    # [DERIVED] oracle: build the full symmetric m-way array and contract it
    rng = np.random.Generator(np.random.Philox(11))
    for n, m in [(2, 2), (3, 2), (2, 3), (3, 3), (2, 4)]:
        idxs = list(multi_indices(n, m))
        coeffs = rng.standard_normal(len(idxs))
        dense = np.zeros((n,) * m)
        import itertools

        for c, idx in zip(coeffs, idxs):
            for perm in set(itertools.permutations(idx)):
                dense[perm] = c
        t = SymTensor(m, n, coeffs)
        for _ in range(5):
            v = rng.standard_normal(n)
            ref = dense
            for _ in range(m):
                ref = ref @ v
            assert tensor_apply(t, v) == pytest.approx(float(ref), rel=1e-12)


def test_tensor_gradient_finite_differences():
    # [DERIVED] FD oracle on the contraction map
    rng = np.random.Generator(np.random.Philox(13))
    h = 1e-6
    for n, m in [(2, 2), (3, 3), (2, 4)]:
        t = SymTensor(m, n, rng.standard_normal(math.comb(n + m - 1, m)))
        v = rng.standard_normal(n)
        g = tensor_gradient(t, v)
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            fd = (tensor_apply(t, v + e) - tensor_apply(t, v - e)) / (2 * h)
            assert g[i] == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_jet_eval_at_center_is_value():
    # [TRIVIAL]
    jet = jet_from_derivatives(np.array([1.5]), 7.0, np.array([3.0]))
    assert jet_eval(jet, np.array([1.5])) == 7.0


def test_quadratic_taylor_exact():
    # [TRIVIAL] degree-2 jet of x^2 at y=1 reproduces x^2 everywhere
    jet = jet_from_derivatives(
        np.array([1.0]), 1.0, np.array([2.0]), np.array([[2.0]])
    )
    for z in np.linspace(-3, 3, 13):
        assert jet_eval(jet, np.array([z])) == pytest.approx(z * z, abs=1e-14)


def test_sharp_problem_linear_jet_value():
    # [DERIVED] f(x) = sqrt(x + 1/4) - 1/2 on the positive branch;
    # f(0.1) = sqrt(0.35) - 0.5, f'(0.1) = 1/(2 sqrt(0.35));
    # the q=1 jet at 0.1 evaluated at -0.4 gives
    # f(0.1) + f'(0.1) * (-0.5) = -0.3309693...
    f0 = math.sqrt(0.35) - 0.5
    g0 = 1.0 / (2.0 * math.sqrt(0.35))
    jet = jet_from_derivatives(np.array([0.1]), f0, np.array([g0]))
    got = jet_eval(jet, np.array([-0.4]))
    assert got == pytest.approx(f0 - 0.5 * g0, abs=1e-15)
    assert got == pytest.approx(-0.330969, abs=1e-6)


def test_jet_gradient_quadratic_closed_form():
    # [TRIVIAL] gradient of quadratic jet is g + H (z - y)
    rng = np.random.Generator(np.random.Philox(17))
    y = rng.standard_normal(3)
    g = rng.standard_normal(3)
    M = rng.standard_normal((3, 3))
    H = M + M.T
    jet = jet_from_derivatives(y, 1.0, g, H)
    z = rng.standard_normal(3)
    assert jet_gradient(jet, z) == pytest.approx(g + H @ (z - y))
    assert jet_gradient(jet, y) == pytest.approx(g)


def test_jet_gradient_finite_differences():
    # [DERIVED] FD oracle with h = cbrt(machine eps)
    rng = np.random.Generator(np.random.Philox(19))
    h = float(np.cbrt(np.finfo(float).eps))
    t3 = SymTensor(3, 2, rng.standard_normal(4))
    jet = jet_from_derivatives(
        rng.standard_normal(2),
        0.3,
        rng.standard_normal(2),
        np.eye(2),
        higher=(t3,),
    )
    z = rng.standard_normal(2)
    g = jet_gradient(jet, z)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (jet_eval(jet, z + e) - jet_eval(jet, z - e)) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_taylor_exactness_quadratics():
    # property: the degree-2 jet of a quadratic polynomial reproduces it
    # everywhere, for any expansion center (oracle = direct evaluation)
    rng = np.random.Generator(np.random.Philox(23))
    for n in (1, 2, 3):
        c0 = rng.standard_normal()
        g = rng.standard_normal(n)
        M = rng.standard_normal((n, n))
        H = M + M.T

        def f(z):
            return c0 + g @ z + 0.5 * z @ H @ z

        y = rng.standard_normal(n)
        jet = jet_from_derivatives(y, f(y), g + H @ y, H)
        for z in rng.standard_normal((8, n)):
            assert jet_eval(jet, z) == pytest.approx(f(z), rel=1e-12, abs=1e-12)


def test_taylor_exactness_univariate_quartic():
    # [DERIVED] degree-4 jet of a random quartic at y reproduces it; jet
    # tensors from symbolic derivatives of the monomial form
    rng = np.random.Generator(np.random.Philox(24))
    a = rng.standard_normal(5)  # a0 + a1 z + ... + a4 z^4

    def f(z):
        return sum(a[k] * z**k for k in range(5))

    def d(z, m):
        return sum(
            a[k] * math.factorial(k) / math.factorial(k - m) * z ** (k - m)
            for k in range(m, 5)
        )

    y = 0.37
    tensors = tuple(SymTensor(m, 1, np.array([d(y, m)])) for m in range(5))
    jet = TaylorJet(np.array([y]), 4, tensors)
    for z in np.linspace(-2, 2, 11):
        assert jet_eval(jet, np.array([z])) == pytest.approx(f(z), rel=1e-11, abs=1e-11)


def test_dimension_mismatch_raises():
    jet = jet_from_derivatives(np.zeros(2), 0.0, np.zeros(2))
    with pytest.raises(DimensionMismatch):
        jet_eval(jet, np.zeros(3))
    with pytest.raises(DimensionMismatch):
        tensor_apply(SymTensor.from_vector(np.ones(2)), np.ones(3))


def test_jet_restrict_1d_constant():
    # [TRIVIAL]
    jet = jet_from_derivatives(np.array([2.0]), 5.0, np.array([0.0]))
    p = jet_restrict_1d(jet)
    for z in (-1.0, 0.0, 3.0):
        assert p(z) == pytest.approx(5.0)


def test_jet_restrict_1d_square():
    # [TRIVIAL] jet of x^2 at y=1, q=2 -> coefficients of z^2
    jet = jet_from_derivatives(
        np.array([1.0]), 1.0, np.array([2.0]), np.array([[2.0]])
    )
    p = jet_restrict_1d(jet)
    assert np.allclose([float(c) for c in p.coeffs], [0.0, 0.0, 1.0], atol=1e-14)


def test_jet_restrict_1d_matches_jet_eval():
    # [DERIVED] point-wise agreement on sample points
    rng = np.random.Generator(np.random.Philox(29))
    t3 = SymTensor(3, 1, np.array([rng.standard_normal()]))
    jet = jet_from_derivatives(
        np.array([0.1]),
        rng.standard_normal(),
        rng.standard_normal(1),
        rng.standard_normal((1, 1)),
        higher=(t3,),
    )
    p = jet_restrict_1d(jet)
    for z in np.linspace(-2, 2, 10):
        assert p(z) == pytest.approx(jet_eval(jet, np.array([z])), rel=1e-12, abs=1e-12)
