"""Symmetric derivative tensors and Taylor jets.

Tensors of order m over R^n are stored densely over the C(n+m-1, m)
non-decreasing multi-indices, with the permutation multiplicity kept
separately.  All operations are generic over the scalar type: arrays are
numpy float64 for the binary64 backend and numpy object arrays of mpf
for the bigfloat backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np


class DimensionMismatch(ValueError):
    pass


@lru_cache(maxsize=None)
def multi_indices(dim: int, order: int):
    """Non-decreasing multi-indices of length `order` over {0..dim-1}."""
    return tuple(combinations_with_replacement(range(dim), order))


@lru_cache(maxsize=None)
def _apply_structure(dim: int, order: int):
    """Index matrix (L, order) and multiplicity vector for tensor_apply."""
    idx = multi_indices(dim, order)
    mat = np.array(idx, dtype=np.intp).reshape(len(idx), order)
    mults = np.empty(len(idx))
    for e, alpha in enumerate(idx):
        m = math.factorial(order)
        for i in set(alpha):
            m //= math.factorial(alpha.count(i))
        mults[e] = m
    return mat, mults


@lru_cache(maxsize=None)
def _gradient_structure(dim: int, order: int):
    """Rows (entry, k, count, reduced multi-index) for differentiation."""
    idx = multi_indices(dim, order)
    entries, ks, counts, reduced = [], [], [], []
    for e, alpha in enumerate(idx):
        for k in sorted(set(alpha)):
            entries.append(e)
            ks.append(k)
            counts.append(alpha.count(k))
            r = list(alpha)
            r.remove(k)
            reduced.append(r)
    return (
        np.array(entries, dtype=np.intp),
        np.array(ks, dtype=np.intp),
        np.array(counts, dtype=float),
        np.array(reduced, dtype=np.intp).reshape(len(entries), order - 1),
    )


@dataclass(frozen=True)
class SymTensor:
    """Symmetric multilinear form of a given order on R^dim."""

    order: int
    dim: int
    coeffs: np.ndarray

    def __post_init__(self):
        expected = math.comb(self.dim + self.order - 1, self.order)
        if len(self.coeffs) != expected:
            raise ValueError(
                f"order-{self.order} tensor on R^{self.dim} needs "
                f"{expected} coefficients, got {len(self.coeffs)}"
            )

    @staticmethod
    def from_value(dim, c):
        return SymTensor(0, dim, np.array([c], dtype=object if _is_object(c) else float))

    @staticmethod
    def from_vector(g):
        g = np.asarray(g)
        return SymTensor(1, len(g), g.copy())

    @staticmethod
    def from_matrix(H):
        H = np.asarray(H)
        n = H.shape[0]
        coeffs = np.array([H[i, j] for i, j in multi_indices(n, 2)], dtype=H.dtype)
        return SymTensor(2, n, coeffs)

    @staticmethod
    def zeros(order, dim, dtype=float):
        return SymTensor(order, dim, np.zeros(math.comb(dim + order - 1, order), dtype=dtype))

    def as_vector(self):
        if self.order != 1:
            raise ValueError("as_vector requires order 1")
        return self.coeffs

    def as_matrix(self):
        if self.order != 2:
            raise ValueError("as_matrix requires order 2")
        H = np.zeros((self.dim, self.dim), dtype=self.coeffs.dtype)
        for c, (i, j) in zip(self.coeffs, multi_indices(self.dim, 2)):
            H[i, j] = c
            H[j, i] = c
        return H


def _is_object(x):
    return not isinstance(x, (int, float, np.floating))


def tensor_apply(t: SymTensor, v):
    """Contract the tensor with v in every slot."""
    v = np.asarray(v)
    if len(v) != t.dim:
        raise DimensionMismatch(f"expected dim {t.dim}, got {len(v)}")
    if t.order == 0:
        return t.coeffs[0]
    mat, mults = _apply_structure(t.dim, t.order)
    prods = v[mat].prod(axis=1)
    return (t.coeffs * mults * prods).sum()


def tensor_gradient(t: SymTensor, v):
    """Gradient of v -> tensor_apply(t, v)."""
    v = np.asarray(v)
    if len(v) != t.dim:
        raise DimensionMismatch(f"expected dim {t.dim}, got {len(v)}")
    grad = np.zeros(t.dim, dtype=t.coeffs.dtype)
    if t.order == 0:
        return grad
    entries, ks, counts, reduced = _gradient_structure(t.dim, t.order)
    _, mults = _apply_structure(t.dim, t.order)
    prods = v[reduced].prod(axis=1) if t.order > 1 else np.ones(len(entries))
    contrib = t.coeffs[entries] * mults[entries] * counts * prods
    np.add.at(grad, ks, contrib)
    return grad


@dataclass(frozen=True)
class TaylorJet:
    """Expansion center together with derivative tensors of orders 0..degree."""

    center: np.ndarray
    degree: int
    tensors: tuple  # SymTensor for m = 0..degree

    def __post_init__(self):
        n = len(self.center)
        if len(self.tensors) != self.degree + 1:
            raise ValueError("need one tensor per order 0..degree")
        for m, t in enumerate(self.tensors):
            if t.order != m or t.dim != n:
                raise ValueError(f"tensor {m} has order {t.order}, dim {t.dim}")

    @property
    def dim(self):
        return len(self.center)

    @property
    def value(self):
        return self.tensors[0].coeffs[0]

    def grad_vector(self):
        return self.tensors[1].as_vector()

    def hess_matrix(self):
        if self.degree < 2:
            return np.zeros((self.dim, self.dim))
        return self.tensors[2].as_matrix()


def jet_eval(jet: TaylorJet, z):
    """Value of the Taylor polynomial at z."""
    z = np.asarray(z)
    if len(z) != jet.dim:
        raise DimensionMismatch(f"expected dim {jet.dim}, got {len(z)}")
    d = z - jet.center
    total = jet.tensors[0].coeffs[0]
    for m in range(1, jet.degree + 1):
        total = total + tensor_apply(jet.tensors[m], d) / math.factorial(m)
    return total


def jet_gradient(jet: TaylorJet, z):
    """Gradient of the Taylor polynomial at z."""
    z = np.asarray(z)
    if len(z) != jet.dim:
        raise DimensionMismatch(f"expected dim {jet.dim}, got {len(z)}")
    d = z - jet.center
    grad = np.zeros(jet.dim, dtype=d.dtype)
    for m in range(1, jet.degree + 1):
        grad = grad + tensor_gradient(jet.tensors[m], d) / math.factorial(m)
    return grad


def jet_from_derivatives(center, value, grad=None, hess=None, higher=()):
    """Build a jet from dense derivative data (orders >= 3 as SymTensor)."""
    center = np.asarray(center)
    n = len(center)
    dtype = object if _is_object(value) else float
    tensors = [SymTensor(0, n, np.array([value], dtype=dtype))]
    if grad is not None:
        tensors.append(SymTensor.from_vector(np.asarray(grad)))
    if hess is not None:
        tensors.append(SymTensor.from_matrix(np.asarray(hess)))
    for t in higher:
        tensors.append(t)
    return TaylorJet(center, len(tensors) - 1, tuple(tensors))


def jet_restrict_1d(jet: TaylorJet):
    """Monomial coefficients (ascending) of a univariate jet; requires n = 1.

    The returned coefficients are in the variable z itself, not z - center,
    so they can be fed directly to the polynomial root machinery.
    """
    from .poly1d import Poly1D, poly_shift

    if jet.dim != 1:
        raise DimensionMismatch("jet_restrict_1d requires dimension 1")
    # coefficients in powers of (z - y)
    local = [jet.tensors[m].coeffs[0] / math.factorial(m) for m in range(jet.degree + 1)]
    return poly_shift(Poly1D(local), jet.center[0])
