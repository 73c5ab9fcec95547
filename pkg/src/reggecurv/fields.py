"""Per-element polynomial fields and simplex quadrature.

Polynomials live in reference coordinates ``xi`` of each element and are
expanded in monomials ``xi^alpha``.  Tensor components are Cartesian
components in the global frame; physical derivatives are obtained with the
constant inverse Jacobian of the element.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=None)
def monomial_exponents(dim, degree):
    """Exponent tuples of all monomials of total degree <= ``degree``."""
    out = []
    for tot in range(degree + 1):
        for a in itertools.product(range(tot + 1), repeat=dim):
            if sum(a) == tot:
                out.append(a)
    return np.array(out, dtype=np.int64).reshape(-1, dim)


def dim_poly(dim, degree):
    if degree < 0:
        return 0
    return math.comb(degree + dim, dim)


def _powers(x, p):
    """x**p with the convention 0**0 = 1 and negative powers -> 0."""
    out = np.where(p >= 0, x ** np.maximum(p, 0), 0.0)
    return out


def eval_monomials(xi, degree, nderiv=0):
    """Values (n, nm), reference gradients (n, d, nm), Hessians (n, d, d, nm)."""
    xi = np.atleast_2d(xi)
    n, d = xi.shape
    E = monomial_exponents(d, degree)                 # (nm, d)
    P = xi[:, None, :] ** E[None, :, :]               # (n, nm, d)
    val = np.prod(P, axis=2)
    if nderiv == 0:
        return val
    grad = np.empty((n, d, len(E)))
    for a in range(d):
        Ea = E.copy()
        Ea[:, a] -= 1
        grad[:, a] = E[:, a] * np.prod(_powers(xi[:, None, :], Ea[None]), axis=2)
    if nderiv == 1:
        return val, grad
    hess = np.empty((n, d, d, len(E)))
    for a in range(d):
        for b in range(d):
            Eab = E.copy()
            Eab[:, a] -= 1
            c = E[:, a].astype(float)
            Eab[:, b] -= 1
            c = c * (E[:, b] - (1 if a == b else 0))
            hess[:, a, b] = c * np.prod(_powers(xi[:, None, :], Eab[None]), axis=2)
    return val, grad, hess


class PolyField:
    """Per-element polynomial field of fixed degree.

    ``coeffs`` has shape ``(ne, nm) + shape`` with ``shape`` = () for scalars
    and (d, d) for symmetric tensors.
    """

    def __init__(self, mesh, degree, coeffs):
        self.mesh = mesh
        self.degree = degree
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.shape = self.coeffs.shape[2:]

    def evaluate(self, elem, xi, nderiv=2):
        """Value and physical gradient/Hessian at reference points.

        Returns ``(val, grad, hess)`` with gradient index placed right after
        the point index: ``grad[n, k, ...] = d/dx_k``.
        """
        res = eval_monomials(xi, self.degree, nderiv)
        if nderiv == 0:
            res = (res,)
        C = self.coeffs[elem]                          # (n, nm, *shape)
        Ci = C.reshape(C.shape[0], C.shape[1], -1)
        val = np.einsum("nm,nmc->nc", res[0], Ci).reshape((len(elem),) + self.shape)
        out = [val]
        if nderiv >= 1:
            Jinv = self.mesh.jinv[elem]                 # (n, d, d): xi = Jinv (x - x0)
            gref = np.einsum("nam,nmc->nac", res[1], Ci)
            g = np.einsum("nak,nac->nkc", Jinv, gref)
            out.append(g.reshape((len(elem), self.mesh.dim) + self.shape))
        if nderiv >= 2:
            href = np.einsum("nabm,nmc->nabc", res[2], Ci)
            h = np.einsum("nak,nbl,nabc->nklc", Jinv, Jinv, href)
            out.append(h.reshape((len(elem), self.mesh.dim, self.mesh.dim) + self.shape))
        return tuple(out) if nderiv else out[0]

    def __add__(self, other):
        return combine([(1.0, self), (1.0, other)])

    def scaled(self, a):
        return PolyField(self.mesh, self.degree, a * self.coeffs)


def raise_degree(field: PolyField, degree):
    """Re-express a field in the monomial basis of a higher degree."""
    if degree == field.degree:
        return field
    d = field.mesh.dim
    E_old = [tuple(e) for e in monomial_exponents(d, field.degree)]
    E_new = {tuple(e): i for i, e in enumerate(monomial_exponents(d, degree))}
    C = np.zeros((field.coeffs.shape[0], len(E_new)) + field.shape)
    for i, e in enumerate(E_old):
        C[:, E_new[e]] = field.coeffs[:, i]
    return PolyField(field.mesh, degree, C)


def combine(terms):
    """Linear combination ``sum a_i f_i`` of polynomial fields on one mesh."""
    deg = max(f.degree for _, f in terms)
    C = sum(a * raise_degree(f, deg).coeffs for a, f in terms)
    return PolyField(terms[0][1].mesh, deg, C)


# ----------------------------------------------------------------------
# quadrature

@dataclass
class QuadRule:
    """Quadrature rule on the reference simplex with vertices 0, e_1, ..., e_d.

    ``points`` are reference coordinates; weights sum to 1/d!.
    """
    points: np.ndarray
    weights: np.ndarray
    exactness: int

    @property
    def bary(self):
        return np.hstack([1.0 - self.points.sum(axis=1, keepdims=True), self.points])


MAX_EXACTNESS = 41


def _gauss_jacobi01(n, alpha):
    """Gauss-Jacobi on [0,1] for weight (1-u)^alpha."""
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def _quad_rule_cached(entity_dim, exactness):
    if entity_dim == 0:
        return QuadRule(np.zeros((1, 0)), np.ones(1), exactness)
    n = max(1, (exactness + 2) // 2)
    if entity_dim == 1:
        x, w = roots_legendre(n)
        return QuadRule(((x + 1) / 2)[:, None], w / 2, 2 * n - 1)
    if entity_dim == 2:
        u, wu = _gauss_jacobi01(n, 1.0)
        v, wv = _gauss_jacobi01(n, 0.0)
        U, V = np.meshgrid(u, v, indexing="ij")
        W = np.outer(wu, wv)
        pts = np.stack([U.ravel(), ((1 - U) * V).ravel()], axis=1)
        return QuadRule(pts, W.ravel(), 2 * n - 1)
    if entity_dim == 3:
        u, wu = _gauss_jacobi01(n, 2.0)
        v, wv = _gauss_jacobi01(n, 1.0)
        s, ws = _gauss_jacobi01(n, 0.0)
        U, V, S = np.meshgrid(u, v, s, indexing="ij")
        W = wu[:, None, None] * wv[None, :, None] * ws[None, None, :]
        pts = np.stack([U.ravel(), ((1 - U) * V).ravel(), ((1 - U) * (1 - V) * S).ravel()], axis=1)
        return QuadRule(pts, W.ravel(), 2 * n - 1)
    raise ValueError("entity_dim must be 0..3")


def quad_rule(entity_dim, exactness):
    """Collapsed Gauss-Jacobi (Stroud conical product) rule with positive weights."""
    if exactness < 0 or exactness > MAX_EXACTNESS:
        raise ValueError(f"unsupported exactness {exactness}")
    return _quad_rule_cached(int(entity_dim), int(exactness))


def gauss_legendre01(n):
    """Gauss points and weights on [0, 1]."""
    x, w = roots_legendre(n)
    return (x + 1) / 2, w / 2


# ----------------------------------------------------------------------
# sub-entity points in element reference coordinates

def reference_vertices(dim):
    return np.vstack([np.zeros(dim), np.eye(dim)])


def subentity_points(local_vertices, bary, dim):
    """Element reference coordinates of points given by barycentric weights.

    ``local_vertices`` (..., s+1) lists local vertex indices of a sub-entity in
    the element, ``bary`` (nq, s+1) the weights; result (..., nq, dim).
    """
    V = reference_vertices(dim)[np.asarray(local_vertices)]       # (..., s+1, d)
    return np.einsum("qs,...sd->...qd", bary, V)


def bernstein(bary, degree):
    """Bernstein polynomials of ``degree`` in barycentric coords (nq, s+1) -> (nq, nb)."""
    bary = np.atleast_2d(bary)
    s1 = bary.shape[1]
    idx = [a for a in itertools.product(range(degree + 1), repeat=s1) if sum(a) == degree]
    out = np.empty((len(bary), len(idx)))
    for j, a in enumerate(idx):
        c = math.factorial(degree) / np.prod([math.factorial(t) for t in a])
        out[:, j] = c * np.prod(bary ** np.array(a)[None, :], axis=1)
    return out


class SmoothField:
    """Test or metric-like field given by a callback of physical coordinates."""

    def __init__(self, mesh, fn):
        self.mesh = mesh
        self.fn = fn

    def evaluate(self, elem, xi, nderiv=0):
        return self.fn(self.mesh.to_physical(elem, xi))


def matrix_field(scalar: PolyField, M):
    """Scalar polynomial field times a constant matrix."""
    M = np.asarray(M, dtype=float)
    return PolyField(scalar.mesh, scalar.degree, scalar.coeffs[..., None, None] * M)
