"""Exact metrics with known curvature: graphs, flat metrics and cones."""
from __future__ import annotations

import numpy as np

from .fields import PolyField
from .mesh import Mesh


class SmoothMetric:
    """Metric given by callbacks of physical coordinates.

    ``g(x) -> (n,d,d)``, ``dg(x) -> (n,d,d,d)`` with derivative index first,
    ``d2g(x) -> (n,d,d,d,d)``.
    """

    def __init__(self, dim, g, dg, d2g, exact=None):
        self.dim = dim
        self.g = g
        self.dg = dg
        self.d2g = d2g
        self.exact = exact or {}

    def __call__(self, x):
        return self.g(x)

    def bind(self, mesh: Mesh):
        return BoundMetric(self, mesh)


class BoundMetric:
    """A smooth metric seen through the reference maps of a mesh."""

    def __init__(self, metric: SmoothMetric, mesh: Mesh):
        self.metric = metric
        self.mesh = mesh

    def evaluate(self, elem, xi, nderiv=2):
        x = self.mesh.to_physical(elem, xi)
        out = [self.metric.g(x)]
        if nderiv >= 1:
            out.append(self.metric.dg(x))
        if nderiv >= 2:
            out.append(self.metric.d2g(x))
        return tuple(out) if nderiv else out[0]


class LinearCombination:
    """Evaluator of ``sum_i a_i f_i`` for fields sharing the evaluate protocol."""

    def __init__(self, terms):
        self.terms = list(terms)

    def evaluate(self, elem, xi, nderiv=2):
        acc = None
        for a, f in self.terms:
            r = f.evaluate(elem, xi, nderiv)
            if not isinstance(r, tuple):
                r = (r,)
            acc = [a * v for v in r] if acc is None else [s + a * v for s, v in zip(acc, r)]
        return tuple(acc) if nderiv else acc[0]


def graph_metric(grad, hess, third, dim):
    """Metric I + grad f grad f^T induced by the graph of ``f``.

    ``grad(x) -> (n,d)``, ``hess(x) -> (n,d,d)``, ``third(x) -> (n,d,d,d)``.
    """
    eye = np.eye(dim)

    def g(x):
        p = grad(x)
        return eye[None] + np.einsum("ni,nj->nij", p, p)

    def dg(x):
        p, H = grad(x), hess(x)
        return np.einsum("nki,nj->nkij", H, p) + np.einsum("ni,nkj->nkij", p, H)

    def d2g(x):
        p, H, T = grad(x), hess(x), third(x)
        return (np.einsum("nlki,nj->nlkij", T, p) + np.einsum("nki,nlj->nlkij", H, H)
                + np.einsum("nli,nkj->nlkij", H, H) + np.einsum("ni,nlkj->nlkij", p, T))

    return SmoothMetric(dim, g, dg, d2g)


def _benchmark_f_derivs(dim):
    """Derivatives of f = sum(x_i^2/2 - x_i^4/12)."""
    def grad(x):
        return x - x ** 3 / 3.0

    def hess(x):
        n = len(x)
        H = np.zeros((n, dim, dim))
        idx = np.arange(dim)
        H[:, idx, idx] = 1.0 - x ** 2
        return H

    def third(x):
        n = len(x)
        T = np.zeros((n, dim, dim, dim))
        idx = np.arange(dim)
        T[:, idx, idx, idx] = -2.0 * x
        return T
    return grad, hess, third


def benchmark_f(x):
    return np.sum(0.5 * x ** 2 - x ** 4 / 12.0, axis=1)


def q_poly(x):
    return x ** 2 * (x ** 2 - 3.0) ** 2


def benchmark_Q(x):
    """Closed-form contravariant curvature operator of the 3D benchmark."""
    qs = q_poly(x)
    s = qs.sum(axis=1) + 9.0
    detg = s / 9.0
    Q = np.zeros((len(x), 3, 3))
    for i in range(3):
        j, k = [a for a in range(3) if a != i]
        Q[:, i, i] = 9.0 * (x[:, j] ** 2 - 1.0) * (x[:, k] ** 2 - 1.0) / (detg * s)
    return Q


def benchmark_K(x):
    """Gauss curvature det(Hess f)/(1+|grad f|^2)^2 of the 2D graph benchmark."""
    p = x - x ** 3 / 3.0
    return (1 - x[:, 0] ** 2) * (1 - x[:, 1] ** 2) / (1.0 + np.sum(p ** 2, axis=1)) ** 2


def benchmark_3d():
    """Graph metric of f = (|x|^2)/2 - sum x_i^4/12 on (-1,1)^3 and its exact Q."""
    m = graph_metric(*_benchmark_f_derivs(3), dim=3)
    m.exact["Q"] = benchmark_Q
    return m, benchmark_Q


def benchmark_2d():
    m = graph_metric(*_benchmark_f_derivs(2), dim=2)
    m.exact["K"] = benchmark_K
    return m, benchmark_K


def flat_metric(dim, A=None):
    """Constant metric (identity by default)."""
    A = np.eye(dim) if A is None else np.asarray(A, dtype=float)

    def g(x):
        return np.broadcast_to(A, (len(x), dim, dim)).copy()

    def dg(x):
        return np.zeros((len(x), dim, dim, dim))

    def d2g(x):
        return np.zeros((len(x), dim, dim, dim, dim))
    return SmoothMetric(dim, g, dg, d2g, exact={"K": lambda x: np.zeros(len(x))})


def cone_metric_2d(apex_angles, leg=1.0):
    """Fan of triangles around one interior vertex with prescribed apex angles.

    Each triangle carries the constant metric that makes it isometric to a
    Euclidean isosceles triangle with the given apex angle and legs of length
    ``leg``.  Shared legs have equal length, so the metric is tt-continuous.
    Returns ``(mesh, metric_field)``.
    """
    m = len(apex_angles)
    th = 2 * np.pi * np.arange(m) / m
    verts = np.vstack([[0.0, 0.0], np.stack([np.cos(th), np.sin(th)], axis=1)])
    els = np.array([[0, 1 + j, 1 + (j + 1) % m] for j in range(m)])
    mesh = Mesh(verts, els)
    coeffs = np.zeros((m, 1, 2, 2))
    for e in range(m):
        el = mesh.elements[e]
        # legs from the apex (vertex 0) to the two outer vertices
        others = [v for v in el if v != 0]
        E = np.stack([verts[v] - verts[0] for v in others], axis=1)
        a = apex_angles[e]
        G = leg ** 2 * np.array([[1.0, np.cos(a)], [np.cos(a), 1.0]])
        Ei = np.linalg.inv(E)
        coeffs[e, 0] = Ei.T @ G @ Ei
    return mesh, PolyField(mesh, 0, coeffs)
