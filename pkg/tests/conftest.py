import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from reggecurv.fields import matrix_field, quad_rule
from reggecurv.regge import LagrangeSpace, ReggeSpace


_SPACES = {}
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def _space(cls, mesh, order):
    # spaces are rebuilt only when the mesh object changes
    key = (cls, id(mesh), order)
    hit = _SPACES.get(key)
    if hit is None or hit.mesh is not mesh:
        if len(_SPACES) > 16:
            _SPACES.clear()
        hit = _SPACES[key] = cls(mesh, order)
    return hit


def random_scalar_test(mesh, rng, m=2):
    L = _space(LagrangeSpace, mesh, m)
    u = rng.normal(size=L.ndof)
    u[L.boundary] = 0.0
    return L.field(u)


def random_matrix_test(mesh, rng, order=1):
    """Regge test field with vanishing boundary tt-trace (3D) or scalar (2D)."""
    if mesh.dim == 2:
        return random_scalar_test(mesh, rng)
    T = _space(ReggeSpace, mesh, order)
    w = rng.normal(size=T.ndof)
    w[T.boundary] = 0.0
    return T.field(w)


def random_rho(mesh, rng, m=2):
    """Lagrange scalar times a fixed random symmetric matrix."""
    d = mesh.dim
    M = rng.normal(size=(d, d))
    return matrix_field(random_scalar_test(mesh, rng, m), M + M.T)


def random_regge_metric(space, base, rng, amp=0.02, floor=0.2, exactness=8):
    """``base`` plus random Regge noise, halving the amplitude until the result is a metric.

    Order-1 basis functions on small perturbed tetrahedra have large
    coefficients, so a fixed DOF amplitude can produce indefinite fields.
    The smallest eigenvalue is checked at the points of a degree-``exactness`` rule.
    """
    mesh = space.mesh
    d = mesh.dim
    pts = quad_rule(d, exactness).points
    elems = np.arange(mesh.n_elements)
    noise = rng.normal(size=space.ndof)
    for _ in range(12):
        g = space.field(base.dofs + amp * noise)
        lo = np.inf
        for xq in pts:
            G = g.evaluate(elems, np.broadcast_to(xq, (len(elems), d)), 0)
            G = G[0] if isinstance(G, tuple) else G
            lo = min(lo, np.linalg.eigvalsh(G).min())
        if lo > floor:
            return g
        amp *= 0.5
    raise RuntimeError("could not draw a positive definite Regge metric")


def flat_callback(d, A=None):
    A = np.eye(d) if A is None else A
    return lambda x: np.broadcast_to(A, (len(x), d, d)).copy()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
