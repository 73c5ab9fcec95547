"""H^-2 norms of assembled functionals via a hybridized HHJ biharmonic solver.

For a load ``f`` on continuous P_m displacements with zero boundary values we
solve ``Delta^2 V = f`` with clamped boundary conditions in mixed form.  The
stress ``sigma ~ Hess V`` is a discontinuous symmetric P_{m-1} field, and
normal-normal continuity is imposed weakly by multipliers ``lam`` in P_{m-1}
on interior facets, which play the role of the normal derivative of ``V``.
Per element

    b_T(tau; v, lam) = (tau, Hess v)_T - <tau_nn, d_n v - (n_T . n_F) lam>_{dT},

and the equations are ``(sigma, tau) = b(tau; V, lam)`` and
``b(sigma; v, mu) = f(v)``.  Eliminating the element-local stress gives the
SPD matrix ``K = sum_T B_T^T M_T^-1 B_T`` on (V, lam).  Boundary facets carry
no multiplier, which makes ``d_n V = 0`` natural (clamped plate).

The reported norm of a component is ``sqrt(|V|^2 + |grad V|^2 + |sigma|^2)``
with L2 norms; the stress part stands in for the second derivatives.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import dim_poly, eval_monomials, quad_rule, reference_vertices
from .mesh import Mesh
from .regge import LagrangeSpace, sym_basis

log = logging.getLogger(__name__)

DIRECT_LIMIT = 50000


@dataclass
class SparseSystem:
    """Sparse symmetric system with a DOF partition."""
    matrix: sp.csr_matrix
    rhs: np.ndarray = None
    blocks: dict = field(default_factory=dict)
    free: np.ndarray = None

    @property
    def n(self):
        return self.matrix.shape[0]

    def symmetry_defect(self):
        A = self.matrix
        d = abs(A - A.T).max() if A.nnz else 0.0
        return float(d) / max(float(abs(A).max()) if A.nnz else 1.0, 1e-300)


@dataclass
class SolveInfo:
    method: str
    residual: float
    iterations: int = 0


def sparse_solve(A, b, rtol=1e-10, factor=None):
    """Solve a symmetric sparse system; direct below ``DIRECT_LIMIT`` unknowns.

    Above the limit, conjugate gradients with an algebraic multigrid
    preconditioner are tried first (iteration cap ``10 sqrt(n)``); if they do not
    reach ``rtol`` the direct solver is used.  Returns ``(x, SolveInfo)``.
    """
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    bn = np.linalg.norm(b)
    if bn == 0.0:
        return np.zeros_like(b), SolveInfo("trivial", 0.0)
    if factor is None and n > DIRECT_LIMIT:
        x, it = _cg_amg(A, b, rtol, maxiter=int(10 * math.sqrt(n)))
        res = np.linalg.norm(A @ x - b) / bn
        if res <= rtol:
            return x, SolveInfo("cg-amg", float(res), it)
        log.info("iterative solve stalled at residual %.2e, switching to direct", res)
    if factor is None:
        factor = spla.splu(A)
    x = factor.solve(b)
    res = np.linalg.norm(A @ x - b) / bn
    if res > rtol:
        # one step of iterative refinement
        x = x + factor.solve(b - A @ x)
        res = np.linalg.norm(A @ x - b) / bn
    if res > rtol:
        raise RuntimeError(f"linear solve residual {res:.2e} above {rtol:.0e}")
    return x, SolveInfo("direct", float(res))


def _cg_amg(A, b, rtol, maxiter):
    import pyamg
    ml = pyamg.smoothed_aggregation_solver(sp.csr_matrix(A), symmetry="symmetric")
    M = ml.aspreconditioner(cycle="V")
    count = [0]

    def cb(_):
        count[0] += 1
    x, _ = spla.cg(A, b, rtol=rtol, maxiter=maxiter, M=M, callback=cb)
    return x, count[0]


# ----------------------------------------------------------------------
# element matrices

def _outward_normals(mesh, j):
    """Unit outward Euclidean normals of local facet ``j`` for all elements."""
    Ji = mesh.jinv
    gb = -Ji.sum(axis=1) if j == 0 else Ji[:, j - 1, :]
    return -gb / np.linalg.norm(gb, axis=1)[:, None]


def _facet_measure(mesh, fids):
    X = mesh.vertices[mesh.facets[fids]]
    T = X[:, 1:] - X[:, :1]
    G = np.einsum("fai,fbi->fab", T, T)
    return np.sqrt(np.linalg.det(G)) / math.factorial(mesh.dim - 1)


class HHJSystem:
    """Condensed hybridized HHJ operator on a mesh for displacement order m."""

    def __init__(self, mesh: Mesh, m: int):
        if m < 2:
            raise ValueError("HHJ needs displacement order m >= 2")
        self.mesh = mesh
        self.m = m
        d = mesh.dim
        self.V = LagrangeSpace(mesh, m)
        self.nsym = d * (d + 1) // 2
        self.nmono = dim_poly(d, m - 1)
        self.nlam = dim_poly(d - 1, m - 1)
        self.nu = self.V.ndof
        self.ndof = self.nu + len(mesh.facets) * self.nlam
        self._assemble()

    # --------------------------------------------------------------
    def _stress_basis(self, xi):
        """Values (nq, nsig, d, d) of the reference stress basis p_a(xi) E_s."""
        p = eval_monomials(xi, self.m - 1)                             # (nq, nm)
        E = sym_basis(self.mesh.dim)
        return np.einsum("qa,sij->qasij", p, E).reshape(len(xi), -1, self.mesh.dim, self.mesh.dim)

    def _assemble(self):
        mesh, m, d = self.mesh, self.m, self.mesh.dim
        ne = mesh.n_elements
        adet = np.abs(mesh.detj)
        # reference stress mass (M_T = |det J| Mhat)
        r = quad_rule(d, 2 * m)
        S = self._stress_basis(r.points)
        self.Mhat = np.einsum("q,qaij,qbij->ab", r.weights, S, S)
        Mhat_inv = np.linalg.inv(self.Mhat)
        nsig = S.shape[1]
        nloc_u = self.V.dofmap.shape[1]
        ncol = nloc_u + (d + 1) * self.nlam
        B = np.zeros((ne, nsig, ncol))
        # volume part (tau, Hess v)
        allel = np.arange(ne)
        for iq, (xq, wq) in enumerate(zip(r.points, r.weights)):
            el = allel
            xi = np.broadcast_to(xq, (ne, d))
            _, _, H = self.V.basis(el, xi, 2)                          # (ne, d, d, nn)
            Sq = S[iq].reshape(nsig, d * d)
            B[:, :, :nloc_u] += wq * adet[:, None, None] * (Sq @ H.reshape(ne, d * d, -1))
        # boundary parts
        rf = quad_rule(d - 1, 2 * m)
        lam_cols = np.empty((ne, d + 1, self.nlam), dtype=np.int64)
        for j in range(d + 1):
            fids = mesh.elem_facets[:, j]
            fv = mesh.facets[fids]
            loc = np.argmax(mesh.elements[:, None, :] == fv[:, :, None], axis=2)   # (ne, d)
            Vr = reference_vertices(d)[loc]
            nrm = _outward_normals(mesh, j)
            sgn = np.where(mesh.facet_elems[fids, 0] == allel, 1.0, -1.0)
            wF = _facet_measure(mesh, fids) * math.factorial(d - 1)
            psi = eval_monomials(rf.points, m - 1)                       # (nq, nlam) in sorted-vertex coords
            for iq in range(len(rf.weights)):
                xi = np.einsum("s,nsd->nd", rf.bary[iq], Vr)
                Sq = self._stress_basis(xi)                              # (ne, nsig, d, d)
                nn_ = np.einsum("ni,nj->nij", nrm, nrm).reshape(ne, d * d, 1)
                snn = (Sq.reshape(ne, nsig, d * d) @ nn_)[:, :, 0]
                _, G = self.V.basis(allel, xi, 1)                       # (ne, d, nn)
                dn = np.einsum("nkc,nk->nc", G, nrm)
                w = rf.weights[iq] * wF
                B[:, :, :nloc_u] -= (w[:, None, None] * snn[:, :, None] * dn[:, None, :])
                c0 = nloc_u + j * self.nlam
                B[:, :, c0:c0 + self.nlam] += ((w * sgn)[:, None, None] * snn[:, :, None]
                                               * psi[iq][None, None, :])
            lam_cols[:, j, :] = self.nu + fids[:, None] * self.nlam + np.arange(self.nlam)[None, :]
        self.B = B
        self.cols = np.concatenate([self.V.dofmap, lam_cols.reshape(ne, -1)], axis=1)
        KT = np.swapaxes(B, 1, 2) @ (Mhat_inv @ B) / adet[:, None, None]
        rows = np.repeat(self.cols[:, :, None], ncol, axis=2)
        colsm = np.repeat(self.cols[:, None, :], ncol, axis=1)
        K = sp.coo_matrix((KT.ravel(), (rows.ravel(), colsm.ravel())), shape=(self.ndof, self.ndof)).tocsr()
        lam_free = np.zeros(len(mesh.facets) * self.nlam, dtype=bool)
        lam_free.reshape(-1, self.nlam)[mesh.interior_facet] = True
        self.free = np.concatenate([~self.V.boundary, lam_free])
        self.free_idx = np.flatnonzero(self.free)
        self.K = K[self.free_idx][:, self.free_idx].tocsc()
        self.nfree_u = int((~self.V.boundary).sum())
        self._lagrange_norm_matrices()
        self._factor = None

    def _lagrange_norm_matrices(self):
        mesh, d = self.mesh, self.mesh.dim
        r = quad_rule(d, 2 * self.m)
        ne = mesh.n_elements
        adet = np.abs(mesh.detj)
        nn = self.V.dofmap.shape[1]
        Me = np.zeros((ne, nn, nn))
        Se = np.zeros((ne, nn, nn))
        allel = np.arange(ne)
        for xq, wq in zip(r.points, r.weights):
            phi, G = self.V.basis(allel, np.broadcast_to(xq, (ne, d)), 1)
            Me += wq * adet[:, None, None] * np.einsum("na,nb->nab", phi, phi)
            Se += wq * adet[:, None, None] * np.einsum("nka,nkb->nab", G, G)
        rows = np.repeat(self.V.dofmap[:, :, None], nn, axis=2).ravel()
        cols = np.repeat(self.V.dofmap[:, None, :], nn, axis=1).ravel()
        shape = (self.nu, self.nu)
        free = self.V.free
        self.Mu = sp.coo_matrix((Me.ravel(), (rows, cols)), shape=shape).tocsr()[free][:, free]
        self.Su = sp.coo_matrix((Se.ravel(), (rows, cols)), shape=shape).tocsr()[free][:, free]

    # --------------------------------------------------------------
    def factor(self):
        if self._factor is None and self.K.shape[0] <= DIRECT_LIMIT:
            self._factor = spla.splu(self.K)
        return self._factor

    def rhs(self, load_u):
        """Full free right-hand side from a load on the free displacement DOFs."""
        b = np.zeros(len(self.free_idx))
        b[:self.nfree_u] = load_u
        return b

    def solve(self, load_u, rtol=1e-10):
        b = self.rhs(load_u)
        x, info = sparse_solve(self.K, b, rtol=rtol, factor=self.factor())
        return x, info

    def stresses(self, x):
        """Element stress coefficients (ne, nsig) from a free solution vector."""
        full = np.zeros(self.ndof)
        full[self.free_idx] = x
        w = full[self.cols]
        adet = np.abs(self.mesh.detj)
        return np.einsum("ab,nbj,nj->na", np.linalg.inv(self.Mhat), self.B, w) / adet[:, None]

    def norm_parts(self, x):
        """(|V|^2, |grad V|^2, |sigma|^2) of a free solution vector."""
        u = x[:self.nfree_u]
        return float(u @ (self.Mu @ u)), float(u @ (self.Su @ u)), float(x @ (self.K @ x))

    def displacement(self, x):
        full = np.zeros(self.nu)
        full[self.V.free] = x[:self.nfree_u]
        return self.V.field(full)


_HHJ_CACHE = {}


def assemble_hhj_biharmonic(mesh: Mesh, m: int) -> HHJSystem:
    """Cached condensed HHJ system for displacement order ``m``."""
    key = (id(mesh), m)
    sysm = _HHJ_CACHE.get(key)
    if sysm is None or sysm.mesh is not mesh:
        if len(_HHJ_CACHE) >= 2:   # factors of fine 3D systems take hundreds of MB
            _HHJ_CACHE.clear()
        sysm = HHJSystem(mesh, m)
        _HHJ_CACHE[key] = sysm
    return sysm


def saddle_matrix(hhj: HHJSystem) -> SparseSystem:
    """Uncondensed symmetric saddle system [[M, -B], [-B^T, 0]] (for small problems)."""
    mesh = hhj.mesh
    ne = mesh.n_elements
    nsig = hhj.Mhat.shape[0]
    adet = np.abs(mesh.detj)
    sig_ids = np.arange(ne * nsig).reshape(ne, nsig)
    ns = ne * nsig
    Mr = np.repeat(sig_ids[:, :, None], nsig, axis=2).ravel()
    Mc = np.repeat(sig_ids[:, None, :], nsig, axis=1).ravel()
    Mv = (adet[:, None, None] * hhj.Mhat[None]).ravel()
    ncol = hhj.cols.shape[1]
    Br = np.repeat(sig_ids[:, :, None], ncol, axis=2).ravel()
    Bc = np.repeat(hhj.cols[:, None, :], nsig, axis=1).ravel() + ns
    Bv = hhj.B.ravel()
    n = ns + hhj.ndof
    A = sp.coo_matrix((np.concatenate([Mv, -Bv, -Bv]),
                       (np.concatenate([Mr, Br, Bc]), np.concatenate([Mc, Bc, Br]))), shape=(n, n)).tocsr()
    free = np.concatenate([np.arange(ns), ns + hhj.free_idx])
    A = A[free][:, free]
    return SparseSystem(A, blocks=dict(stress=ns, primal=len(hhj.free_idx)), free=free)


# ----------------------------------------------------------------------
# dual norms

@dataclass
class DualNormReport:
    components: np.ndarray
    total: float
    residuals: list
    m: int
    ndof: int
    valid: bool = True

    def __post_init__(self):
        assert abs(self.total ** 2 - float(np.sum(self.components ** 2))) <= 1e-12 * max(self.total ** 2, 1e-300)


def hminus2_norm(f, m: int = None, rtol=1e-10) -> DualNormReport:
    """H^-2 norm estimate of an :class:`AssembledFunctional` on P_m displacements."""
    space = f.space
    m = m or space.order
    if space.order != m:
        raise ValueError("functional assembled against a different displacement order")
    hhj = assemble_hhj_biharmonic(space.mesh, m)
    comps, res = [], []
    valid = True
    for c in range(f.values.shape[1]):
        load = f.values[:, c]
        if not np.any(load):
            comps.append(0.0)
            res.append(0.0)
            continue
        try:
            x, info = hhj.solve(load, rtol)
        except RuntimeError as err:
            log.warning("component %d: %s", c, err)
            comps.append(np.nan)
            res.append(np.inf)
            valid = False
            continue
        comps.append(math.sqrt(sum(hhj.norm_parts(x))))
        res.append(info.residual)
    comps = np.array(comps)
    total = float(np.sqrt(np.sum(comps ** 2)))
    return DualNormReport(comps, total, res, m, len(hhj.free_idx), valid)


def load_vector(space: LagrangeSpace, fn, exactness=None):
    """Free-DOF load vector of v -> int fn(x) v dx (scalar ``fn``)."""
    mesh = space.mesh
    d = mesh.dim
    r = quad_rule(d, exactness or 2 * space.order + 4)
    ne = mesh.n_elements
    out = np.zeros(space.ndof)
    allel = np.arange(ne)
    for xq, wq in zip(r.points, r.weights):
        xi = np.broadcast_to(xq, (ne, d))
        phi = space.basis(allel, xi, 0)
        fx = fn(mesh.to_physical(allel, xi))
        contrib = wq * np.abs(mesh.detj)[:, None] * fx[:, None] * phi
        out += np.bincount(space.dofmap.ravel(), weights=contrib.ravel(), minlength=space.ndof)
    return out[space.free]
