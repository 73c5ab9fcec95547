"""Pointwise Riemannian geometry of a metric given with its derivatives.

All routines are vectorized over a leading point axis ``n``.  Index
conventions for arrays:

* ``g[n,i,j]``, ``dg[n,k,i,j] = d_k g_ij``, ``d2g[n,k,l,i,j] = d_k d_l g_ij``;
* ``G1[n,i,j,k] = Gamma_{ij,k}`` (first kind), ``G2[n,k,i,j] = Gamma^k_{ij}``;
* ``R[n,i,j,k,l] = R(d_i, d_j, d_k, d_l)`` with
  ``R(X,Y,Z,W) = g(nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z, W)``,
  so that a 2D surface has Gauss curvature ``R_1221 / det g``.
"""
from __future__ import annotations

import itertools
import warnings

import numpy as np


def levi_civita(d):
    """Integer permutation symbol of dimension ``d``."""
    eps = np.zeros((d,) * d)
    for p in itertools.permutations(range(d)):
        inv = sum(1 for a in range(d) for b in range(a + 1, d) if p[a] > p[b])
        eps[p] = -1.0 if inv % 2 else 1.0
    return eps


EPS = {2: levi_civita(2), 3: levi_civita(3)}


def christoffel(g, dg):
    """Christoffel symbols of the first and second kind."""
    G1 = 0.5 * (np.einsum("nijk->nijk", dg) + np.einsum("njik->nijk", dg)
                - np.einsum("nkij->nijk", dg))
    ginv = np.linalg.inv(g)
    G2 = np.einsum("nkl,nijl->nkij", ginv, G1)
    return G1, G2


class PointGeometry:
    """Geometry of a metric at a batch of points."""

    def __init__(self, g, dg=None, d2g=None):
        self.g = np.asarray(g, dtype=float)
        self.n, self.dim = self.g.shape[0], self.g.shape[1]
        ev = np.linalg.eigvalsh(self.g)
        if np.any(ev[:, 0] <= 0):
            raise ValueError("metric is not positive definite at an evaluation point")
        self.ginv = np.linalg.inv(self.g)
        self.det = np.linalg.det(self.g)
        self.sqrtdet = np.sqrt(self.det)
        self.dg = dg
        self.d2g = d2g
        if dg is not None:
            self.G1, self.G2 = christoffel(self.g, dg)
        if d2g is not None:
            self.dG1 = 0.5 * (np.einsum("nmijk->nmijk", d2g) + np.einsum("nmjik->nmijk", d2g)
                              - np.einsum("nmkij->nmijk", d2g))
            self.R = self._riemann()

    def _riemann(self):
        dG1, G1, G2 = self.dG1, self.G1, self.G2
        R = (np.einsum("nijkl->nijkl", dG1) - np.einsum("njikl->nijkl", dG1)
             + np.einsum("nmik,njlm->nijkl", G2, G1)
             - np.einsum("nmjk,nilm->nijkl", G2, G1))
        return R

    # -- derived curvature quantities ----------------------------------
    @property
    def R_contra(self):
        gi = self.ginv
        return np.einsum("nia,njb,nkc,nld,nabcd->nijkl", gi, gi, gi, gi, self.R)

    @property
    def eps_up(self):
        """Contravariant scaled permutation symbol eps / sqrt(det g)."""
        e = EPS[self.dim]
        return e[None] / self.sqrtdet.reshape((-1,) + (1,) * self.dim)

    @property
    def eps_down(self):
        e = EPS[self.dim]
        return e[None] * self.sqrtdet.reshape((-1,) + (1,) * self.dim)

    @property
    def gauss(self):
        """Gauss curvature (2D)."""
        return self.R[:, 0, 1, 1, 0] / self.det

    @property
    def ricci(self):
        """Ric_jk = g^{il} R_ijkl (covariant)."""
        return np.einsum("nil,nijkl->njk", self.ginv, self.R)

    @property
    def scalar(self):
        return np.einsum("njk,njk->n", self.ginv, self.ricci)

    @property
    def einstein(self):
        return self.ricci - 0.5 * self.scalar[:, None, None] * self.g

    @property
    def Q_contra(self):
        """Curvature operator Q^{ij} = -1/4 eps^{ikl} eps^{jmn} R_klmn (3D)."""
        eu = self.eps_up
        return -0.25 * np.einsum("zikl,zjab,zklab->zij", eu, eu, self.R)


def curvature_operator_3d(pg: PointGeometry, covariant=True):
    """3D curvature operator; covariant components by default."""
    Q = pg.Q_contra
    if covariant:
        return np.einsum("nia,nab,nbj->nij", pg.g, Q, pg.g)
    return Q


def _apply4(T, M):
    """M applied to every slot of a 4-tensor, one slot at a time."""
    T = np.einsum("nia,najkl->nijkl", M, T)
    T = np.einsum("nja,niakl->nijkl", M, T)
    T = np.einsum("nka,nijal->nijkl", M, T)
    return np.einsum("nla,nijka->nijkl", M, T)


def lower4(T, g):
    return _apply4(T, g)


def raise4(T, ginv):
    return _apply4(T, ginv)


def amap(U, pg: PointGeometry, covariant=True):
    """Algebraic map from (N-2)-form-valued symmetric tensors to 4-tensors.

    ``U`` has shape (n,) in 2D (scalar) and (n, 3, 3) in 3D.  Returns the
    4-tensor with all indices down (default) or up.
    """
    eu = pg.eps_up
    if pg.dim == 2:
        A = -np.einsum("nij,nkl,n->nijkl", eu, eu, np.asarray(U, dtype=float))
    else:
        A = -np.einsum("nija,nklb,nab->nijkl", eu, eu, U)
    return lower4(A, pg.g) if covariant else A


def amap_inv(A, pg: PointGeometry, covariant=True, check=True):
    """Inverse of :func:`amap`; ``A`` given covariant unless ``covariant=False``."""
    Aup = raise4(A, pg.ginv) if covariant else A
    if check:
        s = np.abs(Aup).max() + 1e-300
        if (np.abs(Aup + np.swapaxes(Aup, 1, 2)).max() > 1e-9 * s
                or np.abs(Aup - np.transpose(Aup, (0, 3, 4, 1, 2))).max() > 1e-9 * s):
            raise ValueError("input does not have the algebraic curvature symmetries")
    ed = pg.eps_down
    if pg.dim == 2:
        return -0.25 * np.einsum("nij,nkl,nijkl->n", ed, ed, Aup)
    return -0.25 * np.einsum("naij,nbkl,nijkl->nab", ed, ed, Aup)


def inner4(A_cov, B_cov, ginv):
    """Full contraction of two covariant 4-tensors."""
    return np.einsum("nijkl,nijkl->n", A_cov, raise4(B_cov, ginv))


def kulkarni_nomizu(h, k):
    """(h o k)(X,Y,Z,W) = h(X,W)k(Y,Z) + h(Y,Z)k(X,W) - h(X,Z)k(Y,W) - h(Y,W)k(X,Z)."""
    return (np.einsum("niw,njk->nijkw", h, k) + np.einsum("njk,niw->nijkw", h, k)
            - np.einsum("nik,njw->nijkw", h, k) - np.einsum("njw,nik->nijkw", h, k))


# ----------------------------------------------------------------------
# frames

def g_dot(g, X, Y):
    return np.einsum("ni,nij,nj->n", X, g, Y)


def g_normal(g, nhat):
    """Unit g-normal from a Euclidean conormal (covector) ``nhat``."""
    ginv = np.linalg.inv(g)
    v = np.einsum("nij,nj->ni", ginv, nhat)
    return v / np.sqrt(np.einsum("ni,ni->n", nhat, v))[:, None]


def gram_schmidt(g, vecs):
    """g-orthonormalize a batch of vector lists ``vecs`` (n, m, d)."""
    out = np.empty_like(vecs, dtype=float)
    for a in range(vecs.shape[1]):
        v = vecs[:, a].astype(float).copy()
        for b in range(a):
            v -= g_dot(g, out[:, b], v)[:, None] * out[:, b]
        out[:, a] = v / np.sqrt(g_dot(g, v, v))[:, None]
    return out


def conormal(g, bone_tangents, into):
    """Unit g-conormal of a bone pointing towards ``into`` within a facet.

    ``bone_tangents`` (n, d-2, d) spans the bone, ``into`` (n, d) is any
    vector from the bone into the facet.
    """
    if bone_tangents.shape[1] == 0:
        return into / np.sqrt(g_dot(g, into, into))[:, None]
    full = np.concatenate([bone_tangents, into[:, None, :]], axis=1)
    return gram_schmidt(g, full)[:, -1]


def sff(G1, nu, T):
    """Second fundamental form II(T_a, T_b) = T_a^i T_b^j Gamma_{ij,k} nu^k."""
    return np.einsum("nai,nbj,nijk,nk->nab", T, T, G1, nu)


def cross3(g, X, Y):
    """Metric cross product (X x Y)^i = eps^{ijk} X_j Y_k in 3D."""
    sq = np.sqrt(np.linalg.det(g))
    Xl = np.einsum("nij,nj->ni", g, X)
    Yl = np.einsum("nij,nj->ni", g, Y)
    return np.einsum("ijk,nj,nk->ni", EPS[3], Xl, Yl) / sq[:, None]


def interior_angle(g, mu1, mu2):
    """arccos of g(mu1, mu2) with clamping."""
    c = g_dot(g, mu1, mu2)
    if np.any(np.abs(c) > 1 + 1e-10):
        warnings.warn("conormal cosine outside [-1, 1] beyond tolerance")
    return np.arccos(np.clip(c, -1.0, 1.0))


def angle_deficit(angles):
    """2 pi minus the sum of interior angles (last axis)."""
    return 2 * np.pi - np.sum(angles, axis=-1)


# ----------------------------------------------------------------------
# derivatives of a symmetric 2-tensor field

def cov_deriv(s, ds, G2):
    """(nabla s)[n,p,i,j] = nabla_p s_ij."""
    return (ds - np.einsum("nmpi,nmj->npij", G2, s) - np.einsum("nmpj,nim->npij", G2, s))


def dG2_from(pg: PointGeometry):
    """d_q Gamma^m_{ij} as array [n,q,m,i,j]."""
    gi = pg.ginv
    t1 = np.einsum("nml,nqijl->nqmij", gi, pg.dG1)
    dgi = -np.einsum("nma,nqab,nbl->nqml", gi, pg.dg, gi)
    t2 = np.einsum("nqml,nijl->nqmij", dgi, pg.G1)
    return t1 + t2


def cov_hessian(s, ds, d2s, pg: PointGeometry):
    """Second covariant derivative [n,k,l,i,j] = nabla_k nabla_l s_ij."""
    G2 = pg.G2
    dG2 = dG2_from(pg)
    Ds = cov_deriv(s, ds, G2)                                  # [n,l,i,j]
    # d_k (nabla_l s_ij)
    dDs = (d2s
           - np.einsum("nkmli,nmj->nklij", dG2, s) - np.einsum("nmli,nkmj->nklij", G2, ds)
           - np.einsum("nkmlj,nim->nklij", dG2, s) - np.einsum("nmlj,nkim->nklij", G2, ds))
    return (dDs - np.einsum("nmkl,nmij->nklij", G2, Ds)
            - np.einsum("nmki,nlmj->nklij", G2, Ds)
            - np.einsum("nmkj,nlim->nklij", G2, Ds))


def covariant_curl(s, ds, pg: PointGeometry):
    """[curl s]_ij = eps^{pql} g_lj (d_p s_iq - Gamma^m_{pi} s_mq) (3D, covariant)."""
    C = ds - np.einsum("nmpi,nmq->npiq", pg.G2, s)           # [n,p,i,q]
    return np.einsum("npql,nlj,npiq->nij", pg.eps_up, pg.g, C)


def covariant_inc(s, ds, d2s, pg: PointGeometry):
    """[inc s]^{ij} from the 3D coordinate formula (contravariant)."""
    G2 = pg.G2
    dG2 = dG2_from(pg)
    eu = pg.eps_up
    # C[r,q,s] = d_r s_qs - Gamma^u_{rq} s_us
    C = ds - np.einsum("nurq,nus->nrqs", G2, s)
    # d_p C[r,q,s]
    dC = (d2s - np.einsum("npurq,nus->nprqs", dG2, s)
          - np.einsum("nurq,npus->nprqs", G2, ds))
    trG = np.einsum("nllp->np", G2)                            # Gamma^l_{lp}
    inner = dC - np.einsum("np,nrqs->nprqs", trG, C)
    t1 = np.einsum("npqj,nrsi,nprqs->nij", eu, eu, inner)
    t2 = np.einsum("npqj,nrst,nipt,nrqs->nij", eu, eu, G2, C)
    return t1 + t2


def inc_2d(s, ds, d2s, pg: PointGeometry):
    """Scalar covariant inc in 2D."""
    G2 = pg.G2
    dG2 = dG2_from(pg)
    eu = pg.eps_up
    # d_q (Gamma^m_{ji} s_mk)
    dGs = np.einsum("nqmji,nmk->nqjik", dG2, s) + np.einsum("nmji,nqmk->nqjik", G2, ds)
    trG = np.einsum("nllq->nq", G2)
    # d2s[n,j,q,i,k] = d_j d_q s_ik
    term = (np.einsum("njqik->nqjik", d2s) - dGs
            - np.einsum("nq,njik->nqjik", trG, ds - np.einsum("nmji,nmk->njik", G2, s)))
    return np.einsum("nqi,njk,nqjik->n", eu, eu, term)


def sym_grad(v, dv):
    """Euclidean symmetric gradient of a vector field, dv[n,k,i] = d_k v_i."""
    return 0.5 * (dv + np.swapaxes(dv, 1, 2))


def tangential_restriction(M, T):
    """Components M(T_a, T_b) of a 2-tensor in a tangent basis (n, m, d)."""
    return np.einsum("nai,nij,nbj->nab", T, M, T)


def trace_reverse(V):
    """S_F V = V - tr(V) I for components in an orthonormal facet basis."""
    m = V.shape[-1]
    return V - np.trace(V, axis1=-2, axis2=-1)[..., None, None] * np.eye(m)
