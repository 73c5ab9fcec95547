"""Linearization of the distributional curvature and related functionals.

The evolution of the densitized curvature along a metric path splits into a
form ``a(g; sigma, U)`` without derivatives of ``sigma`` and a form
``b(g; sigma, U)`` that carries derivatives and jumps of ``sigma``.  Both are
returned as :class:`~reggecurv.curvature.PointMeasure` objects in the test
field, built from the specialized 2D and 3D expressions.  An independent
route through Riemann-symmetric 4-tensors gives the distributional
incompatibility, which is tied to ``b`` by ``b = -2 inc~``.

The probe functionals F1, F2, F3 integrate bone terms along the straight path
``g(t) = g + t (g_h - g)`` with Gauss quadrature in ``t``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .curvature import (BoneData, FacetSide, MeshQuadrature, PointMeasure, _chunks, _empty,
                        _evaluate_metric, _frame_outer, curvature_measure, default_degrees,
                        mesh_quadrature)
from .fields import gauss_legendre01
from .manufactured import LinearCombination, flat_metric


def _eval(field, elem, xi, nderiv):
    return _evaluate_metric(field, elem, xi, nderiv)


def _outer(a, b):
    return np.einsum("ni,nj->nij", a, b)


def _sym(M):
    return 0.5 * (M + np.swapaxes(M, -1, -2))


# ----------------------------------------------------------------------
# metric paths

class MetricPath:
    """Straight path g(t) = g + t (g_h - g) between a metric and its approximation."""

    def __init__(self, g, g_h):
        self.g = g
        self.g_h = g_h
        self.sigma = LinearCombination([(1.0, g_h), (-1.0, g)])

    def at(self, t):
        if t == 0.0:
            return self.g
        if t == 1.0:
            return self.g_h
        return LinearCombination([(1.0 - t, self.g), (t, self.g_h)])


@dataclass
class TQuadrature:
    """Gauss-Legendre rule on [0, 1]."""
    n: int = 5

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one t-point")
        self.points, self.weights = gauss_legendre01(self.n)


def perturbed(g, sigma, eps):
    """Evaluator of g + eps * sigma."""
    return LinearCombination([(1.0, g), (eps, sigma)])


# ----------------------------------------------------------------------
# a-form

def a_form_measure(g, sigma, mesh, q: MeshQuadrature = None, k=1):
    """Point measure of U -> a(g; sigma, U).  Identically zero in 2D."""
    if q is None:
        q = mesh_quadrature(mesh, **default_degrees(k))
    d = mesh.dim
    if d == 2:
        return _empty(mesh, "scalar")
    out = _empty(mesh, "matrix")
    for sl in _chunks(len(q.v_elem)):
        elem, xi = q.v_elem[sl], q.v_xi[sl]
        pg = geo.PointGeometry(*_eval(g, elem, xi, 2))
        s = _eval(sigma, elem, xi, 0)[0]
        om = pg.sqrtdet * q.v_w[sl]
        # Q:sigma:U = tr(Q^ sigma g^-1 U)
        M = np.einsum("nij,njk,nkl->nli", pg.Q_contra, s, pg.ginv)
        out = out + PointMeasure(mesh, elem, xi, -2 * _sym(M) * om[:, None, None], "matrix")
    for side in range(2):
        for sl in _chunks(len(q.f_w)):
            fs = FacetSide(g, q, side, 1, sl)
            s = _eval(sigma, fs.elem, fs.xi, 0)[0]
            sF = geo.tangential_restriction(s, fs.tau)
            M = np.einsum("nab,nbc->nac", fs.II, geo.trace_reverse(sF))
            N = np.swapaxes(M, 1, 2) - np.trace(M, axis1=1, axis2=2)[:, None, None] * np.eye(2)
            D = -2 * _frame_outer(fs.tau, _sym(N)) * fs.omega[:, None, None]
            out = out + PointMeasure(mesh, fs.elem, fs.xi, D, "matrix")
    if q.b_n:
        bd = BoneData(g, q)
        f = bd.first
        elem, xi = q.b_elem[f], q.b_xi[f]
        s = _eval(sigma, elem, xi, 0)[0]
        stt = geo.g_dot(s, bd.tau, bd.tau)
        D = -2 * (bd.theta * stt * bd.omega)[:, None, None] * _outer(bd.tau, bd.tau)
        out = out + PointMeasure(mesh, elem, xi, D, "matrix")
    out.meta.update(kind="a_form")
    return out


# ----------------------------------------------------------------------
# b-form

def _bone_normal_conormal_sum(bd: BoneData, sigma, q: MeshQuadrature):
    """Per bone point: sum over facets F of E of [sigma_{nu mu}]_F."""
    s = _eval(sigma, q.b_elem, q.b_xi, 0)[0]
    per = sum(geo.g_dot(s, bd.nu[i], bd.mu[i]) for i in range(2))
    return bd.sum_over_ring(per)


def b_form_measure(g, sigma, mesh, q: MeshQuadrature = None, k=1, edge_sign=1.0):
    """Point measure of U -> b(g; sigma, U) from the specialized 2D/3D formulas.

    ``edge_sign`` multiplies the bone term; it exists to check that a flipped
    jump convention is caught by the linearization test.
    """
    if q is None:
        q = mesh_quadrature(mesh, **default_degrees(k))
    d = mesh.dim
    kind = "scalar" if d == 2 else "matrix"
    out = _empty(mesh, kind)
    for sl in _chunks(len(q.v_elem)):
        elem, xi = q.v_elem[sl], q.v_xi[sl]
        pg = geo.PointGeometry(*_eval(g, elem, xi, 2))
        s, ds, d2s = _eval(sigma, elem, xi, 2)
        om = pg.sqrtdet * q.v_w[sl]
        if d == 2:
            D = -2 * geo.inc_2d(s, ds, d2s, pg) * om
        else:
            D = -2 * geo.covariant_inc(s, ds, d2s, pg) * om[:, None, None]
        out = out + PointMeasure(mesh, elem, xi, D, kind)
    for side in range(2):
        for sl in _chunks(len(q.f_w)):
            fs = FacetSide(g, q, side, 1, sl)
            s, ds = _eval(sigma, fs.elem, fs.xi, 1)
            Ds = geo.cov_deriv(s, ds, fs.pg.G2)                      # [n,p,i,j]
            nu, tau = fs.nu, fs.tau
            snn = geo.g_dot(s, nu, nu)
            if d == 2:
                t = tau[:, 0]
                kap = fs.II[:, 0, 0]
                Dt_nt = np.einsum("np,npij,ni,nj->n", t, Ds, nu, t)
                Dn_tt = np.einsum("np,npij,ni,nj->n", nu, Ds, t, t)
                stt = geo.g_dot(s, t, t)
                D = 2 * (2 * Dt_nt - Dn_tt - kap * stt + kap * snn) * fs.omega
            else:
                curl = geo.covariant_curl(s, ds, fs.pg)
                Aup = np.einsum("nia,nka->nik", fs.pg.ginv, curl)         # A^i_k, A = curl^T
                nlow = np.einsum("nij,nj->ni", fs.pg.g, nu)
                X = np.einsum("njkl,nik,nl->nij", fs.pg.eps_up, Aup, nlow)
                tlow = np.einsum("nij,naj->nai", fs.pg.g, tau)
                XF = np.einsum("nai,nij,nbj->nab", tlow, X, tlow)
                sF = geo.tangential_restriction(s, tau)
                V = (np.einsum("nap,npij,ni,nbj->nab", tau, Ds, nu, tau)
                     - np.einsum("nac,ncb->nab", fs.II, sF))
                C = XF - snn[:, None, None] * geo.trace_reverse(fs.II) - geo.trace_reverse(V)
                D = 2 * _frame_outer(tau, _sym(C)) * fs.omega[:, None, None]
            out = out + PointMeasure(mesh, fs.elem, fs.xi, D, kind)
    if q.b_n:
        bd = BoneData(g, q)
        jmp = _bone_normal_conormal_sum(bd, sigma, q)
        f = bd.first
        if d == 2:
            D = 2 * edge_sign * jmp * bd.omega
        else:
            D = 2 * edge_sign * (jmp * bd.omega)[:, None, None] * _outer(bd.tau, bd.tau)
        out = out + PointMeasure(mesh, q.b_elem[f], q.b_xi[f], D, kind)
    out.meta.update(kind="b_form")
    return out


def a_form(g, sigma, U, q=None, k=1):
    return a_form_measure(g, sigma, U.mesh, q, k)(U)


def b_form(g, sigma, U, q=None, k=1, edge_sign=1.0):
    return b_form_measure(g, sigma, U.mesh, q, k, edge_sign)(U)


# ----------------------------------------------------------------------
# generic distributional incompatibility through 4-tensors

def _unit_tests(d):
    if d == 2:
        return [np.ones(1)]
    out = []
    for a in range(3):
        for b in range(3):
            E = np.zeros((3, 3))
            E[a, b] = 1.0
            out.append(E)
    return out


def _amap_unit(u, pg):
    if pg.dim == 2:
        return geo.amap(np.full(pg.n, float(u[0])), pg)
    return geo.amap(np.broadcast_to(u, (pg.n, 3, 3)), pg)


def _stack(vals, d):
    if d == 2:
        return vals[0]
    return np.stack(vals, axis=1).reshape(-1, 3, 3)


def distributional_inc_measure(g, sigma, mesh, q: MeshQuadrature = None, k=1):
    """Point measure of U -> inc~ sigma (A U), assembled from 4-tensor contractions.

    Volume part ``-<nabla^2 sigma, S A>``; facet part pairs
    ``sigma_nn II + (nabla sigma)_{F nu F} + nabla(nu _| sigma) - (nabla sigma)_{nu F F}``
    with ``A(., nu, nu, .)`` on each element boundary (inward normal); bone
    part ``- sum_F [sigma_{mu nu}] A_{mu nu nu mu}`` with inward normals and
    conormals pointing from the bone into the facet.
    """
    if q is None:
        q = mesh_quadrature(mesh, **default_degrees(k))
    d = mesh.dim
    kind = "scalar" if d == 2 else "matrix"
    units = _unit_tests(d)
    out = _empty(mesh, kind)
    for sl in _chunks(len(q.v_elem), 5000):
        elem, xi = q.v_elem[sl], q.v_xi[sl]
        pg = geo.PointGeometry(*_eval(g, elem, xi, 2))
        s, ds, d2s = _eval(sigma, elem, xi, 2)
        H = geo.cov_hessian(s, ds, d2s, pg)                           # [n,k,l,i,j]
        om = pg.sqrtdet * q.v_w[sl]
        vals = []
        for u in units:
            Aup = geo.raise4(_amap_unit(u, pg), pg.ginv)
            vals.append(-np.einsum("nklij,nkilj->n", H, Aup) * om)
        out = out + PointMeasure(mesh, elem, xi, _stack(vals, d), kind)
    for side in range(2):
        for sl in _chunks(len(q.f_w), 5000):
            fs = FacetSide(g, q, side, 1, sl)
            s, ds = _eval(sigma, fs.elem, fs.xi, 1)
            Ds = geo.cov_deriv(s, ds, fs.pg.G2)
            nu, tau = fs.nu, fs.tau
            snn = geo.g_dot(s, nu, nu)
            sF = geo.tangential_restriction(s, tau)
            DFnF = np.einsum("nap,npij,ni,nbj->nab", tau, Ds, nu, tau)
            DnFF = np.einsum("np,npij,nai,nbj->nab", nu, Ds, tau, tau)
            grad_nu_s = DFnF - np.einsum("nac,ncb->nab", fs.II, sF)
            W = snn[:, None, None] * fs.II + DFnF + grad_nu_s - DnFF
            vals = []
            for u in units:
                A = _amap_unit(u, fs.pg)
                AF = np.einsum("nijkl,nai,nj,nk,nbl->nab", A, tau, nu, nu, tau)
                vals.append(-np.einsum("nab,nab->n", W, AF) * fs.omega)
            out = out + PointMeasure(mesh, fs.elem, fs.xi, _stack(vals, d), kind)
    if q.b_n:
        bd = BoneData(g, q)
        jmp = _bone_normal_conormal_sum(bd, sigma, q)
        f = bd.first
        pg = geo.PointGeometry(bd.pg.g[f])
        nu, mu = bd.nu[0][f], bd.mu[0][f]
        vals = []
        for u in units:
            A = _amap_unit(u, pg)
            vals.append(-jmp * np.einsum("nijkl,ni,nj,nk,nl->n", A, mu, nu, nu, mu) * bd.omega)
        out = out + PointMeasure(mesh, q.b_elem[f], q.b_xi[f], _stack(vals, d), kind)
    out.meta.update(kind="inc")
    return out


def distributional_inc(g, sigma, U, q=None, k=1):
    return distributional_inc_measure(g, sigma, U.mesh, q, k)(U)


# ----------------------------------------------------------------------
# Euclidean 3D distributional incompatibility

def _euclidean_inc(d2s):
    e = geo.EPS[3]
    return np.einsum("jpq,irs,nprqs->nij", e, e, d2s)


def _euclidean_curl(ds):
    """[curl s]_ij = eps_pqj d_p s_iq."""
    return np.einsum("pqj,npiq->nij", geo.EPS[3], ds)


def distributional_inc_euclidean_measure(sigma, mesh, q: MeshQuadrature = None, k=1):
    """Distributional inc of a piecewise smooth sigma for the identity metric in 3D."""
    if mesh.dim != 3:
        raise ValueError("Euclidean distributional inc is implemented for dim 3")
    if q is None:
        q = mesh_quadrature(mesh, **default_degrees(k))
    out = _empty(mesh, "matrix")
    for sl in _chunks(len(q.v_elem)):
        elem, xi = q.v_elem[sl], q.v_xi[sl]
        _, _, d2s = _eval(sigma, elem, xi, 2)
        out = out + PointMeasure(mesh, elem, xi, _euclidean_inc(d2s) * q.v_w[sl][:, None, None], "matrix")
    for side in range(2):
        for sl in _chunks(len(q.f_w)):
            elem, xi = q.f_elem[side][sl], q.f_xi[side][sl]
            s, ds = _eval(sigma, elem, xi, 1)
            nhat = q.f_nhat[side][sl]
            nu = nhat / np.linalg.norm(nhat, axis=1)[:, None]
            T = q.f_T[sl]
            t1 = T[:, 0] / np.linalg.norm(T[:, 0], axis=1)[:, None]
            t2 = np.cross(nu, t1)
            tau = np.stack([t1, t2], axis=1)
            # reference facet weights sum to 1/2
            w = q.f_w[sl] * np.linalg.norm(np.cross(T[:, 0], T[:, 1]), axis=1)
            X = np.einsum("nki,jkl,nl->nij", _euclidean_curl(ds), geo.EPS[3], nu)
            XF = np.einsum("nai,nij,nbj->nab", tau, X, tau)
            G = np.einsum("nap,npij,ni,nbj->nab", tau, ds, nu, tau)      # grad^F sigma_nu
            C = XF - geo.trace_reverse(G)
            D = -_frame_outer(tau, _sym(C)) * w[:, None, None]
            out = out + PointMeasure(mesh, elem, xi, D, "matrix")
    if q.b_n:
        bd = BoneData(flat_metric(3).bind(mesh), q)
        jmp = _bone_normal_conormal_sum(bd, sigma, q)
        f = bd.first
        D = -(jmp * bd.omega)[:, None, None] * _outer(bd.tau, bd.tau)
        out = out + PointMeasure(mesh, q.b_elem[f], q.b_xi[f], D, "matrix")
    out.meta.update(kind="inc_euclidean")
    return out


def distributional_inc_euclidean(sigma, Phi, q=None, k=1):
    return distributional_inc_euclidean_measure(sigma, Phi.mesh, q, k)(Phi)


# ----------------------------------------------------------------------
# linearization check

def linearization_defect(g, sigma, U, eps_list=(1e-2, 5e-3, 2.5e-3), q=None, k=1, edge_sign=1.0):
    """Central differences of the curvature functional against a + b.

    Returns ``(eps, fd, ab, defects)``; in 3D the derivative of
    ``4 Q~w(U)`` is compared, in 2D that of ``4 K~w(u)``.
    """
    mesh = U.mesh
    if q is None:
        q = mesh_quadrature(mesh, **default_degrees(k))
    kind = "gauss" if mesh.dim == 2 else "qop"
    ab = a_form(g, sigma, U, q) + b_form(g, sigma, U, q, edge_sign=edge_sign)
    fd = []
    for eps in eps_list:
        fp = curvature_measure(perturbed(g, sigma, eps), mesh, kind, q)(U)
        fm = curvature_measure(perturbed(g, sigma, -eps), mesh, kind, q)(U)
        fd.append(4 * (fp - fm) / (2 * eps))
    fd = np.array(fd)
    return np.array(eps_list), fd, ab, fd - ab


def observed_orders(x, e):
    """log(e_i / e_{i+1}) / log(x_i / x_{i+1}) for consecutive pairs."""
    x, e = np.asarray(x, float), np.abs(np.asarray(e, float))
    return np.log(e[:-1] / e[1:]) / np.log(x[:-1] / x[1:])


# ----------------------------------------------------------------------
# probe functionals

def _probe_measures(path: MetricPath, mesh, tq: TQuadrature, q: MeshQuadrature):
    f1 = _empty(mesh, "matrix")
    f2 = _empty(mesh, "matrix")
    if not q.b_n:
        return f1, f2
    s_all = _eval(path.sigma, q.b_elem, q.b_xi, 0)[0]
    for t, wt in zip(tq.points, tq.weights):
        gt = path.at(t)
        try:
            bd = BoneData(gt, q)
        except ValueError as err:
            raise ValueError(f"path metric not positive definite at t={t:.4f}: {err}") from err
        f = bd.first
        stt = geo.g_dot(s_all[f], bd.tau, bd.tau)                       # (nb,)
        tt = _outer(bd.tau, bd.tau)
        D1 = 0.5 * wt * (stt * bd.theta * bd.omega)[:, None, None] * tt
        f1 = f1 + PointMeasure(mesh, q.b_elem[f], q.b_xi[f], D1, "matrix")
        c = -0.5 * wt * (stt * bd.omega)[q.b_bp]
        D2 = sum(_sym(_outer(bd.nu[i], bd.mu[i])) for i in range(2)) * c[:, None, None]
        f2 = f2 + PointMeasure(mesh, q.b_elem, q.b_xi, D2, "matrix")
    return f1, f2


def probe_measures(g, g_h, mesh, tq: TQuadrature = None, q: MeshQuadrature = None, k=1):
    """Point measures of the probe functionals (F1, F2, F3)."""
    if mesh.dim != 3:
        raise ValueError("probe functionals are defined for dim 3")
    tq = tq or TQuadrature(5)
    if q is None:
        q = mesh_quadrature(mesh, **default_degrees(k))
    f1, f2 = _probe_measures(MetricPath(g, g_h), mesh, tq, q)
    for m, name in ((f1, "F1"), (f2, "F2")):
        m.meta.update(kind=name)
    f3 = f1 + f2
    f3.meta.update(kind="F3")
    return f1, f2, f3


def probe_F1(g, g_h, U, tq=None, q=None, k=1):
    return probe_measures(g, g_h, U.mesh, tq, q, k)[0](U)


def probe_F2(g, g_h, U, tq=None, q=None, k=1):
    return probe_measures(g, g_h, U.mesh, tq, q, k)[1](U)


def probe_F3(g, g_h, U, tq=None, q=None, k=1):
    return probe_measures(g, g_h, U.mesh, tq, q, k)[2](U)
