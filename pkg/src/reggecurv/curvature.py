"""Distributional densitized curvature functionals of Regge metrics.

Every functional here is of order zero in its test field, so it is stored as
a point measure: a list of (element, reference point, density) entries whose
action on a test field ``U`` is ``sum density : U(element, point)``.  In 2D the
density is a scalar paired with a scalar test field, in 3D a matrix paired
with a symmetric matrix field (or a scalar for the scalar curvature).

Volume, facet and bone contributions come from :class:`MeshQuadrature`.  On
facets each side is evaluated with its own metric and inward normal, and
the jump of the second fundamental form appears as the sum of the two
side contributions.  Bone terms use the angle deficit built from g-conormals
in every element of the bone ring.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .fields import quad_rule
from .mesh import Mesh
from .regge import LagrangeSpace, sym_basis


# ----------------------------------------------------------------------
# point sets

class MeshQuadrature:
    """Quadrature points on elements, interior facets and interior bones."""

    def __init__(self, mesh: Mesh, vol_deg=8, facet_deg=6, bone_deg=6):
        self.mesh = mesh
        self.vol_deg, self.facet_deg, self.bone_deg = vol_deg, facet_deg, bone_deg
        self._volume()
        self._facets()
        self._bones()

    def _volume(self):
        mesh = self.mesh
        r = quad_rule(mesh.dim, self.vol_deg)
        ne, nq = mesh.n_elements, len(r.weights)
        self.v_elem = np.repeat(np.arange(ne), nq)
        self.v_xi = np.tile(r.points, (ne, 1))
        self.v_w = (r.weights[None, :] * np.abs(mesh.detj)[:, None]).ravel()

    def _facets(self):
        mesh = self.mesh
        d = mesh.dim
        r = quad_rule(d - 1, self.facet_deg)
        fids = np.flatnonzero(mesh.interior_facet)
        nq = len(r.weights)
        self.f_ids = np.repeat(fids, nq)
        self.f_w = np.tile(r.weights, len(fids))
        fv = mesh.facets[fids]
        X = mesh.vertices[fv]
        T = X[:, 1:] - X[:, :1]                              # (nf, d-1, d)
        self.f_T = np.repeat(T, nq, axis=0)
        self.f_elem, self.f_xi, self.f_nhat = [], [], []
        for s in range(2):
            e = mesh.facet_elems[fids, s]
            loc = np.argmax(mesh.elements[e][:, None, :] == fv[:, :, None], axis=2)
            Vr = np.vstack([np.zeros(d), np.eye(d)])[loc]    # (nf, d, d)
            xi = np.einsum("qs,fsd->fqd", r.bary, Vr).reshape(-1, d)
            self.f_elem.append(np.repeat(e, nq))
            self.f_xi.append(xi)
            j = mesh.facet_local[fids, s]
            self.f_nhat.append(np.repeat(_grad_bary(mesh, e, j), nq, axis=0))
        self.f_x = mesh.to_physical(self.f_elem[0], self.f_xi[0])

    def _bones(self):
        """Flattened (bone point, ring entry) data."""
        mesh = self.mesh
        d = mesh.dim
        rings = mesh.bones
        if d == 2:
            bary = np.ones((1, 1))
            wq = np.ones(1)
        else:
            r = quad_rule(1, self.bone_deg)
            bary, wq = r.bary, r.weights
        nq = len(wq)
        elem, xi, bp, dir_p, dir_m, nh_p, nh_m, first = [], [], [], [], [], [], [], []
        b_w, b_tan, b_vert = [], [], []
        V = mesh.vertices
        Vr_all = np.vstack([np.zeros(d), np.eye(d)])
        count = 0
        for ring in rings:
            bv = list(ring.vertices)
            tan = (V[bv[1]] - V[bv[0]])[None, :] if d == 3 else np.zeros((0, d))
            for q in range(nq):
                for k, (T, fp, fm) in enumerate(ring.ring):
                    el = list(mesh.elements[T])
                    loc = [el.index(v) for v in bv]
                    elem.append(T)
                    xi.append(bary[q] @ Vr_all[loc])
                    bp.append(count)
                    first.append(k == 0)
                    for f, dl, nl in ((fp, dir_p, nh_p), (fm, dir_m, nh_m)):
                        opp = [v for v in mesh.facets[f] if v not in bv][0]
                        dl.append(V[opp] - V[bv[0]])
                        jloc = [j for j in range(d + 1) if el[j] not in mesh.facets[f]][0]
                        nl.append(_grad_bary(mesh, np.array([T]), np.array([jloc]))[0])
                b_w.append(wq[q])
                b_tan.append(tan)
                b_vert.append(bv)
                count += 1
        self.b_n = count
        self.b_elem = np.array(elem, dtype=np.int64)
        self.b_xi = np.array(xi).reshape(-1, d)
        self.b_bp = np.array(bp, dtype=np.int64)
        self.b_first = np.array(first, dtype=bool)
        self.b_dir = [np.array(dir_p).reshape(-1, d), np.array(dir_m).reshape(-1, d)]
        self.b_nhat = [np.array(nh_p).reshape(-1, d), np.array(nh_m).reshape(-1, d)]
        self.b_w = np.array(b_w)
        self.b_tan = np.array(b_tan).reshape(count, d - 2, d)


def _grad_bary(mesh, elems, jloc):
    """Euclidean gradient of barycentric coordinate ``jloc`` (inward facet conormal)."""
    Ji = mesh.jinv[elems]                                    # (n, d, d), rows = grad xi_a
    g0 = -Ji.sum(axis=1)
    out = np.where((jloc == 0)[:, None], g0, Ji[np.arange(len(elems)), np.maximum(jloc - 1, 0)])
    return out


_QUAD_CACHE = {}


def mesh_quadrature(mesh, vol_deg=8, facet_deg=6, bone_deg=6):
    key = (id(mesh), vol_deg, facet_deg, bone_deg)
    q = _QUAD_CACHE.get(key)
    if q is None or q.mesh is not mesh:
        q = MeshQuadrature(mesh, vol_deg, facet_deg, bone_deg)
        _QUAD_CACHE[key] = q
    return q


def default_degrees(k):
    """Quadrature exactness 2k+6 on elements and 2k+4 on facets and bones."""
    return dict(vol_deg=2 * k + 6, facet_deg=2 * k + 4, bone_deg=2 * k + 4)


# ----------------------------------------------------------------------
# point measures

@dataclass
class PointMeasure:
    """Linear functional sum_i D_i : U(elem_i, xi_i)."""
    mesh: Mesh
    elem: np.ndarray
    xi: np.ndarray
    dens: np.ndarray
    kind: str                                   # "scalar" or "matrix"
    meta: dict = field(default_factory=dict)

    def __call__(self, U):
        if len(self.elem) == 0:
            return 0.0
        vals = U.evaluate(self.elem, self.xi, 0)
        if isinstance(vals, tuple):
            vals = vals[0]
        if self.kind == "scalar":
            return float(np.sum(self.dens * vals))
        return float(np.einsum("nij,nij->", self.dens, vals))

    def __add__(self, other):
        return PointMeasure(self.mesh, np.concatenate([self.elem, other.elem]),
                            np.concatenate([self.xi, other.xi]),
                            np.concatenate([self.dens, other.dens]), self.kind, dict(self.meta))

    def scaled(self, a):
        return PointMeasure(self.mesh, self.elem, self.xi, a * self.dens, self.kind, dict(self.meta))

    def __sub__(self, other):
        return self + other.scaled(-1.0)


def _empty(mesh, kind):
    d = mesh.dim
    shape = (0,) if kind == "scalar" else (0, d, d)
    return PointMeasure(mesh, np.zeros(0, dtype=np.int64), np.zeros((0, d)), np.zeros(shape), kind)


def _evaluate_metric(metric, elem, xi, nderiv):
    r = metric.evaluate(elem, xi, nderiv)
    if not isinstance(r, tuple):
        r = (r,)
    return r


def _chunks(n, size=20000):
    for s in range(0, n, size):
        yield slice(s, min(n, s + size))


# ----------------------------------------------------------------------
# per-point frames

class FacetSide:
    """Metric data on one side of the interior facet quadrature points."""

    def __init__(self, metric, q: MeshQuadrature, s, nderiv=1, sl=slice(None)):
        elem, xi = q.f_elem[s][sl], q.f_xi[s][sl]
        r = _evaluate_metric(metric, elem, xi, nderiv)
        self.pg = geo.PointGeometry(*r)
        g = self.pg.g
        self.elem, self.xi = elem, xi
        self.nu = geo.g_normal(g, q.f_nhat[s][sl])
        self.tau = geo.gram_schmidt(g, q.f_T[sl])                     # (n, d-1, d)
        gram = np.einsum("nai,nij,nbj->nab", q.f_T[sl], g, q.f_T[sl])
        self.omega = np.sqrt(np.linalg.det(gram)) * q.f_w[sl]
        if nderiv >= 1:
            self.II = geo.sff(self.pg.G1, self.nu, self.tau)


class BoneData:
    """Angle deficits and frames at bone quadrature points."""

    def __init__(self, metric, q: MeshQuadrature, nderiv=0):
        self.q = q
        d = q.mesh.dim
        r = _evaluate_metric(metric, q.b_elem, q.b_xi, nderiv)
        self.pg = geo.PointGeometry(*r)
        g = self.pg.g
        tan = q.b_tan[q.b_bp]                                          # (m, d-2, d)
        self.mu = [geo.conormal(g, tan, q.b_dir[s]) for s in range(2)]
        self.nu = [geo.g_normal(g, q.b_nhat[s]) for s in range(2)]
        ang = geo.interior_angle(g, self.mu[0], self.mu[1])
        self.theta = 2 * np.pi - np.bincount(q.b_bp, weights=ang, minlength=q.b_n)
        first = np.flatnonzero(q.b_first)
        self.first = first
        self.g_first = g[first]
        if d == 3:
            e = q.b_tan[:, 0, :]
            le = np.sqrt(geo.g_dot(self.g_first, e, e))
            self.tau = e / le[:, None]
            self.omega = le * q.b_w
        else:
            self.tau = np.zeros((q.b_n, d))
            self.omega = q.b_w.copy()

    def sum_over_ring(self, vals):
        return np.bincount(self.q.b_bp, weights=vals, minlength=self.q.b_n)


# ----------------------------------------------------------------------
# specialized functionals

def _frame_outer(tau, C):
    """sum_ab C_ab tau_a tau_b^T -> (n, d, d)."""
    return np.einsum("nab,nai,nbj->nij", C, tau, tau)


def curvature_measure(metric, mesh: Mesh, kind, q: MeshQuadrature = None, k=1,
                      parts=("volume", "facet", "bone")):
    """Point measure of a distributional curvature functional.

    ``kind`` is one of ``gauss`` (2D), ``scalar``, ``ricci``, ``einstein`` (3D),
    ``qop`` (3D curvature operator).
    """
    if q is None:
        q = mesh_quadrature(mesh, **default_degrees(k))
    d = mesh.dim
    if kind == "gauss" and d != 2:
        raise ValueError("Gauss curvature functional needs dim 2")
    if kind in ("einstein", "qop") and d != 3:
        raise ValueError(f"{kind} functional needs dim 3")
    skind = "scalar" if kind in ("gauss", "scalar") else "matrix"
    out = _empty(mesh, skind)
    if "volume" in parts:
        for sl in _chunks(len(q.v_elem)):
            elem, xi = q.v_elem[sl], q.v_xi[sl]
            pg = geo.PointGeometry(*_evaluate_metric(metric, elem, xi, 2))
            om = pg.sqrtdet * q.v_w[sl]
            if kind == "gauss":
                D = pg.gauss * om
            elif kind == "scalar":
                D = pg.scalar * om
            elif kind == "ricci":
                D = np.einsum("nia,nab,nbj->nij", pg.ginv, pg.ricci, pg.ginv) * om[:, None, None]
            elif kind == "einstein":
                D = np.einsum("nia,nab,nbj->nij", pg.ginv, pg.einstein, pg.ginv) * om[:, None, None]
            elif kind == "qop":
                D = pg.Q_contra * om[:, None, None]
            else:
                raise ValueError(kind)
            out = out + PointMeasure(mesh, elem, xi, D, skind)
    if "facet" in parts and len(q.f_w):
        for s in range(2):
            for sl in _chunks(len(q.f_w)):
                fs = FacetSide(metric, q, s, 1, sl)
                II, tau, om = fs.II, fs.tau, fs.omega
                H = np.trace(II, axis1=1, axis2=2)
                IIbar = geo.trace_reverse(II)
                if kind == "gauss":
                    D = II[:, 0, 0] * om
                elif kind == "scalar":
                    D = 2 * H * om
                elif kind == "ricci":
                    D = (_frame_outer(tau, II) + H[:, None, None] * np.einsum("ni,nj->nij", fs.nu, fs.nu)) * om[:, None, None]
                elif kind == "einstein":
                    D = _frame_outer(tau, IIbar) * om[:, None, None]
                else:   # qop
                    D = -_frame_outer(tau, IIbar) * om[:, None, None]
                out = out + PointMeasure(mesh, fs.elem, fs.xi, D, skind)
    if "bone" in parts and q.b_n:
        bd = BoneData(metric, q)
        th, om, f = bd.theta, bd.omega, bd.first
        elem, xi = q.b_elem[f], q.b_xi[f]
        nu, mu = bd.nu[0][f], bd.mu[0][f]
        if kind == "gauss":
            D = th * om
        elif kind == "scalar":
            D = 2 * th * om
        elif kind == "ricci":
            D = (np.einsum("ni,nj->nij", nu, nu) + np.einsum("ni,nj->nij", mu, mu)) * (th * om)[:, None, None]
        elif kind == "einstein":
            D = -np.einsum("ni,nj->nij", bd.tau, bd.tau) * (th * om)[:, None, None]
        else:
            D = np.einsum("ni,nj->nij", bd.tau, bd.tau) * (th * om)[:, None, None]
        out = out + PointMeasure(mesh, elem, xi, D, skind)
    out.meta.update(kind=kind)
    return out


def gauss_functional(g_h, v, q=None, k=1):
    return curvature_measure(g_h, g_h.mesh if hasattr(g_h, "mesh") else v.mesh, "gauss", q, k)(v)


def scalar_functional(g_h, v, q=None, k=1):
    return curvature_measure(g_h, _mesh_of(g_h, v), "scalar", q, k)(v)


def ricci_functional(g_h, rho, q=None, k=1):
    return curvature_measure(g_h, _mesh_of(g_h, rho), "ricci", q, k)(rho)


def einstein_functional(g_h, rho, q=None, k=1):
    return curvature_measure(g_h, _mesh_of(g_h, rho), "einstein", q, k)(rho)


def curvature_operator_functional(g_h, U, q=None, k=1):
    return curvature_measure(g_h, _mesh_of(g_h, U), "qop", q, k)(U)


def _mesh_of(*objs):
    for o in objs:
        if hasattr(o, "mesh"):
            return o.mesh
    raise ValueError("cannot determine mesh")


# ----------------------------------------------------------------------
# generic route through 4-tensors

def riemann_value(metric, mesh, A_fn, q: MeshQuadrature = None, k=1):
    """Generic distributional Riemann functional applied to a 4-tensor field.

    ``A_fn(elem, xi, pg)`` returns covariant 4-tensors (n, d, d, d, d).
    Facet terms use each side's metric, normal and A; bone terms use the
    frames of the first ring element.
    """
    if q is None:
        q = mesh_quadrature(mesh, **default_degrees(k))
    total = 0.0
    for sl in _chunks(len(q.v_elem), 5000):
        elem, xi = q.v_elem[sl], q.v_xi[sl]
        pg = geo.PointGeometry(*_evaluate_metric(metric, elem, xi, 2))
        A = A_fn(elem, xi, pg)
        total += np.sum(geo.inner4(pg.R, A, pg.ginv) * pg.sqrtdet * q.v_w[sl])
    if len(q.f_w):
        for s in range(2):
            for sl in _chunks(len(q.f_w), 5000):
                fs = FacetSide(metric, q, s, 1, sl)
                A = A_fn(fs.elem, fs.xi, fs.pg)
                AF = np.einsum("nijkl,nai,nj,nk,nbl->nab", A, fs.tau, fs.nu, fs.nu, fs.tau)
                total += 4 * np.sum(np.einsum("nab,nab->n", fs.II, AF) * fs.omega)
    if q.b_n:
        bd = BoneData(metric, q)
        f = bd.first
        pg = geo.PointGeometry(bd.pg.g[f])
        A = A_fn(q.b_elem[f], q.b_xi[f], pg)
        nu, mu = bd.nu[0][f], bd.mu[0][f]
        Amnnm = np.einsum("nijkl,ni,nj,nk,nl->n", A, mu, nu, nu, mu)
        total += 4 * np.sum(bd.theta * Amnnm * bd.omega)
    return float(total)


def riemann_measure(metric, mesh, q: MeshQuadrature = None, k=1):
    """Point measure of U -> R~w(A U), built by applying A to unit matrices."""
    if q is None:
        q = mesh_quadrature(mesh, **default_degrees(k))
    d = mesh.dim
    if d == 2:
        units = [np.ones(1)]
    else:
        units = []
        for a in range(3):
            for b in range(3):
                E = np.zeros((3, 3))
                E[a, b] = 1.0
                units.append(E)
    skind = "scalar" if d == 2 else "matrix"

    def dens_of(vals):
        if d == 2:
            return vals[0]
        return np.stack(vals, axis=1).reshape(-1, 3, 3)

    def Aunit(u, pg):
        if d == 2:
            return geo.amap(np.full(pg.n, float(u[0])), pg)
        return geo.amap(np.broadcast_to(u, (pg.n, 3, 3)), pg)

    out = _empty(mesh, skind)
    for sl in _chunks(len(q.v_elem), 5000):
        elem, xi = q.v_elem[sl], q.v_xi[sl]
        pg = geo.PointGeometry(*_evaluate_metric(metric, elem, xi, 2))
        om = pg.sqrtdet * q.v_w[sl]
        vals = [geo.inner4(pg.R, Aunit(u, pg), pg.ginv) * om for u in units]
        out = out + PointMeasure(mesh, elem, xi, dens_of(vals), skind)
    for s in range(2):
        for sl in _chunks(len(q.f_w), 5000):
            fs = FacetSide(metric, q, s, 1, sl)
            vals = []
            for u in units:
                A = Aunit(u, fs.pg)
                AF = np.einsum("nijkl,nai,nj,nk,nbl->nab", A, fs.tau, fs.nu, fs.nu, fs.tau)
                vals.append(4 * np.einsum("nab,nab->n", fs.II, AF) * fs.omega)
            out = out + PointMeasure(mesh, fs.elem, fs.xi, dens_of(vals), skind)
    if q.b_n:
        bd = BoneData(metric, q)
        f = bd.first
        pg = geo.PointGeometry(bd.pg.g[f])
        nu, mu = bd.nu[0][f], bd.mu[0][f]
        vals = []
        for u in units:
            A = Aunit(u, pg)
            vals.append(4 * bd.theta * np.einsum("nijkl,ni,nj,nk,nl->n", A, mu, nu, nu, mu) * bd.omega)
        out = out + PointMeasure(mesh, q.b_elem[f], q.b_xi[f], dens_of(vals), skind)
    out.meta.update(kind="riemann")
    return out


def riemann_functional(g_h, U, q=None, k=1):
    return riemann_measure(g_h, _mesh_of(g_h, U), q, k)(U)


# ----------------------------------------------------------------------
# smooth exact pairing

def exact_measure(metric, mesh, kind, q: MeshQuadrature = None, k=1):
    """Volume-only measure of the classical curvature pairing of a smooth metric."""
    return curvature_measure(metric, mesh, kind, q, k, parts=("volume",))


# ----------------------------------------------------------------------
# assembly against a discrete test basis

@dataclass
class AssembledFunctional:
    """Coefficients c[j, c] = f(phi_j E_c) on free Lagrange DOFs."""
    space: LagrangeSpace
    directions: np.ndarray
    values: np.ndarray                          # (nfree, ndir)
    meta: dict = field(default_factory=dict)

    def write(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["test_dof", "direction", "value"])
            free = self.space.free
            for j in range(self.values.shape[0]):
                for c in range(self.values.shape[1]):
                    w.writerow([int(free[j]), c, repr(float(self.values[j, c]))])

    def __sub__(self, other):
        return AssembledFunctional(self.space, self.directions, self.values - other.values, dict(self.meta))

    def scaled(self, a):
        return AssembledFunctional(self.space, self.directions, a * self.values, dict(self.meta))


def test_directions(dim):
    """Symmetric unit directions, off-diagonal ones normalized (3D); [1] in 2D."""
    if dim == 2:
        return np.ones((1,))
    return sym_basis(dim, normalized=True)


def assemble_against_basis(measure: PointMeasure, space: LagrangeSpace, directions=None):
    """Apply a point measure to every ``phi_j E_c`` with phi_j a free Lagrange basis function."""
    mesh = space.mesh
    if directions is None:
        directions = test_directions(mesh.dim) if measure.kind == "matrix" else np.ones((1,))
    if measure.kind == "scalar":
        w = measure.dens[:, None]
    else:
        w = np.einsum("nij,cij->nc", measure.dens, directions)
    out = np.zeros((space.ndof, w.shape[1]))
    for sl in _chunks(len(measure.elem), 50000):
        phi = space.basis(measure.elem[sl], measure.xi[sl], 0)          # (n, nn)
        dofs = space.dofmap[measure.elem[sl]]                           # (n, nn)
        contrib = phi[:, :, None] * w[sl][:, None, :]
        for c in range(w.shape[1]):
            out[:, c] += np.bincount(dofs.ravel(), weights=contrib[:, :, c].ravel(), minlength=space.ndof)
    return AssembledFunctional(space, directions, out[space.free], dict(measure.meta))
