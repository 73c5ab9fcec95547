"""Regge, Lagrange and HHJ spaces on affine simplicial meshes.

Regge elements are built in Ciarlet fashion per physical element.  Global
degrees of freedom are moments tied to sorted global vertex tuples:

* edges: ``int_e (t^T s t) q`` with ``t`` the edge vector and ``q`` in P_k(e),
* faces (3D): ``int_F s(t_i, t_j) q`` with q in P_{k-1}(F),
* cells: ``int_T (J^T s J)_ab p`` with p in P_{k-2} (3D) or P_{k-1} (2D).

All moment integrals are taken in reference measure.  Since each global DOF
is the same linear functional seen from every adjacent element, the
tangential-tangential trace is single valued.
"""
from __future__ import annotations

import csv
import math

import numpy as np

from .fields import (PolyField, bernstein, dim_poly, eval_monomials,
                     monomial_exponents, quad_rule, reference_vertices)
from .mesh import Mesh


def sym_components(dim):
    """Index pairs (a, b), a <= b, diagonal first."""
    if dim == 2:
        return [(0, 0), (1, 1), (0, 1)]
    return [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]


def sym_basis(dim, normalized=False):
    """Symmetric unit matrices, shape (nsym, d, d).

    With ``normalized`` the off-diagonal ones are scaled to unit Frobenius norm.
    """
    out = []
    for a, b in sym_components(dim):
        E = np.zeros((dim, dim))
        E[a, b] = E[b, a] = 1.0
        if normalized and a != b:
            E /= math.sqrt(2.0)
        out.append(E)
    return np.array(out)


def _sorted_local(mesh, local):
    """For each element, local vertex indices of a sub-entity in sorted global order.

    ``local`` is a tuple of local vertex indices; returns (ne, len(local)).
    """
    loc = np.array(local)
    G = mesh.elements[:, loc]
    order = np.argsort(G, axis=1)
    return loc[order]


# ----------------------------------------------------------------------
class LagrangeSpace:
    """Continuous Lagrange space of order m >= 1 on equispaced lattice nodes."""

    def __init__(self, mesh: Mesh, order: int):
        if order < 1:
            raise ValueError("Lagrange order must be >= 1")
        self.mesh = mesh
        self.order = m = order
        d = mesh.dim
        lattice = [a for a in _compositions(m, d + 1)]
        self.lattice = np.array(lattice)                  # (nn, d+1)
        self.ref_nodes = self.lattice[:, 1:] / m
        V = eval_monomials(self.ref_nodes, m)
        self.nodal = np.linalg.inv(V)                     # phi_i = sum_j mono_j C[j, i]
        # global keys: multiset of global vertex ids repeated alpha_i times
        keys = np.empty((mesh.n_elements, len(lattice), m), dtype=np.int64)
        for i, a in enumerate(lattice):
            cols = np.repeat(np.arange(d + 1), a)
            keys[:, i, :] = np.sort(mesh.elements[:, cols], axis=1)
        uk, inv = np.unique(keys.reshape(-1, m), axis=0, return_inverse=True)
        self.dofmap = inv.reshape(mesh.n_elements, len(lattice))
        self.ndof = len(uk)
        bsub = mesh.boundary_subsimplices()
        self.boundary = np.array([tuple(sorted(set(int(v) for v in k))) in bsub for k in uk])
        self.node_coords = mesh.vertices[uk].mean(axis=1)

    @property
    def free(self):
        return np.flatnonzero(~self.boundary)

    def basis(self, elem, xi, nderiv=0):
        """Local basis values (n, nn), physical gradients (n, d, nn), Hessians (n, d, d, nn)."""
        res = eval_monomials(xi, self.order, nderiv)
        if nderiv == 0:
            return res @ self.nodal
        out = [res[0] @ self.nodal]
        Jinv = self.mesh.jinv[elem]
        g = np.einsum("nam,mi->nai", res[1], self.nodal)
        out.append(np.einsum("nak,nai->nki", Jinv, g))
        if nderiv >= 2:
            h = np.einsum("nabm,mi->nabi", res[2], self.nodal)
            out.append(np.einsum("nak,nbl,nabi->nkli", Jinv, Jinv, h))
        return tuple(out)

    def field(self, u):
        """Expand a global coefficient vector into a :class:`PolyField`."""
        loc = np.asarray(u)[self.dofmap]                  # (ne, nn)
        return PolyField(self.mesh, self.order, loc @ self.nodal.T)

    def interpolate(self, fn):
        return np.asarray(fn(self.node_coords), dtype=float)


def _compositions(total, parts):
    """All tuples of ``parts`` nonnegative ints summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for i in range(total, -1, -1):
        for rest in _compositions(total - i, parts - 1):
            yield (i,) + rest


def lagrange_dofs(space: LagrangeSpace):
    return space.dofmap, space.boundary


# ----------------------------------------------------------------------
class ReggeSpace:
    """Regge space of order k >= 0 with moment degrees of freedom."""

    def __init__(self, mesh: Mesh, order: int, quad_exactness=None):
        self.mesh = mesh
        self.order = k = order
        d = mesh.dim
        self.dim = d
        self.nsym = d * (d + 1) // 2
        self.sym = sym_basis(d)
        self.nm = dim_poly(d, k)
        self.qdeg = quad_exactness if quad_exactness is not None else 2 * k + 8
        self._setup_blocks()
        self._setup_local_basis()

    # -- degrees of freedom --------------------------------------------
    def _setup_blocks(self):
        mesh, k, d = self.mesh, self.order, self.dim
        ne = mesh.n_elements
        X = mesh.vertices[mesh.elements]                  # (ne, d+1, d)
        blocks = []
        offset = 0
        # edges
        edges, e2e = mesh.entities(1)
        rule = quad_rule(1, self.qdeg)
        nq = len(rule.weights)
        loc_edges = Mesh.local_entities(d, 1)
        n_mom = k + 1
        B = bernstein(rule.bary, k)                       # (nq, k+1)
        pts = np.empty((ne, len(loc_edges), nq, d))
        W = np.empty((ne, len(loc_edges), n_mom, nq, d, d))
        for j, le in enumerate(loc_edges):
            sl = _sorted_local(mesh, le)                  # (ne, 2)
            Vr = reference_vertices(d)[sl]                # (ne, 2, d)
            pts[:, j] = np.einsum("qs,esd->eqd", rule.bary, Vr)
            xs = X[np.arange(ne)[:, None], sl]            # (ne, 2, d)
            t = xs[:, 1] - xs[:, 0]
            tt = np.einsum("ei,ej->eij", t, t)
            W[:, j] = np.einsum("q,qr,eij->erqij", rule.weights, B, tt)
        blocks.append(dict(kind="edge", ent=e2e, nent=len(edges), n_mom=n_mom, pts=pts,
                           W=W, offset=offset, ents=edges))
        offset += len(edges) * n_mom
        if d == 3 and k >= 1:
            faces, f2e = mesh.entities(2)
            rule = quad_rule(2, self.qdeg)
            nq = len(rule.weights)
            loc_faces = Mesh.local_entities(3, 2)
            Bf = bernstein(rule.bary, k - 1)
            pairs = [(0, 0), (0, 1), (1, 1)]
            n_mom = Bf.shape[1] * 3
            pts = np.empty((ne, 4, nq, d))
            W = np.empty((ne, 4, n_mom, nq, d, d))
            for j, lf in enumerate(loc_faces):
                sl = _sorted_local(mesh, lf)
                Vr = reference_vertices(d)[sl]
                pts[:, j] = np.einsum("qs,esd->eqd", rule.bary, Vr)
                xs = X[np.arange(ne)[:, None], sl]
                T = np.stack([xs[:, 1] - xs[:, 0], xs[:, 2] - xs[:, 0]], axis=1)   # (ne, 2, d)
                r = 0
                for b in range(Bf.shape[1]):
                    for (p, q) in pairs:
                        M = 0.5 * (np.einsum("ei,ej->eij", T[:, p], T[:, q])
                                   + np.einsum("ei,ej->eij", T[:, q], T[:, p]))
                        W[:, j, r] = np.einsum("q,q,eij->eqij", rule.weights, Bf[:, b], M)
                        r += 1
            blocks.append(dict(kind="face", ent=f2e, nent=len(faces), n_mom=n_mom, pts=pts,
                               W=W, offset=offset, ents=faces))
            offset += len(faces) * n_mom
        pdeg = k - 2 if d == 3 else k - 1
        if pdeg >= 0:
            rule = quad_rule(d, self.qdeg)
            nq = len(rule.weights)
            mono = eval_monomials(rule.points, pdeg)      # (nq, np)
            n_mom = mono.shape[1] * self.nsym
            J = mesh.jac
            W = np.empty((ne, 1, n_mom, nq, d, d))
            r = 0
            for b in range(mono.shape[1]):
                for (p, q) in sym_components(d):
                    M = 0.5 * (np.einsum("ei,ej->eij", J[:, :, p], J[:, :, q])
                               + np.einsum("ei,ej->eij", J[:, :, q], J[:, :, p]))
                    W[:, 0, r] = np.einsum("q,q,eij->eqij", rule.weights, mono[:, b], M)
                    r += 1
            pts = np.broadcast_to(rule.points, (ne, 1, nq, d)).copy()
            blocks.append(dict(kind="cell", ent=np.arange(ne)[:, None], nent=ne, n_mom=n_mom,
                               pts=pts, W=W, offset=offset, ents=None))
            offset += ne * n_mom
        self.blocks = blocks
        self.ndof = offset
        # local-to-global map, local order: block, local entity, moment
        l2g = []
        for bl in blocks:
            g = bl["offset"] + bl["ent"][:, :, None] * bl["n_mom"] + np.arange(bl["n_mom"])[None, None, :]
            l2g.append(g.reshape(ne, -1))
        self.l2g = np.hstack(l2g)
        self.nloc = self.l2g.shape[1]
        if self.nloc != self.nm * self.nsym:
            raise RuntimeError("Regge DOF count mismatch")
        # boundary mask: tt-trace DOFs on boundary edges and faces
        bsub = mesh.boundary_subsimplices()
        bmask = np.zeros(self.ndof, dtype=bool)
        for bl in blocks:
            if bl["kind"] == "cell":
                continue
            on_b = np.array([tuple(int(v) for v in e) in bsub for e in bl["ents"]])
            ids = bl["offset"] + np.flatnonzero(on_b)[:, None] * bl["n_mom"] + np.arange(bl["n_mom"])
            bmask[ids.ravel()] = True
        self.boundary = bmask

    def _local_dofs_of(self, evaluator):
        """Apply every local DOF functional to ``evaluator(elem, xi) -> (n, d, d)``."""
        ne = self.mesh.n_elements
        out = []
        for bl in self.blocks:
            pts = bl["pts"]
            nl, nq = pts.shape[1], pts.shape[2]
            elem = np.repeat(np.arange(ne), nl * nq)
            vals = evaluator(elem, pts.reshape(-1, self.dim)).reshape(ne, nl, nq, self.dim, self.dim)
            out.append(np.einsum("elrqij,elqij->elr", bl["W"], vals).reshape(ne, -1))
        return np.hstack(out)

    def _setup_local_basis(self):
        ne, d = self.mesh.n_elements, self.dim
        D = np.empty((ne, self.nloc, self.nloc))
        col = 0
        cols = []
        for bl in self.blocks:
            pts = bl["pts"]
            mono = eval_monomials(pts.reshape(-1, d), self.order).reshape(pts.shape[:3] + (self.nm,))
            # shape index s = (m, c)
            blk = np.einsum("elrqij,elqm,cij->elrmc", bl["W"], mono, self.sym)
            cols.append(blk.reshape(ne, -1, self.nm * self.nsym))
        D = np.concatenate(cols, axis=1)
        cond = np.linalg.cond(D)
        if np.any(~np.isfinite(cond)) or np.any(cond > 1e13):
            raise ValueError(f"singular local Regge moment matrix on element {int(np.argmax(cond))}")
        self.local_basis = np.linalg.inv(D)            # (ne, nshape, nloc)

    # -- fields ----------------------------------------------------------
    def field(self, u):
        """Expand global coefficients into a :class:`ReggeField`."""
        u = np.asarray(u, dtype=float)
        loc = u[self.l2g]
        c = np.einsum("esl,el->es", self.local_basis, loc).reshape(-1, self.nm, self.nsym)
        coeffs = np.einsum("emc,cij->emij", c, self.sym)
        return ReggeField(self, u, coeffs)

    def dofs_of(self, evaluator):
        """Global DOF values of a tensor field given by ``evaluator(elem, xi)``."""
        loc = self._local_dofs_of(evaluator)
        u = np.zeros(self.ndof)
        u[self.l2g.ravel()] = loc.ravel()
        return u

    @property
    def free(self):
        return np.flatnonzero(~self.boundary)


class ReggeField(PolyField):
    """Regge finite element field; carries its space and global coefficients."""

    def __init__(self, space, u, coeffs):
        super().__init__(space.mesh, space.order, coeffs)
        self.space = space
        self.dofs = u


def canonical_interpolate(metric, space: ReggeSpace):
    """Canonical Regge interpolant of a metric.

    ``metric`` is either a callable ``x (n, d) -> (n, d, d)`` or an object with
    an ``evaluate(elem, xi, nderiv)`` method (a bound metric or PolyField).
    """
    mesh = space.mesh
    if hasattr(metric, "evaluate"):
        def ev(elem, xi):
            r = metric.evaluate(elem, xi, 0)
            return r[0] if isinstance(r, tuple) else r
    else:
        def ev(elem, xi):
            return metric(mesh.to_physical(elem, xi))
    return space.field(space.dofs_of(ev))


def check_tt_continuity(field: PolyField, exactness=6):
    """Largest tangential-tangential jump per interior facet.

    Returns a list of ``(facet, jump)`` sorted by decreasing jump; jumps are
    relative to the facet's largest tt-value (plus one).
    """
    mesh = field.mesh
    d = mesh.dim
    rule = quad_rule(d - 1, exactness)
    fids = np.flatnonzero(mesh.interior_facet)
    jumps = np.zeros(len(fids))
    if len(fids) == 0:
        return []
    vals = []
    for s in range(2):
        e = mesh.facet_elems[fids, s]
        xi, T = _facet_points(mesh, fids, e, rule.bary)
        nq = rule.bary.shape[0]
        v = field.evaluate(np.repeat(e, nq), xi.reshape(-1, d), 0).reshape(len(fids), nq, d, d)
        vals.append(np.einsum("fai,fqij,fbj->fqab", T, v, T))
    diff = np.abs(vals[0] - vals[1]).reshape(len(fids), -1).max(axis=1)
    scale = 1.0 + np.abs(vals[0]).reshape(len(fids), -1).max(axis=1)
    jumps = diff / scale
    order = np.argsort(-jumps)
    return [(int(fids[i]), float(jumps[i])) for i in order]


def _facet_points(mesh, fids, elems, bary):
    """Reference points in ``elems`` of facet points with barycentric ``bary``
    w.r.t. sorted facet vertices, and Euclidean facet tangents (nf, d-1, d)."""
    d = mesh.dim
    fv = mesh.facets[fids]                                 # (nf, d)
    el = mesh.elements[elems]                              # (nf, d+1)
    loc = np.argmax(el[:, None, :] == fv[:, :, None], axis=2)   # (nf, d)
    Vr = reference_vertices(d)[loc]                        # (nf, d, d)
    xi = np.einsum("qs,fsd->fqd", bary, Vr)
    X = mesh.vertices[fv]
    T = X[:, 1:] - X[:, :1]
    return xi, T


def facet_reference_points(mesh, fids, elems, bary):
    return _facet_points(mesh, fids, elems, bary)


def hhj_dofs(mesh: Mesh, order: int):
    """Numbering of an nn-continuous HHJ stress space of order ``order``.

    Facet DOFs are normal-normal moments against P_order(F); the remaining
    element DOFs are interior.  Returns a dict with ``facet`` (nf, nfd)
    global ids, ``interior`` (ne, nid) ids, ``ndof`` and ``boundary`` mask.
    """
    d = mesh.dim
    nfd = dim_poly(d - 1, order)
    nid = dim_poly(d, order) * d * (d + 1) // 2 - (d + 1) * nfd
    nf = len(mesh.facets)
    facet = np.arange(nf * nfd).reshape(nf, nfd)
    interior = nf * nfd + np.arange(mesh.n_elements * nid).reshape(mesh.n_elements, nid)
    ndof = nf * nfd + mesh.n_elements * nid
    boundary = np.zeros(ndof, dtype=bool)
    boundary[facet[~mesh.interior_facet].ravel()] = True
    return dict(facet=facet, interior=interior, ndof=ndof, boundary=boundary)


# ----------------------------------------------------------------------
def write_coefficients(path, u):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dof", "value"])
        for i, v in enumerate(u):
            w.writerow([i, repr(float(v))])


def read_coefficients(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))[1:]
    u = np.zeros(len(rows))
    for i, v in rows:
        u[int(i)] = float(v)
    return u
