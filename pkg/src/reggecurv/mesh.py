"""Affine simplicial meshes in 2D and 3D with facet and bone adjacency.

Entities are stored as sorted global vertex tuples.  Local facet ``j`` of an
element is the facet opposite its local vertex ``j``.  Bones are the
codimension-2 entities (vertices in 2D, edges in 3D) that do not lie on the
boundary.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class BoneRing:
    """Cyclic ring of elements around an interior bone.

    ``ring`` holds ``(element, facet_plus, facet_minus)`` triples.  The
    ``facet_minus`` of one entry is the ``facet_plus`` of the next one.
    """
    bone: int
    vertices: tuple
    ring: list


class Mesh:
    """Immutable affine simplicial mesh.

    Parameters
    ----------
    vertices : (nv, dim) array
    elements : (ne, dim+1) int array, reoriented to positive volume.
    """

    def __init__(self, vertices, elements, h_nominal=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        elements = np.array(elements, dtype=np.int64)
        self.dim = self.vertices.shape[1]
        if elements.shape[1] != self.dim + 1:
            raise ValueError("element arity does not match dimension")
        d = self.dim
        # orient elements positively
        J = self._jacobians(elements)
        det = np.linalg.det(J)
        if np.any(np.abs(det) < 1e-14):
            raise ValueError(f"degenerate element {int(np.argmin(np.abs(det)))}")
        neg = det < 0
        elements[neg, 0], elements[neg, 1] = elements[neg, 1].copy(), elements[neg, 0].copy()
        self.elements = elements
        self.jac = self._jacobians(elements)
        self.detj = np.linalg.det(self.jac)
        self.jinv = np.linalg.inv(self.jac)
        self.h_nominal = h_nominal
        self._entities = {}
        self._build_facets()
        self._bones = None

    # ------------------------------------------------------------------
    def _jacobians(self, elements):
        X = self.vertices[elements]                 # (ne, d+1, d)
        return np.transpose(X[:, 1:, :] - X[:, :1, :], (0, 2, 1))   # columns = edge vectors

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_vertices(self):
        return len(self.vertices)

    def volumes(self):
        return self.detj / math.factorial(self.dim)

    def diameters(self):
        X = self.vertices[self.elements]
        dmax = np.zeros(len(X))
        for a, b in itertools.combinations(range(self.dim + 1), 2):
            dmax = np.maximum(dmax, np.linalg.norm(X[:, a] - X[:, b], axis=1))
        return dmax

    @property
    def h(self):
        """Largest element diameter."""
        return float(self.diameters().max())

    # ------------------------------------------------------------------
    def entities(self, sub_dim):
        """Sub-simplices of dimension ``sub_dim``.

        Returns ``(verts, elem_to_ent)`` where ``verts`` holds sorted global
        vertex tuples and ``elem_to_ent[e, j]`` is the id of local entity
        ``j`` of element ``e``, local entities ordered as
        ``itertools.combinations(range(dim+1), sub_dim+1)``.
        """
        if sub_dim in self._entities:
            return self._entities[sub_dim]
        local = list(itertools.combinations(range(self.dim + 1), sub_dim + 1))
        allv = np.sort(self.elements[:, local], axis=2)     # (ne, nloc, sub_dim+1)
        flat = allv.reshape(-1, sub_dim + 1)
        verts, inv = np.unique(flat, axis=0, return_inverse=True)
        out = (verts, inv.reshape(len(self.elements), len(local)))
        self._entities[sub_dim] = out
        return out

    @staticmethod
    def local_entities(dim, sub_dim):
        return list(itertools.combinations(range(dim + 1), sub_dim + 1))

    def _build_facets(self):
        d = self.dim
        nloc = d + 1
        # local facet j is opposite local vertex j
        local = [tuple(i for i in range(nloc) if i != j) for j in range(nloc)]
        allv = np.sort(self.elements[:, local], axis=2).reshape(-1, d)
        verts, inv = np.unique(allv, axis=0, return_inverse=True)
        inv = inv.reshape(-1, nloc)
        counts = np.bincount(inv.ravel(), minlength=len(verts))
        if np.any(counts > 2):
            raise ValueError("non-manifold mesh: facet with more than two elements")
        self.facets = verts
        self.elem_facets = inv
        nf = len(verts)
        fe = -np.ones((nf, 2), dtype=np.int64)
        fl = -np.ones((nf, 2), dtype=np.int64)
        for e in range(len(self.elements)):
            for j in range(nloc):
                f = inv[e, j]
                s = 0 if fe[f, 0] < 0 else 1
                fe[f, s] = e
                fl[f, s] = j
        self.facet_elems = fe
        self.facet_local = fl
        self.interior_facet = fe[:, 1] >= 0
        bverts = np.unique(verts[~self.interior_facet])
        self.boundary_vertex = np.zeros(len(self.vertices), dtype=bool)
        self.boundary_vertex[bverts] = True

    def boundary_subsimplices(self):
        """Set of sorted vertex tuples of all sub-simplices of boundary facets."""
        if hasattr(self, "_bsub"):
            return self._bsub
        out = set()
        for f in self.facets[~self.interior_facet]:
            f = tuple(int(v) for v in f)
            for r in range(1, len(f) + 1):
                out.update(itertools.combinations(f, r))
        self._bsub = out
        return out

    # ------------------------------------------------------------------
    def reference_map(self, element):
        """Origin and Jacobian of the affine map from the reference simplex."""
        return self.vertices[self.elements[element, 0]].copy(), self.jac[element].copy()

    def to_physical(self, elem, xi):
        """Map reference points ``xi`` (n, d) of elements ``elem`` (n,)."""
        x0 = self.vertices[self.elements[elem, 0]]
        return x0 + np.einsum("nij,nj->ni", self.jac[elem], xi)

    @property
    def bones(self):
        if self._bones is None:
            self._bones = enumerate_bones(self)
        return self._bones

    # ------------------------------------------------------------------
    def write(self, path):
        with open(path, "w") as fh:
            fh.write(f"{self.dim} {self.n_vertices} {self.n_elements}\n")
            for x in self.vertices:
                fh.write(" ".join(repr(float(c)) for c in x) + "\n")
            for el in self.elements:
                fh.write(" ".join(str(int(v)) for v in el) + "\n")

    @classmethod
    def read(cls, path):
        with open(path) as fh:
            lines = [ln.split() for ln in fh if ln.strip()]
        dim, nv, ne = (int(t) for t in lines[0])
        verts = np.array([[float(t) for t in ln] for ln in lines[1:1 + nv]])
        els = np.array([[int(t) for t in ln] for ln in lines[1 + nv:1 + nv + ne]])
        if verts.shape[1] != dim or els.shape[1] != dim + 1:
            raise ValueError("inconsistent mesh file")
        return cls(verts, els)


def enumerate_bones(mesh: Mesh):
    """One :class:`BoneRing` per interior codimension-2 entity."""
    d = mesh.dim
    bsub = mesh.boundary_subsimplices()
    if d == 2:
        cand = [(v,) for v in range(mesh.n_vertices) if not mesh.boundary_vertex[v]]
    else:
        edges, _ = mesh.entities(1)
        cand = [tuple(int(v) for v in e) for e in edges if tuple(int(v) for v in e) not in bsub]
    # element incidence per bone
    inc = {c: [] for c in cand}
    for e, el in enumerate(mesh.elements):
        for c in itertools.combinations(sorted(int(v) for v in el), d - 1):
            if c in inc:
                inc[c].append(e)
    rings = []
    for b, c in enumerate(cand):
        elems = inc[c]
        # the two facets of each element containing the bone
        fac = {}
        for e in elems:
            loc = [j for j in range(d + 1) if int(mesh.elements[e, j]) not in c]
            fac[e] = [int(mesh.elem_facets[e, j]) for j in loc]
        # walk around
        start = elems[0]
        f_plus, f_minus = fac[start]
        ring = [(start, f_plus, f_minus)]
        cur, fcur = start, f_minus
        while True:
            fe = mesh.facet_elems[fcur]
            if fe[1] < 0:
                raise ValueError(f"bone {c} ring hits the boundary")
            nxt = int(fe[0] if fe[1] == cur else fe[1])
            if nxt == start:
                break
            fa, fb = fac[nxt]
            fp, fm = (fa, fb) if fa == fcur else (fb, fa)
            ring.append((nxt, fp, fm))
            cur, fcur = nxt, fm
            if len(ring) > len(elems):
                raise ValueError(f"bone {c} ring does not close")
        if len(ring) != len(elems):
            raise ValueError(f"bone {c} ring misses elements")
        rings.append(BoneRing(bone=b, vertices=c, ring=ring))
    return rings


def build_structured_cube_mesh(level, dim=3, perturb_amplitude=0.0, seed=0):
    """Structured mesh of (-1,1)^dim with ``2^level`` cells per direction.

    3D cells are split into six tetrahedra around the main diagonal (Kuhn
    split), 2D cells into two triangles.  Interior vertices are moved by
    independent uniform samples in ``[-a h, a h]`` per coordinate with
    ``h = sqrt(dim) 2^(1-level)``.  If this inverts an element the amplitude
    is halved, at most 8 times.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    if perturb_amplitude < 0:
        raise ValueError("perturbation amplitude must be nonnegative")
    n = 2 ** level
    t = np.linspace(-1.0, 1.0, n + 1)
    grids = np.meshgrid(*([t] * dim), indexing="ij")
    verts = np.stack([g_.ravel() for g_ in grids], axis=1)

    def vid(*idx):
        return np.ravel_multi_index(idx, (n + 1,) * dim)

    els = []
    if dim == 3:
        I, J, K = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
        base = np.stack([I.ravel(), J.ravel(), K.ravel()], axis=1)
        for perm in itertools.permutations(range(3)):
            p = base.copy()
            tet = [vid(*p.T)]
            for ax in perm:
                p = p.copy()
                p[:, ax] += 1
                tet.append(vid(*p.T))
            els.append(np.stack(tet, axis=1))
        els = np.stack(els, axis=1).reshape(-1, 4)
    elif dim == 2:
        I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        i, j = I.ravel(), J.ravel()
        t1 = np.stack([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)], axis=1)
        t2 = np.stack([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)], axis=1)
        els = np.stack([t1, t2], axis=1).reshape(-1, 3)
    else:
        raise ValueError("dim must be 2 or 3")

    h = math.sqrt(dim) * 2.0 ** (1 - level)
    mesh = Mesh(verts, els, h_nominal=h)
    if perturb_amplitude == 0 or not np.any(~mesh.boundary_vertex):
        return mesh
    rng = np.random.default_rng(seed)
    interior = ~mesh.boundary_vertex
    noise = rng.uniform(-1.0, 1.0, size=(interior.sum(), dim))
    amp = perturb_amplitude
    for _ in range(9):
        v = verts.copy()
        v[interior] += amp * h * noise
        X = v[mesh.elements]
        det = np.linalg.det(np.transpose(X[:, 1:] - X[:, :1], (0, 2, 1)))
        if np.all(det > 0):
            return Mesh(v, mesh.elements, h_nominal=h)
        amp *= 0.5
    raise ValueError("perturbation inverts elements even after 8 halvings")
