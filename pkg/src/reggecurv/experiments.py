"""Convergence sweeps, probe studies and the linearization check.

Each driver takes a :class:`RunConfig` and returns a list of row dicts that
the CLI writes as CSV.  Errors are H^-2 norms of point measures assembled
against continuous P_m test functions with m = k + 2 by default.
"""
from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import geometry as geo
from .curvature import (PointMeasure, assemble_against_basis, curvature_measure, default_degrees,
                        mesh_quadrature, riemann_measure)
from .dualnorm import hminus2_norm
from .linearization import (TQuadrature, a_form, b_form, distributional_inc,
                            distributional_inc_euclidean_measure, linearization_defect,
                            observed_orders, probe_measures)
from .manufactured import benchmark_2d, benchmark_3d, flat_metric
from .mesh import build_structured_cube_mesh
from .regge import LagrangeSpace, ReggeSpace, canonical_interpolate

log = logging.getLogger(__name__)

FUNCTIONALS = ("gauss", "scalar", "ricci", "einstein", "qop", "riemann", "inc", "probes")
DEFAULT_PERTURB = 2.0 ** -3.5


@dataclass
class RunConfig:
    dim: int = 3
    levels: list = field(default_factory=lambda: [1, 2])
    order: int = 1
    test_order: int = None
    perturb: float = DEFAULT_PERTURB
    seed: int = 0
    gp: list = field(default_factory=lambda: [5])
    functional: str = "qop"
    metric: str = "benchmark"
    out: str = None

    def __post_init__(self):
        if self.test_order is None:
            self.test_order = self.order + 2
        self.levels = sorted(int(v) for v in self.levels)
        if not self.levels:
            raise ValueError("at least one level is required")
        if self.functional not in FUNCTIONALS:
            raise ValueError(f"unknown functional {self.functional!r}")
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if self.functional == "gauss" and self.dim != 2:
            raise ValueError("gauss functional needs dim 2")
        if self.functional in ("einstein", "qop", "probes") and self.dim != 3:
            raise ValueError(f"{self.functional} needs dim 3")
        if self.test_order < self.order + 2:
            log.warning("test order %d below k+2 = %d", self.test_order, self.order + 2)

    def hash(self):
        d = asdict(self)
        d.pop("out", None)
        return hashlib.sha1(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]


def _metric(cfg: RunConfig):
    if cfg.metric == "flat":
        return flat_metric(cfg.dim)
    return benchmark_3d()[0] if cfg.dim == 3 else benchmark_2d()[0]


def exact_point_measure(metric, mesh, kind, q):
    """Volume point measure of the smooth curvature pairing.

    Uses the closed-form Q (3D) or K (2D) when the metric provides one and the
    pointwise geometry otherwise.
    """
    elem, xi = q.v_elem, q.v_xi
    x = mesh.to_physical(elem, xi)
    g = metric.g(x)
    om = np.sqrt(np.linalg.det(g)) * q.v_w
    if kind in ("qop", "riemann") and mesh.dim == 3 and "Q" in metric.exact:
        D = metric.exact["Q"](x) * om[:, None, None]
        return PointMeasure(mesh, elem, xi, D if kind == "qop" else 4 * D, "matrix")
    if kind in ("gauss", "riemann") and mesh.dim == 2 and "K" in metric.exact:
        D = metric.exact["K"](x) * om
        return PointMeasure(mesh, elem, xi, D if kind == "gauss" else 4 * D, "scalar")
    if kind == "riemann":
        inner = exact_point_measure(metric, mesh, "gauss" if mesh.dim == 2 else "qop", q)
        return inner.scaled(4.0)
    return curvature_measure(metric.bind(mesh), mesh, kind, q, parts=("volume",))


def error_measure(cfg: RunConfig, mesh, metric, g_h, q):
    kind = cfg.functional
    if kind == "riemann":
        disc = riemann_measure(g_h, mesh, q)
    elif kind == "inc":
        return _inc_error_measure(cfg, mesh, metric, g_h, q)
    else:
        disc = curvature_measure(g_h, mesh, kind, q)
    return disc - exact_point_measure(metric, mesh, kind, q)


def _inc_error_measure(cfg, mesh, metric, g_h, q):
    """Distributional inc of the interpolant (Euclidean background) minus the smooth inc."""
    bound = metric.bind(mesh)
    if mesh.dim == 3:
        disc = distributional_inc_euclidean_measure(g_h, mesh, q)
        s, ds, d2s = bound.evaluate(q.v_elem, q.v_xi, 2)
        e = geo.EPS[3]
        D = np.einsum("jpq,irs,nprqs->nij", e, e, d2s) * q.v_w[:, None, None]
        return disc - PointMeasure(mesh, q.v_elem, q.v_xi, D, "matrix")
    from .linearization import distributional_inc_measure
    flat = flat_metric(2).bind(mesh)
    disc = distributional_inc_measure(flat, g_h, mesh, q)
    pg = geo.PointGeometry(*flat.evaluate(q.v_elem, q.v_xi, 2))
    s, ds, d2s = bound.evaluate(q.v_elem, q.v_xi, 2)
    D = geo.inc_2d(s, ds, d2s, pg) * q.v_w
    return disc - PointMeasure(mesh, q.v_elem, q.v_xi, D, "scalar")


def _orders(h, e):
    e = np.asarray(e, dtype=float)
    out = [np.nan]
    for i in range(1, len(e)):
        if e[i] > 0 and e[i - 1] > 0:
            out.append(float(np.log(e[i - 1] / e[i]) / np.log(h[i - 1] / h[i])))
        else:
            out.append(np.nan)
    return out


def run_convergence(cfg: RunConfig):
    """Rows ``level, h, ndof, error, order, config`` of the H^-2 error sweep."""
    if cfg.functional == "probes":
        return run_probes(cfg)
    metric = _metric(cfg)
    rows = []
    for L in cfg.levels:
        t0 = time.time()
        try:
            mesh = build_structured_cube_mesh(L, cfg.dim, cfg.perturb, cfg.seed)
            S = ReggeSpace(mesh, cfg.order)
            g_h = canonical_interpolate(metric, S)
            q = mesh_quadrature(mesh, **default_degrees(cfg.order))
            meas = error_measure(cfg, mesh, metric, g_h, q)
            V = LagrangeSpace(mesh, cfg.test_order)
            rep = hminus2_norm(assemble_against_basis(meas, V), cfg.test_order)
        except Exception as err:
            raise RuntimeError(f"level {L}: {err}") from err
        rows.append(dict(level=L, h=mesh.h, ndof=S.ndof, error=rep.total, valid=rep.valid))
        log.info("level %d: h=%.4f ndof=%d error=%.4e (%.1fs)", L, mesh.h, S.ndof, rep.total,
                 time.time() - t0)
    orders = _orders([r["h"] for r in rows], [r["error"] for r in rows])
    for r, o in zip(rows, orders):
        r["order"] = o
        r["config"] = cfg.hash()
    return rows


def run_probes(cfg: RunConfig):
    """H^-2 norms of the probe functionals F1, F2, F3 per level and t-rule."""
    if cfg.dim != 3:
        raise ValueError("probes need dim 3")
    metric = _metric(cfg)
    blocks = {gp: [] for gp in cfg.gp}
    for L in cfg.levels:
        # mesh, spaces and the HHJ factorization are shared by all t-rules of a level
        mesh = build_structured_cube_mesh(L, 3, cfg.perturb, cfg.seed)
        S = ReggeSpace(mesh, cfg.order)
        g_h = canonical_interpolate(metric, S)
        q = mesh_quadrature(mesh, **default_degrees(cfg.order))
        V = LagrangeSpace(mesh, cfg.test_order)
        for gp in cfg.gp:
            vals = {}
            for name, meas in zip(("F1", "F2", "F3"), probe_measures(metric.bind(mesh), g_h, mesh,
                                                                    TQuadrature(gp), q)):
                vals[name] = hminus2_norm(assemble_against_basis(meas, V), cfg.test_order).total
            blocks[gp].append(dict(level=L, h=mesh.h, ndof=S.ndof, error=vals["F3"], gp=gp, **vals))
    rows = []
    for gp in cfg.gp:
        block = blocks[gp]
        for r, o in zip(block, _orders([r["h"] for r in block], [r["F3"] for r in block])):
            r["order"] = o
            r["config"] = cfg.hash()
        rows.extend(block)
    return rows


@dataclass
class LincheckReport:
    dim: int
    eps: np.ndarray
    defects: np.ndarray
    orders: np.ndarray
    b: float
    minus2inc: float
    a: float
    passed: bool

    def lines(self):
        rel = abs(self.b - self.minus2inc) / max(abs(self.b), 1e-300)
        return [f"dim={self.dim} eps-orders={np.round(self.orders, 3).tolist()} "
                f"a={self.a:.6e} b={self.b:.6e} |b+2inc|/|b|={rel:.2e} "
                f"{'PASS' if self.passed else 'FAIL'}"]


def run_lincheck(cfg: RunConfig, level=1, edge_sign=1.0, min_order=1.8):
    """Central-difference linearization check and the b = -2 inc identity."""
    rng = np.random.default_rng(cfg.seed)
    mesh = build_structured_cube_mesh(level, cfg.dim, cfg.perturb, cfg.seed)
    metric = _metric(cfg)
    S = ReggeSpace(mesh, cfg.order)
    g_h = canonical_interpolate(metric, S)
    sigma = S.field(0.3 * rng.normal(size=S.ndof))
    if cfg.dim == 2:
        L = LagrangeSpace(mesh, 2)
        w = rng.normal(size=L.ndof)
        w[L.boundary] = 0.0
        U = L.field(w)
    else:
        T = ReggeSpace(mesh, 1)
        w = rng.normal(size=T.ndof)
        w[T.boundary] = 0.0
        U = T.field(w)
    q = mesh_quadrature(mesh, vol_deg=2 * cfg.order + 10, facet_deg=2 * cfg.order + 8,
                        bone_deg=2 * cfg.order + 8)
    eps, fd, ab, df = linearization_defect(g_h, sigma, U, q=q, edge_sign=edge_sign)
    ords = observed_orders(eps, df)
    a = a_form(g_h, sigma, U, q)
    b = b_form(g_h, sigma, U, q, edge_sign=edge_sign)
    inc = distributional_inc(g_h, sigma, U, q)
    ok = bool(np.all(ords >= min_order)) and abs(b + 2 * inc) <= 1e-10 * abs(b)
    if cfg.dim == 2:
        ok = ok and a == 0.0
    return LincheckReport(cfg.dim, eps, df, ords, b, -2 * inc, a, ok)
