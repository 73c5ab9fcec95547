"""Command line driver.

    reggecurv mesh --dim 3 --levels 2 --out mesh.txt
    reggecurv interp --dim 3 --levels 1 --order 1 --out gh.csv
    reggecurv curvature --dim 3 --levels 1 --order 1 --functional qop --out f.csv
    reggecurv convergence --dim 3 --levels 1 2 --order 1 --out conv.csv
    reggecurv probes --levels 0 1 2 --order 0 --gp 5 7 --out probes.csv
    reggecurv lincheck --dim 3 --order 1
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from .curvature import assemble_against_basis, default_degrees, mesh_quadrature
from .experiments import (DEFAULT_PERTURB, FUNCTIONALS, RunConfig, _metric, error_measure,
                          run_convergence, run_lincheck, run_probes)
from .mesh import build_structured_cube_mesh
from .regge import LagrangeSpace, ReggeSpace, canonical_interpolate, write_coefficients


def _parser():
    p = argparse.ArgumentParser(prog="reggecurv", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, functional="qop"):
        sp.add_argument("--dim", type=int, default=3, choices=(2, 3))
        sp.add_argument("--levels", type=int, nargs="+", default=[1])
        sp.add_argument("--order", type=int, default=1, help="Regge order k")
        sp.add_argument("--test-order", type=int, default=None, help="Lagrange order m (default k+2)")
        sp.add_argument("--perturb", type=float, default=DEFAULT_PERTURB)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--gp", type=int, nargs="+", default=[5])
        sp.add_argument("--functional", default=functional, choices=FUNCTIONALS)
        sp.add_argument("--metric", default="benchmark", choices=("benchmark", "flat"))
        sp.add_argument("--out", default=None)
        sp.add_argument("-v", "--verbose", action="store_true")

    for verb in ("mesh", "interp", "curvature", "convergence", "lincheck"):
        common(sub.add_parser(verb))
    common(sub.add_parser("probes"), functional="probes")
    sub.choices["lincheck"].add_argument("--flip-edge-sign", action="store_true",
                                         help="mutation check: flip the bone jump sign")
    return p


def _config(args):
    functional = args.functional
    if args.dim == 2 and functional == "qop":
        functional = "gauss"
    return RunConfig(dim=args.dim, levels=args.levels, order=args.order, test_order=args.test_order,
                     perturb=args.perturb, seed=args.seed, gp=args.gp, functional=functional,
                     metric=args.metric, out=args.out)


def _write_rows(rows, path, columns):
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for k, v in r.items()})
    finally:
        if path:
            fh.close()


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    level = cfg.levels[-1]

    if args.verb == "mesh":
        mesh = build_structured_cube_mesh(level, cfg.dim, cfg.perturb, cfg.seed)
        if cfg.out:
            mesh.write(cfg.out)
        print(f"dim={cfg.dim} level={level} vertices={mesh.n_vertices} elements={mesh.n_elements} "
              f"h={mesh.h:.6f} bones={len(mesh.bones)}")
        return 0

    if args.verb == "interp":
        mesh = build_structured_cube_mesh(level, cfg.dim, cfg.perturb, cfg.seed)
        S = ReggeSpace(mesh, cfg.order)
        g_h = canonical_interpolate(_metric(cfg), S)
        if cfg.out:
            write_coefficients(cfg.out, g_h.dofs)
        print(f"Regge order {cfg.order}: ndof={S.ndof} elements={mesh.n_elements}")
        return 0

    if args.verb == "curvature":
        mesh = build_structured_cube_mesh(level, cfg.dim, cfg.perturb, cfg.seed)
        S = ReggeSpace(mesh, cfg.order)
        metric = _metric(cfg)
        g_h = canonical_interpolate(metric, S)
        q = mesh_quadrature(mesh, **default_degrees(cfg.order))
        meas = error_measure(cfg, mesh, metric, g_h, q)
        f = assemble_against_basis(meas, LagrangeSpace(mesh, cfg.test_order))
        if cfg.out:
            f.write(cfg.out)
        print(f"{cfg.functional} error functional: {f.values.shape[0]} test DOFs x "
              f"{f.values.shape[1]} directions, max |c| = {np.abs(f.values).max():.4e}")
        return 0

    if args.verb == "convergence":
        rows = run_convergence(cfg)
        cols = ["level", "h", "ndof", "error", "order", "config"]
        if cfg.functional == "probes":
            cols = ["level", "h", "ndof", "error", "order", "F1", "F2", "F3", "gp", "config"]
        _write_rows(rows, cfg.out, cols)
        return 0 if all(r.get("valid", True) for r in rows) else 1

    if args.verb == "probes":
        rows = run_probes(cfg)
        _write_rows(rows, cfg.out, ["level", "h", "ndof", "error", "order", "F1", "F2", "F3", "gp",
                                    "config"])
        return 0

    if args.verb == "lincheck":
        rep = run_lincheck(cfg, level=level, edge_sign=-1.0 if args.flip_edge_sign else 1.0)
        for line in rep.lines():
            print(line)
        return 0 if rep.passed else 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
