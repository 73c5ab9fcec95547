"""Central-difference check of the evolution forms, with and without the edge-sign mutation."""
from reggecurv.experiments import RunConfig, run_lincheck

for dim in (2, 3):
    cfg = RunConfig(dim=dim, levels=[1], order=1, functional="gauss" if dim == 2 else "qop")
    for sign in (1.0, -1.0):
        rep = run_lincheck(cfg, level=1, edge_sign=sign)
        print(f"edge sign {sign:+.0f}:", rep.lines()[0])
