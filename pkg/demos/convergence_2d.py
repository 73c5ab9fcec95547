"""H^-2 error of the distributional Gauss curvature on the 2D graph benchmark."""
import sys

from reggecurv.experiments import RunConfig, run_convergence

perturb = float(sys.argv[1]) if len(sys.argv) > 1 else 0.0
for k in (0, 1, 2):
    rows = run_convergence(RunConfig(dim=2, levels=[1, 2, 3, 4], order=k, perturb=perturb, functional="gauss"))
    for r in rows:
        print(f"k={k} level={r['level']} h={r['h']:.4f} ndof={r['ndof']:6d} error={r['error']:.4e} order={r['order']:.2f}")
