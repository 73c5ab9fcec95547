"""3D curvature operator error table (levels 1-2 by default; pass more levels as arguments)."""
import sys
import time

from reggecurv.experiments import RunConfig, run_convergence

levels = [int(a) for a in sys.argv[1:]] or [1, 2]
for k in (0, 1, 2):
    t0 = time.time()
    rows = run_convergence(RunConfig(dim=3, levels=levels, order=k, perturb=0.0, functional="qop"))
    for r in rows:
        print(f"k={k} level={r['level']} ndof={r['ndof']:6d} error={r['error']:.4e} order={r['order']:.2f}")
    print(f"  ({time.time() - t0:.1f}s)")
