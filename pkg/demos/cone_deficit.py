"""Angle deficit of a fan of flat triangles seen by the Gauss functional."""
import numpy as np

from reggecurv import LagrangeSpace, cone_metric_2d, gauss_functional

for n, apex in ((6, np.pi / 3), (6, np.pi / 4), (5, np.pi / 3), (8, np.pi / 5)):
    mesh, g = cone_metric_2d([apex] * n)
    V = LagrangeSpace(mesh, 1)
    hat = V.field(np.where(V.boundary, 0.0, 1.0))
    val = gauss_functional(g, hat, k=0)
    print(f"{n} triangles, apex {apex:.4f}: functional {val:+.12f}, 2pi - sum = {2 * np.pi - n * apex:+.12f}")
