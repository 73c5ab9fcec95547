"""Distributional densitized Riemann curvature of Regge metrics in 2D and 3D."""
from .mesh import Mesh, build_structured_cube_mesh, enumerate_bones
from .regge import LagrangeSpace, ReggeSpace, canonical_interpolate, hhj_dofs
from .manufactured import benchmark_2d, benchmark_3d, cone_metric_2d, flat_metric
from .curvature import (assemble_against_basis, curvature_measure, curvature_operator_functional,
                        einstein_functional, gauss_functional, mesh_quadrature, ricci_functional,
                        riemann_functional, scalar_functional)
from .linearization import (a_form, b_form, distributional_inc, distributional_inc_euclidean,
                            linearization_defect, probe_F1, probe_F2, probe_F3)
from .dualnorm import assemble_hhj_biharmonic, hminus2_norm, sparse_solve

__version__ = "0.1.0"
