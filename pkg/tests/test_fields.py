import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reggecurv.fields import PolyField, dim_poly, monomial_exponents, quad_rule
from reggecurv.mesh import build_structured_cube_mesh


def simplex_monomial_integral(alpha):
    """Integral of prod x_i^a_i over the unit reference simplex."""
    d = len(alpha)
    return math.prod(math.factorial(a) for a in alpha) / math.factorial(sum(alpha) + d)


@settings(max_examples=30, deadline=None)
@given(d=st.sampled_from([1, 2, 3]), p=st.integers(0, 12), data=st.data())
def test_quadrature_exactness(d, p, data):
    rule = quad_rule(d, p)
    assert rule.weights.sum() == pytest.approx(1 / math.factorial(d), rel=1e-14)
    assert np.all(rule.weights > 0)
    alpha = data.draw(st.sampled_from([tuple(int(v) for v in e) for e in monomial_exponents(d, p)]))
    val = np.sum(rule.weights * np.prod(rule.points ** np.array(alpha), axis=1))
    assert val == pytest.approx(simplex_monomial_integral(alpha), abs=1e-13)


def test_quadrature_examples():
    r = quad_rule(2, 2)
    assert np.sum(r.weights * r.points[:, 0] * r.points[:, 1]) == pytest.approx(1 / 24, abs=1e-14)
    r = quad_rule(3, 4)
    v = np.sum(r.weights * r.points[:, 0] ** 2 * r.points[:, 1] * r.points[:, 2])
    assert v == pytest.approx(simplex_monomial_integral((2, 1, 1)), abs=1e-14)


def test_unsupported_exactness():
    with pytest.raises(ValueError):
        quad_rule(2, -1)


def test_coefficient_length():
    assert dim_poly(3, 2) == 10
    assert dim_poly(2, 3) == 10
    assert len(monomial_exponents(3, 4)) == dim_poly(3, 4)


def test_polyfield_derivatives_match_finite_differences():
    mesh = build_structured_cube_mesh(1, 3, 0.1, seed=4)
    r = np.random.default_rng(0)
    C = r.normal(size=(mesh.n_elements, dim_poly(3, 3), 3, 3))
    f = PolyField(mesh, 3, C + C.transpose(0, 1, 3, 2))
    elem = np.array([7, 7, 7])
    xi = np.array([[0.2, 0.3, 0.1], [0.1, 0.1, 0.1], [0.3, 0.2, 0.4]])
    v, gr, he = f.evaluate(elem, xi, 2)
    np.testing.assert_allclose(v, np.swapaxes(v, 1, 2), atol=0)
    h = 1e-5
    J = mesh.jac[7]
    for k in range(3):
        dxi = np.linalg.solve(J, np.eye(3)[k])
        vp, gp = f.evaluate(elem, xi + h * dxi, 1)
        vm, gm = f.evaluate(elem, xi - h * dxi, 1)
        np.testing.assert_allclose((vp - vm) / (2 * h), gr[:, k], atol=1e-7 * np.abs(gr).max())
        np.testing.assert_allclose((gp - gm) / (2 * h), he[:, k], atol=1e-7 * np.abs(he).max())
