import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracle import FDConfig, eps_contract, euclidean_inc, fd_riemann, perm_sign
from reggecurv import geometry as geo
from reggecurv.manufactured import benchmark_3d, benchmark_2d


def random_quadratic_metric(d, seed):
    """g(x) = A + sum_k B_k x_k + sum_kl C_kl x_k x_l, SPD near the origin."""
    r = np.random.default_rng(seed)
    A = r.normal(size=(d, d))
    A = A @ A.T + d * np.eye(d)
    B = 0.3 * r.normal(size=(d, d, d))
    B = B + B.transpose(0, 2, 1)
    C = 0.2 * r.normal(size=(d, d, d, d))
    C = C + C.transpose(1, 0, 2, 3)
    C = C + C.transpose(0, 1, 3, 2)

    def g(x):
        x = np.atleast_2d(x)
        return A + np.einsum("kij,nk->nij", B, x) + np.einsum("klij,nk,nl->nij", C, x, x)

    def dg(x):
        return B[None] + 2 * np.einsum("klij,nl->nkij", C, x)

    def d2g(x):
        return np.broadcast_to(2 * C, (len(x),) + C.shape).copy()
    return g, dg, d2g


def geometry_at(d, seed, n=4):
    g, dg, d2g = random_quadratic_metric(d, seed)
    x = 0.2 * np.random.default_rng(seed + 1).uniform(-1, 1, size=(n, d))
    return geo.PointGeometry(g(x), dg(x), d2g(x)), g, x


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), d=st.sampled_from([2, 3]))
def test_riemann_symmetries_and_bianchi(seed, d):
    pg, _, _ = geometry_at(d, seed)
    R = pg.R
    s = np.abs(R).max()
    assert np.abs(R + np.swapaxes(R, 1, 2)).max() <= 1e-11 * s
    assert np.abs(R + np.swapaxes(R, 3, 4)).max() <= 1e-11 * s
    assert np.abs(R - R.transpose(0, 3, 4, 1, 2)).max() <= 1e-11 * s
    bianchi = R + R.transpose(0, 2, 3, 1, 4) + R.transpose(0, 3, 1, 2, 4)
    assert np.abs(bianchi).max() <= 1e-11 * s


@pytest.mark.parametrize("d", [2, 3])
def test_riemann_matches_finite_differences(d):
    pg, g, x = geometry_at(d, 7, n=2)
    for n in range(len(x)):
        R = fd_riemann(lambda y: g(y)[0], x[n], FDConfig())
        assert np.abs(R - pg.R[n]).max() <= 1e-5 * np.abs(pg.R[n]).max()


def test_fd_oracle_identity_and_flat_chart():
    R = fd_riemann(lambda y: np.eye(3), np.array([0.1, 0.2, 0.3]))
    assert np.abs(R).max() <= 1e-9
    # diag(1, (1+x)^2) is the Euclidean plane in polar-like coordinates
    R = fd_riemann(lambda y: np.diag([1.0, (1 + y[0]) ** 2]), np.array([0.3, 0.1]))
    assert abs(R[0, 1, 1, 0]) <= 1e-7


def test_benchmark_riemann_against_fd_oracle():
    m, _ = benchmark_3d()
    for x in ([0.0, 0.0, 0.0], [0.3, -0.2, 0.5], [-0.7, 0.4, 0.1]):
        x = np.array(x)
        pg = geo.PointGeometry(m.g(x[None]), m.dg(x[None]), m.d2g(x[None]))
        R = fd_riemann(lambda y: m.g(y[None])[0], x)
        assert np.abs(R - pg.R[0]).max() <= 1e-5 * max(np.abs(pg.R[0]).max(), 1.0)


def test_benchmark_origin_values():
    m, Q = benchmark_3d()
    o = np.zeros((1, 3))
    np.testing.assert_allclose(m.g(o)[0], np.eye(3), atol=1e-15)
    pg = geo.PointGeometry(m.g(o), m.dg(o), m.d2g(o))
    np.testing.assert_allclose(pg.G2, 0.0, atol=1e-15)
    np.testing.assert_allclose(Q(o)[0], np.eye(3), atol=1e-14)
    np.testing.assert_allclose(pg.Q_contra[0], np.eye(3), atol=1e-14)


def test_benchmark_closed_forms_against_point_geometry():
    r = np.random.default_rng(3)
    x = r.uniform(-1, 1, size=(1000, 3))
    m, Q = benchmark_3d()
    pg = geo.PointGeometry(m.g(x), m.dg(x), m.d2g(x))
    Qx = Q(x)
    assert np.abs(Qx - pg.Q_contra).max() <= 1e-8 * np.abs(Qx).max()
    off = Qx[:, [0, 0, 1], [1, 2, 2]]
    assert np.abs(off).max() <= 1e-12
    m2, K = benchmark_2d()
    y = x[:, :2]
    pg2 = geo.PointGeometry(m2.g(y), m2.dg(y), m2.d2g(y))
    assert np.abs(K(y) - pg2.gauss).max() <= 1e-8


def test_einstein_is_minus_curvature_operator_in_3d():
    pg, _, _ = geometry_at(3, 11, n=1000)
    Gup = np.einsum("nia,nab,njb->nij", pg.ginv, pg.einstein, pg.ginv)
    assert np.abs(Gup + pg.Q_contra).max() <= 1e-10 * np.abs(Gup).max()


def test_scalar_is_twice_gauss_in_2d():
    pg, _, _ = geometry_at(2, 12, n=50)
    np.testing.assert_allclose(pg.scalar, 2 * pg.gauss, rtol=1e-11, atol=1e-13)


def test_eps_oracle_sanity():
    assert eps_contract("eps_eps") == 6
    assert perm_sign((1, 0, 2)) == -1
    assert perm_sign((0, 0, 2)) == 0


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_q_and_amap_match_index_loops(seed):
    pg, _, _ = geometry_at(3, seed, n=1)
    Q = eps_contract("Q", pg.g[0], pg.R[0])
    assert np.abs(Q - pg.Q_contra[0]).max() <= 1e-12 * max(1.0, np.abs(Q).max())
    U = np.random.default_rng(seed).normal(size=(3, 3))
    U = U + U.T
    A = eps_contract("amap", pg.g[0], U)
    assert np.abs(A - geo.amap(U[None], pg)[0]).max() <= 1e-12 * np.abs(A).max()


def test_amap_2d_identity_metric():
    pg = geo.PointGeometry(np.eye(2)[None])
    A = geo.amap(np.array([2.5]), pg)
    assert A[0, 0, 1, 0, 1] == pytest.approx(-2.5, abs=1e-15)
    np.testing.assert_allclose(A[0], eps_contract("amap", np.eye(2), 2.5), atol=1e-15)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), d=st.sampled_from([2, 3]))
def test_amap_round_trip(seed, d):
    pg, _, _ = geometry_at(d, seed, n=3)
    r = np.random.default_rng(seed)
    if d == 2:
        U = r.normal(size=3)
    else:
        U = r.normal(size=(3, 3, 3))
        U = U + U.transpose(0, 2, 1)
    back = geo.amap_inv(geo.amap(U, pg), pg)
    assert np.abs(back - U).max() <= 1e-11 * np.abs(U).max()


def test_riemann_pairing_is_four_times_q_pairing():
    pg, _, _ = geometry_at(3, 5, n=20)
    r = np.random.default_rng(5)
    U = r.normal(size=(20, 3, 3))
    U = U + U.transpose(0, 2, 1)
    lhs = geo.inner4(pg.R, geo.amap(U, pg), pg.ginv)
    rhs = 4 * np.einsum("nij,nij->n", pg.Q_contra, U)
    assert np.abs(lhs - rhs).max() <= 1e-10 * np.abs(rhs).max()


def test_normal_and_conormal_properties():
    r = np.random.default_rng(9)
    M = r.normal(size=(3, 3))
    g = (M @ M.T + 3 * np.eye(3))[None]
    nhat = np.array([[0.0, 0.0, 1.0]])
    nu = geo.g_normal(g, nhat)
    T = np.array([[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]])
    np.testing.assert_allclose(np.einsum("ni,nij,nj->n", nu, g, nu), 1.0, atol=1e-13)
    np.testing.assert_allclose(np.einsum("ni,nij,njk->nk", nu, g, T), 0.0, atol=1e-13)
    nu2 = geo.g_normal(np.diag([4.0, 1.0])[None], np.array([[1.0, 0.0]]))
    np.testing.assert_allclose(nu2[0], [0.5, 0.0], atol=1e-15)


def test_interior_angle_and_deficit():
    mu1 = np.array([[1.0, 0.0]])
    mu2 = np.array([[0.0, 1.0]])
    ang = geo.interior_angle(np.eye(2)[None], mu1, mu2)
    assert ang[0] == pytest.approx(np.pi / 2, abs=1e-15)
    assert geo.angle_deficit(np.full((1, 6), np.pi / 4))[0] == pytest.approx(np.pi / 2, abs=1e-14)


def test_inc_of_symmetric_gradient_vanishes():
    r = np.random.default_rng(1)
    # cubic vector field v_i = a_ipqr x_p x_q x_r, a symmetric in its last three slots
    a = r.normal(size=(3, 3, 3, 3))
    a = sum(a.transpose(0, *p) for p in itertools.permutations((1, 2, 3))) / 6
    d2e = np.zeros((3, 3, 3, 3))              # d_p d_r e_qs for e = sym grad v
    for p, rr, q, s in itertools.product(range(3), repeat=4):
        d2e[p, rr, q, s] = 3 * (a[s, q, p, rr] + a[q, s, p, rr])
    assert np.abs(euclidean_inc(d2e)).max() <= 1e-11 * np.abs(d2e).max()
    pg = geo.PointGeometry(np.eye(3)[None], np.zeros((1, 3, 3, 3)), np.zeros((1, 3, 3, 3, 3)))
    inc = geo.covariant_inc(np.zeros((1, 3, 3)), np.zeros((1, 3, 3, 3)), d2e[None], pg)
    assert np.abs(inc).max() <= 1e-11 * np.abs(d2e).max()


def test_euclidean_inc_of_diag_y_squared():
    d2s = np.zeros((3, 3, 3, 3))
    d2s[1, 1, 0, 0] = 2.0                     # s = diag(y^2, 0, 0)
    inc = euclidean_inc(d2s)
    expect = np.zeros((3, 3))
    expect[2, 2] = 2.0
    np.testing.assert_allclose(inc, expect, atol=1e-12)
    pg = geo.PointGeometry(np.eye(3)[None], np.zeros((1, 3, 3, 3)), np.zeros((1, 3, 3, 3, 3)))
    lib = geo.covariant_inc(np.zeros((1, 3, 3)), np.zeros((1, 3, 3, 3)), d2s[None], pg)
    np.testing.assert_allclose(lib[0], inc, atol=1e-12)


def test_curl_of_metric_vanishes():
    pg, g, x = geometry_at(3, 4, n=5)
    c = geo.covariant_curl(pg.g, pg.dg, pg)
    assert np.abs(c).max() <= 1e-11
