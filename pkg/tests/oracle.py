"""Brute-force reference computations for the tests.

Nothing here imports from ``reggecurv``: Christoffel symbols and curvature
come from finite differences of metric evaluations, and tensor contractions
with the permutation symbol are literal loops over index tuples.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


@dataclass
class FDConfig:
    step: float = 1e-2
    levels: int = 3
    rtol: float = 1e-5

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.levels < 2:
            raise ValueError("need at least two Richardson levels")


def _richardson(f, h, levels, order=2):
    """Richardson table for a central-difference estimate f(h) with error series in h^2."""
    T = [f(h / 2 ** i) for i in range(levels)]
    for j in range(1, levels):
        fac = 2.0 ** (order * j)
        T = [(fac * T[i + 1] - T[i]) / (fac - 1) for i in range(len(T) - 1)]
    return T[0]


def fd_metric_derivative(g, x, cfg: FDConfig):
    """dg[k, i, j] = d_k g_ij at a single point x."""
    x = np.asarray(x, dtype=float)
    d = len(x)
    out = np.zeros((d, d, d))
    if cfg.step < 1e-12:
        raise ValueError("finite-difference step underflow")
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0

        def cd(h, e=e):
            return (g(x + h * e) - g(x - h * e)) / (2 * h)
        out[k] = _richardson(cd, cfg.step, cfg.levels)
    return out


def fd_christoffel(g, x, cfg: FDConfig):
    """Gamma^m_{jk} at x from finite differences of g."""
    dg = fd_metric_derivative(g, x, cfg)
    d = len(x)
    ginv = np.linalg.inv(g(np.asarray(x, dtype=float)))
    G = np.zeros((d, d, d))
    for m in range(d):
        for j in range(d):
            for k in range(d):
                s = 0.0
                for l in range(d):
                    s += 0.5 * ginv[m, l] * (dg[j, k, l] + dg[k, j, l] - dg[l, j, k])
                G[m, j, k] = s
    return G


def fd_riemann(g, x, cfg: FDConfig = None):
    """All-lower Riemann tensor R_ijkl at x from metric evaluations only.

    Uses R(d_i, d_j) d_k = R^m_ijk d_m with
    R^m_ijk = d_i G^m_jk - d_j G^m_ik + G^p_jk G^m_ip - G^p_ik G^m_jp
    and R_ijkl = g_lm R^m_ijk, so that K = R_1221 / det g in 2D.
    """
    cfg = cfg or FDConfig()
    x = np.asarray(x, dtype=float)
    d = len(x)
    inner = FDConfig(cfg.step / 4, cfg.levels, cfg.rtol)
    G = fd_christoffel(g, x, inner)
    dG = np.zeros((d, d, d, d))                    # dG[i, m, j, k] = d_i G^m_jk
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0

        def cd(h, e=e):
            return (fd_christoffel(g, x + h * e, inner) - fd_christoffel(g, x - h * e, inner)) / (2 * h)
        dG[i] = _richardson(cd, cfg.step, cfg.levels)
    gx = g(x)
    Rup = np.zeros((d, d, d, d))                   # Rup[m, i, j, k]
    for m, i, j, k in itertools.product(range(d), repeat=4):
        s = dG[i, m, j, k] - dG[j, m, i, k]
        for p in range(d):
            s += G[p, j, k] * G[m, i, p] - G[p, i, k] * G[m, j, p]
        Rup[m, i, j, k] = s
    R = np.zeros((d, d, d, d))
    for i, j, k, l in itertools.product(range(d), repeat=4):
        R[i, j, k, l] = sum(gx[l, m] * Rup[m, i, j, k] for m in range(d))
    return R


def perm_sign(idx):
    """Permutation symbol of a tuple of indices 0..d-1 (0 if repeated)."""
    idx = list(idx)
    if len(set(idx)) < len(idx):
        return 0
    s = 1
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            if idx[a] > idx[b]:
                s = -s
    return s


def eps_contract(expr, *args):
    """Literal loop contractions with the (scaled) permutation symbol.

    ``"eps_eps"``: eps^{ijk} eps_{ijk} in 3D (returns 6).
    ``"amap"``: (args g, U) -> covariant A_ijkl of A^{ijkl} = -eps^{ija} eps^{klb} U_ab (3D) or
    -eps^{ij} eps^{kl} U (2D), with eps^{..} = eps / sqrt(det g).
    ``"Q"``: (args g, R) -> Q^{ij} = -1/4 eps^{ikl} eps^{jmn} R_klmn (3D).
    """
    if expr == "eps_eps":
        return sum(perm_sign(t) ** 2 for t in itertools.product(range(3), repeat=3))
    if expr == "amap":
        g, U = args
        g = np.asarray(g, dtype=float)
        d = g.shape[0]
        sq = np.sqrt(np.linalg.det(g))
        Aup = np.zeros((d,) * 4)
        for i, j, k, l in itertools.product(range(d), repeat=4):
            if d == 2:
                Aup[i, j, k, l] = -perm_sign((i, j)) * perm_sign((k, l)) * float(U) / sq ** 2
            else:
                s = 0.0
                for a, b in itertools.product(range(3), repeat=2):
                    s += perm_sign((i, j, a)) * perm_sign((k, l, b)) * U[a, b]
                Aup[i, j, k, l] = -s / sq ** 2
        A = np.zeros_like(Aup)
        for i, j, k, l in itertools.product(range(d), repeat=4):
            s = 0.0
            for a, b, c, e in itertools.product(range(d), repeat=4):
                s += g[i, a] * g[j, b] * g[k, c] * g[l, e] * Aup[a, b, c, e]
            A[i, j, k, l] = s
        return A
    if expr == "Q":
        g, R = args
        sq = np.sqrt(np.linalg.det(g))
        Q = np.zeros((3, 3))
        for i, j in itertools.product(range(3), repeat=2):
            s = 0.0
            for k, l, m, n in itertools.product(range(3), repeat=4):
                e1 = perm_sign((i, k, l))
                e2 = perm_sign((j, m, n))
                if e1 and e2:
                    s += e1 * e2 * R[k, l, m, n]
            Q[i, j] = -0.25 * s / sq ** 2
        return Q
    raise KeyError(expr)


def euclidean_inc(d2s):
    """inc(s)_ij = eps_ipq eps_jrs d_p d_r s_qs from second derivatives d2s[p, r, q, s]."""
    out = np.zeros((3, 3))
    for i, j, p, q, r, s in itertools.product(range(3), repeat=6):
        e = perm_sign((i, p, q)) * perm_sign((j, r, s))
        if e:
            out[i, j] += e * d2s[p, r, q, s]
    return out


def central_difference(f, eps_list):
    """[f(e) - f(-e)] / (2e) for each e."""
    return np.array([(f(e) - f(-e)) / (2 * e) for e in eps_list])
