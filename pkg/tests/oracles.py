"""Independent reference computations used by the tests.

Nothing here imports the closed forms under test; each oracle recomputes
its quantity from first principles (brute-force scans, multiprecision
differentiation, direct formulas).
"""

import math

import mpmath as mp
import numpy as np


def brute_roots(fn, lo, hi, n=10 ** 6):
    """Sign changes of ``fn`` on an ``n``-point grid refined by 200 bisection steps."""
    ks = np.linspace(lo, hi, n + 1)[1:]
    v = fn(ks)
    out = []
    for i in np.nonzero(v[:-1] * v[1:] <= 0)[0]:
        a, b = ks[i], ks[i + 1]
        fa = fn(np.array([a]))[0]
        for _ in range(200):
            m = 0.5 * (a + b)
            fm = fn(np.array([m]))[0]
            if fa * fm <= 0:
                b = m
            else:
                a, fa = m, fm
        out.append(0.5 * (a + b))
    return out


def cc(l1, l2, l3, tau):
    L = l1 + l3
    return lambda k: 2 * np.cos(tau) + k * L * np.sin(k * l2) - 2 * np.cos(k * l2)


def cycle_m_column(col, k, t, lengths, coeffs, weights=(1, 1, 1)):
    """Gamma_1 of the kernel element with unit value at vertex ``col``.

    Edge solutions of ``a (1/i d/dx + t)^2 u = k^2 u`` with prescribed end
    values are built in multiprecision; derivatives are taken numerically.
    ``weights`` scale the value of (e2 start, e2 end) the way the rescaled
    triple does; incidence V1 = {e1 start, e3 end}, V2 = {e2 start, e1 end},
    V3 = {e3 start, e2 end}.
    """
    mp.mp.dps = 40
    k, t = mp.mpc(k), mp.mpf(t)
    bd = [mp.mpf(1) if j == col else mp.mpf(0) for j in range(3)]
    # (start vertex, end vertex) per edge
    ends = {0: (0, 1), 1: (1, 2), 2: (2, 0)}
    ws, we = weights[1], weights[2]
    traces = [mp.mpc(0)] * 3
    for j in range(3):
        Lj, aj = mp.mpf(lengths[j]), mp.mpf(coeffs[j])
        vs, ve = bd[ends[j][0]], bd[ends[j][1]]
        cs, ce = 1, 1
        if j == 1:
            cs, ce = ws, we
        alpha, beta = cs * vs, ce * ve
        kap = k / mp.sqrt(aj)

        def u(x, alpha=alpha, beta=beta, Lj=Lj, kap=kap):
            return mp.exp(-1j * t * x) * (alpha * mp.sin(kap * (Lj - x)) + beta * mp.exp(1j * t * Lj) * mp.sin(kap * x)) / mp.sin(kap * Lj)

        def conormal(x):
            return aj * (mp.diff(u, x) + 1j * t * u(x))

        traces[ends[j][0]] += mp.conj(cs) * conormal(mp.mpf(0))
        traces[ends[j][1]] -= mp.conj(ce) * conormal(Lj)
    return np.array([complex(v) for v in traces])


def hausdorff_points(a, b):
    if not a and not b:
        return 0.0
    if not a or not b:
        return math.inf
    return max(max(min(abs(x - y) for y in b) for x in a), max(min(abs(x - y) for y in a) for x in b))
