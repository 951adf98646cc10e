"""Finite-difference reference solvers used to cross-check the closed forms.

These discretise the differential expressions directly and share no code
with the boundary-triple machinery.
"""

from __future__ import annotations

import cmath

import numpy as np
import scipy.linalg as sla

from .core import CellParams, EdgeFunction, Quasimomentum, SpectralPoint, StateVector


def fd_dirichlet_edge(f: EdgeFunction, sp: SpectralPoint, t: float, a: float) -> EdgeFunction:
    """Centred second-order scheme for ``-a (d/dx + i t)^2 u - z u = f`` with ``u = 0`` at the ends."""
    x = np.asarray(f.nodes)
    n = x.size - 1
    h = x[1] - x[0]
    m = n - 1
    main = np.full(m, a * (2 / h ** 2 + t * t) - sp.z, dtype=complex)
    up = np.full(m - 1, -a * (1 / h ** 2 + 1j * t / h), dtype=complex)
    lo = np.full(m - 1, -a * (1 / h ** 2 - 1j * t / h), dtype=complex)
    ab = np.zeros((3, m), dtype=complex)
    ab[0, 1:] = up
    ab[1] = main
    ab[2, :-1] = lo
    u = np.zeros(n + 1, dtype=complex)
    u[1:-1] = sla.solve_banded((1, 1), ab, np.asarray(f.samples[1:-1]))
    return f.like(u)


def _cycle_layout(c: CellParams, n: int):
    """Interval lengths and coefficients around the unscaled cycle (e1, e2, e3)."""
    e = c.eps
    h = np.concatenate([np.full(n, e * l / n) for l in (c.l1, c.l2, c.l3)])
    a = np.concatenate([np.full(n, ak) for ak in (c.a1, e * e, c.a3)])
    return h, a


def _cycle_matrix(sp: SpectralPoint, q: Quasimomentum, c: CellParams, n: int):
    h, a = _cycle_layout(c, n)
    size = 3 * n
    X = np.concatenate([[0.0], np.cumsum(h)[:-1]])
    twist = cmath.exp(1j * q.tau)  # v(eps) = e^{i t eps} v(0)
    A = np.zeros((size, size), dtype=complex)
    vol = np.empty(size)
    for i in range(size):
        hl, hr = h[i - 1], h[i]
        al, ar = a[i - 1], a[i]
        vol[i] = (hl + hr) / 2
        A[i, i] += ar / hr + al / hl
        jr, jl = (i + 1) % size, (i - 1) % size
        A[i, jr] -= ar / hr * (twist if i == size - 1 else 1)
        A[i, jl] -= al / hl * (1 / twist if i == 0 else 1)
    return A, vol, X, h


def fd_cycle_resolvent(f: StateVector, sp: SpectralPoint, q: Quasimomentum, c: CellParams) -> StateVector:
    """Finite-volume solve of the fibre problem on the unscaled cycle.

    Works in the gauge ``u = e^{-itx} v`` in the global cycle coordinate,
    where the flux ``a v'`` is continuous and ``v(eps) = e^{i tau} v(0)``.
    ``f`` lives on edges of lengths ``eps l_j`` with ``n`` intervals each.
    """
    n = f[0].n
    if any(comp.n != n for comp in f):
        raise ValueError("all edges need the same grid size")
    A, vol, X, h = _cycle_matrix(sp, q, c, n)
    size = 3 * n
    # right-hand side: half-cell averages at vertices
    rhs = np.empty(size, dtype=complex)
    for j, comp in enumerate(f):
        s = comp.samples
        rhs[j * n + 1:(j + 1) * n] = s[1:-1]
    hh = h[::n]
    for j in range(3):
        prev = (j - 1) % 3
        left, right = f[prev].samples[-1], f[j].samples[0]
        rhs[j * n] = (hh[prev] * left + hh[j] * right) / (hh[prev] + hh[j])
    t = q.t
    g = np.exp(1j * t * X) * rhs
    M = A / vol[:, None] - sp.z * np.eye(size)
    v = np.linalg.solve(M, g)
    u = np.exp(-1j * t * X) * v
    comps = []
    for j, comp in enumerate(f):
        vals = np.empty(n + 1, dtype=complex)
        vals[:n] = u[j * n:(j + 1) * n]
        nxt = ((j + 1) % 3) * n
        # the last node of e3 is the cycle start: u(eps) = u(0)
        vals[n] = u[nxt]
        comps.append(comp.like(vals))
    return StateVector(tuple(comps))


def fd_cycle_eigenvalues(q: Quasimomentum, c: CellParams, n: int = 400) -> np.ndarray:
    """Sorted real eigenvalues of the finite-volume fibre operator."""
    A, vol, _, _ = _cycle_matrix(SpectralPoint(0j, 0j), q, c, n)
    d = 1 / np.sqrt(vol)
    H = d[:, None] * A * d[None, :]
    H = (H + H.conj().T) / 2
    return np.sort(np.linalg.eigvalsh(H))
