"""Truncated Gelfand transform, the soft-edge dilation and the effective-space map."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import CellParams, EdgeFunction, Quasimomentum, StateVector, quadrature
from .errors import DomainError, GridMismatch, NotInEffectiveSpace, SupportExceedsWindow
from .resolvent import HomState, stiff_profile

MAX_CELLS = 64
PROJECT_WARN = 1e-8
PROJECT_FAIL = 1e-6


# --------------------------------------------------------------------------
# Gelfand transform


@dataclass(frozen=True, eq=False)
class GelfandSample:
    """Samples of the transform on ``y_j = j / m_y`` and ``kappa_m = 2 pi m / m_kappa``.

    For the scaled variant the grids are multiplied by ``eps`` and ``1/eps``.
    """

    u_hat: np.ndarray
    N: int
    eps: float = 1.0
    tail_bound: float = 0.0

    @property
    def m_y(self) -> int:
        return self.u_hat.shape[0]

    @property
    def m_kappa(self) -> int:
        return self.u_hat.shape[1]

    @property
    def y(self) -> np.ndarray:
        return self.eps * np.arange(self.m_y) / self.m_y

    @property
    def kappa(self) -> np.ndarray:
        return 2 * math.pi * np.arange(self.m_kappa) / self.m_kappa / self.eps

    def norm(self) -> float:
        dy = self.eps / self.m_y
        dk = 2 * math.pi / (self.eps * self.m_kappa)
        return math.sqrt(float(np.sum(np.abs(self.u_hat) ** 2)) * dy * dk)


def sample_line(u: Callable[[np.ndarray], np.ndarray], N: int, m_y: int = 512, eps: float = 1.0) -> np.ndarray:
    """Samples of ``u`` on cells ``n = -N..N``, shape ``(2N + 1, m_y)``."""
    y = eps * (np.arange(-N, N + 1)[:, None] + np.arange(m_y)[None, :] / m_y)
    return np.asarray(u(y), dtype=complex) * np.ones_like(y)


def _cells(u, N: int, m_y: int, eps: float) -> tuple[np.ndarray, float]:
    if not 0 <= N <= MAX_CELLS:
        raise DomainError("N", f"truncation must lie in [0, {MAX_CELLS}], got {N}")
    if callable(u):
        cells = sample_line(u, N, m_y, eps)
        margin = sample_line(u, N + 1, m_y, eps)[[0, -1]]
        tail = float(np.abs(margin).max())
        if tail > 0:
            raise SupportExceedsWindow(f"function is nonzero outside [-{N}, {N + 1}) (max {tail:.3e})")
        return cells, tail
    cells = np.asarray(u, dtype=complex)
    if cells.ndim != 2 or cells.shape[0] != 2 * N + 1:
        raise SupportExceedsWindow(f"sample array of shape {cells.shape} does not match 2N+1 = {2 * N + 1} cells")
    return cells, 0.0


def gelfand_scaled(u, eps: float, N: int, m_y: int = 512, m_kappa: int = 512) -> GelfandSample:
    """``(eps / 2pi)^{1/2} sum_n u(x + eps n) exp(-i t (x + eps n))`` on ``[0, eps) x [0, 2pi/eps)``."""
    if not eps > 0:
        raise DomainError("eps", f"must be positive, got {eps}")
    cells, tail = _cells(u, N, m_y, eps)
    m_y = cells.shape[1]
    x = eps * np.arange(m_y) / m_y
    t = 2 * math.pi * np.arange(m_kappa) / m_kappa / eps
    n = np.arange(-N, N + 1)
    out = np.zeros((m_y, m_kappa), dtype=complex)
    for row, nn in zip(cells, n):
        out += row[:, None] * np.exp(-1j * np.outer(x + eps * nn, t))
    return GelfandSample(math.sqrt(eps / (2 * math.pi)) * out, N, eps, tail)


def gelfand(u, N: int, m_y: int = 512, m_kappa: int = 512) -> GelfandSample:
    """Transform of a compactly supported function on the line, truncated to ``|n| <= N``."""
    return gelfand_scaled(u, 1.0, N, m_y, m_kappa)


def inverse_gelfand(g: GelfandSample) -> np.ndarray:
    """Recover the samples on cells ``n = -N..N`` (shape ``(2N + 1, m_y)``)."""
    eps = g.eps
    x, t = g.y, g.kappa
    dt = 2 * math.pi / (eps * g.m_kappa)
    out = []
    for nn in range(-g.N, g.N + 1):
        ph = np.exp(1j * np.outer(x + eps * nn, t))
        out.append(math.sqrt(eps / (2 * math.pi)) * np.sum(g.u_hat * ph, axis=1) * dt)
    return np.array(out)


def line_norm(cells: np.ndarray, eps: float = 1.0) -> float:
    """Rectangle-rule ``L2`` norm matching the transform's ``y`` quadrature."""
    cells = np.asarray(cells)
    return math.sqrt(float(np.sum(np.abs(cells) ** 2)) * eps / cells.shape[1])


# --------------------------------------------------------------------------
# soft-edge dilation


def _dilate(comp: EdgeFunction, factor: float, amp: float) -> EdgeFunction:
    return EdgeFunction(
        comp.edge_id, comp.length * factor, comp.samples * amp,
        comp.quad_weights * factor, comp.rule, np.asarray(comp.nodes) * factor,
    )


def phi_eps(u: StateVector, c: CellParams) -> StateVector:
    """Dilate the soft component from ``[0, eps l2]`` to ``[0, l2]`` with factor ``sqrt(eps)``."""
    e1, e2, e3 = u.components
    if abs(e2.length - c.eps * c.l2) > 1e-12 * max(1.0, e2.length):
        raise GridMismatch(f"soft edge has length {e2.length}, expected eps*l2 = {c.eps * c.l2}")
    return StateVector((e1, _dilate(e2, 1 / c.eps, math.sqrt(c.eps)), e3))


def phi_eps_inverse(u: StateVector, c: CellParams) -> StateVector:
    e1, e2, e3 = u.components
    if abs(e2.length - c.l2) > 1e-12 * max(1.0, e2.length):
        raise GridMismatch(f"soft edge has length {e2.length}, expected l2 = {c.l2}")
    return StateVector((e1, _dilate(e2, c.eps, 1 / math.sqrt(c.eps)), e3))


# --------------------------------------------------------------------------
# effective space


def _profile(u: StateVector, t: Quasimomentum, c: CellParams):
    e1, _, e3 = u.components
    return stiff_profile(t, c, e1.nodes, e3.nodes, e1.quad_weights, e3.quad_weights)


def psi_t(u: StateVector, t: Quasimomentum, c: CellParams) -> HomState:
    """Map ``beta psi + u2`` to ``(u2, beta)``.

    A stiff part that is not a multiple of ``psi`` is projected; the
    projection is silent below ``1e-8 ||u||``, warned about below
    ``1e-6 ||u||`` and refused beyond.
    """
    prof = _profile(u, t, c)
    e1, e2, e3 = u.components
    parts = (e1.samples, e3.samples)
    beta = complex(sum(np.sum(w * s * np.conj(p)) for s, p, w in zip(parts, prof.psi, prof.weights)))
    rem = math.sqrt(sum(
        float(np.sum(w * np.abs(s - beta * p) ** 2)) for s, p, w in zip(parts, prof.psi, prof.weights)
    ))
    scale = max(u.norm(), 1e-300)
    if rem > PROJECT_FAIL * scale:
        raise NotInEffectiveSpace(f"stiff remainder {rem:.3e} exceeds {PROJECT_FAIL:g} * ||u||")
    if rem > PROJECT_WARN * scale:
        warnings.warn(f"stiff part projected onto psi (remainder {rem:.3e})", stacklevel=2)
    return HomState(e2, beta)


def psi_t_adjoint(h: HomState, t: Quasimomentum, c: CellParams, n: int | None = None, rule: str | None = None) -> StateVector:
    """Embed ``(u2, beta)`` as ``beta psi + u2``; stiff grids default to the soft grid size."""
    n = h.u.n if n is None else n
    rule = h.u.rule if rule is None else rule
    x1, w1 = quadrature(c.eps * c.l1, n, rule)
    x3, w3 = quadrature(c.eps * c.l3, n, rule)
    prof = stiff_profile(t, c, x1, x3, w1, w3)
    e1 = EdgeFunction("e1", c.eps * c.l1, h.beta * prof.psi[0], w1, rule, x1)
    e3 = EdgeFunction("e3", c.eps * c.l3, h.beta * prof.psi[1], w3, rule, x3)
    return StateVector((e1, h.u, e3))
