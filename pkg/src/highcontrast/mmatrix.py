"""Closed-form M-matrices of the three-edge cycle and their asymptotics.

Vertex incidence on the cycle: ``V1 = {e1 start, e3 end}``,
``V2 = {e2 start, e1 end}``, ``V3 = {e3 start, e2 end}``.  Traces are
inward co-normal derivatives ``a (u' + i t u)`` taken with a plus sign at
the start of an edge and a minus sign at its end.

On the modified graph the stiff edges close into a two-vertex cycle
(``V1 = {e1 start, e3 end}``, ``V3 = {e3 start, e1 end}``) and the soft edge
closes into a loop at ``V2``; the loop and the stiff cycle are coupled only
through the z-dependent matrix :func:`btilde`.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .core import CellParams, Quasimomentum, SpectralPoint, require_equal_stiffness
from .errors import DomainError, NearSingularDispersion, PoleError

POLE_TOL = 1e-12
RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class MMatrix3:
    """A 3x3 complex matrix on the boundary space ``C^3``."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=complex)
        if e.shape != (3, 3):
            raise DomainError("entries", f"expected a 3x3 matrix, got shape {e.shape}")
        if not np.all(np.isfinite(e)):
            raise PoleError("?", "non-finite matrix entry")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __getitem__(self, idx):
        return self.entries[idx]

    def __add__(self, other):
        return MMatrix3(self.entries + np.asarray(other))

    def __sub__(self, other):
        return MMatrix3(self.entries - np.asarray(other))

    def __mul__(self, scalar):
        return MMatrix3(self.entries * scalar)

    __rmul__ = __mul__

    def adjoint(self) -> "MMatrix3":
        return MMatrix3(self.entries.conj().T)

    def det(self) -> complex:
        return complex(np.linalg.det(self.entries))

    def inv(self) -> np.ndarray:
        return np.linalg.inv(self.entries)


@dataclass(frozen=True)
class MAsymptotics:
    """``eps**-1 m_minus1 + m_0 + eps m_1`` expansion of an inverse matrix."""

    m_minus1: MMatrix3
    m_0: MMatrix3
    m_1: MMatrix3
    eps: float
    valid_for: str

    def evaluate(self, order: int = 1) -> np.ndarray:
        """Partial sum up to and including the ``eps**order`` term."""
        out = self.m_minus1.entries / self.eps
        if order >= 0:
            out = out + self.m_0.entries
        if order >= 1:
            out = out + self.eps * self.m_1.entries
        return out


# --------------------------------------------------------------------------
# scalar building blocks


def at_pole(theta: complex) -> bool:
    return abs(cmath.sin(theta)) < POLE_TOL * max(1.0, abs(theta))


def edge_cot_csc(k: complex, length: float, a: float, edge: str) -> tuple[complex, complex]:
    """Return ``sqrt(a) k cot(k L / sqrt(a))`` and ``sqrt(a) k csc(k L / sqrt(a))``.

    Both tend to ``a / L`` as ``k -> 0``.
    """
    if k == 0:
        return a / length, a / length
    ra = math.sqrt(a)
    theta = k * length / ra
    if at_pole(theta):
        raise PoleError(edge, f"sin({theta:.6g}) vanishes (Dirichlet eigenvalue on the edge)")
    s = cmath.sin(theta)
    return ra * k * cmath.cos(theta) / s, ra * k / s


def phase(tau: float, length: float) -> complex:
    """``exp(i eps l t)`` computed from the reduced product ``tau = eps t``."""
    return cmath.exp(1j * math.fmod(tau * length, 2 * math.pi))


def _check_eps(q: Quasimomentum, c: CellParams) -> None:
    if abs(q.eps - c.eps) > 1e-12 * c.eps:
        raise DomainError("eps", f"quasimomentum built for eps={q.eps}, cell has eps={c.eps}")


def dispersion_denominator(k: complex, tau: float, c: CellParams) -> complex:
    """``D(k) = k^2 (l1 + l3) - 2 k cot(k l2) + 2 k cos(tau) / sin(k l2)``."""
    theta = k * c.l2
    if k == 0:
        return 0j
    if at_pole(theta):
        raise PoleError("e2", f"sin(k l2) vanishes at k={k}")
    s = cmath.sin(theta)
    return k * k * c.stiff_length - 2 * k * cmath.cos(theta) / s + 2 * k * math.cos(tau) / s


# --------------------------------------------------------------------------
# M-matrices on the original cycle


def _cycle_matrix(stiff1, soft, stiff3, tau, c: CellParams) -> np.ndarray:
    """Assemble the cycle M-matrix from per-edge (cot, csc) terms."""
    (c1, s1), (c2, s2), (c3, s3) = stiff1, soft, stiff3
    p1, p2, p3 = phase(tau, c.l1), phase(tau, c.l2), phase(tau, c.l3)
    m = np.empty((3, 3), dtype=complex)
    m[0, 0] = -(c1 + c3)
    m[1, 1] = -(c1 + c2)
    m[2, 2] = -(c2 + c3)
    m[0, 1] = p1 * s1
    m[1, 0] = s1 / p1
    m[0, 2] = s3 / p3
    m[2, 0] = p3 * s3
    m[1, 2] = p2 * s2
    m[2, 1] = s2 / p2
    return m


def m1(sp: SpectralPoint, t: Quasimomentum, c: CellParams) -> MMatrix3:
    """M-matrix of the fibre operator on the cycle with edges ``eps l_j``."""
    _check_eps(t, c)
    k, e = sp.k, c.eps
    stiff1 = edge_cot_csc(k, e * c.l1, c.a1, "e1")
    soft = edge_cot_csc(k, e * c.l2, e * e, "e2")
    stiff3 = edge_cot_csc(k, e * c.l3, c.a3, "e3")
    return MMatrix3(_cycle_matrix(stiff1, soft, stiff3, t.tau, c))


def m2(sp: SpectralPoint, t: Quasimomentum, c: CellParams) -> MMatrix3:
    """M-matrix after dilating the soft edge to length ``l2``.

    The soft edge now carries ``(1/i d/dx + tau)^2`` with unit coefficient;
    its endpoint values enter the trace with weight ``eps**-1/2`` and its
    co-normal derivatives with weight ``eps**1/2``, so each soft term is
    ``eps`` times the unit-coefficient Dirichlet-to-Neumann entry.
    """
    _check_eps(t, c)
    k, e = sp.k, c.eps
    stiff1 = edge_cot_csc(k, e * c.l1, c.a1, "e1")
    cot2, csc2 = edge_cot_csc(k, c.l2, 1.0, "e2")
    stiff3 = edge_cot_csc(k, e * c.l3, c.a3, "e3")
    return MMatrix3(_cycle_matrix(stiff1, (e * cot2, e * csc2), stiff3, t.tau, c))


# --------------------------------------------------------------------------
# modified graph


def modified_weights(tau: float, c: CellParams) -> tuple[complex, complex]:
    """``(w_soft, w_stiff)`` with ``w_soft = exp(-i (l1 + l3) tau)``."""
    w_soft = cmath.exp(-1j * math.fmod(c.stiff_length * tau, 2 * math.pi))
    return w_soft, w_soft.conjugate()


def mtilde(sp: SpectralPoint, t: Quasimomentum, c: CellParams) -> MMatrix3:
    """M-matrix of the modified graph (stiff two-vertex cycle plus soft loop)."""
    require_equal_stiffness(c)
    _check_eps(t, c)
    k, e, a = sp.k, c.eps, c.a1
    c1, s1 = edge_cot_csc(k, e * c.l1, a, "e1")
    c3, s3 = edge_cot_csc(k, e * c.l3, a, "e3")
    theta = k * c.l2
    if at_pole(theta):
        raise PoleError("e2", f"sin(k l2) vanishes at k={k}")
    p3 = phase(t.tau, c.l3)
    m = np.zeros((3, 3), dtype=complex)
    m[0, 0] = m[2, 2] = -(c1 + c3)
    m[0, 2] = (s1 + s3) / p3
    m[2, 0] = (s1 + s3) * p3
    m[1, 1] = 2 * k * (math.cos(t.tau) - cmath.cos(theta)) / cmath.sin(theta)
    return MMatrix3(m)


def btilde(sp: SpectralPoint, t: Quasimomentum, c: CellParams) -> MMatrix3:
    """z-dependent boundary matrix coupling the soft loop to the stiff cycle."""
    _check_eps(t, c)
    z, e = sp.z, c.eps
    w_soft, w_stiff = modified_weights(t.tau, c)
    kk = z * c.stiff_length
    b = np.zeros((3, 3), dtype=complex)
    b[1, 1] = -2 * kk
    b[1, 2] = math.sqrt(e) * kk * w_soft
    b[2, 1] = math.sqrt(e) * kk * w_stiff
    return MMatrix3(b)


def mtilde_minus_b(sp: SpectralPoint, t: Quasimomentum, c: CellParams) -> MMatrix3:
    return mtilde(sp, t, c) - btilde(sp, t, c)


# --------------------------------------------------------------------------
# asymptotics


def det_m1_asymptotic(sp: SpectralPoint, tau: float, c: CellParams) -> complex:
    """Leading ``eps**-1`` term of ``det m1``."""
    k = sp.k
    if k == 0:
        raise DomainError("k", "the leading determinant term needs k != 0")
    theta = k * c.l2
    if at_pole(theta):
        raise PoleError("e2", f"sin(k l2) vanishes at k={k}")
    s = cmath.sin(theta)
    bracket = 2 * math.cos(tau) / s + k * c.stiff_length - 2 * cmath.cos(theta) / s
    return c.a1 * c.a3 * k * bracket / (c.l1 * c.l3 * c.eps)


def quasi_constant_vector(tau: float, c: CellParams) -> np.ndarray:
    """Vertex values ``(e^{-i eps l3 t}, e^{-i eps (l1+l3) t}, 1)`` of the phase-aligned constant."""
    return np.array([1 / phase(tau, c.l3), 1 / phase(tau, c.stiff_length), 1.0], dtype=complex)


def _denominator_checked(sp, tau, c):
    d = dispersion_denominator(sp.k, tau, c)
    if abs(d) < 1e-8:
        raise NearSingularDispersion(f"|D(k)| = {abs(d):.3e} at k={sp.k}, tau={tau}")
    return d


def m2_inverse_asymptotics(sp: SpectralPoint, t: Quasimomentum, c: CellParams) -> MAsymptotics:
    """Leading behaviour of ``m2^{-1}``: a rank-one ``eps**-1`` term and no ``O(1)`` term."""
    _check_eps(t, c)
    d = _denominator_checked(sp, t.tau, c)
    v = quasi_constant_vector(t.tau, c)
    lead = np.outer(v, v.conj()) / d
    zero = MMatrix3(np.zeros((3, 3)))
    return MAsymptotics(MMatrix3(lead), zero, zero, c.eps, "z away from D(k) = 0 and sin(k l2) = 0")


def mtb_inverse_asymptotics(sp: SpectralPoint, t: Quasimomentum, c: CellParams) -> MAsymptotics:
    """Expansion of ``(mtilde - btilde)^{-1}`` through the ``eps`` term.

    The ``eps`` coefficient lives on the four stiff corners.  It follows from
    diagonalising the stiff block on ``u± = (p, ±1)/sqrt(2)`` with
    ``p = e^{-i eps l3 t}``:

    * ``u+`` eigenvalue ``lam+ = sqrt(a) k sum tan(theta_j/2)
      = (eps K/2)(1 + eps^2 k^2 mu3 / (12 a L))``,
    * ``u-`` eigenvalue ``lam- = -2 a alpha / eps + O(eps)``,

    where ``L = l1 + l3``, ``K = k^2 L``, ``mu3 = l1^3 + l3^3`` and
    ``alpha = 1/l1 + 1/l3``.  The Schur complement on the soft index is
    ``S = D + eps^2 E`` with ``E = K k^2 mu3 / (12 a L) + K^2 / (4 a alpha)``.
    Collecting the ``eps`` terms of ``(u+,u+)``, ``(u-,u-)`` and the mixed
    entry ``q = eps K / (2 a alpha D)`` gives the corners below.
    """
    require_equal_stiffness(c)
    _check_eps(t, c)
    d = _denominator_checked(sp, t.tau, c)
    k, e, a = sp.k, c.eps, c.a1
    if k == 0:
        raise DomainError("k", "expansion needs k != 0")
    L = c.stiff_length
    K = k * k * L
    mu3 = c.l1 ** 3 + c.l3 ** 3
    alpha = 1 / c.l1 + 1 / c.l3
    p = 1 / phase(t.tau, c.l3)
    p1 = phase(t.tau, c.l1)
    w_soft, w_stiff = modified_weights(t.tau, c)

    corner = np.array([[1, 0, p], [0, 0, 0], [p.conjugate(), 0, 1]], dtype=complex)
    m_minus1 = (1 / K + 1 / d) * corner

    re = 1 / math.sqrt(e)
    m_0 = np.array(
        [[0, re * p1, 0], [re / p1, 1, re * w_soft], [0, re * w_stiff, 0]], dtype=complex
    ) / d

    E = K * k * k * mu3 / (12 * a * L) + K * K / (4 * a * alpha)
    plus = -k * k * mu3 / (6 * a * L * K) - k * k * mu3 / (3 * a * L * d) - 2 * E / (d * d)
    minus = -1 / (2 * a * alpha)
    q = K / (2 * a * alpha * d)
    m_1 = np.zeros((3, 3), dtype=complex)
    m_1[0, 0] = (plus + minus) / 2 + q
    m_1[2, 2] = (plus + minus) / 2 - q
    m_1[0, 2] = p * (plus - minus) / 2
    m_1[2, 0] = p.conjugate() * (plus - minus) / 2
    return MAsymptotics(
        MMatrix3(m_minus1), MMatrix3(m_0), MMatrix3(m_1), e,
        "a1 == a3, real tau, z away from D(k) = 0 and sin(k l2) = 0",
    )


def numerical_rank(m: np.ndarray, tol: float = RANK_TOL) -> int:
    s = np.linalg.svd(np.asarray(m), compute_uv=False)
    return int(np.sum(s > tol * max(s[0], 1e-300)))
