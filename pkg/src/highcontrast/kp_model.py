"""The delta-prime effective model and its whole-line Kronig-Penney form.

The soft-edge model at ``tau`` and the delta-prime model at ``tau + pi`` share
their spectra and eigenfunction norms; the delta-prime fibres glue into a
periodic operator on the line with a jump ``U(n+0) - U(n-0) = c U'(n)``.
"""

from __future__ import annotations

import cmath
import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import CellParams, EdgeFunction, quadrature
from .errors import DomainError, GridMismatch, NotARoot
from .spectra import (
    DispersionRelation,
    eval_relation,
    find_roots,
    hausdorff,
    interval_hausdorff,
    merge_intervals,
    non_bloch_eigenvalues,
)

NORM_GRID = 4096
ROOT_CHECK = 1e-8


def _wrap(angle: float) -> float:
    a = math.fmod(angle, 2 * math.pi)
    return a + 2 * math.pi if a < 0 else a


@dataclass(frozen=True)
class DeltaPrimeCell:
    """Soft edge ``[0, l2]`` with the delta-prime coupling of strength ``l1 + l3``."""

    coupling: float
    l2: float
    tau_prime: float

    def __post_init__(self):
        if not 0 < self.coupling < 1:
            raise DomainError("coupling", f"must lie in (0, 1), got {self.coupling}")
        if not self.l2 > 0:
            raise DomainError("l2", f"must be positive, got {self.l2}")
        object.__setattr__(self, "tau_prime", _wrap(self.tau_prime))

    @classmethod
    def from_cell(cls, c: CellParams, tau_prime: float) -> "DeltaPrimeCell":
        return cls(c.stiff_length, c.l2, tau_prime)

    @property
    def weight(self) -> complex:
        return cmath.exp(-1j * self.coupling * self.tau_prime)

    @property
    def boundary_coefficient(self) -> float:
        return -self.coupling

    def matching_residuals(self, u0: complex, ul: complex, du0: complex, dul: complex) -> tuple[float, float]:
        """Residuals of the two matching conditions for traces ``u``, ``(d/dx + i tau') u``."""
        r1 = abs(u0 + self.weight * ul - self.coupling * du0)
        r2 = abs(du0 + self.weight * dul)
        return r1, r2


@dataclass(frozen=True)
class WholeLineKP:
    """``-stiffness U'' = z U`` on the line with a jump at every integer."""

    stiffness: float
    jump_coupling: float

    @classmethod
    def from_cell(cls, c: CellParams) -> "WholeLineKP":
        return cls(c.l2 ** -2, c.stiff_length / c.l2)

    @classmethod
    def from_lengths(cls, coupling: float, l2: float) -> "WholeLineKP":
        if coupling < 0 or not l2 > 0:
            raise DomainError("coupling", f"need coupling >= 0 and l2 > 0, got {coupling}, {l2}")
        return cls(l2 ** -2, coupling / l2)

    def kappa(self, z: complex) -> complex:
        return cmath.sqrt(complex(z) / self.stiffness)

    def transfer_matrix(self, z: complex) -> np.ndarray:
        """Monodromy of ``(U, U')`` over one period, free flight then the jump."""
        kap = self.kappa(z)
        if abs(kap) < 1e-8:
            sinc = 1 - kap * kap / 6
        else:
            sinc = cmath.sin(kap) / kap
        free = np.array([[cmath.cos(kap), sinc], [-kap * kap * sinc, cmath.cos(kap)]], dtype=complex)
        jump = np.array([[1.0, self.jump_coupling], [0.0, 1.0]], dtype=complex)
        return jump @ free

    def trace(self, z: float) -> float:
        kap = self.kappa(z)
        sinc = 1 - kap * kap / 6 if abs(kap) < 1e-8 else cmath.sin(kap) / kap
        return (2 * cmath.cos(kap) - self.jump_coupling * kap * kap * sinc).real

    def bloch_phase(self, z: float) -> float | None:
        """``arccos(tr T / 2)`` on a band, ``None`` in a gap."""
        tr = self.trace(z)
        if abs(tr) > 2 + 1e-12:
            return None
        return math.acos(max(-1.0, min(1.0, tr / 2)))

    def eigenfunction_jumps(self, z: float, theta: float, n_cells: int = 3) -> float:
        """Worst violation of the jump and derivative continuity along a Bloch solution."""
        T = self.transfer_matrix(z)
        w, V = np.linalg.eig(T)
        j = int(np.argmin(np.abs(w - cmath.exp(1j * theta))))
        state = V[:, j]
        kap = self.kappa(z)
        worst = 0.0
        for _ in range(n_cells):
            left = state
            u_minus = cmath.cos(kap) * left[0] + (cmath.sin(kap) / kap if abs(kap) > 1e-8 else 1.0) * left[1]
            du = -kap * cmath.sin(kap) * left[0] + cmath.cos(kap) * left[1]
            state = T @ left
            worst = max(worst, abs(state[0] - u_minus - self.jump_coupling * du), abs(state[1] - du))
        return worst


# --------------------------------------------------------------------------
# eigenfunctions and norms


def _sin_l2(k: float, l2: float) -> float:
    s = math.sin(k * l2)
    if abs(s) < 1e-12:
        raise NotARoot(f"sin(k l2) vanishes at k={k}; the point belongs to the non-Bloch spectrum")
    return s


def dp_bloch_traces(k: float, tau_prime: float, c: CellParams) -> tuple[complex, complex, complex, complex]:
    """End values and co-derivatives ``(d/dx + i tau') v`` of the delta-prime eigenfunction."""
    s = _sin_l2(k, c.l2)
    ph = cmath.exp(1j * tau_prime)
    big = lambda x: (math.cos(k * (c.l2 - x)) + ph * math.cos(k * x)) / s
    dbig = lambda x: k * (math.sin(k * (c.l2 - x)) - ph * math.sin(k * x)) / s
    gauge = lambda x: cmath.exp(-1j * tau_prime * x)
    return (big(0.0), gauge(c.l2) * big(c.l2), dbig(0.0), gauge(c.l2) * dbig(c.l2))


def dp_bloch_eigenfunction(k: float, tau_prime: float, c: CellParams, n: int = NORM_GRID) -> EdgeFunction:
    """``v(x; k) = e^{-i tau' x} [cos k(l2 - x) + e^{i tau'} cos kx] / sin kl2`` on the soft edge.

    Raises
    ------
    NotARoot
        If ``k`` fails the delta-prime dispersion relation by more than ``1e-8``
        or sits on ``sin(k l2) = 0``.
    """
    _sin_l2(k, c.l2)
    rel = DispersionRelation("deltaprime_bloch", c, tau_prime)
    res = abs(eval_relation(rel, k))
    if res > ROOT_CHECK:
        raise NotARoot(f"|relation({k})| = {res:.3e} exceeds {ROOT_CHECK:g}")
    cell = DeltaPrimeCell.from_cell(c, tau_prime)
    r1, r2 = cell.matching_residuals(*dp_bloch_traces(k, tau_prime, c))
    if max(r1, r2) > 1e-9 * max(1.0, k * k):
        raise NotARoot(f"matching residuals {r1:.3e}, {r2:.3e} at k={k}")
    x, w = quadrature(c.l2, n)
    s = math.sin(k * c.l2)
    v = np.exp(-1j * tau_prime * x) * (np.cos(k * (c.l2 - x)) + cmath.exp(1j * tau_prime) * np.cos(k * x)) / s
    return EdgeFunction("e2", c.l2, v, w, "simpson", x)


def hom_bloch_eigenfunction(k: float, tau: float, c: CellParams, n: int = NORM_GRID) -> tuple[EdgeFunction, float]:
    """Soft component and scalar part ``sqrt(l1 + l3)`` of the soft-edge eigenvector."""
    s = _sin_l2(k, c.l2)
    x, w = quadrature(c.l2, n)
    u = np.exp(-1j * tau * x) * (np.sin(k * (c.l2 - x)) + cmath.exp(1j * tau) * np.sin(k * x)) / s
    return EdgeFunction("e2", c.l2, u, w, "simpson", x), math.sqrt(c.stiff_length)


def hom_norm_sq(k: float, tau: float, c: CellParams) -> float:
    s = math.sin(k * c.l2)
    return c.stiff_length / 2 + c.l2 * (1 - math.cos(tau) * math.cos(k * c.l2)) / s ** 2


def dp_norm_sq(k: float, tau_prime: float, c: CellParams) -> float:
    s = math.sin(k * c.l2)
    return c.stiff_length / 2 + c.l2 * (1 + math.cos(tau_prime) * math.cos(k * c.l2)) / s ** 2


# --------------------------------------------------------------------------
# spectral equivalence


@dataclass(frozen=True)
class EquivalenceReport:
    tau: float
    tau_prime: float
    hom_roots: list[float]
    dp_roots: list[float]
    bloch_distance: float
    hom_non_bloch: list[float]
    dp_non_bloch: list[float]
    non_bloch_distance: float
    norm_residual: float
    passed: bool

    def summary(self) -> str:
        state = "PASS" if self.passed else "FAIL"
        return (
            f"{state} tau={self.tau:.6f} bloch_roots={len(self.hom_roots)}/{len(self.dp_roots)} "
            f"bloch_dist={self.bloch_distance:.3e} non_bloch={len(self.hom_non_bloch)}/{len(self.dp_non_bloch)} "
            f"non_bloch_dist={self.non_bloch_distance:.3e} norm_res={self.norm_residual:.3e}"
        )


def _list_distance(a: list[float], b: list[float]) -> float:
    if len(a) != len(b):
        return math.inf
    return hausdorff(a, b) if a else 0.0


def unitary_equivalence_check(
    tau: float, c: CellParams, k_window: tuple[float, float], perturb: float = 1.0, tol: float = 1e-8
) -> EquivalenceReport:
    """Compare the soft-edge model at ``tau`` with the delta-prime model at ``tau + pi``.

    ``perturb`` rescales the delta-prime coupling only, as a sensitivity probe.
    Norms are compared three ways per shared root: closed form against closed
    form, and each closed form against quadrature of the eigenfunction.
    """
    tau = _wrap(tau)
    tau_p = _wrap(tau + math.pi)
    c_dp = c if perturb == 1.0 else dataclasses.replace(c, l1=c.l1 * perturb, l3=c.l3 * perturb)
    hom = find_roots(DispersionRelation("hom_bloch", c, tau), k_window)
    dp = find_roots(DispersionRelation("deltaprime_bloch", c_dp, tau_p), k_window)
    bloch = _list_distance(hom, dp)
    nb_h = non_bloch_eigenvalues("hom", tau, c, k_window)
    nb_d = non_bloch_eigenvalues("deltaprime", tau_p, c_dp, k_window)
    nb = _list_distance(nb_h, nb_d)
    norm_res = 0.0
    if math.isfinite(bloch):
        for kh, kd in zip(hom, dp):
            a = hom_norm_sq(kh, tau, c)
            b = dp_norm_sq(kd, tau_p, c_dp)
            u, beta = hom_bloch_eigenfunction(kh, tau, c)
            v = dp_bloch_eigenfunction(kd, tau_p, c_dp) if perturb == 1.0 else None
            num_u = u.norm() ** 2 + beta ** 2
            res = [abs(a - b) / a, abs(num_u - a) / a]
            if v is not None:
                res.append(abs(v.norm() ** 2 - b) / b)
            norm_res = max(norm_res, *res)
    else:
        norm_res = math.inf
    passed = bloch < tol and nb < tol and norm_res < 1e-10
    return EquivalenceReport(tau, tau_p, hom, dp, bloch, nb_h, nb_d, nb, norm_res, passed)


# --------------------------------------------------------------------------
# whole-line bands


@dataclass(frozen=True)
class WholeLineBands:
    bands: list[tuple[float, float]]
    gaps: list[tuple[float, float]]
    window: tuple[float, float]


def wholeline_band_function(E_window: tuple[float, float], model: WholeLineKP, n_scan: int = 20000) -> WholeLineBands:
    """Bands ``{z : |tr T(z)| <= 2}`` inside the window; edges refined by Brent on ``|tr T| = 2``.

    The scan is uniform in ``kappa`` so that the sampling follows the oscillation.
    """
    lo, hi = E_window
    if not hi > lo:
        raise DomainError("E_window", f"need lo < hi, got {E_window}")
    s = model.stiffness
    if lo >= 0:
        kap = np.linspace(math.sqrt(lo / s), math.sqrt(hi / s), n_scan + 1)
        zs = s * kap ** 2
    else:
        zs = np.concatenate([np.linspace(lo, 0, 200, endpoint=False), s * np.linspace(0, math.sqrt(hi / s), n_scan + 1) ** 2])
    g = lambda z: abs(model.trace(z)) - 2.0
    vals = np.array([g(z) for z in zs])
    inside = vals <= 1e-12
    bands: list[tuple[float, float]] = []
    start = zs[0] if inside[0] else None
    for i in range(1, len(zs)):
        if inside[i] and not inside[i - 1]:
            start = brentq(g, zs[i - 1], zs[i], xtol=1e-15)
        elif inside[i - 1] and not inside[i]:
            end = brentq(g, zs[i - 1], zs[i], xtol=1e-15)
            bands.append((start, end))
            start = None
    if start is not None:
        bands.append((start, zs[-1]))
    bands = merge_intervals(bands)
    gaps = [(bands[i][1], bands[i + 1][0]) for i in range(len(bands) - 1)]
    return WholeLineBands(bands, gaps, (lo, hi))


def clip_intervals(iv, lo: float, hi: float) -> list[tuple[float, float]]:
    return [(max(a, lo), min(b, hi)) for a, b in iv if b >= lo and a <= hi]


def fibre_sweep_bands(c: CellParams, z_max: float, n_tau: int = 512, margin: float = 3.0) -> list[tuple[float, float]]:
    """Union over ``n_tau`` fibre parameters of the soft-edge fibre spectra, as z-bands.

    Band ``j`` is the range of the ``j``-th eigenvalue over the sweep; bands that
    leave the computed ``k`` window at some fibre are dropped.
    """
    k_max = math.sqrt(z_max) + margin
    taus = 2 * math.pi * np.arange(n_tau) / n_tau
    lists = []
    for tau in taus:
        roots = find_roots(DispersionRelation("hom_bloch", c, float(tau)), (0.0, k_max))
        extra = non_bloch_eigenvalues("hom", float(tau), c, (0.0, k_max), include_zero=True)
        lists.append(sorted(k * k for k in roots + extra))
    depth = min(len(r) for r in lists)
    bands = [(min(r[j] for r in lists), max(r[j] for r in lists)) for j in range(depth)]
    top = k_max ** 2
    return [b for b in bands if b[1] < top]


def wholeline_consistency(c: CellParams, z_max: float = 100.0, n_tau: int = 512) -> tuple[float, WholeLineBands, list]:
    """Hausdorff distance on ``[0, z_max]`` between transfer-matrix and fibre-sweep bands."""
    tm = wholeline_band_function((0.0, z_max), WholeLineKP.from_cell(c))
    fib = clip_intervals(merge_intervals(fibre_sweep_bands(c, z_max, n_tau), tol=1e-12), 0.0, z_max)
    return interval_hausdorff(tm.bands, fib), tm, fib


# --------------------------------------------------------------------------
# substitutions


def _tilde(tau_prime: float) -> float:
    return _wrap(tau_prime + math.pi)


def to_unit_cell(u: EdgeFunction, tau_prime: float, c: CellParams) -> EdgeFunction:
    """``v(y) = e^{-i tau~ y} e^{i l2 y tau'} u(l2 y)`` on ``[0, 1]``."""
    if abs(u.length - c.l2) > 1e-12 * max(1.0, c.l2):
        raise GridMismatch(f"expected a function on [0, l2] with l2={c.l2}, got length {u.length}")
    y = np.asarray(u.nodes) / c.l2
    ph = np.exp(1j * (c.l2 * tau_prime - _tilde(tau_prime)) * y)
    return EdgeFunction(u.edge_id, 1.0, ph * u.samples, np.asarray(u.quad_weights) / c.l2, u.rule, y)


def from_unit_cell(v: EdgeFunction, tau_prime: float, c: CellParams) -> EdgeFunction:
    if abs(v.length - 1.0) > 1e-12:
        raise GridMismatch(f"expected a function on [0, 1], got length {v.length}")
    y = np.asarray(v.nodes)
    ph = np.exp(-1j * (c.l2 * tau_prime - _tilde(tau_prime)) * y)
    return EdgeFunction(v.edge_id, c.l2, ph * v.samples, np.asarray(v.quad_weights) * c.l2, v.rule, y * c.l2)


def substitution_roundtrip(u: EdgeFunction, tau_prime: float, c: CellParams) -> EdgeFunction:
    return from_unit_cell(to_unit_cell(u, tau_prime, c), tau_prime, c)


def transport_traces(traces: tuple[complex, complex, complex, complex], tau_prime: float, c: CellParams):
    """Map ``(u(0), u(l2), du(0), du(l2))`` (co-derivatives) to ``(v(0), v(1), Dv(0), Dv(1))``,
    with ``D = d/dy + i tau~``."""
    u0, ul, du0, dul = traces
    tt = _tilde(tau_prime)
    g1 = cmath.exp(1j * (c.l2 * tau_prime - tt))
    return u0, g1 * ul, c.l2 * du0, g1 * c.l2 * dul


def second_cond_residuals(vtraces, tau_prime: float, c: CellParams) -> tuple[float, float]:
    v0, v1, dv0, dv1 = vtraces
    r1 = abs(v1 - v0 + c.stiff_length / c.l2 * dv0)
    r2 = abs(dv1 - dv0)
    return r1, r2
