"""Dispersion relations, real root isolation and band assembly.

Relations with ``csc``/``cot`` poles are scanned through a *regular form*
(the relation multiplied by the vanishing sines) so that sign changes are
genuine; roots that fall on the cancelled sines are then filtered per kind.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .core import CellParams, SpectralPoint, from_k, quasimomentum, spectral_point
from .errors import DomainError, PoleError, WindowAtPole
from .mmatrix import at_pole, m1

KINDS = ("limit_CC", "fibre_detM1", "hom_bloch", "deltaprime_bloch", "zdep_check")
ROOT_TOL = 1e-10
BASE_SCAN = 4096


@dataclass(frozen=True)
class DispersionRelation:
    """A scalar relation in ``k`` at fixed fibre parameter.

    ``tau`` is the rescaled quasimomentum (``tau'`` for ``deltaprime_bloch``).
    ``split`` is the interior-vertex position used by ``zdep_check`` as a
    fraction of ``l2``.
    """

    kind: str
    params: CellParams
    tau: float
    split: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError("kind", f"unknown relation {self.kind!r}; expected one of {KINDS}")
        if not 0 < self.split < 1:
            raise DomainError("split", f"must lie in (0, 1), got {self.split}")


def _sin_l2(k, c):
    theta = k * c.l2
    if at_pole(theta):
        raise PoleError("e2", f"sin(k l2) vanishes at k={k}")
    return cmath.sin(theta)


def _cc(k, tau, c):
    return 2 * math.cos(tau) + k * c.stiff_length * cmath.sin(k * c.l2) - 2 * cmath.cos(k * c.l2)


def zdep_matrix(k: complex, tau: float, c: CellParams, split: float = 0.5) -> np.ndarray:
    """``M(z) - B(z)`` of the two-vertex cycle with the energy-dependent vertex."""
    l1c, l2c = split * c.l2, (1 - split) * c.l2
    tc = tau / c.l2
    t1, t2 = k * l1c, k * l2c
    for th in (t1, t2):
        if at_pole(th):
            raise PoleError("e2", f"sin vanishes on the split cycle at k={k}")
    s1, s2 = cmath.sin(t1), cmath.sin(t2)
    diag = -cmath.cos(t1) / s1 - cmath.cos(t2) / s2
    off12 = cmath.exp(1j * tc * l1c) / s1 + cmath.exp(-1j * tc * l2c) / s2
    off21 = cmath.exp(-1j * tc * l1c) / s1 + cmath.exp(1j * tc * l2c) / s2
    m = k * np.array([[diag, off12], [off21, diag]], dtype=complex)
    m[0, 0] += c.stiff_length * k * k
    return m


def eval_relation(rel: DispersionRelation, k: complex) -> complex:
    """Value of the relation as displayed (poles raise :class:`PoleError`)."""
    c, tau = rel.params, rel.tau
    if rel.kind == "limit_CC":
        return _cc(k, tau, c)
    if rel.kind == "hom_bloch":
        s = _sin_l2(k, c)
        return 2 * cmath.cos(k * c.l2) / s - 2 * math.cos(tau) / s - k * c.stiff_length
    if rel.kind == "deltaprime_bloch":
        s = _sin_l2(k, c)
        return 2 * cmath.cos(k * c.l2) / s + 2 * math.cos(tau) / s - k * c.stiff_length
    if rel.kind == "fibre_detM1":
        sp = spectral_point(complex(k) ** 2)
        return m1(sp, quasimomentum(tau, c.eps), c).det()
    return complex(np.linalg.det(zdep_matrix(k, tau, c, rel.split)))


def regular_form(rel: DispersionRelation, k: float) -> float:
    """Pole-free real function with the same real zeros away from the cancelled sines."""
    c, tau = rel.params, rel.tau
    if rel.kind in ("limit_CC", "hom_bloch"):
        return _cc(k, tau, c).real
    if rel.kind == "deltaprime_bloch":
        return (2 * math.cos(k * c.l2) + 2 * math.cos(tau) - k * c.stiff_length * math.sin(k * c.l2))
    if k == 0 and rel.kind in ("fibre_detM1", "zdep_check"):
        # both normalisations tend to the limit relation at k = 0
        return 2 * math.cos(tau) - 2
    if rel.kind == "fibre_detM1":
        e = c.eps
        scale = math.sqrt(c.a1 * c.a3) * k ** 3 * e
        sines = math.sin(k * c.l2) * math.sin(k * e * c.l1 / math.sqrt(c.a1)) * math.sin(k * e * c.l3 / math.sqrt(c.a3))
        return (eval_relation(rel, k) * sines / scale).real
    s1 = math.sin(k * rel.split * c.l2)
    s2 = math.sin(k * (1 - rel.split) * c.l2)
    return (-eval_relation(rel, k) * s1 * s2 / (k * k)).real


def _regular_vec(rel: DispersionRelation, ks: np.ndarray) -> np.ndarray | None:
    """Vectorised regular form for the closed-form kinds (``None`` otherwise)."""
    c, tau = rel.params, rel.tau
    if rel.kind in ("limit_CC", "hom_bloch"):
        return 2 * math.cos(tau) + ks * c.stiff_length * np.sin(ks * c.l2) - 2 * np.cos(ks * c.l2)
    if rel.kind == "deltaprime_bloch":
        return 2 * np.cos(ks * c.l2) + 2 * math.cos(tau) - ks * c.stiff_length * np.sin(ks * c.l2)
    return None


def _safe_regular(rel: DispersionRelation, k: float, h: float) -> float:
    try:
        return regular_form(rel, k)
    except PoleError:
        # removable singularity of the regular form: average the neighbours
        return 0.5 * (regular_form(rel, k - h) + regular_form(rel, k + h))


def _excluded(rel: DispersionRelation, k: float) -> bool:
    """Roots of the regular form that are not roots of the relation itself."""
    if rel.kind in ("hom_bloch", "deltaprime_bloch"):
        return abs(math.sin(k * rel.params.l2)) < 1e-9
    return False


def _polish(fn: Callable[[float], float], k: float, lo: float, hi: float) -> float:
    h = 1e-7 * max(1.0, abs(k))
    for _ in range(8):
        f = fn(k)
        d = (fn(k + h) - fn(k - h)) / (2 * h)
        if d == 0 or not math.isfinite(d):
            break
        step = f / d
        k_new = k - step
        if not lo <= k_new <= hi:
            break
        k = k_new
        if abs(step) < 1e-15 * max(1.0, abs(k)):
            break
    return k


def scan_density(window: tuple[float, float], base: int = BASE_SCAN) -> int:
    lo, hi = window
    return int(base * max(1.0, (hi - lo) * max(1.0, abs(hi)) / 20.0))


def find_roots(rel: DispersionRelation, k_window: tuple[float, float], n_scan: int | None = None) -> list[float]:
    """All real roots in ``(lo, hi]``: scan, bracket with Brent, polish with Newton.

    Double roots (tangencies) are detected as sign changes of the sampled
    derivative at small amplitude and accepted when the refined value is
    below tolerance.
    """
    lo, hi = float(k_window[0]), float(k_window[1])
    if not hi > lo >= 0:
        raise DomainError("k_window", f"need 0 <= lo < hi, got {k_window}")
    for end in (lo, hi):
        if rel.kind != "limit_CC" and end > 0 and at_pole(end * rel.params.l2) and rel.kind != "fibre_detM1":
            raise WindowAtPole(f"window endpoint {end} sits on a pole of {rel.kind}")
    n = n_scan or scan_density((lo, hi))
    ks = np.linspace(lo, hi, n + 1)
    h = (hi - lo) / n * 1e-3
    fn = lambda k: _safe_regular(rel, k, h)
    vals = _regular_vec(rel, ks)
    if vals is None:
        vals = np.array([fn(k) for k in ks])
    roots: list[float] = []
    for i in np.nonzero((vals[:-1] == 0) | (vals[:-1] * vals[1:] < 0))[0]:
        a, b, fa = ks[i], ks[i + 1], vals[i]
        if fa == 0:
            roots.append(a)
        else:
            r = brentq(fn, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            roots.append(_polish(fn, r, a, b))
    if vals[-1] == 0:
        roots.append(hi)
    # tangential roots
    scale = max(1.0, float(np.abs(vals).max()))
    d = np.diff(vals)
    cand = np.nonzero((d[:-1] * d[1:] < 0) & (vals[:-2] * vals[2:] > 0) & (np.abs(vals[1:-1]) < 1e-3 * scale))[0] + 1
    for i in cand:
            dfn = lambda k: (fn(k + h) - fn(k - h)) / (2 * h)
            try:
                r = brentq(dfn, ks[i - 1], ks[i + 1], xtol=1e-14)
            except ValueError:
                continue
            if abs(fn(r)) < ROOT_TOL * scale:
                roots.append(r)
    out = sorted(r for r in roots if lo < r <= hi and not _excluded(rel, r))
    dedup: list[float] = []
    for r in out:
        if not dedup or r - dedup[-1] > 1e-9:
            dedup.append(r)
    return dedup


def root_residual(rel: DispersionRelation, k: float) -> float:
    """``|relation(k)|`` measured on the regular form (finite at removable poles)."""
    return abs(_safe_regular(rel, k, 1e-9))


# --------------------------------------------------------------------------
# non-Bloch spectra


def _at(tau: float, target: float) -> bool:
    d = math.remainder(tau - target, 2 * math.pi)
    return abs(d) < 1e-12


def non_bloch_eigenvalues(
    model: str, tau: float, c: CellParams, k_window: tuple[float, float], include_zero: bool = False
) -> list[float]:
    """Eigenvalues invisible to the boundary matrix, as ``k`` values in ``(lo, hi]``.

    ``hom``: ``tau = 0`` gives ``k = pi m / l2`` for even ``m``, ``tau = pi``
    gives odd ``m``.  ``deltaprime``: ``tau' = 0`` odd ``m`` and ``tau' = pi``
    even ``m`` with cosine eigenvectors.  The ``m = 0`` point (a constant
    eigenvector up to the phase) is reported only with ``include_zero`` and
    ``lo == 0``.
    """
    if model not in ("hom", "deltaprime"):
        raise DomainError("model", f"expected 'hom' or 'deltaprime', got {model!r}")
    lo, hi = k_window
    if _at(tau, 0.0):
        parity = 0 if model == "hom" else 1
    elif _at(tau, math.pi):
        parity = 1 if model == "hom" else 0
    else:
        return []
    m_max = int(math.floor(hi * c.l2 / math.pi)) + 1
    out = []
    for m in range(0, m_max + 1):
        if m % 2 != parity:
            continue
        k = math.pi * m / c.l2
        if lo < k <= hi or (m == 0 and include_zero and lo == 0):
            out.append(k)
    return out


def non_bloch_eigenvector(model: str, tau: float, k: float, x: np.ndarray) -> np.ndarray:
    if model == "hom":
        return np.exp(-1j * tau * x) * (np.sin(k * x) if k != 0 else np.ones_like(x))
    return np.exp(-1j * tau * x) * np.cos(k * x)


# --------------------------------------------------------------------------
# band structure


@dataclass(frozen=True, eq=False)
class BandStructure:
    """Per-tau root lists in a ``k`` window, with non-Bloch points and ``z``-gaps."""

    tau_grid: np.ndarray
    roots_per_tau: list[list[float]]
    non_bloch: list[tuple[float, float]]
    gaps: list[tuple[float, float]]
    kind: str
    k_window: tuple[float, float]
    bands: list[tuple[float, float]] = field(default_factory=list)


def _model_for(kind: str) -> str | None:
    return {"hom_bloch": "hom", "limit_CC": "hom", "deltaprime_bloch": "deltaprime"}.get(kind)


def band_intervals(per_tau: Sequence[Sequence[float]]) -> list[tuple[float, float]]:
    """Band ``j`` spans the min/max of the ``j``-th eigenvalue over the tau grid."""
    depth = min(len(r) for r in per_tau) if per_tau else 0
    return [(min(r[j] for r in per_tau), max(r[j] for r in per_tau)) for j in range(depth)]


def merge_intervals(iv: Sequence[tuple[float, float]], tol: float = 0.0) -> list[tuple[float, float]]:
    out: list[list[float]] = []
    for a, b in sorted(iv):
        if out and a <= out[-1][1] + tol:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def band_structure(
    kind: str,
    c: CellParams,
    tau_grid: Sequence[float],
    k_window: tuple[float, float],
    eps_fibre: float | None = None,
) -> BandStructure:
    """Roots per tau, non-Bloch points and the resulting spectral bands in ``z``.

    For ``fibre_detM1`` the cell's ``eps`` is replaced by ``eps_fibre`` when given.
    """
    if kind == "fibre_detM1" and eps_fibre is not None:
        c = c.with_eps(eps_fibre)
    taus = np.asarray(tau_grid, dtype=float)
    roots, nb, z_lists = [], [], []
    model = _model_for(kind)
    for tau in taus:
        r = find_roots(DispersionRelation(kind, c, float(tau)), k_window)
        extra = non_bloch_eigenvalues(model, float(tau), c, (0.0, k_window[1]), include_zero=True) if model else []
        nb.extend((float(tau), k) for k in extra)
        roots.append(r)
        z_lists.append(sorted([k * k for k in r] + [k * k for k in extra]))
    bands = band_intervals(z_lists)
    merged = merge_intervals(bands, tol=1e-12)
    gaps = [(merged[i][1], merged[i + 1][0]) for i in range(len(merged) - 1)]
    return BandStructure(taus, roots, nb, gaps, kind, tuple(k_window), bands)


# --------------------------------------------------------------------------
# exclusion set and distances


@dataclass(frozen=True)
class ExclusionSet:
    """Points of ``S`` (as ``z`` values) inside a compact window, with radius ``rho``."""

    points: tuple[float, ...]
    rho: float
    tau: float

    def distance(self, z: complex) -> float:
        return min(abs(complex(z) - p) for p in self.points)

    def admissible(self, z: complex) -> bool:
        return self.distance(z) >= self.rho


def exclusion_set(c: CellParams, tau: float, K_window: tuple[float, float], rho: float) -> ExclusionSet:
    """Limit spectrum, soft Dirichlet spectrum and ``0`` with ``|z| <= K_window[1]``."""
    if not rho > 0:
        raise DomainError("rho", f"must be positive, got {rho}")
    zmax = float(K_window[1]) + rho
    kmax = math.sqrt(max(zmax, 0.0)) + 1.0
    pts = {0.0}
    for k in find_roots(DispersionRelation("limit_CC", c, tau), (0.0, kmax)):
        pts.add(k * k)
    m = 1
    while (math.pi * m / c.l2) ** 2 <= zmax + 1:
        pts.add((math.pi * m / c.l2) ** 2)
        m += 1
    return ExclusionSet(tuple(sorted(p for p in pts if p <= zmax + 1)), rho, tau)


def hausdorff(a: Sequence[float], b: Sequence[float]) -> float:
    """Hausdorff distance of two finite point sets (``inf`` if exactly one is empty)."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.size == 0 and b.size == 0:
        return 0.0
    if a.size == 0 or b.size == 0:
        return math.inf
    d = np.abs(a[:, None] - b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def interval_hausdorff(a: Sequence[tuple[float, float]], b: Sequence[tuple[float, float]]) -> float:
    """Hausdorff distance between two finite unions of closed intervals."""
    a, b = merge_intervals(a), merge_intervals(b)
    if not a and not b:
        return 0.0
    if not a or not b:
        return math.inf

    def dist(x, iv):
        return min(0.0 if lo <= x <= hi else min(abs(x - lo), abs(x - hi)) for lo, hi in iv)

    def one_sided(p, q):
        best = 0.0
        gaps_mid = [(q[i][1] + q[i + 1][0]) / 2 for i in range(len(q) - 1)]
        for lo, hi in p:
            cands = [lo, hi] + [m for m in gaps_mid if lo <= m <= hi]
            best = max(best, max(dist(x, q) for x in cands))
        return best

    return max(one_sided(a, b), one_sided(b, a))


def zdep_spectrum_check(tau: float, c: CellParams, k_window: tuple[float, float], split: float = 0.5) -> tuple[bool, dict]:
    """Compare zeros of the z-dependent cycle determinant with the limit relation."""
    ref = find_roots(DispersionRelation("limit_CC", c, tau), k_window)
    got = find_roots(DispersionRelation("zdep_check", c, tau, split), k_window)
    dist = hausdorff(ref, got) if (ref or got) else 0.0
    ok = len(ref) == len(got) and dist < 1e-8
    return ok, {"limit_roots": ref, "zdep_roots": got, "distance": dist, "split": split}
