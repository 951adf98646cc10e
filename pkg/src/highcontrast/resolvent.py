"""Resolvents on the cycle: Dirichlet decoupling, solution operators, Krein formula.

Every edge carries the gauge ``u = exp(-i r x) v`` where ``r`` is the
quasimomentum seen by the edge (``t`` on stiff edges, ``tau`` on the
rescaled soft edge), so that ``(1/i d/dx + r) a (1/i d/dx + r) u - z u``
becomes ``-a v'' - z v`` and every closed form reduces to sines.

Two representations are provided.  The *applied* routines act on a
:class:`~highcontrast.core.StateVector` and integrate with cumulative
Simpson sums.  The *matrix* routines assemble Nystrom matrices ``A`` with
``samples(R f) = A @ samples(f)`` so that operator differences can be
measured by :func:`opnorm_diff`.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson as _cumulative_simpson

from .core import (
    DEFAULT_N,
    EDGE_IDS,
    CellParams,
    EdgeFunction,
    Quasimomentum,
    SpectralPoint,
    StateVector,
    quadrature,
    require_equal_stiffness,
    spectral_point,
)
from .errors import DomainError, GridMismatch, NonConvergence, PoleError, SingularDenominator
from .mmatrix import (
    MMatrix3,
    at_pole,
    btilde,
    dispersion_denominator,
    m1,
    m2,
    modified_weights,
    mtilde,
)

GRAPHS = ("original", "modified", "unscaled")
SINGULAR_TOL = 1e-10


def cumulative_simpson(y: np.ndarray, x: np.ndarray, initial: float = 0) -> np.ndarray:
    """Complex-safe wrapper; scipy's routine casts its work arrays to real."""
    y = np.asarray(y)
    re = _cumulative_simpson(y.real, x=x, initial=initial)
    if not np.iscomplexobj(y):
        return re
    return re + 1j * _cumulative_simpson(y.imag, x=x, initial=initial)


@dataclass(frozen=True)
class BoundaryData:
    """Vertex values or traces ordered ``(V1, V2, V3)``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=complex).reshape(3)
        if not np.all(np.isfinite(v)):
            raise DomainError("values", "boundary data must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class EdgeSpec:
    edge_id: str
    length: float
    a: float
    rate: float


@dataclass(frozen=True)
class GraphLayout:
    """Edges of a cycle plus the weighted attachment of edge ends to vertices.

    ``attach[p]`` lists ``(edge index, end, c)``: the edge value at ``end``
    (0 = start, 1 = end) equals ``c`` times the ``p``-th boundary value, and
    the ``p``-th co-normal trace collects ``conj(c)`` times the inward
    co-normal derivative at that end.
    """

    edges: tuple[EdgeSpec, EdgeSpec, EdgeSpec]
    attach: tuple[tuple[tuple[int, int, complex], ...], ...]


def graph_layout(q: Quasimomentum, c: CellParams, graph: str = "original") -> GraphLayout:
    e, tau = c.eps, q.tau
    t = tau / e
    if graph not in GRAPHS:
        raise DomainError("graph", f"unknown graph {graph!r}; expected one of {GRAPHS}")
    e1 = EdgeSpec("e1", e * c.l1, c.a1, t)
    e3 = EdgeSpec("e3", e * c.l3, c.a3, t)
    if graph == "unscaled":
        e2 = EdgeSpec("e2", e * c.l2, e * e, t)
        return GraphLayout((e1, e2, e3), (
            ((0, 0, 1), (2, 1, 1)), ((1, 0, 1), (0, 1, 1)), ((2, 0, 1), (1, 1, 1)),
        ))
    e2 = EdgeSpec("e2", c.l2, 1.0, tau)
    if graph == "original":
        s = math.sqrt(e)
        return GraphLayout((e1, e2, e3), (
            ((0, 0, 1), (2, 1, 1)), ((1, 0, s), (0, 1, 1)), ((2, 0, 1), (1, 1, s)),
        ))
    require_equal_stiffness(c)
    w_soft, w_stiff = modified_weights(tau, c)
    return GraphLayout((e1, e2, e3), (
        ((0, 0, 1), (2, 1, 1)), ((1, 0, 1), (1, 1, w_stiff)), ((2, 0, 1), (0, 1, w_soft)),
    ))


def boundary_matrices(sp: SpectralPoint, q: Quasimomentum, c: CellParams, graph: str):
    """Closed-form ``(M, B)`` of the selected triple (``B = 0`` unless modified)."""
    if graph == "original":
        return m2(sp, q, c), MMatrix3(np.zeros((3, 3)))
    if graph == "unscaled":
        return m1(sp, q, c), MMatrix3(np.zeros((3, 3)))
    if graph == "modified":
        return mtilde(sp, q, c), btilde(sp, q, c)
    raise DomainError("graph", f"unknown graph {graph!r}")


# --------------------------------------------------------------------------
# single-edge closed forms


def _kappa(k: complex, edge: EdgeSpec) -> tuple[complex, complex]:
    kappa = k / math.sqrt(edge.a)
    theta = kappa * edge.length
    if k == 0 or at_pole(theta):
        raise PoleError(edge.edge_id, f"z = {k * k} is a Dirichlet eigenvalue of the edge")
    return kappa, cmath.sin(theta)


def edge_solution(x: np.ndarray, alpha: complex, beta: complex, k: complex, edge: EdgeSpec) -> np.ndarray:
    """Solution of the edge equation with values ``alpha`` at 0 and ``beta`` at the end."""
    kappa, s = _kappa(k, edge)
    L, r = edge.length, edge.rate
    v = alpha * np.sin(kappa * (L - x)) + beta * cmath.exp(1j * r * L) * np.sin(kappa * x)
    return np.exp(-1j * r * x) * v / s


def edge_solution_normals(alpha: complex, beta: complex, k: complex, edge: EdgeSpec) -> tuple[complex, complex]:
    """Inward co-normal derivatives of :func:`edge_solution` at the start and the end."""
    kappa, s = _kappa(k, edge)
    L, r = edge.length, edge.rate
    ak = math.sqrt(edge.a) * k
    c = cmath.cos(kappa * L)
    e = cmath.exp(1j * r * L)
    return ak * (-alpha * c + beta * e) / s, ak * (alpha / e - beta * c) / s


def dirichlet_functionals(y: np.ndarray, k: complex, edge: EdgeSpec) -> tuple[np.ndarray, np.ndarray]:
    """Densities ``g0, g1`` with inward derivative of ``R_inf f`` equal to ``int g f``."""
    kappa, s = _kappa(k, edge)
    L, r = edge.length, edge.rate
    ph = np.exp(1j * r * y)
    return np.sin(kappa * (L - y)) * ph / s, cmath.exp(-1j * r * L) * np.sin(kappa * y) * ph / s


def dirichlet_kernel(x: np.ndarray, y: np.ndarray, k: complex, edge: EdgeSpec) -> np.ndarray:
    """``exp(-i r x) sin(kappa x<) sin(kappa (L - x>)) exp(i r y) / (sqrt(a) k sin(kappa L))``."""
    kappa, s = _kappa(k, edge)
    L, r = edge.length, edge.rate
    X, Y = np.meshgrid(x, y, indexing="ij")
    lo, hi = np.minimum(X, Y), np.maximum(X, Y)
    g = np.sin(kappa * lo) * np.sin(kappa * (L - hi)) / (math.sqrt(edge.a) * k * s)
    return np.exp(-1j * r * X) * g * np.exp(1j * r * Y)


def _dirichlet_apply(f: np.ndarray, x: np.ndarray, k: complex, edge: EdgeSpec) -> np.ndarray:
    kappa, s = _kappa(k, edge)
    L, r = edge.length, edge.rate
    g = np.exp(1j * r * x) * f
    left = cumulative_simpson(np.sin(kappa * x) * g, x=x, initial=0)
    right_c = cumulative_simpson(np.sin(kappa * (L - x)) * g, x=x, initial=0)
    right = right_c[-1] - right_c
    v = (np.sin(kappa * (L - x)) * left + np.sin(kappa * x) * right) / (math.sqrt(edge.a) * k * s)
    v[0] = v[-1] = 0
    return np.exp(-1j * r * x) * v


def dirichlet_resolvent_edge(f: EdgeFunction, sp: SpectralPoint, t: float, a: float) -> EdgeFunction:
    """Resolvent of ``(1/i d/dx + t) a (1/i d/dx + t)`` with Dirichlet ends, applied to ``f``."""
    if not a > 0:
        raise DomainError("a", f"must be positive, got {a}")
    edge = EdgeSpec(f.edge_id, f.length, a, t)
    return f.like(_dirichlet_apply(f.samples, np.asarray(f.nodes), sp.k, edge))


# --------------------------------------------------------------------------
# solution operator and traces


def _check_lengths(u: StateVector, layout: GraphLayout) -> None:
    for comp, edge in zip(u, layout.edges):
        if abs(comp.length - edge.length) > 1e-12 * max(1.0, edge.length):
            raise GridMismatch(f"{edge.edge_id}: length {comp.length} but the graph needs {edge.length}")


def _end_values(layout: GraphLayout, bd: np.ndarray) -> list[list[complex]]:
    ends = [[0j, 0j] for _ in range(3)]
    for p, att in enumerate(layout.attach):
        for j, end, cw in att:
            ends[j][end] += cw * bd[p]
    return ends


def gamma_solution(
    bd: BoundaryData,
    sp: SpectralPoint,
    t: Quasimomentum,
    c: CellParams,
    graph: str = "original",
    n: int = DEFAULT_N,
    rule: str = "simpson",
) -> StateVector:
    """Element of ``ker(A_max - z)`` whose vertex trace is ``bd``."""
    layout = graph_layout(t, c, graph)
    ends = _end_values(layout, np.asarray(bd.values))
    comps = []
    for edge, (alpha, beta) in zip(layout.edges, ends):
        x, w = quadrature(edge.length, n, rule)
        comps.append(EdgeFunction(edge.edge_id, edge.length, edge_solution(x, alpha, beta, sp.k, edge), w, rule, x))
    return StateVector(tuple(comps))


def gamma1_of_solution(bd: BoundaryData, sp: SpectralPoint, t: Quasimomentum, c: CellParams, graph: str = "original") -> np.ndarray:
    """Co-normal trace of ``gamma_solution(bd)`` evaluated from the closed form."""
    layout = graph_layout(t, c, graph)
    ends = _end_values(layout, np.asarray(bd.values))
    normals = [edge_solution_normals(a, b, sp.k, e) for e, (a, b) in zip(layout.edges, ends)]
    out = np.zeros(3, dtype=complex)
    for p, att in enumerate(layout.attach):
        for j, end, cw in att:
            out[p] += np.conj(cw) * normals[j][end]
    return out


def _trace_rows(layout: GraphLayout, grids, k: complex) -> np.ndarray:
    """Rows ``L`` with ``Gamma_1 R_inf f = L @ (weights * samples)``."""
    dens = [dirichlet_functionals(x, k, e) for e, (x, _) in zip(layout.edges, grids)]
    rows = []
    for att in layout.attach:
        parts = [np.zeros_like(x, dtype=complex) for x, _ in grids]
        for j, end, cw in att:
            parts[j] = parts[j] + np.conj(cw) * dens[j][end]
        rows.append(np.concatenate(parts))
    return np.array(rows)


def _gamma_columns(layout: GraphLayout, grids, k: complex) -> np.ndarray:
    cols = []
    for p in range(3):
        ends = _end_values(layout, np.eye(3)[p])
        cols.append(np.concatenate([
            edge_solution(x, a, b, k, e) for e, (x, _), (a, b) in zip(layout.edges, grids, ends)
        ]))
    return np.array(cols).T


def _resolve_b(B, sp, q, c, graph, default_b):
    if B is None:
        return np.asarray(default_b)
    if callable(B):
        return np.asarray(B(sp))
    return np.asarray(B)


def _solve_boundary(bm: np.ndarray, rhs: np.ndarray, where: str) -> np.ndarray:
    s = np.linalg.svd(bm, compute_uv=False)
    if s[-1] < SINGULAR_TOL * s[0]:
        raise SingularDenominator(f"B - M is singular ({where}); sigma_min/sigma_max = {s[-1] / s[0]:.2e}")
    return np.linalg.solve(bm, rhs)


def krein_resolvent(
    f: StateVector,
    sp: SpectralPoint,
    t: Quasimomentum,
    c: CellParams,
    B=None,
    graph: str = "original",
) -> StateVector:
    """``R_inf f + gamma (B - M)^{-1} Gamma_1 R_inf f`` on the selected graph.

    ``B`` may be a matrix or a callable evaluated at the spectral point.
    When omitted it is zero on the cycle and ``btilde(z)`` on the modified
    graph, which gives the fibre resolvent and the generalised resolvent
    respectively.
    """
    layout = graph_layout(t, c, graph)
    _check_lengths(f, layout)
    M, B0 = boundary_matrices(sp, t, c, graph)
    bm = _resolve_b(B, sp, t, c, graph, B0) - np.asarray(M)
    k = sp.k
    grids = [(np.asarray(comp.nodes), np.asarray(comp.quad_weights)) for comp in f]
    base = [_dirichlet_apply(comp.samples, x, k, e) for comp, (x, _), e in zip(f, grids, layout.edges)]
    flat_f = f.flat() * f.flat_weights()
    g1 = _trace_rows(layout, grids, k) @ flat_f
    coef = _solve_boundary(bm, g1, f"z={sp.z}, tau={t.tau}, graph={graph}")
    corr = _gamma_columns(layout, grids, k) @ coef
    return f.from_flat(np.concatenate(base) + corr)


# --------------------------------------------------------------------------
# corrector and stiff profile


@dataclass(frozen=True, eq=False)
class StiffProfile:
    """Samples of the stiff phase profile and its unit normalisation."""

    chi: tuple[np.ndarray, np.ndarray]
    psi: tuple[np.ndarray, np.ndarray]
    weights: tuple[np.ndarray, np.ndarray]

    def psi_norm(self) -> float:
        return math.sqrt(sum(float(np.sum(w * np.abs(p) ** 2)) for p, w in zip(self.psi, self.weights)))


def stiff_profile(t: Quasimomentum, c: CellParams, x1: np.ndarray, x3: np.ndarray, w1, w3) -> StiffProfile:
    """``chi = e^{-itx}`` on e1 and ``e^{it(eps l3 - x)}`` on e3; ``psi = e^{i eps l1 t} chi / sqrt(eps L)``."""
    e, tau = c.eps, t.tau
    chi1 = np.exp(-1j * tau * (np.asarray(x1) / e))
    chi3 = np.exp(1j * tau * (c.l3 - np.asarray(x3) / e))
    scale = cmath.exp(1j * tau * c.l1) / math.sqrt(e * c.stiff_length)
    return StiffProfile((chi1, chi3), (scale * chi1, scale * chi3), (np.asarray(w1), np.asarray(w3)))


def profile_for(f: StateVector, t: Quasimomentum, c: CellParams) -> StiffProfile:
    e1, _, e3 = f.components
    return stiff_profile(t, c, e1.nodes, e3.nodes, e1.quad_weights, e3.quad_weights)


def corrector_apply(f: StateVector, sp: SpectralPoint, t: Quasimomentum, c: CellParams) -> StateVector:
    """``z^{-1} <f, psi> psi`` on the stiff edges, zero on the soft edge."""
    if sp.z == 0:
        raise DomainError("z", "the corrector is undefined at z = 0")
    prof = profile_for(f, t, c)
    e1, e2, e3 = f.components
    beta = sum(np.sum(w * comp.samples * np.conj(p)) for comp, p, w in zip((e1, e3), prof.psi, prof.weights))
    s = beta / sp.z
    return f.like([s * prof.psi[0], np.zeros_like(e2.samples), s * prof.psi[1]])


# --------------------------------------------------------------------------
# homogenised resolvent


@dataclass(frozen=True, eq=False)
class HomState:
    """Element ``(u, beta)`` of ``L2(e2) + C``."""

    u: EdgeFunction
    beta: complex

    def norm(self) -> float:
        return math.sqrt(self.u.norm() ** 2 + abs(self.beta) ** 2)

    def inner(self, other: "HomState") -> complex:
        return self.u.inner(other.u) + self.beta * np.conj(other.beta)


def hom_profile(x: np.ndarray, k: complex, tau: float, l2: float) -> np.ndarray:
    """Solution on ``[0, l2]`` with value 1 at 0 satisfying the quasi-periodic condition."""
    s = cmath.sin(k * l2)
    return np.exp(-1j * tau * x) * (np.sin(k * (l2 - x)) + cmath.exp(1j * tau) * np.sin(k * x)) / s


def _check_hom_point(sp: SpectralPoint, tau: float, c: CellParams) -> complex:
    if sp.z == 0:
        raise SingularDenominator("z = 0 lies in the homogenised spectrum")
    if at_pole(sp.k * c.l2):
        raise PoleError("e2", f"sin(k l2) vanishes at z={sp.z}")
    d = dispersion_denominator(sp.k, tau, c)
    if abs(d) < 1e-8 * max(1.0, abs(sp.k) ** 2):
        raise SingularDenominator(f"z={sp.z} is on the dispersion curve at tau={tau}")
    return d


def hom_resolvent(rhs: HomState, sp: SpectralPoint, tau: float, c: CellParams) -> HomState:
    """Solve the homogenised problem by variation of parameters.

    With ``u = e^{-i tau x} V`` and ``g = e^{i tau x} f`` the equation is
    ``-V'' - k^2 V = g``.  A particular solution vanishing to first order at
    0 is combined with ``e^{+-ikx}`` to meet ``V(0) = e^{-i tau} V(l2)`` and
    ``V'(0) - e^{-i tau} V'(l2) + z L V(0) = -sqrt(L) beta_f``.
    """
    u = rhs.u
    if abs(u.length - c.l2) > 1e-12:
        raise GridMismatch(f"soft component has length {u.length}, expected {c.l2}")
    _check_hom_point(sp, tau, c)
    k, z = sp.k, sp.z
    L = c.stiff_length
    x = np.asarray(u.nodes)
    g = np.exp(1j * tau * x) * u.samples
    ic = cumulative_simpson(np.cos(k * x) * g, x=x, initial=0)
    is_ = cumulative_simpson(np.sin(k * x) * g, x=x, initial=0)
    vp = -(np.sin(k * x) * ic - np.cos(k * x) * is_) / k
    dvp = -(np.cos(k * x) * ic + np.sin(k * x) * is_)
    l2 = c.l2
    ph = cmath.exp(-1j * tau)
    ep, em = cmath.exp(1j * k * l2), cmath.exp(-1j * k * l2)
    # unknowns (A, B) in V = vp + A e^{ikx} + B e^{-ikx}; vp(0) = vp'(0) = 0
    mat = np.array([
        [1 - ph * ep, 1 - ph * em],
        [1j * k * (1 - ph * ep) + z * L, -1j * k * (1 - ph * em) + z * L],
    ], dtype=complex)
    b = np.array([ph * vp[-1], ph * dvp[-1] - math.sqrt(L) * rhs.beta], dtype=complex)
    coef = _solve_boundary_2x2(mat, b)
    V = vp + coef[0] * np.exp(1j * k * x) + coef[1] * np.exp(-1j * k * x)
    out = np.exp(-1j * tau * x) * V
    return HomState(u.like(out), math.sqrt(L) * complex(out[0]))


def _solve_boundary_2x2(mat, b):
    nrm = np.abs(mat).max()
    if abs(np.linalg.det(mat)) < 1e-14 * nrm * nrm:
        raise SingularDenominator("homogenised boundary system is singular")
    return np.linalg.solve(mat, b)


def hom_boundary_determinant(sp: SpectralPoint, tau: float, c: CellParams) -> complex:
    """Normalised determinant of the 2x2 boundary system used by :func:`hom_resolvent`."""
    k, z = sp.k, sp.z
    L, l2 = c.stiff_length, c.l2
    ph = cmath.exp(-1j * tau)
    ep, em = cmath.exp(1j * k * l2), cmath.exp(-1j * k * l2)
    mat = np.array([
        [1 - ph * ep, 1 - ph * em],
        [1j * k * (1 - ph * ep) + z * L, -1j * k * (1 - ph * em) + z * L],
    ], dtype=complex)
    return complex(np.linalg.det(mat)) / max(1.0, abs(k)) ** 3


def apply_hom_operator(state: HomState, tau: float, c: CellParams) -> HomState:
    """Action of the homogenised operator via centred finite differences."""
    u = state.u
    x = np.asarray(u.nodes)
    h = x[1] - x[0]
    V = np.exp(1j * tau * x) * u.samples
    d2 = np.gradient(np.gradient(V, h, edge_order=2), h, edge_order=2)
    d1 = np.gradient(V, h, edge_order=2)
    ph = cmath.exp(-1j * tau)
    flux = d1[0] - ph * d1[-1]
    return HomState(u.like(-np.exp(-1j * tau * x) * d2), -flux / math.sqrt(c.stiff_length))


# --------------------------------------------------------------------------
# Nystrom matrices


@dataclass(frozen=True, eq=False)
class Discretisation:
    """Nodes and weights of the rescaled cycle, plus the homogenised space."""

    grids: tuple[tuple[np.ndarray, np.ndarray], ...]
    n: int

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate([w for _, w in self.grids])

    @property
    def hom_weights(self) -> np.ndarray:
        return np.concatenate([self.grids[1][1], [1.0]])

    @property
    def slices(self) -> tuple[slice, slice, slice]:
        sizes = [x.size for x, _ in self.grids]
        s0, s1 = sizes[0], sizes[0] + sizes[1]
        return slice(0, s0), slice(s0, s1), slice(s1, s1 + sizes[2])


def discretise(c: CellParams, n: int = DEFAULT_N, rule: str = "simpson") -> Discretisation:
    return Discretisation(tuple(quadrature(L, n, rule) for L in c.lengths(rescaled=True)), n)


def dirichlet_matrix(sp: SpectralPoint, layout: GraphLayout, disc: Discretisation) -> np.ndarray:
    blocks = []
    for e, (x, w) in zip(layout.edges, disc.grids):
        blocks.append(dirichlet_kernel(x, x, sp.k, e) * w[None, :])
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size), dtype=complex)
    for s, b in zip(disc.slices, blocks):
        out[s, s] = b
    return out


def resolvent_matrix(
    sp: SpectralPoint,
    q: Quasimomentum,
    c: CellParams,
    disc: Discretisation,
    graph: str = "original",
    rinf: np.ndarray | None = None,
) -> np.ndarray:
    """Nystrom matrix of the Krein resolvent on the rescaled cycle or modified graph."""
    layout = graph_layout(q, c, graph)
    M, B = boundary_matrices(sp, q, c, graph)
    bm = np.asarray(B) - np.asarray(M)
    if rinf is None:
        rinf = dirichlet_matrix(sp, layout, disc)
    rows = _trace_rows(layout, disc.grids, sp.k) * disc.weights[None, :]
    cols = _gamma_columns(layout, disc.grids, sp.k)
    return rinf + cols @ _solve_boundary(bm, rows, f"z={sp.z}, tau={q.tau}, graph={graph}")


def psi_vector(q: Quasimomentum, c: CellParams, disc: Discretisation) -> np.ndarray:
    """``psi`` sampled on the full grid (zero on the soft edge)."""
    (x1, w1), (x2, _), (x3, w3) = disc.grids
    prof = stiff_profile(q, c, x1, x3, w1, w3)
    return np.concatenate([prof.psi[0], np.zeros(x2.size, dtype=complex), prof.psi[1]])


def corrector_matrix(sp: SpectralPoint, q: Quasimomentum, c: CellParams, disc: Discretisation) -> np.ndarray:
    if sp.z == 0:
        raise DomainError("z", "the corrector is undefined at z = 0")
    psi = psi_vector(q, c, disc)
    return np.outer(psi, np.conj(psi) * disc.weights) / sp.z


def psi_matrices(q: Quasimomentum, c: CellParams, disc: Discretisation) -> tuple[np.ndarray, np.ndarray]:
    """``(Psi, Psi^*)`` between the full grid and ``L2(e2) + C``.

    ``Psi`` first projects the stiff part onto ``psi`` so it is defined on
    all of ``H``; its adjoint embeds ``(u2, beta)`` as ``beta psi + u2``.
    """
    psi = psi_vector(q, c, disc)
    s2 = disc.slices[1]
    n_all, n2 = psi.size, s2.stop - s2.start
    P = np.zeros((n2 + 1, n_all), dtype=complex)
    P[np.arange(n2), np.arange(s2.start, s2.stop)] = 1
    P[n2, :] = np.conj(psi) * disc.weights
    Ps = np.zeros((n_all, n2 + 1), dtype=complex)
    Ps[np.arange(s2.start, s2.stop), np.arange(n2)] = 1
    Ps[:, n2] = psi
    return P, Ps


def hom_resolvent_matrix(sp: SpectralPoint, tau: float, c: CellParams, disc: Discretisation) -> np.ndarray:
    """``R_inf,soft + 0 - D(k)^{-1} <., Phi(conj z)> Phi(z)`` on ``L2(e2) + C``."""
    d = _check_hom_point(sp, tau, c)
    x, w = disc.grids[1]
    edge = EdgeSpec("e2", c.l2, 1.0, tau)
    n2 = x.size
    out = np.zeros((n2 + 1, n2 + 1), dtype=complex)
    out[:n2, :n2] = dirichlet_kernel(x, x, sp.k, edge) * w[None, :]
    rL = math.sqrt(c.stiff_length)
    phi = np.concatenate([hom_profile(x, sp.k, tau, c.l2), [rL]])
    spc = spectral_point(np.conj(sp.z))
    phic = np.concatenate([hom_profile(x, spc.k, tau, c.l2), [rL]])
    out -= np.outer(phi, np.conj(phic) * disc.hom_weights) / d
    return out


@dataclass(frozen=True, eq=False)
class EstimateMatrices:
    """Operator differences whose norms quantify the three comparison estimates."""

    intermediate: np.ndarray
    effective: np.ndarray
    composed: np.ndarray
    uncorrected: np.ndarray
    weights: np.ndarray
    hom_weights: np.ndarray


def estimate_matrices(sp: SpectralPoint, q: Quasimomentum, c: CellParams, n: int = DEFAULT_N) -> EstimateMatrices:
    """Assemble the three resolvent differences at one ``(eps, tau, z)``.

    * intermediate: ``R_cycle - R_modified - C``
    * effective: ``Psi (R_modified + C) Psi^* - R_hom``
    * composed: ``R_cycle - Psi^* R_hom Psi`` (``Psi`` includes the projection)
    """
    require_equal_stiffness(c)
    disc = discretise(c, n)
    layout = graph_layout(q, c, "original")
    rinf = dirichlet_matrix(sp, layout, disc)
    r1 = resolvent_matrix(sp, q, c, disc, "original", rinf)
    r2 = resolvent_matrix(sp, q, c, disc, "modified", rinf)
    cm = corrector_matrix(sp, q, c, disc)
    P, Ps = psi_matrices(q, c, disc)
    rh = hom_resolvent_matrix(sp, q.tau, c, disc)
    return EstimateMatrices(
        intermediate=r1 - r2 - cm,
        effective=P @ (r2 + cm) @ Ps - rh,
        composed=r1 - Ps @ rh @ P,
        uncorrected=r1 - r2,
        weights=disc.weights,
        hom_weights=disc.hom_weights,
    )


# --------------------------------------------------------------------------
# norms


def power_norm(a: np.ndarray, tol: float = 1e-8, max_iter: int = 5000, seed: int = 0) -> float:
    """Largest singular value by power iteration on ``a^H a``."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(a.shape[1]) + 1j * rng.standard_normal(a.shape[1])
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(max_iter):
        y = a.conj().T @ (a @ x)
        lam = np.linalg.norm(y)
        if lam == 0:
            return 0.0
        x = y / lam
        new = math.sqrt(lam)
        if abs(new - sigma) <= tol * new:
            return new
        sigma = new
    raise NonConvergence(f"power iteration did not settle within {max_iter} steps (last {sigma:.6e})")


def opnorm_diff(
    lhs: np.ndarray,
    rhs: np.ndarray,
    w_in: Sequence[float] | None = None,
    w_out: Sequence[float] | None = None,
    method: str = "auto",
) -> float:
    """Weighted operator norm of ``lhs - rhs``.

    Matrices act on sample vectors; the norm is taken in the quadrature
    inner products ``w_in`` and ``w_out`` (unit weights when omitted).
    """
    d = np.asarray(lhs, dtype=complex) - np.asarray(rhs, dtype=complex)
    if d.ndim != 2:
        raise DomainError("lhs", "expected matrices")
    w_in = np.ones(d.shape[1]) if w_in is None else np.asarray(w_in, dtype=float)
    w_out = np.ones(d.shape[0]) if w_out is None else np.asarray(w_out, dtype=float)
    if w_in.size != d.shape[1] or w_out.size != d.shape[0]:
        raise GridMismatch(f"weights {w_in.size}/{w_out.size} vs matrix {d.shape}")
    a = np.sqrt(w_out)[:, None] * d / np.sqrt(w_in)[None, :]
    if method == "auto":
        method = "svd" if max(a.shape) <= 1024 else "power"
    if method == "svd":
        return float(np.linalg.svd(a, compute_uv=False)[0]) if a.size else 0.0
    if method == "power":
        return power_norm(a)
    raise DomainError("method", f"unknown method {method!r}")
