import cmath
import math

import numpy as np
import pytest

from highcontrast.core import EdgeFunction, StateVector, from_k, inner, make_cell, quasimomentum, spectral_point
from highcontrast.errors import DomainError, NonConvergence, SingularDenominator
from highcontrast.fd_oracles import fd_cycle_resolvent, fd_dirichlet_edge
from highcontrast.mmatrix import m2, mtilde
from highcontrast.resolvent import (
    BoundaryData,
    HomState,
    apply_hom_operator,
    corrector_apply,
    corrector_matrix,
    discretise,
    dirichlet_resolvent_edge,
    gamma1_of_solution,
    gamma_solution,
    hom_boundary_determinant,
    hom_resolvent,
    krein_resolvent,
    opnorm_diff,
    power_norm,
    profile_for,
    stiff_profile,
)
from highcontrast.spectra import DispersionRelation, find_roots
from highcontrast.transforms import phi_eps, phi_eps_inverse


def rel_err(u, v):
    return (u - v).norm() / v.norm()


def smooth_state(lengths, n, seed=0):
    rng = np.random.default_rng(seed)
    fns = []
    for L in lengths:
        a, b, c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        fns.append(lambda x, a=a, b=b, c=c, L=L: a + b * np.cos(2 * np.pi * x / L) + c * np.sin(3 * np.pi * x / L))
    return StateVector.from_callables(lengths, fns, n)


# ---------------------------------------------------------------- Dirichlet


def test_dirichlet_inverts_operator():
    k, t, a, L = 1 + 1j, 3.0, 1.0, 0.5
    sp = from_k(k)
    errs = []
    for n in (64, 128):
        x = np.linspace(0, L, n + 1)
        u = x ** 2 * (L - x) ** 2 * np.exp(1j * x)
        # f = (a (1/i d/dx + t)^2 - z) u, computed symbolically for the polynomial-exponential u
        p = x ** 2 * (L - x) ** 2
        dp = 2 * x * (L - x) ** 2 - 2 * x ** 2 * (L - x)
        d2p = 2 * (L - x) ** 2 - 8 * x * (L - x) + 2 * x ** 2
        e = np.exp(1j * x)
        du = (dp + 1j * p) * e
        d2u = (d2p + 2j * dp - p) * e
        f = a * (-d2u - 2j * t * du + t * t * u) - sp.z * u
        out = dirichlet_resolvent_edge(EdgeFunction.from_callable("e1", L, lambda y: 0 * y, n).like(f), sp, t, a)
        errs.append(np.abs(out.samples - u).max() / np.abs(u).max())
        assert abs(out.samples[0]) < 1e-10 and abs(out.samples[-1]) < 1e-10
    assert errs[1] < 1e-6
    assert errs[0] / errs[1] > 12  # fourth-order quadrature


def test_dirichlet_zero():
    f = EdgeFunction.zeros("e2", 0.5, 32)
    assert dirichlet_resolvent_edge(f, from_k(1 + 1j), 3.0, 1.0).norm() == 0


def test_dirichlet_against_finite_differences():
    sp = from_k(1 + 1j)
    f = EdgeFunction.from_callable("e1", 0.5, lambda x: np.exp(2j * x) + x, 512)
    ours = dirichlet_resolvent_edge(f, sp, 3.0, 1.0)
    ref = fd_dirichlet_edge(f, sp, 3.0, 1.0)
    assert rel_err(ours, ref) <= 5e-4


# ---------------------------------------------------------------- gamma / M


def test_gamma_zero_data(cell):
    u = gamma_solution(BoundaryData(np.zeros(3)), spectral_point(-1), quasimomentum(1.0, cell.eps), cell)
    assert u.norm() == 0


@pytest.mark.parametrize("graph", ["original", "modified", "unscaled"])
def test_gamma_solves_equation(cell, graph):
    q = quasimomentum(0.8, cell.eps)
    sp = spectral_point(-2 + 1j)
    res = []
    for n in (256, 512):
        u = gamma_solution(BoundaryData([1, 2j, -1]), sp, q, cell, graph, n)
        worst = 0.0
        from highcontrast.resolvent import graph_layout

        for comp, edge in zip(u, graph_layout(q, cell, graph).edges):
            x = np.asarray(comp.nodes)
            h = x[1] - x[0]
            v = np.exp(1j * edge.rate * x) * comp.samples
            d2 = (v[2:] - 2 * v[1:-1] + v[:-2]) / h ** 2
            r = -edge.a * d2 - sp.z * v[1:-1]
            worst = max(worst, np.abs(r).max() / max(1.0, np.abs(sp.z * v).max()))
        res.append(worst)
    # second differences of the discrete solution: O(h^2) plus roundoff
    assert res[1] < 1e-5 and res[0] / res[1] > 3.0


@pytest.mark.parametrize("graph, build", [("original", m2), ("modified", mtilde)])
def test_gamma1_reproduces_m_columns(cell, graph, build):
    q = quasimomentum(2.2, cell.eps)
    sp = spectral_point(3 + 0.5j)
    M = np.asarray(build(sp, q, cell))
    for j in range(3):
        col = gamma1_of_solution(BoundaryData(np.eye(3)[j]), sp, q, cell, graph)
        assert np.allclose(col, M[:, j], rtol=0, atol=1e-9 * np.abs(M).max())


# ---------------------------------------------------------------- Krein


def test_krein_matches_cycle_oracle():
    c = make_cell(1.0, 1.0, 0.25, 0.5, 0.1)
    q = quasimomentum(5 * c.eps, c.eps)
    sp = spectral_point(-1)
    errs = []
    for n in (256, 512):
        f = smooth_state(c.lengths(rescaled=False), n)
        ours = krein_resolvent(f, sp, q, c, graph="unscaled")
        errs.append(rel_err(ours, fd_cycle_resolvent(f, sp, q, c)))
    assert errs[1] <= 1e-3
    assert errs[0] / errs[1] >= 3.5


def test_krein_rescaling_consistency(cell):
    q = quasimomentum(1.3, cell.eps)
    sp = spectral_point(2 + 1j)
    f = smooth_state(cell.lengths(rescaled=False), 128, seed=4)
    direct = krein_resolvent(f, sp, q, cell, graph="unscaled")
    via = phi_eps_inverse(krein_resolvent(phi_eps(f, cell), sp, q, cell), cell)
    assert rel_err(via, direct) < 1e-12


def test_krein_herglotz(cell):
    q = quasimomentum(0.4, cell.eps)
    for z in (1 + 2j, -3 + 0.5j, 10 - 1j):
        sp = spectral_point(z)
        f = smooth_state(cell.lengths(), 64, seed=int(abs(z)))
        val = inner(krein_resolvent(f, sp, q, cell), f)
        assert val.imag * z.imag > 0


def test_first_resolvent_identity(cell):
    q = quasimomentum(0.4, cell.eps)
    z1, z2 = spectral_point(-1.0), spectral_point(-2.5)
    f = smooth_state(cell.lengths(), 256, seed=9)
    r1 = krein_resolvent(f, z1, q, cell)
    r2 = krein_resolvent(f, z2, q, cell)
    rr = krein_resolvent(r2, z1, q, cell)
    assert rel_err(r1 - r2, rr * (z1.z - z2.z)) < 1e-8


def test_modified_graph_callable_b(cell):
    from highcontrast.mmatrix import btilde

    q = quasimomentum(0.4, cell.eps)
    sp = spectral_point(-1)
    f = smooth_state(cell.lengths(), 64, seed=2)
    a = krein_resolvent(f, sp, q, cell, graph="modified")
    b = krein_resolvent(f, sp, q, cell, B=lambda s: btilde(s, q, cell), graph="modified")
    assert rel_err(a, b) < 1e-14


def test_krein_singular_at_eigenvalue(cell):
    tau = 1.0
    k = find_roots(DispersionRelation("fibre_detM1", cell, tau), (0.5, 5))[0]
    f = smooth_state(cell.lengths(), 32)
    with pytest.raises(SingularDenominator):
        krein_resolvent(f, from_k(k), quasimomentum(tau, cell.eps), cell)


# ---------------------------------------------------------------- corrector


def test_stiff_profile_normalised(cell):
    f = smooth_state(cell.lengths(), 128)
    prof = profile_for(f, quasimomentum(2.0, cell.eps), cell)
    assert abs(prof.psi_norm() - 1) < 1e-10


def test_corrector_on_psi_and_complement(cell):
    q = quasimomentum(2.0, cell.eps)
    sp = spectral_point(-1 + 2j)
    zero = StateVector.zeros(cell.lengths(), 128)
    prof = profile_for(zero, q, cell)
    psi = zero.like([prof.psi[0], np.zeros(129), prof.psi[1]])
    out = corrector_apply(psi, sp, q, cell)
    assert rel_err(out, psi * (1 / sp.z)) < 1e-12
    # a stiff function orthogonal to chi: chi on e1 minus a multiple of chi on e3
    a1 = np.sum(prof.weights[0] * np.abs(prof.chi[0]) ** 2)
    a3 = np.sum(prof.weights[1] * np.abs(prof.chi[1]) ** 2)
    orth = zero.like([prof.chi[0] / a1, np.ones(129), -prof.chi[1] / a3])
    assert corrector_apply(orth, sp, q, cell).norm() < 1e-12


def test_corrector_norm(cell):
    q = quasimomentum(2.0, cell.eps)
    sp = spectral_point(-3 + 4j)
    disc = discretise(cell, 64)
    C = corrector_matrix(sp, q, cell, disc)
    assert abs(opnorm_diff(C, 0 * C, disc.weights, disc.weights) - 1 / abs(sp.z)) < 1e-10


def test_corrector_rejects_zero(cell):
    with pytest.raises(DomainError):
        corrector_apply(smooth_state(cell.lengths(), 8), spectral_point(0), quasimomentum(1, cell.eps), cell)


# ---------------------------------------------------------------- homogenised


def hom_rhs(c, n, seed=0):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    u = EdgeFunction.from_callable("e2", c.l2, lambda x: a * np.cos(3 * x) + b * x, n)
    return HomState(u, complex(rng.standard_normal() + 1j * rng.standard_normal()))


def test_hom_resolvent_inverts(cell):
    tau = 0.9
    sp = spectral_point(-1.5 + 0.5j)
    errs = []
    for n in (512, 1024):
        f = hom_rhs(cell, n)
        r = hom_resolvent(f, sp, tau, cell)
        a = apply_hom_operator(r, tau, cell)
        du = a.u.samples - sp.z * r.u.samples - f.u.samples
        errs.append(max(np.abs(du[2:-2]).max(), abs(a.beta - sp.z * r.beta - f.beta)))
    assert errs[1] < 1e-4 and errs[0] / errs[1] > 3.0


def test_hom_resolvent_domain_conditions(cell):
    tau = 0.9
    r = hom_resolvent(hom_rhs(cell, 256), spectral_point(-1), tau, cell)
    w_soft = cmath.exp(-1j * cell.stiff_length * tau)
    u0, ul = r.u.samples[0], r.u.samples[-1]
    assert abs(u0 - w_soft * ul) < 1e-9
    assert abs(u0 - r.beta / math.sqrt(cell.stiff_length)) < 1e-9


def test_hom_resolvent_self_adjoint(cell):
    tau = 2.4
    sp = spectral_point(-1.0)
    f, g = hom_rhs(cell, 512, 1), hom_rhs(cell, 512, 2)
    a = hom_resolvent(f, sp, tau, cell).inner(g)
    b = f.inner(hom_resolvent(g, sp, tau, cell))
    assert abs(a - b) < 1e-9


def test_hom_boundary_singular_at_roots(cell):
    tau = 1.0
    for k in find_roots(DispersionRelation("hom_bloch", cell, tau), (0.1, 20)):
        assert abs(hom_boundary_determinant(from_k(k), tau, cell)) < 1e-8
    assert abs(hom_boundary_determinant(from_k(2.0), tau, cell)) > 1e-3


def test_hom_resolvent_rejects_spectrum(cell):
    tau = 1.0
    k = find_roots(DispersionRelation("hom_bloch", cell, tau), (0.1, 20))[0]
    with pytest.raises(SingularDenominator):
        hom_resolvent(hom_rhs(cell, 64), from_k(k), tau, cell)


# ---------------------------------------------------------------- norms


def test_opnorm_identical_is_zero():
    a = np.random.default_rng(0).standard_normal((20, 20))
    assert opnorm_diff(a, a) < 1e-12


def test_opnorm_rank_one():
    rng = np.random.default_rng(1)
    v = rng.standard_normal(30) + 1j * rng.standard_normal(30)
    w = rng.standard_normal(30) + 1j * rng.standard_normal(30)
    a = np.outer(v, w.conj())
    assert abs(opnorm_diff(a, 0 * a) - np.linalg.norm(v) * np.linalg.norm(w)) < 1e-10
    assert abs(opnorm_diff(a, 0 * a, method="power") - np.linalg.norm(v) * np.linalg.norm(w)) < 1e-7


def test_power_iteration_against_svd():
    a = np.random.default_rng(5).standard_normal((50, 50))
    ref = np.linalg.svd(a, compute_uv=False)[0]
    assert abs(power_norm(a, tol=1e-12, max_iter=100000) - ref) < 1e-8 * ref


def test_power_iteration_nonconvergence():
    a = np.diag([1.0, 0.999999])
    with pytest.raises(NonConvergence):
        power_norm(a, tol=1e-15, max_iter=3)
