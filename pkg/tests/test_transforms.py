import math
import warnings

import numpy as np
import pytest

from highcontrast.core import EdgeFunction, StateVector, inner, quasimomentum
from highcontrast.errors import DomainError, GridMismatch, NotInEffectiveSpace, SupportExceedsWindow
from highcontrast.resolvent import HomState
from highcontrast.transforms import (
    gelfand,
    gelfand_scaled,
    inverse_gelfand,
    line_norm,
    phi_eps,
    phi_eps_inverse,
    psi_t,
    psi_t_adjoint,
    sample_line,
)


def bump(y, centre=0.0, width=1.8):
    s = (np.asarray(y) - centre) / (width / 2)
    out = np.zeros_like(s, dtype=complex)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1 / (1 - s[inside] ** 2)) * np.exp(2j * s[inside])
    return out


def test_single_cell_formula():
    f = lambda y: bump(y, 0.5, 0.9)
    g = gelfand(f, 0, 64, 32)
    y, kap = np.arange(64) / 64, 2 * np.pi * np.arange(32) / 32
    ref = f(y)[:, None] * np.exp(-1j * np.outer(y, kap)) / math.sqrt(2 * math.pi)
    assert np.abs(g.u_hat - ref).max() < 1e-14


def test_plancherel_and_roundtrip():
    g = gelfand(bump, 2, 512, 512)
    cells = sample_line(bump, 2, 512)
    nu = line_norm(cells)
    assert abs(g.norm() - nu) / nu < 1e-8
    assert line_norm(inverse_gelfand(g) - cells) / nu < 1e-8


def test_zero_input():
    g = gelfand(lambda y: 0 * y, 1, 16, 16)
    assert g.norm() == 0 and np.all(inverse_gelfand(g) == 0)


def test_scaled_at_unit_eps_is_unscaled():
    a = gelfand_scaled(bump, 1.0, 2, 64, 64)
    b = gelfand(bump, 2, 64, 64)
    assert np.array_equal(a.u_hat, b.u_hat)


def test_scaled_dilation():
    eps = 0.25
    a = gelfand_scaled(lambda x: bump(x / eps), eps, 2, 64, 64)
    b = gelfand(bump, 2, 64, 64)
    assert np.abs(a.u_hat - math.sqrt(eps) * b.u_hat).max() < 1e-13
    assert np.allclose(a.y, eps * b.y) and np.allclose(a.kappa, b.kappa / eps)


def test_support_exceeds_window():
    with pytest.raises(SupportExceedsWindow):
        gelfand(lambda y: bump(y, 0.0, 5.0), 1, 32, 32)
    with pytest.raises(SupportExceedsWindow):
        gelfand(np.zeros((4, 8)), 1)
    with pytest.raises(DomainError):
        gelfand(bump, -1)


def random_state(lengths, n, seed):
    rng = np.random.default_rng(seed)
    comps = []
    for name, L in zip(("e1", "e2", "e3"), lengths):
        e = EdgeFunction.zeros(name, L, n)
        comps.append(e.like(rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)))
    return StateVector(tuple(comps))


def test_phi_eps_unitary(cell):
    u = random_state(cell.lengths(rescaled=False), 64, 0)
    v = random_state(cell.lengths(rescaled=False), 64, 1)
    pu, pv = phi_eps(u, cell), phi_eps(v, cell)
    assert abs(pu[1].length - cell.l2) < 1e-15
    assert abs(inner(pu, pv) - inner(u, v)) < 1e-12 * u.norm() * v.norm()
    back = phi_eps_inverse(pu, cell)
    assert np.abs(back[1].samples - u[1].samples).max() < 1e-14
    with pytest.raises(GridMismatch):
        phi_eps(pu, cell)


def hom_state(cell, n, seed):
    rng = np.random.default_rng(seed)
    u = EdgeFunction.zeros("e2", cell.l2, n).like(rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1))
    return HomState(u, complex(rng.standard_normal(), rng.standard_normal()))


def test_psi_of_profile(cell):
    t = quasimomentum(1.2, cell.eps)
    zero = HomState(EdgeFunction.zeros("e2", cell.l2, 128), 1.0)
    emb = psi_t_adjoint(zero, t, cell)
    assert abs(emb.norm() - 1) < 1e-10
    back = psi_t(emb, t, cell)
    assert abs(back.beta - 1) < 1e-10 and back.u.norm() == 0


def test_embedding_preserves_inner_products(cell):
    t = quasimomentum(2.7, cell.eps)
    h, g = hom_state(cell, 128, 3), hom_state(cell, 128, 4)
    a = inner(psi_t_adjoint(h, t, cell), psi_t_adjoint(g, t, cell))
    assert abs(a - h.inner(g)) < 1e-11
    back = psi_t(psi_t_adjoint(h, t, cell), t, cell)
    assert abs(back.beta - h.beta) < 1e-11


def test_not_in_effective_space(cell):
    t = quasimomentum(0.5, cell.eps)
    u = random_state(cell.lengths(), 64, 5)
    with pytest.raises(NotInEffectiveSpace):
        psi_t(u, t, cell)


def test_small_stiff_remainder_warns(cell):
    t = quasimomentum(0.5, cell.eps)
    h = hom_state(cell, 64, 6)
    emb = psi_t_adjoint(h, t, cell)
    e1 = emb[0]
    nudged = StateVector((e1.like(e1.samples + 1e-7 * emb.norm()), emb[1], emb[2]))
    with pytest.warns(UserWarning):
        psi_t(nudged, t, cell)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        psi_t(emb, t, cell)
