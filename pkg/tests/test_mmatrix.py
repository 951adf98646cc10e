import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from highcontrast.core import from_k, make_cell, quasimomentum, spectral_point
from highcontrast.errors import NearSingularDispersion, PoleError
from highcontrast.mmatrix import (
    det_m1_asymptotic,
    dispersion_denominator,
    m1,
    m2,
    m2_inverse_asymptotics,
    mtb_inverse_asymptotics,
    mtilde_minus_b,
    numerical_rank,
    quasi_constant_vector,
)
from oracles import brute_roots, cc, cycle_m_column

EPS_SWEEP = [1 / 16, 1 / 32, 1 / 64, 1 / 128, 1 / 256]


def slope(xs, ys):
    return np.polyfit(np.log(xs), np.log(ys), 1)[0]


zs = st.complex_numbers(min_magnitude=0.1, max_magnitude=50, allow_nan=False, allow_infinity=False).filter(
    lambda z: abs(z.imag) > 1e-3
)


@settings(max_examples=40)
@given(zs, st.floats(0, 2 * math.pi), st.floats(0.05, 1.0))
def test_m1_m2_conjugation_symmetry(z, tau, eps):
    c = make_cell(1.0, 1.0, 0.25, 0.5, eps)
    q = quasimomentum(tau, eps)
    for build in (m1, m2):
        a = np.asarray(build(spectral_point(np.conj(z)), q, c))
        b = np.asarray(build(spectral_point(z), q, c).adjoint())
        assert np.allclose(a, b, rtol=1e-10, atol=1e-10)


def test_m1_corner_entry(cell):
    m = m1(from_k(1.0), quasimomentum(0.0, 0.1), cell)
    # independent scalar evaluation: two stiff edges with k eps l = 0.025
    expected = -2 / math.tan(0.025)
    assert abs(m[0, 0] - expected) < 1e-10


def test_m2_soft_entry(cell):
    m = m2(from_k(1.0), quasimomentum(0.0, 0.1), cell)
    assert abs(m[1, 2] - 0.1 / math.sin(0.5)) < 1e-12
    assert abs(m[1, 2] - 0.20858296429334883) < 1e-12


@pytest.mark.parametrize("k, tau", [(1.3 + 0.2j, 0.7), (2.1j, 2.0), (0.8, 4.0)])
def test_m1_columns_match_multiprecision_oracle(k, tau):
    eps = 0.2
    c = make_cell(1.3, 0.7, 0.3, 0.45, eps)
    t = tau / eps
    m = np.asarray(m1(from_k(k), quasimomentum(tau, eps), c))
    lengths = (eps * c.l1, eps * c.l2, eps * c.l3)
    coeffs = (c.a1, eps * eps, c.a3)
    for col in range(3):
        ref = cycle_m_column(col, k, t, lengths, coeffs)
        assert np.allclose(m[:, col], ref, rtol=0, atol=1e-9 * np.abs(m).max())


def test_m2_equals_weight_conjugated_m1(cell):
    # the rescaled triple puts eps^{-1/2} on soft values and eps^{1/2} on soft
    # co-normals, so the weight conjugation is the identity on C^3
    W = np.eye(3)
    for z in (-1, 3 + 2j, 17.5 - 0.5j):
        q = quasimomentum(1.1, cell.eps)
        a = np.asarray(m2(spectral_point(z), q, cell))
        b = W.conj().T @ np.asarray(m1(spectral_point(z), q, cell)) @ W
        assert np.allclose(a, b, rtol=1e-10, atol=1e-10)


def test_pole_error_names_edge(cell):
    # sin(k l2) = 0 on the soft edge
    with pytest.raises(PoleError) as exc:
        m1(from_k(2 * math.pi), quasimomentum(0.3, 0.1), cell)
    assert exc.value.edge == "e2"


def test_herglotz_im_m_positive():
    rng = np.random.default_rng(7)
    worst = math.inf
    for _ in range(100):
        eps = rng.uniform(0.02, 1.0)
        c = make_cell(1.0, 1.0, 0.25, 0.5, eps)
        z = complex(rng.uniform(-50, 50), rng.uniform(1e-3, 20))
        q = quasimomentum(rng.uniform(0, 2 * math.pi), eps)
        for build in (m1, m2):
            m = np.asarray(build(spectral_point(z), q, c))
            im = (m - m.conj().T) / 2j
            worst = min(worst, np.linalg.eigvalsh(im).min() / max(1.0, np.abs(m).max()))
    assert worst >= -1e-9


def test_cauchy_riemann(cell):
    q = quasimomentum(0.9, cell.eps)
    rng = np.random.default_rng(3)
    for _ in range(5):
        z = complex(rng.uniform(-5, 30), rng.uniform(0.5, 5))
        h = 1e-6
        f = lambda w: np.asarray(m1(spectral_point(w), q, cell))
        dx = (f(z + h) - f(z - h)) / (2 * h)
        dy = (f(z + 1j * h) - f(z - 1j * h)) / (2j * h)
        assert np.abs(dx - dy).max() <= 1e-6 * max(1.0, np.abs(dx).max())


def test_mtilde_minus_b_structure(cell):
    for z, tau in ((-1, 0.3), (5 + 1j, 2.0)):
        m = np.asarray(mtilde_minus_b(spectral_point(z), quasimomentum(tau, cell.eps), cell))
        assert m[0, 1] == 0 and m[1, 0] == 0


def test_mtilde_minus_b_cancellation(cell):
    k = 1.0
    tau = k * cell.l2  # cos(tau) = cos(k l2)
    m = np.asarray(mtilde_minus_b(from_k(k), quasimomentum(tau, cell.eps), cell))
    assert abs(m[1, 1] - 2 * k * k * cell.stiff_length) < 1e-12


def test_mtilde_minus_b_degenerates_at_limit_roots():
    # the determinant vanishes on the limit roots as eps -> 0; at fixed eps the
    # relative smallest singular value is small and decays at a high rate
    tau = 1.0
    ks = [k for k in brute_roots(cc(0.25, 0.5, 0.25, tau), 0.1, 20, 200000) if abs(math.sin(0.5 * k)) > 1e-6]
    assert len(ks) == 4
    eps = [0.1, 0.05, 0.025, 0.0125]
    for k in ks:
        ratios = []
        for e in eps:
            c = make_cell(1.0, 1.0, 0.25, 0.5, e)
            s = np.linalg.svd(np.asarray(mtilde_minus_b(from_k(k), quasimomentum(tau, e), c)), compute_uv=False)
            ratios.append(s[-1] / s[0])
        assert slope(eps, ratios) > 3.5
        assert ratios[-1] < 2e-6


def test_det_asymptotics_rate():
    sp = from_k(1 + 0.5j)
    diffs = []
    for e in EPS_SWEEP:
        c = make_cell(1.0, 1.0, 0.25, 0.5, e)
        diffs.append(abs(e * m1(sp, quasimomentum(1.0, e), c).det() - e * det_m1_asymptotic(sp, 1.0, c)))
    assert slope(EPS_SWEEP, diffs) > 1.9
    # the remainder after the eps^-1 term is O(eps): slope >= 0.9 for det itself
    assert slope(EPS_SWEEP, [d / e for d, e in zip(diffs, EPS_SWEEP)]) >= 0.9


def test_det_leading_term_at_quarter_turn(cell):
    k = 1.7 + 0.1j
    expected = k * (k * cell.stiff_length - 2 / cmath.tan(k * cell.l2)) / (cell.l1 * cell.l3 * cell.eps)
    assert abs(det_m1_asymptotic(from_k(k), math.pi / 2, cell) - expected) < 1e-10 * abs(expected)


@settings(max_examples=30)
@given(st.floats(0.1, 20), st.floats(0, 2 * math.pi))
def test_leading_bracket_times_sine_is_limit_relation(k, tau):
    c = make_cell(1, 1, 0.25, 0.5, 0.1)
    s = math.sin(k * c.l2)
    if abs(s) < 1e-6:
        return
    bracket = det_m1_asymptotic(from_k(k), tau, c) * c.l1 * c.l3 * c.eps / k
    assert abs(bracket * s - cc(c.l1, c.l2, c.l3, tau)(np.array([k]))[0]) < 1e-9 * max(1, k)


def test_m2_inverse_leading_rank_one_eigenvalue_three(cell):
    sp = spectral_point(-1)
    q = quasimomentum(1.2, cell.eps)
    asym = m2_inverse_asymptotics(sp, q, cell)
    d = dispersion_denominator(sp.k, q.tau, cell)
    phases = np.asarray(asym.m_minus1) * d
    assert numerical_rank(phases) == 1
    v = quasi_constant_vector(q.tau, cell)
    expected_v = np.array([cmath.exp(-1j * cell.l3 * q.tau), cmath.exp(-1j * cell.stiff_length * q.tau), 1])
    assert np.allclose(v, expected_v, atol=1e-15)
    assert np.linalg.norm(phases @ v - 3 * v) < 1e-9


def test_m2_inverse_remainder_is_order_eps():
    sp = from_k(1 + 0.5j)
    res = []
    for e in EPS_SWEEP:
        c = make_cell(1.0, 1.0, 0.25, 0.5, e)
        q = quasimomentum(1.0, e)
        res.append(np.abs(m2(sp, q, c).inv() - m2_inverse_asymptotics(sp, q, c).evaluate(-1)).max())
    assert 0.9 <= slope(EPS_SWEEP, res) <= 1.1


def test_mtb_inverse_expansion(cell):
    sp = from_k(1 + 0.5j)
    asym = mtb_inverse_asymptotics(sp, quasimomentum(1.0, cell.eps), cell)
    assert np.all(np.asarray(asym.m_minus1)[1, :] == 0)
    assert np.asarray(asym.m_minus1)[1, 1] == 0
    m1c = np.asarray(asym.m_1)
    mask = np.ones((3, 3), bool)
    mask[[0, 0, 2, 2], [0, 2, 0, 2]] = False
    assert np.all(m1c[mask] == 0)


def test_mtb_corner_coefficients_by_inversion():
    sp = from_k(1 + 0.5j)
    eps = [1 / 16, 1 / 32, 1 / 64]
    corner = []
    for e in eps:
        c = make_cell(1.0, 1.0, 0.25, 0.5, e)
        q = quasimomentum(1.0, e)
        r = mtilde_minus_b(sp, q, c).inv() - mtb_inverse_asymptotics(sp, q, c).evaluate(1)
        corner.append(np.abs(r[[0, 0, 2, 2], [0, 2, 0, 2]]).max())
    assert slope(eps, corner) > 2.5


def test_near_singular_dispersion(cell):
    tau = 1.0
    k = brute_roots(cc(cell.l1, cell.l2, cell.l3, tau), 0.5, 5)[0]
    with pytest.raises(NearSingularDispersion):
        m2_inverse_asymptotics(from_k(k), quasimomentum(tau, cell.eps), cell)
