import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gkt4 import pointwise as pw
from gkt4.errors import BrokenStructure, DegeneratePair, SingularForm
from gkt4.verify import random_structures

I0, J0, K0 = pw.quaternionic_triple()


def antisym_from(vals):
    m = np.zeros((4, 4))
    for i, (a, b) in enumerate(((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))):
        m[a, b] = vals[i]
        m[b, a] = -vals[i]
    return m


# -- quaternionic constants -----------------------------------------------------


def test_quaternion_relations():
    for m in (I0, J0, K0):
        assert np.allclose(m @ m, -np.eye(4))
    assert np.allclose(I0 @ J0, K0)
    assert np.allclose(J0 @ I0, -K0)
    assert abs(np.trace(I0 @ J0)) == 0.0
    assert pw.angle_function(I0, J0) == 0.0


def test_flat_kahler_form():
    om = pw.omega_of(I0, np.eye(4))
    expect = antisym_from([1, 0, 0, 0, 0, 1])  # dx01 + dx23
    assert np.allclose(om, expect)
    assert pw.pfaffian(om) == 1.0


def test_sum_squares_to_minus_two():
    assert np.allclose((I0 + J0) @ (I0 + J0), -2.0 * np.eye(4))


# -- pfaffian ----------------------------------------------------------------------


def test_pfaffian_examples():
    om_i = pw.omega_of(I0, np.eye(4))
    om_j = pw.omega_of(J0, np.eye(4))
    assert pw.pfaffian(om_i) == pytest.approx(1.0, abs=1e-15)
    assert pw.pfaffian(om_i + om_j) == pytest.approx(2.0, abs=1e-14)
    assert pw.pfaffian(np.zeros((4, 4))) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6))
def test_pfaffian_squared_is_det(vals):
    f = antisym_from(vals)
    pf = pw.pfaffian(f)
    det = pw.det4(f)
    assert abs(pf**2 - det) <= 1e-10 * max(1.0, abs(det))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6))
def test_antisym_inverse(vals):
    f = antisym_from(vals)
    pf = pw.pfaffian(f)
    if abs(pf) < 1e-6:
        return
    inv = pw.inv_antisym(f, pf)
    assert np.max(np.abs(inv @ f - np.eye(4))) <= 1e-9 * max(1.0, np.max(np.abs(f)) ** 2)


def test_inv4_matches_solve():
    rng = np.random.default_rng(2)
    m = rng.standard_normal((50, 4, 4)) + 2 * np.eye(4)
    inv = pw.inv4(m)
    assert np.max(np.abs(inv @ m - np.eye(4))) < 1e-10


def test_inv4_singular_raises():
    m = np.zeros((4, 4))
    with pytest.raises(SingularForm):
        pw.inv4(m)


# -- taming split --------------------------------------------------------------------


def test_taming_kahler_case():
    om_i = pw.omega_of(I0, np.eye(4))
    g, b = pw.taming_split(om_i, I0)
    assert np.allclose(g, np.eye(4))
    assert np.max(np.abs(b)) == 0.0


def test_taming_fdefs_flat():
    """F from -2g(I +/- J)^{-1} on the flat background recovers the flat g.

    The b-form of the quaternionic pair is -omega_K (not zero); its
    exterior derivative, hence the torsion, vanishes identically.
    """
    fp, fm = pw.fdefs_forms(np.eye(4), I0, J0)
    om_i = pw.omega_of(I0, np.eye(4))
    om_j = pw.omega_of(J0, np.eye(4))
    assert np.allclose(fp, om_i + om_j)
    assert np.allclose(fm, om_i - om_j)
    g, b = pw.taming_split(fp, I0)
    assert np.allclose(g, np.eye(4))
    assert np.allclose(b, -pw.omega_of(K0, np.eye(4)))


def test_taming_recovers_injected_b():
    """Forward-compose from (g, b0, I) and split back; recovers b0 exactly."""
    rng = np.random.default_rng(3)
    raw = rng.standard_normal((4, 4))
    cand = 0.5 * (raw - raw.T)
    # project onto the (2,0)+(0,2) part with respect to I0
    b0 = 0.5 * (cand - I0.T @ cand @ I0)
    assert np.max(np.abs(I0.T @ b0 @ I0 + b0)) < 1e-12
    f = pw.taming_compose(np.eye(4), b0, I0)
    g, b = pw.taming_split(f, I0)
    assert np.max(np.abs(g - np.eye(4))) < 1e-12
    assert np.max(np.abs(b - b0)) < 1e-12


# -- reconstruction --------------------------------------------------------------------


def test_reconstruct_flat_round_trip():
    omega = -0.5 * K0
    psi2 = pw.endo_on_twoform(J0, omega)
    j = pw.reconstruct_J(psi2, omega)
    assert np.max(np.abs(j - J0)) <= 1e-13


def test_reconstruct_scaled_psi2_breaks_structure():
    omega = -0.5 * K0
    psi2 = 1.3 * pw.endo_on_twoform(J0, omega)
    j = pw.reconstruct_J(psi2, omega)
    with pytest.raises(BrokenStructure):
        pw.check_complex_structure(j)


def test_reconstruct_singular_raises():
    omega = -0.5 * K0
    with pytest.raises(SingularForm):
        pw.reconstruct_J(np.zeros((4, 4)), omega)


def test_reconstruct_deformed_round_trip(joyce_ref):
    j = pw.reconstruct_J(joyce_ref.psi2.matrices(), joyce_ref.omega.matrices())
    assert np.max(np.abs(j @ j + np.eye(4))) <= 1e-9
    # Omega is (2,0)+(0,2) with respect to the reconstructed J
    om = joyce_ref.omega.matrices()
    assert np.max(np.abs(pw.transpose(j) @ om @ j + om)) <= 1e-9


# -- angle and Ricci potential ------------------------------------------------------------


def test_angle_examples():
    theta = np.pi / 6
    jmix = np.sin(theta) * I0 + np.cos(theta) * J0
    assert pw.angle_function(I0, jmix) == pytest.approx(0.5, abs=1e-14)
    assert pw.angle_function(I0, I0) == pytest.approx(1.0, abs=1e-15)


def test_phi_convention_pinned_by_pfaffian_oracle():
    """p = 1/2 gives Phi = -log 3; orientation frozen as a regression value."""
    theta = np.pi / 6
    jmix = np.sin(theta) * I0 + np.cos(theta) * J0
    sigma = pw.poisson_from_structure(np.eye(4), I0, jmix)
    omega = pw.symplectic_inverse(sigma)
    phi = pw.phi_pfaffian(I0, jmix, omega)
    assert phi == pytest.approx(-np.log(3.0), abs=1e-12)
    assert pw.phi_angle(I0, jmix) == pytest.approx(phi, abs=1e-12)
    assert pw.phi_determinant(I0, jmix) == pytest.approx(phi, abs=1e-12)


def test_phi_hyperkahler_zero():
    sigma = pw.poisson_from_structure(np.eye(4), I0, J0)
    omega = pw.symplectic_inverse(sigma)
    assert pw.phi_pfaffian(I0, J0, omega) == pytest.approx(0.0, abs=1e-14)


def test_phi_routes_agree_on_thousand_random_pairs():
    g, i, j, omega = random_structures(seed=7, count=1000)
    phi_pf = pw.phi_pfaffian(i, j, omega)
    assert np.max(np.abs(phi_pf - pw.phi_determinant(i, j))) <= 1e-10
    assert np.max(np.abs(phi_pf - pw.phi_angle(i, j))) <= 1e-10


def test_phi_degenerate_pair_raises():
    with pytest.raises(DegeneratePair):
        pw.phi_angle(I0, I0)
    with pytest.raises(DegeneratePair):
        pw.phi_determinant(I0, I0)


def test_anticommutation_random_pairs():
    _, i, j, _ = random_structures(seed=11, count=200)
    a, b = i + j, i - j
    assert np.max(np.abs(a @ b + b @ a)) <= 1e-12


def test_symplectic_unique_b_random_pairs():
    g, i, j, _ = random_structures(seed=13, count=200)
    fp, _ = pw.fdefs_forms(g, i, j)
    _, b = pw.taming_split(fp, i)
    closed_form = pw.omega_of(-pw.inv4(i + j) @ (i - j), g)
    assert np.max(np.abs(b - closed_form)) <= 1e-10
    assert np.max(np.abs(b - 0.5 * fp @ (i - j))) <= 1e-10
