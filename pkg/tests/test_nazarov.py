import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from typelab import nazarov as Z
from typelab.errors import ValidationError

ARCSINH = Z.GammaDiffeo.arcsinh_shift(0.5)


@pytest.fixture(scope="module")
def arcsinh_measure():
    return Z.build_measure(ARCSINH, 1.0, 100_000)


# -- Gamma class ---------------------------------------------------------------

def test_identity_is_gamma_class():
    c = Z.gamma_check(Z.GammaDiffeo.identity())
    assert c.verdict == "holds"
    assert all(math.isinf(v) for v in c.evidence["decay_exponents"].values())


def test_arcsinh_exponents():
    c = Z.gamma_check(ARCSINH, np.geomspace(1.0, 1e3, 400), k_max=4)
    assert c.verdict == "holds"
    for k, s in c.evidence["decay_exponents"].items():
        assert abs(s - int(k)) <= 0.2


def test_doubling_fails():
    X = Z.GammaDiffeo.custom(lambda t: 2 * t, lambda t: 2 + 0 * t, "double")
    assert Z.gamma_check(X).verdict == "fails"


def test_non_monotone_rejected():
    X = Z.GammaDiffeo.custom(lambda t: t - 2 * np.sin(t), lambda t: 1 - 2 * np.cos(t), "wobble")
    with pytest.raises(ValidationError):
        Z.gamma_check(X)


def test_family_validation():
    with pytest.raises(ValidationError):
        Z.GammaDiffeo.arcsinh_shift(-1.0)
    with pytest.raises(ValidationError):
        Z.GammaDiffeo.from_dict({"family": "tanh_shift", "beta": 0.1})


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e4, 1e4), st.sampled_from(["arctan_shift", "arcsinh_shift"]),
       st.floats(-0.9, 2.0))
def test_oddness_and_inverse(t, family, beta):
    X = Z.GammaDiffeo(family, beta)
    assert X(np.array([-t]))[0] == -X(np.array([t]))[0]
    y = X.inverse(X(np.array([t])))[0]
    assert abs(y - t) <= 1e-9 * max(1.0, abs(t))


def test_closed_form_derivatives_match_differences():
    t = np.linspace(-30, 30, 61)
    h = 1e-4
    for k in (1, 2, 3):
        num = (ARCSINH.derivative(t + h, k - 1) - ARCSINH.derivative(t - h, k - 1)) / (2 * h)
        assert np.max(np.abs(num - ARCSINH.derivative(t, k))) <= 1e-7


# -- build_measure -------------------------------------------------------------

def test_identity_measure_is_the_integer_lattice():
    mu = Z.build_measure(Z.GammaDiffeo.identity(), 1.0, 5)
    assert np.array_equal(mu.positions, np.arange(-5.0, 6.0))
    assert np.all(mu.masses == 1.0) and mu.symmetric


def test_arcsinh_atoms():
    mu = Z.build_measure(ARCSINH, 1.0, 3)
    assert mu.positions[3] == 0.0
    assert abs(mu.positions[4] - (1 + 0.5 * math.log(1 + math.sqrt(2)))) <= 1e-15
    assert abs(mu.positions[4] - 1.4407) <= 1e-4
    assert abs(mu.masses[4] - (1 + 1 / (2 * math.sqrt(2)))) <= 1e-15
    assert mu.masses[2] == mu.masses[4] and mu.symmetric


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 3.0))
def test_scaling_covariance(c):
    direct = Z.build_measure(ARCSINH, c, 40)
    unit = Z.build_measure(ARCSINH.rescaled(c), 1.0, 40)
    assert np.allclose(direct.positions, c * unit.positions, rtol=1e-14, atol=1e-14)
    assert np.allclose(direct.masses, unit.masses, rtol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.99, 3.0), st.sampled_from(["arctan_shift", "arcsinh_shift"]))
def test_masses_positive(beta, family):
    mu = Z.build_measure(Z.GammaDiffeo(family, beta), 0.7, 200)
    assert np.all(mu.masses > 0)


# -- windows -------------------------------------------------------------------

def test_window_shape():
    w = Z.SchwartzWindow(2.0, 5.0)
    lam = np.linspace(-7, 7, 1401)
    v = w.phi_hat(lam)
    assert np.all((v >= 0) & (v <= 1))
    assert np.all(v[np.abs(lam) <= 2] == 1) and np.all(v[np.abs(lam) >= 5] == 0)
    x = np.linspace(0, 40, 81)
    assert np.array_equal(w.phi(x), w.phi(-x))


def test_window_phi_at_zero_is_the_spectral_mass():
    w = Z.SchwartzWindow(2.0, 5.0)
    lam = np.linspace(-5, 5, 200_001)
    integral = np.trapezoid(w.phi_hat(lam), lam) / (2 * math.pi)
    assert abs(w.phi(0.0)[0] - integral) <= 1e-9


def test_window_radius_guard():
    with pytest.raises(ValidationError):
        Z.SchwartzWindow(2.0, 6.5)
    with pytest.raises(ValidationError):
        Z.SchwartzWindow(3.0, 2.0)


# -- Poisson decay -------------------------------------------------------------

def test_poisson_exact_for_the_integer_lattice():
    mu = Z.build_measure(Z.GammaDiffeo.identity(), 1.0, 1000)
    r = Z.poisson_decay_test(mu, Z.SchwartzWindow(2.0, 5.0), np.linspace(0, 200, 401))
    assert r.max_abs <= 1e-10


def test_poisson_decay_arcsinh(arcsinh_measure):
    r = Z.poisson_decay_test(arcsinh_measure, Z.SchwartzWindow(2.0, 5.0), np.linspace(20, 500, 200))
    assert r.slope <= -4 and r.verdict == "superpolynomial-consistent"


def test_wider_transition_does_not_worsen_decay(arcsinh_measure):
    t = np.linspace(20, 500, 200)
    narrow = Z.poisson_decay_test(arcsinh_measure, Z.SchwartzWindow(2.0, 3.5), t)
    wide = Z.poisson_decay_test(arcsinh_measure, Z.SchwartzWindow(2.0, 5.0), t)
    assert wide.slope <= narrow.slope + 1


def test_poisson_rejects_short_lattice():
    mu = Z.build_measure(Z.GammaDiffeo.identity(), 1.0, 100)
    with pytest.raises(ValidationError):
        Z.poisson_decay_test(mu, Z.SchwartzWindow(2.0, 5.0), np.linspace(0, 200, 11))


def test_poisson_rejects_window_beyond_lattice_rate():
    mu = Z.build_measure(Z.GammaDiffeo.identity(), 2.0, 1000)
    with pytest.raises(ValidationError):
        Z.poisson_decay_test(mu, Z.SchwartzWindow(2.0, 5.0), np.linspace(0, 200, 11))


def test_poisson_with_rescaled_lattice():
    mu = Z.build_measure(Z.GammaDiffeo.identity(), 0.5, 2000)
    r = Z.poisson_decay_test(mu, Z.SchwartzWindow(2.0, 5.0), np.linspace(0, 200, 101))
    assert r.max_abs <= 1e-10


# -- stable orthogonality ------------------------------------------------------

def test_stable_orthogonality_arcsinh():
    assert Z.stable_orthogonality_certificate(ARCSINH, 1.0, 1e4, [1, 10, 100]).verdict == "holds"


def test_stable_orthogonality_identity_fails():
    c = Z.stable_orthogonality_certificate(Z.GammaDiffeo.identity(), 1.0, 1e4, [1, 10, 100])
    assert c.verdict == "fails" and not c.evidence["shift_unbounded"]


def test_stable_orthogonality_arctan_fails():
    c = Z.stable_orthogonality_certificate(Z.GammaDiffeo.arctan_shift(1.0), 1.0, 1e4, [1, 10, 100])
    assert c.verdict == "fails" and not c.evidence["shift_unbounded"]
    assert abs(c.evidence["shift_values"][-1] - math.pi / 2) <= 1e-3
