import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from typelab import quadrature
from typelab import sturm as SL
from typelab.errors import ValidationError
from typelab.measures import SpectralMeasure

ZERO = SL.Potential()
ONE = SL.Potential("constant", 1.0)


def problem(q=ZERO, h=0.0, a=math.pi, margin=0.0):
    return SL.SLProblem(a, q, h, margin)


# -- omega -------------------------------------------------------------------------

def test_omega_free_cosine():
    assert abs(SL.solve_omega(problem(), 2.0, np.array([1.0]))[0] - math.cos(2)) <= 1e-8
    assert abs(math.cos(2) + 0.416147) <= 1e-6


def test_omega_free_with_slope():
    v = SL.solve_omega(problem(h=1.0), 2.0, np.array([1.0]))[0]
    assert abs(v - (math.cos(2) + math.sin(2) / 2)) <= 1e-8


def test_omega_constant_potential():
    x = np.linspace(0, 3, 31)
    v = SL.solve_omega(problem(ONE), 2.0, x)
    assert np.max(np.abs(v - np.cos(math.sqrt(3) * x))) <= 1e-8


def test_omega_constant_potential_matches_closed_form_grid():
    x = np.linspace(0, 3, 31)
    P = problem(ONE, h=0.5)
    for lam in (0.0, 0.5, 1.0, 7.0, 3 + 1j):
        v = SL.solve_omega(P, lam, x)
        assert np.max(np.abs(v - SL.omega_closed_constant(lam, x, 1.0, 0.5))) <= 1e-8


def test_omega_grid_guard():
    with pytest.raises(ValidationError):
        SL.solve_omega(problem(margin=0.5), 1.0, np.array([0.0, math.pi]))


def test_omega_is_an_even_power_series_at_zero_potential():
    x = np.linspace(0, 2, 21)
    for h in (0.0, 1.0):
        for lam in np.linspace(-1, 1, 9):
            series = np.zeros_like(x)
            for k in range(20):
                sign = (-1) ** k * lam ** (2 * k)
                series += sign * x ** (2 * k) / math.factorial(2 * k)
                series += h * sign * x ** (2 * k + 1) / math.factorial(2 * k + 1)
            v = SL.solve_omega(problem(h=h), lam, x)
            assert np.max(np.abs(v - series)) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 20.0))
def test_omega_even_in_lambda(lam):
    x = np.linspace(0, 2, 11)
    P = problem(ONE, h=0.3)
    assert np.max(np.abs(SL.solve_omega(P, lam, x) - SL.solve_omega(P, -lam, x))) <= 1e-9


# -- bound --------------------------------------------------------------------------

def test_bound_zero_potential():
    r = SL.omega_bound_check(problem(), 5.0, np.linspace(0.1, 3, 30))
    assert r.holds and np.all(r.lhs <= 1e-15) and np.all(r.rhs == 0)


def test_bound_constant_potential():
    r = SL.omega_bound_check(problem(ONE), 10.0, np.array([1.0]))
    assert r.holds
    assert abs(r.rhs[0] - 1 / 9) <= 1e-15 and r.lhs[0] <= r.rhs[0]


def test_bound_complex_lambda_gains_exponential():
    r = SL.omega_bound_check(problem(ONE), 10 + 1j, np.array([1.0]))
    assert r.holds
    assert abs(r.rhs[0] - math.e / (abs(10 + 1j) - 1)) <= 1e-14


def test_bound_vacuous_is_reported():
    r = SL.omega_bound_check(problem(SL.Potential("constant", 5.0)), 1.0, np.array([0.1, 1.0]))
    assert list(r.vacuous) == [False, True] and r.holds


# -- Weyl transform -------------------------------------------------------------

BUMP = SL.SmoothBump(0.3, 2.8)


def cosine_transform(f, lam):
    x, w = quadrature.panel_nodes(np.linspace(f.lo, f.hi, 257), 16)
    return np.cos(np.multiply.outer(lam, x)) @ (w * f(x))


def test_weyl_is_cosine_transform_at_zero_potential():
    lam = np.linspace(0, 30, 61)
    assert np.max(np.abs(SL.weyl_transform(BUMP, problem(), lam) - cosine_transform(BUMP, lam))) <= 1e-10


def test_weyl_at_zero_is_the_integral():
    f = SL.SmoothBump(0.2, 0.8)
    x, w = quadrature.panel_nodes(np.linspace(0.2, 0.8, 65), 16)
    assert abs(SL.weyl_transform(f, problem(), 0.0) - float(np.dot(w, f(x)))) <= 1e-14


def test_weyl_constant_potential():
    lam = np.array([0.0, 0.7, 2.0, 5.0])
    P = problem(ONE, a=3.0)
    x, w = quadrature.panel_nodes(np.linspace(BUMP.lo, BUMP.hi, 65), 16)
    oracle = SL.omega_closed_constant(lam, x, 1.0, 0.0).real @ (w * BUMP(x))
    assert np.max(np.abs(SL.weyl_transform(BUMP, P, lam) - oracle)) <= 1e-8


def test_weyl_support_guard():
    with pytest.raises(ValidationError):
        SL.weyl_transform(SL.SmoothBump(2.0, 3.5), problem(), [1.0])


def test_weyl_intertwines_the_operator():
    # u'(0) = 0 holds for a bump supported away from 0, matching h = 0
    lam = np.linspace(0.5, 12, 24)
    x, w = quadrature.panel_nodes(np.linspace(BUMP.lo, BUMP.hi, 257), 16)
    lhs = np.cos(np.multiply.outer(lam, x)) @ (w * -BUMP.second_derivative(x))
    rhs = lam ** 2 * SL.weyl_transform(BUMP, problem(), lam)
    assert np.max(np.abs(lhs - rhs)) <= 1e-8


# -- Parseval --------------------------------------------------------------------

def lattice_mu(N):
    return SpectralMeasure.lattice(1.0, N, mass=1 / math.pi)


def test_parseval_cosine_series():
    r = SL.parseval_check(BUMP, problem(), lattice_mu(400))
    assert r.relative_error <= 1e-8


def test_parseval_zero_function():
    r = SL.parseval_check(SL.SmoothBump(0.3, 2.8, 0.0), problem(), lattice_mu(100))
    assert r.relative_error == 0.0 and r.norm_transform == 0.0


def test_parseval_plancherel_window():
    mu = SpectralMeasure.lebesgue(1e3, 1 / math.pi)
    r = SL.parseval_check(BUMP, problem(a=math.inf), mu)
    assert r.relative_error <= 1e-6


def test_parseval_rejects_short_truncation():
    with pytest.raises(ValidationError):
        SL.parseval_check(BUMP, problem(), lattice_mu(5))


def test_parseval_error_decreases_with_radius():
    errs = [SL.parseval_check(BUMP, problem(), lattice_mu(N), tol=1.0).relative_error
            for N in (10, 20, 40, 80)]
    assert errs[-1] < errs[0]
    for a, b in zip(errs[:-1], errs[1:]):
        assert b <= 2 * a


# -- Phi transform ---------------------------------------------------------------

X = np.concatenate([np.linspace(0, 1e-2, 11)[1:], np.linspace(0.02, 6.0, 300)])


def test_phi_of_scaled_lebesgue():
    phi = SL.phi_transform(SpectralMeasure.lebesgue(200.0, 1 / math.pi), np.array([0.5, 1.0, 3.0]))
    assert np.max(np.abs(phi.values - [0.5, 1.0, 3.0])) <= 1e-10


def test_phi_of_scaled_integers():
    phi = SL.phi_transform(lattice_mu(2000), np.array([0.25, 1.0, 3.0, 6.0]))
    assert abs(phi.values[1] - 1.0) <= 1e-8
    assert np.max(np.abs(phi.values - [0.25, 1.0, 3.0, 6.0])) <= 1e-6


def test_phi_lattice_tail_converges():
    x = np.array([1.0, 6.0])
    errs = [np.abs(SL.phi_transform(lattice_mu(N), x).values - x) for N in (2000, 20000)]
    assert np.all(errs[1] <= errs[0] / 10)


def test_phi_of_zero_measure():
    phi = SL.phi_transform(SpectralMeasure(), np.array([0.0, 1.0, 5.0]))
    assert np.all(phi.values == 0)


def test_phi_point_mass_at_zero():
    phi = SL.phi_transform(SpectralMeasure.atoms([0.0], [2.0]), np.array([0.0, 1.0, 3.0]))
    assert np.array_equal(phi.values, [0.0, 1.0, 9.0])


def test_phi_imaginary_atoms():
    mu = SpectralMeasure(imag_heights=np.array([1.0]), imag_masses=np.array([1.0]))
    phi = SL.phi_transform(mu, np.array([0.5, 2.0]))
    assert np.allclose(phi.values, np.cosh([0.5, 2.0]) - 1, rtol=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(0.05, 10.0))
def test_phi_linearity(m1, m2, x):
    a = SpectralMeasure.atoms([-2.0, 1.0, 3.5], [m1, m1, m1])
    b = SpectralMeasure.atoms([-1.0, 0.5], [m2, 2 * m2])
    both = SpectralMeasure.atoms([-2.0, -1.0, 0.5, 1.0, 3.5], [m1, m2, 2 * m2, m1, m1])
    xs = np.array([x])
    lhs = SL.phi_transform(both, xs).values
    rhs = SL.phi_transform(a, xs).values + SL.phi_transform(b, xs).values
    assert abs(lhs[0] - rhs[0]) <= 1e-12 * max(1.0, abs(lhs[0]))


def test_phi_is_even():
    phi = SL.phi_transform(lattice_mu(200), X)
    t = np.linspace(0, 5, 11)
    assert np.array_equal(phi(t), phi(-t))


# -- GL conditions ---------------------------------------------------------------

def test_gl_absolute_value():
    c = SL.gl_check(SL.PhiFunction(X, np.abs(X)), h=0.0)
    assert c.verdict == "holds"
    assert abs(c.evidence["phi_prime_0"] - 1) <= 1e-12 and abs(c.evidence["inferred_h"]) <= 1e-9


def test_gl_quadratic():
    c = SL.gl_check(SL.PhiFunction(X, X - X ** 2 / 2), h=1.0)
    assert c.verdict == "holds"
    assert abs(c.evidence["phi_second_0"] + 1) <= 1e-9 and abs(c.value - 1) <= 1e-9


def test_gl_fails_without_normalization():
    phi = SL.phi_transform(SpectralMeasure.lebesgue(400.0, 2 / math.pi), X)
    c = SL.gl_check(phi, h=0.0)
    assert c.verdict == "fails"
    assert abs(c.evidence["phi_prime_0"] - 2) <= 1e-3


def test_gl_needs_samples_near_zero():
    x = np.linspace(0, 1, 11)
    with pytest.raises(ValidationError):
        SL.gl_check(SL.PhiFunction(x, x))


# -- pairing -----------------------------------------------------------------------

def test_pairing_lebesgue():
    f = SL.SmoothBump(-1.5, 1.5)
    r = SL.pairing_test(SpectralMeasure.lebesgue(400.0, 1 / math.pi), f)
    assert abs(r.lhs - 2 * float(f(np.array([0.0]))[0])) <= 1e-8
    assert r.discrepancy <= 1e-8


def test_pairing_integers():
    f = SL.SmoothBump(-2 * math.pi + 0.1, 2 * math.pi - 0.1)
    r = SL.pairing_test(lattice_mu(2000), f, a=math.pi)
    assert abs(r.lhs - 2 * float(f(np.array([0.0]))[0])) <= 1e-8
    # M_sigma is exponentially small in 1/sigma here, so the smallest width is closest
    assert min(r.discrepancies.values()) <= 1e-8
    assert r.discrepancy <= 1e-7


def test_pairing_zero_function():
    r = SL.pairing_test(lattice_mu(200), SL.SmoothBump(-1.0, 1.0, 0.0), a=math.pi)
    assert r.lhs == 0 and all(v == 0 for v in r.rhs.values())


def test_pairing_support_guard():
    with pytest.raises(ValidationError):
        SL.pairing_test(lattice_mu(200), SL.SmoothBump(-7.0, 1.0), a=math.pi)
