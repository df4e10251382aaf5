import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from typelab import trend
from typelab.errors import GridError, ValidationError
from typelab.measures import (
    SpectralMeasure,
    adaptive_grid,
    imag_tail_test,
    majorization_check,
    majorization_search,
    polynomial_growth_exponent,
    proximity_test,
    tail_difference,
    weak_equivalence_check,
)


def lattice(count, shift=None):
    n = np.arange(-count, count + 1, dtype=float)
    pos = n if shift is None else n + shift(n)
    return SpectralMeasure.atoms(pos, truncation_radius=count + 1.0)


# -- construction and files ------------------------------------------------------------

def test_rejects_unsorted_and_nonpositive():
    with pytest.raises(ValidationError):
        SpectralMeasure.atoms([1.0, 0.0])
    with pytest.raises(ValidationError):
        SpectralMeasure.atoms([0.0, 1.0], [1.0, 0.0])
    with pytest.raises(ValidationError):
        SpectralMeasure.atoms([-1.0, 2.0], symmetric=True)


def test_measure_file_round_trip():
    mu = SpectralMeasure(positions=[-1.0, 0.5], masses=[2.0, 0.25],
                         density_grid=[0.0, 1.0, 3.0], density_values=[0.0, 1.0, 0.5],
                         imag_heights=[2.0], imag_masses=[0.1], truncation_radius=10.0)
    assert SpectralMeasure.from_dict(mu.to_dict()) == mu


def test_density_mass_exact():
    mu = SpectralMeasure(density_grid=[0.0, 2.0], density_values=[0.0, 2.0])
    assert mu.density_mass(0.0, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert mu.mass(-5.0, 5.0) == pytest.approx(2.0, abs=1e-15)


# -- growth ------------------------------------------------------------------------------

def test_growth_single_atom():
    mu = SpectralMeasure.atoms([0.0])
    rep = polynomial_growth_exponent(mu, [0.0, 1.0], [1.0, 4.0, 16.0, 64.0])
    assert rep.minimal_s == 0.0
    # 1/(1+|0|^(2s)) is 1/2 at s = 0 and 1 at s = 1
    assert rep.trends[0.0].partials == [0.5] * 4
    assert rep.trends[1.0].partials == [1.0] * 4


def test_growth_lebesgue_with_ratio_override():
    mu = SpectralMeasure.lebesgue(1e4)
    windows = [10.0, 100.0, 1e3, 1e4]
    rep = polynomial_growth_exponent(mu, [0.4, 0.6, 1.0], windows, ratio=1.5)
    assert rep.minimal_s == 0.6
    assert rep.trends[0.4].verdict == trend.GROWING


def test_growth_lebesgue_default_rule_is_stricter():
    mu = SpectralMeasure.lebesgue(1e4)
    rep = polynomial_growth_exponent(mu, [0.4, 0.6, 1.0], [10.0, 100.0, 1e3, 1e4])
    assert rep.trends[0.6].verdict == trend.INCONCLUSIVE
    assert rep.minimal_s == 1.0


def test_growth_lattice_partial_sum_oracle():
    N = 10_000
    mu = SpectralMeasure.lattice(1.0, N)
    windows = trend.geometric_windows(1.0, float(N))
    rep = polynomial_growth_exponent(mu, [1.0], windows)
    n = np.arange(1, N + 1, dtype=float)
    assert rep.trends[1.0].partials[-1] == pytest.approx(1 + 2 * math.fsum(1 / (1 + n * n)), rel=1e-14)
    assert rep.trends[1.0].verdict == trend.CONVERGED


def test_growth_errors():
    with pytest.raises(ValidationError):
        polynomial_growth_exponent(SpectralMeasure.atoms([0.0]), [], [1.0, 2.0])
    with pytest.raises(ValidationError):
        polynomial_growth_exponent(SpectralMeasure.atoms([50.0]), [1.0], [1.0, 2.0])


# -- majorization -------------------------------------------------------------------------

def test_majorization_reflexive_lattice():
    mu = lattice(50)
    x = adaptive_grid(mu, 1.0)
    assert majorization_check(mu, mu, 1.0, 0, 1.0, x).holds


def test_majorization_guard_refuses_coarse_grid():
    mu = lattice(50)
    with pytest.raises(GridError):
        majorization_check(mu, mu, 1.0, 0, 1.0, np.linspace(-51, 51, 1001))


def test_exponential_shift_example():
    # e^{-2|n|} shift, delta = 1, n = 0, C = 1, checked exactly as stated
    mu = lattice(50)
    mt = lattice(50, lambda n: np.exp(-2 * np.abs(n)))
    x = adaptive_grid([mu, mt], 1.0)
    assert majorization_check(mu, mt, 1.0, 0, 1.0, x).holds


def test_exponential_shift_violations_sit_near_the_origin_atom():
    # the n = 0 atom moves by e^0 = 1; documented in the decisions ledger
    mu = lattice(50)
    mt = lattice(50, lambda n: np.exp(-2 * np.abs(n)))
    x = adaptive_grid([mu, mt], 1.0)
    w = majorization_check(mu, mt, 1.0, 0, 1.0, x)
    assert w.violations
    assert all(-0.6 < v < -0.3 for v in w.violations)
    assert majorization_check(mu, mt, 1.0, 0, 2.0, x).holds


def test_exponential_shift_holds_away_from_origin():
    mu = lattice(50)
    mt = lattice(50, lambda n: np.where(n == 0, 0.0, np.exp(-2 * np.abs(n))))
    x = adaptive_grid([mu, mt], 1.0)
    assert majorization_check(mu, mt, 1.0, 0, 1.0, x).holds


def test_half_shift_fails_on_lattice_points():
    mu = lattice(50)
    mt = lattice(50, lambda n: np.full(n.shape, 0.5))
    x = adaptive_grid([mu, mt], 1.0)
    w = majorization_check(mu, mt, 1.0, 0, 1.0, x)
    bad = set(w.violations)
    assert all(float(n) in bad for n in range(-50, 51) if abs(n) >= 2)
    big = majorization_check(mu, mt, 1.0, 4, 1e6, x)
    bad = set(big.violations)
    assert all(float(n) in bad for n in range(-50, 51) if abs(n) >= 13)
    Cs = [10.0 ** k for k in range(7)]
    assert majorization_search(mu, mt, x, [1.0], range(5), Cs) is None


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(-30, 30), min_size=1, max_size=12, unique=True),
       st.floats(0.5, 3.0), st.floats(1.0, 50.0))
def test_reflexivity_and_scaling(points, delta, kappa):
    mu = SpectralMeasure.atoms(sorted(float(p) for p in points), truncation_radius=31.0)
    x = adaptive_grid(mu, delta)
    assert majorization_check(mu, mu, delta, 0, 1.0, x).holds
    w = majorization_check(mu, mu, delta, 0, 1.0, x)
    scaled = majorization_check(mu.scaled(kappa), mu.scaled(kappa), delta, 0, kappa * w.C, x)
    assert scaled.holds


def test_weak_equivalence_examples():
    mu = lattice(30)
    x = adaptive_grid(mu, 1.0)
    assert weak_equivalence_check(mu, mu, 1.0, 0, 1.0, x)[2] == "weakly equivalent on tested grid"
    fwd, bwd, verdict = weak_equivalence_check(mu, mu.scaled(2.0), 1.0, 0, 1.0, x, C_back=2.0)
    assert verdict == "weakly equivalent on tested grid"
    assert not majorization_check(mu.scaled(2.0), mu, 1.0, 0, 1.0, x).holds


def test_weak_equivalence_coinciding_outside_compact():
    n = np.arange(-40, 41, dtype=float)
    mu = SpectralMeasure.atoms(n, truncation_radius=41.0)
    inner = np.where(np.abs(n) <= 10, n + 0.3 * np.sign(n), n)
    nu = SpectralMeasure.atoms(np.unique(np.concatenate([inner, [0.5]])), truncation_radius=41.0)
    x = adaptive_grid([mu, nu], 1.0)
    C = 2.0 * 11 ** 0 * math.exp(2 * 11)
    assert weak_equivalence_check(mu, nu, 1.0, 0, C, x)[2] == "weakly equivalent on tested grid"


# -- tails and proximity ---------------------------------------------------------------------

def test_tail_difference_single_atom():
    mu0 = SpectralMeasure.atoms([1.0, 2.0], truncation_radius=10.0)
    muR = SpectralMeasure.atoms([1.0, 2.0, 5.0], truncation_radius=10.0)
    grid = np.linspace(0, 10, 41)
    psi = tail_difference(muR, mu0, grid)
    assert np.array_equal(psi.values, np.where(grid < 5, 1.0, 0.0))
    assert np.all(tail_difference(mu0, mu0, grid).values == 0)


def test_tail_difference_interleaved_suffix_oracle():
    n = np.arange(1, 51, dtype=float)
    mu0 = SpectralMeasure.atoms(n, truncation_radius=51.0)
    muR = SpectralMeasure.atoms(n + np.exp(-n), truncation_radius=51.0)
    grid = np.unique(np.concatenate([np.linspace(0, 51, 2001), n, n + 0.5 * np.exp(-n)]))
    psi = tail_difference(muR, mu0, grid)
    brute = np.array([np.sum(n + np.exp(-n) > g) - np.sum(n > g) for g in grid], dtype=float)
    assert np.array_equal(psi.values, brute)
    assert set(np.unique(psi.values)) <= {0.0, 1.0}


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.1, 20.0), min_size=1, max_size=8, unique=True),
       st.lists(st.floats(0.1, 20.0), min_size=1, max_size=8, unique=True))
def test_tail_difference_antisymmetric(a, b):
    mu = SpectralMeasure.atoms(sorted(a), truncation_radius=21.0)
    nu = SpectralMeasure.atoms(sorted(b), truncation_radius=21.0)
    grid = np.linspace(0, 21, 211)
    assert np.array_equal(tail_difference(mu, nu, grid).values, -tail_difference(nu, mu, grid).values)


def test_tail_difference_needs_common_radius():
    with pytest.raises(ValidationError):
        tail_difference(SpectralMeasure.atoms([1.0], truncation_radius=5.0),
                        SpectralMeasure.atoms([1.0], truncation_radius=6.0), [0.0, 1.0])


def test_proximity_single_atom_closed_form():
    mu0 = SpectralMeasure.atoms([1.0], truncation_radius=10.0)
    muR = SpectralMeasure.atoms([1.0, 5.0], truncation_radius=10.0)
    cert = proximity_test(tail_difference(muR, mu0, np.linspace(0, 10, 11)), 0.5)
    assert cert.verdict == "finite"
    assert cert.value == pytest.approx((math.exp(2.5) - 1) / 0.5, abs=1e-10)


def test_proximity_zero_and_growing():
    mu0 = SpectralMeasure.atoms([0.5], truncation_radius=31.0)
    assert proximity_test(tail_difference(mu0, mu0, [0.0, 31.0]), 1.0).value == 0.0
    muR = SpectralMeasure.atoms(np.concatenate([[0.5], np.arange(1.0, 31.0)]), truncation_radius=30.0)
    mu0 = SpectralMeasure.atoms([0.5], truncation_radius=30.0)
    cert = proximity_test(tail_difference(muR, mu0, np.linspace(0, 30, 31)), 1.0)
    assert cert.verdict == "growing"


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.5, 9.0), min_size=1, max_size=6, unique=True), st.floats(0.1, 2.0),
       st.floats(0.1, 0.99))
def test_proximity_monotone_in_delta(extra, delta, shrink):
    mu0 = SpectralMeasure.atoms([0.25], truncation_radius=10.0)
    muR = SpectralMeasure.atoms(sorted([0.25] + extra), truncation_radius=10.0)
    psi = tail_difference(muR, mu0, np.linspace(0, 10, 11))
    hi = proximity_test(psi, delta)
    lo = proximity_test(psi, delta * shrink)
    assert hi.verdict == lo.verdict == "finite"
    assert lo.value <= hi.value * (1 + 1e-12)


# -- imaginary tails -------------------------------------------------------------------------

def test_imag_tail_finite_sum_exact():
    mu = SpectralMeasure(imag_heights=[1.0, 2.0], imag_masses=[0.5, 0.25])
    cert = imag_tail_test(mu, 0.3)
    assert cert.verdict == "finite"
    assert cert.value == 0.5 * math.exp(0.3) + 0.25 * math.exp(1.2)


def test_imag_tail_superexponential_masses_finite():
    k = np.arange(1, 21, dtype=float)
    cert = imag_tail_test(list(zip(k, np.exp(-k ** 3))), 0.5)
    assert cert.verdict == "finite"
    brute = 0.0
    for kk in k:
        brute = brute + math.exp(-kk ** 3) * math.exp(0.5 * kk * kk)
    assert cert.value == brute


def test_imag_tail_exponential_masses_growing():
    k = np.arange(1, 21, dtype=float)
    assert imag_tail_test(list(zip(k, np.exp(-k))), 0.5).verdict == "growing"


def test_imag_tail_modes():
    assert imag_tail_test([], 1.0).value == 0.0
    with pytest.raises(ValidationError):
        imag_tail_test([], mode="exponential")
    cert = imag_tail_test([(1.0, 1.0)], mode="exponential", x=2.0)
    assert cert.value == pytest.approx(math.exp(2.0), rel=1e-15)
