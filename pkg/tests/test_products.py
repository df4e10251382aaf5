import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from typelab import products as P
from typelab.errors import ValidationError, ZeroHit


@pytest.fixture(scope="module")
def sinc_big():
    return P.sinc_product(100_000)


@pytest.fixture(scope="module")
def cos_big():
    return P.cosine_product(100_000)


# -- evaluation --------------------------------------------------------------

def test_sinc_half(sinc_big):
    v = P.eval_product(sinc_big, 0.5, tail_policy="lattice_closure")
    assert abs(v.value - 2 / math.pi) <= 1e-9


def test_sinc_at_origin_is_normalization(sinc_big):
    assert P.eval_product(sinc_big, 0.0).value == 1.0


def test_cos_at_one(cos_big):
    v = P.eval_product(cos_big, 1.0, tail_policy="lattice_closure")
    assert abs(v.value + 1.0) <= 1e-9


def test_truncated_value_lies_inside_error_bar(sinc_big):
    v = P.eval_product(sinc_big, 0.5, tail_policy="pair_log_bound")
    assert v.error > 0
    assert abs(math.log(2 / math.pi) - float(v.log_abs)) <= float(v.error)


def test_zero_hit_is_distinct():
    F = P.sinc_product(16)
    with pytest.raises(ZeroHit):
        P.eval_product(F, 3.0)
    assert P.eval_product(F, 3.0, allow_zeros=True).value == 0.0


def test_closure_matches_sin_on_a_grid():
    F = P.sinc_product(50)
    x = np.linspace(0.05, 80.3, 211)
    v = P.eval_product(F, x, tail_policy="lattice_closure", allow_zeros=True).value
    assert np.max(np.abs(v - np.sinc(x))) <= 1e-12


def test_complex_argument():
    F = P.cosine_product(64)
    z = np.array([0.3 + 0.7j, -1.2 + 0.1j])
    v = P.eval_product(F, z, tail_policy="lattice_closure").value
    assert np.max(np.abs(v - np.cos(np.pi * z))) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(-60, 60).filter(lambda v: abs(v - round(v)) > 1e-6))
def test_symmetry(z):
    F = P.sinc_product(128)
    a = P.eval_product(F, z, tail_policy="pair_log_bound")
    b = P.eval_product(F, -z, tail_policy="pair_log_bound")
    assert a.log_abs == b.log_abs and a.sign == b.sign and a.error == b.error


def test_error_bar_shrinks_with_truncation():
    F = P.sinc_product(4096)
    errs = [float(P.eval_product(F, 2.5, N=n, tail_policy="pair_log_bound").error)
            for n in (16, 64, 256, 1024, 4096)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_m7_gate_rejects_divergent_zero_sets():
    with pytest.raises(ValidationError):
        P.CanonicalProduct(np.sqrt(np.arange(1.0, 5000.0)))


def test_invalid_zero_sets():
    with pytest.raises(ValidationError):
        P.CanonicalProduct(np.array([2.0, 1.0]))
    with pytest.raises(ValidationError):
        P.CanonicalProduct(np.array([1.0]), normalization=0.0)


def test_round_trip():
    F = P.cosine_product(10)
    G = P.CanonicalProduct.from_dict(F.to_measure_dict())
    assert np.array_equal(F.positive_zeros, G.positive_zeros)
    assert G.tail == F.tail and G.normalization == F.normalization


# -- derivatives at zeros ----------------------------------------------------

def test_derivative_polynomial():
    F = P.CanonicalProduct(np.array([1.0]))
    d = P.derivative_at_zeros(F, [0, -1], tail_policy="none")
    assert d == {1.0: -2.0, -1.0: 2.0}


def test_derivative_sinc():
    d = P.derivative_at_zeros(P.sinc_product(1000), [0], tail_policy="lattice_closure")
    assert abs(d[1.0] + 1.0) <= 1e-9


def test_derivative_cos():
    d = P.derivative_at_zeros(P.cosine_product(1000), [0], tail_policy="lattice_closure")
    assert abs(d[0.5] + math.pi) <= 1e-9


def test_derivatives_beyond_stored_zeros_use_the_tail():
    F = P.sine_product(32)
    d = P.derivatives(F, 100, tail_policy="lattice_closure")
    n = np.arange(1, 101)
    assert np.max(np.abs(d.values - math.pi * np.cos(np.pi * n))) <= 1e-9
    assert abs(d.origin - math.pi) <= 1e-15


def test_lattice_fast_path_matches_pairwise_sums():
    for F in (P.cosine_product(3000), P.sine_product(3000),
              P.lattice_product(2.0, 1.0, 3000, normalization=-3.0)):
        for policy, N in (("none", 3000), ("pair_log_bound", 3000), ("pair_log_bound", 1000),
                          ("lattice_closure", 3000)):
            fast = P._stored_derivative_logs(F, N, policy, True)
            slow = P._stored_derivative_logs(F, N, policy, False)
            assert np.max(np.abs(fast[0] - slow[0])) <= 1e-10
            assert np.array_equal(fast[1], slow[1])
            assert np.max(np.abs(fast[2] - slow[2])) <= 1e-12


def test_lattice_structure_detection():
    assert P.lattice_structure(P.cosine_product(10)) == P.LatticeTail(1.0, 0.5)
    F = P.CanonicalProduct(np.array([0.5, 1.5, 2.6]), tail=P.LatticeTail(1.0, 3.5))
    assert P.lattice_structure(F) is None


# -- Krein sums --------------------------------------------------------------

def test_krein_sum_unit_weight_grows():
    F = P.sine_product(4096)
    c = P.krein_sum(F, lambda v: 1.0, tail_policy="lattice_closure")
    d = P.derivatives(F, tail_policy="lattice_closure")
    idx = np.searchsorted(d.zeros, c.params["windows"], side="right")
    expected = (1 + 2 * idx) / math.pi
    assert np.max(np.abs(np.array(c.evidence["partials"]) / expected - 1)) <= 1e-11
    assert c.verdict == "growing"


def test_krein_sum_decaying_weight_converges():
    F = P.sine_product(4096)
    c = P.krein_sum(F, lambda v: (1 + np.abs(v)) ** -2.0, tail_policy="lattice_closure")
    n = np.arange(1, 4097, dtype=float)
    oracle = 2 / math.pi * math.fsum((1 + n) ** -2) + 1 / math.pi
    assert c.verdict == "finite"
    assert abs(c.value - oracle) <= 1e-12
    full = 2 / math.pi * (math.pi ** 2 / 6 - 1) + 1 / math.pi
    assert abs(c.value - full) <= 2 / math.pi / 4096


def test_krein_sum_empty():
    F = P.CanonicalProduct(np.array([]), check_m7=False)
    c = P.krein_sum(F, lambda v: 1.0, tail_policy="none")
    assert c.value == 0.0 and c.verdict == "finite"


# -- annihilation ------------------------------------------------------------

def test_annihilation_type_two(cos_big):
    f = P.TestFunction.sinc_power(1.0, 2)
    r = P.annihilation_residual(cos_big, f)
    assert r.residual + r.tail <= 1e-6 and r.annihilated


def test_annihilation_zero_function(cos_big):
    r = P.annihilation_residual(cos_big, P.TestFunction.zero())
    assert r.residual == 0.0 and r.annihilated


def test_even_tests_cancel_against_even_products(cos_big):
    # every even f gives an exactly symmetric sum against an even B, whatever its type
    r = P.annihilation_residual(cos_big, P.TestFunction.sinc_power(2.0, 2))
    assert r.signed_sum == 0.0 and r.tail_method == "parity cancellation"


def test_odd_partner_separates_the_types(cos_big):
    # z f(z) pairs nontrivially with the even B; below type pi the sum tends to 0
    below = P.annihilation_residual(cos_big, P.TestFunction.sinc_power(1.0, 2, odd=True),
                                    tail_policy="lattice_closure")
    above = P.annihilation_residual(cos_big, P.TestFunction.sinc_power(2.0, 2, odd=True),
                                    tail_policy="lattice_closure")
    assert abs(below.signed_sum) <= 1e-5
    assert abs(above.signed_sum) > 1e-1


def test_annihilation_requires_test_function(cos_big):
    with pytest.raises(ValidationError):
        P.annihilation_residual(cos_big, lambda x: x)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_annihilation_linearity(alpha, beta):
    B = P.cosine_product(2000)
    f = P.TestFunction.sinc_power(1.0, 2, odd=True)
    g = P.TestFunction.sinc_power(0.7, 3, odd=True)
    pol = "lattice_closure"
    lhs = P.annihilation_residual(B, f.combine(g, alpha, beta), tail_policy=pol).signed_sum
    rhs = (alpha * P.annihilation_residual(B, f, tail_policy=pol).signed_sum
           + beta * P.annihilation_residual(B, g, tail_policy=pol).signed_sum)
    assert abs(lhs - rhs) <= 1e-12


# -- counting ----------------------------------------------------------------

def test_counting_empty():
    prof = P.counting(np.array([]), np.array([1.0, 5.0, 50.0]))
    assert np.all(prof.n == 0) and np.all(prof.N == 0)


def test_counting_integers():
    lam = np.arange(-100, 101, dtype=float)
    assert P.counting(lam, np.array([2.5])).n[0] == 5


def test_counting_N_matches_step_integral():
    lam = np.arange(-1000, 1001, dtype=float)
    j = np.arange(1, 10)
    oracle = math.fsum((2 * j + 1) * np.log((j + 1) / j))
    assert abs(P.counting(lam, np.array([10.0])).N[0] - oracle) <= 1e-12


def test_counting_N_matches_riemann_sum():
    lam = np.array([-7.3, -2.0, 0.4, 1.5, 3.25, 8.0])
    t = np.linspace(1, 10, 900_001)
    mid = 0.5 * (t[1:] + t[:-1])
    riemann = np.sum(P.counting_n(lam, mid) / mid * np.diff(t))
    assert abs(P.counting(lam, np.array([10.0])).N[0] - riemann) <= 1e-6


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-500, 500), unique=True, min_size=2, max_size=60), st.data())
def test_counting_additivity(points, data):
    cut = data.draw(st.integers(1, len(points) - 1))
    a = np.array(points[:cut], dtype=float) * 0.37
    b = np.array(points[cut:], dtype=float) * 0.37
    grid = np.geomspace(0.1, 300, 40)
    both = P.counting(np.concatenate([a, b]), grid)
    assert np.array_equal(both.n, P.counting(a, grid).n + P.counting(b, grid).n)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=50))
def test_counting_n_nondecreasing(points):
    grid = np.linspace(0, 120, 300)
    n = P.counting(np.sort(points), grid).n
    assert np.all(np.diff(n) >= 0)


# -- Krein exclusion ---------------------------------------------------------

@pytest.fixture(scope="module")
def integers():
    return np.arange(-10_000, 10_001, dtype=float)


def test_exclusion_arcsinh_lattice(integers):
    lam = integers + 0.5 * np.arcsinh(integers)
    c = P.krein_exclusion(lam, 1.0, [1, 10, 100], 1e4)
    assert c.verdict == "holds"
    assert all(v["holds"] for v in c.evidence["per_A"].values())


def test_exclusion_integers_fail(integers):
    assert P.krein_exclusion(integers, 1.0, [1, 10, 100], 1e4).verdict == "fails"


def test_exclusion_even_integers_hold(integers):
    assert P.krein_exclusion(2 * integers, 1.0, [1, 10, 100], 1e4).verdict == "holds"


def test_exclusion_requires_coverage():
    with pytest.raises(ValidationError):
        P.krein_exclusion(np.arange(-10, 11, dtype=float), 1.0, [1], 1e4)


# -- zero shifts -------------------------------------------------------------

def test_identity_shift_reproduces_product():
    B = P.sinc_product(200)
    r = P.shift_zeros(B, targets={}, M=0.0)
    x = np.linspace(0.1, 150.7, 301)
    a = P.eval_product(B, x, tail_policy="lattice_closure", allow_zeros=True).value
    b = P.eval_product(r.product, x, tail_policy="lattice_closure", allow_zeros=True).value
    assert np.max(np.abs(a - b)) <= 1e-12


def test_exponential_shift_rate():
    B = P.sine_product(200)
    lam = B.positive_zeros[B.positive_zeros > 1]
    r = P.shift_zeros(B, M=1.0, delta=1.0, shifts=np.exp(-2 * lam))
    assert r.fitted_rate <= -2 * (2 / 3)


def test_shift_outside_interval_names_the_zero():
    B = P.sinc_product(20)
    with pytest.raises(ValidationError, match=r"7\.0"):
        P.shift_zeros(B, targets={7.0: 7.5}, delta=1.0)


# -- lf bounds ---------------------------------------------------------------

def test_lf_sine_threshold():
    rep = P.lf_bounds_check(P.sine_product(64), 1.0, np.linspace(0, 60, 1201))
    assert rep.m5_holds_beyond and rep.threshold <= 13


def test_lf_even_lattice_gaps():
    rep = P.lf_bounds_check(P.lattice_product(2.0, 1.0, 64), 0.01, np.linspace(0, 100, 1001), c=2.0)
    assert rep.m6_holds and rep.empirical_c >= 2.0


def test_lf_shifted_gaps():
    B = P.sine_product(200)
    lam = B.positive_zeros[B.positive_zeros > 1]
    shifted = P.shift_zeros(B, M=1.0, delta=1.0, shifts=np.exp(-2 * lam)).product
    rep = P.lf_bounds_check(shifted, 1.0, np.linspace(0, 100, 1001), c=1 - 2 * math.exp(-2))
    assert rep.m6_holds


# -- node system -------------------------------------------------------------

def test_lq7_first_quadruple():
    ns, G, rep = P.build_lq7(lambda k: Fraction(1, 10), 0)
    quad = (ns.a[0], ns.b[0], ns.c[0], ns.d[0])
    assert quad == (Fraction(5, 4), Fraction(27, 20), Fraction(33, 20), Fraction(7, 4))
    assert sum(quad) == 6


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(1, 100), min_size=1, max_size=30))
def test_lq7_constraints_for_any_rule(denoms):
    rule = lambda k: Fraction(1, 10) / denoms[k]
    ns = P.build_node_system(rule, len(denoms) - 1)
    assert ns.check() == []
    assert ns.set_A == [k for k, d in enumerate(denoms) if d == 1]


def test_lq7_rejects_large_gap():
    with pytest.raises(ValidationError):
        P.build_node_system(lambda k: 0.2, 3)


def test_lq7_derivative_ratio_positive():
    ns, G, rep = P.build_lq7(lambda k: Fraction(1, 10), 20)
    assert rep.min_ratio > 0 and math.isfinite(rep.min_ratio)
