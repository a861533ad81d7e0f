import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from fraclab import special
from fraclab.special import Exponents

mpmath.mp.dps = 40


@pytest.mark.parametrize("x, expected", [(1.0, 1.0), (0.5, math.sqrt(math.pi)), (5.0, 24.0)])
def test_gamma_examples(x, expected):
    assert special.gamma_fn(x) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("bad", [0.0, -1.0, -0.5, float("nan")])
def test_gamma_domain(bad):
    with pytest.raises(ValueError):
        special.gamma_fn(bad)


def test_gamma_against_high_precision(rng):
    xs = np.r_[rng.uniform(1e-3, 50, 400), np.linspace(0.01, 50, 200), 50.0]
    worst = max(abs(special.gamma_fn(x) / float(mpmath.gamma(x)) - 1) for x in xs)
    assert worst <= 1e-13


@pytest.mark.parametrize("a, b, expected", [(0.5, 0.5, math.pi), (1.0, 1.0, 1.0)])
def test_beta_examples(a, b, expected):
    assert special.beta_fn(a, b) == pytest.approx(expected, rel=1e-15)


def test_beta_against_integral_oracle():
    a, b = 0.5, 0.25
    f = lambda t: (1 + t) ** (-a - b)
    head = integrate.quad(f, 0, 1, weight="alg", wvar=(a - 1, 0), epsabs=0, epsrel=1e-12)[0]
    # t = 1/u on the tail: u^{b-1} (1 + u)^{-a-b}
    tail = integrate.quad(f, 0, 1, weight="alg", wvar=(b - 1, 0), epsabs=0, epsrel=1e-12)[0]
    val = head + tail
    assert special.beta_fn(a, b) == pytest.approx(val, rel=1e-9)


def test_beta_gamma_identity_random_pairs(rng):
    pairs = rng.uniform(0.1, 20, (1000, 2))
    for a, b in pairs:
        ref = math.gamma(a) * math.gamma(b) / math.gamma(a + b)
        assert abs(special.beta_fn(a, b) - ref) / ref <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 200), st.floats(0.1, 200))
def test_beta_matches_high_precision(a, b):
    ref = float(mpmath.beta(a, b))
    assert special.beta_fn(a, b) == pytest.approx(ref, rel=1e-11)


def test_beta_large_arguments_do_not_overflow():
    val = special.beta_fn(150.0, 90.0)
    assert val == pytest.approx(float(mpmath.beta(150, 90)), rel=1e-11)
    assert val > 0


@pytest.mark.parametrize("a, b", [(0, 1), (1, -2)])
def test_beta_domain(a, b):
    with pytest.raises(ValueError):
        special.beta_fn(a, b)


def test_sphere_measure():
    assert special.sphere_measure(1) == pytest.approx(2.0)
    assert special.sphere_measure(2) == pytest.approx(2 * math.pi)
    assert special.sphere_measure(3) == pytest.approx(4 * math.pi)


def test_gamma_shift_identity(rng):
    for s in rng.uniform(1e-3, 1 - 1e-3, 200):
        assert abs(math.gamma(1 + s) ** 2 - s ** 2 * math.gamma(s) ** 2) <= 1e-13 * math.gamma(1 + s) ** 2


def _amplitude_oracle(N, s):
    N, s = mpmath.mpf(N), mpmath.mpf(s)
    d = N - 2 * s
    return 2 ** (d / 2) * (mpmath.gamma((N + 2 * s) / 2) / mpmath.gamma(d / 2)) ** (d / (4 * s))


@pytest.mark.parametrize("N, s", [(1, 0.25), (1, 0.4), (2, 0.5), (3, 0.75)])
def test_amplitude_against_high_precision(N, s):
    assert special.bubble_amplitude(N, s) == pytest.approx(float(_amplitude_oracle(N, s)), rel=1e-13)


def test_amplitude_frozen_value():
    # 2^{1/4} (Gamma(3/4)/Gamma(1/4))^{1/2}, frozen from the 40-digit oracle
    assert special.bubble_amplitude(1, 0.25) == pytest.approx(0.69136733903629333, rel=1e-14)


def test_constants_invariants():
    e = Exponents.critical(2, 0.5, 4.0)
    c = special.closed_form_constants(e)
    assert min(c.amplitude, c.fundamental_coeff, c.width, c.boundary_coeff) > 0
    assert c.width == pytest.approx(c.amplitude ** (4 / e.decay))
    ref = c.sphere_area * c.amplitude ** e.critical_power / 2 * math.gamma(1) * math.gamma(0.5) / math.gamma(1.5)
    assert c.boundary_coeff == pytest.approx(ref, rel=1e-14)


@pytest.mark.parametrize("N, s", [(1, 0.25), (2, 0.5), (3, 0.75)])
def test_boundary_coeff_is_integral_of_profile_power(N, s):
    e = Exponents.critical(N, s, 10.0)
    c = special.closed_form_constants(e)
    om = special.sphere_measure(N)
    f = lambda r: r ** (N - 1) * (1 + r * r / c.width) ** (-e.decay * e.p / 2)
    # s = 1/4 in 1D has an r^{-3/2} tail: integrate the tail in t = 1/r
    head = integrate.quad(f, 0, 1, epsabs=0, epsrel=1e-12)[0]
    tail = integrate.quad(lambda t: f(1 / t) / t ** 2, 0, 1, epsabs=0, epsrel=1e-12, limit=400)[0]
    assert om * (head + tail) == pytest.approx(c.boundary_coeff, rel=1e-9)


def test_fundamental_coefficient_values():
    # a_{1,1/4} = Gamma(1/4)/(sqrt(2 pi) Gamma(1/4)) = 1/sqrt(2 pi); a_{2,1/2} = 1/(2 pi)
    assert special.fundamental_coefficient(1, 0.25) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-14)
    assert special.fundamental_coefficient(2, 0.5) == pytest.approx(1 / (2 * math.pi), rel=1e-14)


@pytest.mark.parametrize("N, s, q", [(1, 0.25, 5), (1, 0.4, 9), (2, 0.5, 4), (3, 0.75, 2.5)])
def test_blowup_forms_agree(N, s, q):
    a, b, _ = special.blowup_numerators(N, s, q, 0.37)
    assert abs(a - b) / abs(b) <= 1e-10


@pytest.mark.parametrize("N, s, q", [(1, 0.25, 5), (2, 0.5, 4), (2, 0.5, 7.5), (3, 0.75, 6)])
def test_blowup_limit_forms_agree(N, s, q):
    e = Exponents.critical(N, s, q)
    a = special.blowup_limit(e, 0.37)
    b = special.blowup_limit_from_profile(e, 0.37)
    assert a > 0 and abs(a - b) / b <= 1e-10


def test_blowup_frozen_value(crit_1d):
    # R_{1,1/4,0} on (-1, 1) is 2 (kappa 2^s / s)^2; frozen from an independent script
    assert special.blowup_limit(crit_1d, 0.1309515611632357) == pytest.approx(2.027934720201853, rel=1e-12)


def test_blowup_linear_in_r(crit_1d):
    assert special.blowup_limit(crit_1d, 0.0) == 0.0
    assert special.blowup_limit(crit_1d, 2.0) == pytest.approx(2 * special.blowup_limit(crit_1d, 1.0))


def test_blowup_needs_critical_exponent():
    with pytest.raises(ValueError):
        special.blowup_limit(Exponents(1, 0.25, 4.0, 5.0), 1.0)


def test_blowup_denominator_sign_error():
    e = Exponents.critical(3, 0.75, 6.0)
    object.__setattr__(e, "q", 2.9)  # bypass validation: q(N-2s) = 4.35 < N+2s = 4.5
    with pytest.raises(ValueError):
        special.blowup_limit(e, 1.0)
    assert special.blowup_numerators(3, 0.75, 2.9, 1.0)[2] < 0


def test_exponents_validation():
    with pytest.raises(ValueError):
        Exponents(1, 0.25, 3.0, 3.0)
    with pytest.raises(ValueError):
        Exponents(1, 0.25, 2.0, 5.0)
    with pytest.raises(ValueError):
        Exponents(1, 0.6, 3.0, 5.0)
    with pytest.raises(ValueError):
        Exponents(1, 1.0, 3.0, 5.0)
    e = Exponents.critical(1, 0.25, 5)
    assert e.is_critical and e.p == pytest.approx(3.0) and e.critical_power == pytest.approx(4.0)
    assert math.isnan(e.l_exponent)
    sup = Exponents(1, 0.25, 5.0, 7.0)
    assert not sup.is_critical
    assert sup.l_exponent == pytest.approx((0.5 * 8 - 4) / (0.5 * 6 - 4))


def test_critical_mass_is_not_one():
    m = special.bubble_critical_mass(1, 0.25)
    assert m == pytest.approx(0.71777001104612981, rel=1e-13)
    assert special.sobolev_constant(1, 0.25) == pytest.approx(m ** 0.5, rel=1e-15)


def test_profile_power_integral_divergence():
    with pytest.raises(ValueError):
        special.limit_profile_power_integral(1, 0.25, 2.0)
