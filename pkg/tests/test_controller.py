import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bbcloop.controller import (
    DEFAULT_N_MULTIPLIER,
    ControllerKind,
    PidGains,
    gains_for,
    ideal_pid_transfer,
    pidn_limit_property_check,
    pidn_terms,
    pidn_transfer,
    preset,
)
from bbcloop.lti import properness_check


def _mp_coeffs(g):
    mpmath.mp.dps = 60
    kp, ki, kd, n = (mpmath.mpf(x) for x in (g.kp, g.ki, g.kd, g.n))
    return [kp + kd * n, kp * n + ki, ki * n]


@pytest.mark.parametrize("name", ["boost-pid", "boost-pidn", "buck-pid", "buck-pidn"])
def test_coefficients_match_high_precision_oracle(name):
    g = preset(name)
    c = pidn_transfer(g)
    for got, want in zip(c.num.coeffs, _mp_coeffs(g)):
        assert abs(got - float(want)) <= 1e-9 * abs(float(want))
    assert c.den.coeffs == (1.0, g.n, 0.0)


def test_boost_pidn_coefficients():
    # 74.05 s^2 + 7.977e4 s + 1.77e7 over s^2 + 1.703e4 s
    c = pidn_transfer(preset("boost-pidn"))
    assert c.num.coeffs == pytest.approx((74.05, 7.977e4, 1.77e7), rel=1e-3)


def test_buck_pidn_leading_coefficient_cancels():
    c = pidn_transfer(preset("buck-pidn"))
    assert c.num.coeffs[0] == pytest.approx(3.7928e-9, rel=1e-4)
    assert c.num.coeffs[1:] == pytest.approx((3364.0, 7.169e5), rel=1e-3)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(0.01, 10),
    st.floats(0.1, 1e4),
    st.floats(-1e-2, 1e-2),
    st.floats(10, 1e6),
    st.floats(1e-2, 1e6),
)
def test_polynomial_form_equals_sum_of_terms(kp, ki, kd, n, w):
    g = PidGains(kp, ki, kd, n)
    s = 1j * w
    lhs = pidn_transfer(g)(s)
    rhs = pidn_terms(g, s)
    assert abs(lhs - rhs) <= 1e-9 * max(abs(rhs), abs(kp) + abs(ki / s) + abs(kd * n))


def test_ideal_pid_is_improper_and_pidn_proper():
    g = preset("boost-pidn")
    assert not properness_check(ideal_pid_transfer(g))
    assert properness_check(pidn_transfer(g))


def test_large_n_approaches_ideal_pid():
    g = preset("boost-pidn")
    check = pidn_limit_property_check(g, g.n * DEFAULT_N_MULTIPLIER["boost"])
    assert check.passed
    with pytest.raises(ValueError):
        pidn_limit_property_check(g, g.n)


def test_pid_preset_is_pidn_with_scaled_n():
    tuned = preset("boost-pidn")
    big = gains_for(ControllerKind.PID_LARGE_N, tuned, DEFAULT_N_MULTIPLIER["boost"])
    # the published constant is 100x the tuned value up to its last digits
    assert big.n == pytest.approx(preset("boost-pid").n, rel=1e-5)
    assert gains_for(ControllerKind.PIDN, tuned, 100.0) is tuned
    with pytest.raises(ValueError):
        gains_for(ControllerKind.PID_LARGE_N, tuned, 0.5)


def test_gain_validation():
    with pytest.raises(ValueError):
        PidGains(1.0, 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        PidGains(float("inf"), 1.0, 1.0, 1.0)
    with pytest.raises(KeyError):
        preset("unknown")


def test_integrator_pole_at_origin():
    c = pidn_transfer(preset("buck-pidn"))
    assert np.isclose(min(abs(p) for p in c.poles()), 0.0)
