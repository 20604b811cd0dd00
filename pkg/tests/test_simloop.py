import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bbcloop.analysis import step_response
from bbcloop.controller import PidGains, pidn_transfer, preset
from bbcloop.lti import tf, tustin_discretize
from bbcloop.plant import ConverterParams, OperatingMode, equilibrium
from bbcloop.simloop import (
    DifferenceEquation,
    Disturbance,
    ModePolicy,
    SimConfig,
    SimulationDiverged,
    realize_difference_equation,
    resolve_substeps,
    simulate_closed_loop,
    small_signal_consistency,
)

P = ConverterParams()
BOOST = preset("boost-pidn")
BUCK = preset("buck-pidn")


def _long_division(num, den, n):
    # power series of num(z)/den(z) in z^-1, by long division
    num = list(num)
    den = list(den)
    num = [0.0] * (len(den) - len(num)) + num
    rem = num + [0.0] * n
    out = []
    for k in range(n):
        q = rem[k] / den[0]
        out.append(q)
        for j, c in enumerate(den):
            if k + j < len(rem):
                rem[k + j] -= q * c
    return np.array(out)


def test_unity_and_delay():
    x = np.linspace(-1, 1, 9)
    assert np.array_equal(realize_difference_equation(tf([1.0], [1.0], ts=1.0)).run(x), x)
    delayed = realize_difference_equation(tf([1.0], [1.0, 0.0], ts=1.0)).run(x)
    assert np.array_equal(delayed, np.concatenate([[0.0], x[:-1]]))


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.floats(-2, 2), min_size=1, max_size=4),
    st.lists(st.floats(-0.9, 0.9), min_size=1, max_size=3),
    st.lists(st.floats(-1, 1), min_size=1, max_size=30),
)
def test_difference_equation_matches_long_division(num, poles, xs):
    den = np.poly(poles).tolist()
    if len(num) > len(den):
        num = num[: len(den)]
    g = tf(num, den, ts=1.0)
    y = realize_difference_equation(g).run(xs)
    h = _long_division(g.num.coeffs, g.den.coeffs, len(xs))
    expected = np.convolve(h, xs)[: len(xs)]
    assert np.max(np.abs(y - expected)) <= 1e-10


def test_controller_step_matches_step_response():
    g = tustin_discretize(pidn_transfer(BUCK), 0.1)
    ts = step_response(g, 3.0)
    y = realize_difference_equation(g).run(np.ones(len(ts)))
    assert np.allclose(y, ts.values, rtol=1e-12, atol=1e-12)


def test_difference_equation_validation():
    with pytest.raises(ValueError):
        realize_difference_equation(tf([1.0, 0.0], [1.0]))
    with pytest.raises(ValueError):
        realize_difference_equation(tf([1.0], [1.0, 1.0]))
    with pytest.raises(ValueError):
        DifferenceEquation((1.0, 0.0), (2.0, 0.0))


def test_preload_gives_steady_state():
    g = realize_difference_equation(tustin_discretize(pidn_transfer(BOOST), 5e-5))
    g.preload(0.0, 250.0)
    assert g.run(np.zeros(5)) == pytest.approx(np.full(5, 250.0))
    lowpass = realize_difference_equation(tf([0.5], [1.0, -0.5], ts=1.0))
    with pytest.raises(ValueError):
        lowpass.preload(1.0, 3.0)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(duty_min=0.9, duty_max=0.1)
    with pytest.raises(ValueError):
        SimConfig(ode_step=1e-4)
    with pytest.raises(ValueError):
        SimConfig(disturbances=[(0.0, "no_such_field", 1.0)])
    with pytest.raises(ValueError):
        resolve_substeps(P, SimConfig(mode="buck", ode_step=5e-5))


@pytest.fixture(scope="module")
def boost_trace():
    return simulate_closed_loop(P, BOOST, SimConfig(mode="boost", horizon=0.2))


def test_boost_regulates_to_bus_setpoint(boost_trace):
    w = boost_trace.window()
    v = np.mean(boost_trace.v_C[w])
    assert v == pytest.approx(24.0, rel=0.02)
    assert v / P.R_load == pytest.approx(2.4, rel=0.02)
    assert np.mean(boost_trace.duty[w]) == pytest.approx(0.5, abs=0.02)


def test_boost_power_balance(boost_trace):
    w = boost_trace.window()
    p_in = P.v_batt * np.mean(boost_trace.i_L[w])
    p_out = np.mean(boost_trace.v_C[w]) ** 2 / P.R_load
    assert p_in == pytest.approx(p_out, rel=0.02)


def test_buck_regulates_to_battery_setpoint():
    tr = simulate_closed_loop(P, BUCK, SimConfig(mode="buck", horizon=0.1))
    assert np.mean(tr.v_C[tr.window()]) == pytest.approx(12.0, rel=0.02)


@settings(max_examples=8, deadline=None)
@given(st.floats(18.0, 30.0), st.floats(0.0, 0.3), st.floats(0.6, 1.0))
def test_duty_stays_within_limits(setpoint, lo, hi):
    cfg = SimConfig(mode="boost", horizon=0.02, setpoint_bus=setpoint, duty_min=lo, duty_max=hi)
    tr = simulate_closed_loop(P, BOOST, cfg)
    assert np.all(tr.duty >= lo) and np.all(tr.duty <= hi)


def test_replay_is_bit_identical():
    cfg = SimConfig(mode="boost", horizon=0.02)
    a = simulate_closed_loop(P, BOOST, cfg)
    b = simulate_closed_loop(P, BOOST, cfg)
    for name in ("t", "i_L", "v_C", "duty", "v_error", "v_ea"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert a.mode == b.mode


@pytest.mark.parametrize("mode, gains", [("boost", BOOST), ("buck", BUCK)])
def test_halving_ode_step_converges(mode, gains):
    base = SimConfig(mode=mode, horizon=0.05)
    k = resolve_substeps(P, base)
    h = base.sample_time / k
    a = simulate_closed_loop(P, gains, base.with_(ode_step=h))
    b = simulate_closed_loop(P, gains, base.with_(ode_step=h / 2))
    w = a.window()
    assert np.max(np.abs(a.v_C[w] - b.v_C[w]) / np.abs(b.v_C[w])) < 1e-3


@pytest.mark.parametrize("mode", ["boost", "buck"])
def test_open_loop_reaches_analytic_equilibrium(mode):
    zero = PidGains(0.0, 0.0, 0.0, 100.0)
    cfg = SimConfig(mode=mode, horizon=0.15, duty_min=0.3, initial_state=(0.0, 0.0))
    tr = simulate_closed_loop(P, zero, cfg)
    i_eq, v_eq = equilibrium(P, mode, 0.3)
    assert np.all(tr.duty == 0.3)
    assert tr.v_C[-1] == pytest.approx(v_eq, rel=1e-3)
    assert tr.i_L[-1] == pytest.approx(i_eq, rel=1e-3)


def test_setpoint_disturbance_moves_output():
    cfg = SimConfig(mode="boost", horizon=0.3, disturbances=[Disturbance(0.15, "setpoint_bus", 26.0)])
    tr = simulate_closed_loop(P, BOOST, cfg)
    assert tr.v_C[-1] == pytest.approx(26.0, rel=0.02)


def test_auto_policy_switches_to_boost_on_sagging_bus():
    cfg = SimConfig(
        mode="buck",
        mode_policy=ModePolicy.AUTO,
        horizon=0.2,
        disturbances=[Disturbance(0.02, "v_bus", 20.0)],
    )
    tr = simulate_closed_loop(P, BUCK, cfg)
    assert tr.mode[0] == "buck" and tr.mode[-1] == "boost"
    assert np.mean(tr.v_C[tr.window()]) == pytest.approx(24.0, rel=0.02)


def test_divergence_is_reported_with_time():
    # the ode step is sized for the initial plant; a far stiffer capacitor mid-run breaks RK4
    cfg = SimConfig(mode="buck", horizon=0.01, disturbances=[Disturbance(0.002, "C_o", 1e-10)])
    with pytest.raises(SimulationDiverged) as info:
        simulate_closed_loop(P, BUCK, cfg)
    assert info.value.time > 0.002


def test_small_signal_consistency():
    cfg = SimConfig(mode="boost", horizon=0.1)
    assert small_signal_consistency(P, BOOST, cfg, 0.25).max_deviation <= 0.05
    assert small_signal_consistency(P, BOOST, cfg, 0.0).max_deviation == 0.0


def test_large_signal_step_departs_from_linear_model():
    cfg = SimConfig(mode="boost", horizon=0.1)
    assert small_signal_consistency(P, BOOST, cfg, 12.0).max_deviation > 0.05
