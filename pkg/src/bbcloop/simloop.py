"""Nonlinear averaged closed-loop simulation with a sampled PIDN controller.

The plant ODEs are integrated with fixed-step RK4; the controller is the
Tustin image of the continuous PIDN, executed as a transposed direct-form II
difference equation once per sample period with the duty held in between.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from .analysis.timedomain import step_response
from .controller import PidGains, pidn_transfer, preset
from .lti import (
    TransferFunction,
    properness_check,
    ss_to_tf,
    tf_feedback,
    tf_series,
    tustin_discretize,
    zoh_discretize,
)
from .plant import (
    ConverterParams,
    OperatingMode,
    duty_for_output,
    duty_linearization,
    equilibrium,
    state_space,
)

# Modulator gain (duty per volt of controller output).  The boost duty-to-voltage
# path has a right-half-plane zero near 2.5 krad/s, which bounds the usable
# loop gain; the buck value is d0/V_bus so the linearized loop equals the
# voltage-input plant model.
DEFAULT_PWM_GAIN = {OperatingMode.BOOST: 2e-3, OperatingMode.BUCK: 1.0 / 48.0}
MAX_ODE_STEP_PRODUCT = 0.1


class SimulationDiverged(ArithmeticError):
    def __init__(self, time: float, state):
        super().__init__(f"simulation diverged at t = {time:.6g} s (state {state})")
        self.time = time
        self.state = state


@dataclass
class DifferenceEquation:
    """y[k] = sum b_i x[k-i] - sum a_i y[k-i] in transposed direct-form II."""

    b: tuple[float, ...]
    a: tuple[float, ...]  # a[0] == 1
    registers: list[float] = field(default_factory=list)

    def __post_init__(self):
        if len(self.b) != len(self.a):
            raise ValueError("b and a must be padded to the same length")
        if self.a[0] != 1.0:
            raise ValueError("feedback coefficients must be monic")
        if not self.registers:
            self.registers = [0.0] * (len(self.a) - 1)
        if len(self.registers) != len(self.a) - 1:
            raise ValueError("register count must equal the filter order")

    @property
    def order(self) -> int:
        return len(self.a) - 1

    def output(self, x: float) -> float:
        """Current output without advancing the registers."""
        return self.b[0] * x + (self.registers[0] if self.registers else 0.0)

    def commit(self, x: float, y: float) -> None:
        z, b, a = self.registers, self.b, self.a
        n = len(z)
        for i in range(n - 1):
            z[i] = b[i + 1] * x + z[i + 1] - a[i + 1] * y
        if n:
            z[n - 1] = b[n] * x - a[n] * y

    def step(self, x: float) -> float:
        y = self.output(x)
        self.commit(x, y)
        return y

    def run(self, xs: Sequence[float]) -> np.ndarray:
        return np.array([self.step(float(x)) for x in xs])

    def reset(self) -> None:
        self.registers = [0.0] * self.order

    def preload(self, x: float, y: float) -> None:
        """Registers of the steady state with constant input x and output y."""
        n = self.order
        z = [0.0] * n
        for i in range(n - 1, -1, -1):
            nxt = z[i + 1] if i + 1 < n else 0.0
            z[i] = self.b[i + 1] * x + nxt - self.a[i + 1] * y
        if n and abs(self.b[0] * x + z[0] - y) > 1e-9 * max(1.0, abs(y)):
            raise ValueError("input and output are not a steady state of this filter")
        self.registers = z


def realize_difference_equation(g: TransferFunction) -> DifferenceEquation:
    if not g.is_discrete:
        raise ValueError("difference equations need a discrete transfer function")
    if not properness_check(g):
        raise ValueError("improper transfer function is not causal")
    a0 = g.den.leading
    n = g.den.degree
    b = [0.0] * (n + 1 - len(g.num.coeffs)) + [c / a0 for c in g.num.coeffs]
    a = [1.0] + [c / a0 for c in g.den.coeffs[1:]]
    return DifferenceEquation(tuple(b), tuple(a))


class ModePolicy(str, enum.Enum):
    FIXED = "fixed"
    AUTO = "auto"


@dataclass(frozen=True)
class Disturbance:
    time: float
    parameter: str  # a ConverterParams field, "setpoint_bus" or "setpoint_batt"
    value: float


_SETPOINTS = ("setpoint_bus", "setpoint_batt")


@dataclass(frozen=True)
class SimConfig:
    mode: OperatingMode = OperatingMode.BOOST
    sample_time: float = 5e-5
    ode_step: float | None = None  # None: largest divisor of sample_time meeting the stiffness bound
    horizon: float = 0.1
    setpoint_bus: float = 24.0
    setpoint_batt: float = 12.0
    duty_min: float = 0.05
    duty_max: float = 0.95
    mode_policy: ModePolicy = ModePolicy.FIXED
    hysteresis: float = 0.5
    initial_state: tuple[float, float] | None = None  # None: equilibrium under duty_min
    start_at_setpoint: bool = False  # equilibrium start with preloaded controller
    disturbances: tuple[Disturbance, ...] = ()
    pwm_gain: float | None = None  # None: per-mode default
    other_mode_gains: PidGains | None = None  # auto policy; None: preset PIDN gains

    def __post_init__(self):
        object.__setattr__(self, "mode", OperatingMode(self.mode))
        object.__setattr__(self, "mode_policy", ModePolicy(self.mode_policy))
        object.__setattr__(
            self,
            "disturbances",
            tuple(d if isinstance(d, Disturbance) else Disturbance(*d) for d in self.disturbances),
        )
        if not self.sample_time > 0 or not self.horizon > 0:
            raise ValueError("sample_time and horizon must be positive")
        if not 0.0 <= self.duty_min < self.duty_max <= 1.0:
            raise ValueError("need 0 <= duty_min < duty_max <= 1")
        if self.hysteresis < 0:
            raise ValueError("hysteresis must be non-negative")
        if self.ode_step is not None and not 0 < self.ode_step <= self.sample_time * (1 + 1e-12):
            raise ValueError("ode_step must lie in (0, sample_time]")
        names = {f.name for f in fields(ConverterParams)} | set(_SETPOINTS)
        for d in self.disturbances:
            if d.parameter not in names:
                raise ValueError(f"unknown disturbance parameter {d.parameter!r}")

    def with_(self, **changes) -> SimConfig:
        return replace(self, **changes)

    def pwm_for(self, mode: OperatingMode) -> float:
        return DEFAULT_PWM_GAIN[mode] if self.pwm_gain is None else self.pwm_gain

    def setpoint_for(self, mode: OperatingMode) -> float:
        return self.setpoint_bus if mode is OperatingMode.BOOST else self.setpoint_batt


def fastest_plant_rate(p: ConverterParams) -> float:
    return max(
        float(np.max(np.abs(np.linalg.eigvals(state_space(p, m).A)))) for m in OperatingMode
    )


def resolve_substeps(p: ConverterParams, cfg: SimConfig) -> int:
    """RK4 substeps per controller sample."""
    rate = fastest_plant_rate(p)
    if cfg.ode_step is None:
        return max(1, math.ceil(cfg.sample_time * rate / MAX_ODE_STEP_PRODUCT - 1e-9))
    k = round(cfg.sample_time / cfg.ode_step)
    if abs(k * cfg.ode_step - cfg.sample_time) > 1e-9 * cfg.sample_time:
        raise ValueError("sample_time must be an integer multiple of ode_step")
    if cfg.ode_step * rate > MAX_ODE_STEP_PRODUCT * (1 + 1e-9):
        raise ValueError(
            f"ode_step {cfg.ode_step:g} s too large for the fastest plant mode ({rate:.6g} rad/s)"
        )
    return k


@dataclass(frozen=True, eq=False)
class SimTrace:
    t: np.ndarray
    i_L: np.ndarray
    v_C: np.ndarray
    duty: np.ndarray
    mode: tuple[str, ...]
    v_error: np.ndarray
    v_ea: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def window(self, fraction: float = 0.1) -> slice:
        """Slice of the final ``fraction`` of the samples."""
        n = len(self.t)
        return slice(n - max(1, int(round(n * fraction))), n)


def _rk4(f, i, v, d, h, k):
    for _ in range(k):
        a1, b1 = f(i, v, d)
        a2, b2 = f(i + 0.5 * h * a1, v + 0.5 * h * b1, d)
        a3, b3 = f(i + 0.5 * h * a2, v + 0.5 * h * b2, d)
        a4, b4 = f(i + h * a3, v + h * b3, d)
        i += h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        v += h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
    return i, v


def _dynamics(p: ConverterParams, mode: OperatingMode):
    # same equations as plant.nonlinear_derivatives, without per-call validation
    if mode is OperatingMode.BOOST:
        L, C, R, vb = p.L, p.C_bus, p.R_load, p.v_batt

        def f(i, v, d):
            u = 1.0 - d
            return (vb - u * v) / L, (u * i - v / R) / C

    else:
        L, C, R, vs = p.L, p.C_o, p.R_batt, p.v_bus

        def f(i, v, d):
            return (d * vs - v) / L, (i - v / R) / C

    return f


def controller_filter(gains: PidGains, sample_time: float) -> DifferenceEquation:
    return realize_difference_equation(tustin_discretize(pidn_transfer(gains), sample_time))


def _gains_for_mode(mode, first_mode, gains, cfg):
    if mode is first_mode:
        return gains
    return cfg.other_mode_gains or preset(f"{mode.value}-pidn")


def simulate_closed_loop(p: ConverterParams, gains: PidGains, cfg: SimConfig) -> SimTrace:
    """Run the sampled loop from t = 0 to cfg.horizon.

    Each sample: measure v_C, form error = setpoint - v_C, run the controller,
    clamp duty = pwm_gain * v_ea into [duty_min, duty_max] and hold it over
    the period.  On a clamped sample the controller registers are not
    advanced if the error would drive the duty further past the limit.

    Under the auto policy the converter enters boost when the bus falls
    below setpoint_bus - hysteresis and buck when it rises above
    setpoint_bus + hysteresis.  The bus is the boost output capacitor, or the
    external source ``v_bus`` when that is higher or the converter is in buck.
    """
    ts = cfg.sample_time
    k_sub = resolve_substeps(p, cfg)
    h = ts / k_sub
    n = int(math.floor(cfg.horizon / ts + 1e-9)) + 1
    mode = cfg.mode
    first_mode = mode
    setpoints = {"setpoint_bus": cfg.setpoint_bus, "setpoint_batt": cfg.setpoint_batt}
    pending = sorted(cfg.disturbances, key=lambda d: d.time)

    ctrl = controller_filter(gains, ts)
    pwm = cfg.pwm_for(mode)
    windup_sign = math.copysign(1.0, gains.ki * pwm)
    if cfg.start_at_setpoint:
        d0 = duty_for_output(p, mode, cfg.setpoint_for(mode))
        i_l, v_c = equilibrium(p, mode, d0)
        ctrl.preload(0.0, d0 / pwm)
    elif cfg.initial_state is not None:
        i_l, v_c = map(float, cfg.initial_state)
    else:
        i_l, v_c = equilibrium(p, mode, cfg.duty_min)
    f = _dynamics(p, mode)

    out_t = np.empty(n)
    out_i = np.empty(n)
    out_v = np.empty(n)
    out_d = np.empty(n)
    out_e = np.empty(n)
    out_ea = np.empty(n)
    out_mode: list[str] = []
    for k in range(n):
        t = k * ts
        changed = False
        while pending and pending[0].time <= t + 1e-12 * ts:
            d = pending.pop(0)
            if d.parameter in setpoints:
                setpoints[d.parameter] = d.value
            else:
                p = p.with_(**{d.parameter: d.value})
                changed = True
        if changed:
            f = _dynamics(p, mode)

        if cfg.mode_policy is ModePolicy.AUTO:
            bus = max(v_c, p.v_bus) if mode is OperatingMode.BOOST else p.v_bus
            sp = setpoints["setpoint_bus"]
            target = mode
            if bus < sp - cfg.hysteresis:
                target = OperatingMode.BOOST
            elif bus > sp + cfg.hysteresis:
                target = OperatingMode.BUCK
            if target is not mode:
                mode = target
                i_l = -i_l  # inductor current reverses direction
                v_c = bus if mode is OperatingMode.BOOST else p.v_batt
                active = _gains_for_mode(mode, first_mode, gains, cfg)
                ctrl = controller_filter(active, ts)
                pwm = cfg.pwm_for(mode)
                windup_sign = math.copysign(1.0, active.ki * pwm)
                f = _dynamics(p, mode)

        sp = setpoints["setpoint_bus" if mode is OperatingMode.BOOST else "setpoint_batt"]
        err = sp - v_c
        v_ea = ctrl.output(err)
        duty = pwm * v_ea
        # conditional integration: registers hold while the error pushes further into the limit
        push = err * windup_sign
        if duty > cfg.duty_max:
            duty = cfg.duty_max
            if push <= 0:
                ctrl.commit(err, v_ea)
        elif duty < cfg.duty_min:
            duty = cfg.duty_min
            if push >= 0:
                ctrl.commit(err, v_ea)
        else:
            ctrl.commit(err, v_ea)

        out_t[k] = t
        out_i[k] = i_l
        out_v[k] = v_c
        out_d[k] = duty
        out_e[k] = err
        out_ea[k] = v_ea
        out_mode.append(mode.value)

        i_l, v_c = _rk4(f, i_l, v_c, duty, h, k_sub)
        if not (math.isfinite(i_l) and math.isfinite(v_c)):
            raise SimulationDiverged(t + ts, (i_l, v_c))
    return SimTrace(out_t, out_i, out_v, out_d, tuple(out_mode), out_e, out_ea)


def linear_duty_plant(p: ConverterParams, mode: OperatingMode | str, duty: float, ts: float) -> TransferFunction:
    """Sampled (ZOH) small-signal transfer from duty to capacitor voltage."""
    return ss_to_tf(zoh_discretize(duty_linearization(p, mode, duty), ts))


def linear_closed_loop(p: ConverterParams, gains: PidGains, cfg: SimConfig) -> TransferFunction:
    mode = cfg.mode
    d0 = duty_for_output(p, mode, cfg.setpoint_for(mode))
    plant = linear_duty_plant(p, mode, d0, cfg.sample_time)
    ctrl = tustin_discretize(pidn_transfer(gains), cfg.sample_time)
    return tf_feedback(tf_series(ctrl, plant) * cfg.pwm_for(mode), 1.0)


@dataclass(frozen=True, eq=False)
class ConsistencyReport:
    perturbation: float
    max_deviation: float  # max |nonlinear - linear| / |perturbation|
    t: np.ndarray
    nonlinear: np.ndarray  # deviation of v_C from the operating point
    linear: np.ndarray


def small_signal_consistency(
    p: ConverterParams, gains: PidGains, cfg: SimConfig, perturbation: float
) -> ConsistencyReport:
    """Setpoint step of ``perturbation`` volts from the regulated equilibrium,
    nonlinear trace against the linearized sampled loop."""
    mode = cfg.mode
    sp0 = cfg.setpoint_for(mode)
    key = "setpoint_bus" if mode is OperatingMode.BOOST else "setpoint_batt"
    run = cfg.with_(
        start_at_setpoint=True,
        mode_policy=ModePolicy.FIXED,
        disturbances=(Disturbance(0.0, key, sp0 + perturbation),),
        duty_min=0.0,
        duty_max=1.0,
    )
    trace = simulate_closed_loop(p, gains, run)
    nonlinear = trace.v_C - sp0
    lin = step_response(linear_closed_loop(p, gains, cfg), (len(trace) - 1) * cfg.sample_time)
    linear = perturbation * lin.values[: len(trace)]
    if perturbation == 0:
        dev = float(np.max(np.abs(nonlinear))) and math.inf
    else:
        dev = float(np.max(np.abs(nonlinear - linear)) / abs(perturbation))
    return ConsistencyReport(perturbation, dev, trace.t, nonlinear, linear)
