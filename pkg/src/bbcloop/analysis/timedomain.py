"""Unit-step simulation and transient metrics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.signal

from ..lti import TransferFunction, properness_check, realize, stable_poles, zoh_discretize

log = logging.getLogger(__name__)

_BLOCK = 1024


class HorizonTooShortError(ValueError):
    """The response has not settled inside the simulated window."""


@dataclass(frozen=True, eq=False)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    diverging: bool = False

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if t.shape != y.shape or t.ndim != 1:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if len(t) > 1:
            dt = np.diff(t)
            if np.any(dt <= 0):
                raise ValueError("times must be strictly increasing")
            if np.max(np.abs(dt - dt[0])) > 1e-12 * max(1.0, abs(t[-1])):
                raise ValueError("times must lie on a uniform grid")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", y)

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0])

    def __len__(self) -> int:
        return len(self.times)


def _zoh_step(model, n_steps: int) -> np.ndarray:
    """States x_0..x_n of x_{k+1} = Ad x_k + Bd under a unit input, in blocks."""
    Ad, Bd = model.A, model.B[:, 0]
    n = Ad.shape[0]
    m = min(_BLOCK, n_steps + 1)
    phi = np.empty((m, n, n))
    gam = np.empty((m, n))
    phi[0] = np.eye(n)
    gam[0] = 0.0
    for j in range(1, m):
        phi[j] = Ad @ phi[j - 1]
        gam[j] = Ad @ gam[j - 1] + Bd
    phi_m = Ad @ phi[-1]
    gam_m = Ad @ gam[-1] + Bd
    out = np.empty((n_steps + 1, n))
    x = np.zeros(n)
    k = 0
    while k <= n_steps:
        take = min(m, n_steps + 1 - k)
        out[k : k + take] = np.einsum("jab,b->ja", phi[:take], x) + gam[:take]
        x = phi_m @ x + gam_m
        k += take
    return out


# e-folds of the slowest mode kept in an automatic horizon; leaves a 6e-6 residue
HORIZON_EFOLDS = 12.0


def suggested_horizon(g: TransferFunction) -> float:
    """Window long enough for the slowest stable mode to decay below 1e-5."""
    poles = g.poles()
    if not poles:
        return 1.0 if g.ts is None else 100 * g.ts
    if g.is_discrete:
        r = max(abs(p) for p in poles)
        if not 0 < r < 1:
            return 1000 * g.ts
        return max(HORIZON_EFOLDS / -math.log(r), 100.0) * g.ts
    sigma = min(abs(p.real) for p in poles)
    if sigma == 0 or not stable_poles(g):
        return 1000.0 / max(abs(p) for p in poles)
    return HORIZON_EFOLDS / sigma


def step_response(g: TransferFunction, horizon: float | None = None) -> TimeSeries:
    """Unit-step response over [0, horizon]; ``None`` picks a settling window.

    Continuous systems: exact ZOH propagation of a balanced realization at
    step h = min(0.1/|p_max|, horizon/2000).  Discrete systems: difference
    equation at the native sample time.
    """
    if not properness_check(g):
        raise ValueError("step response of an improper transfer function is unbounded")
    if horizon is None:
        horizon = suggested_horizon(g)
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    diverging = not stable_poles(g) if g.den.degree else False
    if diverging:
        log.warning("step response of an unstable system: output diverges")

    if g.is_discrete:
        n = int(math.floor(horizon / g.ts + 1e-9))
        times = np.arange(n + 1) * g.ts
        b = np.concatenate([np.zeros(g.den.degree - g.num.degree), g.num.as_array()])
        y = scipy.signal.lfilter(b, g.den.as_array(), np.ones(n + 1))
        return TimeSeries(times, y, diverging)

    if g.den.degree == 0:
        times = np.linspace(0.0, horizon, 2001)
        return TimeSeries(times, np.full_like(times, g.num.leading / g.den.leading))

    fastest = max(abs(p) for p in g.poles())
    h = horizon / 2000
    if fastest > 0:
        h = min(h, 0.1 / fastest)
    n_steps = int(math.ceil(horizon / h - 1e-9))
    h = horizon / n_steps
    model = realize(g)
    x = _zoh_step(zoh_discretize(model, h), n_steps)
    y = x @ model.C[0] + model.D[0, 0]
    times = np.arange(n_steps + 1) * h
    return TimeSeries(times, y, diverging)


@dataclass(frozen=True)
class StepMetrics:
    peak_amplitude: float
    overshoot_pct: float
    rise_time: float
    settling_time: float
    final_value: float


def _first_crossing(t: np.ndarray, y: np.ndarray, level: float) -> float:
    idx = np.flatnonzero(y >= level)
    if len(idx) == 0:
        return math.nan
    i = idx[0]
    if i == 0:
        return float(t[0])
    y0, y1 = y[i - 1], y[i]
    return float(t[i - 1] + (level - y0) / (y1 - y0) * (t[i] - t[i - 1]))


def step_metrics(
    ts: TimeSeries,
    settle_band: float = 0.02,
    rise_band: tuple[float, float] = (0.1, 0.9),
    settle_reference: str = "peak_error",
) -> StepMetrics:
    """Peak, overshoot, 10-90 % rise and 2 % settling of a step response.

    ``settle_reference="peak_error"`` sizes the settling band as a fraction of
    the largest deviation from the final value (the MATLAB ``stepinfo``
    convention); ``"final"`` sizes it as a fraction of the final value.  The two
    agree unless the response undershoots below zero or overshoots by more
    than 100 %.
    """
    t, y = ts.times, ts.values
    n = len(y)
    if n < 50:
        raise HorizonTooShortError("too few samples to extract metrics")
    final = float(np.mean(y[-max(1, n // 50) :]))
    if final == 0.0 or not math.isfinite(final):
        raise HorizonTooShortError("response has no usable final value")
    tail = y[-max(2, n // 10) :]
    if (tail.max() - tail.min()) >= 1e-3 * abs(final):
        raise HorizonTooShortError("horizon too short: response still moving over the last 10 %")

    sgn = math.copysign(1.0, final)
    ys = sgn * y
    af = abs(final)
    peak = float(y[np.argmax(np.abs(y))])
    overshoot = max(0.0, 100.0 * (ys.max() - af) / af)
    lo, hi = rise_band
    rise = _first_crossing(t, ys, hi * af) - _first_crossing(t, ys, lo * af)

    err = np.abs(y - final)
    if settle_reference == "peak_error":
        ref = float(err.max())
    elif settle_reference == "final":
        ref = af
    else:
        raise ValueError(f"unknown settle_reference {settle_reference!r}")
    thr = settle_band * ref
    out = np.flatnonzero(err > thr)
    if len(out) == 0:
        settling = 0.0
    else:
        i = out[-1]
        if i == n - 1:
            raise HorizonTooShortError("response does not settle inside the horizon")
        e0, e1 = err[i], err[i + 1]
        settling = float(t[i] + (e0 - thr) / (e0 - e1) * (t[i + 1] - t[i]))
    return StepMetrics(peak, overshoot, rise, settling, final)
