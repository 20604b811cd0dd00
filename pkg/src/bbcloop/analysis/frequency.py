"""Frequency sweeps and gain/phase/delay margins.

Every gain crossover (|L| = 1) and phase crossover (angle L = -180 deg mod 360)
is reported, not only the first one: closed-loop responses of the digital
loops cross unity gain more than once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..lti import TransferFunction, to_s_plane

POINTS_PER_DECADE = 1000
NYQUIST_FRACTION = 0.999
REL_FREQ_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class FrequencyResponse:
    omega: np.ndarray
    mag_db: np.ndarray
    phase_deg: np.ndarray

    def rows(self) -> list[tuple[float, float, float]]:
        return list(zip(self.omega.tolist(), self.mag_db.tolist(), self.phase_deg.tolist()))


def _check_nyquist(g: TransferFunction, omega: np.ndarray) -> None:
    if g.is_discrete and np.any(omega >= math.pi / g.ts):
        raise ValueError(f"frequencies must stay below Nyquist (pi/Ts = {math.pi / g.ts:g} rad/s)")


def frequency_response(g: TransferFunction, omegas) -> FrequencyResponse:
    omega = np.asarray(omegas, dtype=float)
    if omega.ndim != 1 or len(omega) == 0:
        raise ValueError("need a non-empty 1-D frequency grid")
    if np.any(np.diff(omega) <= 0):
        raise ValueError("frequency grid must be strictly increasing")
    _check_nyquist(g, omega)
    h = g.response(omega)
    with np.errstate(divide="ignore"):
        mag = 20.0 * np.log10(np.abs(h))
    phase = np.degrees(np.unwrap(np.angle(h)))
    return FrequencyResponse(omega, mag, phase)


def characteristic_frequencies(g: TransferFunction) -> list[float]:
    out = []
    for r in list(g.poles()) + list(g.zeros()):
        w = abs(to_s_plane(r, g.ts))
        if 0 < w < math.inf:
            out.append(w)
    return out


def default_grid(g: TransferFunction, points_per_decade: int = POINTS_PER_DECADE) -> np.ndarray:
    """Log grid over [1e-2 |p_min|, 1e2 |p_max|] of the pole/zero frequencies.

    For discrete systems the grid stops at 0.999 Nyquist and is merged with a
    second grid that is logarithmic in the bilinear-equivalent analog
    frequency, which keeps resolution near Nyquist where Tustin compresses
    the analog axis.
    """
    freqs = characteristic_frequencies(g)
    lo = 1e-2 * min(freqs) if freqs else 1e-2
    hi = 1e2 * max(freqs) if freqs else 1e2

    def logspace(a, b):
        decades = max(math.log10(b / a), 1e-3)
        return np.logspace(math.log10(a), math.log10(b), int(decades * points_per_decade) + 2)

    if not g.is_discrete:
        return logspace(lo, hi)
    top = NYQUIST_FRACTION * math.pi / g.ts
    lo = min(lo, top / 10)
    plain = logspace(lo, top)
    warp = 2.0 / g.ts
    analog_top = warp * math.tan(top * g.ts / 2)
    warped = 2.0 / g.ts * np.arctan(logspace(lo, max(analog_top, hi)) / warp)
    grid = np.union1d(plain, warped[warped <= top])
    return grid[np.concatenate([[True], np.diff(grid) > 1e-12 * grid[1:]])]


@dataclass(frozen=True)
class PhaseMargin:
    omega: float  # gain-crossover frequency, rad/s
    pm_deg: float
    delay: float  # seconds (continuous) or samples (discrete)


@dataclass(frozen=True)
class GainMargin:
    omega: float  # phase-crossover frequency, rad/s
    gm_db: float


@dataclass(frozen=True)
class MarginReport:
    phase_margins: tuple[PhaseMargin, ...]
    gain_margins: tuple[GainMargin, ...]
    ts: float | None = None
    stable_verdict: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "stable_verdict", self.pm > 0 and self.gm > 0)

    @property
    def pm(self) -> float:
        return min((m.pm_deg for m in self.phase_margins), default=math.inf)

    @property
    def gm(self) -> float:
        return min((m.gm_db for m in self.gain_margins), default=math.inf)

    @property
    def delay_margin(self) -> float:
        return min((m.delay for m in self.phase_margins), default=math.inf)

    @property
    def omega_p(self) -> list[float]:
        return [m.omega for m in self.phase_margins]

    @property
    def omega_g(self) -> list[float]:
        return [m.omega for m in self.gain_margins]


def _wrap180(deg):
    # into (-180, 180]
    return 180.0 - np.mod(180.0 - np.asarray(deg), 360.0)


def _bisect(f, a: float, b: float, fa: float) -> float:
    while b - a > REL_FREQ_TOL * a:
        m = math.sqrt(a * b)
        fm = f(m)
        if fm == 0.0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return math.sqrt(a * b)


def stability_margins(L: TransferFunction, grid=None) -> MarginReport:
    omega = default_grid(L) if grid is None else np.asarray(grid, dtype=float)
    _check_nyquist(L, omega)
    h = L.response(omega)
    with np.errstate(divide="ignore"):
        mag = 20.0 * np.log10(np.abs(h))
    phase = np.degrees(np.unwrap(np.angle(h)))

    def log_mag(w):
        return 20.0 * math.log10(abs(complex(L.response(w))))

    def phase_near(w, w_ref, ph_ref):
        a = math.degrees(np.angle(complex(L.response(w))))
        a_ref = math.degrees(np.angle(complex(L.response(w_ref))))
        return ph_ref + float(_wrap180(a - a_ref))

    pms = []
    finite = np.isfinite(mag)
    for i in np.flatnonzero(finite[:-1] & finite[1:] & (np.sign(mag[:-1]) != np.sign(mag[1:]))):
        if mag[i] == 0.0 and i > 0:
            continue
        w = _bisect(log_mag, omega[i], omega[i + 1], mag[i])
        ph = phase_near(w, omega[i], phase[i])
        pm = float(_wrap180(ph + 180.0))
        delay = math.radians(pm) / w
        if L.is_discrete:
            delay /= L.ts
        pms.append(PhaseMargin(w, pm, delay))

    gms = []
    q = np.floor((phase + 180.0) / 360.0)
    for i in np.flatnonzero(q[:-1] != q[1:]):
        level = 360.0 * max(q[i], q[i + 1]) - 180.0
        w0, ph0 = omega[i], phase[i]

        def f(w, w0=w0, ph0=ph0, level=level):
            return phase_near(w, w0, ph0) - level

        w = _bisect(f, omega[i], omega[i + 1], phase[i] - level)
        gms.append(GainMargin(w, -log_mag(w)))
    return MarginReport(tuple(pms), tuple(gms), L.ts)
