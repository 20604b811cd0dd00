"""PID compensators with a first-order filtered derivative (PIDN).

The filtered form is  kp + ki/s + kd*N*s/(s + N)
                   = ((kp + kd N) s^2 + (kp N + ki) s + ki N) / (s^2 + N s).

An "ideal" PID is represented by the same structure with a very large N.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .lti import TransferFunction
from .poly import Polynomial


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float
    n: float

    def __post_init__(self):
        for name in ("kp", "ki", "kd", "n"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not self.n > 0:
            raise ValueError(f"filter coefficient n must be positive, got {self.n}")

    def with_n(self, n: float) -> PidGains:
        return replace(self, n=n)


class ControllerKind(str, enum.Enum):
    PID_LARGE_N = "pid_large_n"
    PIDN = "pidn"


# multiplier applied to the tuned N when building the near-ideal PID
DEFAULT_N_MULTIPLIER = {"boost": 100.0, "buck": 1000.0}

# Tuned constants at full printed precision; the reference results depend on every digit.
_BOOST = dict(kp=4.62284089651672, ki=1039.1837410487, kd=0.00407623900768351)
_BUCK = dict(kp=3.13926397775873, ki=921.175630246025, kd=-0.00403350179228654)

PRESETS: dict[str, PidGains] = {
    "boost-pid": PidGains(n=1703100.07, **_BOOST),
    "boost-pidn": PidGains(n=17031.07, **_BOOST),
    "buck-pid": PidGains(n=778000.297404, **_BUCK),
    "buck-pidn": PidGains(n=778.297404, **_BUCK),
}


def preset(name: str) -> PidGains:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown gain preset {name!r}; choose from {sorted(PRESETS)}") from None


def gains_for(kind: ControllerKind, tuned: PidGains, multiplier: float) -> PidGains:
    if multiplier < 1:
        raise ValueError("n multiplier must be >= 1")
    if kind is ControllerKind.PIDN:
        return tuned
    return tuned.with_n(tuned.n * multiplier)


def _exact(*terms: tuple[float, ...]) -> float:
    # sum of products evaluated in rational arithmetic, rounded once
    acc = Fraction(0)
    for term in terms:
        prod = Fraction(1)
        for x in term:
            prod *= Fraction(x)
        acc += prod
    return float(acc)


def pidn_transfer(g: PidGains) -> TransferFunction:
    """Continuous PIDN controller with poles at 0 and -N.

    Numerator coefficients are summed exactly before rounding: for the buck
    gains kp + kd*N cancels to about 4e-9 against operands of order 3.
    """
    num = Polynomial(
        [
            _exact((g.kp,), (g.kd, g.n)),
            _exact((g.kp, g.n), (g.ki,)),
            _exact((g.ki, g.n)),
        ]
    )
    return TransferFunction(num, Polynomial([1.0, g.n, 0.0]))


def ideal_pid_transfer(g: PidGains) -> TransferFunction:
    """(kd s^2 + kp s + ki) / s.  Improper whenever kd != 0."""
    return TransferFunction(Polynomial([g.kd, g.kp, g.ki]), Polynomial([1.0, 0.0]))


def pidn_terms(g: PidGains, s):
    """Sum-of-terms evaluation kp + ki/s + kd N s/(s + N)."""
    return g.kp + g.ki / s + g.kd * g.n * s / (s + g.n)


@dataclass(frozen=True)
class LimitCheck:
    n_large: float
    omegas: np.ndarray
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def pidn_limit_property_check(
    g: PidGains, n_large: float, tolerance: float = 0.01, points: int = 200
) -> LimitCheck:
    """Compare |PIDN(jw)| with large N against the ideal PID for w <= n_large/10."""
    if n_large < 10 * g.n:
        raise ValueError("n_large must be at least 10x the tuned filter coefficient")
    big = pidn_transfer(g.with_n(n_large))
    ideal = ideal_pid_transfer(g)
    w_hi = n_large / 10
    omegas = np.logspace(math.log10(w_hi) - 6, math.log10(w_hi), points)
    a = np.abs(big.response(omegas))
    b = np.abs(ideal.response(omegas))
    err = float(np.max(np.abs(a - b) / b))
    return LimitCheck(n_large, omegas, err, tolerance)
