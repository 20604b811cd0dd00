"""SISO linear time-invariant models: state space, transfer function, ZPK.

Transfer functions carry their domain: ``ts is None`` means continuous
(variable ``s``); a positive ``ts`` means discrete with that sample time
(variable ``z``).  No operation cancels poles against zeros.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.linalg

from .poly import (
    Polynomial,
    PolynomialError,
    deflate_root,
    poly_add,
    poly_eval,
    poly_from_roots,
    poly_mul,
    poly_roots,
    poly_scale,
)


class DomainMismatchError(ValueError):
    """Composition of systems living in different domains."""


class IndeterminateError(ArithmeticError):
    """0/0 evaluation of a transfer function."""


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    ts: float | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        n = A.shape[0]
        if n < 1 or A.shape != (n, n):
            raise ValueError(f"A must be square with n >= 1, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {C.shape}")
        if D.shape != (C.shape[0], B.shape[1]):
            if D.size == 1 and D.item() == 0.0:
                D = np.zeros((C.shape[0], B.shape[1]))
            else:
                raise ValueError(f"D must be {C.shape[0]}x{B.shape[1]}, got {D.shape}")
        for name, m in zip("ABCD", (A, B, C, D)):
            if not np.all(np.isfinite(m)):
                raise ValueError(f"{name} has non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]


def characteristic_polynomial(A: np.ndarray) -> tuple[Polynomial, list[np.ndarray]]:
    """Faddeev-LeVerrier recursion.

    Returns det(sI - A) and the matrices M_1..M_n with
    adj(sI - A) = sum_k M_k s^(n-k).
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    coeffs = [1.0]
    mats = []
    M = np.zeros_like(A)
    c = 1.0
    eye = np.eye(n)
    for k in range(1, n + 1):
        M = A @ M + c * eye
        mats.append(M)
        c = -np.trace(A @ M) / k
        coeffs.append(c)
    return Polynomial(coeffs), mats


def ss_to_tf(ss: StateSpaceModel, input_index: int = 0, output_index: int = 0) -> TransferFunction:
    """C (sI - A)^-1 B + D for one input/output pair."""
    if not 0 <= input_index < ss.B.shape[1]:
        raise IndexError(f"input index {input_index} out of range")
    if not 0 <= output_index < ss.C.shape[0]:
        raise IndexError(f"output index {output_index} out of range")
    den, mats = characteristic_polynomial(ss.A)
    b = ss.B[:, input_index]
    c = ss.C[output_index, :]
    num = Polynomial([0.0] + [float(c @ M @ b) for M in mats])
    d = ss.D[output_index, input_index]
    if d != 0.0:
        num = poly_add(num, poly_scale(den, d))
    return TransferFunction(num, den, ss.ts)


def zoh_discretize(ss: StateSpaceModel, h: float) -> StateSpaceModel:
    """Exact zero-order-hold discretization via the augmented matrix exponential."""
    if ss.ts is not None:
        raise DomainMismatchError("model is already discrete")
    n, m = ss.B.shape
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = ss.A * h
    aug[:n, n:] = ss.B * h
    E = scipy.linalg.expm(aug)
    return StateSpaceModel(E[:n, :n], E[:n, n:], ss.C, ss.D, ts=h)


@dataclass(frozen=True)
class TransferFunction:
    num: Polynomial
    den: Polynomial
    ts: float | None = None

    def __post_init__(self):
        if not isinstance(self.num, Polynomial):
            object.__setattr__(self, "num", Polynomial(self.num))
        if not isinstance(self.den, Polynomial):
            object.__setattr__(self, "den", Polynomial(self.den))
        if self.den.is_zero:
            raise ZeroDivisionError("transfer function denominator is identically zero")
        if self.ts is not None and not self.ts > 0:
            raise ValueError(f"sample time must be positive, got {self.ts}")

    @classmethod
    def constant(cls, k: float, ts: float | None = None) -> TransferFunction:
        return cls(Polynomial([k]), Polynomial([1.0]), ts)

    @property
    def is_discrete(self) -> bool:
        return self.ts is not None

    @property
    def var(self) -> str:
        return "z" if self.is_discrete else "s"

    def __call__(self, x):
        return poly_eval(self.num, x) / poly_eval(self.den, x)

    def frequency_point(self, omega):
        """Complex argument on the stability boundary at angular frequency omega."""
        omega = np.asarray(omega, dtype=float)
        if self.is_discrete:
            return np.exp(1j * omega * self.ts)
        return 1j * omega

    def response(self, omega):
        return self(self.frequency_point(omega))

    def _roots(self, p: Polynomial) -> list[complex]:
        if p.degree < 1 or p.is_zero:
            return []
        nyquist = 0
        if self.is_discrete:
            # bilinear images of roots at infinity land exactly on z = -1
            p, nyquist = deflate_root(p, -1.0)
        roots = poly_roots(p) if p.degree >= 1 else []
        return sorted(roots + [complex(-1.0)] * nyquist, key=lambda r: (abs(r), r.real, r.imag))

    def poles(self) -> list[complex]:
        return self._roots(self.den)

    def zeros(self) -> list[complex]:
        return self._roots(self.num)

    def normalized(self) -> TransferFunction:
        """Same system with a monic denominator."""
        k = self.den.leading
        return TransferFunction(poly_scale(self.num, 1 / k), poly_scale(self.den, 1 / k), self.ts)

    def __mul__(self, other) -> TransferFunction:
        if isinstance(other, (int, float)):
            return TransferFunction(poly_scale(self.num, other), self.den, self.ts)
        return tf_series(self, other)

    __rmul__ = __mul__

    def __str__(self) -> str:
        return format_tf(self)


def tf(num: Sequence[float], den: Sequence[float], ts: float | None = None) -> TransferFunction:
    return TransferFunction(Polynomial(num), Polynomial(den), ts)


def _check_domain(a: TransferFunction, b: TransferFunction) -> None:
    if a.ts != b.ts:
        raise DomainMismatchError(f"cannot combine systems with ts={a.ts} and ts={b.ts}")


def tf_series(g1: TransferFunction, g2: TransferFunction) -> TransferFunction:
    _check_domain(g1, g2)
    return TransferFunction(poly_mul(g1.num, g2.num), poly_mul(g1.den, g2.den), g1.ts)


def tf_feedback(g: TransferFunction, h: float) -> TransferFunction:
    """Negative feedback through a static gain: g / (1 + h g)."""
    if not math.isfinite(h):
        raise ValueError(f"feedback gain must be finite, got {h}")
    den = poly_add(g.den, poly_scale(g.num, h))
    if den.is_zero:
        raise ZeroDivisionError("closed-loop denominator is identically zero")
    return TransferFunction(g.num, den, g.ts)


def loop_gain(
    controller: TransferFunction,
    plant: TransferFunction,
    sensor_gain: float = 1.0,
    pwm_gain: float = 1.0,
) -> TransferFunction:
    return tf_series(controller, plant) * (sensor_gain * pwm_gain)


def _binomial_coeffs(sign: int, k: int) -> list[int]:
    # (z + sign)^k, highest power first
    return [math.comb(k, m) * sign**m for m in range(k + 1)]


def _bilinear_exact(p: Polynomial, order: int, k: Fraction) -> list[Fraction]:
    acc = [Fraction(0)] * (order + 1)
    for i, c in enumerate(p.coeffs):
        j = p.degree - i
        if c == 0.0:
            continue
        scale = Fraction(c) * k**j
        for a, x in enumerate(_binomial_coeffs(-1, j)):
            for b, y in enumerate(_binomial_coeffs(1, order - j)):
                acc[a + b] += scale * (x * y)
    return acc


def _zero_sum(coeffs: list[float]) -> None:
    # s = 0 maps to z = 1: make the stored coefficients sum to exactly zero,
    # leaving the leading coefficient alone
    order = sorted(range(1, len(coeffs)), key=lambda i: -abs(coeffs[i]))
    for i in order:
        residual = sum(map(Fraction, coeffs))
        if residual == 0:
            return
        coeffs[i] = float(Fraction(coeffs[i]) - residual)


def tustin_discretize(g: TransferFunction, sample_time: float) -> TransferFunction:
    """Bilinear substitution s = (2/Ts)(z - 1)/(z + 1), no prewarping.

    The result is returned with a monic denominator.  Coefficients are formed
    in rational arithmetic and rounded once; the numerator is then rescaled by
    the exact ratio that makes the stored coefficients keep Gd(1) = G(0).
    Rescaling leaves the zeros where they were.  At small Ts the coefficient sums are ~(Ts)^n times the
    coefficients themselves, so independent rounding alone loses DC accuracy.
    """
    if g.is_discrete:
        raise DomainMismatchError("tustin_discretize expects a continuous system")
    if not sample_time > 0:
        raise ValueError(f"sample time must be positive, got {sample_time}")
    order = max(g.num.degree, g.den.degree)
    k = 2 / Fraction(sample_time)
    num = _bilinear_exact(g.num, order, k)
    den = _bilinear_exact(g.den, order, k)
    lead = next(c for c in den if c != 0)
    num = [float(c / lead) for c in num]
    den = [float(c / lead) for c in den]
    if g.den.coeffs[-1] == 0.0:
        _zero_sum(den)
    exact_num = sum(map(Fraction, num))
    if g.den.coeffs[-1] != 0.0 and exact_num != 0:
        dc = Fraction(g.num.coeffs[-1]) / Fraction(g.den.coeffs[-1])
        ratio = dc * sum(map(Fraction, den)) / exact_num
        num = [float(Fraction(c) * ratio) for c in num]
    return TransferFunction(Polynomial(num), Polynomial(den), sample_time)


@dataclass(frozen=True)
class ZpkForm:
    zeros: tuple[complex, ...]
    poles: tuple[complex, ...]
    gain: float
    ts: float | None = None

    @property
    def var(self) -> str:
        return "z" if self.ts is not None else "s"

    def __str__(self) -> str:
        return format_zpk(self)


def tf_to_zpk(g: TransferFunction) -> ZpkForm:
    if g.num.is_zero:
        return ZpkForm((), tuple(g.poles()), 0.0, g.ts)
    return ZpkForm(tuple(g.zeros()), tuple(g.poles()), g.num.leading / g.den.leading, g.ts)


def zpk_to_tf(z: ZpkForm) -> TransferFunction:
    return TransferFunction(poly_from_roots(z.zeros, z.gain), poly_from_roots(z.poles, 1.0), z.ts)


def dc_gain(g: TransferFunction) -> float:
    """Gain at s = 0 (continuous) or z = 1 (discrete); inf for an integrator.

    A pole at z = 1 means the stored denominator coefficients sum to exactly
    zero.  No tolerance is applied: with small sample times a stable
    denominator legitimately sums to ~1e-16.
    """
    if g.is_discrete:
        # value at z = 1 is the coefficient sum; fsum keeps it correctly rounded
        n = math.fsum(g.num.coeffs)
        d = math.fsum(g.den.coeffs)
    else:
        n, d = g.num.coeffs[-1], g.den.coeffs[-1]
    if d == 0.0 and n == 0.0:
        raise IndeterminateError("indeterminate DC gain (0/0)")
    if d == 0.0:
        return math.inf
    return n / d


def properness_check(g: TransferFunction) -> bool:
    return g.num.degree <= g.den.degree or g.num.is_zero


class DampingClass(str, enum.Enum):
    UNDERDAMPED = "underdamped"
    CRITICALLY_DAMPED = "critically_damped"
    OVERDAMPED = "overdamped"


@dataclass(frozen=True)
class SecondOrderCharacter:
    zeta: float
    omega_n: float
    damping: DampingClass = field(init=False)

    def __post_init__(self):
        if abs(self.zeta - 1.0) <= 1e-6:
            cls = DampingClass.CRITICALLY_DAMPED
        elif self.zeta < 1.0:
            cls = DampingClass.UNDERDAMPED
        else:
            cls = DampingClass.OVERDAMPED
        object.__setattr__(self, "damping", cls)


def second_order_character(g: TransferFunction) -> SecondOrderCharacter:
    """Equivalent damping ratio and natural frequency of the dominant dynamics.

    If the system has a complex pole pair, the slowest such pair defines
    s^2 + 2 zeta wn s + wn^2.  Otherwise the two slowest real poles p1, p2 give
    wn = sqrt(p1 p2) and zeta = (p1 + p2) / (2 wn).
    """
    if g.is_discrete:
        raise DomainMismatchError("second_order_character expects a continuous system")
    poles = g.poles()
    if len(poles) < 2:
        raise ValueError("need at least two poles")
    complex_poles = [p for p in poles if p.imag > 0]
    if complex_poles:
        p = min(complex_poles, key=abs)
        wn = abs(p)
        return SecondOrderCharacter(-p.real / wn, wn)
    p1, p2 = (-p.real for p in sorted(poles, key=abs)[:2])
    wn = math.sqrt(p1 * p2)
    if wn == 0.0:
        raise ValueError("pole at the origin: natural frequency undefined")
    return SecondOrderCharacter((p1 + p2) / (2 * wn), wn)


def realize(g: TransferFunction) -> StateSpaceModel:
    """Controllable-canonical realization of a proper TF, diagonally balanced."""
    if not properness_check(g):
        raise ValueError("improper transfer function has no state-space realization")
    g = g.normalized()
    n = g.den.degree
    if n == 0:
        raise ValueError("static gain has no states")
    den = g.den.as_array()
    num = np.concatenate([np.zeros(n + 1 - len(g.num.coeffs)), g.num.as_array()])
    d = num[0]
    resid = num[1:] - d * den[1:]
    A = np.zeros((n, n))
    A[0, :] = -den[1:]
    A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = resid.reshape(1, n)
    _, (scale, _) = scipy.linalg.matrix_balance(A, permute=False, separate=True)
    A = A * scale[None, :] / scale[:, None]
    B = B / scale[:, None]
    C = C * scale[None, :]
    return StateSpaceModel(A, B, C, [[d]], ts=g.ts)


def _fmt(x: float, sig: int = 4) -> str:
    return f"{x:.{sig}g}"


def _poly_str(p: Polynomial, var: str, sig: int = 4) -> str:
    terms = []
    deg = p.degree
    for i, c in enumerate(p.coeffs):
        j = deg - i
        if c == 0.0 and p.degree > 0:
            continue
        mag = abs(c)
        body = _fmt(mag, sig)
        if j >= 1:
            power = var if j == 1 else f"{var}^{j}"
            body = power if body == "1" else f"{body} {power}"
        sign = "-" if c < 0 else "+"
        terms.append((sign, body))
    if not terms:
        return "0"
    first_sign, first = terms[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, body in terms[1:]:
        out += f" {sign} {body}"
    return out


def format_tf(g: TransferFunction, sig: int = 4) -> str:
    suffix = f"  (Ts = {g.ts:g} s)" if g.is_discrete else ""
    return f"({_poly_str(g.num, g.var, sig)}) / ({_poly_str(g.den, g.var, sig)}){suffix}"


def real_factors(roots: Sequence[complex]) -> list[tuple[float, ...]]:
    """Group roots into real factors: (a,) for (x - a), (b, c) for x^2 + b x + c."""
    out = []
    pending = list(roots)
    while pending:
        r = pending.pop(0)
        if r.imag == 0.0:
            out.append((r.real,))
            continue
        j = min(range(len(pending)), key=lambda k: abs(pending[k] - r.conjugate()))
        pending.pop(j)
        out.append((-2.0 * r.real, abs(r) ** 2))
    return out


def _factor_str(f: tuple[float, ...], var: str, sig: int) -> str:
    if len(f) == 1:
        a = f[0]
        if a == 0.0:
            return var
        return f"({var} {'-' if a > 0 else '+'} {_fmt(abs(a), sig)})"
    b, c = f
    return f"({var}^2 {'-' if b < 0 else '+'} {_fmt(abs(b), sig)}{var} + {_fmt(c, sig)})"


def format_zpk(z: ZpkForm, sig: int = 4) -> str:
    var = z.var
    top = "".join(_factor_str(f, var, sig) for f in real_factors(z.zeros))
    bottom = "".join(_factor_str(f, var, sig) for f in real_factors(z.poles)) or "1"
    head = f"{_fmt(z.gain, 5)} {top}" if top else _fmt(z.gain, 5)
    return f"{head} / {bottom}"


def stable_poles(g: TransferFunction, tol: float = 0.0) -> bool:
    if g.is_discrete:
        return all(abs(p) < 1.0 - tol for p in g.poles())
    return all(p.real < -tol for p in g.poles())


def to_s_plane(root: complex, ts: float | None) -> complex:
    """Continuous-time equivalent of a z-plane root via the inverse bilinear map."""
    if ts is None:
        return root
    if root == -1:
        return complex(math.inf)
    return (2.0 / ts) * (root - 1) / (root + 1)

