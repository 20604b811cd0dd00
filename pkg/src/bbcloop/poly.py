"""Real-coefficient polynomials in descending-degree order.

Every transfer-function operation in the package is built on the small set of
functions below.  Values are immutable; arithmetic returns new objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# Leading coefficients below this magnitude are treated as exact zeros.
ABS_TRIM = 1e-300
# A sum a + b whose magnitude falls below REL_CANCEL * max(|a|, |b|) is the
# rounding residue of subtracting two equal stored values and becomes 0.
REL_CANCEL = 1e-14
# Conjugate pairs whose imaginary part is below this (relative) are split
# multiple real roots and are snapped back onto the real axis.
REAL_SNAP = 1e-6
MAX_DEGREE = 64


class PolynomialError(ValueError):
    """Raised for operations that are undefined on the given polynomial."""


def _normalize(coeffs: Iterable[float]) -> tuple[float, ...]:
    c = [float(x) for x in coeffs]
    for x in c:
        if not math.isfinite(x):
            raise PolynomialError(f"non-finite coefficient {x!r}")
    i = 0
    while i < len(c) - 1 and abs(c[i]) < ABS_TRIM:
        i += 1
    c = c[i:] or [0.0]
    if len(c) == 1 and abs(c[0]) < ABS_TRIM:
        c = [0.0]
    if len(c) - 1 > MAX_DEGREE:
        raise PolynomialError(f"degree {len(c) - 1} exceeds {MAX_DEGREE}")
    return tuple(c)


@dataclass(frozen=True)
class Polynomial:
    """Polynomial with real coefficients, highest power first.

    The zero polynomial is stored as ``(0.0,)`` and has degree 0.
    """

    coeffs: tuple[float, ...]

    def __init__(self, coeffs: Iterable[float] | float):
        if isinstance(coeffs, (int, float, np.floating, np.integer)):
            coeffs = [coeffs]
        object.__setattr__(self, "coeffs", _normalize(coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> float:
        return self.coeffs[0]

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    def as_array(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=float)

    def __add__(self, other: Polynomial) -> Polynomial:
        return poly_add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other: Polynomial) -> Polynomial:
        return poly_add(self, poly_scale(_coerce(other), -1.0))

    def __neg__(self) -> Polynomial:
        return poly_scale(self, -1.0)

    def __mul__(self, other) -> Polynomial:
        if isinstance(other, (int, float)):
            return poly_scale(self, other)
        return poly_mul(self, other)

    __rmul__ = __mul__

    def __call__(self, x):
        return poly_eval(self, x)

    def __repr__(self) -> str:
        return f"Polynomial({list(self.coeffs)!r})"


def _coerce(p) -> Polynomial:
    return p if isinstance(p, Polynomial) else Polynomial(p)


def poly_scale(p: Polynomial, k: float) -> Polynomial:
    return Polynomial([k * c for c in p.coeffs])


def poly_add(a: Polynomial, b: Polynomial) -> Polynomial:
    n = max(len(a.coeffs), len(b.coeffs))
    ca = (0.0,) * (n - len(a.coeffs)) + a.coeffs
    cb = (0.0,) * (n - len(b.coeffs)) + b.coeffs
    out = []
    for x, y in zip(ca, cb):
        s = x + y
        if s != 0.0 and abs(s) <= REL_CANCEL * max(abs(x), abs(y)):
            s = 0.0
        out.append(s)
    return Polynomial(out)


def poly_mul(a: Polynomial, b: Polynomial) -> Polynomial:
    if a.is_zero or b.is_zero:
        return Polynomial([0.0])
    return Polynomial(np.convolve(a.as_array(), b.as_array()))


def poly_eval(p: Polynomial, x):
    """Horner evaluation; accepts a scalar or a numpy array of points."""
    acc = 0.0 * x
    for c in p.coeffs:
        acc = acc * x + c
    return acc


def poly_derivative(p: Polynomial) -> Polynomial:
    n = p.degree
    if n == 0:
        return Polynomial([0.0])
    return Polynomial([c * (n - i) for i, c in enumerate(p.coeffs[:-1])])


def backward_error(p: Polynomial, x: complex) -> float:
    """|p(x)| scaled by sum |c_i| |x|^(n-i): the relative residual of a root."""
    ax = abs(x)
    scale = 0.0
    for c in p.coeffs:
        scale = scale * ax + abs(c)
    if scale == 0.0:
        return 0.0
    return abs(poly_eval(p, complex(x))) / scale


def _companion(p: Polynomial) -> np.ndarray:
    c = p.as_array()
    n = len(c) - 1
    m = np.zeros((n, n))
    m[0, :] = -c[1:] / c[0]
    if n > 1:
        m[1:, :-1] = np.eye(n - 1)
    return m


def _polish(p: Polynomial, dp: Polynomial, r: complex, iters: int = 4) -> complex:
    err = backward_error(p, r)
    for _ in range(iters):
        d = poly_eval(dp, r)
        if d == 0:
            break
        cand = r - poly_eval(p, r) / d
        cerr = backward_error(p, cand)
        if not cerr < err:
            break
        r, err = cand, cerr
    return r


def _pair_conjugates(roots: list[complex]) -> list[complex]:
    """Match each complex root with its nearest conjugate and average."""
    pending = list(roots)
    out: list[complex] = []
    while pending:
        r = pending.pop(0)
        scale = max(abs(r), 1.0)
        if abs(r.imag) <= 1e-12 * scale:
            out.append(complex(r.real, 0.0))
            continue
        j = min(range(len(pending)), key=lambda k: abs(pending[k] - r.conjugate()), default=None)
        if j is None:
            out.append(complex(r.real, 0.0))
            continue
        mate = pending.pop(j)
        re = 0.5 * (r.real + mate.real)
        im = 0.5 * (abs(r.imag) + abs(mate.imag))
        if im <= REAL_SNAP * max(abs(re), 1.0):
            out.extend([complex(re, 0.0), complex(re, 0.0)])
        else:
            out.extend([complex(re, im), complex(re, -im)])
    return out


def poly_roots(p: Polynomial) -> list[complex]:
    """All complex roots, conjugate-closed, sorted by ascending magnitude.

    Eigenvalues of the balanced companion matrix (LAPACK ``geev``) followed by
    Newton polishing against the original coefficients.
    """
    if p.is_zero:
        raise PolynomialError("zero polynomial has no well-defined roots")
    if p.degree == 0:
        raise PolynomialError("no roots: polynomial has degree 0")
    c = p.coeffs
    # exact zero roots from trailing zero coefficients
    nzero = 0
    while c[len(c) - 1 - nzero] == 0.0:
        nzero += 1
    core = Polynomial(c[: len(c) - nzero])
    roots: list[complex] = [0j] * nzero
    if core.degree >= 1:
        eig = np.linalg.eigvals(_companion(core))
        dp = poly_derivative(core)
        roots.extend(_polish(core, dp, complex(r)) for r in eig)
    roots = _pair_conjugates(roots)
    return sorted(roots, key=lambda r: (abs(r), r.real, r.imag))


def deflate_root(p: Polynomial, r: float, tol: float = 1e-12) -> tuple[Polynomial, int]:
    """Divide out (x - r) while r is a root to backward error ``tol``.

    Multiple roots at a known point are otherwise split by rounding into a
    cluster of radius about eps**(1/m).
    """
    count = 0
    while p.degree >= 1 and backward_error(p, r) <= tol:
        q = [p.coeffs[0]]
        for c in p.coeffs[1:-1]:
            q.append(c + r * q[-1])
        p = Polynomial(q)
        count += 1
    return p, count


def poly_from_roots(roots: Sequence[complex], gain: float = 1.0) -> Polynomial:
    """Expand gain * prod(x - r) using real linear and quadratic factors."""
    pending = [complex(r) for r in roots]
    out = Polynomial([gain])
    while pending:
        r = pending.pop(0)
        scale = max(abs(r), 1.0)
        if abs(r.imag) <= 1e-12 * scale:
            out = poly_mul(out, Polynomial([1.0, -r.real]))
            continue
        j = min(range(len(pending)), key=lambda k: abs(pending[k] - r.conjugate()), default=None)
        if j is None or abs(pending[j] - r.conjugate()) > 1e-10 * scale:
            raise PolynomialError(f"complex root {r} has no conjugate partner")
        pending.pop(j)
        out = poly_mul(out, Polynomial([1.0, -2.0 * r.real, abs(r) ** 2]))
    return out
