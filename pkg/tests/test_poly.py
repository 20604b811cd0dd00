import cmath

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bbcloop.poly import (
    MAX_DEGREE,
    Polynomial,
    PolynomialError,
    backward_error,
    deflate_root,
    poly_derivative,
    poly_from_roots,
    poly_roots,
)

coeff = st.floats(min_value=-100, max_value=100, allow_nan=False).filter(lambda x: abs(x) > 1e-3)
polys = st.lists(coeff, min_size=2, max_size=7).map(Polynomial)


@st.composite
def root_sets(draw):
    # well separated roots: real ones and conjugate pairs
    n_real = draw(st.integers(0, 4))
    n_pair = draw(st.integers(0 if n_real else 1, 2))
    reals = draw(st.lists(st.floats(-50, 50), min_size=n_real, max_size=n_real, unique=True))
    pairs = draw(
        st.lists(
            st.tuples(st.floats(-50, 50), st.floats(0.5, 50)), min_size=n_pair, max_size=n_pair
        )
    )
    roots = [complex(r) for r in reals]
    for re, im in pairs:
        roots += [complex(re, im), complex(re, -im)]
    pts = sorted(roots, key=lambda r: (r.real, r.imag))
    assume(all(abs(a - b) >= 0.5 for i, a in enumerate(pts) for b in pts[i + 1 :]))
    return roots


def test_trimming_and_degree():
    p = Polynomial([0.0, 0.0, 2.0, 1.0])
    assert p.coeffs == (2.0, 1.0)
    assert p.degree == 1
    assert Polynomial([0.0, 0.0]).is_zero
    assert Polynomial(3).coeffs == (3.0,)


def test_rejects_non_finite_and_huge_degree():
    with pytest.raises(PolynomialError):
        Polynomial([1.0, float("nan")])
    with pytest.raises(PolynomialError):
        Polynomial([1.0] * (MAX_DEGREE + 2))


def test_cancellation_residue_is_zero():
    a = Polynomial([1.0, 0.1 + 0.2])
    b = Polynomial([0.0, -0.3])
    assert (a + b).coeffs == (1.0, 0.0)


def test_roots_of_degree_zero_raise():
    with pytest.raises(PolynomialError):
        poly_roots(Polynomial([4.0]))
    with pytest.raises(PolynomialError):
        poly_roots(Polynomial([0.0]))


def test_known_roots():
    # s^2 + 400 s + 1e6: -200 +- 979.796j
    r = poly_roots(Polynomial([1.0, 400.0, 1e6]))
    assert r[0] == pytest.approx(complex(-200, -979.7958971132712), rel=1e-12)
    assert r[1] == r[0].conjugate()


def test_exact_zero_roots_from_trailing_zeros():
    r = poly_roots(Polynomial([1.0, 778.3, 0.0]))
    assert r[0] == 0j
    assert r[1].real == pytest.approx(-778.3)


def test_double_real_root_snaps_to_axis():
    r = poly_roots(Polynomial([1.0, 2.0, 1.0]))
    assert all(x.imag == 0.0 for x in r)
    assert r == pytest.approx([-1.0, -1.0], abs=1e-7)


def test_deflate_root_counts_multiplicity():
    p = poly_from_roots([-1.0, -1.0, -1.0, 0.5])
    q, n = deflate_root(p, -1.0)
    assert n == 3
    assert q.coeffs == pytest.approx((1.0, -0.5))


def test_unpaired_complex_root_rejected():
    with pytest.raises(PolynomialError):
        poly_from_roots([1 + 1j])


def test_derivative():
    assert poly_derivative(Polynomial([3.0, 2.0, 1.0])).coeffs == (6.0, 2.0)
    assert poly_derivative(Polynomial([5.0])).is_zero


@settings(max_examples=150, deadline=None)
@given(root_sets(), st.floats(0.1, 10))
def test_root_round_trip(roots, gain):
    p = poly_from_roots(roots, gain)
    back = poly_from_roots(poly_roots(p), p.leading)
    a, b = p.as_array(), back.as_array()
    scale = np.maximum(np.abs(a), 1e-12 * np.max(np.abs(a)))
    assert np.max(np.abs(a - b) / scale) <= 1e-8


@settings(max_examples=150, deadline=None)
@given(polys)
def test_roots_conjugate_closed_and_small_backward_error(p):
    roots = poly_roots(p)
    assert len(roots) == p.degree
    for r in roots:
        if r.imag != 0:
            assert any(abs(q - r.conjugate()) <= 1e-12 * max(1, abs(r)) for q in roots)
        assert backward_error(p, r) <= 1e-6


@settings(max_examples=100, deadline=None)
@given(polys, polys, polys)
def test_mul_commutative_associative(a, b, c):
    assert (a * b).coeffs == pytest.approx((b * a).coeffs, rel=1e-12, abs=1e-9)
    assert ((a * b) * c).coeffs == pytest.approx((a * (b * c)).coeffs, rel=1e-9, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(polys, polys, st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_evaluation_homomorphism(a, b, x):
    lhs = (a * b)(x)
    rhs = a(x) * b(x)
    assert cmath.isclose(lhs, rhs, rel_tol=1e-9, abs_tol=1e-6)
    assert cmath.isclose((a + b)(x), a(x) + b(x), rel_tol=1e-9, abs_tol=1e-9)
