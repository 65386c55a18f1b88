import itertools
import os
import subprocess
import sys
from fractions import Fraction

import mpmath
import pytest
from gmpy2 import mpfr, mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from quadforge.exceptions import DimensionMismatch, DuplicateAbscissae, DuplicateNodes, IndexOutOfRange, ParseError
from quadforge.numerics import (
    Polynomial,
    as_scalar,
    decimal_digits,
    elem_sym,
    elem_sym_all,
    format_scalar,
    interpolate_poly,
    null_vector,
    parse_scalar,
    poly_roots,
    real_roots,
    simplest_rational,
    solve_dense,
    solve_vandermonde,
    tolerance,
    working_precision,
)

rationals = st.fractions(min_value=-5, max_value=5, max_denominator=40).map(lambda f: mpq(f.numerator, f.denominator))


def distinct(values):
    return st.lists(values, min_size=1, max_size=8, unique=True)


def vandermonde_rows(nodes, count):
    return [[x**j for x in nodes] for j in range(count)]


# --- solve_vandermonde ------------------------------------------------------


def test_vandermonde_examples():
    assert solve_vandermonde([-1, mpq(-1, 6), 1], [1, 0, mpq(1, 3)]) == [mpq(1, 10), mpq(24, 35), mpq(3, 14)]
    assert solve_vandermonde([0], [1]) == [1]
    # 3x3 dense rational solve as the oracle
    nodes, rhs = [mpq(-1), mpq(0), mpq(1)], [mpq(1), mpq(0), mpq(1, 3)]
    assert solve_vandermonde(nodes, rhs) == solve_dense(vandermonde_rows(nodes, 3), rhs) == [mpq(1, 6), mpq(2, 3), mpq(1, 6)]


def test_vandermonde_errors():
    with pytest.raises(DuplicateNodes):
        solve_vandermonde([1, 1], [1, 0])
    with pytest.raises(DimensionMismatch):
        solve_vandermonde([0, 1], [1])
    with pytest.raises(DimensionMismatch):
        solve_vandermonde(list(range(70)), [0] * 70)
    assert len(solve_vandermonde(list(range(70)), [0] * 70, allow_large=True)) == 70


@given(distinct(rationals), st.data())
def test_vandermonde_exact_residual(nodes, data):
    rhs = data.draw(st.lists(rationals, min_size=len(nodes), max_size=len(nodes)))
    c = solve_vandermonde(nodes, rhs)
    for row, b in zip(vandermonde_rows(nodes, len(nodes)), rhs):
        assert sum(r * v for r, v in zip(row, c)) == b


@settings(max_examples=40)
@given(distinct(rationals), st.sampled_from([64, 128, 256]))
def test_vandermonde_fixed_precision_residual(nodes, bits):
    # Well-scaled rhs: the moments of uniform[-1, 1].
    rhs = [mpq(1, j + 1) if j % 2 == 0 else 0 for j in range(len(nodes))]
    exact = solve_vandermonde(nodes, rhs)
    with working_precision(bits):
        approx = solve_vandermonde([mpfr(x) for x in nodes], [mpfr(b) for b in rhs])
        scale = max(abs(v) for v in exact) or 1
        # Conditioning of these small systems costs at most a few dozen bits.
        assert all(abs(a - e) <= tolerance(bits) * scale * 2**20 for a, e in zip(approx, exact))


# --- null_vector -----------------------------------------------------------


def test_null_vector_examples():
    assert null_vector([-1, 1]) == [1, -1]
    c = null_vector([0, 1, 2])
    assert [v / c[0] for v in c] == [1, -2, 1]
    c = null_vector([-1, mpq(-1, 6), 1])
    assert sum(c) == 0 and sum(x * v for x, v in zip([-1, mpq(-1, 6), 1], c)) == 0
    with pytest.raises(DimensionMismatch):
        null_vector([3])


@given(st.lists(rationals, min_size=2, max_size=8, unique=True))
def test_null_vector_orthogonal(nodes):
    c = null_vector(nodes)
    assert max(abs(v) for v in c) == 1
    for row in vandermonde_rows(nodes, len(nodes) - 1):
        assert sum(r * v for r, v in zip(row, c)) == 0


# --- roots -----------------------------------------------------------------


def test_root_examples():
    with working_precision(256):
        s15, s6 = mpfr(15) ** 0.5, mpfr(6) ** 0.5
        r = poly_roots(Polynomial((0, mpq(-3, 5), 0, 1)))
        want = [-s15 / 5, mpfr(0), s15 / 5]
        assert all(x.is_real for x in r)
        assert all(abs(x.real - y) < mpfr(10) ** -70 for x, y in zip(sorted(x.real for x in r), want))
        r = real_roots(Polynomial((mpq(-1, 5), mpq(2, 5), 1)))
        assert all(abs(x - y) < mpfr(10) ** -70 for x, y in zip(sorted(r), [(-1 - s6) / 5, (-1 + s6) / 5]))
        assert [x.real for x in poly_roots(Polynomial((mpq(5, 3), 1)))] == [mpq(-5, 3)]


def test_complex_roots_flagged():
    with working_precision(128):
        r = poly_roots(Polynomial((1, 0, 1)))
        assert not any(x.is_real for x in r)
        assert real_roots(Polynomial((1, 0, 1))) is None


@settings(max_examples=40, deadline=None)
@given(st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=12), min_size=1, max_size=8, unique=True),
       st.sampled_from([128, 256]))
def test_roots_recovered(roots, bits):
    roots = [mpq(f.numerator, f.denominator) for f in roots]
    digits = bits * 0.30103
    with working_precision(bits):
        p = Polynomial.from_roots(roots)
        found = sorted(r.real for r in poly_roots(p))
        assert all(abs(a - b) <= mpfr(10) ** -(digits / 2 - 4) for a, b in zip(found, sorted(roots)))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=12), min_size=1, max_size=8, unique=True))
def test_roots_simple_tolerance(roots):
    # Simple, well separated roots converge to full precision: 10^-(digits-4).
    roots = sorted({mpq(f.numerator, f.denominator) for f in roots})
    if any(b - a < mpq(1, 4) for a, b in zip(roots, roots[1:])):
        return
    bits = 256
    digits = bits * 0.30103
    with working_precision(bits):
        found = sorted(r.real for r in poly_roots(Polynomial.from_roots(roots)))
        scale = max(1, max(abs(r) for r in roots))
        assert all(abs(a - b) <= mpfr(10) ** -(digits - 4) * scale**len(roots) for a, b in zip(found, roots))


def test_roots_match_mpmath():
    coeffs = [mpq(3), mpq(-7, 2), mpq(1, 3), mpq(5), mpq(1)]
    key = lambda z: (round(z.real, 8), z.imag)
    with working_precision(200):
        ours = sorted((complex(r.value) for r in poly_roots(Polynomial(tuple(coeffs)))), key=key)
    with mpmath.workdps(60):
        ref = mpmath.polyroots([mpmath.mpf(int(c.numerator)) / int(c.denominator) for c in reversed(coeffs)], maxsteps=200, extraprec=200)
        ref = sorted((complex(z) for z in ref), key=key)
    assert len(ours) == len(ref) == 4
    assert all(abs(a - b) < 1e-12 for a, b in zip(ours, ref))


# --- interpolation, symmetric functions -------------------------------------


def test_interpolate_examples():
    assert interpolate_poly([(0, 1)]) == Polynomial((1,))
    assert interpolate_poly([(0, 0), (1, 1)]).coeffs == (0, 1)
    with pytest.raises(DuplicateAbscissae):
        interpolate_poly([(1, 0), (1, 2)])


@given(st.lists(rationals, min_size=1, max_size=7, unique=True), st.data())
def test_interpolation_reproduces_values(ts, data):
    ys = data.draw(st.lists(rationals, min_size=len(ts), max_size=len(ts)))
    p = interpolate_poly(list(zip(ts, ys)))
    assert p.degree < len(ts)
    assert all(p(t) == y for t, y in zip(ts, ys))


def test_elem_sym_examples():
    assert elem_sym(0, [4, 5]) == 1
    assert elem_sym(2, [1, 2, 3]) == 11
    assert elem_sym(3, [1, 2, 3]) == 6
    with pytest.raises(IndexOutOfRange):
        elem_sym(4, [1, 2, 3])


@given(st.lists(rationals, min_size=0, max_size=6))
def test_elem_sym_generating_identity(vals):
    e = elem_sym_all(vals)
    n = len(vals)
    p = Polynomial.from_roots(vals)
    assert p.coeffs == tuple((-1) ** (n - i) * e[n - i] for i in range(n + 1))
    brute = [sum((_prod(c) for c in itertools.combinations(vals, k)), mpq(0)) for k in range(n + 1)]
    assert e == brute


def _prod(values):
    p = mpq(1)
    for v in values:
        p *= v
    return p


# --- scalars --------------------------------------------------------------


def test_parse_and_format():
    assert parse_scalar("-5/3") == mpq(-5, 3)
    assert parse_scalar("0.25") == mpq(1, 4)
    assert format_scalar(mpq(7, 9)) == "7/9"
    assert format_scalar(mpq(4)) == "4"
    assert format_scalar(parse_scalar("inf")) == "inf"
    with pytest.raises(ParseError):
        parse_scalar("abc")
    with working_precision(64):
        x = parse_scalar("1/3", bits=64)
        assert x.precision == 64
        assert parse_scalar(format_scalar(x), bits=64) == x
    assert as_scalar(0.5) == mpq(1, 2) and as_scalar(Fraction(2, 3)) == mpq(2, 3)


@given(st.integers(min_value=64, max_value=1024))
def test_decimal_round_trip(bits):
    with working_precision(bits):
        x = mpfr(1) / 7
        assert parse_scalar(format_scalar(x), bits=bits) == x
        assert decimal_digits(bits) >= bits * 0.30103


@given(rationals, rationals)
def test_simplest_rational(a, b):
    if a == b:
        return
    lo, hi = min(a, b), max(a, b)
    q = simplest_rational(lo, hi)
    assert lo < q < hi
    # No rational with a smaller denominator lies strictly inside.
    for d in range(1, q.denominator):
        k = int(lo * d) - 1
        while mpq(k, d) <= lo:
            k += 1
        assert not mpq(k, d) < hi


def test_precision_env_override():
    code = "from quadforge.numerics import DEFAULT_PRECISION, working_precision as w\nwith w() as b: print(DEFAULT_PRECISION, b)"
    env = dict(os.environ, QUADFORGE_PRECISION_BITS="96")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout
    assert out.split() == ["96", "96"]


def test_precision_floor():
    with pytest.raises(ValueError):
        with working_precision(32):
            pass
