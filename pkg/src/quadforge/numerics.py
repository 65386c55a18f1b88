"""Scalar arithmetic, polynomials and the structured linear algebra used everywhere.

Exact values are ``gmpy2.mpq``; inexact values are ``gmpy2.mpfr`` (or ``mpc`` for
intermediate complex nodes) at the precision of the active gmpy2 context.  Mixed
expressions promote to the inexact type, so a routine written once serves both
the rational and the fixed-precision mode.
"""

from __future__ import annotations

import math
import os
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence, Union

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr, mpq

from .exceptions import (
    DimensionMismatch,
    DuplicateAbscissae,
    DuplicateNodes,
    IndexOutOfRange,
    ParseError,
    ZeroPolynomial,
)

Scalar = Union[mpq, mpfr]
Number = Union[mpq, mpfr, mpc]

DEFAULT_PRECISION = int(os.environ.get("QUADFORGE_PRECISION_BITS", "256"))
MIN_PRECISION = 64
# Largest polynomial degree handled by the structured solvers without opt-in.
MAX_DEGREE = 64

_MPQ = type(mpq(0))
_MPFR = type(mpfr(0))
_MPC = type(mpc(0))
_MPZ = type(gmpy2.mpz(0))


@contextmanager
def working_precision(bits: int | None = None) -> Iterator[int]:
    """Run a block with gmpy2 real and complex arithmetic at ``bits`` bits."""
    bits = DEFAULT_PRECISION if bits is None else int(bits)
    if bits < MIN_PRECISION:
        raise ValueError(f"precision must be at least {MIN_PRECISION} bits, got {bits}")
    with gmpy2.context(gmpy2.get_context(), precision=bits, real_prec=bits, imag_prec=bits):
        yield bits


def current_precision() -> int:
    return gmpy2.get_context().precision


def tolerance(bits: int | None = None) -> mpfr:
    """Classification threshold ``2**(-bits/2)`` used for zero and realness tests."""
    bits = current_precision() if bits is None else bits
    return mpfr(2) ** (-(bits // 2))


def is_exact(x) -> bool:
    return isinstance(x, (_MPQ, _MPZ, int, Fraction))


def all_exact(values: Iterable) -> bool:
    return all(is_exact(v) for v in values)


def is_complex(x) -> bool:
    return isinstance(x, (_MPC, complex))


def as_scalar(value) -> Number:
    """Convert user input to an ``mpq`` when it is exact, else to ``mpfr``/``mpc``.

    Strings may be integers, ``p/q`` fractions or decimals; decimals are read as the
    exact rational they denote.  Python floats convert to their exact binary value.
    """
    if isinstance(value, (_MPQ, _MPFR, _MPC)):
        return value
    if isinstance(value, (int, _MPZ)):
        return mpq(value)
    if isinstance(value, Fraction):
        return mpq(value.numerator, value.denominator)
    if isinstance(value, float):
        if math.isinf(value) or math.isnan(value):
            return mpfr(value)
        return mpq(value)
    if isinstance(value, complex):
        return mpc(value)
    if isinstance(value, str):
        return parse_scalar(value)
    raise TypeError(f"cannot convert {type(value).__name__} to a scalar")


def parse_scalar(text: str, bits: int | None = None) -> Scalar:
    """Parse ``p/q``, an integer, a decimal, or ``inf``/``-inf``.

    With ``bits`` the value is rounded to an ``mpfr`` of that precision.
    """
    s = text.strip().replace("_", "")
    low = s.lower()
    if low in ("inf", "+inf", "infinity", "+infinity"):
        return mpfr("inf")
    if low in ("-inf", "-infinity"):
        return mpfr("-inf")
    try:
        if "/" in s:
            num, den = s.split("/")
            q = mpq(int(num), int(den))
        else:
            q = mpq(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"not a number: {text!r}") from exc
    if bits is not None:
        with working_precision(bits):
            return mpfr(q)
    return q


def to_real(x) -> mpfr:
    """Round to an ``mpfr`` at the current context precision."""
    return mpfr(x)


def decimal_digits(bits: int) -> int:
    """Significant decimal digits that make ``bits``-bit values round-trip."""
    return int(math.ceil(bits * math.log10(2))) + 1


def format_scalar(x, digits: int | None = None) -> str:
    """Canonical text form: ``p/q`` for rationals, scientific notation otherwise."""
    if is_exact(x):
        q = as_scalar(x)
        return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"
    if is_complex(x):
        return f"({format_scalar(x.real, digits)}{'+' if x.imag >= 0 else '-'}{format_scalar(abs(x.imag), digits)}j)"
    x = mpfr(x)
    if gmpy2.is_infinite(x):
        return "inf" if x > 0 else "-inf"
    if gmpy2.is_nan(x):
        return "nan"
    if digits is None:
        digits = decimal_digits(x.precision)
    if x == 0:
        return "0"
    mant, exp, _ = x.digits(10, digits)
    sign = ""
    if mant.startswith("-"):
        sign, mant = "-", mant[1:]
    mant = mant.rstrip("0") or "0"
    e = exp - 1
    body = mant[0] + ("." + mant[1:] if len(mant) > 1 else "")
    return f"{sign}{body}e{e:+d}"


def simplest_rational(lo, hi) -> mpq:
    """The rational with the smallest denominator strictly between ``lo < hi``.

    Continued-fraction descent on the two endpoints, which are converted exactly.
    """
    a, b = mpq(lo), mpq(hi)
    if not a < b:
        raise ValueError("need lo < hi")
    if a < 0 < b:
        return mpq(0)
    if b <= 0:
        return -simplest_rational(-b, -a)
    n = mpq(int(gmpy2.floor(a)))
    if n + 1 < b:
        return n + 1
    if a == n:
        return n + mpq(1, int(gmpy2.floor(1 / (b - n))) + 1)
    return n + 1 / simplest_rational(1 / (b - n), 1 / (a - n))


def exact_or_real(values: Sequence) -> list:
    """Return ``values`` unchanged if all are exact, otherwise all as ``mpfr``."""
    if all_exact(values):
        return [as_scalar(v) for v in values]
    return [mpfr(v) if not is_complex(v) else v for v in values]


# ---------------------------------------------------------------------------
# Polynomials


@dataclass(frozen=True)
class Polynomial:
    """Dense polynomial with coefficients in ascending order of degree."""

    coeffs: tuple

    def __post_init__(self):
        c = [as_scalar(v) for v in self.coeffs]
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def from_roots(cls, roots: Iterable) -> "Polynomial":
        c = [mpq(1)]
        for r in roots:
            r = as_scalar(r)
            nxt = [mpq(0)] * (len(c) + 1)
            for i, ci in enumerate(c):
                nxt[i + 1] += ci
                nxt[i] -= r * ci
            c = nxt
        return cls(tuple(c))

    @classmethod
    def monomial(cls, degree: int) -> "Polynomial":
        return cls(tuple([mpq(0)] * degree + [mpq(1)]))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def is_exact(self) -> bool:
        return all_exact(self.coeffs)

    def __call__(self, x):
        acc = mpq(0)
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def value_and_derivative(self, x):
        p, dp = mpq(0), mpq(0)
        for c in reversed(self.coeffs):
            dp = dp * x + p
            p = p * x + c
        return p, dp

    def derivative(self) -> "Polynomial":
        return Polynomial(tuple(i * c for i, c in enumerate(self.coeffs) if i))

    def __add__(self, other: "Polynomial") -> "Polynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        a = list(self.coeffs) + [mpq(0)] * (n - len(self.coeffs))
        b = list(other.coeffs) + [mpq(0)] * (n - len(other.coeffs))
        return Polynomial(tuple(x + y for x, y in zip(a, b)))

    def __neg__(self) -> "Polynomial":
        return Polynomial(tuple(-c for c in self.coeffs))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            return Polynomial(tuple(c * other for c in self.coeffs))
        if self.is_zero or other.is_zero:
            return Polynomial(())
        out = [mpq(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Polynomial(tuple(out))

    __rmul__ = __mul__

    def monic(self) -> "Polynomial":
        if self.is_zero:
            raise ZeroPolynomial("zero polynomial has no leading coefficient")
        lead = self.coeffs[-1]
        return Polynomial(tuple(c / lead for c in self.coeffs))

    def integrate(self, moments: Sequence) -> Scalar:
        """Apply the linear functional ``x**j -> moments[j]``."""
        if len(moments) < len(self.coeffs):
            raise DimensionMismatch("not enough moments to integrate polynomial")
        return sum((c * m for c, m in zip(self.coeffs, moments)), mpq(0))

    def __str__(self) -> str:
        if self.is_zero:
            return "0"
        terms = []
        for i in range(self.degree, -1, -1):
            c = self.coeffs[i]
            if c == 0:
                continue
            mon = "" if i == 0 else ("x" if i == 1 else f"x^{i}")
            if mon and c == 1:
                terms.append(mon)
            elif mon and c == -1:
                terms.append("-" + mon)
            else:
                terms.append(format_scalar(c) + ("*" + mon if mon else ""))
        return " + ".join(terms).replace("+ -", "- ")


def nodal_derivatives(nodes: Sequence) -> list:
    """``prod_{j != k} (x_k - x_j)`` for every node, i.e. the nodal polynomial's slope."""
    out = []
    for k, xk in enumerate(nodes):
        p = mpq(1)
        for j, xj in enumerate(nodes):
            if j != k:
                p *= xk - xj
        out.append(p)
    return out


def nodal_value(nodes: Sequence, x):
    p = mpq(1)
    for xj in nodes:
        p *= x - xj
    return p


# ---------------------------------------------------------------------------
# Linear algebra


def _check_distinct(nodes: Sequence, exc=DuplicateNodes) -> None:
    if any(is_complex(v) for v in nodes):
        for i in range(len(nodes)):
            for j in range(i):
                if nodes[i] == nodes[j]:
                    raise exc(f"repeated node {format_scalar(nodes[i])}")
        return
    s = sorted(nodes)
    for a, b in zip(s, s[1:]):
        if a == b:
            raise exc(f"repeated node {format_scalar(a)}")


def solve_vandermonde(nodes: Sequence, rhs: Sequence, allow_large: bool = False) -> list:
    """Solve ``sum_k x_k**j c_k = rhs_j`` for ``j = 0..n-1`` (Bjorck-Pereyra).

    The O(n^2) algorithm is exact for rational data.  Systems of more than
    ``MAX_DEGREE + 1`` unknowns need ``allow_large=True``.

    Examples
    --------
    >>> [str(c) for c in solve_vandermonde([-1, 0, 1], [1, 0, mpq(1, 3)])]
    ['1/6', '2/3', '1/6']
    """
    x = [as_scalar(v) for v in nodes]
    b = [as_scalar(v) for v in rhs]
    n = len(x)
    if len(b) != n:
        raise DimensionMismatch(f"{n} nodes but {len(b)} right-hand-side entries")
    if n - 1 > MAX_DEGREE and not allow_large:
        raise DimensionMismatch(f"system of size {n} exceeds the supported size; pass allow_large=True")
    _check_distinct(x)
    for k in range(n - 1):
        for i in range(n - 1, k, -1):
            b[i] = b[i] - x[k] * b[i - 1]
    for k in range(n - 2, -1, -1):
        for i in range(k + 1, n):
            b[i] = b[i] / (x[i] - x[i - k - 1])
        for i in range(k, n - 1):
            b[i] = b[i] - b[i + 1]
    return b


def null_vector(nodes: Sequence) -> list:
    """Kernel of the ``(n-1) x n`` Vandermonde matrix of ``n`` distinct nodes.

    The kernel is spanned by the divided-difference coefficients
    ``1 / prod_{j != k}(x_k - x_j)``.  The result is scaled so that its entry of
    largest magnitude (first one on ties) equals 1.
    """
    x = [as_scalar(v) for v in nodes]
    if len(x) < 2:
        raise DimensionMismatch("null vector needs at least two nodes")
    _check_distinct(x)
    c = [1 / d for d in nodal_derivatives(x)]
    best = 0
    for i, v in enumerate(c):
        if abs(v) > abs(c[best]):
            best = i
    scale = c[best]
    return [v / scale for v in c]


def solve_dense(matrix: Sequence[Sequence], rhs: Sequence) -> list:
    """Gaussian elimination with partial pivoting for small systems."""
    n = len(rhs)
    a = [[as_scalar(v) for v in row] + [as_scalar(r)] for row, r in zip(matrix, rhs)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(a[r][col]))
        if a[piv][col] == 0:
            raise ArithmeticError("singular system")
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        for r in range(col + 1, n):
            f = a[r][col] / p
            if f != 0:
                row, prow = a[r], a[col]
                for c in range(col, n + 1):
                    row[c] -= f * prow[c]
    out = [mpq(0)] * n
    for r in range(n - 1, -1, -1):
        s = a[r][n]
        for c in range(r + 1, n):
            s -= a[r][c] * out[c]
        out[r] = s / a[r][r]
    return out


def elem_sym_all(values: Sequence, kmax: int | None = None) -> list:
    """Elementary symmetric polynomials ``e_0..e_kmax`` of ``values``."""
    vals = [as_scalar(v) for v in values]
    kmax = len(vals) if kmax is None else min(kmax, len(vals))
    e = [mpq(1)] + [mpq(0)] * kmax
    for i, v in enumerate(vals, 1):
        for j in range(min(i, kmax), 0, -1):
            e[j] += v * e[j - 1]
    return e


def elem_sym(k: int, values: Sequence):
    """Elementary symmetric polynomial ``e_k`` of ``values``.

    >>> elem_sym(2, [1, 2, 3])
    mpq(11,1)
    """
    if k < 0 or k > len(values):
        raise IndexOutOfRange(f"e_{k} undefined for {len(values)} values")
    return elem_sym_all(values, k)[k]


def deflate_elem_sym(e_full: Sequence, x, kmax: int) -> list:
    """``e_0..e_kmax`` of a multiset with one copy of ``x`` removed."""
    out = [mpq(1)]
    for i in range(1, kmax + 1):
        out.append(e_full[i] - x * out[i - 1])
    return out


def interpolate_poly(points: Sequence[tuple]) -> Polynomial:
    """Unique polynomial of degree ``< len(points)`` through ``(t, y)`` pairs."""
    ts = [as_scalar(t) for t, _ in points]
    ys = [as_scalar(y) for _, y in points]
    _check_distinct(ts, DuplicateAbscissae)
    n = len(ts)
    dd = list(ys)
    for level in range(1, n):
        for i in range(n - 1, level - 1, -1):
            dd[i] = (dd[i] - dd[i - 1]) / (ts[i] - ts[i - level])
    # Expand the Newton form from the innermost factor outwards.
    coeffs = [mpq(0)] * n
    for i in range(n - 1, -1, -1):
        nxt = [mpq(0)] * n
        for j in range(n - 1):
            nxt[j + 1] += coeffs[j]
        for j in range(n):
            nxt[j] -= ts[i] * coeffs[j]
        nxt[0] += dd[i]
        coeffs = nxt
    return Polynomial(tuple(coeffs))


# ---------------------------------------------------------------------------
# Roots


@dataclass(frozen=True)
class Root:
    """A polynomial root as a (real, imaginary) pair with a realness flag."""

    real: Scalar
    imag: Scalar
    is_real: bool

    @property
    def value(self) -> Number:
        return self.real if self.is_real else mpc(self.real, self.imag)


def _initial_guesses(coeffs: list, n: int) -> list:
    try:
        desc = [complex(c) for c in reversed(coeffs)]
        est = np.roots(desc)
        if len(est) == n and np.all(np.isfinite(est)):
            out = [mpc(complex(z)) for z in est]
            # Separate coincident starting points, Aberth needs distinct iterates.
            for i in range(n):
                for j in range(i):
                    if out[i] == out[j]:
                        out[i] += mpc(0, 1e-6 * (i + 1))
            return out
    except (OverflowError, ValueError, np.linalg.LinAlgError):
        pass
    radius = 1 + max(abs(c) for c in coeffs[:-1])
    return [mpc(radius * math.cos(2 * math.pi * k / n + 0.4), radius * math.sin(2 * math.pi * k / n + 0.4)) for k in range(n)]


def _horner2(coeffs: list, z):
    p, dp = coeffs[-1], 0
    for c in reversed(coeffs[:-1]):
        dp = dp * z + p
        p = p * z + c
    return p, dp


def _rational_root(poly: Polynomial, x: mpfr, bits: int):
    if not poly.is_exact or gmpy2.is_zero(x):
        return None
    q = gmpy2.f2q(x, mpfr(2) ** (-(bits // 2)) * max(1, abs(x)))
    if q.denominator < 2**64 and poly(q) == 0:
        return q
    return None


def poly_roots(poly: Polynomial, precision: int | None = None, threshold=None, max_iter: int = 200) -> list[Root]:
    """All complex roots by Aberth-Ehrlich iteration.

    Starting values come from the eigenvalues of the double-precision companion
    matrix; iterations run with 32 guard bits and every root gets a final Newton
    step.  Roots with ``|imag| < threshold`` (default ``2**(-precision/2)``, scaled
    by ``max(1, |root|)``) are flagged real.  Rational roots of exact polynomials
    are returned exactly.  Output is ordered by real then imaginary part.
    """
    if poly.is_zero:
        raise ZeroPolynomial("the zero polynomial has no discrete root set")
    bits = current_precision() if precision is None else precision
    coeffs = list(poly.coeffs)
    roots: list[Root] = []
    # Roots at zero are exact.
    shift = 0
    while coeffs[shift] == 0:
        shift += 1
    roots += [Root(mpq(0), mpq(0), True)] * shift
    coeffs = coeffs[shift:]
    n = len(coeffs) - 1
    if n == 0:
        return roots
    reduced = Polynomial(tuple(coeffs))
    if n == 1:
        r = -coeffs[0] / coeffs[1]
        with working_precision(bits):
            if is_exact(r):
                root = Root(r, mpq(0), True)
            elif is_complex(r):
                thr = tolerance(bits) if threshold is None else mpfr(threshold)
                real = abs(r.imag) < thr * max(1, abs(r))
                root = Root(+mpfr(r.real), mpq(0) if real else +mpfr(r.imag), real)
            else:
                root = Root(+mpfr(r), mpq(0), True)
        return sorted(roots + [root], key=lambda t: (t.real, t.imag))
    with working_precision(bits + 32):
        lead = coeffs[-1]
        a = [mpc(c / lead) for c in coeffs]
        z = _initial_guesses(a, n)
        eps = mpfr(2) ** (-(bits + 24))
        loose = mpfr(2) ** (-(bits // 2))
        done = [False] * n
        prev_worst, stalled = None, 0
        for _ in range(max_iter):
            worst = mpfr(0)
            for i in range(n):
                if done[i]:
                    continue
                p, dp = _horner2(a, z[i])
                if p == 0:
                    done[i] = True
                    continue
                s = sum((1 / (z[i] - z[j]) for j in range(n) if j != i), mpc(0))
                ratio = p / dp if dp != 0 else mpc(eps, eps)
                w = ratio / (1 - ratio * s)
                z[i] -= w
                step = abs(w) / max(1, abs(z[i]))
                if step < eps:
                    done[i] = True
                worst = max(worst, step)
            if worst < eps:
                break
            # Rounding noise can keep steps above eps; stop once they no longer shrink.
            if worst < loose and prev_worst is not None and worst > prev_worst / 4:
                stalled += 1
                if stalled >= 3:
                    break
            else:
                stalled = 0
            prev_worst = worst
        thr = tolerance(bits) if threshold is None else mpfr(threshold)
        found = []
        for zi in z:
            p, dp = _horner2(a, zi)
            if dp != 0:
                zi = zi - p / dp
            if abs(zi.imag) < thr * max(1, abs(zi)):
                with working_precision(bits):
                    x = +mpfr(zi.real)
                    q = _rational_root(reduced, x, bits)
                    found.append(Root(q if q is not None else x, mpq(0), True))
            else:
                with working_precision(bits):
                    zr = +mpc(zi)
                    found.append(Root(zr.real, zr.imag, False))
    return sorted(roots + found, key=lambda t: (t.real, t.imag))


def real_roots(poly: Polynomial, precision: int | None = None) -> list | None:
    """Real roots in ascending order, or ``None`` if any root is non-real."""
    rs = poly_roots(poly, precision)
    if not all(r.is_real for r in rs):
        return None
    return [r.real for r in rs]
