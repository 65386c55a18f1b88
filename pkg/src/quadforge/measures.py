"""Probability measures described by their raw moments.

Every measure is normalised (``mu_0 = 1``) except custom ones, which keep the
moments they are given.  Moments are exact rationals whenever the parameters are
rational, and are cached lazily.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Callable, Sequence

import gmpy2
from gmpy2 import mpfr, mpq

from .exceptions import InvalidSpec, MomentUnavailable, ParseError
from .numerics import Scalar, as_scalar, format_scalar, is_exact, parse_scalar

INF = mpfr("inf")


@dataclass(eq=False)
class Measure:
    """A measure on ``[a, b]`` known through its moment sequence.

    Use :func:`uniform`, :func:`beta` or :func:`custom` rather than the constructor.
    """

    kind: str
    a: Scalar
    b: Scalar
    params: tuple = ()
    name: str | None = None
    _generator: Callable[[int], Scalar] | None = field(default=None, repr=False)
    _cache: list = field(default_factory=list, repr=False)
    _limit: int | None = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def bounded(self) -> bool:
        return not (gmpy2.is_infinite(mpfr(self.a)) or gmpy2.is_infinite(mpfr(self.b)))

    @property
    def key(self) -> tuple:
        if self.kind == "custom":
            return ("custom", self.name, id(self))
        return (self.kind, str(self.a), str(self.b), self.params)

    def __hash__(self) -> int:
        return hash(self.key)

    def __eq__(self, other) -> bool:
        return isinstance(other, Measure) and self.key == other.key

    def inside(self, x) -> bool:
        return self.a <= x <= self.b

    def moment(self, k: int) -> Scalar:
        if k < 0:
            raise MomentUnavailable(f"moment index {k} is negative")
        if k < len(self._cache):
            return self._cache[k]
        if self._limit is not None and k >= self._limit:
            raise MomentUnavailable(f"{self.label} provides moments up to order {self._limit - 1}, requested {k}")
        with self._lock:
            while len(self._cache) <= k:
                j = len(self._cache)
                value = self._generator(j)
                self._check(j, value)
                self._cache.append(value)
        return self._cache[k]

    def moments(self, count: int) -> list:
        """The first ``count`` moments ``mu_0 .. mu_{count-1}``."""
        if count > 0:
            self.moment(count - 1)
        return self._cache[:count]

    def available(self) -> int | None:
        """Number of available moments, or ``None`` when unlimited."""
        return self._limit

    def _check(self, k: int, value) -> None:
        if k == 0:
            if not value > 0:
                raise InvalidSpec(f"total mass must be positive, got {format_scalar(value)}")
            return
        if self.bounded:
            r = max(abs(self.a), abs(self.b))
            bound = self.moment(0) * r**k
            slack = 0 if is_exact(value) else abs(bound) * mpfr(2) ** -60 + mpfr(2) ** -200
            if abs(value) > bound + slack:
                raise InvalidSpec(f"moment {k} = {format_scalar(value)} exceeds the bound {format_scalar(bound)} of the domain")

    @property
    def label(self) -> str:
        if self.kind == "uniform":
            return f"uniform:{format_scalar(self.a)}:{format_scalar(self.b)}"
        if self.kind == "beta":
            al, be = self.params
            return f"beta:{format_scalar(al)}:{format_scalar(be)}:{format_scalar(self.a)}:{format_scalar(self.b)}"
        return self.name or "custom"

    def __repr__(self) -> str:
        return f"Measure({self.label})"


def _interval(a, b) -> tuple:
    a, b = as_scalar(a), as_scalar(b)
    if not a < b:
        raise InvalidSpec(f"empty domain [{format_scalar(a)}, {format_scalar(b)}]")
    return a, b


def uniform(a=-1, b=1) -> Measure:
    """Uniform probability measure, density ``1/(b-a)`` on ``[a, b]``."""
    a, b = _interval(a, b)
    if gmpy2.is_infinite(mpfr(a)) or gmpy2.is_infinite(mpfr(b)):
        raise InvalidSpec("uniform measure needs a bounded domain")

    def gen(k: int) -> Scalar:
        return (b ** (k + 1) - a ** (k + 1)) / ((k + 1) * (b - a))

    return Measure("uniform", a, b, _generator=gen)


def beta(alpha, beta_, a=0, b=1) -> Measure:
    """Beta(alpha, beta) distribution mapped affinely onto ``[a, b]``."""
    al, be = as_scalar(alpha), as_scalar(beta_)
    if not (al > 0 and be > 0):
        raise InvalidSpec("beta parameters must be positive")
    a, b = _interval(a, b)
    if gmpy2.is_infinite(mpfr(a)) or gmpy2.is_infinite(mpfr(b)):
        raise InvalidSpec("beta measure needs a bounded domain")
    standard = [mpq(1)]

    def unit(k: int) -> Scalar:
        while len(standard) <= k:
            j = len(standard) - 1
            standard.append(standard[j] * (al + j) / (al + be + j))
        return standard[k]

    def gen(k: int) -> Scalar:
        if a == 0 and b == 1:
            return unit(k)
        h = b - a
        return sum((comb(k, i) * a ** (k - i) * h**i * unit(i) for i in range(k + 1)), mpq(0))

    return Measure("beta", a, b, params=(al, be), _generator=gen)


def custom(domain: tuple, moments: Sequence | None = None, generator: Callable[[int], Scalar] | None = None, name: str | None = None) -> Measure:
    """Measure given by an explicit moment list or a moment generator ``k -> mu_k``."""
    if (moments is None) == (generator is None):
        raise InvalidSpec("give exactly one of a moment list or a generator")
    a, b = _interval(*domain)
    m = Measure("custom", a, b, name=name)
    if moments is not None:
        vals = [as_scalar(v) for v in moments]
        if not vals:
            raise InvalidSpec("custom measure needs at least mu_0")
        m._generator = lambda k: vals[k]
        m._limit = len(vals)
        m.moments(len(vals))
    else:
        m._generator = lambda k: as_scalar(generator(k))
        m.moment(0)
    return m


def raw_moment(measure: Measure, k: int) -> Scalar:
    return measure.moment(k)


def load_moment_file(path: str | Path, name: str | None = None) -> Measure:
    """Read a custom measure: a ``domain a b`` header then one moment per line."""
    lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("domain"):
        raise ParseError(f"{path}: first line must be 'domain a b'")
    parts = lines[0].split()
    if len(parts) != 3:
        raise ParseError(f"{path}: malformed domain line {lines[0]!r}")
    a, b = parse_scalar(parts[1]), parse_scalar(parts[2])
    return custom((a, b), [parse_scalar(s) for s in lines[1:]], name=name or Path(path).stem)


def parse_measure(text: str, registry: dict | None = None) -> Measure:
    """Parse ``uniform:a:b``, ``beta:alpha:beta[:a:b]``, ``custom:<file>`` or a registry name."""
    if registry and text in registry:
        return registry[text]
    head, _, rest = text.partition(":")
    args = [s for s in rest.split(":")] if rest else []
    try:
        if head == "uniform":
            return uniform(*[parse_scalar(s) for s in args]) if args else uniform()
        if head == "beta":
            vals = [parse_scalar(s) for s in args]
            if len(vals) not in (2, 4):
                raise InvalidSpec("beta needs alpha:beta or alpha:beta:a:b")
            return beta(*vals)
        if head == "custom":
            return load_moment_file(rest)
    except ParseError as exc:
        raise InvalidSpec(str(exc)) from exc
    raise InvalidSpec(f"unknown measure {text!r}")


def affine_map(x, src: tuple, dst: tuple):
    """Map ``x`` from interval ``src`` to ``dst``; keeps rationals exact."""
    (a, b), (c, d) = src, dst
    return c + (x - a) * (d - c) / (b - a)


def span(measure: Measure) -> Scalar:
    if not measure.bounded:
        return INF
    return measure.b - measure.a


def is_unbounded(measure: Measure) -> bool:
    return not measure.bounded


__all__ = [
    "Measure",
    "uniform",
    "beta",
    "custom",
    "raw_moment",
    "load_moment_file",
    "parse_measure",
    "affine_map",
]
