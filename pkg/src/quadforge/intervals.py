"""Finite unions of real intervals with open or closed endpoints."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from gmpy2 import mpfr

from .exceptions import ParseError
from .numerics import format_scalar, parse_scalar

INF = mpfr("inf")
NINF = mpfr("-inf")


@dataclass(frozen=True)
class Interval:
    lo: object
    hi: object
    lo_closed: bool
    hi_closed: bool

    def __post_init__(self):
        # Infinite endpoints are never attained.
        if self.lo == NINF:
            object.__setattr__(self, "lo_closed", False)
        if self.hi == INF:
            object.__setattr__(self, "hi_closed", False)

    @property
    def is_empty(self) -> bool:
        if self.lo < self.hi:
            return False
        return not (self.lo == self.hi and self.lo_closed and self.hi_closed)

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi and not self.is_empty

    def __contains__(self, x) -> bool:
        if x < self.lo or x > self.hi:
            return False
        if x == self.lo and not self.lo_closed:
            return False
        if x == self.hi and not self.hi_closed:
            return False
        return True

    def sample(self):
        """A point inside the interval, preferring the midpoint."""
        if self.lo == NINF and self.hi == INF:
            return 0
        if self.lo == NINF:
            return self.hi - 1
        if self.hi == INF:
            return self.lo + 1
        return (self.lo + self.hi) / 2

    def __str__(self) -> str:
        if self.is_point:
            return "{" + format_scalar(self.lo) + "}"
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{format_scalar(self.lo)},{format_scalar(self.hi)}{right}"


class IntervalSet:
    """Normalised (sorted, disjoint, non-adjacent) union of intervals."""

    __slots__ = ("intervals",)

    def __init__(self, intervals: Iterable[Interval] = ()):
        self.intervals = tuple(_normalise(intervals))

    @classmethod
    def real_line(cls) -> "IntervalSet":
        return cls([Interval(NINF, INF, False, False)])

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls()

    @classmethod
    def closed(cls, lo, hi) -> "IntervalSet":
        return cls([Interval(lo, hi, True, True)])

    @classmethod
    def point(cls, x) -> "IntervalSet":
        return cls([Interval(x, x, True, True)])

    @classmethod
    def half_open(cls, lo, hi, lo_closed: bool, hi_closed: bool) -> "IntervalSet":
        return cls([Interval(lo, hi, lo_closed, hi_closed)])

    def __iter__(self) -> Iterator[Interval]:
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    def __bool__(self) -> bool:
        return bool(self.intervals)

    def __contains__(self, x) -> bool:
        return any(x in iv for iv in self.intervals)

    def component(self, x) -> Interval | None:
        for iv in self.intervals:
            if x in iv:
                return iv
        return None

    def complement(self) -> "IntervalSet":
        out = []
        lo, lo_closed = NINF, False
        for iv in self.intervals:
            out.append(Interval(lo, iv.lo, lo_closed, not iv.lo_closed))
            lo, lo_closed = iv.hi, not iv.hi_closed
        out.append(Interval(lo, INF, lo_closed, False))
        return IntervalSet(out)

    __invert__ = complement

    def __or__(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self.intervals + other.intervals)

    def __and__(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        i = j = 0
        a, b = self.intervals, other.intervals
        while i < len(a) and j < len(b):
            piece = _intersect(a[i], b[j])
            if piece is not None:
                out.append(piece)
            # Advance whichever interval ends first.
            if (a[i].hi, a[i].hi_closed) < (b[j].hi, b[j].hi_closed):
                i += 1
            else:
                j += 1
        return IntervalSet(out)

    def __sub__(self, other: "IntervalSet") -> "IntervalSet":
        return self & other.complement()

    def remove_points(self, points: Iterable) -> "IntervalSet":
        pts = list(points)
        if not pts:
            return self
        return self - IntervalSet(Interval(p, p, True, True) for p in pts)

    def __eq__(self, other) -> bool:
        return isinstance(other, IntervalSet) and self.intervals == other.intervals

    def __hash__(self) -> int:
        return hash(self.intervals)

    def format(self) -> str:
        """Space separated text such as ``(-inf,-5/3] [0,7/9]``; ``{}`` when empty."""
        return " ".join(str(iv) for iv in self.intervals) if self.intervals else "{}"

    __str__ = format

    def __repr__(self) -> str:
        return f"IntervalSet({self.format()})"

    def to_records(self) -> list[tuple]:
        return [(format_scalar(iv.lo), format_scalar(iv.hi), iv.lo_closed, iv.hi_closed) for iv in self.intervals]

    @classmethod
    def from_records(cls, records: Iterable) -> "IntervalSet":
        out = []
        for rec in records:
            try:
                lo, hi, lc, hc = rec
            except ValueError as exc:
                raise ParseError(f"bad interval record {rec!r}") from exc
            lo = parse_scalar(lo) if isinstance(lo, str) else lo
            hi = parse_scalar(hi) if isinstance(hi, str) else hi
            out.append(Interval(lo, hi, bool(lc), bool(hc)))
        return cls(out)

    def measure(self):
        """Total length; infinite when unbounded."""
        return sum((iv.hi - iv.lo for iv in self.intervals), 0)


def _intersect(a: Interval, b: Interval) -> Interval | None:
    if a.lo > b.lo or (a.lo == b.lo and not a.lo_closed):
        lo, lc = a.lo, a.lo_closed
    else:
        lo, lc = b.lo, b.lo_closed
    if a.hi < b.hi or (a.hi == b.hi and not a.hi_closed):
        hi, hc = a.hi, a.hi_closed
    else:
        hi, hc = b.hi, b.hi_closed
    piece = Interval(lo, hi, lc, hc)
    return None if piece.is_empty else piece


def _normalise(intervals: Iterable[Interval]) -> list[Interval]:
    ivs = sorted((iv for iv in intervals if not iv.is_empty), key=lambda iv: (iv.lo, not iv.lo_closed))
    out: list[Interval] = []
    for iv in ivs:
        if out:
            last = out[-1]
            touches = iv.lo < last.hi or (iv.lo == last.hi and (iv.lo_closed or last.hi_closed))
            if touches:
                if iv.hi > last.hi or (iv.hi == last.hi and iv.hi_closed):
                    out[-1] = Interval(last.lo, iv.hi, last.lo_closed, iv.hi_closed)
                continue
        out.append(iv)
    return out


def sign_set(n1, n0, d1, d0) -> IntervalSet:
    """``{x : (n1 x + n0) / (d1 x + d0) >= 0}``, the pole excluded.

    The numerator and denominator are affine; the answer is exact when the
    coefficients are.  A vanishing denominator everywhere yields the empty set.
    """
    if d1 == 0:
        if d0 == 0:
            return IntervalSet.empty()
        if n1 == 0:
            return IntervalSet.real_line() if n0 * d0 >= 0 else IntervalSet.empty()
        root = -n0 / n1
        pos_right = (n1 > 0) == (d0 > 0)
        if pos_right:
            return IntervalSet([Interval(root, INF, True, False)])
        return IntervalSet([Interval(NINF, root, False, True)])
    pole = -d0 / d1
    cuts = [pole]
    root = None
    if n1 != 0:
        root = -n0 / n1
        if root != pole:
            cuts.append(root)
    cuts.sort()
    bounds = [NINF] + cuts + [INF]
    pieces = []
    for lo, hi in zip(bounds, bounds[1:]):
        probe = Interval(lo, hi, False, False).sample()
        val_n = n1 * probe + n0
        val_d = d1 * probe + d0
        if val_n == 0 or (val_n > 0) == (val_d > 0):
            pieces.append(Interval(lo, hi, False, False))
    out = IntervalSet(pieces)
    if root is not None and root != pole:
        out = out | IntervalSet.point(root)
    elif n1 == 0 and n0 == 0:
        out = IntervalSet.real_line()
    return out.remove_points([pole])
