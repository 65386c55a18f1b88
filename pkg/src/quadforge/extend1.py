"""Adding or swapping a single node while keeping a rule positive and interpolatory.

Throughout, ``ell'_k`` denotes ``prod_{j != k}(x_k - x_j)`` for the nodes of the rule
and ``eps`` the deficit ``mu_{N+1} - A_N(x**(N+1))``.  Adding a node ``x`` changes the
weights by ``eps / ((x_k - x) ell'_k)`` and gives ``x`` the weight ``eps / ell(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from gmpy2 import mpq

from .exceptions import AtInfinity, DuplicateNode, ZeroWeight
from .intervals import INF, NINF, Interval, IntervalSet, sign_set
from .numerics import Polynomial, as_scalar, nodal_derivatives, nodal_value
from .rules import QuadratureRule, WeightCorrection


@dataclass(frozen=True)
class NodeColumns:
    """Per-node data shared by the single-node constructions."""

    nodes: tuple
    weights: tuple
    slopes: tuple  # ell'_k
    deficit: object  # eps_{N+1}

    @property
    def scaled(self) -> tuple:
        """``a_k = w_k ell'_k``."""
        return tuple(w * s for w, s in zip(self.weights, self.slopes))


def node_columns(rule: QuadratureRule) -> NodeColumns:
    return NodeColumns(rule.nodes, rule.weights, tuple(nodal_derivatives(rule.nodes)), rule.deficit(rule.size))


def _snapped(rule: QuadratureRule) -> NodeColumns:
    cols = node_columns(rule)
    if rule.is_exact:
        return cols
    tol = rule.tol
    weights = tuple(mpq(0) if abs(w) <= tol else w for w in cols.weights)
    eps = cols.deficit
    scale = max(abs(rule.measure.moment(rule.size)), mpq(1, 2**64))
    if abs(eps) <= tol * scale:
        eps = mpq(0)
    return NodeColumns(cols.nodes, weights, cols.slopes, eps)


def _domain(rule: QuadratureRule) -> IntervalSet:
    m = rule.measure
    return IntervalSet([Interval(m.a, m.b, m.a != NINF, m.b != INF)])


def zero_weight_node(rule: QuadratureRule, k: int):
    """The node whose addition sends weight ``k`` to zero: ``x_k + eps / (w_k ell'_k)``.

    When ``eps = 0`` this is ``x_k`` itself, a degenerate addition.
    """
    cols = node_columns(rule)
    w = cols.weights[k]
    if cols.deficit == 0:
        return cols.nodes[k]
    if w == 0:
        raise ZeroWeight(f"weight {k} is zero; no finite node cancels it")
    return cols.nodes[k] + cols.deficit / (w * cols.slopes[k])


def weight_correction(rule: QuadratureRule, x) -> WeightCorrection:
    """Changes to the existing weights when ``x`` is added (degree one higher)."""
    cols = node_columns(rule)
    x = as_scalar(x)
    if x in cols.nodes:
        raise DuplicateNode(f"{x} is already a node")
    entries = tuple(cols.deficit / ((xk - x) * s) for xk, s in zip(cols.nodes, cols.slopes))
    zeroed = tuple(k for k, (c, w) in enumerate(zip(entries, cols.weights)) if w != 0 and c + w == 0)
    return WeightCorrection(entries, zeroed)


def add_node(rule: QuadratureRule, x) -> QuadratureRule:
    """Interpolatory rule on ``X_N + {x}`` from the closed-form weight update.

    >>> from quadforge.measures import uniform
    >>> from quadforge.rules import weights_from_nodes
    >>> r = weights_from_nodes(["-1", "-1/6", "1"], uniform(-1, 1))
    >>> [str(w) for w in add_node(r, "-5/3").weights]
    ['1/24', '0', '16/21', '11/56']
    """
    x = as_scalar(x)
    cols = node_columns(rule)
    if x in cols.nodes:
        raise DuplicateNode(f"{x} is already a node")
    corr = weight_correction(rule, x)
    new_w = [w + c for w, c in zip(cols.weights, corr.entries)]
    new_w.append(cols.deficit / nodal_value(cols.nodes, x))
    return QuadratureRule(cols.nodes + (x,), tuple(new_w), rule.measure)


def addition_set(rule: QuadratureRule, restrict: bool = False) -> IntervalSet:
    """All ``x`` for which the extended rule on ``X_N + {x}`` has nonnegative weights.

    Each existing weight stays nonnegative outside the half-open segment between
    ``x_k`` and its zero-weight node; the new weight ``eps / ell(x)`` is nonnegative on
    alternate gaps between the nodes.  Zero or negative weights are handled by an
    exact sign analysis of their linear-fractional update.  ``restrict`` intersects
    with the support of the measure.
    """
    cols = _snapped(rule)
    nodes, eps = cols.nodes, cols.deficit
    if eps == 0:
        region = IntervalSet.real_line().remove_points(nodes)
        return region & _domain(rule) if restrict else region
    region = IntervalSet.real_line()
    n = len(nodes)
    for k in range(n):
        xk, wk, sk = nodes[k], cols.weights[k], cols.slopes[k]
        if wk > 0:
            z = xk + eps / (wk * sk)
            if z > xk:
                region = region - IntervalSet.half_open(xk, z, True, False)
            else:
                region = region - IntervalSet.half_open(z, xk, False, True)
        else:
            a = wk * sk
            region = region & sign_set(-a, a * xk + eps, -sk, xk * sk)
    # Sign of the new weight eps / ell(x): ell is positive right of the last node and
    # alternates across each node.
    pieces = []
    bounds = [NINF] + list(nodes) + [INF]
    for i, (lo, hi) in enumerate(zip(bounds, bounds[1:])):
        ell_positive = (n - i) % 2 == 0
        if ell_positive == (eps > 0):
            pieces.append(Interval(lo, hi, False, False))
    region = region & IntervalSet(pieces)
    return region & _domain(rule) if restrict else region


def pairwise_corner(rule: QuadratureRule, k: int, l: int):
    """Point where swapping in a node zeroes both ``w_k`` and ``w_l``.

    Equal to ``(a_k x_k - a_l x_l) / (a_k - a_l)`` with ``a_k = w_k ell'_k``; it raises
    AtInfinity when ``a_k = a_l`` (the two zero-weight lines are parallel).
    """
    cols = node_columns(rule)
    ak = cols.weights[k] * cols.slopes[k]
    al = cols.weights[l] * cols.slopes[l]
    if _equal(ak, al, rule):
        raise AtInfinity(f"corner of nodes {k} and {l} is at infinity")
    return (ak * cols.nodes[k] - al * cols.nodes[l]) / (ak - al)


def pairwise_corner_moments(rule: QuadratureRule, k: int, l: int):
    """The same corner from moments only: ``int x ell_kl / int ell_kl``.

    ``ell_kl`` is the nodal polynomial of the rule without nodes ``k`` and ``l``.
    """
    rest = [x for i, x in enumerate(rule.nodes) if i not in (k, l)]
    p = Polynomial.from_roots(rest)
    mus = rule.measure.moments(len(rest) + 2)
    den = p.integrate(mus)
    num = (p * Polynomial.monomial(1)).integrate(mus)
    if _equal(den, 0, rule):
        raise AtInfinity(f"corner of nodes {k} and {l} is at infinity")
    return num / den


def _equal(a, b, rule: QuadratureRule) -> bool:
    if rule.is_exact:
        return a == b
    return abs(a - b) <= rule.tol * max(abs(a), abs(b), mpq(1, 2**64))


def swap_epsilon(cols: NodeColumns, l: int, x):
    """Deficit choice ``eps^[l](x) = -w_l ell'_l (x_l - x)`` that zeroes weight ``l``."""
    return -cols.weights[l] * cols.slopes[l] * (cols.nodes[l] - x)


def replace_with(rule: QuadratureRule, x) -> tuple[QuadratureRule, int]:
    """Add ``x`` and drop the node whose weight the addition drives to zero.

    The free deficit is pushed to the nearest value at which a weight vanishes, on
    the side that keeps the new weight ``eps / ell(x)`` nonnegative.  Ties go to the
    smallest index.  Returns the new rule on ``(X_N + {x}) - {x_k}`` and ``k``.
    """
    x = as_scalar(x)
    cols = _snapped(rule)
    nodes = cols.nodes
    if x in nodes:
        raise DuplicateNode(f"{x} is already a node")
    ell = nodal_value(nodes, x)
    best, best_eps = None, None
    for k in range(len(nodes)):
        ek = swap_epsilon(cols, k, x)
        d = (nodes[k] - x) * cols.slopes[k]
        # Weight k as a function of eps is w_k + eps/d and vanishes at eps = ek.
        if ell > 0 and d < 0 and ek >= 0:
            if best is None or ek < best_eps:
                best, best_eps = k, ek
        elif ell < 0 and d > 0 and ek <= 0:
            if best is None or ek > best_eps:
                best, best_eps = k, ek
    if best is None:
        raise ZeroWeight("no weight can be driven to zero from this node")
    return apply_swap(rule, cols, best, x, best_eps), best


def apply_swap(rule: QuadratureRule, cols: NodeColumns, l: int, x, eps=None) -> QuadratureRule:
    nodes = cols.nodes
    if eps is None:
        eps = swap_epsilon(cols, l, x)
    ell = nodal_value(nodes, x)
    new_nodes, new_w = [], []
    for k, (xk, wk, sk) in enumerate(zip(nodes, cols.weights, cols.slopes)):
        if k == l:
            continue
        new_nodes.append(xk)
        new_w.append(wk + eps / ((xk - x) * sk))
    new_nodes.append(x)
    new_w.append(eps / ell)
    return QuadratureRule(tuple(new_nodes), tuple(new_w), rule.measure)


def swap_node(rule: QuadratureRule, l: int, x) -> QuadratureRule:
    """Replace node ``l`` by ``x`` keeping the degree of exactness."""
    x = as_scalar(x)
    if x == rule.nodes[l]:
        return rule
    if x in rule.nodes:
        raise DuplicateNode(f"{x} is already a node")
    return apply_swap(rule, node_columns(rule), l, x)


def replacement_region(rule: QuadratureRule, l: int, restrict: bool = False) -> IntervalSet:
    """All ``x`` that can take the place of node ``l`` with every weight nonnegative.

    Swapping ``x`` in for ``x_l`` sets weight ``k`` to
    ``[a_k (x_k - x) - a_l (x_l - x)] / (ell'_k (x_k - x))``, a ratio of affine functions that
    vanishes at the corner ``x_(k,l)``, and gives ``x`` the weight ``a_l / ell_{-l}(x)`` where
    ``ell_{-l}`` is the nodal polynomial without ``x_l``.
    """
    cols = _snapped(rule)
    nodes = cols.nodes
    a = cols.scaled
    al, xl = a[l], nodes[l]
    region = IntervalSet.real_line()
    for k in range(len(nodes)):
        if k == l:
            continue
        ak, xk, sk = a[k], nodes[k], cols.slopes[k]
        # numerator: (a_l - a_k) x + a_k x_k - a_l x_l ; denominator: -s_k x + s_k x_k
        region = region & sign_set(al - ak, ak * xk - al * xl, -sk, sk * xk)
        if region.is_empty:
            return region
    if al != 0:
        others = [x for i, x in enumerate(nodes) if i != l]
        bounds = [NINF] + others + [INF]
        pieces = []
        m = len(others)
        for i, (lo, hi) in enumerate(zip(bounds, bounds[1:])):
            positive = (m - i) % 2 == 0
            if positive == (al > 0):
                pieces.append(Interval(lo, hi, False, False))
        region = region & IntervalSet(pieces)
    region = region.remove_points([x for i, x in enumerate(nodes) if i != l])
    return region & _domain(rule) if restrict else region


def replacement_regions(rule: QuadratureRule, restrict: bool = False) -> list[IntervalSet]:
    return [replacement_region(rule, l, restrict) for l in range(rule.size)]


def removable_by(rule: QuadratureRule, x, protected: Sequence[int] = ()) -> list[int]:
    """Indices ``l`` (outside ``protected``) with ``x`` in the replacement region of ``l``.

    Uses the feasible deficit interval at ``x`` rather than building every region.
    """
    tol = 0 if rule.is_exact else rule.tol
    return removable_from_columns(_snapped(rule), as_scalar(x), protected, tol)


def removable_from_columns(cols: NodeColumns, x, protected: Sequence[int], tol) -> list[int]:
    nodes = cols.nodes
    if x in nodes:
        raise DuplicateNode(f"{x} is already a node")
    ell = nodal_value(nodes, x)
    lo, hi = None, None
    eps_k = []
    for k in range(len(nodes)):
        ek = swap_epsilon(cols, k, x)
        d = (nodes[k] - x) * cols.slopes[k]
        eps_k.append((ek, d))
        if d > 0:
            lo = ek if lo is None or ek > lo else lo
        elif d < 0:
            hi = ek if hi is None or ek < hi else hi
    target = hi if ell > 0 else lo
    if target is None:
        return []
    slack = tol * max(abs(target), mpq(1, 2**64))
    return [
        k
        for k, (ek, d) in enumerate(eps_k)
        if k not in protected and cols.weights[k] != 0 and abs(ek - target) <= slack and (d < 0 if ell > 0 else d > 0)
    ]


def addition_lines(rule: QuadratureRule, lo, hi, samples: int = 200) -> list[tuple]:
    """Polylines of the new-weight sign function per node, for plotting.

    Each row is ``(k, x, w_k + eps / ((x_k - x) ell'_k))`` with ``k = N + 1`` for the new node.
    """
    cols = node_columns(rule)
    lo, hi = as_scalar(lo), as_scalar(hi)
    rows = []
    for i in range(samples + 1):
        x = lo + (hi - lo) * mpq(i, samples)
        if x in cols.nodes:
            continue
        for k, (xk, wk, sk) in enumerate(zip(cols.nodes, cols.weights, cols.slopes)):
            rows.append((k, x, wk + cols.deficit / ((xk - x) * sk)))
        rows.append((len(cols.nodes), x, cols.deficit / nodal_value(cols.nodes, x)))
    return rows
