"""End-to-end rule constructors and the two rule sequences."""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field
from typing import Sequence

from gmpy2 import const_pi, cos, mpfr, mpq

from .exceptions import DegenerateWeight, NotFound, UnboundedDomain
from .extendM import ExtensionCandidate, explore_additions, minimal_extension, patterson_extension
from .extend1 import NodeColumns, removable_from_columns
from .measures import Measure, affine_map
from .numerics import (
    DEFAULT_PRECISION,
    current_precision,
    is_exact,
    nodal_derivatives,
    nodal_value,
    tolerance,
    working_precision,
)
from .rules import QuadratureRule, unique_points, weights_from_nodes

# cos(pi * t) for the rational t where it is rational.
_RATIONAL_COS = {mpq(0): mpq(1), mpq(1, 3): mpq(1, 2), mpq(1, 2): mpq(0), mpq(2, 3): mpq(-1, 2), mpq(1): mpq(-1)}


def _bits(precision: int | None) -> int:
    if precision is not None:
        return precision
    ctx = current_precision()
    return ctx if ctx > 53 else DEFAULT_PRECISION


def clenshaw_curtis(n: int, measure: Measure, precision: int | None = None) -> QuadratureRule:
    """Interpolatory rule on the ``n + 1`` Chebyshev extrema ``cos(k pi / n)`` mapped to the domain.

    Nodes whose cosine is rational are exact, which keeps the nesting
    ``X_(2^L) in X_(2^(L+1))`` exact as well.
    """
    if n < 1:
        raise ValueError("Clenshaw-Curtis needs n >= 1")
    if not measure.bounded:
        raise UnboundedDomain("Clenshaw-Curtis nodes need a bounded domain")
    with working_precision(_bits(precision)):
        nodes = []
        for k in range(n + 1):
            t = mpq(k, n)
            c = _RATIONAL_COS.get(t)
            if c is None:
                c = cos(const_pi() * mpfr(t))
            nodes.append(affine_map(c, (-1, 1), (measure.a, measure.b)))
        return weights_from_nodes(nodes, measure, allow_large=True)


_gauss_cache: dict = {}
_gauss_lock = threading.Lock()


# Above this size the nodal polynomial is solved for directly; the staged
# embedding gives the same nodes but costs one root solve per stage.
EMBEDDING_LIMIT = 16


def guard_bits(n: int) -> int:
    """Extra bits for monomial moment systems with ``n`` unknowns (about 5 bits lost per node)."""
    return 8 * n


def gaussian(measure: Measure, n: int, precision: int | None = None, method: str = "auto") -> QuadratureRule:
    """The ``n``-node Gaussian rule, the extension of the empty rule by ``n`` nodes.

    ``method`` is passed to :func:`patterson_extension`; ``"auto"`` zeroes ``n``
    auxiliary weights for small ``n`` and solves the moment conditions otherwise.
    The work is carried out with :func:`guard_bits` extra bits and rounded back.
    """
    bits = _bits(precision)
    if method == "auto":
        method = "embedding" if n <= EMBEDDING_LIMIT else "direct"
    key = (measure.key, n, bits, method)
    with _gauss_lock:
        hit = _gauss_cache.get(key)
    if hit is not None:
        return hit
    if n < 1:
        raise ValueError("a Gaussian rule needs at least one node")
    if n == 1:
        with working_precision(bits):
            rule = weights_from_nodes([measure.moment(1) / measure.moment(0)], measure)
    else:
        inner = bits + guard_bits(n)
        with working_precision(inner):
            roots = patterson_extension([], measure, n, method=method, precision=inner)
            wide = weights_from_nodes([r.real for r in roots], measure, allow_large=True)
        with working_precision(bits):
            nodes = [mpfr(x) for x in wide.nodes]
            weights = [mpfr(w) for w in wide.weights]
            rule = QuadratureRule(tuple(nodes), tuple(weights), measure)
    with _gauss_lock:
        _gauss_cache[key] = rule
    return rule


def default_init(measure: Measure) -> QuadratureRule:
    """The three-node rule ``{-1, -1/6, 1}`` mapped onto the domain."""
    if not measure.bounded:
        raise UnboundedDomain("default initial rule needs a bounded domain")
    nodes = [affine_map(x, (-1, 1), (measure.a, measure.b)) for x in (mpq(-1), mpq(-1, 6), mpq(1))]
    return weights_from_nodes(nodes, measure)


# ---------------------------------------------------------------------------
# Partially nested sequence


@dataclass
class SequenceResult:
    """Rules of a sequence and bookkeeping about how they were built."""

    rules: list
    unique_evaluations: list = field(default_factory=list)
    extension_sizes: list = field(default_factory=list)
    seed: int | None = None
    complete: bool = True
    schedule: str = ""

    @property
    def total_evaluations(self) -> int:
        return self.unique_evaluations[-1] if self.unique_evaluations else 0


def _same(a, b, tol) -> bool:
    if is_exact(a) and is_exact(b):
        return a == b
    return abs(a - b) <= tol * max(1, abs(a))


class _WorkingRule:
    """Nodes, weights and nodal slopes updated in O(n) per swap."""

    def __init__(self, rule: QuadratureRule):
        self.measure = rule.measure
        self.nodes = list(rule.nodes)
        self.weights = list(rule.weights)
        self.slopes = nodal_derivatives(self.nodes)

    def snapshot(self) -> QuadratureRule:
        return QuadratureRule(tuple(self.nodes), tuple(self.weights), self.measure, verified_degree=len(self.nodes) - 1)

    def swap(self, l: int, x) -> None:
        xl = self.nodes[l]
        eps = -self.weights[l] * self.slopes[l] * (xl - x)
        ell = nodal_value(self.nodes, x)
        slope_x = ell / (x - xl)
        for k in range(len(self.nodes)):
            if k == l:
                continue
            xk = self.nodes[k]
            self.weights[k] += eps / ((xk - x) * self.slopes[k])
            self.slopes[k] *= (xk - x) / (xk - xl)
        self.nodes[l] = x
        self.weights[l] = eps / ell
        self.slopes[l] = slope_x


SCHEDULES = ("round_robin", "smallest_first")


def _replace_into(
    target: QuadratureRule, previous: Sequence, rng: random.Random | None, tol, schedule: str = "round_robin"
) -> tuple[QuadratureRule, int]:
    """Swap nodes of ``previous`` into ``target`` while a swap removes a non-reused node.

    ``round_robin`` sweeps the pending old nodes in ascending order, swapping each
    one that fits, and sweeps again until a full sweep changes nothing.
    ``smallest_first`` restarts from the smallest pending node after every swap.
    With ``rng`` the pending nodes are shuffled before each sweep.
    """
    if schedule not in SCHEDULES:
        raise ValueError(f"unknown schedule {schedule!r}")
    work = _WorkingRule(target)
    # Snap target nodes that coincide with previous nodes onto the exact previous value.
    for i, x in enumerate(work.nodes):
        for y in previous:
            if x != y and _same(x, y, tol):
                work.nodes[i] = y
    reused = {i for i, x in enumerate(work.nodes) if any(x == y for y in previous)}
    swaps = 0
    progressed = True
    while progressed:
        progressed = False
        pending = sorted(y for y in previous if not any(y == x for x in work.nodes))
        if rng is not None:
            rng.shuffle(pending)
        for y in pending:
            cols = NodeColumns(tuple(work.nodes), tuple(work.weights), tuple(work.slopes), None)
            options = removable_from_columns(cols, y, reused, tol)
            if not options:
                continue
            l = options[0] if rng is None else rng.choice(options)
            work.swap(l, y)
            reused.add(l)
            swaps += 1
            progressed = True
            if schedule == "smallest_first":
                break
    return weights_from_nodes(work.nodes, target.measure, allow_large=True), swaps


def partially_nested_sequence(
    measure: Measure,
    n_max: int,
    init: QuadratureRule | None = None,
    rng: random.Random | None = None,
    precision: int | None = None,
    schedule: str = "round_robin",
) -> SequenceResult:
    """Rules of every size from ``init`` up to ``n_max + 1`` nodes, reusing old nodes.

    Level ``n + 1`` starts from the Gaussian rule with ``n + 1`` nodes.  Its nodes
    are then exchanged for nodes of level ``n``: an old node is swapped in when it
    lies in the replacement region of a Gaussian node that is not itself reused.
    See ``_replace_into`` for the order in which old nodes are tried.
    """
    with working_precision(_bits(precision)):
        tol = tolerance()
        current = init if init is not None else default_init(measure)
        if not current.is_positive:
            raise DegenerateWeight("the initial rule must have nonnegative weights")
        rules = [current]
        while current.size <= n_max:
            target = gaussian(measure, current.size + 1)
            current, _ = _replace_into(target, current.nodes, rng, tol, schedule)
            rules.append(current)
        counts = [len(unique_points(rules[: i + 1])) for i in range(len(rules))]
        label = schedule if rng is None else schedule + " (shuffled)"
        return SequenceResult(rules, counts, [1] * (len(rules) - 1), schedule=label)


# ---------------------------------------------------------------------------
# Nested sequence


def nested_sequence(
    measure: Measure,
    n_max: int,
    init: QuadratureRule | None = None,
    seed: int = 0,
    m_max: int = 8,
    explore_steps: int | None = None,
    restrict: bool = True,
    precision: int | None = None,
) -> SequenceResult:
    """Nested rules grown by a minimal number of nodes per level until more than ``n_max`` nodes.

    Each level draws one feasible zero-weight corner of minimal size at random,
    then walks the new nodes through their replacement regions so the new rule
    lies inside the feasible region rather than on its boundary.  On NotFound
    the sequence built so far is returned with ``complete = False``.
    """
    rng = random.Random(seed)
    with working_precision(_bits(precision)):
        current = init if init is not None else default_init(measure)
        rules = [current]
        sizes = []
        complete = True
        while current.size <= n_max:
            try:
                m, cands = minimal_extension(current, m_max=m_max, restrict=restrict, max_candidates=1, rng=rng)
            except NotFound:
                complete = False
                break
            cand: ExtensionCandidate = cands[0]
            steps = 2 * m if explore_steps is None else explore_steps
            if cand.zeroed_indices and steps:
                walk = explore_additions(current, cand, steps, rng, restrict)
                new_nodes = walk[-1]
            else:
                new_nodes = cand.new_nodes
            current = weights_from_nodes(list(current.nodes) + list(new_nodes), measure, allow_large=True)
            rules.append(current)
            sizes.append(m)
        counts = [len(unique_points(rules[: i + 1])) for i in range(len(rules))]
        return SequenceResult(rules, counts, sizes, seed=seed, complete=complete, schedule="random minimal corner, replacement-region walk")


__all__ = [
    "clenshaw_curtis",
    "gaussian",
    "default_init",
    "partially_nested_sequence",
    "nested_sequence",
    "SequenceResult",
]

