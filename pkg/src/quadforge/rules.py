"""Quadrature rules: construction from nodes, exactness checks and serialization."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

from gmpy2 import mpfr, mpq

from .exceptions import (
    ChecksumMismatch,
    DimensionMismatch,
    DuplicateNodes,
    EvaluationFailure,
    MomentUnavailable,
    ParseError,
)
from .measures import Measure, parse_measure
from .numerics import (
    Scalar,
    all_exact,
    as_scalar,
    current_precision,
    format_scalar,
    is_exact,
    parse_scalar,
    solve_vandermonde,
    tolerance,
    working_precision,
)


def _precision_of(values: Sequence) -> int | None:
    precs = [v.precision for v in values if not is_exact(v)]
    return max(precs) if precs else None


def degree_tolerance(nodes: Sequence, weights: Sequence) -> Scalar:
    """Zero threshold ``2**(-p/2)`` for rules held at ``p`` bits; exact rules use 0."""
    prec = _precision_of(list(nodes) + list(weights))
    return mpq(0) if prec is None else tolerance(prec)


def moment_residual(nodes: Sequence, weights: Sequence, measure: Measure, j: int) -> Scalar:
    return measure.moment(j) - sum((w * x**j for x, w in zip(nodes, weights)), mpq(0))


def verified_degree(nodes: Sequence, weights: Sequence, measure: Measure, tol=None) -> int:
    """Largest ``K`` with ``|A x**j - mu_j| <= tol * scale_j`` for every ``j <= K``.

    ``scale_j`` is the larger of ``|mu_j|`` and ``sum |w_k x_k**j|``.  No rule with
    ``n`` nodes integrates ``x**(2n)`` exactly for a positive measure, so the
    search stops there; it also stops at the last available moment.
    """
    tol = degree_tolerance(nodes, weights) if tol is None else tol
    cap = 2 * len(nodes)
    limit = measure.available()
    if limit is not None:
        cap = min(cap, limit - 1)
    degree = -1
    powers = [mpq(1)] * len(nodes)
    for j in range(cap + 1):
        if j:
            powers = [p * x for p, x in zip(powers, nodes)]
        terms = [w * p for w, p in zip(weights, powers)]
        mu = measure.moment(j)
        resid = mu - sum(terms, mpq(0))
        if tol == 0:
            ok = resid == 0
        else:
            scale = max(abs(mu), sum((abs(t) for t in terms), mpq(0)), mpq(1, 2**64))
            ok = abs(resid) <= tol * scale
        if not ok:
            break
        degree = j
    return degree


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes, weights and the measure they integrate against.

    Nodes are stored in ascending order (weights follow them) and must be distinct.
    ``verified_degree`` is computed on construction when not supplied.
    """

    nodes: tuple
    weights: tuple
    measure: Measure
    verified_degree: int | None = None
    # Position of each stored node in the sequence the caller supplied.
    source_order: tuple = field(default=(), compare=False)

    def __post_init__(self):
        nodes = [as_scalar(x) for x in self.nodes]
        weights = [as_scalar(w) for w in self.weights]
        if len(nodes) != len(weights):
            raise DimensionMismatch(f"{len(nodes)} nodes but {len(weights)} weights")
        if not nodes:
            raise DimensionMismatch("a rule needs at least one node")
        order = sorted(range(len(nodes)), key=lambda i: nodes[i])
        nodes = [nodes[i] for i in order]
        weights = [weights[i] for i in order]
        for a, b in zip(nodes, nodes[1:]):
            if a == b:
                raise DuplicateNodes(f"repeated node {format_scalar(a)}")
        object.__setattr__(self, "nodes", tuple(nodes))
        object.__setattr__(self, "weights", tuple(weights))
        if not self.source_order:
            object.__setattr__(self, "source_order", tuple(order))
        if self.verified_degree is None:
            object.__setattr__(self, "verified_degree", verified_degree(nodes, weights, self.measure))

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def n(self) -> int:
        """Index ``N`` of the rule, one less than its number of nodes."""
        return len(self.nodes) - 1

    @property
    def is_exact(self) -> bool:
        return all_exact(self.nodes + self.weights)

    @property
    def precision(self) -> int | None:
        return _precision_of(self.nodes + self.weights)

    @property
    def mode(self) -> str:
        p = self.precision
        return "rational" if p is None else f"decimal:{p}"

    @property
    def tol(self) -> Scalar:
        return degree_tolerance(self.nodes, self.weights)

    @property
    def is_interpolatory(self) -> bool:
        return self.verified_degree >= self.n

    @property
    def is_positive(self) -> bool:
        tol = self.tol
        return all(w >= -tol * max(1, abs(w)) for w in self.weights)

    def inside_domain(self) -> bool:
        return all(self.measure.inside(x) for x in self.nodes)

    def deficit(self, j: int) -> Scalar:
        """``mu_j - A(x**j)``; zero for every ``j`` up to the degree of exactness."""
        return moment_residual(self.nodes, self.weights, self.measure, j)

    def normalize(self) -> "QuadratureRule":
        """Drop nodes whose weight is zero (within tolerance in fixed precision)."""
        tol = self.tol
        keep = [i for i, w in enumerate(self.weights) if abs(w) > tol]
        if len(keep) == len(self.weights) or not keep:
            return self
        return QuadratureRule(
            tuple(self.nodes[i] for i in keep),
            tuple(self.weights[i] for i in keep),
            self.measure,
            self.verified_degree,
        )

    def with_weights(self, weights: Sequence) -> "QuadratureRule":
        return QuadratureRule(self.nodes, tuple(weights), self.measure)

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class ExtensionDeficit:
    order: int
    value: Scalar


@dataclass(frozen=True)
class WeightCorrection:
    """Additive change to a weight vector; ``zeroed_rows`` are the weights it kills."""

    entries: tuple
    zeroed_rows: tuple = ()


def weights_from_nodes(nodes: Sequence, measure: Measure, allow_large: bool = False) -> QuadratureRule:
    """Interpolatory rule: solve the moment equations for ``N + 1`` distinct nodes.

    >>> from quadforge.measures import uniform
    >>> [str(w) for w in weights_from_nodes(["-1", "-1/6", "1"], uniform(-1, 1)).weights]
    ['1/10', '24/35', '3/14']
    """
    xs = [as_scalar(x) for x in nodes]
    mus = measure.moments(len(xs))
    if len(mus) < len(xs):
        raise MomentUnavailable(f"{len(xs)} nodes need {len(xs)} moments")
    # The structured solver is order independent; sort so weights line up with stored nodes.
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    xs_sorted = [xs[i] for i in order]
    w = solve_vandermonde(xs_sorted, mus, allow_large=allow_large)
    rule = QuadratureRule(tuple(xs_sorted), tuple(w), measure, source_order=tuple(order))
    return rule


def apply(rule: QuadratureRule, f: Callable) -> Scalar:
    """``sum_k w_k f(x_k)``; exceptions raised by ``f`` surface as EvaluationFailure."""
    total = mpq(0)
    for x, w in zip(rule.nodes, rule.weights):
        try:
            fx = f(x)
        except Exception as exc:  # noqa: BLE001 - re-raised with context
            raise EvaluationFailure(f"integrand failed at x = {format_scalar(x)}: {exc}") from exc
        total += w * fx
    return total


def extension_deficit(rule: QuadratureRule, j: int) -> ExtensionDeficit:
    return ExtensionDeficit(j, rule.deficit(j))


# ---------------------------------------------------------------------------
# Serialization


FORMAT = "quadforge-rule/1"


def _encode(values: Sequence, mode: str) -> list[str]:
    if mode == "rational":
        return [format_scalar(v) for v in values]
    bits = int(mode.split(":", 1)[1])
    with working_precision(bits):
        return [format_scalar(mpfr(v)) for v in values]


def _checksum(mode: str, nodes: list[str], weights: list[str]) -> str:
    canon = mode + "\n" + ",".join(nodes) + "\n" + ",".join(weights)
    return "sha256:" + hashlib.sha256(canon.encode()).hexdigest()


def rule_to_document(rule: QuadratureRule, mode: str | None = None, **extra) -> dict:
    mode = mode or rule.mode
    if mode == "rational" and not rule.is_exact:
        mode = rule.mode
    nodes = _encode(rule.nodes, mode)
    weights = _encode(rule.weights, mode)
    doc = {
        "format": FORMAT,
        "measure": rule.measure.label,
        "mode": mode,
        "nodes": nodes,
        "weights": weights,
        "verified_degree": rule.verified_degree,
        "checksum": _checksum(mode, nodes, weights),
    }
    doc.update(extra)
    return doc


def rule_from_document(doc: dict, registry: dict | None = None) -> QuadratureRule:
    try:
        mode = doc["mode"]
        nodes, weights = list(doc["nodes"]), list(doc["weights"])
        measure_ref = doc["measure"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"rule document missing field: {exc}") from exc
    if "checksum" in doc and doc["checksum"] != _checksum(mode, nodes, weights):
        raise ChecksumMismatch("node/weight checksum does not match document contents")
    measure = measure_ref if isinstance(measure_ref, Measure) else parse_measure(measure_ref, registry)
    if mode == "rational":
        xs = [parse_scalar(s) for s in nodes]
        ws = [parse_scalar(s) for s in weights]
        return QuadratureRule(tuple(xs), tuple(ws), measure)
    if not mode.startswith("decimal:"):
        raise ParseError(f"unknown mode {mode!r}")
    bits = int(mode.split(":", 1)[1])
    with working_precision(bits):
        xs = [parse_scalar(s, bits) for s in nodes]
        ws = [parse_scalar(s, bits) for s in weights]
        return QuadratureRule(tuple(xs), tuple(ws), measure)


def save_rule(rule: QuadratureRule, mode: str | None = None, **extra) -> str:
    return json.dumps(rule_to_document(rule, mode, **extra), indent=2)


def load_rule(text: str, registry: dict | None = None) -> QuadratureRule:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not a rule document: {exc}") from exc
    return rule_from_document(doc, registry)


def sequence_to_document(rules: Sequence[QuadratureRule], mode: str | None = None, **manifest) -> dict:
    """A list of rule documents plus cumulative counts of distinct evaluation points."""
    seen: list = []
    counts = []
    for r in rules:
        for x in r.nodes:
            if not any(_same_point(x, y) for y in seen):
                seen.append(x)
        counts.append(len(seen))
    manifest = dict(manifest)
    manifest.update(
        {
            "levels": len(rules),
            "node_counts": [r.size for r in rules],
            "cumulative_unique_nodes": counts,
        }
    )
    return {"manifest": manifest, "rules": [rule_to_document(r, mode) for r in rules]}


def sequence_from_document(doc: dict, registry: dict | None = None) -> list[QuadratureRule]:
    return [rule_from_document(d, registry) for d in doc["rules"]]


def _same_point(x, y) -> bool:
    if is_exact(x) and is_exact(y):
        return x == y
    return abs(x - y) <= tolerance(min(_prec(x), _prec(y))) * max(1, abs(x))


def _prec(x) -> int:
    return current_precision() if is_exact(x) else x.precision


def unique_points(rules: Sequence[QuadratureRule]) -> list:
    seen: list = []
    for r in rules:
        for x in r.nodes:
            if not any(_same_point(x, y) for y in seen):
                seen.append(x)
    return seen
