"""Node removal (Caratheodory reduction) for positive interpolatory rules."""

from __future__ import annotations

from dataclasses import dataclass

from gmpy2 import mpq

from .exceptions import DimensionMismatch, SingleNode
from .numerics import null_vector
from .rules import QuadratureRule


@dataclass(frozen=True)
class RemovalOption:
    removed_index: int  # index into the original rule's nodes
    removed_node: object
    step: object  # alpha
    rule: QuadratureRule


def _step(weights, c):
    """Smallest ratio ``w_k / c_k`` over ``c_k > 0``; ties go to the first index."""
    best, alpha = None, None
    for k, (w, ck) in enumerate(zip(weights, c)):
        if ck > 0:
            r = w / ck
            if alpha is None or r < alpha:
                best, alpha = k, r
    return best, alpha


def _reduce_once(rule: QuadratureRule, support: list[int], sign: int) -> RemovalOption | None:
    c_sub = null_vector([rule.nodes[i] for i in support])
    c = [mpq(0)] * rule.size
    for i, v in zip(support, c_sub):
        c[i] = sign * v
    k0, alpha = _step(rule.weights, c)
    if k0 is None:
        return None
    weights = [w - alpha * ck for w, ck in zip(rule.weights, c)]
    keep = [i for i in range(rule.size) if i != k0]
    new = QuadratureRule(
        tuple(rule.nodes[i] for i in keep),
        tuple(weights[i] for i in keep),
        rule.measure,
    )
    return RemovalOption(k0, rule.nodes[k0], alpha, new)


def removal_options(rule: QuadratureRule) -> list[RemovalOption]:
    """Both removal candidates of a positive interpolatory rule.

    A kernel vector ``c`` of the Vandermonde matrix through degree ``N - 1`` is
    subtracted with the largest step keeping every weight nonnegative, for ``c`` and
    for ``-c``.  Each result has ``N`` nodes, nonnegative weights and degree at least
    ``N - 1``.
    """
    if rule.size < 2:
        raise SingleNode("a one-node rule has nothing to remove")
    out = []
    for sign in (1, -1):
        opt = _reduce_once(rule, list(range(rule.size)), sign)
        if opt is not None and all(o.removed_index != opt.removed_index for o in out):
            out.append(opt)
    return out


def reduce_to_interpolatory(rule: QuadratureRule, degree: int | None = None) -> QuadratureRule:
    """Remove nodes from a nonnegative rule until it is interpolatory.

    Keeps exactness through ``degree`` (default: the verified degree) and ends with
    ``degree + 1`` nodes.  Zero weights are dropped first; after that each step
    uses the kernel vector supported on the first ``degree + 2`` nodes.
    """
    degree = rule.verified_degree if degree is None else degree
    if degree < 0:
        raise DimensionMismatch("rule is not exact for constants")
    if any(w < 0 for w in rule.weights):
        raise ValueError("reduction needs nonnegative weights")
    current = rule
    zero = [i for i, w in enumerate(current.weights) if w == 0]
    if zero and current.size - len(zero) >= degree + 1:
        keep = [i for i in range(current.size) if i not in zero]
        current = QuadratureRule(
            tuple(current.nodes[i] for i in keep), tuple(current.weights[i] for i in keep), current.measure
        )
    while current.size > degree + 1:
        opt = _reduce_once(current, list(range(degree + 2)), 1)
        current = opt.rule
    return current
