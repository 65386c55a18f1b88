"""Shared fixtures for the test suite: reference rules and random positive rules."""

import random

from gmpy2 import mpq

from quadforge.measures import beta, uniform
from quadforge.rules import weights_from_nodes

U = uniform(-1, 1)
U01 = uniform(0, 1)
B1010 = beta(10, 10)


def base3():
    return weights_from_nodes([mpq(-1), mpq(-1, 6), mpq(1)], U)


def base4():
    return weights_from_nodes([mpq(-1), mpq(-1, 6), mpq(1, 11), mpq(1)], U)


def random_nodes(rng: random.Random, measure, n: int, denom: int = 97) -> list:
    """``n`` distinct rationals in the domain, spread out with random jitter."""
    a, b = measure.a, measure.b
    while True:
        pts = set()
        for i in range(n):
            t = (i + rng.random()) / n
            pts.add(mpq(round(t * denom), denom))
        if len(pts) == n:
            return [a + (b - a) * t for t in sorted(pts)]


def random_positive_rule(rng: random.Random, measure, max_nodes: int = 9, min_nodes: int = 1):
    """Interpolatory rule on random rational nodes with strictly positive weights."""
    while True:
        n = rng.randint(min_nodes, max_nodes)
        rule = weights_from_nodes(random_nodes(rng, measure, n), measure)
        if all(w > 0 for w in rule.weights):
            return rule
