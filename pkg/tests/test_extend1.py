import random

import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from quadforge.exceptions import AtInfinity, DuplicateNode
from quadforge.extend1 import (
    add_node,
    addition_lines,
    addition_set,
    pairwise_corner,
    pairwise_corner_moments,
    removable_by,
    replace_with,
    replacement_region,
    replacement_regions,
    swap_node,
    weight_correction,
    zero_weight_node,
)
from quadforge.intervals import NINF, Interval, IntervalSet
from quadforge.measures import uniform
from quadforge.rules import weights_from_nodes

from support import B1010, U, U01, base3, base4, random_positive_rule

seeds = st.integers(0, 10**6)


def _rule(seed, max_nodes=7):
    rng = random.Random(seed)
    m = (U, U01, B1010)[seed % 3]
    return rng, random_positive_rule(rng, m, max_nodes=max_nodes)


def _grid(rule, count):
    m = rule.measure
    lo, hi = m.a - 1, m.b + 1
    return [lo + (hi - lo) * mpq(j, count - 1) for j in range(count)]


def _positive_extension(rule, x):
    ext = weights_from_nodes(list(rule.nodes) + [x], rule.measure)
    return all(w >= 0 for w in ext.weights)


# --- examples --------------------------------------------------------------


def test_addition_set_examples():
    want = IntervalSet([Interval(NINF, mpq(-5, 3), False, True), Interval(0, mpq(7, 9), True, True)])
    assert addition_set(base3()) == want
    assert addition_set(base3(), restrict=True).format() == "[0,7/9]"
    assert addition_set(base4(), restrict=True).is_empty
    assert addition_set(base4()).is_empty
    simpson = weights_from_nodes([-1, 0, 1], U)
    assert simpson.deficit(3) == 0
    assert addition_set(simpson) == IntervalSet.real_line().remove_points([-1, 0, 1])


def test_zero_weight_nodes():
    r = base3()
    assert [zero_weight_node(r, k) for k in range(3)] == [mpq(-5, 3), 0, mpq(7, 9)]
    simpson = weights_from_nodes([-1, 0, 1], U)
    assert zero_weight_node(simpson, 1) == 0
    two = weights_from_nodes([-1, 1], U)
    assert two.deficit(2) == mpq(-2, 3)
    assert zero_weight_node(two, 1) == mpq(1, 3)
    assert weights_from_nodes([-1, mpq(1, 3), 1], U).weights[2] == 0


def test_add_node_examples():
    assert add_node(base3(), mpq(1, 11)) == base4()
    r = add_node(base3(), mpq(-5, 3))
    assert dict(zip(r.nodes, r.weights)) == {mpq(-5, 3): mpq(1, 24), -1: 0, mpq(-1, 6): mpq(16, 21), 1: mpq(11, 56)}
    n = r.normalize()
    assert all(n.deficit(j) == 0 for j in range(3))
    with pytest.raises(DuplicateNode):
        add_node(base3(), 1)
    corr = weight_correction(base3(), mpq(-5, 3))
    assert corr.zeroed_rows == (0,)


def test_corners():
    r = base3()
    assert pairwise_corner(r, 0, 1) == mpq(-1, 3)
    assert pairwise_corner(r, 0, 2) == 2
    assert pairwise_corner(r, 1, 2) == mpq(1, 3)
    for k, l in ((0, 1), (0, 2), (1, 2)):
        assert pairwise_corner_moments(r, k, l) == pairwise_corner(r, k, l)
    sym = weights_from_nodes([mpq(-1, 2), mpq(1, 2)], U)
    assert pairwise_corner(sym, 0, 1) == 0
    # Patterson extension of {-1/6} by one node is 2.
    assert pairwise_corner(weights_from_nodes([-1, mpq(-1, 6), 1], U), 0, 2) == 2


def test_corner_at_infinity():
    # Two nodes with equal w_k ell'_k: symmetric measure, nodes {-c, c}, plus a centre node.
    r = weights_from_nodes([-1, 0, 1], U)
    with pytest.raises(AtInfinity):
        pairwise_corner(r, 0, 2)


def test_replacement_examples():
    r = base3()
    new, k = replace_with(r, mpq(1, 3))
    assert mpq(1, 3) in new.nodes and all(w >= 0 for w in new.weights)
    # 1/3 is the corner of nodes 1 and 2: both weights vanish and {-1, 1/3} remains.
    assert new.normalize().nodes == (-1, mpq(1, 3))
    assert weights_from_nodes([-1, mpq(1, 3)], U).verified_degree == 2
    regions = replacement_regions(r)
    bounds = {e for reg in regions for iv in reg for e in (iv.lo, iv.hi)}
    assert {mpq(-1, 3), 2, mpq(1, 3)} <= bounds


def test_swap_round_trip():
    r = base3()
    for x in (mpq(1, 2), mpq(-1, 2), mpq(3)):
        new, k = replace_with(r, x)
        old = r.nodes[k]
        back = swap_node(new, new.nodes.index(x), old)
        assert back == r


def test_addition_lines_shape():
    rows = addition_lines(base3(), -2, 2, samples=8)
    assert {k for k, _, _ in rows} == {0, 1, 2, 3}


# --- properties ------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_addition_set_oracle(seed):
    _, rule = _rule(seed)
    region = addition_set(rule)
    for x in _grid(rule, 120):
        if x in rule.nodes:
            continue
        assert (x in region) == _positive_extension(rule, x)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_restricted_addition_set(seed):
    _, rule = _rule(seed)
    m = rule.measure
    assert addition_set(rule, restrict=True) == addition_set(rule) & IntervalSet.closed(m.a, m.b)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_parity_law(seed):
    _, rule = _rule(seed)
    if rule.size % 2 == 1 or rule.deficit(rule.size) >= 0:
        assert not addition_set(rule).is_empty


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_regions_tile_the_line(seed):
    _, rule = _rule(seed, max_nodes=6)
    regions = replacement_regions(rule)
    for x in _grid(rule, 80):
        if x in rule.nodes:
            continue
        owners = [l for l, reg in enumerate(regions) if x in reg]
        assert owners, f"{x} in no region"
        assert removable_by(rule, x) == owners


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_swap_region_oracle(seed):
    rng, rule = _rule(seed, max_nodes=6)
    l = rng.randrange(rule.size)
    region = replacement_region(rule, l)
    for x in _grid(rule, 60):
        if x in rule.nodes:
            continue
        nodes = [y for i, y in enumerate(rule.nodes) if i != l] + [x]
        swapped = weights_from_nodes(nodes, rule.measure)
        assert (x in region) == all(w >= 0 for w in swapped.weights)
        assert swap_node(rule, l, x) == swapped


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_corner_independent_of_its_nodes(seed):
    rng, rule = _rule(seed)
    if rule.size < 3:
        return
    k, l = sorted(rng.sample(range(rule.size), 2))
    try:
        before = pairwise_corner(rule, k, l)
    except AtInfinity:
        return
    nodes = list(rule.nodes)
    lo = nodes[k - 1] if k > 0 else nodes[k] - 1
    hi = nodes[k + 1]
    nodes[k] = lo + (hi - lo) * mpq(rng.randint(1, 99), 100)
    moved = weights_from_nodes(nodes, rule.measure)
    try:
        assert pairwise_corner(moved, k, l) == before
    except AtInfinity:
        return
    assert pairwise_corner_moments(moved, k, l) == before


def test_decimal_mode_agrees():
    from gmpy2 import mpfr

    from quadforge.numerics import working_precision
    from quadforge.rules import QuadratureRule

    with working_precision(200):
        r = base3()
        d = QuadratureRule(tuple(mpfr(x) for x in r.nodes), tuple(mpfr(w) for w in r.weights), uniform(-1, 1))
        reg = addition_set(d)
        assert len(reg) == 2
        assert abs(reg.intervals[0].hi + mpq(5, 3)) < mpfr(10) ** -50
        assert abs(reg.intervals[1].lo) < mpfr(10) ** -50 and abs(reg.intervals[1].hi - mpq(7, 9)) < mpfr(10) ** -50
