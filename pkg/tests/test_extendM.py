import random

import pytest
from gmpy2 import mpfr, mpq, sqrt
from hypothesis import given, settings
from hypothesis import strategies as st

from quadforge.exceptions import DuplicateNodes, NotFound
from quadforge.extendM import (
    explore_additions,
    extension_rule,
    minimal_extension,
    multinode_weights,
    nullify_weights,
    patterson_extension,
    patterson_polynomial,
)
from quadforge.generators import gaussian
from quadforge.numerics import Polynomial, working_precision
from quadforge.rules import weights_from_nodes

from support import B1010, U, U01, base3, base4, random_nodes, random_positive_rule

TOL = mpfr(10) ** -60
seeds = st.integers(0, 10**6)


def _close(a, b, tol=TOL):
    return abs(mpfr(a) - mpfr(b)) <= tol


def _values(roots):
    return sorted(r.real for r in roots)


def test_multinode_weights_example():
    with working_precision(256):
        s6 = sqrt(mpfr(6))
        w, ok = multinode_weights(base3(), [(-1 - s6) / 5, (-1 + s6) / 5])
        want = [0, 0, mpq(1, 9), (16 - s6) / 36, (16 + s6) / 36]
        assert ok and all(_close(a, b) for a, b in zip(w, want))


def test_multinode_single_node_matches_closed_form():
    w, ok = multinode_weights(base3(), [mpq(1, 11)])
    assert not ok or all(v >= 0 for v in w)
    ref = weights_from_nodes([-1, mpq(-1, 6), 1, mpq(1, 11)], U)
    by_node = dict(zip(ref.nodes, ref.weights))
    assert w == [by_node[x] for x in (-1, mpq(-1, 6), 1, mpq(1, 11))]
    with pytest.raises(DuplicateNodes):
        multinode_weights(base3(), [mpq(1, 2), mpq(1, 2)])
    with pytest.raises(DuplicateNodes):
        multinode_weights(base3(), [1])


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 3))
def test_multinode_matches_direct_solve(seed, m):
    rng = random.Random(seed)
    meas = (U, U01, B1010)[seed % 3]
    rule = random_positive_rule(rng, meas, max_nodes=6)
    extra = [x for x in random_nodes(rng, meas, m + 3) if x not in rule.nodes][:m]
    w, ok = multinode_weights(rule, extra)
    ref = weights_from_nodes(list(rule.nodes) + extra, meas)
    by_node = dict(zip(ref.nodes, ref.weights))
    assert w == [by_node[x] for x in list(rule.nodes) + extra]
    assert ok == all(v >= 0 for v in w)


def test_stage_examples():
    r = base3()
    c1 = nullify_weights(r, (0,))
    assert c1.stages[0].lhat == Polynomial((mpq(5, 3), mpq(1)))
    assert c1.new_nodes == (mpq(-5, 3),) and c1.feasible
    assert dict(zip(c1.resulting_rule.nodes, c1.resulting_rule.weights)) == {
        mpq(-5, 3): mpq(1, 24),
        -1: 0,
        mpq(-1, 6): mpq(16, 21),
        1: mpq(11, 56),
    }
    with working_precision(256):
        c2 = nullify_weights(r, (0, 1))
        assert c2.stages[-1].lhat == Polynomial((mpq(-1, 5), mpq(2, 5), mpq(1)))
        assert c2.stages[-1].q == Polynomial((mpq(-1, 5), mpq(2, 5)))
        s6 = sqrt(mpfr(6))
        assert all(_close(a, b) for a, b in zip(sorted(c2.new_nodes), [(-1 - s6) / 5, (-1 + s6) / 5]))
        c3 = nullify_weights(r, (0, 1, 2))
        assert c3.stages[-1].lhat == Polynomial((0, mpq(-3, 5), 0, 1))
        assert c3.feasible and c3.resulting_rule.normalize().size == 3


def test_nullify_errors():
    with pytest.raises(ValueError):
        nullify_weights(base3(), (0, 0))
    with pytest.raises(ValueError):
        nullify_weights(base3(), (3,))


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_nullified_degree(seed):
    rng = random.Random(seed)
    meas = (U, U01, B1010)[seed % 3]
    rule = random_positive_rule(rng, meas, max_nodes=5, min_nodes=2)
    m = rng.randint(1, rule.size)
    idx = tuple(sorted(rng.sample(range(rule.size), m)))
    N = rule.size - 1
    if any(rule.deficit(N + j) == 0 for j in range(1, m + 1)):
        return
    with working_precision(256):
        cand = nullify_weights(rule, idx)
        if cand.feasible and len(cand.new_nodes) == m:
            assert cand.resulting_rule.verified_degree >= N + m
            assert all(cand.resulting_rule.weights[cand.resulting_rule.nodes.index(rule.nodes[k])] == 0 for k in idx)


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_all_weights_zeroed_gives_gaussian(seed):
    rng = random.Random(seed)
    meas = (U, U01)[seed % 2]
    rule = random_positive_rule(rng, meas, max_nodes=5, min_nodes=2)
    idx = list(range(rule.size))
    rng.shuffle(idx)
    with working_precision(256):
        cand = nullify_weights(rule, idx)
        g = gaussian(meas, rule.size)
        tol = mpfr(10) ** -70
        kept = [(x, w) for x, w in zip(cand.resulting_rule.nodes, cand.resulting_rule.weights) if abs(w) > tol]
        assert len(kept) == g.size
        assert all(_close(x, y, tol) and _close(w, v, tol) for (x, w), y, v in zip(kept, g.nodes, g.weights))


def test_minimal_extension_examples():
    m, found = minimal_extension(base3())
    assert m == 1 and found and all(c.resulting_rule.is_positive for c in found)
    m, found = minimal_extension(base4(), restrict=True)
    assert m >= 2
    for c in found:
        assert c.feasible and c.resulting_rule.is_positive
        assert all(U.inside(x) for x in c.new_nodes)
    with pytest.raises(NotFound):
        minimal_extension(base4(), m_max=1, restrict=True)


def test_explore_additions():
    m, found = minimal_extension(base4(), restrict=True)
    seed = found[0]
    assert explore_additions(base4(), seed, 0, random.Random(1)) == [seed.new_nodes]
    walk = explore_additions(base4(), seed, 12, random.Random(1))
    assert walk == explore_additions(base4(), seed, 12, random.Random(1))
    with working_precision(256):
        for nodes in walk:
            _, ok = multinode_weights(base4(), nodes)
            assert ok


def test_patterson_examples():
    with working_precision(256):
        s6, s15 = sqrt(mpfr(6)), sqrt(mpfr(15))
        got = patterson_extension([1], U, 2)
        assert all(r.is_real for r in got)
        assert all(_close(a, b) for a, b in zip(_values(got), [(-1 - s6) / 5, (-1 + s6) / 5]))
        got = patterson_extension([], U, 3)
        assert all(_close(a, b) for a, b in zip(_values(got), [-s15 / 5, 0, s15 / 5]))
        assert _values(patterson_extension([mpq(-1, 6)], U, 1)) == [2]
        assert patterson_polynomial([1], U, 2) == Polynomial((mpq(-1, 5), mpq(2, 5), mpq(1)))
        r = extension_rule([1], U, 2)
        assert r.verified_degree == 4


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(1, 3))
def test_direct_matches_embedding(seed, m):
    rng = random.Random(seed)
    meas = (U, U01, B1010)[seed % 3]
    nodes = random_nodes(rng, meas, rng.randint(0, 4))
    with working_precision(256):
        a = patterson_extension(nodes, meas, m, method="direct")
        b = patterson_extension(nodes, meas, m, method="embedding")
        key = lambda r: (r.real, r.imag)
        tol = mpfr(10) ** -40
        for x, y in zip(sorted(a, key=key), sorted(b, key=key)):
            assert x.is_real == y.is_real
            assert _close(x.real, y.real, tol) and _close(x.imag, y.imag, tol)


def test_unknown_method():
    with pytest.raises(ValueError):
        patterson_extension([0], U, 1, method="magic")


def test_two_node_room_closes_at_a_corner():
    # A second node can follow the first only while the first stays inside the range
    # spanned by two-node corners; at the right end a single addable point survives.
    from quadforge.extend1 import add_node, addition_set

    with working_precision(256):
        y, z = sorted(nullify_weights(base3(), (0, 2)).new_nodes)
        d = mpfr(10) ** -20
        inside = addition_set(add_node(base3(), z - d))
        assert len(inside) == 1
        iv = inside.intervals[0]
        assert y < iv.lo and iv.hi - y < mpfr(10) ** -18
        assert addition_set(add_node(base3(), z + d)).is_empty
        left = max(nullify_weights(base3(), (0, 1)).new_nodes)
        assert addition_set(add_node(base3(), left + mpfr(10) ** -8))
        assert addition_set(add_node(base3(), left - mpfr(10) ** -8)).is_empty


def test_extension_of_full_set_versus_subsets():
    # Positive interpolatory additions are certified by extensions of X_N minus the zeroed
    # nodes. An extension of the whole of X_N is a different object: for the three-node
    # rule it is not positive at M = 1 even though single nodes can be added.
    from quadforge.extend1 import addition_set

    with working_precision(256):
        assert not addition_set(base3()).is_empty
        assert not extension_rule(list(base3().nodes), U, 1).is_positive
        assert [c.zeroed_indices for c in minimal_extension(base3(), m_min=1, m_max=1)[1]]
        assert extension_rule(list(base3().nodes), U, 2).is_positive
        assert not extension_rule(list(base4().nodes), U, 1).is_positive
        assert addition_set(base4()).is_empty
