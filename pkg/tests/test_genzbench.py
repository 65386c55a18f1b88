import io
import random

import mpmath
import pytest
from gmpy2 import mpfr

from quadforge.generators import clenshaw_curtis, gaussian
from quadforge.genzbench import (
    CSV_HEADER,
    BenchRecord,
    GenzCase,
    draw_cases,
    evaluation_count,
    family_rules,
    genz_eval,
    genz_exact,
    loglog_slope,
    rule_error,
    run_benchmark,
    write_csv,
)
from quadforge.numerics import working_precision
from quadforge.rules import apply

from support import U01


def test_eval_examples():
    with working_precision(128):
        assert genz_eval(GenzCase(3, 0.5, 0.0), 0) == 1
        assert genz_eval(GenzCase(6, 0.5, 0.25), 0.5) == 0
        assert genz_eval(GenzCase(5, 0.5, 0.25), 0.25) == 1
        assert genz_eval(GenzCase(2, 0.0, 0.3), 0.1) == 0
        assert genz_exact(GenzCase(3, 1.0, 0.0)) == mpfr(1) / 2
        assert genz_exact(GenzCase(6, 0.0, 0.25)) == mpfr(0.25)


@pytest.mark.parametrize("family", range(1, 7))
def test_exact_integrals_against_quadrature(family):
    rng = random.Random(family)
    for _ in range(5):
        case = GenzCase(family, rng.random(), rng.random())
        with mpmath.workdps(40):
            f = lambda t: mpmath.mpf(str(genz_eval(case, mpfr(str(t)))))
            ref = mpmath.quad(f, [0, case.b, 1])
        with working_precision(128):
            assert abs(float(genz_exact(case)) - float(ref)) < 1e-13


def test_parameter_edges():
    with working_precision(128):
        for fam in range(1, 7):
            case = GenzCase(fam, 0.0, 0.4)
            with mpmath.workdps(30):
                ref = mpmath.quad(lambda t: mpmath.mpf(str(genz_eval(case, mpfr(str(t))))), [0, 0.4, 1])
            assert abs(float(genz_exact(case)) - float(ref)) < 1e-13


def test_gaussian_is_near_exact_on_smooth_families():
    g = gaussian(U01, 32)
    for fam in (1, 3, 4):
        assert rule_error(g, GenzCase(fam, 0.7, 0.3)) < 1e-30


def test_positive_rules_are_stable():
    rng = random.Random(5)
    rules = [gaussian(U01, 12), clenshaw_curtis(16, U01)]
    with working_precision(128):
        for _ in range(20):
            case = GenzCase(rng.randint(1, 6), rng.random(), rng.random())
            for r in rules:
                bound = max(abs(genz_eval(case, x)) for x in r.nodes)
                assert abs(apply(r, lambda x: genz_eval(case, x))) <= bound * (1 + mpfr(2) ** -100)


def test_validation():
    with pytest.raises(ValueError):
        GenzCase(7, 0.1, 0.1)
    with pytest.raises(ValueError):
        GenzCase(1, 1.5, 0.1)
    with pytest.raises(ValueError):
        BenchRecord("gaussian", 1, 8, 1e-3, 0, 0)
    with pytest.raises(ValueError):
        BenchRecord("gaussian", 1, 8, float("nan"), 1, 0)
    with pytest.raises(ValueError):
        family_rules("simpson", (8,))


def test_draws_are_reproducible():
    assert draw_cases(42) == draw_cases(42)
    assert draw_cases(42) != draw_cases(43)
    assert [c.family for c in draw_cases(1, (2, 5))] == [2, 5]


def test_family_rules_sizes():
    grid = (4, 8, 12)
    for fam in ("gaussian", "clenshaw_curtis", "partial"):
        rules = family_rules(fam, grid)
        assert sorted(rules) == list(grid)
        assert all(r.size == n for n, r in rules.items())
    nested = family_rules("nested", grid)
    assert all(r.size <= n for n, r in nested.items())


def test_benchmark_reproducible_and_csv():
    kw = dict(rule_families=("gaussian", "clenshaw_curtis"), grid=(4, 8), trials=3, seed=7, genz_families=(1, 6))
    a = run_benchmark(**kw)
    assert a == run_benchmark(**kw)
    assert len(a) == 2 * 2 * 2
    out = io.StringIO()
    text = write_csv(a, out)
    assert out.getvalue() == text
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_HEADER) and len(lines) == 9
    fields = lines[1].split(",")
    assert fields[3:5] == ["3", "7"] and float(fields[5]) == a[0].mean_abs_error


def test_loglog_slope():
    recs = [BenchRecord("x", 1, n, 3.0 * n**-2.0, 1, 0) for n in (4, 8, 16, 32, 64)]
    assert loglog_slope(recs, "x", 1) == pytest.approx(-2.0)
    assert loglog_slope(recs, "x", 1, n_min=4, n_max=16) == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        loglog_slope(recs, "x", 2)


def test_evaluation_count():
    a, b = clenshaw_curtis(4, U01), clenshaw_curtis(8, U01)
    assert evaluation_count([a, b]) == 9
    assert evaluation_count([a]) == 5
