"""Genz test integrands on [0, 1] and the randomized error benchmark."""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from gmpy2 import atan, const_pi, cos, erf, exp, mpfr, sin, sqrt

from .measures import uniform
from .numerics import working_precision
from .rules import QuadratureRule, unique_points

EVAL_PRECISION = 128
DEFAULT_GRID = (4, 8, 16, 24, 32, 48, 64)
RULE_FAMILIES = ("partial", "nested", "clenshaw_curtis", "gaussian")
CSV_HEADER = ("rule_family", "genz_family", "N", "trials", "seed", "mean_abs_error")

FAMILY_NAMES = {
    1: "oscillatory",
    2: "product peak",
    3: "corner peak",
    4: "gaussian",
    5: "continuous",
    6: "discontinuous",
}


@dataclass(frozen=True)
class GenzCase:
    family: int
    a: float
    b: float

    def __post_init__(self):
        if self.family not in FAMILY_NAMES:
            raise ValueError(f"Genz family must be 1..6, got {self.family}")
        if not (0 <= self.a <= 1 and 0 <= self.b <= 1):
            raise ValueError("Genz parameters must lie in [0, 1]")


@dataclass(frozen=True)
class BenchRecord:
    rule_family: str
    genz_family: int
    N: int
    mean_abs_error: float
    trials: int
    seed: int

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if not self.mean_abs_error >= 0:
            raise ValueError("mean error must be nonnegative")


def genz_eval(case: GenzCase, x):
    """Value of the Genz integrand at ``x``, in the current working precision."""
    a, b = mpfr(case.a), mpfr(case.b)
    x = mpfr(x)
    f = case.family
    if f == 1:
        return cos(2 * const_pi() * b + a * x)
    if f == 2:
        return 1 / (a ** -2 + (x - b) ** 2) if a != 0 else mpfr(0)
    if f == 3:
        return (1 + a * x) ** -2
    if f == 4:
        return exp(-(a**2) * (x - b) ** 2)
    if f == 5:
        return exp(-a * abs(x - b))
    return mpfr(0) if x > b else exp(a * x)


def genz_exact(case: GenzCase):
    """Closed-form integral over [0, 1] at the current working precision."""
    a, b = mpfr(case.a), mpfr(case.b)
    f = case.family
    if f == 1:
        if a == 0:
            return cos(2 * const_pi() * b)
        return (sin(2 * const_pi() * b + a) - sin(2 * const_pi() * b)) / a
    if f == 2:
        return a * (atan(a * (1 - b)) + atan(a * b))
    if f == 3:
        return 1 / (1 + a)
    if f == 4:
        if a == 0:
            return mpfr(1)
        return sqrt(const_pi()) / (2 * a) * (erf(a * (1 - b)) + erf(a * b))
    if f == 5:
        if a == 0:
            return mpfr(1)
        return (2 - exp(-a * b) - exp(-a * (1 - b))) / a
    if a == 0:
        return b
    return (exp(a * b) - 1) / a


def rule_error(rule: QuadratureRule, case: GenzCase):
    with working_precision(EVAL_PRECISION):
        approx = sum((mpfr(w) * genz_eval(case, x) for x, w in zip(rule.nodes, rule.weights)), mpfr(0))
        return abs(genz_exact(case) - approx)


# ---------------------------------------------------------------------------
# Rule families


def _partial_rules(n_max: int, rng: random.Random | None) -> dict[int, QuadratureRule]:
    from .generators import partially_nested_sequence
    from .rules import weights_from_nodes
    from gmpy2 import mpq

    m = uniform(0, 1)
    init = weights_from_nodes([mpq(0), mpq(5, 12), mpq(1)], m)
    seq = partially_nested_sequence(m, n_max, init=init, rng=rng)
    return {r.size: r for r in seq.rules}


# Searches beyond six added nodes take minutes per level.
NESTED_M_MAX = 6


def _nested_rules(n_max: int, seed: int) -> dict[int, QuadratureRule]:
    from .generators import nested_sequence
    from .rules import weights_from_nodes
    from gmpy2 import mpq

    m = uniform(0, 1)
    init = weights_from_nodes([mpq(0), mpq(5, 12), mpq(1)], m)
    seq = nested_sequence(m, n_max, init=init, seed=seed, m_max=NESTED_M_MAX)
    return {r.size: r for r in seq.rules}


def _at_most(rules: dict[int, QuadratureRule], n: int) -> QuadratureRule | None:
    sizes = [k for k in rules if k <= n]
    return rules[max(sizes)] if sizes else None


def family_rules(rule_family: str, grid: Sequence[int], seed: int = 0, randomize: bool = False) -> dict[int, QuadratureRule]:
    """Rule used at each grid size.

    Sequences that skip sizes use their largest level not exceeding ``N``.
    Clenshaw-Curtis at ``N`` nodes uses the ``N - 1`` panel rule.
    """
    from .generators import clenshaw_curtis, gaussian

    m = uniform(0, 1)
    top = max(grid)
    if rule_family == "gaussian":
        return {n: gaussian(m, n) for n in grid}
    if rule_family == "clenshaw_curtis":
        return {n: clenshaw_curtis(n - 1, m) for n in grid}
    if rule_family == "partial":
        seq = _partial_rules(top - 1, random.Random(seed) if randomize else None)
    elif rule_family == "nested":
        seq = _nested_rules(top - 1, seed)
    else:
        raise ValueError(f"unknown rule family {rule_family!r}")
    out = {}
    for n in grid:
        r = _at_most(seq, n)
        if r is not None:
            out[n] = r
    return out


def _trial_seeds(seed: int, trials: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(1)[0]) for c in ss.spawn(trials)]


def draw_cases(trial_seed: int, families: Iterable[int] = range(1, 7)) -> list[GenzCase]:
    gen = np.random.default_rng(trial_seed)
    return [GenzCase(f, float(gen.random()), float(gen.random())) for f in families]


def run_benchmark(
    rule_families: Sequence[str] = RULE_FAMILIES,
    grid: Sequence[int] = DEFAULT_GRID,
    trials: int = 100,
    seed: int = 0,
    genz_families: Sequence[int] = range(1, 7),
    randomize_sequences: bool = False,
    progress: Callable[[str], None] | None = None,
) -> list[BenchRecord]:
    """Mean absolute error per (rule family, N, Genz family) over ``trials`` draws.

    Parameters ``a, b`` are drawn per trial from a sub-seed of ``seed`` and
    shared by all rule families.  Deterministic rules are built once; with
    ``randomize_sequences`` the two constructed families are rebuilt per trial
    from the trial sub-seed, which is slow.
    """
    grid = sorted(set(grid))
    seeds = _trial_seeds(seed, trials)
    cases = [draw_cases(s, genz_families) for s in seeds]
    records = []
    for rf in rule_families:
        randomized = randomize_sequences and rf in ("partial", "nested")
        fixed = None if randomized else family_rules(rf, grid, seed=seed)
        totals: dict[tuple[int, int], object] = {}
        for t in range(trials):
            rules = family_rules(rf, grid, seed=seeds[t], randomize=True) if randomized else fixed
            for n, rule in rules.items():
                for case in cases[t]:
                    key = (n, case.family)
                    totals[key] = totals.get(key, 0) + rule_error(rule, case)
        for (n, fam), tot in sorted(totals.items()):
            records.append(BenchRecord(rf, fam, n, float(tot / trials), trials, seed))
        if progress:
            progress(f"{rf}: done")
    return records


def loglog_slope(records: Iterable[BenchRecord], rule_family: str, genz_family: int, n_min: int = 8, n_max: int = 64) -> float:
    """Least-squares slope of log(error) against log(N)."""
    pts = [
        (math.log(r.N), math.log(r.mean_abs_error))
        for r in records
        if r.rule_family == rule_family and r.genz_family == genz_family and n_min <= r.N <= n_max and r.mean_abs_error > 0
    ]
    if len(pts) < 2:
        raise ValueError("need at least two grid sizes for a slope")
    xs, ys = zip(*pts)
    return float(np.polyfit(xs, ys, 1)[0])


def write_csv(records: Iterable[BenchRecord], stream: io.TextIOBase | None = None) -> str:
    """CSV text (also written to ``stream`` when given); errors carry 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow((r.rule_family, r.genz_family, r.N, r.trials, r.seed, f"{r.mean_abs_error:.16e}"))
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def evaluation_count(rules: Iterable[QuadratureRule]) -> int:
    """Distinct nodes over a collection of rules."""
    return len(unique_points(list(rules)))
