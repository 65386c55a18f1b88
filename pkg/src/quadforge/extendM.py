"""Adding several nodes at once: weight formulas, weight nullification and search.

Adding ``M`` nodes to an interpolatory rule raises its degree to ``N + M``.  The
additions that keep every weight nonnegative form a region whose corners are
the additions that also zero ``M`` existing weights; such a corner is the
Patterson-type extension of the remaining nodes, computed here by successive
interpolation of the nodal polynomial.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Sequence

import gmpy2
import numpy as np
from gmpy2 import mpfr, mpq

from .exceptions import ComplexRoots, DegenerateWeight, DuplicateNodes, NotFound
from .extend1 import addition_set, add_node, replacement_region, swap_node
from .measures import Measure
from .numerics import (
    DEFAULT_PRECISION,
    Polynomial,
    Root,
    all_exact,
    as_scalar,
    current_precision,
    deflate_elem_sym,
    elem_sym_all,
    interpolate_poly,
    is_complex,
    is_exact,
    nodal_derivatives,
    nodal_value,
    poly_roots,
    simplest_rational,
    solve_dense,
    solve_vandermonde,
    tolerance,
    working_precision,
)
from .rules import QuadratureRule, weights_from_nodes

# Stages up to this degree also get their nodal polynomial in exact arithmetic.
EXACT_STAGE_LIMIT = 8


@dataclass(frozen=True)
class NodalCandidatePolynomial:
    """The monic polynomial whose roots are the helper nodes after one stage."""

    stage: int
    lhat: Polynomial
    roots: tuple
    exact: bool

    @property
    def q(self) -> Polynomial:
        """``lhat - x**m``, the interpolated part of degree below ``m``."""
        return self.lhat - Polynomial.monomial(self.lhat.degree)


@dataclass(frozen=True)
class ExtensionCandidate:
    """Outcome of zeroing the weights ``zeroed_indices`` of a rule.

    ``resulting_rule`` holds every original node (zeroed ones with weight 0) plus
    ``new_nodes``; it is ``None`` when the new nodes are not all real.
    """

    zeroed_indices: tuple
    new_nodes: tuple
    real_nodes: bool
    feasible: bool
    resulting_rule: QuadratureRule | None
    stages: tuple = field(default=(), compare=False)

    @property
    def size(self) -> int:
        return len(self.new_nodes)

    def require_feasible(self) -> "ExtensionCandidate":
        if not self.real_nodes:
            raise ComplexRoots(f"zeroing {self.zeroed_indices} needs complex nodes")
        if not self.feasible:
            raise DegenerateWeight(f"zeroing {self.zeroed_indices} produces negative weights")
        return self


def _bits(precision: int | None) -> int:
    if precision is not None:
        return precision
    ctx = current_precision()
    return ctx if ctx > 53 else DEFAULT_PRECISION


def _nonnegative(weights: Sequence, tol) -> bool:
    return all(w >= -tol * max(1, abs(w)) for w in weights)


def _deficit(nodes, weights, measure: Measure, j: int):
    return measure.moment(j) - sum((w * x**j for x, w in zip(nodes, weights)), mpq(0))


def _is_zero(v, ref, exact: bool, tol) -> bool:
    if exact:
        return v == 0
    return abs(v) <= tol * max(abs(ref), mpq(1, 2**64))


# ---------------------------------------------------------------------------
# Closed-form weights


def multinode_weights(rule: QuadratureRule, new_nodes: Sequence) -> tuple[list, bool]:
    """Weights of the interpolatory rule on ``X_N`` plus ``new_nodes``.

    The correction of node ``z`` is
    ``sum_j (-1)**(N+M-j) eps_j e_{N+M-j}(S - {z}) / prod_{y != z}(z - y)`` for
    ``j = N+1..N+M``, computed in O((N + M) M).  Returns the weights (original nodes
    first, then ``new_nodes`` in the given order) and whether all are nonnegative.
    """
    new = [as_scalar(x) for x in new_nodes]
    nodes = list(rule.nodes) + new
    if len(set(nodes)) != len(nodes):
        raise DuplicateNodes("new nodes must be distinct from each other and from the rule")
    n_old, m = rule.size, len(new)
    N = n_old - 1
    base = list(rule.weights) + [mpq(0)] * m
    eps = {j: rule.deficit(j) for j in range(N + 1, N + m + 1)}
    e_full = elem_sym_all(nodes, m)
    slopes = nodal_derivatives(nodes)
    out = []
    for z, w, s in zip(nodes, base, slopes):
        e = deflate_elem_sym(e_full, z, m - 1)
        num = sum(((-1) ** (N + m - j) * eps[j] * e[N + m - j] for j in eps), mpq(0))
        out.append(w + num / s)
    tol = 0 if rule.is_exact and all(is_exact(x) for x in new) else tolerance()
    return out, _nonnegative(out, tol)


# ---------------------------------------------------------------------------
# Direct construction from moments


def patterson_polynomial(nodes: Sequence, measure: Measure, m: int) -> Polynomial:
    """Monic ``p`` of degree ``m`` with ``int x**j ell(x) p(x) drho = 0`` for ``j < m``.

    ``ell`` is the nodal polynomial of ``nodes``.  Exact when the nodes and moments
    are rational.
    """
    ell = Polynomial.from_roots(nodes)
    need = len(nodes) + 2 * m
    mus = measure.moments(need)
    # I(s) = int x**s ell drho
    integrals = []
    for s in range(2 * m):
        integrals.append(sum((c * mus[i + s] for i, c in enumerate(ell.coeffs)), mpq(0)))
    if m == 0:
        return Polynomial((mpq(1),))
    mat = [[integrals[i + j] for i in range(m)] for j in range(m)]
    rhs = [-integrals[j + m] for j in range(m)]
    try:
        h = solve_dense(mat, rhs)
    except ArithmeticError as exc:
        raise DegenerateWeight("the extension polynomial is not unique") from exc
    return Polynomial(tuple(h) + (mpq(1),))


# ---------------------------------------------------------------------------
# Staged nullification


@dataclass
class _StageState:
    nodes: list
    weights: list
    helpers: list  # values of the helper nodes currently in ``nodes``
    pending: list  # original indices still to be zeroed
    zeroed: list
    stages: list
    regular: bool  # no stage skipped or merged so far


def _copy(state: _StageState) -> _StageState:
    return _StageState(
        list(state.nodes), list(state.weights), list(state.helpers), list(state.pending),
        list(state.zeroed), list(state.stages), state.regular,
    )


def _close(a, b, tol) -> bool:
    return abs(a - b) <= tol * max(1, abs(a), abs(b))


def _realify(poly: Polynomial, tol) -> Polynomial:
    if not any(is_complex(c) for c in poly.coeffs):
        return poly
    if all(abs(c.imag) <= tol * max(1, abs(c)) for c in poly.coeffs):
        return Polynomial(tuple(c.real for c in poly.coeffs))
    return poly


def _stage(rule: QuadratureRule, state: _StageState, exact: bool, tol) -> bool:
    """Run one nullification stage on ``state``; ``False`` if more targets are needed."""
    measure = rule.measure
    orig = rule.nodes
    # Targets whose weight already vanished are finished and leave the base rule.
    for k in list(state.pending):
        pos = state.nodes.index(orig[k])
        if _is_zero(state.weights[pos], 1, is_exact(state.weights[pos]), tol):
            del state.nodes[pos], state.weights[pos]
            state.pending.remove(k)
            state.zeroed.append(k)
            state.regular = False
    for h in list(state.helpers):
        pos = state.nodes.index(h)
        if _is_zero(state.weights[pos], 1, is_exact(state.weights[pos]), tol):
            del state.nodes[pos], state.weights[pos]
            state.helpers.remove(h)
            state.regular = False
    targets = [orig[k] for k in state.pending] + list(state.helpers)
    base_exact = all_exact(state.nodes) and all_exact(state.weights)
    if not targets:
        return True
    n_b = len(state.nodes)
    t = len(targets)
    # The base rule must be exact through degree n_b + t - 2 and miss degree n_b + t - 1.
    order = None
    for j in range(n_b, n_b + t):
        e = _deficit(state.nodes, state.weights, measure, j)
        if not _is_zero(e, measure.moment(j), base_exact, tol):
            order, eps = j, e
            break
    if order is None:
        raise DegenerateWeight("base rule is already exact beyond the targeted degree")
    if order - n_b + 1 > t:
        return False
    if order - n_b + 1 < t:
        raise DegenerateWeight("base rule lost exactness")
    slopes = nodal_derivatives(state.nodes)
    points = []
    for y in targets:
        pos = state.nodes.index(y)
        points.append((y, -eps / (state.weights[pos] * slopes[pos]) - y**t))
    lhat = Polynomial.monomial(t) + interpolate_poly(points)
    lhat = _realify(lhat, tol)
    is_exact_poly = lhat.is_exact
    if not is_exact_poly and state.regular and rule.is_exact and t <= EXACT_STAGE_LIMIT and t == len(state.zeroed) + len(state.pending):
        removed = set(state.zeroed) | set(state.pending)
        remaining = [x for i, x in enumerate(orig) if i not in removed]
        exact_poly = patterson_polynomial(remaining, measure, t)
        if all(_close(a, b, tol) for a, b in zip(exact_poly.coeffs, lhat.coeffs)):
            lhat, is_exact_poly = exact_poly, True
    roots = poly_roots(lhat)
    values = [r.value for r in roots]
    # New base: drop the targets, add the roots, merge coincident nodes.
    keep = [(x, w) for x, w in zip(state.nodes, state.weights) if not any(x == y for y in targets)]
    base_nodes = [x for x, _ in keep]
    new_helpers = []
    for v in values:
        dup = next((x for x in base_nodes if _close(x, v, tol)), None)
        if dup is not None:
            state.regular = False
            continue
        base_nodes.append(v)
        new_helpers.append(v)
    mus = measure.moments(len(base_nodes))
    state.weights = solve_vandermonde(base_nodes, mus, allow_large=True)
    state.nodes = base_nodes
    state.zeroed += state.pending
    state.pending = []
    state.helpers = new_helpers
    state.stages.append(NodalCandidatePolynomial(len(state.stages) + 1, lhat, tuple(roots), is_exact_poly))
    return True


def nullify_weights(
    rule: QuadratureRule,
    indices: Sequence[int],
    precision: int | None = None,
    restrict: bool = False,
    cache: dict | None = None,
) -> ExtensionCandidate:
    """Add ``len(indices)`` nodes so that the weights at ``indices`` become zero.

    Stage ``m`` interpolates a monic polynomial of degree ``m`` through the target
    node and the current helper nodes, and its roots replace the helpers.  Stages
    with a vanishing deficit are merged into the next one.  Helper nodes may be
    complex in between; the candidate is feasible when the final nodes are real
    (inside the domain if ``restrict``) and every weight is nonnegative.  Final
    weights are solved afresh on the full node set.  ``cache`` may be shared
    between calls on the same rule to reuse common stage prefixes.
    """
    idx = tuple(indices)
    if len(set(idx)) != len(idx) or any(not 0 <= k < rule.size for k in idx):
        raise ValueError(f"invalid index set {idx}")
    with working_precision(_bits(precision)):
        tol = tolerance()
        exact = rule.is_exact
        state = None
        start = 0
        if cache is not None:
            for m in range(len(idx), 0, -1):
                hit = cache.get(idx[:m])
                if hit is not None:
                    state, start = _copy(hit), m
                    break
        if state is None:
            state = _StageState(list(rule.nodes), list(rule.weights), [], [], [], [], True)
        for m in range(start, len(idx)):
            state.pending.append(idx[m])
            _stage(rule, state, exact, tol)
            if cache is not None:
                cache[idx[: m + 1]] = _copy(state)
        if state.pending:
            raise DegenerateWeight(f"weights {tuple(state.pending)} cannot be zeroed by this construction")
        final = state.stages[-1] if state.stages else None
        helpers = state.helpers
        real = final is None or all(r.is_real for r in final.roots)
        if not real:
            return ExtensionCandidate(idx, tuple(helpers), False, False, None, tuple(state.stages))
        helpers = [h.real if is_complex(h) else h for h in helpers]
        if restrict and not all(rule.measure.inside(h) for h in helpers):
            feasible_domain = False
        else:
            feasible_domain = True
        result = _assemble(rule, idx, helpers, tol)
        feasible = feasible_domain and result.is_positive
        return ExtensionCandidate(idx, tuple(helpers), True, feasible, result, tuple(state.stages))


def _assemble(rule: QuadratureRule, zeroed: Sequence[int], new_nodes: Sequence, tol) -> QuadratureRule:
    nodes = list(rule.nodes) + list(new_nodes)
    order = sorted(range(len(nodes)), key=lambda i: nodes[i])
    xs = [nodes[i] for i in order]
    for a, b in zip(xs, xs[1:]):
        if a == b:
            raise DuplicateNodes("extension node coincides with an existing node")
    w = solve_vandermonde(xs, rule.measure.moments(len(xs)), allow_large=True)
    zero_pos = {order.index(k) for k in zeroed}
    w = [mpq(0) if (i in zero_pos and abs(v) <= tol) else v for i, v in enumerate(w)]
    return QuadratureRule(tuple(xs), tuple(w), rule.measure)


# ---------------------------------------------------------------------------
# Fast screening of index subsets


class _Screen:
    """Precomputed data to test many index subsets in O(M^3 + N M) each.

    ``int g drho = A_N(g) + sum_{d > N} g_d eps_d`` for polynomials ``g`` of degree at
    most ``N + M``, which reduces the moment integrals of the extension problem to
    sums over the zeroed nodes and a few deficits.
    """

    def __init__(self, rule: QuadratureRule, m_max: int, restrict: bool):
        self.rule = rule
        self.nodes = list(rule.nodes)
        self.weights = list(rule.weights)
        self.slopes = nodal_derivatives(self.nodes)
        self.N = rule.size - 1
        top = min(2 * m_max, rule.size)
        avail = rule.measure.available()
        hi = self.N + 2 * m_max
        if avail is not None:
            hi = min(hi, avail - 1)
        self.eps = {d: rule.deficit(d) for d in range(self.N + 1, hi + 1)}
        self.e_x = elem_sym_all(self.nodes, top)
        self.restrict = restrict
        self.tol = tolerance()

    def polynomial(self, K: Sequence[int]) -> Polynomial:
        m = len(K)
        N, x = self.N, self.nodes
        xk = [x[k] for k in K]
        e_k = elem_sym_all(xk, m)
        e_r = []
        for i in range(m):
            v = self.e_x[i] if i < len(self.e_x) else mpq(0)
            for t in range(1, min(i, m) + 1):
                v -= e_k[t] * e_r[i - t]
            e_r.append(v)
        # ell_R(x_k) for the zeroed nodes
        scaled = []
        for a, k in enumerate(K):
            p = self.slopes[k]
            for b, kk in enumerate(K):
                if a != b:
                    p /= x[k] - x[kk]
            scaled.append(self.weights[k] * p)
        integrals = []
        for s in range(2 * m):
            v = sum((c * xv**s for c, xv in zip(scaled, xk)), mpq(0))
            for i in range(0, s - m + 1):
                v += (-1) ** i * e_r[i] * self.eps[N + 1 + s - m - i]
            integrals.append(v)
        mat = [[integrals[i + j] for i in range(m)] for j in range(m)]
        rhs = [-integrals[j + m] for j in range(m)]
        h = solve_dense(mat, rhs)
        return Polynomial(tuple(h) + (mpq(1),))

    def feasible(self, K: Sequence[int]) -> bool:
        try:
            lhat = self.polynomial(K)
        except ArithmeticError:
            return False
        m = len(K)
        roots = _real_roots_fast(lhat)
        if roots is None:
            return False
        measure = self.rule.measure
        if self.restrict and not all(measure.inside(r) for r in roots):
            return False
        tol = self.tol
        kset = set(K)
        for r in roots:
            if any(_close(r, xv, tol) for xv in self.nodes):
                return False
        for a in range(len(roots)):
            for b in range(a):
                if _close(roots[a], roots[b], tol):
                    return False
        # Weights of the extended rule via the closed form, evaluated only where needed.
        N = self.N
        e_r_poly = [(-1) ** i * lhat.coeffs[m - i] for i in range(m + 1)]
        e_s = [mpq(0)] * m
        for i in range(m):
            e_s[i] = sum(
                ((self.e_x[a] if a < len(self.e_x) else mpq(0)) * e_r_poly[i - a] for a in range(i + 1)),
                mpq(0),
            )
        dlhat = lhat.derivative()
        eps = [self.eps[j] for j in range(N + 1, N + m + 1)]

        def correction(z):
            e = deflate_elem_sym(e_s, z, m - 1)
            return sum(((-1) ** (m - 1 - i) * eps[i] * e[m - 1 - i] for i in range(m)), mpq(0))

        for k, (z, w, s) in enumerate(zip(self.nodes, self.weights, self.slopes)):
            if k in kset:
                continue
            v = w + correction(z) / (s * lhat(z))
            if v < -tol * max(1, abs(v)):
                return False
        for r in roots:
            v = correction(r) / (nodal_value(self.nodes, r) * dlhat(r))
            if v < -tol * max(1, abs(v)):
                return False
        return True


def _real_roots_fast(lhat: Polynomial):
    if lhat.degree == 1:
        return [-lhat.coeffs[0]]
    if lhat.degree == 2:
        c, b, _ = lhat.coeffs
        disc = b * b - 4 * c
        if disc < 0:
            return None
        sq = gmpy2.sqrt(mpfr(disc))
        # Cancellation-free pair.
        q = -(b + (sq if b >= 0 else -sq)) / 2
        if q == 0:
            return [mpfr(0), mpfr(0)]
        return sorted([q, c / q])
    rs = poly_roots(lhat)
    if not all(r.is_real for r in rs):
        return None
    return [r.real for r in rs]


class _FloatScreen:
    """Double precision version of :class:`_Screen`, vectorised over batches of subsets.

    It only prefilters: a subset is kept unless it fails clearly, by a margin far
    above double precision rounding, and survivors are rechecked by ``_Screen``.
    """

    REAL_TOL = 1e-4
    WEIGHT_TOL = 1e-5

    def __init__(self, screen: _Screen):
        self.x = np.array([float(v) for v in screen.nodes])
        self.w = np.array([float(v) for v in screen.weights])
        self.slopes = np.array([float(v) for v in screen.slopes])
        self.N = screen.N
        self.eps = {d: float(v) for d, v in screen.eps.items()}
        self.e_x = [float(v) for v in screen.e_x]
        m = screen.rule.measure
        self.lo, self.hi = float(m.a), float(m.b)
        self.restrict = screen.restrict
        self.reach = 2.0 * max(float(np.max(np.abs(self.x))), abs(self.lo) if np.isfinite(self.lo) else 0.0, abs(self.hi) if np.isfinite(self.hi) else 0.0, 1.0)
        self.usable = bool(np.all(np.isfinite(self.slopes)) and np.all(self.slopes != 0))

    def _ex(self, i):
        return self.e_x[i] if i < len(self.e_x) else 0.0

    def keep(self, S: np.ndarray) -> np.ndarray:
        """Boolean mask over the rows of ``S`` (shape ``(B, m)``) worth an exact check."""
        B, m = S.shape
        if not self.usable:
            return np.ones(B, dtype=bool)
        N, x = self.N, self.x
        with np.errstate(all="ignore"):
            xk = x[S]
            diff = xk[:, :, None] - xk[:, None, :]
            diff[:, np.arange(m), np.arange(m)] = 1.0
            scaled = self.w[S] * self.slopes[S] / np.prod(diff, axis=2)
            # Elementary symmetric polynomials of the zeroed nodes and of the rest.
            e_k = np.zeros((B, m + 1))
            e_k[:, 0] = 1.0
            for a in range(m):
                e_k[:, 1:] = e_k[:, 1:] + xk[:, a : a + 1] * e_k[:, :-1].copy()
            e_r = np.zeros((B, m))
            for i in range(m):
                v = np.full(B, self._ex(i))
                for t in range(1, i + 1):
                    v = v - e_k[:, t] * e_r[:, i - t]
                e_r[:, i] = v
            integrals = np.zeros((B, 2 * m))
            powers = np.ones_like(xk)
            for k in range(2 * m):
                v = np.sum(scaled * powers, axis=1)
                for i in range(0, k - m + 1):
                    v = v + (-1) ** i * e_r[:, i] * self.eps[N + 1 + k - m - i]
                integrals[:, k] = v
                powers = powers * xk
            idx = np.arange(m)
            H = integrals[:, idx[:, None] + idx[None, :]]
            rhs = -integrals[:, idx + m]
            ok = np.all(np.isfinite(H), axis=(1, 2)) & np.all(np.isfinite(rhs), axis=1)
            H[~ok] = np.eye(m)
            rhs[~ok] = 0.0
            try:
                h = np.linalg.solve(H, rhs[:, :, None])[:, :, 0]
            except np.linalg.LinAlgError:
                return np.ones(B, dtype=bool)
            bad = ~np.all(np.isfinite(h), axis=1)
            h[bad] = 0.0
            # Roots of x^m + h_{m-1} x^{m-1} + ... + h_0 from batched companion matrices.
            comp = np.zeros((B, m, m))
            if m > 1:
                comp[:, np.arange(1, m), np.arange(m - 1)] = 1.0
            comp[:, :, m - 1] = -h
            roots = np.linalg.eigvals(comp)
            rr = roots.real
            real = np.all(np.abs(roots.imag) <= self.REAL_TOL * np.maximum(1.0, np.abs(roots)), axis=1)
            keep = real & ok
            if self.restrict:
                margin = self.REAL_TOL * max(1.0, abs(self.lo), abs(self.hi))
                keep &= np.all((rr >= self.lo - margin) & (rr <= self.hi + margin), axis=1)
            # Elementary symmetric polynomials of X + Y.
            e_y = np.zeros((B, m + 1))
            e_y[:, 0] = 1.0
            for j in range(1, m + 1):
                e_y[:, j] = (-1) ** j * h[:, m - j]
            e_s = np.zeros((B, m))
            for i in range(m):
                e_s[:, i] = sum(self._ex(a) * e_y[:, i - a] for a in range(i + 1))
            eps = [self.eps[j] for j in range(N + 1, N + m + 1)]

            def correction(z):
                # z has shape (B, P); returns the weight numerator at each z.
                prev = np.ones_like(z)
                defl = [prev]
                for i in range(1, m):
                    prev = e_s[:, i : i + 1] - z * prev
                    defl.append(prev)
                return sum((-1) ** (m - 1 - i) * eps[i] * defl[m - 1 - i] for i in range(m))

            def lhat(z):
                v = np.ones_like(z)
                for c in range(m - 1, -1, -1):
                    v = v * z + h[:, c : c + 1]
                return v

            X = np.broadcast_to(x, (B, len(x)))
            corr = correction(X)
            denom = self.slopes[None, :] * lhat(X)
            upd = corr / denom
            new_old = self.w[None, :] + upd
            mask = np.ones((B, len(x)), dtype=bool)
            mask[np.arange(B)[:, None], S] = False
            slack = self.WEIGHT_TOL * (np.abs(self.w)[None, :] + np.abs(upd))
            viol = mask & (new_old < -slack)
            keep &= ~np.any(viol, axis=1)
            # New weights correction(r) / (ell(r) lhat'(r)).
            dl = np.zeros((B, m))
            for a in range(m):
                d = np.ones(B)
                for b in range(m):
                    if a != b:
                        d = d * (rr[:, a] - rr[:, b])
                dl[:, a] = d
            ell = np.prod(rr[:, :, None] - x[None, None, :], axis=2)
            neww = correction(rr) / (ell * dl)
            keep &= ~np.any(neww < -self.WEIGHT_TOL * np.abs(neww) - 0.0, axis=1) | ~np.all(np.isfinite(neww), axis=1)
            # Far away roots make the double precision weights unreliable.
            far = np.any(np.abs(roots) > self.reach, axis=1)
            keep |= bad | ~ok | (far & real)
        return keep


def _subset_batches(n: int, m: int, rng: random.Random | None, batch: int = 4096):
    combos = np.array(list(itertools.combinations(range(n), m)), dtype=np.int64).reshape(-1, m)
    if rng is not None:
        perm = np.random.default_rng(rng.getrandbits(64)).permutation(len(combos))
        combos = combos[perm]
    for start in range(0, len(combos), batch):
        yield combos[start : start + batch]


# ---------------------------------------------------------------------------
# Search


def minimal_extension(
    rule: QuadratureRule,
    m_min: int = 1,
    m_max: int = 4,
    restrict: bool = False,
    max_candidates: int | None = None,
    rng: random.Random | None = None,
    precision: int | None = None,
) -> tuple[int, list[ExtensionCandidate]]:
    """Smallest ``M`` for which some ``M`` zeroed weights give a positive extension.

    For ``M = m_min, m_min + 1, ...`` every index subset of size ``M`` is screened and
    the promising ones are built with :func:`nullify_weights`.  With ``rng`` the
    subsets are visited in random order; ``max_candidates`` stops the search early.
    For ``M = 1`` an addition strictly inside the feasible set is returned (with no
    zeroed index) when no zero-weight corner qualifies.  Raises NotFound beyond
    ``m_max``.
    """
    with working_precision(_bits(precision)):
        screen = _Screen(rule, m_max, restrict)
        fast = _FloatScreen(screen)
        cache: dict = {}
        for m in range(max(1, m_min), m_max + 1):
            if m > rule.size:
                break
            found: list[ExtensionCandidate] = []
            for S in _subset_batches(rule.size, m, rng):
                for row in S[fast.keep(S)]:
                    K = tuple(int(k) for k in row)
                    if not screen.feasible(K):
                        continue
                    try:
                        cand = nullify_weights(rule, K, restrict=restrict, cache=cache)
                    except (DegenerateWeight, DuplicateNodes):
                        continue
                    # Fewer new nodes than zeroed weights means a vanishing deficit,
                    # which the single-node fallback below covers.
                    if cand.feasible and len(cand.new_nodes) == m:
                        found.append(cand)
                        if max_candidates is not None and len(found) >= max_candidates:
                            break
                if max_candidates is not None and len(found) >= max_candidates:
                    break
            if not found and m == 1:
                region = addition_set(rule, restrict)
                if not region.is_empty:
                    iv = max(region.intervals, key=lambda v: v.hi - v.lo)
                    if iv.lo < iv.hi and not gmpy2.is_infinite(mpfr(iv.lo)) and not gmpy2.is_infinite(mpfr(iv.hi)):
                        x = simplest_rational(iv.lo, iv.hi)
                    else:
                        x = iv.sample()
                    if not rule.measure.inside(x) and restrict:
                        x = iv.lo if iv.lo_closed else iv.hi
                    new = add_node(rule, x)
                    found.append(ExtensionCandidate((), (x,), True, True, new, ()))
            if found:
                return m, found
        raise NotFound(m_max)


def explore_additions(
    rule: QuadratureRule,
    candidate: ExtensionCandidate,
    steps: int,
    rng: random.Random,
    restrict: bool = False,
) -> list[tuple]:
    """Random walk of the added nodes inside their replacement regions.

    Each step picks one added node and moves it to a uniformly drawn point of the
    component of its replacement region that contains it, so every visited rule
    keeps nonnegative weights and the full degree.  Returns the visited tuples of
    added nodes, starting with the candidate's.
    """
    if candidate.resulting_rule is None:
        raise ComplexRoots("cannot explore from a candidate with complex nodes")
    current = candidate.resulting_rule
    moving = list(candidate.new_nodes)
    visited = [tuple(moving)]
    lo_all, hi_all = current.nodes[0], current.nodes[-1]
    reach = max(hi_all - lo_all, mpq(1))
    for _ in range(steps):
        i = rng.randrange(len(moving))
        l = current.nodes.index(moving[i])
        region = replacement_region(current, l, restrict)
        comp = region.component(moving[i])
        if comp is None or comp.lo == comp.hi:
            visited.append(tuple(moving))
            continue
        lo = comp.lo if not gmpy2.is_infinite(mpfr(comp.lo)) else moving[i] - reach
        hi = comp.hi if not gmpy2.is_infinite(mpfr(comp.hi)) else moving[i] + reach
        # A uniform draw, snapped to the simplest rational close by so that exact
        # rules keep short denominators.
        x = lo + (hi - lo) * mpq(rng.random())
        width = (hi - lo) / 4096
        a, b = max(lo, x - width), min(hi, x + width)
        if a < b:
            x = simplest_rational(a, b)
        if (x == comp.lo and not comp.lo_closed) or (x == comp.hi and not comp.hi_closed) or x in current.nodes:
            visited.append(tuple(moving))
            continue
        current = swap_node(current, l, x)
        moving[i] = x
        visited.append(tuple(moving))
    return visited


# ---------------------------------------------------------------------------
# Extensions of arbitrary node sets


def _helpers(nodes: Sequence, measure: Measure, m: int, shift: int = 0) -> list:
    if measure.bounded:
        a, b = measure.a, measure.b
    else:
        a, b = mpq(-1), mpq(1)
    out = []
    j = 0
    while len(out) < m:
        t = mpq(2 * j + 1 + shift, 2 * m + 2 * shift + 3)
        while t >= 1:
            t -= 1
        x = a + (b - a) * t
        if x not in nodes and x not in out:
            out.append(x)
        j += 1
    return out


def patterson_extension(
    nodes: Sequence,
    measure: Measure,
    m: int,
    method: str = "embedding",
    precision: int | None = None,
) -> list[Root]:
    """The ``m`` nodes that raise the degree of ``nodes`` by ``2m``.

    ``method="embedding"`` appends ``m`` auxiliary nodes and zeroes their weights by
    staged nullification; ``method="direct"`` solves the moment conditions for the
    nodal polynomial.  With no nodes this gives the Gaussian nodes.
    """
    xs = sorted(as_scalar(x) for x in nodes)
    if m == 0:
        return []
    with working_precision(_bits(precision)):
        if method == "direct":
            return poly_roots(patterson_polynomial(xs, measure, m))
        if method != "embedding":
            raise ValueError(f"unknown method {method!r}")
        last = None
        for shift in range(6):
            helpers = _helpers(xs, measure, m, shift)
            rule = weights_from_nodes(xs + helpers, measure, allow_large=True)
            idx = [rule.nodes.index(h) for h in helpers]
            try:
                state = _StageState(list(rule.nodes), list(rule.weights), [], [], [], [], True)
                tol = tolerance()
                for k in idx:
                    state.pending.append(k)
                    _stage(rule, state, rule.is_exact, tol)
                if state.pending or not state.stages:
                    raise DegenerateWeight("auxiliary weights could not be zeroed")
                return sorted(state.stages[-1].roots, key=lambda r: (r.real, r.imag))
            except DegenerateWeight as exc:
                last = exc
        raise DegenerateWeight(f"embedding failed for every auxiliary node set: {last}")


def extension_rule(nodes: Sequence, measure: Measure, m: int, precision: int | None = None) -> QuadratureRule:
    """Interpolatory rule on ``nodes`` plus their real ``m``-node extension."""
    with working_precision(_bits(precision)):
        roots = patterson_extension(nodes, measure, m, precision=precision)
        if not all(r.is_real for r in roots):
            raise ComplexRoots("extension has non-real nodes")
        return weights_from_nodes(list(nodes) + [r.real for r in roots], measure, allow_large=True)

