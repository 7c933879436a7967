"""Exact brute-force enumeration of oriented path pairs at small scale.

All quantities here are rationals computed by explicit enumeration; they are
the ground truth the analytic series code is checked against.  Everything
requires exact (rational) edge probabilities: float inputs would break the
zero-tolerance identity checks, so they are rejected up front.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ResourceLimitError, ValidationError
from .vectors import EdgeParams

# Refuse enumerations beyond this many ordered path pairs (d ** (2n)).
DEFAULT_PAIR_CAP = 10**8


def _require_exact(params: EdgeParams):
    if not params.exact:
        raise ValidationError(
            "exact enumeration needs rational edge probabilities; "
            "parse inputs with exact=True"
        )


def _check_pair_budget(d: int, n: int, cap: int):
    pairs = d ** (2 * n)
    if pairs > cap:
        raise ResourceLimitError(
            f"enumeration of {pairs} ordered path pairs exceeds the cap of {cap}"
        )


def _vertices(steps, d):
    """Vertices visited after each step (positions 1..n), as coordinate tuples."""
    pos = [0] * d
    out = []
    for s in steps:
        pos[s] += 1
        out.append(tuple(pos))
    return out


def _edges(steps, d):
    """Set of (tail vertex, direction) edges traversed by the path."""
    pos = [0] * d
    out = set()
    for s in steps:
        out.add((tuple(pos), s))
        pos[s] += 1
    return out


@dataclass(frozen=True)
class OrientedPath:
    """A lattice path from the origin given by its direction indices (0-based)."""

    steps: tuple
    d: int

    def __post_init__(self):
        steps = tuple(self.steps)
        if any(not (0 <= s < self.d) for s in steps):
            raise ValidationError("step index out of range")
        object.__setattr__(self, "steps", steps)

    @property
    def n(self) -> int:
        return len(self.steps)

    def vertices(self):
        return _vertices(self.steps, self.d)

    def final_vertex(self):
        return _vertices(self.steps, self.d)[-1] if self.steps else (0,) * self.d

    def edges(self):
        return _edges(self.steps, self.d)


@dataclass(frozen=True)
class PathPair:
    """Ordered pair of equal-length paths with their meeting positions."""

    first: OrientedPath
    second: OrientedPath
    meeting_set: tuple = field(init=False)

    def __post_init__(self):
        if self.first.d != self.second.d or self.first.n != self.second.n:
            raise ValidationError("paths must share dimension and length")
        v1 = self.first.vertices()
        v2 = self.second.vertices()
        meets = tuple(i + 1 for i, (a, b) in enumerate(zip(v1, v2)) if a == b)
        object.__setattr__(self, "meeting_set", meets)

    def first_meeting_only_at_end(self) -> bool:
        # Positions strictly before the end must all differ; both start at the
        # origin, which does not count as a meeting.
        return self.meeting_set == (self.first.n,)


def pair_open_prob(pair: PathPair, params: EdgeParams) -> Fraction:
    """Probability both paths are open: product of p over their edge union.

    Edges shared by the two paths are counted once.
    """
    _require_exact(params)
    if pair.first.d != params.d:
        raise ValidationError("path dimension does not match edge parameters")
    prob = Fraction(1)
    for _, direction in pair.first.edges() | pair.second.edges():
        prob *= params.p[direction]
    return prob


def _enumerate_paths(params: EdgeParams, n: int):
    """All d^n paths as (prob, vertex list, edge set) with prob the open weight."""
    d = params.d
    p = params.p.entries
    out = []
    for steps in itertools.product(range(d), repeat=n):
        prob = Fraction(1)
        for s in steps:
            prob *= p[s]
        out.append((prob, _vertices(steps, d), _edges(steps, d)))
    return out


def _pair_prob(path1, path2, p_entries):
    """P(both open) = P1 * P2 / prod over shared edges, avoiding a union scan."""
    prob1, _, edges1 = path1
    prob2, _, edges2 = path2
    if prob1 == 0 or prob2 == 0:
        return Fraction(0)
    prob = prob1 * prob2
    for _, direction in edges1 & edges2:
        prob /= p_entries[direction]
    return prob


def a_n_exact(params: EdgeParams, n: int, cap: int = DEFAULT_PAIR_CAP) -> Fraction:
    """Sum of pair open probabilities over same-endpoint ordered pairs, / mu^2n."""
    _require_exact(params)
    if n < 1:
        raise ValidationError("n must be >= 1")
    _check_pair_budget(params.d, n, cap)
    by_endpoint = {}
    for rec in _enumerate_paths(params, n):
        by_endpoint.setdefault(rec[1][-1], []).append(rec)
    total = Fraction(0)
    p = params.p.entries
    for group in by_endpoint.values():
        for path1 in group:
            for path2 in group:
                total += _pair_prob(path1, path2, p)
    return total / params.mu ** (2 * n)


def b_m_exact(params: EdgeParams, m: int, cap: int = DEFAULT_PAIR_CAP) -> Fraction:
    """Same as a_n_exact but restricted to pairs first meeting at the endpoint."""
    _require_exact(params)
    if m < 1:
        raise ValidationError("m must be >= 1")
    _check_pair_budget(params.d, m, cap)
    by_endpoint = {}
    for rec in _enumerate_paths(params, m):
        by_endpoint.setdefault(rec[1][-1], []).append(rec)
    total = Fraction(0)
    p = params.p.entries
    for group in by_endpoint.values():
        for path1 in group:
            v1 = path1[1]
            for path2 in group:
                v2 = path2[1]
                # Exclude any meeting before the final position.
                if any(a == b for a, b in zip(v1[:-1], v2[:-1])):
                    continue
                total += _pair_prob(path1, path2, p)
    return total / params.mu ** (2 * m)


def _compositions(total, max_parts=None):
    """Ordered compositions of a positive integer into positive parts."""
    if total == 0:
        yield ()
        return
    for head in range(1, total + 1):
        for rest in _compositions(total - head):
            yield (head,) + rest


@dataclass(frozen=True)
class PartitionIdentityReport:
    """Both sides of the composition identity at one level, compared exactly."""

    level: int
    lhs: Fraction
    rhs: Fraction
    composition_terms: tuple  # ((m_1..m_j), product of b values)
    equal: bool

    def to_record(self) -> dict:
        return {
            "level": self.level,
            "lhs": str(self.lhs),
            "rhs": str(self.rhs),
            "equal": self.equal,
            "compositions": [
                {"parts": list(parts), "product": str(value)}
                for parts, value in self.composition_terms
            ],
        }

    def to_text(self) -> str:
        lines = [
            f"level M = {self.level}",
            f"  lhs (same-endpoint pair weight a_M)      = {self.lhs}",
            f"  rhs (sum over compositions of b-products) = {self.rhs}",
            f"  exact equality: {'yes' if self.equal else 'NO'}",
        ]
        for parts, value in self.composition_terms:
            lines.append(f"    {'+'.join(map(str, parts))}: {value}")
        return "\n".join(lines)


def verify_partition_identity(
    params: EdgeParams, M: int, cap: int = DEFAULT_PAIR_CAP
) -> PartitionIdentityReport:
    """Check a_M equals the sum over compositions (m_1..m_j) of prod b_{m_k}.

    The comparison is exact rational equality with zero tolerance.
    """
    lhs = a_n_exact(params, M, cap)
    b_cache = {m: b_m_exact(params, m, cap) for m in range(1, M + 1)}
    terms = []
    rhs = Fraction(0)
    for parts in _compositions(M):
        value = Fraction(1)
        for part in parts:
            value *= b_cache[part]
        terms.append((parts, value))
        rhs += value
    return PartitionIdentityReport(M, lhs, rhs, tuple(terms), lhs == rhs)


def second_moment_exact(params: EdgeParams, n: int, cap: int = DEFAULT_PAIR_CAP):
    """E[W_n^2] two ways: direct all-pairs enumeration, and the a_j recursion.

    direct    = (sum over ALL ordered pairs of P(both open)) / mu^(2n)
    recursion = E[W_1^2] + (var_y0 / mu^2) * sum_{j<n} a_j
    Both are exact rationals; they must agree.
    """
    _require_exact(params)
    if n < 1:
        raise ValidationError("n must be >= 1")
    _check_pair_budget(params.d, n, cap)
    paths = _enumerate_paths(params, n)
    p = params.p.entries
    direct_num = Fraction(0)
    for path1 in paths:
        for path2 in paths:
            direct_num += _pair_prob(path1, path2, p)
    direct = direct_num / params.mu ** (2 * n)

    w1_sq = (params.var_y0 + params.mu**2) / params.mu**2
    recursion = w1_sq
    for j in range(1, n):
        recursion += params.var_y0 / params.mu**2 * a_n_exact(params, j, cap)
    return direct, recursion


def xn_distribution_exact(
    params: EdgeParams, n: int, max_configs: int = 1 << 22
) -> dict:
    """Exact law of the level-n open-path count, by enumerating all edge states.

    Every edge in the first n levels is toggled; the result maps each possible
    path count to its exact probability.  Only viable for tiny (d, n).
    """
    _require_exact(params)
    if n < 1:
        raise ValidationError("n must be >= 1")
    d = params.d
    # All vertices in levels 0..n-1 (nonnegative coordinates summing to k).
    edges = []
    for k in range(n):
        for coords in itertools.product(range(k + 1), repeat=d):
            if sum(coords) != k:
                continue
            for i in range(d):
                edges.append((coords, i))
    n_edges = len(edges)
    if 2**n_edges > max_configs:
        raise ResourceLimitError(
            f"{2 ** n_edges} edge configurations exceed the cap of {max_configs}"
        )
    # Common denominator so the per-configuration weight is an integer product.
    dens = [params.p[i].denominator for _, i in edges]
    nums = [params.p[i].numerator for _, i in edges]
    denominator = 1
    for q in dens:
        denominator *= q
    origin = (0,) * d
    dist = {}
    for bits in range(2**n_edges):
        weight = 1
        open_set = set()
        for idx in range(n_edges):
            if bits >> idx & 1:
                weight *= nums[idx]
                open_set.add(edges[idx])
            else:
                weight *= dens[idx] - nums[idx]
        if weight == 0:
            continue
        counts = {origin: 1}
        for _ in range(n):
            nxt = {}
            for x, c in counts.items():
                for i in range(d):
                    if (x, i) in open_set:
                        y = x[:i] + (x[i] + 1,) + x[i + 1 :]
                        nxt[y] = nxt.get(y, 0) + c
            counts = nxt
        total = sum(counts.values())
        dist[total] = dist.get(total, 0) + weight
    return {k: Fraction(v, denominator) for k, v in sorted(dist.items())}
