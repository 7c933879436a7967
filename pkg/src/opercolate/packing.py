"""The mass-packing transform on probability vectors capped at 1/m.

Vectors live in the capped simplex (entries in [0, 1/m], summing to 1).  One
step merges the two lowest-index entries that sit strictly between 0 and 1/m:
their combined mass goes to the first slot up to the cap, the remainder (or
zero) to the second.  Iterating drives every vector to the packed form
(1/m, ..., 1/m, 0, ..., 0) in at most d steps, and each step can only raise
every collision probability, which is what the verifier below checks.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import InternalInvariantError, ValidationError
from .vectors import ProbVector
from .walk import collision_series, qstar

# Entries this close to 0 or 1/m count as (and are snapped to) those values.
MEMBERSHIP_TOL = 1e-12


def _cap_value(q: ProbVector, m: int):
    return Fraction(1, m) if q.exact else 1.0 / m


def _snap(q: ProbVector, m: int) -> ProbVector:
    cap = _cap_value(q, m)
    snapped = []
    for e in q.entries:
        if abs(e) <= MEMBERSHIP_TOL:
            snapped.append(cap * 0)
        elif abs(e - cap) <= MEMBERSHIP_TOL:
            snapped.append(cap)
        else:
            snapped.append(e)
    return ProbVector(tuple(snapped))


def validate_capped(q: ProbVector, m: int) -> ProbVector:
    """Check membership in the capped simplex; returns the snapped vector."""
    if m < 1:
        raise ValidationError("m must be >= 1")
    cap = _cap_value(q, m)
    for e in q.entries:
        if e < -MEMBERSHIP_TOL or e > cap + MEMBERSHIP_TOL:
            raise ValidationError(
                f"entry {e!r} outside [0, 1/{m}]; vector not in the capped simplex"
            )
    q = _snap(q.as_probability(), m)
    return q


def _fractional_indices(q: ProbVector, m: int):
    cap = _cap_value(q, m)
    return [i for i, e in enumerate(q.entries) if e != 0 and e != cap]


def b_count(q: ProbVector, m: int) -> int:
    """Number of entries strictly between 0 and 1/m (up to the snap tolerance)."""
    q = validate_capped(q, m)
    count = len(_fractional_indices(q, m))
    if count == 1:
        # A single fractional entry cannot sum with caps and zeros to 1.
        raise InternalInvariantError("exactly one fractional entry is impossible")
    return count


@dataclass(frozen=True)
class PackingState:
    """A capped-simplex vector with its fractional-entry count."""

    q: ProbVector
    m: int
    fractional: int = field(init=False)

    def __post_init__(self):
        q = validate_capped(self.q, self.m)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "fractional", b_count(q, self.m))


def pack_step(q: ProbVector, m: int) -> ProbVector:
    """One packing move; with nothing fractional left, the canonical packed vector.

    The merge preserves the entry sum by construction and strictly lowers the
    fractional count.
    """
    q = validate_capped(q, m)
    cap = _cap_value(q, m)
    frac = _fractional_indices(q, m)
    if not frac:
        return qstar(m, q.d, exact=q.exact)
    i, j = frac[0], frac[1]
    entries = list(q.entries)
    combined = entries[i] + entries[j]
    if combined <= cap:
        entries[i] = combined
        entries[j] = cap * 0
    else:
        entries[i] = combined - cap
        entries[j] = cap
    return _snap(ProbVector(tuple(entries)), m)


@dataclass(frozen=True)
class PackResult:
    result: ProbVector
    steps: int
    orbit: tuple  # the visited vectors, input first, canonical form last

    def csv_rows(self):
        return [tuple(float(e) for e in v.entries) for v in self.orbit]

    def to_record(self) -> dict:
        return {
            "kind": "packing-orbit",
            "m_cap": len([e for e in self.result.entries if e != 0]),
            "steps": self.steps,
            "orbit": [[float(e) for e in v.entries] for v in self.orbit],
        }


def pack_full(q: ProbVector, m: int) -> PackResult:
    """Iterate pack_step to the canonical packed vector; at most d steps."""
    q = validate_capped(q, m)
    d = q.d
    orbit = [q]
    steps = 0
    while b_count(q, m) > 0:
        q = pack_step(q, m)
        steps += 1
        orbit.append(q)
        if steps > d:
            raise InternalInvariantError(
                f"packing did not terminate within {d} steps"
            )
    canonical = pack_step(q, m)
    steps += 1
    if canonical != orbit[-1]:
        orbit.append(canonical)
    if steps > d:
        raise InternalInvariantError(f"packing needed more than d = {d} steps")
    return PackResult(canonical, steps, tuple(orbit))


def merged_pair_laziness(q: ProbVector, m: int):
    """Laziness parameters (x, x') of the difference walk before/after one merge.

    For the merged slots (a, b) the two-entry difference walk stays put with
    probability x = (a^2 + b^2) / (a + b)^2 >= 1/2, and the merge can only
    increase it.
    """
    q = validate_capped(q, m)
    frac = _fractional_indices(q, m)
    if not frac:
        raise ValidationError("no fractional entries to merge")
    i, j = frac[0], frac[1]
    stepped = pack_step(q, m)
    a, b = float(q.entries[i]), float(q.entries[j])
    a2, b2 = float(stepped.entries[i]), float(stepped.entries[j])
    x = (a * a + b * b) / (a + b) ** 2
    x_after = (a2 * a2 + b2 * b2) / (a2 + b2) ** 2
    return x, x_after, (i, j)


@dataclass(frozen=True)
class PackMonotoneReport:
    """One packing step with its laziness and termwise series comparison."""

    q_before: tuple
    q_after: tuple
    pair: tuple
    x_before: float
    x_after: float
    terms_before: tuple
    terms_after: tuple
    worst_term_drop: float

    @property
    def laziness_ok(self) -> bool:
        return self.x_after >= self.x_before >= 0.5 - 1e-12

    @property
    def termwise_ok(self) -> bool:
        return self.worst_term_drop <= 1e-12

    @property
    def passed(self) -> bool:
        return self.laziness_ok and self.termwise_ok

    def to_record(self) -> dict:
        return {
            "kind": "pack-monotonicity",
            "q_before": list(self.q_before),
            "q_after": list(self.q_after),
            "merged_pair": list(self.pair),
            "x_before": self.x_before,
            "x_after": self.x_after,
            "terms_before": list(self.terms_before),
            "terms_after": list(self.terms_after),
            "worst_term_drop": self.worst_term_drop,
            "passed": self.passed,
        }


def verify_pack_monotone(q: ProbVector, m: int, N: int) -> PackMonotoneReport:
    """Check one packing step never lowers c_n (n <= N) and raises the laziness."""
    q = validate_capped(q, m)
    if b_count(q, m) == 0:
        raise ValidationError("vector already packed; nothing to verify")
    x, x_after, pair = merged_pair_laziness(q, m)
    stepped = pack_step(q, m)
    before = [float(c) for c in collision_series(q.as_floats(), N)]
    after = [float(c) for c in collision_series(stepped.as_floats(), N)]
    worst = max((b - a) for a, b in zip(after, before))
    return PackMonotoneReport(
        q_before=tuple(float(e) for e in q.entries),
        q_after=tuple(float(e) for e in stepped.entries),
        pair=pair,
        x_before=x,
        x_after=x_after,
        terms_before=tuple(before),
        terms_after=tuple(after),
        worst_term_drop=worst,
    )


def sample_capped(d: int, m: int, rng: random.Random) -> ProbVector:
    """Random float vector in the capped simplex (not uniform, just varied)."""
    if d < m:
        raise ValidationError("need d >= m for the capped simplex to be nonempty")
    cap = 1.0 / m
    remaining = 1.0
    entries = []
    for slots_left in range(d, 0, -1):
        if slots_left == 1:
            value = remaining
        else:
            lo = max(0.0, remaining - (slots_left - 1) * cap)
            hi = min(cap, remaining)
            value = rng.uniform(lo, hi)
        value = min(max(value, 0.0), cap)
        entries.append(value)
        remaining -= value
    rng.shuffle(entries)
    return validate_capped(ProbVector(tuple(entries)), m)
