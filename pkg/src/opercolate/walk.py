"""Two-walk collision series and everything built on top of it.

Two independent oriented walks with step law q sit on the same site after n
steps with probability

    c_n(q) = sum over (l_1..l_d), sum l_i = n, of multinomial(n; l)^2 prod q_i^(2 l_i).

The table c_1..c_N is computed by convolving per-coordinate series under the
weight binom(n, j)^2, which is exactly the multinomial-square sum at cost
O(d N^2) instead of a d-dimensional state space.  From the table we derive the
first-meeting distribution (renewal inversion), truncated series totals with a
certified remainder for capped vectors, the two-block projection identity, and
the lazy-walk return probabilities used by the packing argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

from .errors import InternalInvariantError, ResourceLimitError, ValidationError
from .vectors import ProbVector

# Beyond this the float binomial weights leave double range.
MAX_SERIES_N = 1020
# Direct binomial evaluation of lazy-walk returns up to here, log-domain after.
_LAZY_LOG_SWITCH = 500

_TAU_TOL = 1e-12

_binom_float_rows: list = [(1.0,)]


def _binom_row(n: int):
    """Row n of Pascal's triangle as floats (each entry correctly rounded)."""
    while len(_binom_float_rows) <= n:
        k = len(_binom_float_rows)
        _binom_float_rows.append(tuple(float(math.comb(k, j)) for j in range(k + 1)))
    return _binom_float_rows[n]


def _collision_table(q: ProbVector, N: int) -> list:
    """[c_0 .. c_N] with c_0 = 1; exact when q is exact, else compensated float.

    Coordinates are folded in one at a time; after each fold the partial table
    stays bounded by 1 entrywise, which keeps every float product in range for
    N <= MAX_SERIES_N.
    """
    if N < 0:
        raise ValidationError("series length must be >= 0")
    if N > MAX_SERIES_N:
        raise ResourceLimitError(
            f"float collision series limited to N <= {MAX_SERIES_N}, got {N}"
        )
    q = q.as_probability()
    exact = q.exact
    table = [Fraction(1) if exact else 1.0] + [0] * N
    for w in q.entries:
        if w == 0:
            continue
        w2 = w * w
        wp = [Fraction(1) if exact else 1.0]  # powers w^(2k)
        for _ in range(N):
            wp.append(wp[-1] * w2)
        if exact:
            new = [
                sum(
                    math.comb(n, j) ** 2 * table[j] * wp[n - j]
                    for j in range(n + 1)
                )
                for n in range(N + 1)
            ]
        else:
            new = []
            for n in range(N + 1):
                row = _binom_row(n)
                new.append(
                    math.fsum(
                        (row[j] * table[j]) * wp[n - j] * row[j]
                        for j in range(n + 1)
                    )
                )
        table = new
    return table


def collision_series(q: ProbVector, N: int) -> list:
    """The collision probabilities c_1 .. c_N."""
    return _collision_table(q, N)[1:]


def collision_prob(q: ProbVector, n: int):
    """Probability two independent q-walks coincide at time n."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    return _collision_table(q, n)[n]


def qstar(m: int, d: int | None = None, exact: bool = False) -> ProbVector:
    """The packed vector: m entries of 1/m followed by zeros (dimension d)."""
    if m < 1:
        raise ValidationError("m must be >= 1")
    d = m if d is None else d
    if d < m:
        raise ValidationError("dimension must be at least m")
    one_over_m = Fraction(1, m) if exact else 1.0 / m
    zero = Fraction(0) if exact else 0.0
    return ProbVector((one_over_m,) * m + (zero,) * (d - m))


@dataclass(frozen=True)
class CollisionSeries:
    """Truncated collision series with an optional certified tail bound.

    tail_bound is None when no certificate applies (the series may then even
    diverge); otherwise it bounds the discarded remainder sum_{n>N} c_n.
    """

    q: ProbVector
    terms: tuple
    m_param: int = 0
    tail_bound: float | None = None

    def __post_init__(self):
        terms = tuple(float(t) for t in self.terms)
        object.__setattr__(self, "terms", terms)
        if any(t < -1e-12 or t > 1 + 1e-12 for t in terms):
            raise InternalInvariantError("collision term outside [0, 1]")
        floor = math.fsum(e * e for e in self.q.as_floats().entries)
        run = 1.0
        for t in terms:
            run *= floor
            if t < run - 1e-12:
                raise InternalInvariantError(
                    "collision term below the stay-together floor"
                )
        if self.tail_bound is not None:
            if self.m_param < 4:
                raise InternalInvariantError("tail certificate needs m >= 4")
            if max(self.q.as_floats().entries) * self.m_param > 1 + 1e-9:
                raise InternalInvariantError(
                    "tail certificate needs max entry <= 1/m"
                )

    @property
    def N(self) -> int:
        return len(self.terms)

    def partial_sum(self) -> float:
        return math.fsum(self.terms)

    def certified_total(self) -> float | None:
        """Upper estimate of the full series, or None when uncertified."""
        if self.tail_bound is None:
            return None
        return self.partial_sum() + self.tail_bound

    def csv_rows(self):
        return [(n + 1, term) for n, term in enumerate(self.terms)]

    def to_record(self) -> dict:
        return {
            "kind": "collision-series",
            "q": [float(e) for e in self.q.as_floats().entries],
            "N": self.N,
            "terms": list(self.terms),
            "partial_sum": self.partial_sum(),
            "m_param": self.m_param,
            "tail_bound": "unbounded" if self.tail_bound is None else self.tail_bound,
            "certified_total": self.certified_total(),
        }


@dataclass(frozen=True)
class MeetingDistribution:
    """First-meeting-time probabilities of two independent q-walks."""

    q: ProbVector
    probs: tuple

    def __post_init__(self):
        probs = tuple(self.probs)
        object.__setattr__(self, "probs", probs)
        running = 0
        for value in probs:
            if value < 0 or value > 1:
                raise InternalInvariantError("meeting probability outside [0, 1]")
            running += value
        if float(running) > 1 + 1e-9:
            raise InternalInvariantError("meeting probabilities sum past 1")

    @property
    def M(self) -> int:
        return len(self.probs)

    def csv_rows(self):
        return [(m + 1, float(p)) for m, p in enumerate(self.probs)]

    def to_record(self) -> dict:
        return {
            "kind": "meeting-distribution",
            "q": [float(e) for e in self.q.as_floats().entries],
            "M": self.M,
            "terms": [float(p) for p in self.probs],
            "total": float(sum(self.probs)) if self.q.exact else math.fsum(self.probs),
        }


def tau_dist(q: ProbVector, M: int) -> MeetingDistribution:
    """First-meeting distribution, by inverting the renewal decomposition.

    The collision event at time m splits over the first meeting time:
    c_m = sum_{k<=m} tau_k c_{m-k}, so tau_m = c_m - sum_{k<m} tau_k c_{m-k}.
    """
    if M < 1:
        raise ValidationError("M must be >= 1")
    table = _collision_table(q, M)
    exact = q.as_probability().exact
    probs = []
    for m in range(1, M + 1):
        if exact:
            conv = sum(probs[k - 1] * table[m - k] for k in range(1, m))
        else:
            conv = math.fsum(probs[k - 1] * table[m - k] for k in range(1, m))
        value = table[m] - conv
        if exact:
            if value < 0 or value > 1:
                raise InternalInvariantError(
                    f"exact renewal inversion left tau_{m} = {value}"
                )
        else:
            if value < -_TAU_TOL or value > 1 + _TAU_TOL:
                raise InternalInvariantError(
                    f"renewal inversion drifted to tau_{m} = {value!r}; "
                    "this signals a bug, not conditioning"
                )
            value = min(max(value, 0.0), 1.0)
        probs.append(value)
    return MeetingDistribution(q, tuple(probs))


def renewal_reconvolution_gap(q: ProbVector, M: int) -> float:
    """max_m |c_m - sum_k tau_k c_{m-k}| for m <= M (should be ~1e-16)."""
    table = _collision_table(q, M)
    dist = tau_dist(q, M)
    worst = 0.0
    for m in range(1, M + 1):
        conv = math.fsum(dist.probs[k - 1] * table[m - k] for k in range(1, m + 1))
        worst = max(worst, abs(float(table[m]) - conv))
    return worst


class MaxMultinomial(NamedTuple):
    exact: int | None
    closed_form: int


def _compositions_nonneg(total, parts):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions_nonneg(total - head, parts - 1):
            yield (head,) + rest


def max_multinomial(n: int, m: int, brute_limit: int = 10**7) -> MaxMultinomial:
    """Largest multinomial coefficient over m parts summing to n.

    closed_form evaluates the balanced split n = j*m + l as
    (j*m+l)! / ((j+1)!)^l / (j!)^(m-l); exact recomputes the maximum by brute
    force and is None when the composition count exceeds brute_limit.
    """
    if n < 1 or m < 1:
        raise ValidationError("n and m must be >= 1")
    j, l = divmod(n, m)
    closed = math.factorial(n) // (
        math.factorial(j + 1) ** l * math.factorial(j) ** (m - l)
    )
    if math.comb(n + m - 1, m - 1) > brute_limit:
        return MaxMultinomial(None, closed)
    fact_n = math.factorial(n)
    best = 0
    for comp in _compositions_nonneg(n, m):
        denom = 1
        for part in comp:
            denom *= math.factorial(part)
        value = fact_n // denom
        if value > best:
            best = value
    return MaxMultinomial(best, closed)


def stirling_bounds(n: int) -> tuple:
    """(lower, upper) with lower <= n! <= upper:

    sqrt(2 pi n) (n/e)^n <= n! <= sqrt(2 pi n) (n/e)^n e^(1/(12n)).
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    try:
        lower = math.sqrt(2 * math.pi * n) * (n / math.e) ** n
    except OverflowError as err:
        raise ValidationError(
            f"Stirling bounds for n = {n} exceed double range (n <= 170 is safe)"
        ) from err
    return lower, lower * math.exp(1 / (12 * n))


@dataclass(frozen=True)
class QStarBound:
    """Closed-form upper bound for the full collision sum of the packed vector."""

    m: int
    head: float         # 1/m + 8/m^2, covering times n <= m
    tail_factor: float  # Stirling-controlled remainder over times n > m
    total: float

    @property
    def budget(self) -> float:
        return 10.0 / self.m

    def to_record(self) -> dict:
        return {
            "kind": "qstar-bound",
            "m": self.m,
            "head": self.head,
            "tail_factor": self.tail_factor,
            "total": self.total,
            "budget": self.budget,
        }


def lambda_qstar_bound(m: int) -> QStarBound:
    """Bound the packed-vector collision sum by 1/m + 8/m^2 plus a Stirling tail.

    The tail factor is e^(1/(12m)) m sqrt(m) / (sqrt(2 pi))^(m-1) * (1 + 2/(m-3)),
    evaluated in the log domain so large m cannot overflow.  The total must come
    out at most 10/m.
    """
    if m <= 3:
        raise ValidationError(
            "the collision sum of the packed vector diverges for m <= 3"
        )
    head = 1.0 / m + 8.0 / m**2
    log_tail = (
        1.0 / (12 * m)
        + 1.5 * math.log(m)
        - (m - 1) * 0.5 * math.log(2 * math.pi)
        + math.log1p(2.0 / (m - 3))
    )
    try:
        tail = math.exp(log_tail)
    except OverflowError:  # pragma: no cover - log_tail decreases in m
        raise
    total = head + tail
    if total > 10.0 / m:
        raise InternalInvariantError(
            f"packed-vector bound {total} exceeded 10/m at m = {m}"
        )
    return QStarBound(m, head, tail, total)


def qstar_tail_bound(N: int, m: int) -> float:
    """Certified bound on sum_{n>N} c_n for any vector capped at 1/m.

    Termwise c_n <= (max multinomial over m parts) / m^n; for n = j*m + l with
    j >= 1 that is at most K j^(-(m-1)/2) with K = e^(1/(12m)) sqrt(m) /
    (sqrt(2 pi))^(m-1), and the sum over j is closed with
    sum_{j>=J} j^(-s) <= J^(-s) + J^(1-s)/(s-1).  Times n < m use n!/m^n.
    """
    if m < 4:
        raise ValidationError("tail certificate requires m >= 4")
    if N < 1:
        raise ValidationError("N must be >= 1")
    s = (m - 1) / 2.0
    K = math.exp(
        1.0 / (12 * m) + 0.5 * math.log(m) - (m - 1) * 0.5 * math.log(2 * math.pi)
    )
    tail = 0.0
    first = N + 1
    if first < m:
        tail += math.fsum(
            math.factorial(k) / float(m) ** k for k in range(first, m)
        )
        next_j = 1
    else:
        j0 = first // m
        in_block = (j0 + 1) * m - first  # times n > N sharing j = j0
        tail += in_block * K * j0 ** (-s)
        next_j = j0 + 1
    tail += m * K * (next_j ** (-s) + next_j ** (1.0 - s) / (s - 1.0))
    return tail


def lambda_truncated(q: ProbVector, N: int, m: int = 0) -> CollisionSeries:
    """Collision series c_1..c_N plus, when possible, a certified tail.

    A finite tail bound needs m >= 4 and max q_i <= 1/m; otherwise the tail
    is reported as unbounded (the series may genuinely diverge, e.g. d = 2).
    """
    if N < 1:
        raise ValidationError("N must be >= 1")
    qf = q.as_floats().as_probability()
    terms = collision_series(qf, N)
    tail = None
    if m >= 4 and max(qf.entries) * m <= 1 + 1e-12:
        tail = qstar_tail_bound(N, m)
    return CollisionSeries(qf, tuple(terms), m_param=m if tail is not None else 0,
                           tail_bound=tail)


@dataclass(frozen=True)
class ProjectionReport:
    """Both sides of the two-block split of a collision probability."""

    q: tuple
    n: int
    left: float
    right: float
    degenerate: bool = False

    @property
    def diff(self) -> float:
        return abs(self.left - self.right)

    def to_record(self) -> dict:
        return {
            "kind": "projection-check",
            "q": list(self.q),
            "n": self.n,
            "left": self.left,
            "right": self.right,
            "abs_diff": self.diff,
            "degenerate_split": self.degenerate,
        }


def projection_check(q: ProbVector, n: int) -> ProjectionReport:
    """Check c_n(q) against its split over the first-two/rest coordinate blocks.

    Conditioning both walks on making j steps in the first block and n-j in
    the rest factorizes the collision probability as

      c_n(q) = sum_{j+k=n} binom(n,j)^2 w1^(2j) w2^(2k) c_j(front) c_k(back)

    with w1 = q_1+q_2, w2 = q_3+..+q_d and front/back the renormalized blocks.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    qf = q.as_floats().as_probability()
    if qf.d < 3:
        raise ValidationError("projection split needs d >= 3")
    left = collision_prob(qf, n)
    w1 = math.fsum(qf.entries[:2])
    w2 = math.fsum(qf.entries[2:])
    if w1 == 0.0 or w2 == 0.0:
        # One block carries no mass: the split collapses to the other block.
        return ProjectionReport(qf.entries, n, left, left, degenerate=True)
    front = ProbVector(qf.entries[:2]).normalize()
    back = ProbVector(qf.entries[2:]).normalize()
    front_table = _collision_table(front, n)
    back_table = _collision_table(back, n)
    row = _binom_row(n)
    right = math.fsum(
        (row[j] * w1 ** (2 * j)) * (w2 ** (2 * (n - j))) * row[j]
        * front_table[j] * back_table[n - j]
        for j in range(n + 1)
    )
    return ProjectionReport(qf.entries, n, left, right)


def _central_return(k: int) -> float:
    """Probability a +-1 step walk is back at 0 after k steps."""
    if k % 2:
        return 0.0
    if k <= _LAZY_LOG_SWITCH:
        return math.comb(k, k // 2) / 2.0**k
    return math.exp(
        math.lgamma(k + 1) - 2 * math.lgamma(k // 2 + 1) - k * math.log(2)
    )


def lazy_return_prob(x: float, n: int) -> float:
    """Return-to-zero probability of the lazy one-dimensional walk.

    Each step stays put with probability x, else moves +-1 with equal chance:
    F_n(x) = sum_j binom(n,j) x^j (1-x)^(n-j) * binom(n-j,(n-j)/2) / 2^(n-j)
    over j with n - j even.
    """
    if not 0.0 <= x <= 1.0:
        raise ValidationError("laziness parameter must lie in [0, 1]")
    if n < 1:
        raise ValidationError("n must be >= 1")
    if x == 1.0:
        return 1.0
    if n <= _LAZY_LOG_SWITCH:
        row = _binom_row(n)
        return math.fsum(
            row[j] * x**j * (1.0 - x) ** (n - j) * _central_return(n - j)
            for j in range(n % 2, n + 1, 2)
        )
    if x == 0.0:
        return _central_return(n)
    log_x = math.log(x)
    log_1mx = math.log1p(-x)
    terms = []
    for j in range(n % 2, n + 1, 2):
        k = n - j
        terms.append(
            math.exp(
                math.lgamma(n + 1) - math.lgamma(j + 1) - math.lgamma(k + 1)
                + j * log_x + k * log_1mx
                + math.lgamma(k + 1) - 2 * math.lgamma(k // 2 + 1)
                - k * math.log(2)
            )
        )
    return math.fsum(terms)


@dataclass(frozen=True)
class MonotoneReport:
    """Grid scan of the lazy-walk return probability for monotonicity."""

    n_max: int
    grid_step: float
    lo: float
    hi: float
    violations: tuple  # (n, x_left, x_right, drop)
    max_drop: float

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_record(self) -> dict:
        return {
            "kind": "lazy-monotonicity",
            "n_max": self.n_max,
            "grid_step": self.grid_step,
            "domain": [self.lo, self.hi],
            "violations": [list(v) for v in self.violations],
            "max_drop": self.max_drop,
            "passed": self.passed,
        }


def check_fn_monotone(
    n_max: int, grid_step: float, lo: float = 0.5, hi: float = 1.0
) -> MonotoneReport:
    """Scan F_n on the grid {lo, lo+step, ..., hi}; flag drops beyond 1e-14.

    Monotonicity is only claimed on [1/2, 1]; callers probing below 1/2 get a
    scan but no guarantee.
    """
    if grid_step <= 0:
        raise ValidationError("grid step must be positive")
    if n_max < 1:
        raise ValidationError("n_max must be >= 1")
    xs = []
    i = 0
    while True:
        x = lo + i * grid_step
        if x > hi + 1e-12:
            break
        xs.append(min(x, hi))
        i += 1
    violations = []
    max_drop = 0.0
    for n in range(1, n_max + 1):
        values = [lazy_return_prob(x, n) for x in xs]
        for (x0, f0), (x1, f1) in zip(zip(xs, values), zip(xs[1:], values[1:])):
            drop = f0 - f1
            if drop > max_drop:
                max_drop = drop
            if drop > 1e-14:
                violations.append((n, x0, x1, drop))
    return MonotoneReport(n_max, grid_step, lo, hi, tuple(violations), max_drop)
