"""Direction-weight vectors and per-edge opening probabilities.

A vector is either *exact* (all entries ``fractions.Fraction``) or float;
exact vectors feed the enumeration oracles, float vectors the series code.
Both share one immutable type so every operation downstream is agnostic.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

from .errors import ValidationError

# |sum - 1| below this counts as a probability vector.
PROB_SUM_ABS_TOL = 1e-12
# |sum - 1| up to this is silently renormalized instead of rejected.
RENORMALIZE_TOL = 1e-9

_SHORTHAND = re.compile(r"^\s*(\d+)\s*[xX]\s*(\S+)\s*$")


def _checked_sum(entries):
    """Entry sum: compensated for floats, exact for rationals."""
    if any(isinstance(e, float) for e in entries):
        return math.fsum(entries)
    return sum(entries)


@dataclass(frozen=True)
class ProbVector:
    """Nonnegative weights over the d lattice directions, at least one positive."""

    entries: tuple

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise ValidationError("direction vector must have at least one entry")
        if any(isinstance(e, float) for e in entries):
            entries = tuple(float(e) for e in entries)
            if any(math.isnan(e) or math.isinf(e) for e in entries):
                raise ValidationError("entries must be finite")
        else:
            entries = tuple(Fraction(e) for e in entries)
        if any(e < 0 for e in entries):
            raise ValidationError("entries must be nonnegative")
        if all(e == 0 for e in entries):
            raise ValidationError("at least one entry must be positive")
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def d(self) -> int:
        return len(self.entries)

    @property
    def exact(self) -> bool:
        return isinstance(self.entries[0], Rational)

    def total(self):
        return _checked_sum(self.entries)

    def max_entry(self):
        return max(self.entries)

    def normalize(self) -> "ProbVector":
        """Scale entries to sum exactly (rationals) or nearly (floats) to 1."""
        s = self.total()
        return ProbVector(tuple(e / s for e in self.entries))

    def is_probability(self) -> bool:
        return abs(self.total() - 1) <= PROB_SUM_ABS_TOL

    def as_probability(self) -> "ProbVector":
        """Return self as a probability vector, renormalizing small drift.

        Sums within PROB_SUM_ABS_TOL of 1 pass through unchanged, drift up to
        RENORMALIZE_TOL is renormalized, anything larger is rejected.
        """
        gap = abs(self.total() - 1)
        if gap <= PROB_SUM_ABS_TOL:
            return self
        if gap <= RENORMALIZE_TOL:
            return self.normalize()
        raise ValidationError(
            f"entries sum to {self.total()!r}, not a probability vector"
        )

    def as_floats(self) -> "ProbVector":
        if not self.exact:
            return self
        return ProbVector(tuple(float(e) for e in self.entries))

    def as_exact(self) -> "ProbVector":
        """Exact view; float entries convert to their exact binary rational."""
        if self.exact:
            return self
        return ProbVector(tuple(Fraction(e) for e in self.entries))

    def permuted(self, order) -> "ProbVector":
        return ProbVector(tuple(self.entries[i] for i in order))


def parse_scalar(token: str, exact: bool = False):
    """Parse one entry: a decimal ('0.25'), a fraction ('1/4'), or an integer."""
    token = token.strip()
    try:
        value = Fraction(token)
    except (ValueError, ZeroDivisionError) as err:
        raise ValidationError(f"cannot parse number {token!r}") from err
    return value if exact else float(value)


def parse_vector(text: str, exact: bool = False) -> ProbVector:
    """Parse '0.5,0.6', '1/2,1/3,1/6' or the shorthand '20x0.1'.

    Decimal text parses exactly ('0.1' becomes 1/10) when exact=True.
    """
    short = _SHORTHAND.match(text)
    if short:
        count = int(short.group(1))
        if count < 1:
            raise ValidationError("repeat count must be >= 1")
        return ProbVector((parse_scalar(short.group(2), exact),) * count)
    tokens = [t for t in text.split(",") if t.strip()]
    if not tokens:
        raise ValidationError(f"empty vector {text!r}")
    return ProbVector(tuple(parse_scalar(t, exact) for t in tokens))


@dataclass(frozen=True)
class EdgeParams:
    """Per-direction edge-opening probabilities with derived scalar statistics.

    mu is the entry sum (mean offspring per vertex) and var_y0 the variance
    sum(p_i (1 - p_i)) of the number of open edges out of a single vertex.
    """

    p: ProbVector
    mu: object = field(init=False)
    var_y0: object = field(init=False)

    def __post_init__(self):
        if any(e > 1 for e in self.p.entries):
            raise ValidationError("edge probabilities must lie in [0, 1]")
        mu_val = self.p.total()
        var_val = _checked_sum([e * (1 - e) for e in self.p.entries])
        object.__setattr__(self, "mu", mu_val)
        object.__setattr__(self, "var_y0", var_val)
        if not (0 <= var_val <= mu_val):
            raise ValidationError("inconsistent edge probabilities")

    @property
    def d(self) -> int:
        return self.p.d

    @property
    def exact(self) -> bool:
        return self.p.exact


def mu(params: EdgeParams):
    """Mean number of open edges out of one vertex: sum of p_i."""
    return params.mu


def var_y0(params: EdgeParams):
    """Variance of the number of open edges out of one vertex: sum p_i(1-p_i)."""
    return params.var_y0


def normalize(p: ProbVector) -> ProbVector:
    """Entrywise p_i / sum(p), preserving order."""
    return p.normalize()
