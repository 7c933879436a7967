"""Percolation decision procedures with every checked inequality recorded.

Three routes:

* a closed-form sufficient condition (mean offspring at least 1 + eps and no
  direction carrying more than 1/ceil(10/eps) of the normalized mass),
* a numeric certificate comparing a truncated-plus-tail collision sum against
  mu - 1, rounded conservatively so float noise can never overclaim,
* the subcritical branching comparison (mu < 1 rules percolation out).

Certificates never claim more than the computation supports: any failed or
uncertifiable check yields "inconclusive".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import ValidationError
from .vectors import EdgeParams, ProbVector
from .walk import lambda_truncated

PERCOLATES = "percolates"
NO_PERCOLATION = "no_percolation"
INCONCLUSIVE = "inconclusive"

# Shown in reports for isotropic context; never used in any verdict.
CONTEXT_NOTE = (
    "context: for the isotropic point, known results also give the lower bound "
    "p_c(d) >= 1/d + 1/(2 d^3); it is quoted for orientation only and plays no "
    "role in these verdicts."
)


@dataclass(frozen=True)
class CheckItem:
    description: str
    left: float
    right: float
    passed: bool

    def to_record(self) -> dict:
        return {
            "check": self.description,
            "left": self.left,
            "right": self.right,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class PercolationCertificate:
    verdict: str
    route: str
    mu: float
    epsilon: float | None
    m: int | None
    checks: tuple
    lambda_value: float | None = None
    notes: tuple = ()

    def to_record(self) -> dict:
        return {
            "kind": "percolation-certificate",
            "verdict": self.verdict,
            "route": self.route,
            "mu": self.mu,
            "epsilon": self.epsilon,
            "m": self.m,
            "lambda_value": self.lambda_value,
            "checks": [c.to_record() for c in self.checks],
            "notes": list(self.notes),
        }

    def to_text(self) -> str:
        lines = [
            f"verdict: {self.verdict}   (route: {self.route})",
            f"  mu = {self.mu!r}"
            + ("" if self.epsilon is None else f", epsilon = {self.epsilon!r}")
            + ("" if self.m is None else f", m = {self.m}"),
        ]
        if self.lambda_value is not None:
            lines.append(f"  collision sum upper estimate = {self.lambda_value!r}")
        for c in self.checks:
            flag = "ok " if c.passed else "FAIL"
            lines.append(f"  [{flag}] {c.description}: {c.left!r} vs {c.right!r}")
        for note in self.notes:
            lines.append(f"  note: {note}")
        return "\n".join(lines)


def _ceil_10_over(epsilon) -> int:
    # Exact ceiling of 10/eps on the rational value of the given epsilon, so
    # borderline floats never round the threshold the wrong way.
    return math.ceil(Fraction(10) / Fraction(epsilon))


def check_theorem1(p: ProbVector, epsilon=None) -> PercolationCertificate:
    """Closed-form sufficient condition for percolation at tolerance epsilon.

    Requires d >= 4, mu >= 1 + epsilon, and every normalized entry below
    1/ceil(10/eps).  With epsilon omitted it defaults to mu - 1.
    Comparisons run in exact arithmetic whenever the inputs are exact.
    """
    params = EdgeParams(p)
    mu_val = params.mu
    notes = [
        "threshold uses ceil(10/eps) on the normalized entries, the stated "
        "form of the condition; certificates record both operand values.",
        CONTEXT_NOTE,
    ]
    if epsilon is None:
        if mu_val <= 1:
            return PercolationCertificate(
                verdict=INCONCLUSIVE,
                route="theorem1",
                mu=float(mu_val),
                epsilon=None,
                m=None,
                checks=(
                    CheckItem("mean offspring exceeds 1", float(mu_val), 1.0, False),
                ),
                notes=tuple(notes),
            )
        epsilon = mu_val - 1
    elif epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    m = _ceil_10_over(epsilon)
    q = p.normalize()
    max_q = q.max_entry()
    threshold = Fraction(1, m) if q.exact else 1.0 / m

    checks = (
        CheckItem("dimension d >= 4", float(p.d), 4.0, p.d >= 4),
        CheckItem(
            "mu >= 1 + epsilon", float(mu_val), float(1 + epsilon),
            bool(mu_val >= 1 + epsilon),
        ),
        CheckItem(
            "max normalized entry < 1/m", float(max_q), float(threshold),
            bool(max_q < threshold),
        ),
    )
    verdict = PERCOLATES if all(c.passed for c in checks) else INCONCLUSIVE
    return PercolationCertificate(
        verdict=verdict,
        route="theorem1",
        mu=float(mu_val),
        epsilon=float(epsilon),
        m=m,
        checks=checks,
        notes=tuple(notes),
    )


def check_subcritical(p: ProbVector) -> PercolationCertificate:
    """mu < 1 kills the cluster by comparison with a dying branching process."""
    params = EdgeParams(p)
    mu_val = params.mu
    passed = bool(mu_val < 1)
    return PercolationCertificate(
        verdict=NO_PERCOLATION if passed else INCONCLUSIVE,
        route="subcritical",
        mu=float(mu_val),
        epsilon=None,
        m=None,
        checks=(CheckItem("mu < 1", float(mu_val), 1.0, passed),),
        notes=(CONTEXT_NOTE,),
    )


def isotropic_bound(d: int) -> float:
    """Upper bound 1/d + 10/d^2 on the isotropic critical parameter, d >= 4."""
    if d < 4:
        raise ValidationError("the isotropic bound is only available for d >= 4")
    return 1.0 / d + 10.0 / d**2


def numeric_certificate(p: ProbVector, m: int, N: int = 500) -> PercolationCertificate:
    """Certify percolation by computing the collision sum against mu - 1.

    The truncated series plus its certified tail gives an upper estimate of
    the full collision sum; percolation is declared only when that estimate,
    further inflated by a rounding guard, stays at or below mu - 1 deflated by
    the same guard.  Needs m >= 4 and max normalized entry <= 1/m for the tail
    certificate; anything else is inconclusive.
    """
    if m < 4:
        raise ValidationError(
            "the tail certificate requires m >= 4; the packed-vector collision "
            "sum diverges for m <= 3"
        )
    if N < 1:
        raise ValidationError("N must be >= 1")
    params = EdgeParams(p)
    mu_val = params.mu
    q = p.normalize()
    series = lambda_truncated(q, N, m)
    checks = []
    notes = [
        "verdict uses the non-strict comparison: collision sum <= mu - 1.",
        CONTEXT_NOTE,
    ]
    capped = series.tail_bound is not None
    checks.append(
        CheckItem(
            "max normalized entry <= 1/m (tail certifiable)",
            float(q.as_floats().max_entry()), 1.0 / m, capped,
        )
    )
    if not capped:
        return PercolationCertificate(
            verdict=INCONCLUSIVE,
            route="numeric_lambda",
            mu=float(mu_val),
            epsilon=float(mu_val - 1) if mu_val > 1 else None,
            m=m,
            checks=tuple(checks),
            lambda_value=None,
            notes=tuple(notes),
        )
    lam = series.certified_total()
    # Conservative rounding: the estimate grows, the target shrinks, so a
    # hair's-width pass at float precision is never reported as a success.
    guard = 1e-12
    lam_safe = lam * (1 + guard)
    rhs = float(mu_val - 1)
    rhs_safe = rhs - abs(rhs) * guard
    passed = bool(rhs > 0 and lam_safe <= rhs_safe)
    checks.append(
        CheckItem("collision sum <= mu - 1", lam_safe, rhs_safe, passed)
    )
    return PercolationCertificate(
        verdict=PERCOLATES if passed else INCONCLUSIVE,
        route="numeric_lambda",
        mu=float(mu_val),
        epsilon=float(mu_val - 1) if mu_val > 1 else None,
        m=m,
        checks=tuple(checks),
        lambda_value=lam,
        notes=tuple(notes),
    )
