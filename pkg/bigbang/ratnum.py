"""
Exact rational arithmetic and branch-regularizability classification.

Rationals are ``fractions.Fraction`` values, which are canonical by
construction (positive denominator, coprime parts). Classification refuses
floating input: membership of w in the countable set of branch-regularizable
equations of state cannot be decided from a rounded value.
"""

import math
import numbers
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple, Union

from bigbang.exceptions import RejectedInputError


Rational = Fraction
RationalLike = Union[Fraction, int, str]

ONE_THIRD = Fraction(1, 3)

_RATIONAL_PATTERN = re.compile(r'^\s*(-?\d+)(?:\s*/\s*(\d+))?\s*$')
_FLOAT_PATTERN = re.compile(r'^\s*[-+]?(\d+\.\d*|\.\d+|\d+(\.\d*)?[eE][-+]?\d+)\s*$')


class RegularityKind(Enum):
    """Outcome of the classification of an equation of state."""
    ALWAYS = "AlwaysRegularizable"
    BRANCH = "BranchRegularizable"
    NOT_BRANCH = "NotBranchRegularizable"


class Parity(Enum):
    """Parity of the canonical numerator of gamma."""
    EVEN = "even"
    ODD = "odd"

    @classmethod
    def of(cls, value: int) -> "Parity":
        return cls.EVEN if value % 2 == 0 else cls.ODD


def normalize(num: int, den: int) -> Fraction:
    """
    Build a canonical rational from an integer pair.

    Args:
        num: Numerator
        den: Denominator, non-zero

    Returns:
        Fraction in lowest terms with the sign carried by the numerator
    """
    if isinstance(num, bool) or isinstance(den, bool) \
            or not isinstance(num, numbers.Integral) or not isinstance(den, numbers.Integral):
        raise RejectedInputError(f"Rational parts must be integers, got ({num!r}, {den!r})",
                                 reason="non-integer-parts")
    if den == 0:
        raise RejectedInputError(f"Zero denominator in {num}/{den}", reason="zero-denominator")
    return Fraction(int(num), int(den))


def parse_rational(text: str) -> Fraction:
    """
    Parse the text form "p/q" or "n" (optional leading minus).

    Decimal and exponent notation are refused with reason ``float-w``.
    """
    if not isinstance(text, str):
        raise RejectedInputError(f"Expected rational text, got {type(text).__name__}",
                                 reason="malformed-rational")
    match = _RATIONAL_PATTERN.match(text)
    if match is None:
        if _FLOAT_PATTERN.match(text):
            raise RejectedInputError(
                f"Floating value '{text.strip()}' rejected: give w as an exact rational p/q",
                reason="float-w")
        raise RejectedInputError(f"Malformed rational '{text}'", reason="malformed-rational")
    num = int(match.group(1))
    den = int(match.group(2)) if match.group(2) is not None else 1
    return normalize(num, den)


def format_rational(value: Fraction) -> str:
    """Canonical text form: "p/q", or "n" for integers."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def as_rational(value: Any) -> Fraction:
    """Coerce exact input (Fraction, int or rational text) to a Fraction."""
    if isinstance(value, bool):
        raise RejectedInputError("Boolean is not a rational", reason="malformed-rational")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, numbers.Integral):
        return Fraction(int(value))
    if isinstance(value, str):
        return parse_rational(value)
    if isinstance(value, numbers.Real):
        raise RejectedInputError(
            f"Floating value {value!r} rejected; use rationalize() with an explicit denominator bound",
            reason="float-w")
    raise RejectedInputError(f"Cannot interpret {value!r} as a rational", reason="malformed-rational")


def rationalize(x: float, max_denominator: int) -> Fraction:
    """
    Closest rational to a float with denominator at most ``max_denominator``.

    The bound is mandatory: there is no implicit rounding anywhere else.
    """
    if isinstance(max_denominator, bool) or not isinstance(max_denominator, numbers.Integral) \
            or max_denominator < 1:
        raise RejectedInputError(f"Denominator bound must be a positive integer, got {max_denominator!r}",
                                 reason="bad-denominator-bound")
    if not math.isfinite(x):
        raise RejectedInputError(f"Cannot rationalize non-finite value {x!r}", reason="non-finite")
    return Fraction(x).limit_denominator(int(max_denominator))


@dataclass(frozen=True)
class ExponentTriple:
    """Blow-up exponents; exact, with float views for the numerics."""
    alpha: Fraction
    beta: Fraction
    gamma: Fraction

    @property
    def alpha_f(self) -> float:
        return float(self.alpha)

    @property
    def beta_f(self) -> float:
        return float(self.beta)

    @property
    def gamma_f(self) -> float:
        return float(self.gamma)

    def to_dict(self) -> Dict[str, str]:
        return {
            "alpha": format_rational(self.alpha),
            "beta": format_rational(self.beta),
            "gamma": format_rational(self.gamma),
        }


def exponents_of(w: RationalLike) -> ExponentTriple:
    """(alpha, beta, gamma) for an equation of state; (4, 2, 1/3) whenever w <= 1."""
    w = as_rational(w)
    if w <= 1:
        return ExponentTriple(Fraction(4), Fraction(2), ONE_THIRD)
    alpha = 3 * (1 + w) - 2
    beta = Fraction(3, 2) * (1 + w) - 1
    gamma = 1 / (1 + beta)
    return ExponentTriple(alpha, beta, gamma)


def in_script_p(p: int, q: int) -> bool:
    """True iff 0 < p < q, gcd(p, q) = 1 and q is odd."""
    return 0 < p < q and math.gcd(p, q) == 1 and q % 2 == 1


def enumerate_script_p(q_max: int) -> List[Tuple[int, int]]:
    """All admissible (p, q) with q <= q_max, ordered by q then p."""
    return [(p, q) for q in range(3, q_max + 1, 2) for p in range(1, q) if math.gcd(p, q) == 1]


def in_q_gamma(gamma: RationalLike) -> bool:
    gamma = as_rational(gamma)
    return in_script_p(gamma.numerator, gamma.denominator)


def q_alpha_member(alpha: RationalLike) -> bool:
    """Membership of alpha = 2(1/gamma - 1) for some admissible gamma."""
    alpha = as_rational(alpha)
    if alpha == -2:
        return False
    return in_q_gamma(Fraction(2) / (alpha + 2))


def q_w_member(w: RationalLike) -> bool:
    """Membership of w = (2/3)/gamma - 1 for some admissible gamma."""
    w = as_rational(w)
    if w == -1:
        return False
    return in_q_gamma(Fraction(2, 3) / (w + 1))


def w_from_alpha(alpha: RationalLike) -> Fraction:
    """Equation of state whose w > 1 blow-up exponent is alpha."""
    return (as_rational(alpha) - 1) / 3


def w_from_pq(p: int, q: int) -> Fraction:
    """Exact (2/3)(q/p) - 1 for an admissible pair."""
    if not in_script_p(p, q):
        raise RejectedInputError(f"({p}, {q}) is not an admissible pair (0<p<q, coprime, q odd)",
                                 reason="not-in-script-p")
    return Fraction(2 * q, 3 * p) - 1


@dataclass(frozen=True)
class RegularityClass:
    """Classification of one equation of state."""
    kind: RegularityKind
    gamma: Fraction
    w: Fraction
    p_parity: Optional[Parity] = None
    reason: str = ""
    warnings: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def regularizable(self) -> bool:
        return self.kind is not RegularityKind.NOT_BRANCH

    def to_dict(self) -> Dict[str, Any]:
        return {
            "w": format_rational(self.w),
            "kind": self.kind.value,
            "gamma": format_rational(self.gamma),
            "parity": self.p_parity.value if self.p_parity else None,
            "reason": self.reason,
            "warnings": list(self.warnings),
        }


def classify(w: RationalLike) -> RegularityClass:
    """
    Classify an exact equation of state.

    Args:
        w: Fraction, int or rational text; floats are rejected

    Returns:
        RegularityClass; w <= 1 is always regularizable (gamma 1/3, p = 1),
        w > 1 is branch regularizable iff gamma is admissible
    """
    w = as_rational(w)
    if w <= 1:
        warnings = ("w<-1",) if w < -1 else ()
        return RegularityClass(RegularityKind.ALWAYS, ONE_THIRD, w, Parity.ODD, "w<=1", warnings)

    gamma = exponents_of(w).gamma
    p, q = gamma.numerator, gamma.denominator
    if in_script_p(p, q):
        return RegularityClass(RegularityKind.BRANCH, gamma, w, Parity.of(p), "gamma-in-Q")
    reason = "q-even" if q % 2 == 0 else "w>1-not-in-Qw"
    return RegularityClass(RegularityKind.NOT_BRANCH, gamma, w, None, reason)


def block_regularizable_pure_power(beta: RationalLike) -> bool:
    """True iff beta = 1 - 1/n for a positive integer n."""
    beta = as_rational(beta)
    if beta >= 1:
        return False
    n = 1 / (1 - beta)
    return n.denominator == 1 and n >= 1
