"""Exact rational arithmetic used throughout the symbolic layers.

gmpy2.mpq is used when available (an order of magnitude faster for the
iterative derivation); fractions.Fraction otherwise.  Both types hash and
compare identically for equal values, serialise via str() as "p/q", and
accept the same constructor arguments, so the choice is invisible to
callers.
"""

from __future__ import annotations

from fractions import Fraction

try:
    from gmpy2 import mpq as Q
except ImportError:  # pragma: no cover - exercised only without gmpy2
    Q = Fraction

QZERO = Q(0)
QONE = Q(1)
QHALF = Q(1, 2)


def qstr(value) -> str:
    """Serialise a rational as "p/q" (or "p" for integers)."""
    return str(value)


def qparse(text: str):
    """Inverse of qstr."""
    if "/" in text:
        num, den = text.split("/")
        return Q(int(num), int(den))
    return Q(int(text))


def as_fraction(value) -> Fraction:
    return Fraction(int(value.numerator), int(value.denominator))


def isqrt_exact(value):
    """Return the exact rational square root of value, or None."""
    import math

    num, den = int(value.numerator), int(value.denominator)
    if num < 0:
        return None
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Q(rn, rd)
    return None
