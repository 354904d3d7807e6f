"""Exact rational arithmetic helpers and SMT-LIB literal formatting.

Every finite IEEE-754 float is a dyadic rational (denominator a power of
two), so conversion through :class:`fractions.Fraction` is exact in both
directions.  All weight handling in this package goes through these
helpers; floating point is only ever used at the ONNX boundary.
"""

from __future__ import annotations

import math
import struct
from fractions import Fraction

from .errors import NonFiniteWeight


def float_to_rational(value: float) -> Fraction:
    """Convert a finite Python float to the exactly equal rational.

    Works for values originating from 32-bit floats as well (float32 is a
    subset of float64, so no precision is lost on the way in).
    """
    if math.isnan(value) or math.isinf(value):
        raise NonFiniteWeight(f"non-finite weight {value!r}")
    return Fraction(value)


# 32- and 64-bit variants share one implementation; the distinction only
# matters for documentation and for the round-trip helpers below.
float32_to_rational = float_to_rational
float64_to_rational = float_to_rational


def float32_bits_to_rational(bits: int) -> Fraction:
    """Interpret ``bits`` as an IEEE-754 binary32 pattern and convert exactly."""
    (value,) = struct.unpack("<f", struct.pack("<I", bits & 0xFFFFFFFF))
    return float_to_rational(value)


def rational_to_float32_bits(q: Fraction) -> int:
    """Round ``q`` to the nearest binary32 and return its bit pattern.

    Exact when ``q`` is representable as a binary32 (the round-trip case);
    otherwise rounds to nearest, ties to even.
    """
    (bits,) = struct.unpack("<I", struct.pack("<f", float(q)))
    return bits


def is_dyadic(q: Fraction) -> bool:
    """True iff the denominator of ``q`` (in lowest terms) is a power of two."""
    d = q.denominator
    return d & (d - 1) == 0


def parse_rational_text(text: str) -> Fraction:
    """Parse ``"3"``, ``"-3/4"``, or a finite decimal like ``"0.25"`` exactly.

    Decimal strings are expanded digit by digit (``0.1`` becomes 1/10, not
    the nearest float), which is what task files and solver models need.
    """
    return Fraction(text.strip())


def smt_literal(q: Fraction, fig5_compat: bool = False) -> str:
    """Render a rational as an SMT-LIB Real term.

    Strict SMT-LIB has no negative numerals, so negatives are wrapped as
    ``(- ...)``.  With ``fig5_compat`` a negative numerator is printed
    inline (``(/ -a b)``), which some solvers accept and some reject.
    """
    n, d = q.numerator, q.denominator
    if d == 1:
        return str(n) if n >= 0 else f"(- {-n})"
    if n >= 0:
        return f"(/ {n} {d})"
    if fig5_compat:
        return f"(/ {n} {d})"
    return f"(- (/ {-n} {d}))"
