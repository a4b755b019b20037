"""Dyadic fixed-point reals.

A point of [0, 1) at precision ``p`` is stored as an integer ``n`` with value
``n / 2**p``.  Translations (the only thing an IET does) are then exact, and
the Rauzy-Veech subtractions on length numerators never round.
"""
from __future__ import annotations

import re
from fractions import Fraction
from numbers import Rational, Real

import mpmath
from mpmath import libmp

_HEX_RE = re.compile(r"^(-?)0x([0-9a-fA-F]+)(?:\.([0-9a-fA-F]*))?p([+-]?\d+)$")


def tolerance_bits(precision_bits: int) -> int:
    """Exponent ``k`` such that the comparison tolerance is ``2**-k``."""
    return precision_bits // 2


def to_fraction(x) -> Fraction:
    """Exact rational value of ``x`` (int, float, Fraction, mpf, or string)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not reals")
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, mpmath.mpf):
        sign, man, exp, _ = x._mpf_
        if not man and exp:
            raise ValueError(f"non-finite value {x}")
        v = Fraction(int(man)) * Fraction(2) ** int(exp)
        return -v if sign else v
    if isinstance(x, str):
        s = x.strip()
        if _HEX_RE.match(s):
            return parse_hex(s)
        return Fraction(s)
    if isinstance(x, Real):
        return Fraction(float(x))
    raise TypeError(f"cannot interpret {x!r} as a real number")


def to_fixed(x, precision_bits: int) -> int:
    """Round ``x`` to the nearest multiple of ``2**-precision_bits``."""
    if isinstance(x, int) and not isinstance(x, bool):
        return x << precision_bits
    return int(round(to_fraction(x) * (1 << precision_bits)))


def to_mpf(n: int, precision_bits: int) -> mpmath.mpf:
    """Exact mpf for the fixed-point value ``n / 2**precision_bits``."""
    return mpmath.mp.make_mpf(libmp.from_man_exp(n, -precision_bits))


def to_float(n: int, precision_bits: int) -> float:
    # int / int true division is correctly rounded
    return n / (1 << precision_bits)


def hex_string(n: int, precision_bits: int) -> str:
    """Hex-float literal ``0x<hex>p-<bits>``; round-trips bit-exactly."""
    sign = "-" if n < 0 else ""
    return f"{sign}0x{abs(n):x}p-{precision_bits}"


def parse_hex(s: str) -> Fraction:
    m = _HEX_RE.match(s.strip())
    if not m:
        raise ValueError(f"not a hex-float literal: {s!r}")
    sign, whole, frac, exp = m.groups()
    frac = frac or ""
    man = int(whole + frac, 16)
    e = int(exp) - 4 * len(frac)
    v = Fraction(man) * Fraction(2) ** e
    return -v if sign else v


def fixed_from_hex(s: str, precision_bits: int) -> int:
    v = parse_hex(s) * (1 << precision_bits)
    if v.denominator != 1:
        raise ValueError(f"{s} is not representable with {precision_bits} bits")
    return int(v)


def fraction_hex_digits(n: int, precision_bits: int, count: int) -> str:
    """Leading ``count`` hex digits of the fractional expansion of n/2**p (p % 4 == 0)."""
    width = -(-precision_bits // 4)
    shift = 4 * width - precision_bits
    return f"{n << shift:0{width}x}"[:count]
