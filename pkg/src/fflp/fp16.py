"""IEEE 754 binary16 arithmetic emulation.

All network state in this package lives in binary16 ("half") precision.
This module provides two equivalent routes to that arithmetic:

* a pure-integer scalar implementation (``add_bits``, ``mul_bits``,
  ``halve_bits``) that is the source of truth for the semantics:
  round-to-nearest-even, full subnormal support, signed zeros,
  infinities, and a single canonical quiet NaN; and
* vectorized numpy ``float16`` helpers (``vadd``, ``vmul``, ``vhalve``)
  used on hot paths.  numpy computes float16 ops through float32, which
  is wide enough (p=24 >= 2*11+2) that the double rounding is exact, so
  the two routes agree bit for bit; the test suite checks this.

NaN caveat: the scalar route canonicalizes every NaN result to
``QNAN_BITS``; the vectorized route propagates whatever payload numpy
produces.  Bit-exact comparisons across the two routes therefore only
hold for non-NaN results.
"""

from __future__ import annotations

import struct

import numpy as np

F16 = np.dtype("<f2")

SIGN_MASK = 0x8000
EXP_MASK = 0x7C00
FRAC_MASK = 0x03FF

QNAN_BITS = 0x7E00
POS_INF_BITS = 0x7C00
NEG_INF_BITS = 0xFC00

# Scale at which every finite half is an integer: ulp(subnormal) = 2^-24.
_FIXED_SHIFT = 24

HALF_POINT_FIVE = np.float16(0.5)
HALF_ONE = np.float16(1.0)


def is_nan_bits(b: int) -> bool:
    return (b & EXP_MASK) == EXP_MASK and (b & FRAC_MASK) != 0


def is_inf_bits(b: int) -> bool:
    return (b & EXP_MASK) == EXP_MASK and (b & FRAC_MASK) == 0


def is_zero_bits(b: int) -> bool:
    return (b & ~SIGN_MASK) == 0


def _decompose(b: int) -> tuple[int, int, int]:
    """Split finite bits into (sign, integer significand, power of two).

    value = (-1)^sign * mant * 2^exp2, with mant an integer.
    """
    sign = (b >> 15) & 1
    e = (b >> 10) & 0x1F
    f = b & FRAC_MASK
    if e == 0:
        return sign, f, -24
    return sign, 0x400 | f, e - 25


def _round_magnitude(mant: int, exp2: int) -> int:
    """RNE-round mant * 2^exp2 (mant > 0) to half bits (sign excluded)."""
    nbits = mant.bit_length()
    msb_exp = exp2 + nbits - 1
    if msb_exp >= -14:
        # Normal range: keep 11 significand bits.
        shift = nbits - 11
        if shift <= 0:
            q = mant << -shift
        else:
            q = mant >> shift
            rem = mant & ((1 << shift) - 1)
            half = 1 << (shift - 1)
            if rem > half or (rem == half and (q & 1)):
                q += 1
        if q == 0x800:
            q = 0x400
            msb_exp += 1
        if msb_exp > 15:
            return POS_INF_BITS
        return ((msb_exp + 15) << 10) | (q & FRAC_MASK)
    # Subnormal: round to an integer multiple of 2^-24.
    shift = -(exp2 + _FIXED_SHIFT)
    if shift <= 0:
        q = mant << -shift
    else:
        q = mant >> shift
        rem = mant & ((1 << shift) - 1)
        half = 1 << (shift - 1)
        if rem > half or (rem == half and (q & 1)):
            q += 1
    # q == 0x400 means we rounded up to the smallest normal.
    return q


def add_bits(a: int, b: int) -> int:
    """Bit pattern of a + b under round-to-nearest-even."""
    if is_nan_bits(a) or is_nan_bits(b):
        return QNAN_BITS
    if is_inf_bits(a) or is_inf_bits(b):
        if is_inf_bits(a) and is_inf_bits(b):
            return a if a == b else QNAN_BITS
        return a if is_inf_bits(a) else b
    if is_zero_bits(a) and is_zero_bits(b):
        # -0 only survives when both addends are -0.
        return a & b & SIGN_MASK
    sa, ma, ea = _decompose(a)
    sb, mb, eb = _decompose(b)
    va = (-ma if sa else ma) << (ea + _FIXED_SHIFT)
    vb = (-mb if sb else mb) << (eb + _FIXED_SHIFT)
    s = va + vb
    if s == 0:
        return 0x0000  # exact cancellation yields +0 under RNE
    sign = SIGN_MASK if s < 0 else 0
    return sign | _round_magnitude(abs(s), -_FIXED_SHIFT)


def mul_bits(a: int, b: int) -> int:
    """Bit pattern of a * b under round-to-nearest-even."""
    if is_nan_bits(a) or is_nan_bits(b):
        return QNAN_BITS
    sign = (a ^ b) & SIGN_MASK
    if is_inf_bits(a) or is_inf_bits(b):
        if is_zero_bits(a) or is_zero_bits(b):
            return QNAN_BITS
        return sign | POS_INF_BITS
    if is_zero_bits(a) or is_zero_bits(b):
        return sign
    sa, ma, ea = _decompose(a)
    sb, mb, eb = _decompose(b)
    return sign | _round_magnitude(ma * mb, ea + eb)


def halve_bits(a: int) -> int:
    """Division by two as the hardware does it: exponent decrement.

    Bit-identical to mul_bits(a, 0.5) for every input, including the
    subnormal range where the significand shift needs RNE rounding.
    """
    if is_nan_bits(a):
        return QNAN_BITS
    if is_inf_bits(a) or is_zero_bits(a):
        return a
    sign = a & SIGN_MASK
    e = (a >> 10) & 0x1F
    f = a & FRAC_MASK
    if e >= 2:
        return sign | ((e - 1) << 10) | f
    v = (0x400 | f) if e == 1 else f
    q = v >> 1
    if (v & 1) and (q & 1):  # tie rounds to even
        q += 1
    return sign | q


def neg_bits(a: int) -> int:
    return a ^ SIGN_MASK


def fused_psum_bits(acc: int, w: int, s: int) -> int:
    """Spike-gated accumulate: acc when s == 0, add(acc, w) when s == 1."""
    if s not in (0, 1):
        raise ValueError(f"spike bit must be 0 or 1, got {s!r}")
    return add_bits(acc, w) if s else acc


def bits_to_float(b: int) -> float:
    return struct.unpack("<e", struct.pack("<H", b & 0xFFFF))[0]


def float_to_bits(x: float) -> int:
    """Nearest-even encoding of a Python float as half bits."""
    return int(np.float16(x).view(np.uint16))


class Half:
    """Immutable binary16 scalar, identified by its bit pattern.

    Equality and hashing are bitwise: Half(-0.0) != Half(0.0) and two
    NaNs with the same pattern compare equal.  Arithmetic goes through
    the pure-integer emulation above.
    """

    __slots__ = ("bits",)

    def __init__(self, value: float = 0.0):
        object.__setattr__(self, "bits", float_to_bits(float(value)))

    @classmethod
    def from_bits(cls, bits: int) -> "Half":
        h = cls.__new__(cls)
        object.__setattr__(h, "bits", bits & 0xFFFF)
        return h

    def __setattr__(self, name, value):
        raise AttributeError("Half is immutable")

    def __float__(self) -> float:
        return bits_to_float(self.bits)

    def __add__(self, other: "Half") -> "Half":
        return Half.from_bits(add_bits(self.bits, other.bits))

    def __mul__(self, other: "Half") -> "Half":
        return Half.from_bits(mul_bits(self.bits, other.bits))

    def __neg__(self) -> "Half":
        return Half.from_bits(neg_bits(self.bits))

    def halve(self) -> "Half":
        return Half.from_bits(halve_bits(self.bits))

    def is_nan(self) -> bool:
        return is_nan_bits(self.bits)

    def __eq__(self, other) -> bool:
        return isinstance(other, Half) and self.bits == other.bits

    def __hash__(self) -> int:
        return hash(self.bits)

    def __repr__(self) -> str:
        return f"Half({float(self):g} /0x{self.bits:04x})"


def fused_psum(acc: Half, w: Half, s: int) -> Half:
    return Half.from_bits(fused_psum_bits(acc.bits, w.bits, s))


# ---------------------------------------------------------------------------
# Vectorized route (numpy float16).  Bit-identical to the scalar route for
# non-NaN results; see module docstring.

def vadd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        return np.add(a, b, dtype=np.float16)


def vsub(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        return np.subtract(a, b, dtype=np.float16)


def vmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        return np.multiply(a, b, dtype=np.float16)


def vhalve(a: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        return np.multiply(a, HALF_POINT_FIVE, dtype=np.float16)


def to_bits_array(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=F16).view(np.uint16)


def from_bits_array(bits: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(bits, dtype=np.uint16).view(F16)
