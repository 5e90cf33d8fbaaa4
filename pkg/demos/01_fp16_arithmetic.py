"""Tour of the binary16 emulation layer.

The accelerator does all of its arithmetic in IEEE 754 half precision
with round-to-nearest-even.  This walks through the quirks that make
bit-faithful emulation matter: non-associativity, subnormals, and the
multiplier-free halving used by the neuron leak.
"""

import numpy as np

from fflp.fp16 import Half, add_bits, bits_to_float, float_to_bits, mul_bits

# half precision keeps 11 significant bits: the spacing at 1024 is
# exactly 1, at 2048 it is 2 and the +1 rounds away
one = Half(1.0)
print("1024 + 1 =", float(Half(1024.0) + one))
print("2048 + 1 =", float(Half(2048.0) + one), "(ULP at 2048 is 2)")

# addition is not associative: the summation order is part of the contract
a, b, c = Half(1024.0), Half(-1024.0), Half(1.0)
print("\n(1024 - 1024) + 1 =", float((a + b) + c))
print("1024 + (-1024 + 1) =", float(a + (b + c)))

# the smallest positive half is subnormal: 2^-24
tiny = Half.from_bits(0x0001)
print("\nsmallest subnormal:", float(tiny), "=", 2.0**-24)
print("halved (round to nearest even -> zero):", float(tiny.halve()))

# halving a normal number only decrements the exponent -- no multiplier
x = Half(3.0)
print("\n3.0 halved:", float(x.halve()), "| bits", hex(x.bits), "->",
      hex(x.halve().bits))

# the pure-integer route and numpy's float16 agree bit for bit
rng = np.random.default_rng(0)
pairs = rng.integers(0, 2**16, size=(1000, 2), dtype=np.uint16)
print("\nsample pairs through the integer emulation:")
for pa, pb in pairs[:5]:
    s = add_bits(int(pa), int(pb))
    p = mul_bits(int(pa), int(pb))
    print(f"  {bits_to_float(int(pa)):12.5g} , {bits_to_float(int(pb)):12.5g}"
          f"  sum={bits_to_float(s):12.5g}  prod={bits_to_float(p):12.5g}")

mismatch = 0
for pa, pb in pairs:
    got = add_bits(int(pa), int(pb))
    if (got & 0x7C00) == 0x7C00 and (got & 0x3FF):
        continue  # NaN payloads are compared canonically elsewhere
    fa = np.float16(bits_to_float(int(pa)))
    fb = np.float16(bits_to_float(int(pb)))
    with np.errstate(over="ignore", invalid="ignore"):
        ref = float_to_bits(float(fa + fb))
    mismatch += got != ref
print("\ninteger-emulation vs numpy float16 mismatches on 1000 pairs:", mismatch)
