"""
Eight-bit arithmetic with wider accumulation
============================================

Weights and activations are stored as 8-bit floats (1 sign, 4 exponent and
3 mantissa bits).  Products are formed in 16 bit, the first level of the
reduction tree adds in 16 bit, and everything after that is 32 bit.
"""

import numpy as np

from rnnspatial import oracle
from rnnspatial.lowprec import (
    F8_VALUES, WordKind, block_dequantize, block_quantize, decode_f8, mixed_dot, pack,
    quantize_f8, quantize_f8_codes, unpack,
)

print("largest Float8 value:", F8_VALUES.max(), " smallest positive:", F8_VALUES[1])
for x in (0.1, 1.0625, 3.3, 1000.0):
    q = quantize_f8(x)
    print(f"{x:>8} -> code 0x{q.bits:02x} -> {float(q)}")

# four Float8 lanes share one 32-bit word
word = pack([quantize_f8(v) for v in (1.0, -2.0, 0.5, 7.0)], WordKind.four_f8)
print(f"packed word 0x{word.payload:08x} unpacks to", [float(v) for v in unpack(word)])

# a 64-element dot product on a 16-lane unit, checked against the scalar model
rng = np.random.default_rng(0)
a = quantize_f8_codes(rng.normal(size=64))
b = quantize_f8_codes(rng.normal(size=64))
got = mixed_dot(a, b, lanes=16)
ref = oracle.mixed_dot(a.tolist(), b.tolist(), 16)
exact = float(decode_f8(a) @ decode_f8(b))
print(f"mixed dot {float(got)!r}, scalar model {ref!r}, exact on decoded inputs {exact!r}")

# blocked format: one shared exponent per block, small signed mantissas
v = rng.normal(size=12) * 4
for m in (2, 3, 5):
    err = np.max(np.abs(block_dequantize(block_quantize(v, 4, m)) - v))
    print(f"block of 4, {m}-bit mantissas: max abs error {err:.4f}")
