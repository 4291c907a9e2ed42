"""Bit-exact models of the low-precision formats and mixed-precision dot product.

Float8 layout (one byte)::

    bit 7    sign
    bits 6-3 exponent, bias 7
    bits 2-0 mantissa

Exponent 0 encodes subnormals (``m * 2**-9``).  There are no infinities or
NaNs; every one of the 256 codes is a finite value and the largest magnitude
is 480.  Overflow saturates.  Rounding is round-to-nearest-even everywhere.

PackedWord layout: lane ``k`` occupies bits ``[w*k, w*(k+1))`` of the 32-bit
payload, where ``w`` is the lane width (8 or 16).  Float16 lanes are IEEE
binary16.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

F8_BIAS = 7
F8_MAX = 480.0
F8_MIN_NORMAL_EXP = 1 - F8_BIAS
BLOCK_EXP_BIAS = 15
BLOCK_EXP_MAX = 31


def _f8_decode_table():
    codes = np.arange(256)
    sign = np.where(codes & 0x80, -1.0, 1.0)
    e = (codes >> 3) & 0xF
    m = (codes & 0x7).astype(np.float64)
    mag = np.where(e == 0, m * 2.0 ** (F8_MIN_NORMAL_EXP - 3), (1 + m / 8) * np.exp2(e - F8_BIAS))
    return sign * mag


F8_VALUES = _f8_decode_table()
F8_VALUES.setflags(write=False)


def decode_f8(codes):
    return F8_VALUES[np.asarray(codes, dtype=np.uint8)]


def quantize_f8_codes(x):
    """Round reals to the nearest Float8 codes (vectorized, returns uint8)."""
    x = np.asarray(x, dtype=np.float64)
    if np.isnan(x).any():
        raise ValueError("cannot quantize NaN to float8")
    neg = np.signbit(x)
    a = np.minimum(np.abs(x), F8_MAX)
    with np.errstate(divide="ignore"):
        e = np.floor(np.log2(np.where(a > 0, a, 1.0)))
    e = np.maximum(e, F8_MIN_NORMAL_EXP)
    # log2 can misround at exact powers of two
    e = np.where(a >= np.exp2(e + 1), e + 1, e)
    e = np.where((a < np.exp2(e)) & (e > F8_MIN_NORMAL_EXP), e - 1, e)
    quantum = np.exp2(e - 3)
    sig = np.rint(a / quantum)  # significand in units of quantum, ties to even
    q = np.minimum(sig * quantum, F8_MAX)
    # re-encode the rounded magnitude
    qe = np.floor(np.log2(np.where(q > 0, q, 1.0)))
    normal = q >= 2.0 ** F8_MIN_NORMAL_EXP
    exp_field = np.where(normal, qe + F8_BIAS, 0)
    man_field = np.where(normal, q / np.exp2(qe) * 8 - 8, q / 2.0 ** (F8_MIN_NORMAL_EXP - 3))
    code = (exp_field.astype(np.int64) << 3) | np.rint(man_field).astype(np.int64)
    code = np.where(neg, code | 0x80, code)
    return code.astype(np.uint8)


@dataclass(frozen=True)
class Float8:
    bits: int

    def __post_init__(self):
        if not 0 <= self.bits <= 0xFF:
            raise ValueError(f"float8 bit pattern out of range: {self.bits}")

    @property
    def sign(self):
        return self.bits >> 7

    @property
    def exponent(self):
        return (self.bits >> 3) & 0xF

    @property
    def mantissa(self):
        return self.bits & 0x7

    def __float__(self):
        return float(F8_VALUES[self.bits])

    @classmethod
    def from_float(cls, x):
        return quantize_f8(x)


def quantize_f8(x) -> Float8:
    x = float(x)
    if math.isnan(x):
        raise ValueError("cannot quantize NaN to float8")
    return Float8(int(quantize_f8_codes(x)))


def f8_test_vectors():
    """Rows ``(code, value)`` of the shipped CSV table (version 1)."""
    with resources.files("rnnspatial").joinpath("data/float8_vectors_v1.csv").open() as fh:
        return [(int(r["encoding"], 16), float(r["decoded_value"])) for r in csv.DictReader(fh)]


def write_f8_test_vectors(path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["encoding", "decoded_value"])
        for code, v in enumerate(F8_VALUES):
            w.writerow([f"0x{code:02X}", repr(float(v))])


class WordKind(enum.Enum):
    four_f8 = (4, 8)
    two_f16 = (2, 16)
    one_f32 = (1, 32)

    @property
    def lanes(self):
        return self.value[0]

    @property
    def width(self):
        return self.value[1]


@dataclass(frozen=True)
class PackedWord:
    payload: int
    kind: WordKind

    def __post_init__(self):
        if not 0 <= self.payload < 2**32:
            raise ValueError("payload must fit in 32 bits")


def _lane_bits(values, kind):
    if kind is WordKind.four_f8:
        return np.array([v.bits if isinstance(v, Float8) else int(v) for v in values], dtype=np.uint32)
    if kind is WordKind.two_f16:
        return np.asarray(values, dtype=np.float16).view(np.uint16).astype(np.uint32)
    return np.asarray(values, dtype=np.float32).view(np.uint32)


def pack(values, kind: WordKind) -> PackedWord:
    """Pack lane values (Float8 / codes, float16s, or a float32) into one word."""
    values = list(values)
    if len(values) != kind.lanes:
        raise ValueError(f"{kind.name} takes {kind.lanes} values, got {len(values)}")
    bits = _lane_bits(values, kind)
    payload = 0
    for k, b in enumerate(bits):
        payload |= int(b) << (kind.width * k)
    return PackedWord(payload, kind)


def unpack(word: PackedWord):
    kind = word.kind
    mask = (1 << kind.width) - 1
    lanes = [(word.payload >> (kind.width * k)) & mask for k in range(kind.lanes)]
    if kind is WordKind.four_f8:
        return [Float8(b) for b in lanes]
    if kind is WordKind.two_f16:
        return list(np.array(lanes, dtype=np.uint16).view(np.float16))
    return list(np.array(lanes, dtype=np.uint32).view(np.float32))


def unpack_words(payloads, kind: WordKind) -> np.ndarray:
    """Vectorized unpack of many payloads into a ``(n, lanes)`` array of lane bits."""
    p = np.asarray(payloads, dtype=np.uint32)
    shifts = np.arange(kind.lanes, dtype=np.uint32) * kind.width
    return (p[:, None] >> shifts) & np.uint32((1 << kind.width) - 1) if kind.width < 32 else p[:, None]


def pack_words(lane_bits, kind: WordKind) -> np.ndarray:
    lb = np.asarray(lane_bits, dtype=np.uint32)
    shifts = np.arange(kind.lanes, dtype=np.uint32) * kind.width
    return np.bitwise_or.reduce(lb << shifts, axis=1).astype(np.uint32)


def _as_codes(v):
    if len(v) and isinstance(v[0], Float8):
        return np.array([e.bits for e in v], dtype=np.uint8)
    return np.asarray(v, dtype=np.uint8)


def mixed_dot(a, b, lanes: int = 16) -> np.float32:
    """Dot product of Float8 vectors through the mixed-precision PCU datapath.

    Each issue consumes ``4*lanes`` elements: products are rounded to binary16,
    adjacent pairs are summed in binary16, and the remaining adjacent-pair
    tree levels plus the running accumulation are done in binary32.
    """
    a = _as_codes(a)
    b = _as_codes(b)
    width = 4 * lanes
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("operands must be 1-D and the same length")
    if a.size == 0 or a.size % width:
        raise ValueError(f"length {a.size} is not a positive multiple of 4*lanes={width}")
    return mixed_matvec(a[None, :], b, lanes)[0]


def mixed_matvec(W_codes, v_codes, lanes: int = 16) -> np.ndarray:
    """Row-wise :func:`mixed_dot` of a code matrix against a code vector.

    Rows whose length is not a multiple of ``4*lanes`` are zero padded
    (masked lanes contribute exact zeros).
    """
    W = np.asarray(W_codes, dtype=np.uint8)
    v = np.asarray(v_codes, dtype=np.uint8)
    width = 4 * lanes
    n = W.shape[1]
    pad = -n % width
    if pad:
        W = np.pad(W, ((0, 0), (0, pad)))
        v = np.pad(v, (0, pad))
    issues = W.shape[1] // width
    # products beyond 65504 overflow to inf in binary16, as the hardware would
    with np.errstate(over="ignore", invalid="ignore"):
        prods = (F8_VALUES[W] * F8_VALUES[v]).astype(np.float16)
        prods = prods.reshape(W.shape[0], issues, width)
        level = prods[..., 0::2] + prods[..., 1::2]  # binary16 adds
        level = level.astype(np.float32)
        while level.shape[-1] > 1:
            level = level[..., 0::2] + level[..., 1::2]
        partial = level[..., 0]
        acc = np.zeros(W.shape[0], np.float32)
        for k in range(issues):
            acc = acc + partial[:, k]
    return acc


@dataclass(frozen=True)
class BlockedVector:
    """One shared exponent plus signed ``m``-bit integer mantissas.

    Element ``k`` decodes to ``mantissas[k] * 2**(shared_exponent - bias - m + 1)``.
    """

    shared_exponent: int
    mantissas: np.ndarray  # signed integers, |q| <= 2**m - 1
    mantissa_bits: int
    bias: int = BLOCK_EXP_BIAS

    @property
    def block_length(self):
        return len(self.mantissas)

    @property
    def step(self):
        return 2.0 ** (self.shared_exponent - self.bias - self.mantissa_bits + 1)

    def decode(self):
        return self.mantissas * self.step


def _quantize_block(v, m):
    vmax = np.max(np.abs(v))
    if vmax == 0:
        return BlockedVector(0, np.zeros(len(v), np.int64), m)
    e = math.frexp(float(vmax))[1] - 1
    qmax = 2**m - 1
    while True:
        E = min(max(e + BLOCK_EXP_BIAS, 0), BLOCK_EXP_MAX)
        step = 2.0 ** (E - BLOCK_EXP_BIAS - m + 1)
        q = np.rint(np.abs(v) / step)
        if q.max() > qmax and E < BLOCK_EXP_MAX:
            # rounding carried the block max into the next binade
            e += 1
            continue
        q = np.minimum(q, qmax).astype(np.int64)
        return BlockedVector(E, np.where(np.signbit(v), -q, q), m)


def block_quantize(v, block_length: int, mantissa_bits: int):
    """Split ``v`` into blocks of ``block_length`` with one shared exponent each."""
    if block_length < 1:
        raise ValueError("block_length must be >= 1")
    if not 2 <= mantissa_bits <= 5:
        raise ValueError("mantissa_bits must be in [2, 5]")
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("blocked format needs finite inputs")
    return [_quantize_block(v[k:k + block_length], mantissa_bits) for k in range(0, len(v), block_length)]


def block_dequantize(blocks) -> np.ndarray:
    if isinstance(blocks, BlockedVector):
        return blocks.decode()
    return np.concatenate([b.decode() for b in blocks]) if blocks else np.zeros(0)


def block_roundtrip(v, block_length, mantissa_bits):
    return block_dequantize(block_quantize(v, block_length, mantissa_bits))


def vector_data_path():
    return Path(str(resources.files("rnnspatial").joinpath("data/float8_vectors_v1.csv")))
