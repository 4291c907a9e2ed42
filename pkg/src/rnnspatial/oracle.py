"""Straight-line scalar reference implementations.

Plain Python floats and loops only, no numpy, so that they stay independent
of the vectorized paths they are used to check.  ``struct`` provides the
binary16/binary32 rounding: a double holds the exact sum or product of two
narrower floats closely enough (53 >= 2*24 + 2 bits) that rounding the double
result once gives the correctly rounded narrow result.
"""

import math
import struct


def sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def _dot(row, vec):
    s = 0.0
    for a, b in zip(row, vec):
        s += a * b
    return s


def lstm_step(W_h, W_x, b, x, h, c):
    """Nested-list LSTM step; gate order i, j, f, o.  Returns (h', c')."""
    H = len(h)
    hn, cn = [], []
    for k in range(H):
        p = [_dot(W_h[g][k], h) + _dot(W_x[g][k], x) + b[g][k] for g in range(4)]
        i = sig(p[0])
        j = math.tanh(p[1])
        f = sig(p[2])
        o = sig(p[3])
        ck = f * c[k] + i * j
        cn.append(ck)
        hn.append(o * math.tanh(ck))
    return hn, cn


def gru_step(W_h, W_x, b, x, h):
    """Nested-list GRU step; gate order r, u, c (reset applied before W_h[c])."""
    H = len(h)
    r = [sig(_dot(W_h[0][k], h) + _dot(W_x[0][k], x) + b[0][k]) for k in range(H)]
    u = [sig(_dot(W_h[1][k], h) + _dot(W_x[1][k], x) + b[1][k]) for k in range(H)]
    rh = [r[k] * h[k] for k in range(H)]
    out = []
    for k in range(H):
        cand = math.tanh(_dot(W_h[2][k], rh) + _dot(W_x[2][k], x) + b[2][k])
        out.append(u[k] * h[k] + (1.0 - u[k]) * cand)
    return out


def f8_value(code):
    """Decode an 8-bit 1-4-3 (bias 7) code with subnormals, no inf/NaN."""
    s = -1.0 if code & 0x80 else 1.0
    e = (code >> 3) & 0xF
    m = code & 0x7
    if e == 0:
        return s * m * 2.0 ** -9
    return s * (1 + m / 8) * 2.0 ** (e - 7)


def f8_table():
    return [f8_value(c) for c in range(256)]


def f8_nearest(x, table=None):
    """Index of the nearest table value; ties go to the even code."""
    table = f8_table() if table is None else table
    best = None
    for code, v in enumerate(table):
        d = abs(v - x)
        if best is None or d < best[0] or (d == best[0] and code % 2 == 0 and best[1] % 2 == 1):
            best = (d, code)
    return best[1]


def to_f16(x):
    try:
        return struct.unpack("<e", struct.pack("<e", x))[0]
    except OverflowError:
        return math.copysign(math.inf, x)


def to_f32(x):
    try:
        return struct.unpack("<f", struct.pack("<f", x))[0]
    except OverflowError:
        return math.copysign(math.inf, x)


def mixed_dot(a_codes, b_codes, lanes):
    """Stage-by-stage scalar model of one PCU map-reduce, accumulated over issues."""
    width = 4 * lanes
    acc = 0.0
    for base in range(0, len(a_codes), width):
        prods = [to_f16(f8_value(a_codes[k]) * f8_value(b_codes[k])) for k in range(base, base + width)]
        level = [to_f16(prods[k] + prods[k + 1]) for k in range(0, width, 2)]
        while len(level) > 1:
            level = [to_f32(level[k] + level[k + 1]) for k in range(0, len(level), 2)]
        acc = to_f32(acc + level[0])
    return acc


def block_quantize(values, mantissa_bits, bias=15):
    """Shared-exponent quantization of one block, element by element."""
    vmax = max(abs(v) for v in values)
    if vmax == 0.0:
        return 0, [0.0] * len(values)
    e = math.frexp(vmax)[1] - 1
    while True:
        E = min(max(e + bias, 0), 31)
        step = 2.0 ** (E - bias - mantissa_bits + 1)
        qmax = 2 ** mantissa_bits - 1
        q = [round(abs(v) / step) for v in values]  # Python round: ties to even
        if max(q) > qmax and E < 31:
            e += 1
            continue
        q = [min(k, qmax) for k in q]
        return E, [math.copysign(k * step, v) for k, v in zip(q, values)]
