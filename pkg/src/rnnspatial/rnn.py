"""Full-precision reference model of LSTM and GRU cells.

LSTM (gate order ``i, j, f, o``)::

    i = sigmoid(W_h[i] h + W_x[i] x + b[i])
    j = tanh(W_h[j] h + W_x[j] x + b[j])
    f = sigmoid(W_h[f] h + W_x[f] x + b[f])
    o = sigmoid(W_h[o] h + W_x[o] x + b[o])
    c' = f * c + i * j
    y = h' = o * tanh(c')

GRU (gate order ``r, u, c``; the reset gate is applied to ``h`` before the
candidate matrix product, as in TensorFlow's ``GRUBlockCell``)::

    r = sigmoid(W_h[r] h + W_x[r] x + b[r])
    u = sigmoid(W_h[u] h + W_x[u] x + b[u])
    c = tanh(W_h[c] (r * h) + W_x[c] x + b[c])
    y = h' = u * h + (1 - u) * c

Every gate works on the concatenated ``H x R`` weight view ``[W_h | W_x]``
against the concatenated vector ``[h | x]``.  All row dot products go through
:func:`_row_dots`, so the per-element LSTM-1 path and the full cell agree bit
for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

LSTM_GATES = ("i", "j", "f", "o")
GRU_GATES = ("r", "u", "c")


class ShapeError(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class CellDims:
    H: int
    D: int
    T: int = 1
    G: int = 4

    def __post_init__(self):
        for name in ("H", "D", "T"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.G not in (3, 4):
            raise ValueError(f"G must be 3 (GRU) or 4 (LSTM), got {self.G}")

    @property
    def R(self) -> int:
        return self.H + self.D

    @property
    def kind(self) -> str:
        return "lstm" if self.G == 4 else "gru"

    @classmethod
    def lstm(cls, H, D=None, T=1):
        return cls(H=H, D=H if D is None else D, T=T, G=4)

    @classmethod
    def gru(cls, H, D=None, T=1):
        return cls(H=H, D=H if D is None else D, T=T, G=3)


@dataclass(frozen=True)
class _GatedWeights:
    W_h: np.ndarray  # (G, H, H)
    W_x: np.ndarray  # (G, H, D)
    b: np.ndarray  # (G, H)
    _W: np.ndarray = field(init=False, repr=False, compare=False)

    gate_names = ()

    def __post_init__(self):
        W_h = np.asarray(self.W_h)
        W_x = np.asarray(self.W_x)
        b = np.asarray(self.b)
        G = len(self.gate_names)
        if W_h.ndim != 3 or W_h.shape[0] != G or W_h.shape[1] != W_h.shape[2]:
            raise ShapeError(f"W_h must be ({G}, H, H), got {W_h.shape}")
        H = W_h.shape[1]
        if W_x.ndim != 3 or W_x.shape[:2] != (G, H):
            raise ShapeError(f"W_x must be ({G}, {H}, D), got {W_x.shape}")
        if b.shape != (G, H):
            raise ShapeError(f"b must be ({G}, {H}), got {b.shape}")
        dtype = np.result_type(W_h, W_x, b, np.float32)
        W_h = W_h.astype(dtype)
        W_x = W_x.astype(dtype)
        b = b.astype(dtype)
        object.__setattr__(self, "W_h", W_h)
        object.__setattr__(self, "W_x", W_x)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "_W", np.ascontiguousarray(np.concatenate([W_h, W_x], axis=2)))

    @property
    def dims(self) -> CellDims:
        return CellDims(H=self.W_h.shape[1], D=self.W_x.shape[2], G=len(self.gate_names))

    @property
    def dtype(self):
        return self.W_h.dtype

    @property
    def W(self) -> np.ndarray:
        """Concatenated ``(G, H, R)`` view with column layout ``[W_h | W_x]``."""
        return self._W

    def row(self, gate: int, row: int) -> np.ndarray:
        return self._W[gate, row]

    def astype(self, dtype):
        return type(self)(self.W_h.astype(dtype), self.W_x.astype(dtype), self.b.astype(dtype))

    @classmethod
    def zeros(cls, H, D, dtype=np.float64):
        G = len(cls.gate_names)
        return cls(np.zeros((G, H, H), dtype), np.zeros((G, H, D), dtype), np.zeros((G, H), dtype))

    @classmethod
    def random(cls, H, D, seed=0, scale=None, dtype=np.float64):
        """Seeded instance with entries uniform in ``[-scale, scale]``.

        ``scale`` defaults to ``1/sqrt(R)`` so pre-activations stay O(1).
        """
        G = len(cls.gate_names)
        rng = np.random.default_rng(np.uint64(seed))
        s = 1.0 / np.sqrt(H + D) if scale is None else scale
        W_h = rng.uniform(-s, s, (G, H, H))
        W_x = rng.uniform(-s, s, (G, H, D))
        b = rng.uniform(-s, s, (G, H))
        return cls(W_h.astype(dtype), W_x.astype(dtype), b.astype(dtype))

    def to_dict(self) -> dict:
        d = self.dims
        return {
            "kind": d.kind,
            "dims": {"H": d.H, "D": d.D, "G": d.G},
            "gates": list(self.gate_names),
            "W_h": self.W_h.tolist(),
            "W_x": self.W_x.tolist(),
            "b": self.b.tolist(),
        }


class LstmWeights(_GatedWeights):
    gate_names = LSTM_GATES


class GruWeights(_GatedWeights):
    gate_names = GRU_GATES


@dataclass(frozen=True)
class CellState:
    h: np.ndarray
    c: np.ndarray | None = None

    @classmethod
    def zeros(cls, H, lstm=True, dtype=np.float64):
        return cls(np.zeros(H, dtype), np.zeros(H, dtype) if lstm else None)


@dataclass(frozen=True)
class GateActivations:
    i: np.ndarray
    j: np.ndarray
    f: np.ndarray
    o: np.ndarray


def sigmoid(x):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def _row_dots(W, v):
    # Single reduction kernel for both full-cell and per-row paths.
    return np.add.reduce(W * v, axis=-1)


def _check_vec(name, v, n, dtype):
    v = np.asarray(v, dtype=dtype)
    if v.shape != (n,):
        raise ShapeError(f"{name} must have shape ({n},), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DomainError(f"{name} contains non-finite values")
    return v


def lstm_gates(w: LstmWeights, x_t, h) -> GateActivations:
    dims = w.dims
    x_t = _check_vec("x_t", x_t, dims.D, w.dtype)
    h = _check_vec("h", h, dims.H, w.dtype)
    pre = _row_dots(w.W, np.concatenate([h, x_t])) + w.b
    return GateActivations(sigmoid(pre[0]), np.tanh(pre[1]), sigmoid(pre[2]), sigmoid(pre[3]))


def lstm_cell_step(w: LstmWeights, x_t, s: CellState):
    """One LSTM step; returns ``(y_t, CellState(h', c'))``."""
    if not isinstance(w, LstmWeights):
        raise TypeError("lstm_cell_step needs LstmWeights")
    dims = w.dims
    if s.c is None:
        raise ShapeError("LSTM state needs a cell vector c")
    c = _check_vec("c", s.c, dims.H, w.dtype)
    g = lstm_gates(w, x_t, s.h)
    c_next = g.f * c + g.i * g.j
    h_next = g.o * np.tanh(c_next)
    return h_next, CellState(h_next, c_next)


def gru_cell_step(w: GruWeights, x_t, h):
    """One GRU step; returns ``(y_t, h_next)`` with ``y_t is h_next``."""
    if not isinstance(w, GruWeights):
        raise TypeError("gru_cell_step needs GruWeights")
    dims = w.dims
    x_t = _check_vec("x_t", x_t, dims.D, w.dtype)
    h = _check_vec("h", h, dims.H, w.dtype)
    pre_ru = _row_dots(w.W[:2], np.concatenate([h, x_t])) + w.b[:2]
    r = sigmoid(pre_ru[0])
    u = sigmoid(pre_ru[1])
    cand = np.tanh(_row_dots(w.W[2], np.concatenate([r * h, x_t])) + w.b[2])
    h_next = u * h + (1.0 - u) * cand
    return h_next, h_next


def lstm1(w: LstmWeights, x_t, h, c_prev_elem, row: int):
    """Element ``row`` of ``(c_t, h_t)`` from four independent row dot products."""
    dims = w.dims
    if not 0 <= row < dims.H:
        raise IndexError(f"row {row} out of range [0, {dims.H})")
    x_t = _check_vec("x_t", x_t, dims.D, w.dtype)
    h = _check_vec("h", h, dims.H, w.dtype)
    c_prev = w.dtype.type(c_prev_elem)
    if not np.isfinite(c_prev):
        raise DomainError("c_prev_elem is not finite")
    pre = _row_dots(w.W[:, row, :], np.concatenate([h, x_t])) + w.b[:, row]
    i, j, f, o = sigmoid(pre[0]), np.tanh(pre[1]), sigmoid(pre[2]), sigmoid(pre[3])
    c = f * c_prev + i * j
    return c, o * np.tanh(c)


def lstm_step_by_rows(w: LstmWeights, x_t, s: CellState):
    """Assemble a full step from ``lstm1`` calls, one per hidden row."""
    H = w.dims.H
    c = np.empty(H, w.dtype)
    h = np.empty(H, w.dtype)
    for r in range(H):
        c[r], h[r] = lstm1(w, x_t, s.h, s.c[r], r)
    return h, CellState(h, c)


def run_sequence(w, inputs, s0=None):
    """Feed ``inputs`` (``T x D``) through the cell; returns ``T x H`` outputs.

    ``s0`` is a :class:`CellState` for LSTM, or an ``h`` vector (or CellState)
    for GRU.  Defaults to the zero state.
    """
    inputs = np.asarray(inputs, dtype=w.dtype)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise ShapeError("inputs must be a non-empty T x D array")
    H = w.dims.H
    out = np.empty((inputs.shape[0], H), w.dtype)
    if isinstance(w, LstmWeights):
        s = CellState.zeros(H, dtype=w.dtype) if s0 is None else s0
        for t, x in enumerate(inputs):
            out[t], s = lstm_cell_step(w, x, s)
    else:
        h = np.zeros(H, w.dtype) if s0 is None else getattr(s0, "h", s0)
        for t, x in enumerate(inputs):
            out[t], h = gru_cell_step(w, x, h)
    return out


def flop_count(dims: CellDims) -> int:
    """Multiply-add FLOPs of the gate matrix products: ``2*G*H*R*T``."""
    return 2 * dims.G * dims.H * dims.R * dims.T


def random_instance(kind, H, D=None, T=1, seed=0, dtype=np.float64):
    """Seeded ``(weights, inputs, initial_state)`` triple."""
    D = H if D is None else D
    cls = LstmWeights if kind == "lstm" else GruWeights
    w = cls.random(H, D, seed=seed, dtype=dtype)
    rng = np.random.default_rng(np.uint64(seed) ^ np.uint64(0x9E3779B97F4A7C15))
    xs = rng.uniform(-1, 1, (T, D)).astype(dtype)
    h0 = rng.uniform(-1, 1, H).astype(dtype)
    s0 = CellState(h0, rng.uniform(-1, 1, H).astype(dtype)) if kind == "lstm" else CellState(h0)
    return w, xs, s0


def weights_from_dict(d: dict):
    kind = d["kind"]
    cls = LstmWeights if kind == "lstm" else GruWeights
    if tuple(d.get("gates", cls.gate_names)) != cls.gate_names:
        raise ShapeError(f"gate order must be {cls.gate_names}")
    w = cls(np.array(d["W_h"], float), np.array(d["W_x"], float), np.array(d["b"], float))
    dd = d.get("dims")
    if dd and (dd["H"], dd["D"]) != (w.dims.H, w.dims.D):
        raise ShapeError(f"dims {dd} disagree with array shapes")
    return w


def save_weights(w, path):
    Path(path).write_text(json.dumps(w.to_dict()))


def load_weights(path):
    return weights_from_dict(json.loads(Path(path).read_text()))
