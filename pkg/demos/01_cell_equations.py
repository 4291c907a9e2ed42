"""
LSTM and GRU cells, one row at a time
=====================================

A single LSTM step computes four gate pre-activations from the stacked
``[h | x]`` vector, then a short element-wise chain.  Each hidden element only
needs its own four weight rows, which is what lets a spatial design hand rows
to independent engines.
"""

import numpy as np

from rnnspatial import CellDims, flop_count, lstm_cell_step, lstm_step_by_rows, random_instance
from rnnspatial.rnn import gru_cell_step, lstm1, run_sequence

# a small seeded instance: hidden size 8, input size 5
w, xs, s0 = random_instance("lstm", 8, 5, 3, seed=42)
print("concatenated weight view:", w.W.shape, "(gates, H, H + D)")

y, s1 = lstm_cell_step(w, xs[0], s0)
print("h after one step:", np.round(y, 4))

# the same step assembled from eight independent single-row computations
y_rows, s_rows = lstm_step_by_rows(w, xs[0], s0)
print("row-wise assembly identical to the full cell:", y.tobytes() == y_rows.tobytes())

# one row on its own: only c_prev[3] is needed to produce c'[3] and h'[3]
c3, h3 = lstm1(w, xs[0], s0.h, s0.c[3], 3)
print(f"row 3 alone: c' = {c3:.6f}, h' = {h3:.6f}")

# a whole sequence, and the GRU variant
print("LSTM outputs over 3 steps:", run_sequence(w, xs, s0).shape)
g, gx, g0 = random_instance("gru", 8, 5, 1, seed=42)
_, gh = gru_cell_step(g, gx[0], g0.h)
print("GRU h after one step:", np.round(gh, 4))

# model FLOPs are 2 * gates * H * (H + D) * T
for dims in (CellDims.lstm(256, T=150), CellDims.gru(2816, T=750)):
    print(f"{dims.kind} H={dims.H} T={dims.T}: {flop_count(dims) / 1e9:.2f} GFLOP")
