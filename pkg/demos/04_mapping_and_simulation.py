"""
Mapping an LSTM and timing it
=============================

The loop-based design unrolls the hidden dimension ``hu`` times and gives each
gate ``ru`` dot-product units of width ``rv``.  The simulator turns the
mapping into cycles, and the tiled matrix-vector baseline is timed alongside
for comparison.
"""

from rnnspatial import CellDims, MappingParams, default_config, map_loop_rnn, simulate_loop
from rnnspatial.simulator import BW_PAPER_PARAMS, simulate_bw, utilization_1d, utilization_2d

cfg = default_config()
dims = CellDims.lstm(512, T=25)
p = MappingParams(hu=4, ru=8, rv=64)

design = map_loop_rnn(dims, p, cfg)
print(design.describe())

rep = simulate_loop(design, cfg=cfg)
print(f"\ncycles {rep.cycles}, latency {rep.latency_s * 1e6:.2f} us, "
      f"{rep.eff_flops / 1e12:.2f} TFLOPS, bottleneck {rep.bottleneck}")

bw = simulate_bw(dims, BW_PAPER_PARAMS)
print(f"tiled baseline: {bw.cycles} cycles at 250 MHz = {bw.latency_s * 1e6:.2f} us")

# fragmentation: the tiled design pads both dimensions, the loop design only R
for H in (256, 512, 1536):
    d = CellDims.lstm(H)
    u1 = utilization_1d(d, 4, 64, 8)
    u2 = utilization_2d(d, BW_PAPER_PARAMS.hv, BW_PAPER_PARAMS.rv, BW_PAPER_PARAMS.ru)
    print(f"H={H}: loop {float(u1):.4f} vs tiled {float(u2):.4f}")
