"""Modeling toolkit for loop-based RNN serving on spatial accelerators."""

from .arch import (
    ArchConfig, PcuPipeline, compute_memory_ratio, default_config, folded_tree_schedule,
    pcu_mac_throughput, reduction_latency,
)
from .dse import SearchSpace, enumerate_candidates, search
from .lowprec import (
    BlockedVector, Float8, PackedWord, WordKind, block_dequantize, block_quantize, mixed_dot,
    pack, quantize_f8, unpack,
)
from .mapper import MappedDesign, MappingParams, map_loop_rnn, validate, weight_layout
from .rnn import (
    CellDims, CellState, GruWeights, LstmWeights, flop_count, gru_cell_step, lstm1,
    lstm_cell_step, lstm_step_by_rows, random_instance, run_sequence,
)
from .simulator import (
    BwConfig, EnergyCoeffs, SimReport, effective_flops, energy_estimate, simulate_bw,
    simulate_loop, utilization_1d, utilization_2d,
)
from .workloads import BUILTIN, Workload

__version__ = "0.1.0"
