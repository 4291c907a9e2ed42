"""Resource allocation for the loop-based (fused dot product) RNN design.

A design has ``hu`` parallel LSTM-1 engines.  Each engine has one gate group
per gate; a gate group holds ``ru`` MapReduce units of width ``rv`` whose
partial sums feed a cross-unit reduction tree, followed by the element-wise
chain.  Engine ``e`` handles hidden rows ``e, e + hu, e + 2*hu, ...``; in inner
iteration ``it`` unit ``k`` consumes columns ``[(it*ru + k)*rv, (it*ru + k + 1)*rv)``
of the concatenated ``H x R`` weight matrix.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

from .arch import ArchConfig, pcu_mac_throughput, reduction_latency
from .rnn import CellDims

WEIGHT_BYTES = 1  # 8-bit weights
BIAS_BYTES = 4  # 32-bit biases
STATE_BYTES = 4  # h / x vector entries kept in 32 bit
DEFAULT_ELEM_CHAIN_DEPTH = 6


@dataclass(frozen=True)
class MappingParams:
    hv: int = 1
    hu: int = 1
    rv: int = 64
    ru: int = 1

    def __post_init__(self):
        for name in ("hv", "hu", "rv", "ru"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

    @classmethod
    def parse(cls, text):
        """Parse ``"hu,ru,rv"`` (the CLI ``--params`` form)."""
        parts = [int(p) for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected hu,ru,rv, got {text!r}")
        hu, ru, rv = parts
        return cls(hv=1, hu=hu, rv=rv, ru=ru)

    def key(self):
        return (self.hu, self.ru, self.rv, self.hv)


def inner_iterations(R, rv, ru):
    return math.ceil(R / (rv * ru))


def pcus_per_unit(rv, lanes):
    return math.ceil(rv / pcu_mac_throughput(lanes, "f8"))


@dataclass(frozen=True)
class UnitAssignment:
    engine: int
    gate: int
    slot: int
    pmus: tuple
    rows: int
    columns: int


@dataclass(frozen=True)
class WeightBlock:
    pmu: int
    engine: int
    gate: int
    slot: int
    rows: range  # hidden rows stored in this block
    column_chunks: tuple  # (start, stop) column ranges of the concatenated matrix

    @property
    def n_bytes(self):
        return len(self.rows) * sum(b - a for a, b in self.column_chunks) * WEIGHT_BYTES


@dataclass(frozen=True)
class MappedDesign:
    kind: str
    dims: CellDims
    params: MappingParams
    dot_pcus: int
    elem_pcus: int
    pmus_used: int
    weight_bytes: int
    pipeline_depth_cycles: int
    units: tuple = ()
    placement: dict = field(default_factory=dict)
    buffers: dict = field(default_factory=dict)
    state_pmus: int = 0

    @property
    def pcus_used(self):
        return self.dot_pcus + self.elem_pcus

    @property
    def hops_on_critical_path(self):
        return sum(self.placement.values())

    def to_dict(self):
        return {
            "kind": self.kind,
            "dims": {"H": self.dims.H, "D": self.dims.D, "R": self.dims.R, "G": self.dims.G, "T": self.dims.T},
            "params": dataclasses.asdict(self.params),
            "dot_pcus": self.dot_pcus,
            "elem_pcus": self.elem_pcus,
            "pmus_used": self.pmus_used,
            "state_pmus": self.state_pmus,
            "weight_bytes": self.weight_bytes,
            "pipeline_depth_cycles": self.pipeline_depth_cycles,
            "placement_hops": dict(self.placement),
            "buffers": dict(self.buffers),
            "units": [dataclasses.asdict(u) for u in self.units],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def describe(self) -> str:
        """Text tree: engines, gates, MapReduce units, element-wise chain."""
        d, p = self.dims, self.params
        gates = ("i", "j", "f", "o") if d.G == 4 else ("r", "u", "c")
        n_inner = inner_iterations(d.R, p.rv, p.ru)
        per_unit = self.dot_pcus // max(1, p.hu * d.G * p.ru)
        lines = [
            f"{self.kind.upper()} H={d.H} D={d.D} R={d.R} T={d.T}  hu={p.hu} ru={p.ru} rv={p.rv} hv={p.hv}",
            f"  outer loop: {math.ceil(d.H / p.hu)} iterations x {p.hu} engines;"
            f" inner loop: {n_inner} iterations",
            f"  PCUs: {self.dot_pcus} dot + {self.elem_pcus} element-wise;"
            f" PMUs: {self.pmus_used} ({self.weight_bytes} weight+bias bytes)",
            f"  pipeline depth: {self.pipeline_depth_cycles} cycles",
        ]
        shown = min(p.hu, 2)
        for e in range(shown):
            lines.append(f"  engine {e}: rows {e}, {e + p.hu}, ... ({len(range(e, d.H, p.hu))} rows)")
            for g, name in enumerate(gates):
                lines.append(f"    gate {name}: {p.ru} x MapReduce(rv={p.rv}, {per_unit} PCU each)"
                             f" -> reduce tree({p.ru}) -> bias + {'tanh' if name in ('j', 'c') else 'sigmoid'}")
            tail = "c' = f*c + i*j ; h' = o*tanh(c')" if d.G == 4 else "h' = u*h + (1-u)*c"
            lines.append(f"    element-wise: {tail}  [scalar registers]")
        if p.hu > shown:
            lines.append(f"  ... {p.hu - shown} more engines")
        return "\n".join(lines)


def _unit_columns(R, rv, ru, slot):
    chunks = []
    for it in range(inner_iterations(R, rv, ru)):
        lo = (it * ru + slot) * rv
        if lo < R:
            chunks.append((lo, min(lo + rv, R)))
    return tuple(chunks)


def pipeline_depth(dims: CellDims, p: MappingParams, cfg: ArchConfig,
                   elem_chain_depth: int = DEFAULT_ELEM_CHAIN_DEPTH) -> int:
    placement = placement_hops(p)
    return (reduction_latency(cfg.lanes)
            + math.ceil(math.log2(pcus_per_unit(p.rv, cfg.lanes)))
            + math.ceil(math.log2(p.ru))
            + elem_chain_depth
            + cfg.hop_latency_cycles * sum(placement.values()))


def placement_hops(p: MappingParams) -> dict:
    """Network hops on the critical path under chain placement.

    Each MapReduce unit sits next to its gate's element-wise PCU, which sits
    next to the engine's cell-update PCU (one hop each).  The shared ``[h|x]``
    vector reaches the ``hu`` engines through a binary fan-out tree.
    """
    return {
        "broadcast": math.ceil(math.log2(p.hu)),
        "dot_to_gate": 1,
        "gate_to_cell": 1,
    }


def map_loop_rnn(dims: CellDims, p: MappingParams, cfg: ArchConfig,
                 elem_chain_depth: int = DEFAULT_ELEM_CHAIN_DEPTH) -> MappedDesign:
    G, H, R = dims.G, dims.H, dims.R
    ppu = pcus_per_unit(p.rv, cfg.lanes)
    units = []
    next_pmu = 0
    for e in range(p.hu):
        rows = len(range(e, H, p.hu))
        for g in range(G):
            for k in range(p.ru):
                cols = sum(b - a for a, b in _unit_columns(R, p.rv, p.ru, k))
                if cols * WEIGHT_BYTES > cfg.pmu_capacity_bytes:
                    raise ValueError(f"one weight row slice ({cols} B) exceeds a scratchpad")
                rows_per_pmu = cfg.pmu_capacity_bytes // (cols * WEIGHT_BYTES) if cols else 0
                n = math.ceil(rows / rows_per_pmu) if cols and rows else 0
                units.append(UnitAssignment(e, g, k, tuple(range(next_pmu, next_pmu + n)), rows, cols))
                next_pmu += n
    # h, x and the biases share state PMUs
    state_bytes = R * STATE_BYTES + G * H * BIAS_BYTES
    state_pmus = math.ceil(state_bytes / cfg.pmu_capacity_bytes)
    buffers = {"h_elem": 1, "c_elem": 1, "gate_partial": 1}
    if p.hv > 1:
        buffers = {k: p.hv for k in buffers}
    return MappedDesign(
        kind=dims.kind,
        dims=dims,
        params=p,
        dot_pcus=p.hu * G * p.ru * ppu,
        elem_pcus=p.hu * (G + 1),
        pmus_used=next_pmu + state_pmus,
        weight_bytes=weight_bytes(dims),
        pipeline_depth_cycles=pipeline_depth(dims, p, cfg, elem_chain_depth),
        units=tuple(units),
        placement=placement_hops(p),
        buffers=buffers,
        state_pmus=state_pmus,
    )


@dataclass(frozen=True)
class Violation:
    resource: str
    required: int
    available: int
    capacity: bool = False  # overridable with allow_oversubscribed

    def __str__(self):
        return f"{self.resource}: requires {self.required}, available {self.available}"


def validate(d: MappedDesign | None, cfg: ArchConfig) -> list:
    """All resource violations of ``d`` on ``cfg``; an empty list means it fits."""
    if d is None:
        return []
    out = []
    if d.pcus_used > cfg.n_pcu:
        out.append(Violation("pcu", d.pcus_used, cfg.n_pcu))
    if d.pmus_used > cfg.n_pmu:
        out.append(Violation("pmu", d.pmus_used, cfg.n_pmu, capacity=True))
    if d.weight_bytes > cfg.total_scratchpad_bytes:
        out.append(Violation("scratchpad_bytes", d.weight_bytes, cfg.total_scratchpad_bytes, capacity=True))
    return out


def weight_bytes(dims: CellDims) -> int:
    """8-bit weights plus 32-bit biases."""
    return dims.G * dims.H * dims.R * WEIGHT_BYTES + dims.G * dims.H * BIAS_BYTES


def fits_on_chip(dims: CellDims, cfg: ArchConfig) -> bool:
    return weight_bytes(dims) <= cfg.total_scratchpad_bytes


def weight_layout(dims: CellDims, p: MappingParams, cfg: ArchConfig, design: MappedDesign | None = None):
    """Blocks of the concatenated weights, one or more per MapReduce unit.

    Order is engine-major, gate-minor, then unit slot.  A unit whose slice
    exceeds one scratchpad is split by rows over consecutive PMUs.
    """
    d = design or map_loop_rnn(dims, p, cfg)
    bad = [v for v in validate(d, cfg) if v.capacity]
    if bad:
        raise ValueError("weights do not fit on chip: " + "; ".join(map(str, bad)))
    blocks = []
    for u in d.units:
        rows = range(u.engine, dims.H, p.hu)
        chunks = _unit_columns(dims.R, p.rv, p.ru, u.slot)
        if not rows or not chunks:
            continue
        per_pmu = cfg.pmu_capacity_bytes // (u.columns * WEIGHT_BYTES)
        for n, pmu in enumerate(u.pmus):
            part = rows[n * per_pmu:(n + 1) * per_pmu]
            if len(part):
                blocks.append(WeightBlock(pmu, u.engine, u.gate, u.slot, part, chunks))
    return blocks
