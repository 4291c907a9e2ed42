"""Spatial-array architecture description and PCU pipeline timing facts."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

PRECISION_VALUES_PER_LANE = {"f8": 4, "f16": 2, "f32": 1}

OPCODES = frozenset({
    "mul8x4", "rearrange_pad", "add16x2", "add32", "nonlinear",
    "fused_mul8_rearrange", "fused_add16_rearrange",
})


class ArchError(ValueError):
    pass


def _is_pow2(n):
    return isinstance(n, int) and n >= 1 and n & (n - 1) == 0


def _log2(n):
    if not _is_pow2(n):
        raise ArchError(f"lanes must be a power of two, got {n}")
    return n.bit_length() - 1


@dataclass(frozen=True)
class ArchConfig:
    rows: int = 24
    cols: int = 24
    n_pcu: int = 192
    n_pmu: int = 384
    lanes: int = 16
    stages: int = 4
    pmu_capacity_bytes: int = 84 * 1024
    freq_hz: float = 1e9
    hop_latency_cycles: int = 1
    pmu_banks: int = 16
    peak_flops_override: float | None = None

    def __post_init__(self):
        for name in ("rows", "cols", "lanes", "stages", "pmu_capacity_bytes", "pmu_banks"):
            if getattr(self, name) < 1:
                raise ArchError(f"{name} must be >= 1")
        if self.n_pcu < 0 or self.n_pmu < 0 or self.hop_latency_cycles < 0:
            raise ArchError("unit counts and hop latency must be non-negative")
        if self.n_pcu + self.n_pmu > self.rows * self.cols:
            raise ArchError(
                f"{self.n_pcu} PCUs + {self.n_pmu} PMUs exceed the {self.rows}x{self.cols} grid")
        if not _is_pow2(self.lanes):
            raise ArchError(f"lanes must be a power of two, got {self.lanes}")
        if self.freq_hz <= 0:
            raise ArchError("freq_hz must be positive")

    @property
    def total_scratchpad_bytes(self):
        return self.n_pmu * self.pmu_capacity_bytes

    def peak_flops(self, precision="f8", derived=False):
        """Peak multiply-add FLOP/s over all PCUs.

        Returns ``peak_flops_override`` when set, unless ``derived`` is true.
        """
        if self.peak_flops_override is not None and not derived:
            return self.peak_flops_override
        return self.n_pcu * pcu_mac_throughput(self.lanes, precision) * 2 * self.freq_hz

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ArchError(f"unknown ArchConfig keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path):
        """Read a JSON file whose keys are ArchConfig field names (all optional)."""
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"architecture config not found: {p}")
        return cls.from_dict(json.loads(p.read_text()))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def default_config() -> ArchConfig:
    """The 24x24 RNN-serving variant: 192 PCUs, 384 PMUs, 16 lanes, 4 stages."""
    return ArchConfig()


def original_plasticine() -> ArchConfig:
    """Checkerboard baseline: 1:1 PCU:PMU, 6-stage PCUs, 256 kB scratchpads."""
    return ArchConfig(n_pcu=288, n_pmu=288, stages=6, pmu_capacity_bytes=256 * 1024)


def reduction_latency(lanes: int) -> int:
    """Cycles for a fused 8-bit map-reduce: 2 low-precision stages + folded tree."""
    return 2 + _log2(lanes) + 1


def pcu_mac_throughput(lanes: int, precision: str = "f8") -> int:
    try:
        return PRECISION_VALUES_PER_LANE[precision] * lanes
    except KeyError:
        raise ArchError(f"unknown precision {precision!r}") from None


def compute_memory_ratio(cfg: ArchConfig) -> float:
    """Function units (stages x lanes) over PMU bank reads per cycle."""
    reads = cfg.n_pmu * cfg.pmu_banks
    if cfg.n_pcu == 0:
        return 0.0
    return cfg.n_pcu * cfg.stages * cfg.lanes / reads


@dataclass(frozen=True)
class TreeLevel:
    level: int  # 1..log2(lanes) are adder-tree levels, the last one accumulates
    stage: int
    lanes: tuple  # function-unit lane indices used by this level
    offset: int  # cycles after the vector enters the reduction


@dataclass(frozen=True)
class FoldedSchedule:
    lanes: int
    stages: int
    levels: tuple

    @property
    def latency(self):
        return max(lv.offset for lv in self.levels) + 1

    @property
    def stages_used(self):
        return len({lv.stage for lv in self.levels})


def folded_tree_schedule(lanes: int, stages: int) -> FoldedSchedule:
    """Fold the ``log2(lanes)`` adder levels plus the accumulator into the pipeline.

    Level ``k`` needs ``lanes / 2**k`` adders and the accumulator needs one, so
    the whole tree needs exactly ``lanes`` function units.  Levels are packed
    from the last one backwards into the earliest stage with free lanes.  A
    vector spends one cycle per level, so consecutive vectors occupy disjoint
    lane sets and can issue every cycle.
    """
    depth = _log2(lanes)
    if stages < 1:
        raise ArchError(f"folding a {lanes}-lane tree needs at least 1 stage, got {stages}")
    widths = [lanes >> k for k in range(1, depth + 1)] + [1]
    free = [lanes] * stages
    placed = {}
    for level in range(len(widths), 0, -1):
        w = widths[level - 1]
        for s in range(stages):
            if free[s] >= w:
                start = lanes - free[s]
                placed[level] = TreeLevel(level, s, tuple(range(start, start + w)), level - 1)
                free[s] -= w
                break
        else:  # pragma: no cover - total width never exceeds one stage
            raise ArchError(f"cannot fold {lanes}-lane tree into {stages} stages")
    return FoldedSchedule(lanes, stages, tuple(placed[k] for k in sorted(placed)))


def replay_schedule(schedule: FoldedSchedule, n_vectors: int = 100) -> int:
    """Issue ``n_vectors`` back to back; return the number of double-booked FU slots."""
    used = {}
    hazards = 0
    for v in range(n_vectors):
        for lv in schedule.levels:
            cycle = v + lv.offset
            for lane in lv.lanes:
                key = (cycle, lv.stage, lane)
                if key in used:
                    hazards += 1
                used[key] = v
    return hazards


_FUSED_SEQUENCE = ("fused_mul8_rearrange", "fused_add16_rearrange", "add32")
_UNFUSED_SEQUENCE = ("mul8x4", "rearrange_pad", "add16x2", "rearrange_pad", "add32")


@dataclass(frozen=True)
class PcuPipeline:
    stage_ops: tuple = field(default_factory=lambda: (
        frozenset({"fused_mul8_rearrange"}),
        frozenset({"fused_add16_rearrange"}),
        frozenset({"add32"}),
        frozenset({"nonlinear", "add32"}),
    ))

    def __post_init__(self):
        for ops in self.stage_ops:
            bad = set(ops) - OPCODES
            if bad:
                raise ArchError(f"unknown opcodes {sorted(bad)}")

    @property
    def stages(self):
        return len(self.stage_ops)

    def map_reduce_stages(self):
        """Stages an 8-bit map-reduce occupies, including one folded-tree stage."""
        for needed in (_FUSED_SEQUENCE, _UNFUSED_SEQUENCE):
            k = 0
            for ops in self.stage_ops:
                if k < len(needed) and needed[k] in ops:
                    k += 1
            if k == len(needed):
                return len(needed)
        raise ArchError("pipeline cannot run an 8-bit map-reduce")

    def fits(self, cfg: ArchConfig):
        return self.stages <= cfg.stages and self.map_reduce_stages() <= cfg.stages


UNFUSED_PIPELINE = PcuPipeline((
    frozenset({"mul8x4"}),
    frozenset({"rearrange_pad"}),
    frozenset({"add16x2"}),
    frozenset({"rearrange_pad"}),
    frozenset({"add32"}),
))
