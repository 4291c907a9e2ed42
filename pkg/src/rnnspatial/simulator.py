"""Cycle-level cost model for loop-based designs and the tiled MVM baseline.

Loop-based designs run the recurrence strictly step after step.  Within one
step the ``hu`` engines issue one inner iteration per cycle, so a step costs
``ceil(H/hu) * ceil(R/(rv*ru))`` dot-product issue cycles, or
``ceil(H/hu) * elem_ii`` element-wise issue cycles if that is larger.  The
pipeline depth is paid once at the end of the run.

The baseline runs each gate's ``W_x x`` and ``W_h h`` tiled MVMs one after the
other on ``hv x (rv*ru)`` tiles, then spends ``elem_ops`` MFU cycles on each
``hv`` chunk of the result.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .arch import ArchConfig, pcu_mac_throughput
from .mapper import MappedDesign, MappingParams, inner_iterations, validate
from .rnn import CellDims, flop_count

REPORT_COLUMNS = (
    "model", "kind", "H", "D", "T", "hv", "hu", "rv", "ru",
    "cycles", "latency_s", "eff_tflops", "utilization", "bottleneck",
    "step_issue_cycles", "elem_issue_cycles", "pipeline_depth_cycles",
    "pcus_used", "pmus_used", "weight_bytes", "oversubscribed", "energy_j", "power_w",
)

TRACE_COLUMNS = ("cycle", "step", "dot_pcus_active", "elem_pcus_active", "pmu_word_reads", "hops")


class UnvalidatedDesign(ValueError):
    pass


@dataclass(frozen=True)
class SimReport:
    model: str  # "loop" or "bw"
    dims: CellDims
    params: MappingParams
    cycles: int
    freq_hz: float
    utilization: float
    bottleneck: str  # dot_product | element_wise | none
    step_issue_cycles: int = 0
    elem_issue_cycles: int = 0
    pipeline_depth_cycles: int = 0
    pcus_used: int = 0
    pmus_used: int = 0
    weight_bytes: int = 0
    oversubscribed: bool = False
    useful_macs: int = 0
    activity: dict = field(default_factory=dict)
    energy_j: float | None = None

    @property
    def latency_s(self):
        return self.cycles / self.freq_hz

    @property
    def flops(self):
        return flop_count(self.dims)

    @property
    def eff_flops(self):
        return self.flops / self.latency_s

    @property
    def power_w(self):
        return None if self.energy_j is None else self.energy_j / self.latency_s

    def per_step(self):
        return {
            "issue_cycles": max(self.step_issue_cycles, self.elem_issue_cycles),
            "dot_issue_cycles": self.step_issue_cycles,
            "elem_issue_cycles": self.elem_issue_cycles,
        }

    def row(self):
        d, p = self.dims, self.params
        return {
            "model": self.model, "kind": d.kind, "H": d.H, "D": d.D, "T": d.T,
            "hv": p.hv, "hu": p.hu, "rv": p.rv, "ru": p.ru,
            "cycles": self.cycles,
            "latency_s": f"{self.latency_s:.6e}",
            "eff_tflops": f"{self.eff_flops / 1e12:.4f}",
            "utilization": f"{self.utilization:.6f}",
            "bottleneck": self.bottleneck,
            "step_issue_cycles": self.step_issue_cycles,
            "elem_issue_cycles": self.elem_issue_cycles,
            "pipeline_depth_cycles": self.pipeline_depth_cycles,
            "pcus_used": self.pcus_used,
            "pmus_used": self.pmus_used,
            "weight_bytes": self.weight_bytes,
            "oversubscribed": int(self.oversubscribed),
            "energy_j": "" if self.energy_j is None else f"{self.energy_j:.6e}",
            "power_w": "" if self.power_w is None else f"{self.power_w:.3f}",
        }

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["dims"] = dataclasses.asdict(self.dims)
        d["latency_s"] = self.latency_s
        d["eff_flops"] = self.eff_flops
        d["flops"] = self.flops
        d["power_w"] = self.power_w
        d["per_step"] = self.per_step()
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def with_energy(self, coeffs):
        return dataclasses.replace(self, energy_j=energy_estimate(self, coeffs))


def write_csv(reports, fh, extra_columns=()):
    """Write reports with the fixed :data:`REPORT_COLUMNS` order (plus extras)."""
    cols = list(REPORT_COLUMNS) + list(extra_columns)
    w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in reports:
        row = r.row() if isinstance(r, SimReport) else r
        w.writerow({c: row.get(c, "") for c in cols})


def reports_to_csv(reports, extra_columns=()):
    buf = io.StringIO()
    write_csv(reports, buf, extra_columns)
    return buf.getvalue()


def step_issue_cycles(dims: CellDims, p: MappingParams) -> int:
    return math.ceil(dims.H / p.hu) * inner_iterations(dims.R, p.rv, p.ru)


def elem_issue_cycles(dims: CellDims, p: MappingParams, elem_ii: int = 1) -> int:
    return math.ceil(dims.H / p.hu) * elem_ii


def loop_lower_bound(dims: CellDims, p: MappingParams) -> int:
    return dims.T * step_issue_cycles(dims, p)


def simulate_loop(design: MappedDesign, dims: CellDims | None = None, p: MappingParams | None = None,
                  cfg: ArchConfig | None = None, elem_ii: int = 1,
                  allow_oversubscribed: bool = False) -> SimReport:
    """Simulate a mapped loop-based design for ``dims.T`` steps."""
    dims = design.dims if dims is None else dims
    p = design.params if p is None else p
    cfg = ArchConfig() if cfg is None else cfg
    if (dims.H, dims.D, dims.G) != (design.dims.H, design.dims.D, design.dims.G) or p != design.params:
        raise UnvalidatedDesign("design was mapped for different dims or params")
    violations = validate(design, cfg)
    hard = [v for v in violations if not (v.capacity and allow_oversubscribed)]
    if hard:
        raise UnvalidatedDesign("design does not fit: " + "; ".join(map(str, hard)))
    dot = step_issue_cycles(dims, p)
    elem = elem_issue_cycles(dims, p, elem_ii)
    issue = max(dot, elem)
    cycles = dims.T * issue + design.pipeline_depth_cycles
    useful = dims.G * dims.H * dims.R * dims.T
    provisioned = design.dot_pcus * pcu_mac_throughput(cfg.lanes, "f8") * cycles
    if dot > elem:
        bottleneck = "dot_product"
    elif elem > dot:
        bottleneck = "element_wise"
    else:
        bottleneck = "none"
    activity = loop_activity(design, dims, p, cfg, elem_ii)
    return SimReport(
        model="loop", dims=dims, params=p, cycles=cycles, freq_hz=cfg.freq_hz,
        utilization=useful / provisioned, bottleneck=bottleneck,
        step_issue_cycles=dot, elem_issue_cycles=elem,
        pipeline_depth_cycles=design.pipeline_depth_cycles,
        pcus_used=design.pcus_used, pmus_used=design.pmus_used,
        weight_bytes=design.weight_bytes, oversubscribed=bool(violations),
        useful_macs=useful, activity=activity,
    )


def loop_activity(design, dims, p, cfg, elem_ii=1):
    """Activity counts that feed the energy model.

    Dot PCUs are busy for the dot issue cycles of each step, element-wise
    PCUs for the element-wise issue cycles.  Every busy MapReduce unit reads
    one 32-bit word per bank it touches (``ceil(rv/4)``); every engine sends
    ``G*ru`` partial sums per inner iteration and ``G + 1`` results per row
    over the critical-path hops.
    """
    outer = math.ceil(dims.H / p.hu)
    inner = inner_iterations(dims.R, p.rv, p.ru)
    units = p.hu * dims.G * p.ru
    return {
        "pcu_active_cycles": dims.T * (design.dot_pcus * outer * inner + design.elem_pcus * outer * elem_ii),
        "pmu_reads": dims.T * outer * inner * units * math.ceil(p.rv / 4),
        "hops": dims.T * outer * p.hu * (dims.G * p.ru * inner + dims.G + 1),
    }


def trace_loop(report: SimReport, design: MappedDesign, elem_ii: int = 1):
    """Yield per-cycle occupancy rows (see :data:`TRACE_COLUMNS`).

    Column sums reproduce :func:`loop_activity`.  The final
    ``pipeline_depth_cycles`` rows are the drain with nothing issued.
    """
    dims, p = report.dims, report.params
    outer = math.ceil(dims.H / p.hu)
    inner = inner_iterations(dims.R, p.rv, p.ru)
    dot_cycles = outer * inner
    elem_cycles = outer * elem_ii
    issue = max(dot_cycles, elem_cycles)
    units = p.hu * dims.G * p.ru
    reads = units * math.ceil(p.rv / 4)
    cycle = 0
    for t in range(dims.T):
        for k in range(issue):
            dot_on = k < dot_cycles
            elem_on = k < elem_cycles
            hops = p.hu * dims.G * p.ru if dot_on else 0
            # results leave each engine once per row, at the row's last inner iteration
            if dot_on and k % inner == inner - 1:
                hops += p.hu * (dims.G + 1)
            yield (cycle, t, design.dot_pcus if dot_on else 0, design.elem_pcus if elem_on else 0,
                   reads if dot_on else 0, hops)
            cycle += 1
    for _ in range(design.pipeline_depth_cycles):
        yield (cycle, dims.T, 0, 0, 0, 0)
        cycle += 1


def write_trace(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    w.writerows(rows)


@dataclass(frozen=True)
class BwConfig:
    """Tiled-MVM baseline: ``ru`` tile engines of ``hv`` dot engines, ``rv`` lanes each."""

    freq_hz: float = 250e6
    lstm_elem_ops: int = 13  # 4 x (bias, activation) + f*c, i*j, add, tanh, o*
    gru_elem_ops: int = 11  # 2 x (bias, sigmoid) + r*h, bias, tanh, u*h, 1-u, *c, add
    mvm_overhead_cycles: int = 0  # per tiled MVM instruction

    def elem_ops(self, G):
        return self.lstm_elem_ops if G == 4 else self.gru_elem_ops


BW_PAPER_PARAMS = MappingParams(hv=400, hu=1, rv=40, ru=6)


def bw_mvm_iterations(H, R_hat, hv, rv, ru):
    return math.ceil(H / hv) * math.ceil(R_hat / (rv * ru))


def simulate_bw(dims: CellDims, p: MappingParams = BW_PAPER_PARAMS, cfg: BwConfig | None = None,
                T: int | None = None) -> SimReport:
    cfg = BwConfig() if cfg is None else cfg
    if T is not None:
        dims = dataclasses.replace(dims, T=T)
    G, H, D = dims.G, dims.H, dims.D
    per_gate = bw_mvm_iterations(H, D, p.hv, p.rv, p.ru) + bw_mvm_iterations(H, H, p.hv, p.rv, p.ru)
    mvm = G * (per_gate + 2 * cfg.mvm_overhead_cycles)
    elem = math.ceil(H / p.hv) * cfg.elem_ops(G)
    cycles = dims.T * (mvm + elem)
    useful = G * H * dims.R * dims.T
    provisioned = dims.T * G * per_gate * p.hv * p.rv * p.ru
    return SimReport(
        model="bw", dims=dims, params=p, cycles=cycles, freq_hz=cfg.freq_hz,
        utilization=useful / provisioned,
        bottleneck="dot_product" if mvm >= elem else "element_wise",
        step_issue_cycles=mvm, elem_issue_cycles=elem, useful_macs=useful,
    )


def utilization_2d(dims: CellDims, hv: int, rv: int, ru: int, reduction: int | None = None) -> Fraction:
    """Useful share of a tiled ``H x reduction`` MVM (default ``reduction = R``)."""
    Rh = dims.R if reduction is None else reduction
    return Fraction(dims.H * Rh, math.ceil(dims.H / hv) * hv * math.ceil(Rh / (rv * ru)) * rv * ru)


def utilization_1d(dims: CellDims, hu: int, rv: int, ru: int) -> Fraction:
    """Useful share of the loop-based design's MapReduce slots."""
    return Fraction(dims.H * dims.R,
                    math.ceil(dims.H / hu) * hu * math.ceil(dims.R / (rv * ru)) * rv * ru)


def effective_flops(dims: CellDims, latency_s: float, T: int | None = None) -> float:
    if T is not None:
        dims = dataclasses.replace(dims, T=T)
    if latency_s <= 0:
        raise ValueError("latency must be positive")
    return flop_count(dims) / latency_s


@dataclass(frozen=True)
class EnergyCoeffs:
    pj_per_pcu_cycle: float
    pj_per_pmu_read: float
    pj_per_hop: float

    def scaled(self, k):
        return EnergyCoeffs(self.pj_per_pcu_cycle * k, self.pj_per_pmu_read * k, self.pj_per_hop * k)


# Relative weights only; use calibrate_energy() to pin an absolute scale.
DEFAULT_ENERGY = EnergyCoeffs(pj_per_pcu_cycle=100.0, pj_per_pmu_read=5.0, pj_per_hop=2.0)


def energy_estimate(report: SimReport, coeffs: EnergyCoeffs | None) -> float:
    if coeffs is None:
        raise ValueError("energy estimate needs a coefficient table")
    a = report.activity
    missing = {"pcu_active_cycles", "pmu_reads", "hops"} - set(a)
    if missing:
        raise ValueError(f"report lacks activity counts {sorted(missing)}")
    pj = (a["pcu_active_cycles"] * coeffs.pj_per_pcu_cycle
          + a["pmu_reads"] * coeffs.pj_per_pmu_read
          + a["hops"] * coeffs.pj_per_hop)
    return pj * 1e-12


def calibrate_energy(report: SimReport, target_watts: float, base: EnergyCoeffs = DEFAULT_ENERGY) -> EnergyCoeffs:
    """Scale ``base`` so that ``report`` draws ``target_watts``."""
    watts = energy_estimate(report, base) / report.latency_s
    return base.scaled(target_watts / watts)
