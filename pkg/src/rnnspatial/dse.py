"""Exhaustive search over loop-based mapping parameters."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .arch import ArchConfig, pcu_mac_throughput
from .mapper import MappingParams, map_loop_rnn, validate
from .rnn import CellDims
from .simulator import SimReport, simulate_loop

FRONTIER_SLACK = 0.05


class NoValidCandidate(RuntimeError):
    pass


def hu_candidates(H, limit=8):
    top = min(H, limit)
    pow2 = {1 << k for k in range(top.bit_length()) if 1 << k <= top}
    return sorted(pow2 | {d for d in range(1, top + 1) if H % d == 0})


def ru_candidates(R, rv):
    top = math.ceil(R / rv)
    return [1 << k for k in range(top.bit_length()) if 1 << k <= top] or [1]


@dataclass
class SearchSpace:
    hu: list
    ru: list
    rv: list
    allow_oversubscribed: bool = False
    elem_ii: int = 1
    extra: list = field(default_factory=list)  # explicit MappingParams to include

    def __iter__(self):
        seen = set()
        for rv in self.rv:
            for hu in self.hu:
                for ru in self.ru:
                    p = MappingParams(hv=1, hu=hu, rv=rv, ru=ru)
                    if p not in seen:
                        seen.add(p)
                        yield p
        for p in self.extra:
            if p not in seen:
                seen.add(p)
                yield p

    @classmethod
    def single(cls, p: MappingParams, **kw):
        return cls(hu=[], ru=[], rv=[], extra=[p], **kw)


def default_space(dims: CellDims, cfg: ArchConfig, **kw) -> SearchSpace:
    rv = pcu_mac_throughput(cfg.lanes, "f8")
    return SearchSpace(hu=hu_candidates(dims.H), ru=ru_candidates(dims.R, rv), rv=[rv], **kw)


def _fits(dims, p, cfg, allow_oversubscribed):
    d = map_loop_rnn(dims, p, cfg)
    v = validate(d, cfg)
    return d, not [x for x in v if not (x.capacity and allow_oversubscribed)]


def enumerate_candidates(dims: CellDims, cfg: ArchConfig, space: SearchSpace | None = None) -> list:
    """Resource-valid parameter sets in the space, in enumeration order."""
    space = default_space(dims, cfg) if space is None else space
    out = [p for p in space if _fits(dims, p, cfg, space.allow_oversubscribed)[1]]
    if not out:
        raise NoValidCandidate(f"no mapping of {dims} fits the architecture")
    return out


def _rank(report: SimReport):
    p = report.params
    return (report.cycles, report.pcus_used, p.hu, p.ru, p.rv)


@dataclass(frozen=True)
class SearchResult:
    best: MappingParams
    report: SimReport
    frontier: list  # reports within FRONTIER_SLACK of the best latency, ranked
    evaluated: int


def search(dims: CellDims, cfg: ArchConfig | None = None, space: SearchSpace | None = None,
           workers: int = 1) -> SearchResult:
    """Latency-minimal candidate; ties go to fewer PCUs, then smaller (hu, ru, rv)."""
    cfg = ArchConfig() if cfg is None else cfg
    space = default_space(dims, cfg) if space is None else space
    designs = []
    for p in space:
        d, ok = _fits(dims, p, cfg, space.allow_oversubscribed)
        if ok:
            designs.append(d)
    if not designs:
        raise NoValidCandidate(f"no mapping of {dims} fits the architecture")

    def run(d):
        return simulate_loop(d, cfg=cfg, elem_ii=space.elem_ii,
                             allow_oversubscribed=space.allow_oversubscribed)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            reports = list(ex.map(run, designs))
    else:
        reports = [run(d) for d in designs]
    reports.sort(key=_rank)
    best = reports[0]
    frontier = [r for r in reports if r.cycles <= best.cycles * (1 + FRONTIER_SLACK)]
    return SearchResult(best.params, best, frontier, len(reports))
