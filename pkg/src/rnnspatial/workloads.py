"""DeepBench-style inference workloads with published reference numbers.

Workload files are JSON: either one object or a list of objects with keys
``name, kind, h, d, t, params, paper_latency_ms`` (``d`` defaults to ``h``;
``params`` is ``{"hu":..,"ru":..,"rv":..}`` or omitted).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

from .mapper import MappingParams
from .rnn import CellDims


@dataclass(frozen=True)
class Workload:
    name: str
    kind: str  # "lstm" | "gru"
    H: int
    T: int
    D: int | None = None
    params: MappingParams | None = None
    paper_latency_ms: float | None = None
    paper_tflops: float | None = None
    paper_power_w: float | None = None

    def __post_init__(self):
        if self.kind not in ("lstm", "gru"):
            raise ValueError(f"kind must be lstm or gru, got {self.kind!r}")
        if self.D is None:
            object.__setattr__(self, "D", self.H)

    @property
    def dims(self) -> CellDims:
        return CellDims(H=self.H, D=self.D, T=self.T, G=4 if self.kind == "lstm" else 3)

    @property
    def paper_latency_s(self):
        return None if self.paper_latency_ms is None else self.paper_latency_ms * 1e-3

    @classmethod
    def from_dict(cls, d):
        params = d.get("params")
        if params is not None:
            params = MappingParams(hv=params.get("hv", 1), hu=params["hu"], ru=params["ru"], rv=params["rv"])
        return cls(
            name=d["name"], kind=d["kind"].lower(), H=int(d["h"]), T=int(d["t"]),
            D=int(d["d"]) if d.get("d") is not None else None, params=params,
            paper_latency_ms=d.get("paper_latency_ms"),
            paper_tflops=d.get("paper_tflops"), paper_power_w=d.get("paper_power_w"),
        )

    def to_dict(self):
        out = {"name": self.name, "kind": self.kind, "h": self.H, "d": self.D, "t": self.T}
        if self.params is not None:
            out["params"] = {"hu": self.params.hu, "ru": self.params.ru, "rv": self.params.rv}
        for k in ("paper_latency_ms", "paper_tflops", "paper_power_w"):
            if getattr(self, k) is not None:
                out[k] = getattr(self, k)
        return out


def _w(kind, H, T, hu, ru, lat=None, tf=None, pw=None):
    return Workload(f"{kind}-{H}-{T}", kind, H, T, params=MappingParams(hv=1, hu=hu, ru=ru, rv=64),
                    paper_latency_ms=lat, paper_tflops=tf, paper_power_w=pw)


# Plasticine latency / effective TFLOPS / power and the loop parameters used per row.
BUILTIN = (
    _w("lstm", 256, 150, 6, 4, 0.0419, 3.8, 28.5),
    _w("lstm", 512, 25, 4, 8, 0.0139, 7.6, 53.7),
    _w("lstm", 1024, 25, 4, 8, 0.0292, 14.4, 97.2),
    _w("lstm", 1536, 50, 4, 8, 0.1224, 15.4, 102.7),
    _w("lstm", 2048, 25, 4, 8, 0.1060, 15.8, 104.5),
    _w("gru", 512, 1, 2, 8, 0.0004, 7.6, 61.9),
    _w("gru", 1024, 1500, 2, 8, 1.4430, 13.1, 109.1),
    _w("gru", 1536, 375, 2, 8, 0.7463, 14.2, 114.6),
    _w("gru", 2048, 375, 2, 8, 1.2833, 14.7, 101.2),
    _w("gru", 2560, 375, 2, 8, 1.9733, 15.0, 117.2),
    _w("gru", 2816, 750, 2, 8),
)

# Published latencies (ms) of the tiled-MVM FPGA baseline, same row order.
BW_PAPER_LATENCY_MS = {
    "lstm-256-150": 0.425, "lstm-512-25": 0.077, "lstm-1024-25": 0.074, "lstm-1536-50": 0.145,
    "lstm-2048-25": 0.074, "gru-512-1": 0.013, "gru-1024-1500": 3.792, "gru-1536-375": 0.951,
    "gru-2048-375": 0.954, "gru-2560-375": 0.993,
}

TABLE_COLUMNS = ("name", "kind", "h", "d", "t", "hu", "ru", "rv", "paper_latency_ms", "paper_tflops", "paper_power_w")


def builtin(name: str) -> Workload:
    for w in BUILTIN:
        if w.name == name:
            return w
    raise KeyError(f"unknown workload {name!r}; choose from {[w.name for w in BUILTIN]}")


def load_workloads(path) -> list:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"workload file not found: {p}")
    data = json.loads(p.read_text())
    if isinstance(data, dict):
        data = [data]
    return [Workload.from_dict(d) for d in data]


def resolve(spec: str) -> list:
    """A built-in workload name, or a path to a workload JSON file."""
    if spec == "builtin":
        return list(BUILTIN)
    try:
        return [builtin(spec)]
    except KeyError:
        if Path(spec).suffix == ".json" or Path(spec).exists():
            return load_workloads(spec)
        raise


def table_csv(workloads=BUILTIN) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for wl in workloads:
        p = wl.params
        w.writerow([wl.name, wl.kind, wl.H, wl.D, wl.T,
                    p.hu if p else "", p.ru if p else "", p.rv if p else "",
                    "" if wl.paper_latency_ms is None else wl.paper_latency_ms,
                    "" if wl.paper_tflops is None else wl.paper_tflops,
                    "" if wl.paper_power_w is None else wl.paper_power_w])
    return buf.getvalue()
