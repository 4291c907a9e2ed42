"""
Searching for mapping parameters
================================

Every resource-valid ``(hu, ru)`` pair is simulated and the fastest one wins;
ties go to the design using fewer compute units.  Small cells prefer more
engines, large ones prefer wider reductions.
"""

import sys

from rnnspatial import CellDims, default_config, search
from rnnspatial.cli import bench_rows
from rnnspatial.dse import default_space
from rnnspatial.workloads import BUILTIN

cfg = default_config()
for H, T in ((256, 150), (2048, 25)):
    dims = CellDims.lstm(H, T=T)
    res = search(dims, cfg, default_space(dims, cfg, allow_oversubscribed=True))
    print(f"LSTM H={H}: best hu={res.best.hu} ru={res.best.ru} "
          f"({res.report.cycles} cycles, {len(res.frontier)} designs within 5%)")

print()
for row in bench_rows(BUILTIN, cfg):
    published = row.get("paper_latency_s")
    published = f"{float(published) * 1e3:8.4f} ms" if published else "       -"
    sys.stdout.write(f"{row['name']:>14} {row['fit']:>15}  hu={row['hu']} ru={row['ru']:<3}"
                     f" {float(row['latency_s']) * 1e3:8.4f} ms  published {published}\n")
