"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``[PASS]``/``[FAIL]`` line and the session summary repeats
them in order.  Tolerances are the ones the criteria state; nothing is relaxed
to make a row pass.
"""

import csv
import dataclasses
import io
import time
from fractions import Fraction

import numpy as np

from rnnspatial import oracle
from rnnspatial.arch import (
    default_config, folded_tree_schedule, pcu_mac_throughput, reduction_latency, replay_schedule,
)
from rnnspatial.cli import BENCH_COLUMNS, bench_rows
from rnnspatial.dse import default_space, enumerate_candidates, search
from rnnspatial.lowprec import F8_VALUES, decode_f8, mixed_dot, quantize_f8_codes
from rnnspatial.mapper import map_loop_rnn, validate
from rnnspatial.rnn import flop_count, lstm_cell_step, lstm_step_by_rows, random_instance, run_sequence
from rnnspatial.simulator import (
    BW_PAPER_PARAMS, loop_lower_bound, simulate_loop, utilization_1d, utilization_2d,
)
from rnnspatial.workloads import BUILTIN

CFG = default_config()


def _oracle_sequence(kind, w, xs, s0):
    args = (w.W_h.tolist(), w.W_x.tolist(), w.b.tolist())
    h, c = s0.h.tolist(), None if s0.c is None else s0.c.tolist()
    out = []
    for x in xs:
        if kind == "lstm":
            h, c = oracle.lstm_step(*args, x.tolist(), h, c)
        else:
            h = oracle.gru_step(*args, x.tolist(), h)
        out.append(h)
    return np.array(out)


def test_c01_golden_equivalence(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    n = 0
    for seed in range(100):
        for kind in ("lstm", "gru"):
            if seed == 0:
                H, D, T = 64, 64, 8
            else:
                H, D, T = (int(v) for v in (rng.integers(1, 65), rng.integers(1, 65), rng.integers(1, 9)))
            w, xs, s0 = random_instance(kind, H, D, T, seed=seed)
            got = run_sequence(w, xs, s0)
            worst = max(worst, float(np.max(np.abs(got - _oracle_sequence(kind, w, xs, s0)))))
            n += 1
    dt = time.perf_counter() - t0
    criterion(1, "cell outputs match the scalar oracle", worst <= 1e-12 and dt < 10,
              f"{n} instances, max dev {worst:.2e}, {dt:.2f} s")


def test_c02_lstm1_bit_identity(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    mismatches = 0
    for seed in range(100):
        H, D = int(rng.integers(1, 17)), int(rng.integers(1, 17))
        w, xs, s0 = random_instance("lstm", H, D, 1, seed=seed)
        y, s = lstm_cell_step(w, xs[0], s0)
        y2, s2 = lstm_step_by_rows(w, xs[0], s0)
        mismatches += y.tobytes() != y2.tobytes() or s.c.tobytes() != s2.c.tobytes()
    dt = time.perf_counter() - t0
    criterion(2, "row-wise LSTM-1 assembly is bit-identical", mismatches == 0 and dt < 5,
              f"{mismatches} mismatches over 100 instances, {dt:.2f} s")


def test_c03_mixed_precision(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    scale = rng.choice([0.05, 1.0, 20.0], size=(10_000, 1))
    A = quantize_f8_codes(rng.normal(size=(10_000, 64)) * scale)
    B = quantize_f8_codes(rng.normal(size=(10_000, 64)) * scale)
    dot_bad = 0
    for a, b in zip(A, B):
        ref = np.float32(oracle.mixed_dot(a.tolist(), b.tolist(), 16))
        dot_bad += mixed_dot(a, b, 16).tobytes() != ref.tobytes()
    x = rng.uniform(-500, 500, 100_000) * rng.choice([1.0, 1e-2, 1e-3], 100_000)
    got = decode_f8(quantize_f8_codes(x))
    table = F8_VALUES.astype(np.float64)
    quant_bad = 0
    for chunk in range(0, x.size, 10_000):
        xs, gs = x[chunk:chunk + 10_000], got[chunk:chunk + 10_000]
        best = np.min(np.abs(table[None, :] - xs[:, None]), axis=1)
        quant_bad += int(np.count_nonzero(np.abs(gs - xs) != best))
    dt = time.perf_counter() - t0
    criterion(3, "mixed_dot bit-exact and Float8 nearest-value", dot_bad == 0 and quant_bad == 0 and dt < 10,
              f"{dot_bad}/10000 dot mismatches, {quant_bad}/100000 quantization misses, {dt:.2f} s")


def test_c04_latency_formulas(criterion):
    sched = folded_tree_schedule(16, 4)
    hazards = replay_schedule(sched, 100)
    ok = reduction_latency(16) == 7 and hazards == 0
    criterion(4, "reduction latency and hazard-free folded tree", ok,
              f"latency {reduction_latency(16)}, {hazards} hazards over 100 vectors")


def _enumerated_dot_pcus(dims, p, cfg):
    total = 0
    for _ in range(p.hu * dims.G * p.ru):
        lanes = p.rv
        while lanes > 0:
            total += 1
            lanes -= 4 * cfg.lanes
    return total


def test_c05_throughput_identity(criterion):
    checked = bad = 0
    for w in BUILTIN:
        for p in default_space(w.dims, CFG):
            checked += 1
            bad += map_loop_rnn(w.dims, p, CFG).dot_pcus != _enumerated_dot_pcus(w.dims, p, CFG)
    ok = pcu_mac_throughput(16, "f8") == 64 and bad == 0
    criterion(5, "8-bit MAC throughput and dot-PCU counting", ok, f"{checked} parameter sets, {bad} mismatches")


def test_c06_published_tflops_identity(criterion):
    misses = []
    parts = []
    for w in BUILTIN:
        if w.paper_latency_s is None or w.paper_tflops is None:
            continue
        computed = flop_count(w.dims) / w.paper_latency_s / 1e12
        gap = abs(computed - w.paper_tflops) / w.paper_tflops
        parts.append(f"{w.name} {computed:.3f} vs {w.paper_tflops}")
        if gap > 0.03:
            misses.append(f"{w.name}: {computed:.3f} vs {w.paper_tflops} ({gap:.2%})")
    detail = "; ".join(misses) if misses else f"{len(parts)} rows within 3%"
    criterion(6, "published latency reproduces published TFLOPS within 3%", not misses, detail)


def test_c07_fragmentation(criterion):
    hv, rv, ru = BW_PAPER_PARAMS.hv, BW_PAPER_PARAMS.rv, BW_PAPER_PARAMS.ru
    order_ok = all(
        utilization_1d(w.dims, w.params.hu, w.params.rv, w.params.ru) >= utilization_2d(w.dims, hv, rv, ru)
        for w in BUILTIN
    )
    lstm256 = BUILTIN[0]
    u1 = utilization_1d(lstm256.dims, lstm256.params.hu, lstm256.params.rv, lstm256.params.ru)
    u2 = utilization_2d(lstm256.dims, hv, rv, ru)
    # brute-force MAC count for the BW tiles on the H=256, R=512 matrix
    useful = provisioned = 0
    for h0 in range(0, 256, hv):
        for r0 in range(0, 512, rv * ru):
            rows = np.arange(h0, h0 + hv) < 256
            cols = np.arange(r0, r0 + rv * ru) < 512
            useful += int(rows.sum() * cols.sum())
            provisioned += hv * rv * ru
    ok = (order_ok and u1 == Fraction(131072, 132096) and round(float(u1), 4) == 0.9922
          and u2 == Fraction(useful, provisioned) and abs(float(u2) - 0.455) < 5e-4)
    criterion(7, "1-D fragmentation beats 2-D on every row", ok,
              f"LSTM 256 loop {u1} = {float(u1):.4f}, BW 2-D {float(u2):.4f}")


def _table_param_report(w, cfg=CFG, dims=None):
    dims = w.dims if dims is None else dims
    d = map_loop_rnn(dims, w.params, cfg)
    return simulate_loop(d, cfg=cfg, allow_oversubscribed=True), not validate(d, cfg)


def test_c08_simulator_bounds_and_trends(criterion):
    below = []
    corridor = []
    for w in BUILTIN:
        rep, fits = _table_param_report(w)
        if rep.cycles < loop_lower_bound(w.dims, w.params):
            below.append(w.name)
        if fits and w.paper_latency_s is not None:
            ratio = rep.latency_s / w.paper_latency_s
            corridor.append((w.name, ratio))
    out_of_corridor = [f"{n} {r:.2f}" for n, r in corridor if not 0.25 <= r <= 4]
    monotone = True
    for w in BUILTIN[:5]:
        lat = [_table_param_report(w, dims=dataclasses.replace(w.dims, H=H, D=H))[0].cycles
               for H in (128, 256, 512, 1024, 2048)]
        lat_t = [_table_param_report(w, dims=dataclasses.replace(w.dims, T=T))[0].cycles for T in (1, 2, 5, 25, 150)]
        monotone &= lat == sorted(lat) and lat_t == sorted(lat_t)
    ratios = ", ".join(f"{n} {r:.2f}" for n, r in corridor)
    ok = not below and not out_of_corridor and monotone
    criterion(8, "lower bound, factor-4 corridor and monotonicity", ok,
              f"model/published: {ratios}" if ok else f"below bound {below}; outside corridor {out_of_corridor}")


def test_c09_dse_trends(criterion):
    small = BUILTIN[0].dims
    large = BUILTIN[4].dims
    res_s = search(small, CFG)
    space_l = default_space(large, CFG, allow_oversubscribed=True)
    res_l = search(large, CFG, space_l)
    trend = res_s.best.hu > res_l.best.hu and res_s.best.ru < res_l.best.ru
    brute_ok = True
    for dims, space, res in ((small, default_space(small, CFG), res_s), (large, space_l, res_l)):
        cycles = []
        for p in enumerate_candidates(dims, CFG, space):
            d = map_loop_rnn(dims, p, CFG)
            cycles.append(simulate_loop(d, cfg=CFG, allow_oversubscribed=space.allow_oversubscribed).cycles)
        brute_ok &= res.report.cycles == min(cycles)
    criterion(9, "search trend across LSTM sizes and brute-force optimality", trend and brute_ok,
              f"H=256 -> hu={res_s.best.hu}, ru={res_s.best.ru}; H=2048 -> hu={res_l.best.hu}, ru={res_l.best.ru}")


def test_c10_bench_end_to_end(criterion):
    t0 = time.perf_counter()
    rows = bench_rows(BUILTIN, CFG)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({c: r.get(c, "") for c in BENCH_COLUMNS})
    dt = time.perf_counter() - t0
    parsed = list(csv.DictReader(io.StringIO(buf.getvalue())))
    fit = {r["name"]: r["fit"] for r in parsed}
    ok = (dt < 60 and len(parsed) == 11 and tuple(parsed[0]) == BENCH_COLUMNS
          and fit["gru-2560-375"] == "oversubscribed" and fit["gru-2816-750"] == "oversubscribed")
    flagged = [n for n, f in fit.items() if f != "ok"]
    criterion(10, "bench over the built-in table", ok, f"{dt:.2f} s, oversubscribed: {', '.join(flagged)}")
