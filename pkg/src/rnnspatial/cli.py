"""Command-line harness.

Exit codes: 0 success, 1 golden-model mismatch, 2 usage error,
3 missing or malformed input file, 4 design does not fit (or invalid params).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import sys
import time

import numpy as np

from . import lowprec, oracle
from .arch import ArchConfig, ArchError, default_config
from .dse import NoValidCandidate, default_space, search
from .mapper import MappingParams, fits_on_chip, map_loop_rnn, validate
from .rnn import GruWeights, LstmWeights, gru_cell_step, lstm_cell_step, random_instance
from .simulator import (
    BW_PAPER_PARAMS, SimReport, UnvalidatedDesign, simulate_bw, simulate_loop, trace_loop,
    utilization_1d, utilization_2d, write_csv, write_trace,
)
from .workloads import BW_PAPER_LATENCY_MS, resolve

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_INPUT, EXIT_FIT = 0, 1, 2, 3, 4
GOLDEN_DIM_CAP = 64
GOLDEN_STEP_CAP = 8
GOLDEN_TOL = 1e-12

BENCH_COLUMNS = (
    "name", "kind", "H", "D", "T", "fit", "hu", "ru", "rv",
    "cycles", "latency_s", "eff_tflops", "utilization_1d", "bottleneck",
    "paper_hu", "paper_ru", "paper_rv", "paper_params_latency_s",
    "paper_latency_s", "latency_ratio",
    "bw_hv", "bw_rv", "bw_ru", "bw_latency_s", "bw_utilization_2d", "bw_paper_latency_s",
)


class CliError(Exception):
    def __init__(self, msg, code):
        super().__init__(msg)
        self.code = code


def golden_check(kind, H, D, T, seed, lanes=16, zero_weights=False):
    """Compare the vectorized paths against the scalar oracles on one seeded instance."""
    H, D, T = min(H, GOLDEN_DIM_CAP), min(D, GOLDEN_DIM_CAP), min(T, GOLDEN_STEP_CAP)
    w, xs, s0 = random_instance(kind, H, D, T, seed=seed)
    if zero_weights:
        w = (LstmWeights if kind == "lstm" else GruWeights).zeros(H, D)
    Wh, Wx, b = w.W_h.tolist(), w.W_x.tolist(), w.b.tolist()
    h_ref, c_ref = s0.h.tolist(), (s0.c.tolist() if s0.c is not None else None)
    s, h = s0, s0.h
    full_dev = 0.0
    for x in xs:
        if kind == "lstm":
            y, s = lstm_cell_step(w, x, s)
            h_ref, c_ref = oracle.lstm_step(Wh, Wx, b, x.tolist(), h_ref, c_ref)
            full_dev = max(full_dev, np.max(np.abs(s.c - c_ref)))
        else:
            y, h = gru_cell_step(w, x, h)
            h_ref = oracle.gru_step(Wh, Wx, b, x.tolist(), h_ref)
        full_dev = max(full_dev, float(np.max(np.abs(y - h_ref))))
    # mixed precision: gate pre-activation matvec on 8-bit weights
    Wc = lowprec.quantize_f8_codes(w.W.reshape(-1, w.dims.R) * 8)
    vc = lowprec.quantize_f8_codes(np.concatenate([s0.h, xs[0]]))
    got = lowprec.mixed_matvec(Wc, vc, lanes)
    width = 4 * lanes
    pad = -w.dims.R % width
    vpad = vc.tolist() + [0] * pad
    ref = np.array([oracle.mixed_dot(row.tolist() + [0] * pad, vpad, lanes) for row in Wc], np.float32)
    mixed_mismatch = int(np.count_nonzero(got.view(np.uint32) != ref.view(np.uint32)))
    exact = lowprec.decode_f8(Wc) @ lowprec.decode_f8(vc)
    return {
        "kind": kind, "H": H, "D": D, "T": T, "seed": seed,
        "full_precision_max_dev": full_dev,
        "mixed_bit_mismatches": mixed_mismatch,
        "mixed_vs_double_max_dev": float(np.max(np.abs(got - exact))),
        "pass": full_dev <= GOLDEN_TOL and mixed_mismatch == 0,
    }


def _arch(args):
    if getattr(args, "arch", None):
        try:
            return ArchConfig.load(args.arch)
        except FileNotFoundError as e:
            raise CliError(str(e), EXIT_INPUT) from e
        except (ValueError, TypeError, ArchError) as e:
            raise CliError(f"bad architecture config {args.arch}: {e}", EXIT_INPUT) from e
    return default_config()


def _workloads(spec):
    try:
        return resolve(spec)
    except KeyError as e:
        raise CliError(str(e.args[0]), EXIT_USAGE) from e
    except FileNotFoundError as e:
        raise CliError(str(e), EXIT_INPUT) from e
    except (ValueError, KeyError, json.JSONDecodeError) as e:
        raise CliError(f"bad workload file {spec}: {e}", EXIT_INPUT) from e


def _params(args, wl, cfg, allow):
    if getattr(args, "params", None):
        try:
            return MappingParams.parse(args.params)
        except ValueError as e:
            raise CliError(str(e), EXIT_FIT) from e
    if wl.params is not None:
        return wl.params
    try:
        return search(wl.dims, cfg, default_space(wl.dims, cfg, allow_oversubscribed=allow)).best
    except NoValidCandidate as e:
        raise CliError(f"{wl.name}: {e} (use --allow-oversubscribed to ignore capacity)", EXIT_FIT) from e


@contextlib.contextmanager
def _out(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def simulate_workload(wl, p, cfg, allow_oversubscribed=False) -> SimReport:
    design = map_loop_rnn(wl.dims, p, cfg)
    return simulate_loop(design, cfg=cfg, allow_oversubscribed=allow_oversubscribed)


def cmd_golden(args):
    results = []
    for wl in _workloads(args.workload):
        results.append(golden_check(wl.kind, wl.H, wl.D, wl.T, args.seed, zero_weights=args.zero_weights))
    with _out(args.output) as fh:
        if args.format == "json":
            json.dump(results, fh, indent=2)
            fh.write("\n")
        else:
            w = csv.DictWriter(fh, fieldnames=list(results[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(results)
    return EXIT_OK if all(r["pass"] for r in results) else EXIT_MISMATCH


def cmd_simulate(args):
    cfg = _arch(args)
    reports = []
    for wl in _workloads(args.workload):
        p = _params(args, wl, cfg, args.allow_oversubscribed)
        try:
            rep = simulate_workload(wl, p, cfg, args.allow_oversubscribed)
        except UnvalidatedDesign as e:
            raise CliError(f"{wl.name}: {e} (use --allow-oversubscribed to ignore capacity)", EXIT_FIT) from e
        reports.append((wl, rep))
        if args.trace:
            with open(args.trace, "w", newline="") as fh:
                write_trace(trace_loop(rep, map_loop_rnn(wl.dims, p, cfg)), fh)
    extra = ("name", "paper_latency_s", "latency_ratio")
    rows = []
    for wl, rep in reports:
        row = rep.row()
        row["name"] = wl.name
        if wl.paper_latency_s:
            row["paper_latency_s"] = f"{wl.paper_latency_s:.6e}"
            row["latency_ratio"] = f"{rep.latency_s / wl.paper_latency_s:.4f}"
        rows.append(row)
    with _out(args.output) as fh:
        if args.format == "json":
            out = []
            for (wl, rep), row in zip(reports, rows):
                d = rep.to_dict()
                d.update({k: row.get(k) for k in extra})
                out.append(d)
            json.dump(out if len(out) > 1 else out[0], fh, indent=2, default=str)
            fh.write("\n")
        else:
            write_csv(rows, fh, extra)
    return EXIT_OK


def cmd_dse(args):
    cfg = _arch(args)
    rows = []
    for wl in _workloads(args.workload):
        space = default_space(wl.dims, cfg, allow_oversubscribed=args.allow_oversubscribed)
        try:
            res = search(wl.dims, cfg, space)
        except NoValidCandidate as e:
            raise CliError(f"{wl.name}: {e} (use --allow-oversubscribed to ignore capacity)", EXIT_FIT) from e
        for rank, rep in enumerate(res.frontier):
            row = rep.row()
            row.update({"name": wl.name, "rank": rank})
            rows.append(row)
    with _out(args.output) as fh:
        write_csv(rows, fh, ("name", "rank"))
    return EXIT_OK


def bench_rows(workloads, cfg):
    rows = []
    for wl in workloads:
        dims = wl.dims
        fit = fits_on_chip(dims, cfg)
        space = default_space(dims, cfg, allow_oversubscribed=not fit)
        res = search(dims, cfg, space)
        rep = res.report
        row = {
            "name": wl.name, "kind": wl.kind, "H": dims.H, "D": dims.D, "T": dims.T,
            "fit": "ok" if fit else "oversubscribed",
            "hu": rep.params.hu, "ru": rep.params.ru, "rv": rep.params.rv,
            "cycles": rep.cycles, "latency_s": f"{rep.latency_s:.6e}",
            "eff_tflops": f"{rep.eff_flops / 1e12:.4f}",
            "utilization_1d": f"{float(utilization_1d(dims, rep.params.hu, rep.params.rv, rep.params.ru)):.6f}",
            "bottleneck": rep.bottleneck,
        }
        if wl.params is not None:
            pp = wl.params
            prep = simulate_workload(wl, pp, cfg, allow_oversubscribed=True)
            row.update({"paper_hu": pp.hu, "paper_ru": pp.ru, "paper_rv": pp.rv,
                        "paper_params_latency_s": f"{prep.latency_s:.6e}"})
            if wl.paper_latency_s:
                row["paper_latency_s"] = f"{wl.paper_latency_s:.6e}"
                row["latency_ratio"] = f"{prep.latency_s / wl.paper_latency_s:.4f}"
        bw = simulate_bw(dims, BW_PAPER_PARAMS)
        row.update({
            "bw_hv": BW_PAPER_PARAMS.hv, "bw_rv": BW_PAPER_PARAMS.rv, "bw_ru": BW_PAPER_PARAMS.ru,
            "bw_latency_s": f"{bw.latency_s:.6e}",
            "bw_utilization_2d": f"{float(utilization_2d(dims, BW_PAPER_PARAMS.hv, BW_PAPER_PARAMS.rv, BW_PAPER_PARAMS.ru)):.6f}",
        })
        if wl.name in BW_PAPER_LATENCY_MS:
            row["bw_paper_latency_s"] = f"{BW_PAPER_LATENCY_MS[wl.name] * 1e-3:.6e}"
        rows.append(row)
    return rows


def cmd_bench(args):
    cfg = _arch(args)
    t0 = time.perf_counter()
    rows = bench_rows(_workloads(args.table), cfg)
    with _out(args.output) as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c, "") for c in BENCH_COLUMNS})
    print(f"bench: {len(rows)} rows in {time.perf_counter() - t0:.2f} s", file=sys.stderr)
    return EXIT_OK


def cmd_describe(args):
    cfg = _arch(args)
    for wl in _workloads(args.workload):
        p = _params(args, wl, cfg, True)
        d = map_loop_rnn(wl.dims, p, cfg)
        print(d.describe())
        for v in validate(d, cfg):
            print(f"  ! {v}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="rnnspatial", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, workload=True):
        if workload:
            p.add_argument("workload", help="built-in name (e.g. lstm-512-25), 'builtin', or a workload JSON file")
        p.add_argument("--arch", help="architecture config JSON (keys = ArchConfig fields)")
        p.add_argument("--output", "-o", help="output file (default stdout)")

    p = sub.add_parser("golden", help="check vectorized models against scalar oracles")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--zero-weights", action="store_true", help="use an all-zero weight instance")
    p.set_defaults(func=cmd_golden)

    p = sub.add_parser("simulate", help="simulate a loop-based design")
    common(p)
    p.add_argument("--params", help="hu,ru,rv (default: workload params, else DSE)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--allow-oversubscribed", action="store_true")
    p.add_argument("--trace", help="write per-cycle occupancy CSV to this path")
    p.add_argument("--seed", type=int, default=0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dse", help="exhaustive parameter search; prints the frontier as CSV")
    common(p)
    p.add_argument("--allow-oversubscribed", action="store_true")
    p.set_defaults(func=cmd_dse)

    p = sub.add_parser("bench", help="full comparison table over a workload table (CSV)")
    p.add_argument("table", nargs="?", default="builtin")
    common(p, workload=False)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("describe", help="print the mapped design layout")
    common(p)
    p.add_argument("--params", help="hu,ru,rv")
    p.set_defaults(func=cmd_describe)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
