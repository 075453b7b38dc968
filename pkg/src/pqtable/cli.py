"""Command-line front end: train, build, query, bench, and analyze.

Every subcommand emits line-delimited JSON records on stdout so results can
be collected and plotted without screen-scraping. Exit codes: 0 on success,
2 for usage and I/O problems, 1 for internal errors. Query loops run
single-threaded; timing fields aside, all output is deterministic for a
fixed seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .dataset_io import read_vecs, recall_at_r
from .opq import OPQTable, train_rotation
from .quantizer import encode, linear_adc_scan, quantization_error, train_codebook
from .storage import load_codebook, load_index, save_codebook, save_index
from .tables import (
    MultiPQTable,
    build_table,
    estimate_memory,
    expected_hashings,
    fill_rate,
    plan_tables,
    simulate_uniform_hashing,
    slot_occupancy,
    table_codes,
)

__all__ = ["entry", "main"]


def _emit(record: dict) -> None:
    print(json.dumps(record))


def _int_list(text: str) -> list[int]:
    return [int(float(part)) for part in text.split(",") if part.strip()]


def _latency_stats(seconds: list[float]) -> dict:
    ms = np.asarray(seconds, dtype=np.float64) * 1e3
    return {
        "mean": float(ms.mean()),
        "p50": float(np.percentile(ms, 50)),
        "p95": float(np.percentile(ms, 95)),
        "p99": float(np.percentile(ms, 99)),
    }


def _recall_fields(result_ids, gt, L: int) -> dict:
    recalls = {}
    for r in (1, 10, 100):
        if r <= L:
            recalls[str(r)] = recall_at_r(result_ids, gt, r)
    return recalls


def _unwrap(table):
    """(inner table, rotation or None) for plain and OPQ indexes."""
    if isinstance(table, OPQTable):
        return table.table, table.rotation
    return table, None


def cmd_train(args) -> int:
    data = read_vecs(args.data, args.kind, args.limit)
    rotation = None
    if args.opq:
        rotation, cb = train_rotation(
            data, args.m, K=args.k, iterations=args.iters, seed=args.seed
        )
        error = quantization_error(cb, rotation.apply(data))
    else:
        cb = train_codebook(data, args.m, K=args.k, iterations=args.iters, seed=args.seed)
        error = quantization_error(cb, data)
    save_codebook(args.out, cb, rotation)
    _emit(
        {
            "record": "train",
            "m": cb.M,
            "k": cb.K,
            "b": cb.code_bits,
            "n_train": int(data.shape[0]),
            "seed": args.seed,
            "opq": bool(args.opq),
            "quantization_error": error,
            "out": args.out,
        }
    )
    return 0


def cmd_build(args) -> int:
    base = read_vecs(args.data, args.kind, args.limit)
    cb, rotation = load_codebook(args.codebook)
    codes = encode(cb, rotation.apply(base) if rotation is not None else base)
    n = int(codes.shape[0])
    t = args.tables if args.tables else plan_tables(cb.code_bits, n, M=cb.M)
    table = build_table(cb, codes, t)
    save_index(args.out, table, rotation)
    _emit(
        {
            "record": "build",
            "n": n,
            "b": cb.code_bits,
            "t": t,
            "planned_t": plan_tables(cb.code_bits, n, M=cb.M) if n >= 2 else None,
            "out": args.out,
            "bytes": os.path.getsize(args.out),
            "estimated_bytes": estimate_memory(cb.code_bits, n, cb.D, cb.K, t).table_bytes,
        }
    )
    return 0


def _timed_queries(run, queries, L: int):
    ids_per_query = []
    seconds = []
    for q in queries:
        start = time.perf_counter()
        ids, _ = run(q, L)
        seconds.append(time.perf_counter() - start)
        ids_per_query.append(ids)
    return ids_per_query, seconds


def cmd_query(args) -> int:
    index = load_index(args.index)
    inner, rotation = _unwrap(index)
    queries = read_vecs(args.queries, args.kind, args.limit)
    if queries.shape[1] != inner.codebook.D:
        raise ValueError(
            f"query dimension {queries.shape[1]} != index dimension {inner.codebook.D}"
        )
    gt = read_vecs(args.gt, "ivecs") if args.gt else None
    cb = inner.codebook
    L = args.topk
    if args.baseline:
        codes = table_codes(inner)

        def run(q, L):
            return linear_adc_scan(cb, codes, rotation.apply(q) if rotation else q, L)

    else:
        run = index.query
    ids_per_query, seconds = _timed_queries(run, queries, L)
    t = inner.T if isinstance(inner, MultiPQTable) else 1
    estimate = estimate_memory(cb.code_bits, len(inner), cb.D, cb.K, t)
    _emit(
        {
            "record": "query",
            "mode": "baseline" if args.baseline else "pqtable",
            "m": cb.M,
            "k": cb.K,
            "b": cb.code_bits,
            "t": t,
            "n": len(inner),
            "l": L,
            "seed": None,
            "n_queries": int(queries.shape[0]),
            "latency_ms": _latency_stats(seconds),
            "recall": _recall_fields(ids_per_query, gt, L) if gt is not None else None,
            "memory": {
                "estimated_bytes": estimate.table_bytes,
                "linear_scan_bytes": estimate.linear_scan_bytes,
                "measured_bytes": os.path.getsize(args.index),
            },
        }
    )
    return 0


def cmd_bench(args) -> int:
    sizes = _int_list(args.sizes)
    if not sizes:
        return 0
    bits = _int_list(args.bits)
    topk = _int_list(args.topk)
    base = read_vecs(args.data, args.kind, args.limit)
    queries = read_vecs(args.queries, args.kind)
    gt = read_vecs(args.gt, "ivecs") if args.gt else None
    if max(sizes) > base.shape[0]:
        raise ValueError(f"sweep size {max(sizes)} exceeds the {base.shape[0]} base vectors")
    for b in bits:
        m = b // 8
        cb = train_codebook(base, m, K=args.k, iterations=args.iters, seed=args.seed)
        codes_all = encode(cb, base)
        for n in sizes:
            codes = codes_all[:n]
            t = args.tables if args.tables else plan_tables(b, n, M=m)
            table = build_table(cb, codes, t)
            for L in topk:
                L = min(L, n)
                table_ids, table_secs = _timed_queries(table.query, queries, L)
                _, base_secs = _timed_queries(
                    lambda q, L: linear_adc_scan(cb, codes, q, L), queries, L
                )
                recall = None
                if gt is not None and n == base.shape[0]:
                    recall = _recall_fields(table_ids, gt, L)
                _emit(
                    {
                        "record": "bench",
                        "b": b,
                        "n": int(n),
                        "t": t,
                        "l": int(L),
                        "seed": args.seed,
                        "table_latency_ms": _latency_stats(table_secs),
                        "baseline_latency_ms": _latency_stats(base_secs),
                        "recall": recall,
                    }
                )
    return 0


def cmd_analyze(args) -> int:
    plannable = args.bits >= 8 and args.bits & (args.bits - 1) == 0
    for n in _int_list(args.sizes):
        row = {
            "record": "analysis",
            "b": args.bits,
            "n": int(n),
            "fill_rate": fill_rate(args.bits, n) if n >= 0 else None,
            "expected_hashings": expected_hashings(args.bits, n) if n >= 1 else None,
            "slot_occupancy": slot_occupancy(args.bits, n) if n >= 1 else None,
            "t_star": plan_tables(args.bits, n) if plannable and n >= 2 else None,
        }
        if args.simulate and n >= 1:
            sim = simulate_uniform_hashing(args.bits, n, trials=args.trials, seed=args.seed)
            row["sim_fill_rate"] = sim.fill_rate
            row["sim_slot_occupancy"] = sim.slot_occupancy
        _emit(row)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pqtable", description="Hash-table search over product-quantized codes."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_flags(p, queries: bool = False):
        p.add_argument("--data", required=not queries, help="base/training vector file")
        p.add_argument("--kind", choices=("fvecs", "bvecs"), default="fvecs")
        p.add_argument("--limit", type=int, default=None, help="read at most this many records")

    p = sub.add_parser("train", help="train a codebook (and rotation with --opq)")
    add_data_flags(p)
    p.add_argument("--m", type=int, required=True, help="subspace count")
    p.add_argument("--k", type=int, default=256, help="sub-codewords per subspace")
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--opq", action="store_true", help="learn a rotation before PQ")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("build", help="encode base vectors and build the index")
    add_data_flags(p)
    p.add_argument("--codebook", required=True)
    p.add_argument("--tables", type=int, default=None, help="override the planned table count")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="run queries against an index")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--kind", choices=("fvecs", "bvecs"), default="fvecs")
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--topk", type=int, default=1)
    p.add_argument("--gt", default=None, help="ground-truth ivecs file for recall")
    p.add_argument("--baseline", action="store_true", help="linear ADC scan instead of the table")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="sweep database sizes and emit latency rows")
    add_data_flags(p)
    p.add_argument("--queries", required=True)
    p.add_argument("--sizes", default="", help="comma list of database sizes (prefix truncation)")
    p.add_argument("--bits", default="32", help="comma list of code lengths in bits")
    p.add_argument("--topk", default="1", help="comma list of L values")
    p.add_argument("--k", type=int, default=256)
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--tables", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gt", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("analyze", help="closed-form table statistics over an N sweep")
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--sizes", required=True, help="comma list of N values")
    p.add_argument("--simulate", action="store_true", help="append Monte-Carlo estimates")
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, IndexError) as exc:
        print(f"pqtable: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - internal failure
        print(f"pqtable: internal error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
