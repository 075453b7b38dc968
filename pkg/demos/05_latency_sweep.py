"""Walkthrough: where the table beats the exhaustive scan.

Sweeps the database size by prefix truncation and times single-threaded
queries for the table against a linear ADC scan. The scan grows linearly
with N while the table stays near-flat, so the gap widens with scale.

The same sweep is available from the command line:
    pqtable bench --data base.fvecs --queries q.fvecs --sizes 1e3,1e4,1e5
"""

import time

import numpy as np

from pqtable import build_table, encode, linear_adc_scan, plan_tables, synthesize, train_codebook

N_MAX, D, M = 200_000, 16, 4
data = synthesize("clustered", N_MAX, D, seed=5, clusters=80, cluster_std=0.03)
codebook = train_codebook(data[:10_000], M, K=256, iterations=5, seed=5)
codes_all = encode(codebook, data)

rng = np.random.default_rng(6)
queries = (data[rng.choice(N_MAX, 30)] + rng.normal(0, 0.005, (30, D))).astype(np.float64)

print(f"{'N':>8} {'T':>3} {'table ms':>9} {'scan ms':>9} {'speedup':>8}")
for n in (1_000, 10_000, 100_000, 200_000):
    codes = codes_all[:n]
    t = plan_tables(codebook.code_bits, n)
    table = build_table(codebook, codes, t)
    table.query(queries[0], L=1)  # warm up

    start = time.perf_counter()
    for q in queries:
        table.query(q, L=1)
    table_ms = (time.perf_counter() - start) / len(queries) * 1e3

    start = time.perf_counter()
    for q in queries:
        linear_adc_scan(codebook, codes, q, L=1)
    scan_ms = (time.perf_counter() - start) / len(queries) * 1e3

    print(f"{n:>8} {t:>3} {table_ms:>9.3f} {scan_ms:>9.3f} {scan_ms / table_ms:>7.1f}x")
