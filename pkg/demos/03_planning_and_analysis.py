"""Walkthrough: choosing the table count and predicting hash-table behavior.

For B-bit codes over N items the indicative table count is B / log2(N),
quantized to a power of two. The closed-form fill rate, expected hashings,
and slot occupancy describe a uniformly hashed table; real (clustered) data
fills far fewer slots much more densely, so these act as bounds.
"""

from pqtable import (
    expected_hashings,
    fill_rate,
    plan_tables,
    simulate_uniform_hashing,
    slot_occupancy,
)

print("planned table count T*")
print(f"{'B':>4} " + " ".join(f"{f'1e{e}':>7}" for e in range(2, 10)))
for b in (32, 64):
    row = [plan_tables(b, 10**e) for e in range(2, 10)]
    print(f"{b:>4} " + " ".join(f"{t:>7}" for t in row))

print("\nuniform-hashing statistics for a 16-bit table")
print(f"{'N':>9} {'fill rate':>10} {'hashings':>9} {'occupancy':>10}")
for n in (10**3, 10**4, 10**5, 10**6):
    print(
        f"{n:>9} {fill_rate(16, n):>10.4f} {expected_hashings(16, n):>9.3f} "
        f"{slot_occupancy(16, n):>10.3f}"
    )

print("\nclosed form vs Monte-Carlo (B=12, one million simulated insertions)")
for n in (2**10, 2**12):
    sim = simulate_uniform_hashing(12, n, trials=1_000_000, seed=1)
    print(
        f"  N={n}: p {fill_rate(12, n):.4f} vs {sim.fill_rate:.4f}, "
        f"occupancy {slot_occupancy(12, n):.4f} vs {sim.slot_occupancy:.4f}"
    )
