"""
Heuristic versus random assignments
===================================

Random wavelength assignments, each finished with the per-wavelength
allocation, compared with the heuristic on the 16-station examples.
"""

from wdm_revenue import heuristic_solve, load_table, random_baseline

# "capped" spreads stations evenly; "uncapped" draws each wavelength freely.
for table in ("III", "VI"):
    inst = load_table(table)
    h = heuristic_solve(inst).total_revenue
    print(f"table {table}: heuristic {h:.2f}")
    for mode in ("capped", "uncapped"):
        b = random_baseline(inst, mode, trials=2000, seed=1)
        print(f"  {mode:9s} max {b.maximum:.2f}  avg {b.average:.2f}  min {b.minimum:.2f}"
              f"  above heuristic {b.percent_above:.2f}%")

# The same seed gives the same draws whatever the thread count.
a = random_baseline(load_table("III"), "capped", 500, seed=3, threads=1)
b = random_baseline(load_table("III"), "capped", 500, seed=3, threads=4)
print("\nthreads do not change results:", a == b)
