"""
Three stations, two wavelengths
===============================

The heuristic on the smallest worked example, checked against every
possible assignment.
"""

from wdm_revenue import brute_force_solve, heuristic_solve, load_table

inst = load_table("I")
for s in inst.stations:
    print(f"station {s.station_id}: Gamma = {s.gamma}, switchover = {s.switchover}")

# The heuristic: pooled allocation, P/Q partition, LPT, then one allocation
# per wavelength.
res = heuristic_solve(inst)
print("\nheuristic groups:", res.assignment.groups())
print("visits:", {k: round(v, 3) for k, v in res.plan.visit_of.items()})
print(f"revenue: {res.total_revenue:.4f}")

# Exhaustive search over canonical labellings (0 = unserved).
report = brute_force_solve(inst)
print("\nrank  label      revenue")
for rank, row in enumerate(report.rows[:6], start=1):
    print(f"{rank:4d}  {str(row.label):9s}  {row.revenue:.4f}")
print(f"\nheuristic gap to optimum: {report.heuristic_gap:.2e}")

# The fourth station of the next example is not worth its switchover: the
# heuristic leaves it unserved.
res2 = heuristic_solve(load_table("II"))
print("\nfour stations:", {k: round(v, 3) for k, v in res2.plan.visit_of.items()}, f"{res2.total_revenue:.4f}")
