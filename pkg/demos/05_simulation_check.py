"""
Checking the revenue formula by simulation
==========================================

A packet-level Monte Carlo of one station, compared with the closed form.
"""

from wdm_revenue import StationParams
from wdm_revenue.simulate import SimConfig, eventual_service_prob, simulate_station

s = StationParams(1, gamma=4.0, theta=0.5, retry_rate=0.5, drop_decay=0.25)
C = 2.0
cfg = SimConfig(cycles=100_000, warmup_cycles=100, seed=7)

print("  v    simulated  analytic   z     loop served  p/r")
for v in (0.0, 0.5, 1.0, 1.8, 2.0):
    rep = simulate_station(s, C, v, cfg)
    m = s.probability_model
    pr = eventual_service_prob(float(m.p(v)), float(m.q(v)))
    print(f"{v:4.1f}  {rep.mean_revenue_per_cycle:9.4f}  {rep.analytic_revenue:8.4f}  {rep.z_score:5.2f}"
          f"  {rep.loop_served_fraction:11.4f}  {pr:.4f}")

# Packets are conserved: each one is served, dropped, or still looping at the end.
rep = simulate_station(s, C, 1.0, cfg)
print("\narrivals = served + dropped + in loop:", rep.arrivals == rep.served + rep.dropped + rep.in_loop)
