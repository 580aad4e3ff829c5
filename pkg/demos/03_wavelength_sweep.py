"""
How many wavelengths are worth it?
==================================

Heuristic revenue of a 16-station node as the wavelength count grows.
"""

import numpy as np

from wdm_revenue import load_table, sweep_wavelengths

base = load_table("IX")
ks = [1, 2, 3, 4, 5, 6, 7, 8, 16]
rows = sweep_wavelengths(base, ks)

revenue = np.array([r.revenue for r in rows])
gain = np.diff(revenue, prepend=0.0)
print(" K   revenue   gain  served")
for r, g in zip(rows, gain):
    print(f"{r.wavelengths:2d}  {r.revenue:8.2f}  {g:6.2f}  {r.served:4d}")

# With one wavelength per station there is no switchover and every station
# earns C * Gamma: this is the ceiling.
bound = base.frame_time * sum(s.gamma for s in base.stations)
print(f"\nC * sum(Gamma) = {bound:.2f}")

# Diminishing returns: the gain per extra wavelength shrinks quickly.
print("share of the ceiling:", np.round(revenue / bound, 3))
