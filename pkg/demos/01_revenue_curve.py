"""
The revenue of one station
==========================

How the expected revenue per frame of a single station grows with its
visit time, and when the curve stops being concave.
"""

import warnings

import numpy as np

from wdm_revenue import StationParams
from wdm_revenue.model import Instance, check_concavity, revenue_derivative, station_revenue

# A station earning Gamma = 1 per unit of frame time, retry and drop rates 0.5.
s = StationParams(1, gamma=1.0, retry_rate=0.5, drop_decay=0.5)
C = 2.0

# Revenue at a few visit times. With v = C every packet is sent at once, so
# the station earns C * Gamma.
for v in np.linspace(0, C, 5):
    print(f"v = {v:4.2f}  M(v) = {station_revenue(s, C, v):.4f}  M'(v) = {revenue_derivative(s, C, v):.4f}")

# With no visit nothing is ever retried, so M(0) = 0. The marginal value
# falls with v: a short visit already catches many of the looping packets.

# Longer frames make the curve convex near zero. The library warns at load
# time instead of refusing the instance.
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    check_concavity(Instance((s,), 1, 8.0))
print(f"C = 8: {len(caught)} concavity warning(s): {caught[0].message if caught else ''}")
