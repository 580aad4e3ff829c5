"""Packet-level Monte Carlo check of the revenue formula for one station.

The simulator advances in whole frames. Within a frame, Poisson arrivals
split into those landing inside the visit (sent at once) and those landing
outside it (they enter the retrial loop). At each later visit a loop packet
is retried with probability ``p(v)``; if it is not retried it is dropped with
probability ``q(v)`` at the end of the visit; otherwise it stays. A loop packet
therefore leaves after ``min(T_retry, T_drop)`` frames with ``T_retry`` and
``T_drop`` geometric, and is served iff ``T_retry <= T_drop``. Its revenue
(``+gamma`` or ``-theta``) is booked in the frame it leaves.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import StationParams, TrafficClass, net_revenue


@dataclass(frozen=True)
class SimConfig:
    cycles: int = 100_000
    warmup_cycles: int = 100
    seed: int = 0
    batch: int = 100

    def __post_init__(self):
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        if not 0 <= self.warmup_cycles < self.cycles:
            raise ValueError("warmup_cycles must lie in [0, cycles)")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")


@dataclass(frozen=True)
class SimReport:
    """Outcome of one replication.

    ``served_fraction`` counts served packets among all absorbed ones (in-visit
    arrivals included); ``loop_served_fraction`` restricts this to packets that
    went through the loop, which estimates ``p/r``. Packet counts cover the
    whole run, warmup included, so ``arrivals == served + dropped + in_loop``.
    """

    mean_revenue_per_cycle: float
    std_error: float
    served_fraction: float
    analytic_revenue: float
    z_score: float
    loop_served_fraction: float
    loop_served_se: float
    loop_absorbed: int
    arrivals: int
    served: int
    dropped: int
    in_loop: int


def eventual_service_prob(p: float, q: float) -> float:
    """Probability that a loop packet is eventually served: ``p / (p + q - pq)``."""
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError(f"probabilities must lie in [0, 1], got p={p}, q={q}")
    if p == 0.0 and q == 0.0:
        raise ValueError("p = q = 0: a loop packet is never absorbed")
    return p / (p + q - p * q)


def traffic_classes(station: StationParams) -> tuple[TrafficClass, ...]:
    """The station's classes, or one unit-rate class carrying its aggregates."""
    if station.classes:
        return tuple(station.classes)
    theta = float(station.theta)
    return (TrafficClass(1.0, station.gamma - theta, theta),)


def _geometric(rng, prob: float, size: int) -> np.ndarray:
    if prob <= 0.0:
        return np.full(size, np.inf)
    return rng.geometric(min(prob, 1.0), size).astype(float)


def simulate_station(station: StationParams, c: float, v: float, cfg: SimConfig = SimConfig()) -> SimReport:
    """Simulate ``cfg.cycles`` frames of one station visited for ``v`` per frame."""
    c = float(c)
    v = float(v)
    if not 0.0 <= v <= c:
        raise ValueError(f"visit time must lie in [0, {c}], got {v}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))
    model = station.probability_model
    p = float(model.p(v))
    q = float(model.q(v))
    n = cfg.cycles
    revenue = np.zeros(n)
    served = dropped = arrivals = in_loop = 0
    loop_served = loop_absorbed = 0

    for cls in traffic_classes(station):
        lam, gamma, theta = cls.arrival_rate, cls.profit_per_packet, cls.penalty_per_packet
        if lam <= 0:
            continue
        inside = rng.poisson(lam * v, n)
        revenue += gamma * inside
        served += int(inside.sum())
        arrivals += int(inside.sum())

        outside = rng.poisson(lam * (c - v), n)
        m = int(outside.sum())
        arrivals += m
        if m == 0:
            continue
        born = np.repeat(np.arange(n), outside)
        t_retry = _geometric(rng, p, m)
        t_drop = _geometric(rng, q, m)
        ok = t_retry <= t_drop
        leave = born + np.minimum(t_retry, t_drop)
        done = leave < n
        in_loop += int(np.count_nonzero(~done))
        when = leave[done].astype(int)
        gain = np.where(ok[done], gamma, -theta)
        revenue += np.bincount(when, weights=gain, minlength=n)
        s = int(np.count_nonzero(ok & done))
        served += s
        dropped += int(np.count_nonzero(done)) - s
        loop_served += s
        loop_absorbed += int(np.count_nonzero(done))

    kept = revenue[cfg.warmup_cycles :]
    mean = float(kept.mean())
    nb = kept.size // cfg.batch
    if nb >= 2:
        means = kept[: nb * cfg.batch].reshape(nb, cfg.batch).mean(axis=1)
        se = float(means.std(ddof=1) / math.sqrt(nb))
    elif kept.size >= 2:
        se = float(kept.std(ddof=1) / math.sqrt(kept.size))
    else:
        se = 0.0
    analytic = net_revenue(station, c, v)
    diff = mean - analytic
    if se > 0:
        z = diff / se
    else:
        z = 0.0 if abs(diff) <= 1e-12 * max(1.0, abs(analytic)) else math.copysign(math.inf, diff)
    absorbed = served + dropped
    frac = served / absorbed if absorbed else 0.0
    lfrac = loop_served / loop_absorbed if loop_absorbed else 0.0
    lse = math.sqrt(lfrac * (1.0 - lfrac) / loop_absorbed) if loop_absorbed else 0.0
    return SimReport(
        mean_revenue_per_cycle=mean,
        std_error=se,
        served_fraction=frac,
        analytic_revenue=analytic,
        z_score=z,
        loop_served_fraction=lfrac,
        loop_served_se=lse,
        loop_absorbed=loop_absorbed,
        arrivals=arrivals,
        served=served,
        dropped=dropped,
        in_loop=in_loop,
    )


def simulate_replications(
    station: StationParams, c: float, v: float, cfg: SimConfig, replications: int, threads: int = 1
) -> list[SimReport]:
    """Independent replications; replication ``i`` uses substream ``i`` of ``cfg.seed``."""
    if replications < 1:
        raise ValueError("replications must be >= 1")

    def run(i: int) -> SimReport:
        seed = int(np.random.SeedSequence(cfg.seed, spawn_key=(i,)).generate_state(1, np.uint64)[0])
        return simulate_station(station, c, v, SimConfig(cfg.cycles, cfg.warmup_cycles, seed, cfg.batch))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, range(replications)))
    return [run(i) for i in range(replications)]
