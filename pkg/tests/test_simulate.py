import math

import numpy as np
import pytest

from oracles import m_curve
from wdm_revenue.model import StationParams, TrafficClass
from wdm_revenue.simulate import (
    SimConfig,
    eventual_service_prob,
    simulate_replications,
    simulate_station,
    traffic_classes,
)


def series_service_prob(p, q, terms=2000):
    """Served-eventually probability summed term by term: sum p ((1-p)(1-q))^n."""
    stay = (1 - p) * (1 - q)
    return sum(p * stay**n for n in range(terms))


def test_eventual_service_examples():
    assert eventual_service_prob(1.0, 0.3) == 1.0
    assert eventual_service_prob(0.0, 0.4) == 0.0
    assert eventual_service_prob(0.5, 0.5) == pytest.approx(0.666667, abs=1e-6)
    for p, q in [(0.2, 0.7), (0.9, 0.05), (0.3, 0.3)]:
        assert eventual_service_prob(p, q) == pytest.approx(series_service_prob(p, q), rel=1e-12)


def test_eventual_service_errors():
    with pytest.raises(ValueError):
        eventual_service_prob(0.0, 0.0)
    with pytest.raises(ValueError):
        eventual_service_prob(1.1, 0.5)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(cycles=0)
    with pytest.raises(ValueError):
        SimConfig(cycles=10, warmup_cycles=10)


def test_full_visit_serves_everything():
    s = StationParams(1, classes=(TrafficClass(1.0, 1.0, 1.0),))
    rep = simulate_station(s, 2.0, 2.0, SimConfig(20000, 100, 3))
    assert rep.served_fraction == 1.0
    assert rep.dropped == 0 and rep.in_loop == 0
    assert abs(rep.mean_revenue_per_cycle - 2.0) <= 3 * rep.std_error


def test_zero_visit_drops_everything():
    s = StationParams(1, classes=(TrafficClass(1.0, 1.0, 1.0),))
    rep = simulate_station(s, 2.0, 0.0, SimConfig(20000, 100, 3))
    assert rep.served == 0
    assert abs(rep.mean_revenue_per_cycle + 2.0) <= 3 * rep.std_error
    assert rep.analytic_revenue == pytest.approx(-2.0)


def test_grid_case_matches_formula():
    s = StationParams(1, gamma=1.0, theta=0.5, retry_rate=0.5, drop_decay=0.5)
    rep = simulate_station(s, 2.0, 1.0, SimConfig(100_000, 100, 12))
    expected = float(m_curve(1.0, 0.5, 0.5, 2.0, 1.0)) - 2.0 * 0.5
    assert rep.analytic_revenue == pytest.approx(expected, rel=1e-12)
    assert abs(rep.z_score) <= 3
    assert rep.z_score == pytest.approx((rep.mean_revenue_per_cycle - expected) / rep.std_error)


def test_conservation_and_loop_fraction():
    s = StationParams(1, gamma=4.0, theta=1.0, retry_rate=0.25, drop_decay=1.0)
    c, v = 2.0, 0.5
    rep = simulate_station(s, c, v, SimConfig(100_000, 100, 5))
    assert rep.arrivals == rep.served + rep.dropped + rep.in_loop
    p, q = 1 - math.exp(-0.25 * v), math.exp(-1.0 * v)
    assert abs(rep.loop_served_fraction - eventual_service_prob(p, q)) <= 3 * rep.loop_served_se


def test_multiple_classes():
    classes = (TrafficClass(0.5, 2.0, 0.5), TrafficClass(1.5, 1.0, 0.2))
    s = StationParams(1, classes=classes, retry_rate=0.5, drop_decay=0.5)
    rep = simulate_station(s, 2.0, 1.2, SimConfig(100_000, 100, 8))
    assert abs(rep.z_score) <= 3.5


def test_synthetic_class_carries_aggregates():
    s = StationParams(1, gamma=3.0, theta=0.5)
    (cls,) = traffic_classes(s)
    assert cls.arrival_rate * (cls.profit_per_packet + cls.penalty_per_packet) == pytest.approx(3.0)
    assert cls.arrival_rate * cls.penalty_per_packet == pytest.approx(0.5)


def test_zero_arrivals():
    s = StationParams(1, classes=(TrafficClass(0.0, 1.0),))
    rep = simulate_station(s, 2.0, 1.0, SimConfig(1000, 10, 1))
    assert rep.mean_revenue_per_cycle == 0.0 and rep.served_fraction == 0.0 and rep.z_score == 0.0


def test_visit_out_of_range():
    with pytest.raises(ValueError):
        simulate_station(StationParams(1, gamma=1.0), 2.0, 2.5)


def test_seeded_and_replications_independent():
    s = StationParams(1, gamma=1.0, theta=0.2)
    cfg = SimConfig(5000, 100, 4)
    assert simulate_station(s, 2.0, 1.0, cfg) == simulate_station(s, 2.0, 1.0, cfg)
    reps = simulate_replications(s, 2.0, 1.0, cfg, 4, threads=2)
    assert reps == simulate_replications(s, 2.0, 1.0, cfg, 4, threads=1)
    assert len({r.mean_revenue_per_cycle for r in reps}) == 4
