import math
import warnings

import numpy as np
import pytest

from conftest import const, make_instance
from oracles import m_curve
from wdm_revenue.heuristic import (
    Assignment,
    DegenerateBudgetWarning,
    InfeasibleInstanceError,
    alpha_finalize,
    evaluate,
    heuristic_solve,
    lpt_assign,
    partition,
    solve_one,
    solve_two,
)
from wdm_revenue.model import Instance, StationParams


def frame_loads(inst, res):
    loads = {}
    for k, members in res.assignment.groups().items():
        v = sum(res.plan.visit_of[s] for s in members)
        if len(members) > 1:
            v += sum(inst.station(s).switchover for s in members)
        loads[k] = v
    return loads


# --- LPT -------------------------------------------------------------------------


def test_lpt_hand_example():
    out = lpt_assign([("a", 5), ("b", 4), ("c", 3), ("d", 3)], 2)
    assert out == {1: ["a", "d"], 2: ["b", "c"]}


def test_lpt_single_item_and_errors():
    assert lpt_assign([("x", 1.0)], 3) == {1: ["x"], 2: [], 3: []}
    assert lpt_assign([], 0) == {}
    with pytest.raises(ValueError):
        lpt_assign([("x", 1.0)], 0)


def test_lpt_ties_go_to_lowest_wavelength():
    out = lpt_assign([(1, 2.0), (2, 2.0), (3, 1.0)], 2)
    assert out[1] == [1, 3]


# --- ONE and the partition ---------------------------------------------------------


def test_one_saturates_when_every_station_has_a_wavelength():
    inst = make_instance(5, 5, 8.0, lambda i: 0.5 * i, const(0.5), const(0.5), const(0.2))
    prov = solve_one(inst)
    for s in inst.stations:
        assert prov[s.station_id] == pytest.approx(8.0 - 0.2)
    sole, unserved, rest = partition(inst, prov)
    assert sole == set(inst.ids) and not unserved and not rest


def test_one_meets_pooled_budget(tables):
    for t in ("I", "II", "III", "IX"):
        inst = tables[t]
        prov = solve_one(inst)
        budget = inst.wavelengths * inst.frame_time - sum(s.switchover for s in inst.stations)
        assert sum(prov.values()) == pytest.approx(budget, abs=1e-7 * max(1, budget))
        for s in inst.stations:
            assert -1e-12 <= prov[s.station_id] <= inst.frame_time - s.switchover + 1e-9


def test_table_one_partition(tables):
    # Provisional visits keep every station strictly inside its bounds here, so
    # no station is set aside whole; LPT still isolates station 3.
    inst = tables["I"]
    sole, unserved, rest = partition(inst, solve_one(inst))
    assert sole == set() and unserved == set()
    assert rest == [3, 2, 1]


def test_table_two_partition(tables):
    inst = tables["II"]
    sole, unserved, rest = partition(inst, solve_one(inst))
    assert sole == set() and unserved == {1}
    assert rest == [4, 3, 2]


def test_one_infeasible_when_switchovers_exceed_capacity():
    inst = make_instance(3, 1, 1.0, const(1.0), const(0.5), const(0.5), const(0.5))
    with pytest.raises(InfeasibleInstanceError):
        solve_one(inst)


def test_flat_objective_is_feasible():
    inst = make_instance(4, 2, 2.0, const(0.0), const(0.5), const(0.5), const(0.2))
    res = heuristic_solve(inst)
    assert res.total_revenue == 0.0


def test_too_many_whole_wavelength_stations():
    inst = make_instance(3, 2, 2.0, const(1.0), const(0.5), const(0.5), const(0.2))
    prov = {1: 1.8, 2: 1.8, 3: 1.8}
    with pytest.raises(InfeasibleInstanceError):
        partition(inst, prov)


# --- TWO ------------------------------------------------------------------------------


def test_two_singleton_gets_whole_frame(tables):
    assert solve_two(tables["I"], [3]) == {3: 2.0}


def test_two_table_one_pair(tables):
    v = solve_two(tables["I"], [1, 2])
    assert (v[1], v[2]) == pytest.approx((0.48, 1.12), abs=0.01)


def test_two_table_two_pair(tables):
    v = solve_two(tables["II"], [2, 3])
    assert (v[2], v[3]) == pytest.approx((0.61, 0.99), abs=0.01)


def test_two_degenerate_budget():
    inst = make_instance(3, 1, 1.0, const(1.0), const(0.5), const(0.5), const(0.4))
    with pytest.warns(DegenerateBudgetWarning):
        v = solve_two(inst, [1, 2, 3])
    assert all(x == 0 for x in v.values())
    with pytest.raises(ValueError):
        solve_two(inst, [])


def test_two_drops_a_zero_visit_station_and_frees_its_switchover(tables):
    # Station 1 of the four-station example gets nothing next to stations 2, 3;
    # without it, 2 and 3 share C - 0.4 exactly as in the three-station case.
    v = solve_two(tables["II"], [1, 2, 3])
    assert v[1] == 0.0
    assert v[2] + v[3] == pytest.approx(1.6, abs=1e-9)


# --- full heuristic -------------------------------------------------------------------


def test_table_one(tables):
    res = heuristic_solve(tables["I"])
    assert res.total_revenue == pytest.approx(10.11, abs=0.01)
    assert res.assignment.partition() == {frozenset({1, 2}), frozenset({3})}
    got = [res.plan.visit_of[i] for i in (1, 2, 3)]
    assert got == pytest.approx([0.48, 1.12, 2.00], abs=0.01)


def test_table_two(tables):
    res = heuristic_solve(tables["II"])
    assert res.total_revenue == pytest.approx(14.65, abs=0.01)
    assert res.plan.visit_of[1] == 0.0
    assert res.assignment.unassigned == [1]
    assert res.served_count == 3


def test_all_wavelengths_reaches_upper_bound(tables):
    inst = tables["IX"].with_wavelengths(16)
    res = heuristic_solve(inst)
    assert res.total_revenue == pytest.approx(544.0, abs=1e-6)
    assert res.served_count == 16
    assert res.assignment.sole == frozenset(inst.ids)


def test_result_invariants_on_random_instances():
    rng = np.random.default_rng(21)
    for _ in range(300):
        n = int(rng.integers(1, 21))
        k = int(rng.integers(1, 7))
        c = float(rng.choice([2.0, 8.0]))
        stations = [
            StationParams(i + 1, gamma=rng.uniform(0, 8), retry_rate=rng.uniform(0.05, 1),
                          drop_decay=rng.uniform(0.05, 1), switchover=rng.uniform(0, 0.4))
            for i in range(n)
        ]
        inst = Instance(tuple(stations), k, c)
        if k * c < sum(s.switchover for s in stations):
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = heuristic_solve(inst)
        res.assignment.check(k)
        assert len(res.assignment.groups()) <= k
        for kk, load in frame_loads(inst, res).items():
            members = res.assignment.groups()[kk]
            if len(members) == 1:
                assert res.plan.visit_of[members[0]] == c
            else:
                assert load == pytest.approx(c, abs=1e-6)
        for sid in res.assignment.unassigned:
            assert res.plan.visit_of[sid] == 0.0
        assert res.total_revenue == pytest.approx(sum(res.per_station.values()), rel=1e-9)
        assert res.total_revenue <= c * sum(s.gamma for s in stations) + 1e-9
        assert res.served_count <= n


def test_revenue_matches_independent_curve(tables):
    inst = tables["III"]
    res = heuristic_solve(inst)
    total = sum(
        float(m_curve(s.gamma, 0.5, 0.5, 8.0, res.plan.visit_of[s.station_id])) for s in inst.stations
    )
    assert res.total_revenue == pytest.approx(total, rel=1e-12)


def test_same_wavelength_visits_follow_gamma(tables):
    res = heuristic_solve(tables["III"])
    for members in res.assignment.groups().values():
        v = [res.plan.visit_of[s] for s in members]
        assert v == sorted(v)


def test_deterministic(tables):
    a = heuristic_solve(tables["IV"])
    b = heuristic_solve(tables["IV"])
    assert a == b


def test_remainder_overflow_is_left_unserved():
    # K = 1 and a whole-wavelength station takes it: the rest cannot be served.
    inst = make_instance(3, 1, 8.0, lambda i: [100.0, 0.01, 0.01][i - 1], const(0.5), const(0.5), const(0.2))
    prov = {1: 7.8, 2: 0.1, 3: 0.1}
    from wdm_revenue.heuristic import assign_wavelengths

    assignment, notes = assign_wavelengths(inst, prov)
    assert notes and assignment.unassigned == [2, 3]


# --- alpha finalization ------------------------------------------------------------------


def test_alpha_scaling_arithmetic():
    inst = make_instance(2, 1, 2.0, const(1.0), const(0.5), const(0.5), const(0.2))
    plan = alpha_finalize(inst, Assignment({1: 1, 2: 1}), {1: 1.0, 2: 1.0})
    assert plan.visit_of == pytest.approx({1: 0.8, 2: 0.8})
    plan = alpha_finalize(inst, Assignment({1: 1, 2: 1}), {1: 0.6, 2: 1.0})
    assert plan.visit_of == pytest.approx({1: 0.6, 2: 1.0})


def test_alpha_never_beats_two(tables):
    for t in ("I", "II", "III", "IV", "V", "VI", "VII"):
        inst = tables[t]
        two = heuristic_solve(inst, "two")
        alpha = heuristic_solve(inst, "alpha")
        assert alpha.total_revenue <= two.total_revenue + 1e-9


def test_alpha_on_fixed_assignment_is_dominated():
    rng = np.random.default_rng(4)
    for _ in range(50):
        inst = make_instance(5, 2, 2.0, lambda i: rng.uniform(0, 8), lambda i: rng.uniform(0.05, 1),
                             lambda i: rng.uniform(0.05, 1), lambda i: rng.uniform(0, 0.2))
        wl = {i: 1 + (i % 2) for i in inst.ids}
        assignment = Assignment(wl)
        prov = {i: rng.uniform(0.1, 1.0) for i in inst.ids}
        alpha_rev = evaluate(inst, assignment, alpha_finalize(inst, assignment, prov)).total_revenue
        two = {}
        for members in assignment.groups().values():
            two.update(solve_two(inst, members))
        from wdm_revenue.heuristic import VisitPlan

        two_rev = evaluate(inst, assignment, VisitPlan(two)).total_revenue
        assert alpha_rev <= two_rev + 1e-9


def test_alpha_degenerate():
    inst = make_instance(2, 1, 1.0, const(1.0), const(0.5), const(0.5), const(0.6))
    with pytest.warns(DegenerateBudgetWarning):
        plan = alpha_finalize(inst, Assignment({1: 1, 2: 1}), {1: 0.2, 2: 0.2})
    assert plan.visit_of == {1: 0.0, 2: 0.0}


# --- assignment type ----------------------------------------------------------------------


def test_assignment_invariants():
    with pytest.raises(ValueError):
        Assignment({1: 1, 2: 1}, sole={1})
    with pytest.raises(ValueError):
        Assignment({1: 0}, sole={1})
    with pytest.raises(ValueError):
        Assignment({1: -1})
    a = Assignment({1: 3, 2: 3, 3: 1, 4: 0})
    assert a.canonical().wavelength_of == {1: 1, 2: 1, 3: 2, 4: 0}
    with pytest.raises(ValueError):
        a.check(2)
