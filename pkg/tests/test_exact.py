import itertools
import warnings

import numpy as np
import pytest

from conftest import const, make_instance
from oracles import brute_labels, canonical_label, m_curve
from wdm_revenue.exact import (
    EnumerationTooLarge,
    brute_force_solve,
    count_assignments,
    enumerate_assignments,
    evaluate_labels,
    random_baseline,
    random_labels,
    random_revenues,
    sweep_wavelengths,
)
from wdm_revenue.heuristic import heuristic_solve, solve_two


# --- enumeration --------------------------------------------------------------------


def test_published_counts():
    assert len(list(enumerate_assignments(3, 2))) == 3
    assert len(list(enumerate_assignments(4, 2))) == 7
    assert list(enumerate_assignments(1, 1)) == [(1,)]


@pytest.mark.parametrize("n,k", [(n, k) for n in range(1, 6) for k in range(1, 4)])
@pytest.mark.parametrize("allow", [False, True])
def test_enumeration_matches_brute_force(n, k, allow):
    got = list(enumerate_assignments(n, k, allow))
    assert len(got) == len(set(got)) == count_assignments(n, k, allow)
    assert set(got) == brute_labels(n, k, allow)
    assert all(canonical_label(g) == g for g in got)


def test_enumeration_guard():
    with pytest.raises(EnumerationTooLarge) as info:
        next(enumerate_assignments(13, 2))
    assert info.value.count > 0
    # with n <= 12 only the variant allowing idle wavelengths exceeds the count limit
    with pytest.raises(EnumerationTooLarge):
        next(enumerate_assignments(12, 6, allow_unassigned=True, all_wavelengths=False))


# --- brute force -----------------------------------------------------------------------


def test_table_one_rows(tables):
    rep = brute_force_solve(tables["I"], allow_unassigned=False)
    got = {r.label: r.revenue for r in rep.rows}
    assert got == pytest.approx({(1, 1, 2): 10.11, (1, 2, 1): 9.81, (1, 2, 2): 8.65}, abs=0.01)
    assert rep.optimum.label == (1, 1, 2)
    assert rep.heuristic_gap == pytest.approx(0.0, abs=1e-9)
    assert [r.revenue for r in rep.rows] == sorted((r.revenue for r in rep.rows), reverse=True)


def test_table_two_rows(tables):
    rep = brute_force_solve(tables["II"])
    assert rep.optimum.revenue == pytest.approx(14.65, abs=0.01)
    assert min(r.revenue for r in rep.rows if r.full) == pytest.approx(11.23, abs=0.01)
    assert abs(rep.heuristic_gap) <= 0.01
    best_full = [r for r in rep.rows if r.full][0]
    assert best_full.label == (1, 1, 1, 2)
    assert best_full.visits[0] == 0.0


def test_row_visits_come_from_two(tables):
    inst = tables["II"]
    for row in brute_force_solve(inst).rows[:10]:
        for k in set(row.label) - {0}:
            members = [sid for sid, lab in zip(inst.ids, row.label) if lab == k]
            ref = solve_two(inst, members)
            for sid in members:
                assert row.visits[sid - 1] == pytest.approx(ref[sid], abs=1e-9)


def test_enough_wavelengths_gives_whole_frames():
    inst = make_instance(3, 3, 2.0, lambda i: float(i), const(0.5), const(0.5), const(0.2))
    rep = brute_force_solve(inst)
    assert rep.optimum.revenue == pytest.approx(2.0 * 6)
    assert rep.optimum.visits == (2.0, 2.0, 2.0)


def test_relabelling_invariance(tables):
    inst = tables["III"]
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 5, size=(100, inst.n))
    _, base = evaluate_labels(inst, labels)
    perm = np.concatenate([[0], rng.permutation(4) + 1])
    _, permuted = evaluate_labels(inst, perm[labels])
    assert permuted == pytest.approx(base, rel=1e-12)


def test_row_revenue_is_sum_of_curves(tables):
    inst = tables["I"]
    for row in brute_force_solve(inst).rows:
        total = sum(float(m_curve(float(i), 0.5, 0.5, 2.0, v)) for i, v in zip((1, 2, 3), row.visits))
        assert row.revenue == pytest.approx(total, rel=1e-12)


def test_oracle_dominates_heuristic_on_small_instances():
    rng = np.random.default_rng(8)
    for _ in range(40):
        n, k = int(rng.integers(1, 6)), int(rng.integers(1, 4))
        inst = make_instance(n, k, float(rng.choice([2.0, 8.0])), lambda i: rng.uniform(0, 8),
                             lambda i: rng.uniform(0.05, 1), lambda i: rng.uniform(0.05, 1),
                             lambda i: rng.uniform(0, 0.4))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = brute_force_solve(inst)
        assert rep.heuristic.total_revenue <= rep.optimum.revenue + 1e-6


# --- baselines -------------------------------------------------------------------------


def test_capped_labels_respect_cap():
    labels = random_labels(10, 4, "capped", 3, range(200))
    for row in labels:
        assert np.bincount(row, minlength=5)[1:].max() <= 3
        assert row.min() >= 1 and row.max() <= 4


def test_uncapped_labels_cover_range():
    labels = random_labels(16, 4, "uncapped", 3, range(500))
    assert set(np.unique(labels)) == {1, 2, 3, 4}
    assert np.bincount(labels.ravel())[1:].min() > 1500


def test_baseline_reproducible_and_thread_independent(tables):
    inst = tables["III"]
    a = random_revenues(inst, "capped", 9000, 5, threads=1)
    b = random_revenues(inst, "capped", 9000, 5, threads=3)
    assert np.array_equal(a, b)
    one = random_baseline(inst, "uncapped", 1, 7)
    assert one == random_baseline(inst, "uncapped", 1, 7)
    assert one.maximum == one.average == one.minimum


def test_baseline_stats_invariants(tables):
    b = random_baseline(tables["III"], "uncapped", 500, 2)
    assert b.minimum <= b.average <= b.maximum
    assert 0 <= b.percent_above <= 100


def test_baseline_argument_errors(tables):
    with pytest.raises(ValueError):
        random_baseline(tables["I"], "capped", 0, 1)
    with pytest.raises(ValueError):
        random_baseline(tables["I"], "sideways", 10, 1)


def test_symmetric_instance_baseline_is_constant():
    inst = make_instance(8, 4, 8.0, const(2.0), const(0.5), const(0.5), const(0.2))
    b = random_baseline(inst, "capped", 200, 1)
    assert b.maximum - b.minimum <= 1e-9
    assert b.percent_above == 0.0


def test_baseline_never_beats_oracle():
    inst = make_instance(5, 2, 2.0, lambda i: float(i), const(0.5), const(0.5), const(0.2))
    opt = brute_force_solve(inst).optimum.revenue
    for mode in ("capped", "uncapped"):
        assert random_baseline(inst, mode, 300, 4).maximum <= opt + 1e-6


# --- sweep -----------------------------------------------------------------------------


def test_sweep_rows(tables):
    rows = sweep_wavelengths(tables["IX"], [1, 2, 16])
    assert [r.wavelengths for r in rows] == [1, 2, 16]
    assert rows[0].revenue == pytest.approx(170.54, rel=0.01) and rows[0].served == 3
    assert rows[1].revenue == pytest.approx(322.62, rel=0.01) and rows[1].served == 8
    assert rows[2].revenue == pytest.approx(544.0, abs=1e-6) and rows[2].served == 16


def test_sweep_monotone_with_shrinking_increments(tables):
    rows = sweep_wavelengths(tables["IX"], list(range(1, 9)))
    rev = [r.revenue for r in rows]
    assert all(b >= a for a, b in zip(rev, rev[1:]))
    inc = np.diff(rev)
    assert all(b <= a + 1e-9 for a, b in zip(inc, inc[1:]))


def test_sweep_errors(tables):
    with pytest.raises(ValueError):
        sweep_wavelengths(tables["IX"], [])
    with pytest.raises(ValueError):
        sweep_wavelengths(tables["IX"], [0])
