"""Reference values of the worked examples and checks against them.

Each ``check_*`` function recomputes one published table from its bundled
instance file and returns :class:`Check` rows (reference, computed,
tolerance, verdict). Visit and revenue references are printed with two
decimals, which sets the tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exact import brute_force_solve, random_baseline, sweep_wavelengths
from .heuristic import SolveResult, heuristic_solve
from .instances import load_table
from .model import Instance

# Enumeration rows: canonical label -> revenue.
TABLE_I_ROWS = {(1, 1, 2): 10.11, (1, 2, 1): 9.81, (1, 2, 2): 8.65}
TABLE_I_VISITS = (0.48, 1.12, 2.00)
TABLE_II_ROWS = {
    (1, 1, 1, 2): 14.65,
    (1, 2, 2, 1): 14.25,
    (1, 1, 2, 1): 14.22,
    (1, 2, 1, 2): 14.03,
    (1, 1, 2, 2): 13.34,
    (1, 2, 1, 1): 13.23,
    (1, 2, 2, 2): 11.23,
}
TABLE_II_BEST = 14.65
TABLE_II_VISITS = (0.00, 0.61, 0.99, 2.00)

ALGORITHM = {"III": 474.51, "IV": 385.65, "V": 413.19, "VI": 398.81, "VII": 359.93}

# mode -> (maximum, average, minimum, percent above)
BASELINES = {
    "III": {"capped": (475.72, 468.89, 454.24, 1.46), "uncapped": (475.50, 441.36, 300.33, 0.24)},
    "IV": {"capped": (387.29, 384.58, 381.94, 9.89), "uncapped": (387.14, 358.36, 224.93, 0.87)},
    "V": {"capped": (413.19, 413.15, 412.98, 0.00), "uncapped": (413.19, 377.54, 231.52, 0.00)},
    "VI": {"capped": (398.81, 398.06, 395.60, 0.05), "uncapped": (398.79, 351.53, 181.94, 0.00)},
    "VII": {"capped": (360.85, 355.23, 338.07, 4.56), "uncapped": (360.83, 338.14, 231.45, 0.62)},
}

SWEEP = {
    1: (170.54, 3),
    2: (322.62, 8),
    3: (400.97, 11),
    4: (452.88, 13),
    5: (480.40, 14),
    6: (499.60, 14),
    7: (517.23, 15),
    8: (525.21, 15),
    16: (544.00, 16),
}

# Per-station (wavelength, visit, revenue) for the three columns of the
# allocation table; wavelength labels are the published ones.
ALLOCATION = {
    "III": [
        (0, 0.00, 0.00), (0, 0.00, 0.00), (3, 0.93, 6.54), (4, 1.22, 10.68),
        (4, 1.45, 14.89), (3, 1.67, 19.27), (2, 2.16, 24.96), (1, 2.25, 28.90),
        (1, 2.34, 32.89), (2, 2.46, 37.00), (3, 2.20, 39.45), (4, 2.23, 43.23),
        (4, 2.30, 47.24), (3, 2.40, 51.49), (2, 2.78, 57.03), (1, 2.81, 60.94),
    ],
    "IV": [
        (0, 0.00, 0.00), (1, 3.35, 26.05), (2, 2.33, 22.33), (3, 2.18, 23.09),
        (4, 2.07, 23.83), (4, 1.97, 24.37), (3, 1.88, 24.80), (2, 1.83, 25.30),
        (1, 2.16, 28.02), (4, 1.69, 25.85), (3, 1.64, 26.09), (2, 1.60, 26.42),
        (1, 1.89, 28.59), (3, 1.50, 26.76), (4, 1.47, 26.96), (2, 1.44, 27.19),
    ],
    "V": [
        (3, 1.85, 22.76), (4, 1.86, 23.36), (2, 1.87, 23.94), (1, 1.87, 24.48),
        (3, 1.86, 24.90), (4, 1.85, 25.29), (2, 1.84, 25.66), (1, 1.83, 26.01),
        (1, 1.82, 26.32), (3, 1.80, 26.56), (2, 1.78, 26.81), (4, 1.76, 27.03),
        (4, 1.73, 27.23), (2, 1.71, 27.43), (3, 1.69, 27.62), (1, 1.68, 27.79),
    ],
}
ALLOCATION_TOTALS = {"III": (29.20, 474.51), "IV": (29.00, 385.65), "V": (28.80, 413.19)}

PRINT_TOL = 0.01
HEURISTIC_TOL = 0.5
SWEEP_REL = 0.01
AVERAGE_REL = 0.01
EXTREME_REL = 0.02
STATION_VISIT_TOL = 0.02
STATION_REVENUE_TOL = 0.1

NOT_REPRODUCIBLE = "not reproducible: unseeded random instance"


@dataclass(frozen=True)
class Check:
    table: str
    item: str
    reference: float | None
    computed: float
    tolerance: str
    passed: bool | None

    @property
    def verdict(self) -> str:
        return {True: "PASS", False: "FAIL", None: "INFO"}[self.passed]


def _abs(table, item, ref, got, tol) -> Check:
    return Check(table, item, ref, float(got), f"+-{tol:g}", bool(abs(got - ref) <= tol))


def _rel(table, item, ref, got, rel) -> Check:
    return Check(table, item, ref, float(got), f"+-{100 * rel:g}%", bool(abs(got - ref) <= rel * abs(ref)))


def _exact(table, item, ref, got) -> Check:
    return Check(table, item, float(ref), float(got), "exact", bool(ref == got))


def wavelength_loads(instance: Instance, result: SolveResult) -> dict[int, float]:
    """Per wavelength, the switchovers plus visits of its served stations.

    A station alone on its wavelength has no switchover.
    """
    loads = {}
    for k, members in result.assignment.groups().items():
        served = [s for s in members if result.plan.visit_of[s] > 0]
        v = sum(result.plan.visit_of[s] for s in served)
        if len(served) > 1:
            v += sum(instance.station(s).switchover for s in served)
        loads[k] = v
    return loads


def check_enumeration(table: str) -> list[Check]:
    inst = load_table(table)
    report = brute_force_solve(inst)
    got = {row.label: row.revenue for row in report.rows if row.full}
    refs = TABLE_I_ROWS if table == "I" else TABLE_II_ROWS
    out = [_abs(table, f"row {list(lab)}", ref, got[lab], PRINT_TOL) for lab, ref in refs.items()]
    h = report.heuristic
    best = TABLE_I_ROWS[(1, 1, 2)] if table == "I" else TABLE_II_BEST
    out.append(_abs(table, "heuristic revenue", best, h.total_revenue, PRINT_TOL))
    out.append(_abs(table, "optimum revenue", best, report.optimum.revenue, PRINT_TOL))
    visits = TABLE_I_VISITS if table == "I" else TABLE_II_VISITS
    for sid, ref in zip(inst.ids, visits):
        out.append(_abs(table, f"visit station {sid}", ref, h.plan.visit_of[sid], PRINT_TOL))
    if table == "II":
        worst = min(r.revenue for r in report.rows if r.full)
        out.append(_abs(table, "worst full assignment", 11.23, worst, PRINT_TOL))
    return out


def check_heuristic_table(table: str, trials: int, seed: int, threads: int = 1) -> list[Check]:
    inst = load_table(table)
    res = heuristic_solve(inst)
    out = [_abs(table, "algorithm revenue", ALGORITHM[table], res.total_revenue, HEURISTIC_TOL)]
    for mode, (mx, avg, mn, pct) in BASELINES[table].items():
        b = random_baseline(inst, mode, trials, seed, threads)
        out.append(_rel(table, f"{mode} average", avg, b.average, AVERAGE_REL))
        if mode == "capped":
            out.append(_rel(table, f"{mode} maximum", mx, b.maximum, EXTREME_REL))
            out.append(_rel(table, f"{mode} minimum", mn, b.minimum, EXTREME_REL))
        else:
            # the uncapped minimum is a far tail and swings with the seed
            out.append(Check(table, f"{mode} maximum", mx, b.maximum, "info", None))
            out.append(Check(table, f"{mode} minimum", mn, b.minimum, "info", None))
        out.append(Check(table, f"{mode} percent above", pct, b.percent_above, "info", None))
    return out


def check_allocation_table() -> list[Check]:
    out = []
    for table, rows in ALLOCATION.items():
        inst = load_table(table)
        res = heuristic_solve(inst)
        published_groups: dict[int, set] = {}
        for sid, (k, _, _) in zip(inst.ids, rows):
            if k:
                published_groups.setdefault(k, set()).add(sid)
        same = {frozenset(g) for g in published_groups.values()} == res.assignment.partition()
        out.append(Check(table, "wavelength groups", None, float(same), "same partition", same))
        for sid, (_, v, r) in zip(inst.ids, rows):
            out.append(_abs(table, f"visit station {sid}", v, res.plan.visit_of[sid], STATION_VISIT_TOL))
            out.append(_abs(table, f"revenue station {sid}", r, res.per_station[sid], STATION_REVENUE_TOL))
        tv, tr = ALLOCATION_TOTALS[table]
        out.append(_abs(table, "total visit", tv, sum(res.plan.visit_of.values()), PRINT_TOL))
        out.append(_abs(table, "total revenue", tr, res.total_revenue, HEURISTIC_TOL))
        loads = wavelength_loads(inst, res)
        worst = max(abs(v - inst.frame_time) for v in loads.values())
        out.append(Check(table, "max |frame load - C|", 0.0, worst, "1e-06", bool(worst <= 1e-6)))
    return out


def check_sweep() -> list[Check]:
    base = load_table("IX")
    rows = sweep_wavelengths(base, list(SWEEP))
    out = []
    for row in rows:
        rev, served = SWEEP[row.wavelengths]
        out.append(_rel("IX", f"K={row.wavelengths} revenue", rev, row.revenue, SWEEP_REL))
        out.append(_exact("IX", f"K={row.wavelengths} served", served, row.served))
    bound = base.frame_time * sum(s.gamma for s in base.stations)
    last = rows[-1].revenue
    out.append(Check("IX", "K=16 revenue vs C*sum(Gamma)", bound, last, "1e-06", bool(abs(last - bound) <= 1e-6)))
    return out


def check_random_table(trials: int, seed: int, threads: int = 1, draws: int = 20) -> list[Check]:
    """Qualitative stand-in for the random-parameter table.

    The published instance was drawn without a recorded seed, so its numbers
    cannot be recomputed. Instead, fresh seeded instances from the same
    distributions are drawn and the heuristic is compared with the capped
    random average on each.
    """
    out = [Check("VII", NOT_REPRODUCIBLE, None, float("nan"), "n/a", None)]
    wins = 0
    for d in range(draws):
        inst = random_table_instance(seed + d)
        b = random_baseline(inst, "capped", trials, seed, threads)
        wins += b.heuristic_revenue >= b.average
    need = int(np.ceil(0.9 * draws))
    out.append(
        Check("VII", f"draws with heuristic >= capped average (of {draws})", float(need), float(wins),
              f">= {need}", wins >= need)
    )
    return out


def random_table_instance(seed: int) -> Instance:
    """A fresh draw of the random-parameter setup (N=16, K=4, C=8)."""
    from .instances import instance_from_dict

    doc = {
        "frame_time": 8,
        "wavelengths": 4,
        "generator": {
            "count": 16,
            "seed": int(seed),
            "gamma": {"kind": "uniform", "low": 0, "high": 8},
            "nu": {"kind": "uniform", "low": 0, "high": 1},
            "mu": {"kind": "uniform", "low": 0, "high": 1},
            "switchover": {"kind": "uniform", "low": 0, "high": 0.4},
        },
    }
    return instance_from_dict(doc, warn=False)


REPRODUCIBLE = ("I", "II", "III", "IV", "V", "VI", "VIII", "IX")


def reproduce(table: str, trials: int = 10000, seed: int = 1, threads: int = 1) -> list[Check]:
    """Run the checks for one table id (I..IX, VIII included)."""
    tid = table.upper()
    runners: dict[str, Callable[[], list[Check]]] = {
        "I": lambda: check_enumeration("I"),
        "II": lambda: check_enumeration("II"),
        "VII": lambda: check_random_table(trials, seed, threads),
        "VIII": check_allocation_table,
        "IX": check_sweep,
    }
    for t in ("III", "IV", "V", "VI"):
        runners[t] = lambda t=t: check_heuristic_table(t, trials, seed, threads)
    if tid not in runners:
        raise KeyError(f"unknown table {table!r}; known: {', '.join(sorted(runners))}")
    return runners[tid]()
