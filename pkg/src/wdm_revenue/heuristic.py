"""Three-step wavelength assignment and visit-period allocation.

1. Pool all wavelengths into one server with frame ``K*C`` and allocate visit
   periods (problem ONE). Stations that saturate their bound get a wavelength
   of their own; stations allocated nothing are left unserved.
2. Spread the remaining stations over the free wavelengths with the Longest
   Processing Time first rule on the loads ``S_i + V_i``.
3. Re-allocate visit periods within every wavelength (problem TWO).

A station that TWO leaves with a zero visit is skipped by its wavelength, so
its switchover is not spent; the wavelength's budget is recomputed without it
and TWO is solved again.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .allocator import compute_envelope, solve_groups
from .model import Instance, RevenueObjective

P_TOL = 1e-6
Q_TOL = 1e-6
ZERO_VISIT = 1e-12


class InfeasibleInstanceError(ValueError):
    """The instance cannot be served within its frame structure."""


class DegenerateBudgetWarning(UserWarning):
    """Switchover times on a wavelength use up the whole frame."""


# ---------------------------------------------------------------------------
# Result types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Assignment:
    """Station -> wavelength map; wavelength 0 means unserved.

    ``sole`` holds the stations that occupy a wavelength alone and are
    therefore visited for the whole frame without switchover.
    """

    wavelength_of: Mapping[int, int]
    sole: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "wavelength_of", dict(self.wavelength_of))
        object.__setattr__(self, "sole", frozenset(self.sole))
        for sid, k in self.wavelength_of.items():
            if k < 0:
                raise ValueError(f"station {sid}: negative wavelength {k}")
        groups = self.groups()
        for sid in self.sole:
            k = self.wavelength_of.get(sid, 0)
            if k == 0:
                raise ValueError(f"sole station {sid} is not assigned")
            if groups[k] != [sid]:
                raise ValueError(f"wavelength {k} hosts a sole station and others: {groups[k]}")

    def groups(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for sid, k in self.wavelength_of.items():
            if k:
                out.setdefault(k, []).append(sid)
        return {k: sorted(v) for k, v in sorted(out.items())}

    @property
    def unassigned(self) -> list[int]:
        return sorted(s for s, k in self.wavelength_of.items() if k == 0)

    def canonical(self) -> "Assignment":
        """Renumber wavelengths 1, 2, ... in order of their smallest station id."""
        groups = sorted(self.groups().values(), key=lambda g: g[0])
        relabel = {sid: 0 for sid in self.wavelength_of}
        for k, members in enumerate(groups, start=1):
            for sid in members:
                relabel[sid] = k
        return Assignment(relabel, self.sole)

    def label(self, ids: Sequence[int]) -> tuple[int, ...]:
        return tuple(self.wavelength_of[i] for i in ids)

    def partition(self) -> frozenset:
        return frozenset(frozenset(g) for g in self.groups().values())

    def check(self, wavelengths: int) -> None:
        used = self.groups()
        if any(k > wavelengths for k in used):
            raise ValueError(f"assignment uses a wavelength above {wavelengths}")


@dataclass(frozen=True)
class VisitPlan:
    visit_of: Mapping[int, float]
    provisional: Mapping[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class SolveResult:
    assignment: Assignment
    plan: VisitPlan
    total_revenue: float
    per_station: Mapping[int, float]
    served_count: int
    net_per_station: Mapping[int, float] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    @property
    def net_revenue(self) -> float:
        return math.fsum(self.net_per_station.values())


# ---------------------------------------------------------------------------
# Per-instance numerical data
# ---------------------------------------------------------------------------


class Prepared:
    """Objective, bounds and concave envelopes of all stations of an instance."""

    def __init__(self, instance: Instance):
        self.instance = instance
        self.c = float(instance.frame_time)
        self.ids = np.array(instance.ids, dtype=int)
        self.pos = {sid: i for i, sid in enumerate(instance.ids)}
        self.switchover = np.array([s.switchover for s in instance.stations], dtype=float)
        self.theta = np.array([s.theta for s in instance.stations], dtype=float)
        self.upper = self.c - self.switchover
        self.objective = RevenueObjective.for_stations(instance.stations, self.c)
        self.envelope = compute_envelope(self.objective, self.upper)

    def revenue(self, pos, visits) -> np.ndarray:
        pos = np.asarray(pos, dtype=int)
        return self.objective.take(pos).value(np.clip(np.asarray(visits, dtype=float), 0.0, self.c))


@functools.lru_cache(maxsize=128)
def prepare(instance: Instance) -> Prepared:
    return Prepared(instance)


def two_flat(prep: Prepared, pos, gid, n_groups: int):
    """Solve TWO for many wavelengths at once.

    ``pos[j]`` is the station (by position in the instance) of entry ``j`` and
    ``gid[j]`` its wavelength group. Returns the visit of every entry and a
    per-group flag for groups whose switchover exhausts the frame.
    """
    pos = np.asarray(pos, dtype=int)
    gid = np.asarray(gid, dtype=int)
    c = prep.c
    visits = np.zeros(len(pos))
    degenerate = np.zeros(n_groups, dtype=bool)
    active = np.ones(len(pos), dtype=bool)
    pending = np.ones(n_groups, dtype=bool)
    s = prep.switchover[pos]
    for _ in range(len(pos) + 1):
        counts = np.bincount(gid[active], minlength=n_groups)
        single = pending & (counts == 1)
        if np.any(single):
            m = active & single[gid]
            visits[m] = c
        pending &= counts >= 2
        budget = c - np.bincount(gid[active], weights=s[active], minlength=n_groups)
        dead = pending & (budget <= 0)
        if np.any(dead):
            visits[dead[gid]] = 0.0
            degenerate |= dead
            pending &= ~dead
        if not np.any(pending):
            break
        idx = np.flatnonzero(active & pending[gid])
        gids = np.flatnonzero(pending)
        remap = -np.ones(n_groups, dtype=int)
        remap[gids] = np.arange(gids.size)
        sub_pos = pos[idx]
        x, _ = solve_groups(
            prep.objective.take(sub_pos),
            prep.envelope.take(sub_pos),
            remap[gid[idx]],
            budget[gids],
        )
        visits[idx] = x
        zero = x <= ZERO_VISIT * c
        visits[idx[zero]] = 0.0
        if not np.any(zero):
            break
        active[idx[zero]] = False
        changed = np.zeros(n_groups, dtype=bool)
        changed[gid[idx[zero]]] = True
        pending &= changed
    return visits, degenerate


# ---------------------------------------------------------------------------
# The three steps
# ---------------------------------------------------------------------------


def solve_one(instance: Instance) -> dict[int, float]:
    """Provisional visits for one pooled server with frame ``K*C``."""
    prep = prepare(instance)
    budget = instance.wavelengths * prep.c - float(np.sum(prep.switchover))
    if budget < 0:
        raise InfeasibleInstanceError(
            f"switchover total {np.sum(prep.switchover):g} exceeds pooled capacity "
            f"{instance.wavelengths * prep.c:g}"
        )
    x, _ = solve_groups(prep.objective, prep.envelope, np.zeros(instance.n, dtype=int), [budget], rounding=False)
    return {int(sid): float(v) for sid, v in zip(prep.ids, x)}


def partition(instance: Instance, provisional: Mapping[int, float]):
    """Split stations into whole-wavelength (P), unserved (Q) and the rest.

    The rest is ordered by ``S_i + V_i`` descending, ties by station id.
    """
    c = instance.frame_time
    eps_p = P_TOL * c
    eps_q = Q_TOL * c
    sole, unserved, rest = set(), set(), []
    for st in instance.stations:
        v = provisional[st.station_id]
        if v >= c - st.switchover - eps_p:
            sole.add(st.station_id)
        elif v <= eps_q:
            unserved.add(st.station_id)
        else:
            rest.append(st)
    if len(sole) > instance.wavelengths:
        raise InfeasibleInstanceError(
            f"{len(sole)} stations need a whole wavelength but only {instance.wavelengths} exist"
        )
    rest.sort(key=lambda st: (-(st.switchover + provisional[st.station_id]), st.station_id))
    return sole, unserved, [st.station_id for st in rest]


def lpt_assign(values: Sequence[tuple[int, float]], m: int) -> dict[int, list[int]]:
    """Longest Processing Time first.

    ``values`` are ``(item, load)`` pairs sorted by load descending. The first
    ``m`` items open wavelengths 1..m; every later item joins the wavelength
    with the smallest load so far (lowest index on ties).
    """
    if m < 1:
        if values:
            raise ValueError("no wavelength left for the remaining stations")
        return {}
    loads = [0.0] * m
    out: dict[int, list[int]] = {k: [] for k in range(1, m + 1)}
    for j, (item, load) in enumerate(values):
        k = j if j < m else min(range(m), key=lambda w: (loads[w], w))
        out[k + 1].append(item)
        loads[k] += load
    return out


def solve_two(instance: Instance, stations: Iterable[int]) -> dict[int, float]:
    """Visit periods for the stations sharing one wavelength.

    A station alone on its wavelength is visited for the whole frame.
    """
    members = list(stations)
    if not members:
        raise ValueError("wavelength set must not be empty")
    prep = prepare(instance)
    pos = [prep.pos[s] for s in members]
    visits, degenerate = two_flat(prep, pos, np.zeros(len(pos), dtype=int), 1)
    if degenerate[0]:
        warnings.warn(
            f"switchover of stations {sorted(members)} exhausts the frame; all visits set to 0",
            DegenerateBudgetWarning,
            stacklevel=2,
        )
    return {s: float(v) for s, v in zip(members, visits)}


def alpha_finalize(instance: Instance, assignment: Assignment, provisional: Mapping[int, float]) -> VisitPlan:
    """Scale the provisional visits of each wavelength to fill its frame exactly."""
    c = instance.frame_time
    visits = {sid: 0.0 for sid in instance.ids}
    for k, members in assignment.groups().items():
        if len(members) == 1:
            visits[members[0]] = c
            continue
        room = c - math.fsum(instance.station(s).switchover for s in members)
        total = math.fsum(provisional[s] for s in members)
        if room < 0:
            warnings.warn(
                f"wavelength {k}: switchover exceeds the frame; visits set to 0",
                DegenerateBudgetWarning,
                stacklevel=2,
            )
            continue
        if total <= 0:
            continue
        alpha = room / total
        for s in members:
            visits[s] = alpha * provisional[s]
    return VisitPlan(visits, dict(provisional))


def assign_wavelengths(instance: Instance, provisional: Mapping[int, float]) -> tuple[Assignment, list[str]]:
    """Steps 1-2: wavelength of every station before visit periods are fixed.

    Whole-wavelength stations take the highest-numbered wavelengths and the
    rest are spread over the others by LPT.
    """
    notes = []
    sole, unserved, rest = partition(instance, provisional)
    free = instance.wavelengths - len(sole)
    if free == 0 and rest:
        notes.append(
            f"no wavelength left after whole-wavelength stations; stations {sorted(rest)} left unserved"
        )
        unserved |= set(rest)
        rest = []
    wl = {sid: 0 for sid in instance.ids}
    loads = [(sid, instance.station(sid).switchover + provisional[sid]) for sid in rest]
    for k, members in lpt_assign(loads, free).items():
        for sid in members:
            wl[sid] = k
    for j, sid in enumerate(sorted(sole)):
        wl[sid] = free + 1 + j
    groups: dict[int, list[int]] = {}
    for sid, k in wl.items():
        if k:
            groups.setdefault(k, []).append(sid)
    alone = {g[0] for g in groups.values() if len(g) == 1}
    return Assignment(wl, alone), notes


def _effective(instance: Instance, assignment: Assignment, visits: Mapping[int, float]) -> Assignment:
    """Drop zero-visit stations from their wavelength and renumber canonically."""
    wl = {sid: (k if visits[sid] > 0 else 0) for sid, k in assignment.wavelength_of.items()}
    groups: dict[int, list[int]] = {}
    for sid, k in wl.items():
        if k:
            groups.setdefault(k, []).append(sid)
    alone = {g[0] for g in groups.values() if len(g) == 1}
    return Assignment(wl, alone).canonical()


def _finalize_two(instance: Instance, assignment: Assignment) -> tuple[dict[int, float], list[str]]:
    prep = prepare(instance)
    groups = assignment.groups()
    pos, gid = [], []
    keys = list(groups)
    for g, k in enumerate(keys):
        for sid in groups[k]:
            pos.append(prep.pos[sid])
            gid.append(g)
    visits = {sid: 0.0 for sid in instance.ids}
    notes = []
    if pos:
        x, degenerate = two_flat(prep, pos, gid, len(keys))
        for p, v in zip(pos, x):
            visits[int(prep.ids[p])] = float(v)
        for g in np.flatnonzero(degenerate):
            notes.append(f"wavelength {keys[g]}: switchover exhausts the frame; visits set to 0")
    return visits, notes


def evaluate(instance: Instance, assignment: Assignment, plan: VisitPlan, notes=()) -> SolveResult:
    prep = prepare(instance)
    order = list(instance.ids)
    v = np.array([plan.visit_of[s] for s in order])
    rev = prep.revenue(np.arange(len(order)), v)
    per = {s: float(r) for s, r in zip(order, rev)}
    net = {s: float(r) - prep.c * float(t) for s, r, t in zip(order, rev, prep.theta)}
    return SolveResult(
        assignment=assignment,
        plan=plan,
        total_revenue=math.fsum(per.values()),
        per_station=per,
        served_count=int(np.sum(v > 0)),
        net_per_station=net,
        warnings=tuple(notes),
    )


def heuristic_solve(instance: Instance, finalization: str = "two") -> SolveResult:
    """Run the three-step procedure; ``finalization`` is ``"two"`` or ``"alpha"``."""
    if finalization not in ("two", "alpha"):
        raise ValueError(f"unknown finalization {finalization!r}")
    provisional = solve_one(instance)
    step2, notes = assign_wavelengths(instance, provisional)
    if finalization == "two":
        visits, more = _finalize_two(instance, step2)
        notes += more
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            visits = dict(alpha_finalize(instance, step2, provisional).visit_of)
        notes += [str(w.message) for w in caught]
    assignment = _effective(instance, step2, visits)
    plan = VisitPlan(visits, provisional)
    return evaluate(instance, assignment, plan, notes)
