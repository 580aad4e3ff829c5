"""Exhaustive enumeration, random-assignment baselines and wavelength sweeps."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .heuristic import SolveResult, heuristic_solve, prepare, two_flat
from .model import Instance

MAX_STATIONS = 12
MAX_ASSIGNMENTS = 10**7
CHUNK = 4096


class EnumerationTooLarge(ValueError):
    def __init__(self, count: int, n: int):
        self.count = count
        super().__init__(f"{count} assignments for {n} stations exceeds the enumeration limit")


@dataclass(frozen=True)
class EnumerationRow:
    label: tuple[int, ...]
    visits: tuple[float, ...]
    revenue: float

    @property
    def full(self) -> bool:
        """True when every station has a wavelength."""
        return all(self.label)


@dataclass(frozen=True)
class EnumerationReport:
    ids: tuple[int, ...]
    rows: tuple[EnumerationRow, ...]
    heuristic: SolveResult

    @property
    def optimum(self) -> EnumerationRow:
        return self.rows[0]

    @property
    def heuristic_gap(self) -> float:
        return self.optimum.revenue - self.heuristic.total_revenue


@dataclass(frozen=True)
class BaselineStats:
    trials: int
    maximum: float
    average: float
    minimum: float
    percent_above: float
    mode: str
    seed: int
    heuristic_revenue: float


@dataclass(frozen=True)
class SweepRow:
    wavelengths: int
    revenue: float
    served: int


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


def _stirling2(n: int, k: int) -> int:
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    row = [1] + [0] * k
    for i in range(1, n + 1):
        for j in range(min(i, k), 0, -1):
            row[j] = j * row[j] + row[j - 1]
        row[0] = 0
    return row[k]


def count_assignments(n: int, k: int, allow_unassigned: bool = False, all_wavelengths: bool = True) -> int:
    """Number of assignments :func:`enumerate_assignments` yields."""

    def full(m: int) -> int:
        if m == 0:
            return 1
        if all_wavelengths:
            return _stirling2(m, min(k, m))
        return sum(_stirling2(m, g) for g in range(1, min(k, m) + 1))

    if not allow_unassigned:
        return full(n)
    return sum(math.comb(n, m) * full(m) for m in range(n + 1))


def enumerate_assignments(
    n: int, k: int, allow_unassigned: bool = False, all_wavelengths: bool = True
) -> Iterator[tuple[int, ...]]:
    """Yield every assignment of ``n`` stations to ``k`` wavelengths once, up to relabelling.

    Labels are restricted growth strings: wavelength numbers appear in order
    of first use and 0 marks an unserved station. With ``all_wavelengths``
    the assigned stations occupy exactly ``min(k, #assigned)`` wavelengths;
    leaving a wavelength idle while another carries two stations is never
    better, since splitting one off gives it the whole frame.
    """
    if n < 1 or k < 1:
        raise ValueError("n and k must be positive")
    count = count_assignments(n, k, allow_unassigned, all_wavelengths)
    if n > MAX_STATIONS or count > MAX_ASSIGNMENTS:
        raise EnumerationTooLarge(count, n)
    label = [0] * n

    def rec(i: int, groups: int, assigned: int):
        if i == n:
            if not all_wavelengths or groups == min(k, assigned):
                yield tuple(label)
            return
        left = n - i
        if all_wavelengths and assigned > groups and k - groups > left:
            return
        if allow_unassigned:
            label[i] = 0
            yield from rec(i + 1, groups, assigned)
        for g in range(1, groups + 1):
            label[i] = g
            yield from rec(i + 1, groups, assigned + 1)
        if groups < k:
            label[i] = groups + 1
            yield from rec(i + 1, groups + 1, assigned + 1)
        label[i] = 0

    yield from rec(0, 0, 0)


def evaluate_labels(instance: Instance, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run TWO on every wavelength of every labelled assignment.

    ``labels`` has one row per assignment and one column per station (0 =
    unserved). Returns ``(visits, revenue)`` with visits shaped like
    ``labels``.
    """
    prep = prepare(instance)
    labels = np.asarray(labels, dtype=int)
    rows, n = labels.shape
    visits = np.zeros((rows, n))
    kmax = int(labels.max(initial=0)) + 1
    r_idx, pos = np.nonzero(labels)
    if r_idx.size:
        key = r_idx * kmax + labels[r_idx, pos]
        uniq, gid = np.unique(key, return_inverse=True)
        x, _ = two_flat(prep, pos, gid, uniq.size)
        visits[r_idx, pos] = x
    revenue = prep.objective.value(np.clip(visits.T, 0.0, prep.c)).T.sum(axis=1)
    return visits, revenue


def brute_force_solve(instance: Instance, allow_unassigned: bool = True) -> EnumerationReport:
    """Evaluate every canonical assignment; rows sorted by revenue, best first."""
    n, k = instance.n, instance.wavelengths
    labels = list(enumerate_assignments(n, k, allow_unassigned))
    rows: list[EnumerationRow] = []
    for start in range(0, len(labels), CHUNK):
        block = np.array(labels[start : start + CHUNK], dtype=int)
        visits, revenue = evaluate_labels(instance, block)
        for lab, v, r in zip(block, visits, revenue):
            rows.append(EnumerationRow(tuple(int(x) for x in lab), tuple(float(x) for x in v), float(r)))
    rows.sort(key=lambda row: (-row.revenue, row.label))
    return EnumerationReport(tuple(instance.ids), tuple(rows), heuristic_solve(instance))


# ---------------------------------------------------------------------------
# Random baselines
# ---------------------------------------------------------------------------


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent generator for one trial; the stream does not depend on threading."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(trial,))))


def random_labels(n: int, k: int, mode: str, seed: int, trials: Sequence[int]) -> np.ndarray:
    """Random wavelength labels (1..k) for the given trial numbers.

    ``capped`` deals a random permutation round-robin, so every wavelength
    gets at most ``ceil(n/k)`` stations; ``uncapped`` draws each station's
    wavelength independently and uniformly.
    """
    out = np.empty((len(trials), n), dtype=int)
    slots = np.arange(n) % k + 1
    for row, t in enumerate(trials):
        rng = trial_rng(seed, t)
        if mode == "capped":
            out[row, rng.permutation(n)] = slots
        elif mode == "uncapped":
            out[row] = rng.integers(1, k + 1, size=n)
        else:
            raise ValueError(f"unknown mode {mode!r}")
    return out


def random_revenues(instance: Instance, mode: str, trials: int, seed: int, threads: int = 1) -> np.ndarray:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if mode not in ("capped", "uncapped"):
        raise ValueError(f"unknown mode {mode!r}")
    prepare(instance)
    chunks = [range(s, min(s + CHUNK, trials)) for s in range(0, trials, CHUNK)]

    def run(chunk):
        labels = random_labels(instance.n, instance.wavelengths, mode, seed, chunk)
        return evaluate_labels(instance, labels)[1]

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    return np.concatenate(parts)


def random_baseline(
    instance: Instance, mode: str = "capped", trials: int = 10000, seed: int = 0, threads: int = 1
) -> BaselineStats:
    revenues = random_revenues(instance, mode, trials, seed, threads)
    ref = heuristic_solve(instance).total_revenue
    above = revenues > ref + 1e-9 * max(1.0, abs(ref))
    return BaselineStats(
        trials=trials,
        maximum=float(np.max(revenues)),
        average=float(np.mean(revenues)),
        minimum=float(np.min(revenues)),
        percent_above=100.0 * float(np.mean(above)),
        mode=mode,
        seed=seed,
        heuristic_revenue=ref,
    )


# ---------------------------------------------------------------------------
# Wavelength sweep
# ---------------------------------------------------------------------------


def sweep_wavelengths(base: Instance, k_values: Sequence[int]) -> list[SweepRow]:
    if not k_values:
        raise ValueError("k_values must not be empty")
    rows = []
    for k in k_values:
        if k < 1:
            raise ValueError(f"wavelength count must be >= 1, got {k}")
        res = heuristic_solve(base.with_wavelengths(int(k)))
        rows.append(SweepRow(int(k), res.total_revenue, res.served_count))
    return rows
