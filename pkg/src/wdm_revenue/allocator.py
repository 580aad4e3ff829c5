"""Separable resource allocation by Lagrangian water-filling.

Solves

    max  sum_i f_i(v_i)   s.t.  sum_i v_i = B,  L_i <= v_i <= U_i

for non-decreasing f_i. For concave f_i the KKT conditions say that there is a
multiplier ``eta`` with ``f_i'(v_i) = eta`` for every variable strictly inside
its bounds, ``f_i'(L_i) <= eta`` at the lower bound and ``f_i'(U_i) >= eta`` at
the upper bound. We bisect on ``eta`` (the allocated total is non-increasing in
it) and, for a given ``eta``, invert every derivative with a bracketed Newton
iteration.

Revenue curves of stations with fast-decaying drop probability are convex
near zero. Such an objective is replaced by its concave envelope, which is
linear from 0 up to a tangent point ``t_i`` and coincides with ``f_i`` beyond.
A variable that ends strictly inside its linear piece is then rounded to
either end (``L_i`` or ``t_i``), keeping whichever gives the larger true
objective, and the rest of the group is re-solved.

Everything is vectorised over variables, and :func:`solve_groups` solves many
independent budget groups at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

ENVELOPE_GRID = 1024
MAX_OUTER = 200
OUTER_WIDTH = 1e-12
MAX_INNER = 100
HIT_TOL = 1e-11


class NumericError(ArithmeticError):
    """An objective returned a non-finite value."""

    def __init__(self, index: int, message: str = ""):
        self.index = int(index)
        super().__init__(message or f"objective {index} returned a non-finite value")


class FunctionObjective:
    """Separable objective built from scalar ``(value, derivative)`` callables."""

    def __init__(self, pairs: Sequence[tuple[Callable[[float], float], Callable[[float], float]]]):
        self.pairs = list(pairs)

    def __len__(self):
        return len(self.pairs)

    def take(self, idx):
        return FunctionObjective([self.pairs[i] for i in np.asarray(idx, dtype=int)])

    def _apply(self, which: int, v):
        v = np.asarray(v, dtype=float)
        out = np.empty_like(v)
        for i, pair in enumerate(self.pairs):
            fn = pair[which]
            out[i] = np.vectorize(fn, otypes=[float])(v[i])
        return out

    def value(self, v):
        return self._apply(0, v)

    def derivative(self, v):
        return self._apply(1, v)

    def slopes(self, v):
        v = np.asarray(v, dtype=float)
        h = 1e-6 * np.maximum(1.0, np.abs(v))
        d1 = self.derivative(v)
        d2 = (self.derivative(v + h) - self.derivative(v - h)) / (2 * h)
        return d1, d2


def _slopes(objective, v):
    fn = getattr(objective, "slopes", None)
    if fn is not None:
        return fn(v)
    v = np.asarray(v, dtype=float)
    h = 1e-6 * np.maximum(1.0, np.abs(v))
    return objective.derivative(v), (objective.derivative(v + h) - objective.derivative(v - h)) / (2 * h)


def _check_finite(arr, what: str):
    bad = ~np.isfinite(arr)
    if np.any(bad):
        idx = np.argwhere(bad)[0][0]
        raise NumericError(idx, f"objective {idx} returned a non-finite {what}")


# ---------------------------------------------------------------------------
# Concave envelope
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Envelope:
    """Concave envelope of each objective on ``[0, U_i]``.

    ``tangent[i] = 0`` for concave objectives. Otherwise the envelope is the
    chord from ``(0, f(0))`` to ``(tangent, f(tangent))`` followed by ``f``;
    ``slope`` is the chord slope (equal to ``f'(tangent)`` when the tangent
    point is interior).
    """

    tangent: np.ndarray
    slope: np.ndarray
    upper: np.ndarray

    def take(self, idx) -> "Envelope":
        idx = np.asarray(idx, dtype=int)
        return Envelope(self.tangent[idx], self.slope[idx], self.upper[idx])

    @property
    def concave(self) -> np.ndarray:
        return self.tangent <= 0


def compute_envelope(objective, upper, points: int = ENVELOPE_GRID) -> Envelope:
    upper = np.asarray(upper, dtype=float)
    n = len(upper)
    grid = upper[:, None] * np.linspace(0.0, 1.0, points)[None, :]
    f = objective.value(grid)
    d = objective.derivative(grid)
    _check_finite(f, "value")
    _check_finite(d, "derivative")
    tangent = np.zeros(n)
    slope = d[:, 0].copy()
    scale = 1e-9 * np.maximum(1.0, np.max(np.abs(d), axis=1))
    rising = np.any(np.diff(d, axis=1) > scale[:, None], axis=1) & (upper > 0)
    for i in np.flatnonzero(rising):
        sub = objective.take([i])
        u = upper[i]
        f0 = f[i, 0]
        h = f[i] - f0 - grid[i] * d[i]
        k_peak = int(np.argmax(d[i]))
        above = np.flatnonzero(h[k_peak:] > 0)
        if above.size == 0:
            tangent[i] = u
            slope[i] = (f[i, -1] - f0) / u
            continue
        k = k_peak + int(above[0])
        lo, hi = grid[i, max(k - 1, 0)], grid[i, k]
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            fm = sub.value(np.array([mid]))[0]
            dm = sub.derivative(np.array([mid]))[0]
            if fm - f0 - mid * dm > 0:
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-15 * (1.0 + u):
                break
        t = hi
        tangent[i] = t
        slope[i] = (sub.value(np.array([t]))[0] - f0) / t if t > 0 else d[i, 0]
    return Envelope(tangent, slope, upper.copy())


# ---------------------------------------------------------------------------
# Inverse of the envelope derivative
# ---------------------------------------------------------------------------


class _Inverter:
    """Evaluates ``v_i(eta) = argmax_{L_i<=v<=U_i} fhat_i(v) - eta v`` elementwise."""

    def __init__(self, objective, env: Envelope, lower, upper):
        self.obj = objective
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.t = env.tangent
        self.s = env.slope
        self.chord = (self.t >= self.upper) & (self.t > 0)
        self.lo_c = np.maximum(self.t, self.lower)
        fixed = self.upper <= self.lower
        d_u, _ = _slopes(objective, self.upper)
        d_lo, _ = _slopes(objective, self.lo_c)
        _check_finite(d_u, "derivative")
        _check_finite(d_lo, "derivative")
        self.d_u = d_u
        self.d_lo = d_lo
        self.fixed = fixed
        self.x = 0.5 * (self.lo_c + self.upper)

    def bracket(self):
        """Multipliers at which the total sits at sum(U) and at sum(L)."""
        low = np.where(self.chord, self.s, np.minimum(self.d_u, self.s))
        high = np.where(self.chord, self.s, np.maximum(self.d_lo, self.s))
        pad = 1.0 + 1e-6 * np.maximum(np.abs(low), np.abs(high))
        return low - pad, high + pad

    def __call__(self, eta, idx=None):
        """Values at multipliers ``eta`` for the variables ``idx`` (all by default).

        Also returns ``dv/deta`` for each of them, which is ``1/fhat''`` on a
        curved piece and 0 at bounds and on chords.
        """
        eta = np.asarray(eta, dtype=float)
        if idx is None:
            idx = np.arange(len(self.upper))
        lower, upper = self.lower[idx], self.upper[idx]
        x = np.empty_like(upper)
        dx = np.zeros_like(upper)
        chord = self.chord[idx]
        s = self.s[idx]
        d_u, d_lo, lo_c = self.d_u[idx], self.d_lo[idx], self.lo_c[idx]
        x[chord] = np.where(eta[chord] < s[chord], upper[chord], lower[chord])
        rest = ~chord
        at_upper = rest & (eta <= d_u)
        # eta above the slope at lo_c: either L >= t (so v = L) or the chord is too steep
        at_lower = rest & ~at_upper & (eta > d_lo)
        at_lo_c = rest & ~at_upper & ~at_lower & (eta >= d_lo)
        fixed = self.fixed[idx]
        root = rest & ~at_upper & ~at_lower & ~at_lo_c & ~fixed
        x[at_upper] = upper[at_upper]
        x[at_lower] = lower[at_lower]
        x[at_lo_c] = lo_c[at_lo_c]
        r = np.flatnonzero(root)
        if r.size:
            x[r], d2 = self._newton(idx[r], eta[r])
            with np.errstate(divide="ignore"):
                dx[r] = np.where(d2 < 0, 1.0 / d2, 0.0)
        x[fixed] = lower[fixed]
        self.x[idx] = x
        return x, dx

    def _newton(self, idx, eta):
        sub = self.obj.take(idx)
        lo = self.lo_c[idx].copy()
        hi = self.upper[idx].copy()
        x = np.clip(self.x[idx], lo, hi)
        x = np.where((x > lo) & (x < hi), x, 0.5 * (lo + hi))
        d2 = np.zeros_like(x)
        tol_f = 1e-13 * (1.0 + np.abs(eta))
        tol_x = 1e-14 * (1.0 + hi)
        act = np.arange(len(idx))
        for _ in range(MAX_INNER):
            xa = x[act]
            d1a, d2a = _slopes(sub.take(act) if act.size < len(idx) else sub, xa)
            bad = ~np.isfinite(d1a)
            if np.any(bad):
                raise NumericError(int(idx[act[np.argmax(bad)]]))
            d2[act] = d2a
            f = d1a - eta[act]
            la = np.where(f > 0, xa, lo[act])
            ha = np.where(f <= 0, xa, hi[act])
            lo[act], hi[act] = la, ha
            done = (np.abs(f) <= tol_f[act]) | (ha - la <= tol_x[act])
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(d2a < 0, xa - f / d2a, np.nan)
            ok = (step > la) & (step < ha)
            x[act] = np.where(done, xa, np.where(ok, step, 0.5 * (la + ha)))
            act = act[~done]
            if act.size == 0:
                break
        return x, d2


# ---------------------------------------------------------------------------
# Grouped water-filling
# ---------------------------------------------------------------------------


def _group_sum(values, group, n_groups):
    return np.bincount(group, weights=values, minlength=n_groups)


def _relaxed(objective, env, lower, upper, group, budget, n_groups):
    """Water-filling on the envelopes. Returns (values, eta per group).

    Per group the multiplier is bracketed and the bracket shrunk by a
    safeguarded Newton step on ``sum v(eta) = budget``, falling back to
    bisection whenever the step leaves the bracket or three steps in a row
    fail to halve it. A root sitting on a jump of ``sum v`` cannot be hit
    and is bisected down to the width tolerance.
    The answer interpolates the allocations at the two bracket ends so the
    budget holds exactly.
    """
    inv = _Inverter(objective, env, lower, upper)
    lo_eta, hi_eta = inv.bracket()
    a = np.full(n_groups, np.inf)
    b = np.full(n_groups, -np.inf)
    np.minimum.at(a, group, lo_eta)
    np.maximum.at(b, group, hi_eta)
    va = upper.copy()
    vb = lower.copy()
    sa = _group_sum(va, group, n_groups)
    sb = _group_sum(vb, group, n_groups)
    order = np.argsort(group, kind="stable")
    starts = np.searchsorted(group[order], np.arange(n_groups))
    counts = np.bincount(group, minlength=n_groups)
    guess = 0.5 * (a + b)
    ref_width = b - a
    stall = np.zeros(n_groups, dtype=int)
    for _ in range(MAX_OUTER):
        width = b - a
        open_g = width > OUTER_WIDTH * np.maximum(1.0, np.abs(a) + np.abs(b))
        if not np.any(open_g):
            break
        gids = np.flatnonzero(open_g)
        halved = width <= 0.5 * ref_width
        ref_width = np.where(halved, width, ref_width)
        stall = np.where(halved, 0, stall + 1)
        use_newton = (guess > a) & (guess < b) & (stall < 3)
        mid_all = np.where(use_newton, guess, 0.5 * (a + b))
        ref_width = np.where(use_newton, ref_width, width)
        stall = np.where(use_newton, stall, 0)
        mid = mid_all[gids]
        cnt = counts[gids]
        vidx = order[np.repeat(starts[gids] - np.cumsum(cnt) + cnt, cnt) + np.arange(cnt.sum())]
        local = np.repeat(np.arange(gids.size), cnt)
        x, dx = inv(mid[local], vidx)
        s = np.bincount(local, weights=x, minlength=gids.size)
        ds = np.bincount(local, weights=dx, minlength=gids.size)
        bg = budget[gids]
        hit = np.abs(s - bg) <= HIT_TOL * np.maximum(1.0, np.abs(bg))
        too_much = (s > bg) & ~hit
        short = ~too_much & ~hit
        ag, bgg = a[gids], b[gids]
        a[gids] = np.where(too_much | hit, mid, ag)
        b[gids] = np.where(short | hit, mid, bgg)
        sa[gids] = np.where(too_much | hit, s, sa[gids])
        sb[gids] = np.where(short | hit, s, sb[gids])
        vm = (too_much | hit)[local]
        va[vidx] = np.where(vm, x, va[vidx])
        vm = (short | hit)[local]
        vb[vidx] = np.where(vm, x, vb[vidx])
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = mid - (s - bg) / ds
        guess[gids] = np.where(ds < 0, newton, np.nan)
    gap = sa - sb
    w = np.where(gap > 0, (budget - sb) / np.where(gap > 0, gap, 1.0), 0.0)
    w = np.clip(w, 0.0, 1.0)
    values = vb + w[group] * (va - vb)
    return np.clip(values, lower, upper), 0.5 * (a + b)


def _fractional(env, lower, values):
    tol = 1e-9 * (1.0 + env.upper)
    return (env.tangent > lower + tol) & (values > lower + tol) & (values < env.tangent - tol)


def solve_groups(objective, env: Envelope, group, budget, lower=None, upper=None, rounding: bool = True):
    """Solve independent allocation problems that share an objective vector.

    ``group[i]`` is the problem index of variable ``i`` and ``budget[g]`` the
    amount to distribute in problem ``g``. Problems whose budget reaches
    ``sum(U)`` saturate; problems with budget at or below ``sum(L)`` sit at
    their lower bounds. With ``rounding=False`` the envelope relaxation is
    returned as is, possibly with variables inside a linear envelope piece.
    Returns ``(values, eta)``.
    """
    group = np.asarray(group, dtype=int)
    budget = np.asarray(budget, dtype=float)
    n_groups = len(budget)
    upper = env.upper.copy() if upper is None else np.asarray(upper, dtype=float).copy()
    lower = np.zeros_like(upper) if lower is None else np.asarray(lower, dtype=float).copy()
    values = np.empty_like(upper)
    eta = np.zeros(n_groups)

    cap = _group_sum(upper, group, n_groups)
    floor = _group_sum(lower, group, n_groups)
    sat = budget >= cap
    empty = ~sat & (budget <= floor)
    open_ = ~sat & ~empty
    values[sat[group]] = upper[sat[group]]
    values[empty[group]] = lower[empty[group]]
    if np.any(sat | empty):
        d_u, _ = _slopes(objective, upper)
        d_l, _ = _slopes(objective, lower)
        hi = np.full(n_groups, -np.inf)
        lo = np.full(n_groups, np.inf)
        np.minimum.at(lo, group, d_u)
        np.maximum.at(hi, group, d_l)
        eta = np.where(sat, lo, np.where(empty, hi, eta))
    if not np.any(open_):
        return values, eta

    gids = np.flatnonzero(open_)
    remap = -np.ones(n_groups, dtype=int)
    remap[gids] = np.arange(gids.size)
    vidx = np.flatnonzero(open_[group])
    sub_group = remap[group[vidx]]
    sub_obj = objective.take(vidx)
    sub_env = env.take(vidx)
    sub_lo = lower[vidx]
    sub_up = upper[vidx]
    sub_budget = budget[gids]
    x, e = _relaxed(sub_obj, sub_env, sub_lo, sub_up, sub_group, sub_budget, gids.size)

    for _ in range(len(vidx) if rounding else 0):
        frac = _fractional(sub_env, sub_lo, x)
        if not np.any(frac):
            break
        x, e, sub_lo, sub_up = _round_once(
            sub_obj, sub_env, sub_lo, sub_up, sub_group, sub_budget, gids.size, x, e, frac
        )
    values[vidx] = x
    eta[gids] = e
    return values, eta


def _round_once(obj, env, lower, upper, group, budget, n_groups, x, eta, frac):
    """Fix the first fractional variable of every affected group to its better end."""
    first = {}
    for i in np.flatnonzero(frac):
        first.setdefault(group[i], i)
    pick = np.array(sorted(first.values()), dtype=int)
    gsel = np.zeros(n_groups, dtype=bool)
    gsel[group[pick]] = True
    vsel = np.flatnonzero(gsel[group])
    gids = np.flatnonzero(gsel)
    remap = -np.ones(n_groups, dtype=int)
    remap[gids] = np.arange(gids.size)
    sg = remap[group[vsel]]
    pos = np.searchsorted(vsel, pick)
    sobj = obj.take(vsel)
    senv = env.take(vsel)

    lo_a, up_a = lower[vsel].copy(), upper[vsel].copy()
    up_a[pos] = lo_a[pos]
    xa, ea = _relaxed(sobj, senv, lo_a, up_a, sg, budget[gids], gids.size)
    va = _group_sum(sobj.value(xa), sg, gids.size)

    lo_b, up_b = lower[vsel].copy(), upper[vsel].copy()
    lo_b[pos] = senv.tangent[pos]
    feasible_b = _group_sum(lo_b, sg, gids.size) <= budget[gids]
    xb, eb = _relaxed(sobj, senv, np.minimum(lo_b, up_b), up_b, sg, budget[gids], gids.size)
    vb = np.where(feasible_b, _group_sum(sobj.value(xb), sg, gids.size), -np.inf)

    take_b = vb > va
    vmask = take_b[sg]
    x = x.copy()
    eta = eta.copy()
    lower = lower.copy()
    upper = upper.copy()
    x[vsel] = np.where(vmask, xb, xa)
    lower[vsel] = np.where(vmask, lo_b, lo_a)
    upper[vsel] = np.where(vmask, up_b, up_a)
    eta[gids] = np.where(take_b, eb, ea)
    return x, eta, lower, upper


# ---------------------------------------------------------------------------
# Public single-problem interface
# ---------------------------------------------------------------------------


@dataclass
class AllocationProblem:
    """``max sum f_i(v_i)`` s.t. ``sum v_i = budget``, ``0 <= v_i <= upper_bounds[i]``.

    ``objectives`` is either a list of ``(value, derivative)`` callables or a
    vectorised objective exposing ``value``, ``derivative`` and ``take``.
    """

    objectives: object
    budget: float
    upper_bounds: Sequence[float]

    def __post_init__(self):
        if isinstance(self.objectives, (list, tuple)):
            if len(self.objectives) == 0:
                raise ValueError("at least one objective is required")
            self.objectives = FunctionObjective(self.objectives)
        self.upper_bounds = np.asarray(self.upper_bounds, dtype=float)
        if len(self.objectives) == 0:
            raise ValueError("at least one objective is required")
        if len(self.objectives) != len(self.upper_bounds):
            raise ValueError("objectives and upper_bounds must have equal length")
        if not np.all(self.upper_bounds >= 0):
            raise ValueError("upper bounds must be >= 0")
        if not self.budget >= 0:
            raise ValueError(f"budget must be >= 0, got {self.budget}")


@dataclass(frozen=True)
class AllocationResult:
    values: np.ndarray
    multiplier: float
    objective: float
    saturated: bool


def allocate(problem: AllocationProblem, envelope: Envelope | None = None) -> AllocationResult:
    obj = problem.objectives
    upper = problem.upper_bounds
    env = envelope if envelope is not None else compute_envelope(obj, upper)
    saturated = bool(np.sum(upper) <= problem.budget)
    group = np.zeros(len(upper), dtype=int)
    values, eta = solve_groups(obj, env, group, [problem.budget])
    total = obj.value(values)
    _check_finite(total, "value")
    return AllocationResult(values, float(eta[0]), float(np.sum(total)), saturated)


def inner_allocation_at(problem: AllocationProblem, eta: float, envelope: Envelope | None = None) -> np.ndarray:
    """Per-variable maximiser of ``f_i(v) - eta v`` on ``[0, U_i]``.

    For concave objectives this is the solution of ``f_i'(v) = eta`` clamped
    to the bounds.
    """
    if not np.isfinite(eta):
        raise ValueError(f"eta must be finite, got {eta}")
    obj = problem.objectives
    upper = problem.upper_bounds
    env = envelope if envelope is not None else compute_envelope(obj, upper)
    inv = _Inverter(obj, env, np.zeros_like(upper), upper)
    return inv(np.full(len(upper), float(eta)))[0]
