"""Station economics, retrial/drop probabilities and the per-cycle revenue curve.

A station i that is visited for ``V`` time units in every frame of length ``C``
earns, in expectation per frame,

    M_i(V) = Gamma_i * [(C - V) * p(V) / r(V) + V]

where ``p`` is the probability that a looping packet retries during the visit,
``q`` the probability that it is dropped at the end of the visit and
``r = p + q - p q`` the probability that it leaves the loop in a given frame.
The net revenue subtracts the contract cost ``C * Theta_i``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

REL_TOL = 1e-9
CONCAVITY_GRID = 1024
CONCAVITY_TOL = 1e-8


class ConcavityWarning(UserWarning):
    """Emitted when a revenue curve is not concave on [0, C]."""


# ---------------------------------------------------------------------------
# Probability models
# ---------------------------------------------------------------------------


class ProbabilityModel:
    """Retrial probability ``p(v)`` and drop probability ``q(v)``.

    Subclasses implement :meth:`p` and :meth:`q` (both must accept numpy
    arrays). Analytic derivatives are optional: override :meth:`derivatives`
    to return ``(p', q', p'', q'')``; the default raises ``NotImplementedError``
    and callers fall back to finite differences of the revenue curve.
    """

    def p(self, v):
        raise NotImplementedError

    def q(self, v):
        raise NotImplementedError

    def derivatives(self, v):
        raise NotImplementedError


@dataclass(frozen=True)
class ExponentialModel(ProbabilityModel):
    """``p(v) = 1 - exp(-retry_rate v)`` and ``q(v) = exp(-drop_decay v)``.

    The rates may be scalars or numpy arrays (one entry per station); in the
    array case every method works elementwise.
    """

    retry_rate: float | np.ndarray
    drop_decay: float | np.ndarray

    def p(self, v):
        return -np.expm1(-self.retry_rate * np.asarray(v, dtype=float))

    def q(self, v):
        return np.exp(-self.drop_decay * np.asarray(v, dtype=float))

    def derivatives(self, v):
        v = np.asarray(v, dtype=float)
        nu, mu = self.retry_rate, self.drop_decay
        ep = np.exp(-nu * v)
        eq = np.exp(-mu * v)
        return nu * ep, -mu * eq, -nu * nu * ep, mu * mu * eq

    def take(self, idx) -> "ExponentialModel":
        return ExponentialModel(
            np.asarray(self.retry_rate, dtype=float)[idx],
            np.asarray(self.drop_decay, dtype=float)[idx],
        )


def _check_time(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise ValueError(f"visit time must be >= 0, got {v!r}")
    return arr


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def retrial_prob(model: ProbabilityModel, v):
    return _scalar(model.p(_check_time(v)))


def drop_prob(model: ProbabilityModel, v):
    return _scalar(model.q(_check_time(v)))


def leave_prob(p, q):
    """Probability ``p + q - p q`` that a looping packet leaves in one frame."""
    p_arr = np.asarray(p, dtype=float)
    q_arr = np.asarray(q, dtype=float)
    for name, arr in (("p", p_arr), ("q", q_arr)):
        if np.any(np.isnan(arr)) or np.any(arr < 0) or np.any(arr > 1):
            raise ValueError(f"{name} must lie in [0, 1], got {arr!r}")
    return _scalar(p_arr + q_arr - p_arr * q_arr)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrafficClass:
    arrival_rate: float
    profit_per_packet: float
    penalty_per_packet: float = 0.0

    def __post_init__(self):
        if not self.arrival_rate >= 0:
            raise ValueError(f"arrival_rate must be >= 0, got {self.arrival_rate}")
        if not self.penalty_per_packet >= 0:
            raise ValueError(f"penalty_per_packet must be >= 0, got {self.penalty_per_packet}")


def aggregate_classes(classes: Sequence[TrafficClass]) -> tuple[float, float]:
    """Return ``(Gamma, Theta)`` for a list of traffic classes."""
    gamma = math.fsum(c.arrival_rate * (c.profit_per_packet + c.penalty_per_packet) for c in classes)
    theta = math.fsum(c.arrival_rate * c.penalty_per_packet for c in classes)
    return gamma, theta


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=REL_TOL, abs_tol=1e-12)


@dataclass(frozen=True)
class StationParams:
    """Economics and loop behaviour of one input port.

    ``gamma`` and ``theta`` are the aggregated earn-back and contract-cost
    rates. When ``classes`` is given they are derived from it (pass ``None``)
    or checked against it. ``model`` overrides the exponential retrial/drop
    model built from ``retry_rate`` and ``drop_decay``.
    """

    station_id: int
    gamma: float | None = None
    theta: float | None = None
    retry_rate: float = 0.5
    drop_decay: float = 0.5
    switchover: float = 0.0
    classes: tuple[TrafficClass, ...] = ()
    model: ProbabilityModel | None = None

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if self.classes:
            g, t = aggregate_classes(self.classes)
            if self.gamma is None:
                object.__setattr__(self, "gamma", g)
            elif not _close(self.gamma, g):
                raise ValueError(f"station {self.station_id}: gamma={self.gamma} disagrees with classes ({g})")
            if self.theta is None:
                object.__setattr__(self, "theta", t)
            elif not _close(self.theta, t):
                raise ValueError(f"station {self.station_id}: theta={self.theta} disagrees with classes ({t})")
        if self.gamma is None:
            raise ValueError(f"station {self.station_id}: gamma or classes required")
        if self.theta is None:
            object.__setattr__(self, "theta", 0.0)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "theta", float(self.theta))
        if not (isinstance(self.station_id, (int, np.integer)) and self.station_id >= 1):
            raise ValueError(f"station_id must be a positive integer, got {self.station_id!r}")
        if not self.gamma >= 0:
            raise ValueError(f"station {self.station_id}: gamma must be >= 0")
        if not self.theta >= 0:
            raise ValueError(f"station {self.station_id}: theta must be >= 0")
        if not self.retry_rate > 0:
            raise ValueError(f"station {self.station_id}: retry_rate must be > 0")
        if not self.drop_decay > 0:
            raise ValueError(f"station {self.station_id}: drop_decay must be > 0")
        if not self.switchover >= 0:
            raise ValueError(f"station {self.station_id}: switchover must be >= 0")

    @property
    def probability_model(self) -> ProbabilityModel:
        if self.model is not None:
            return self.model
        return ExponentialModel(self.retry_rate, self.drop_decay)


@dataclass(frozen=True)
class Instance:
    stations: tuple[StationParams, ...]
    wavelengths: int
    frame_time: float

    def __post_init__(self):
        object.__setattr__(self, "stations", tuple(self.stations))
        if len(self.stations) < 1:
            raise ValueError("an instance needs at least one station")
        if not (isinstance(self.wavelengths, (int, np.integer)) and self.wavelengths >= 1):
            raise ValueError(f"wavelengths must be a positive integer, got {self.wavelengths!r}")
        if not self.frame_time > 0:
            raise ValueError(f"frame_time must be > 0, got {self.frame_time}")
        ids = [s.station_id for s in self.stations]
        if len(set(ids)) != len(ids):
            raise ValueError("station ids must be unique")
        for s in self.stations:
            if not s.switchover < self.frame_time:
                raise ValueError(
                    f"station {s.station_id}: switchover {s.switchover} must be < frame_time {self.frame_time}"
                )

    @property
    def n(self) -> int:
        return len(self.stations)

    @property
    def ids(self) -> list[int]:
        return [s.station_id for s in self.stations]

    def station(self, station_id: int) -> StationParams:
        for s in self.stations:
            if s.station_id == station_id:
                return s
        raise KeyError(station_id)

    def with_wavelengths(self, k: int) -> "Instance":
        return Instance(self.stations, k, self.frame_time)


# ---------------------------------------------------------------------------
# Revenue curve
# ---------------------------------------------------------------------------


def _served_ratio(p, q, p1=None, q1=None, p2=None, q2=None):
    """``g = p / r`` and optionally its first two derivatives.

    ``g`` is taken as 0 where ``p == 0`` (a packet that never retries is never
    served), which also covers the 0/0 case ``p = q = 0``.
    """
    r = p + q - p * q
    safe = r > 0
    r_safe = np.where(safe, r, 1.0)
    g = np.where(safe & (p > 0), p / r_safe, 0.0)
    if p1 is None:
        return g
    r1 = p1 + q1 - p1 * q - p * q1
    g1 = np.where(safe, (p1 * r - p * r1) / r_safe**2, 0.0)
    r2 = p2 + q2 - p2 * q - 2.0 * p1 * q1 - p * q2
    g2 = np.where(safe, (p2 * r - p * r2) / r_safe**2 - 2.0 * r1 * g1 / r_safe, 0.0)
    return g, g1, g2


def revenue_curve(gamma, model: ProbabilityModel, c, v):
    """Vectorised gross revenue ``M(v)`` without argument checks."""
    v = np.asarray(v, dtype=float)
    g = _served_ratio(model.p(v), model.q(v))
    return gamma * ((c - v) * g + v)


def revenue_slopes(gamma, model: ProbabilityModel, c, v):
    """Analytic ``(M'(v), M''(v))``; raises NotImplementedError if the model has no derivatives."""
    v = np.asarray(v, dtype=float)
    p1, q1, p2, q2 = model.derivatives(v)
    g, g1, g2 = _served_ratio(model.p(v), model.q(v), p1, q1, p2, q2)
    d1 = gamma * (1.0 - g + (c - v) * g1)
    d2 = gamma * (-2.0 * g1 + (c - v) * g2)
    return d1, d2


def _check_visit(c: float, v) -> float:
    v = float(v)
    if math.isnan(v) or v < 0 or v > c:
        raise ValueError(f"visit time must lie in [0, {c}], got {v}")
    return v


def station_revenue(s: StationParams, c: float, v: float) -> float:
    """Expected gross revenue per frame of station ``s`` visited for ``v``."""
    v = _check_visit(c, v)
    return float(revenue_curve(s.gamma, s.probability_model, c, v))


def net_revenue(s: StationParams, c: float, v: float) -> float:
    return station_revenue(s, c, v) - c * s.theta


def revenue_derivative(s: StationParams, c: float, v: float) -> float:
    """``dM/dV`` at ``v``.

    Exact for models with analytic derivatives. Otherwise a central difference
    with step ``1e-6 * c``, switched to a one-sided difference within one step
    of either end of ``[0, c]``.
    """
    v = _check_visit(c, v)
    model = s.probability_model
    try:
        return float(revenue_slopes(s.gamma, model, c, v)[0])
    except NotImplementedError:
        pass
    h = 1e-6 * c
    f = lambda x: float(revenue_curve(s.gamma, model, c, x))
    if v - h < 0:
        return (f(v + h) - f(v)) / h
    if v + h > c:
        return (f(v) - f(v - h)) / h
    return (f(v + h) - f(v - h)) / (2 * h)


def concavity_violation(s: StationParams, c: float, points: int = CONCAVITY_GRID) -> float:
    """Largest second central difference of ``M`` on a uniform grid over [0, c].

    Non-positive for a concave curve; a positive value is the size of the
    worst violation.
    """
    v = np.linspace(0.0, c, points)
    m = revenue_curve(s.gamma, s.probability_model, c, v)
    return float(np.max(m[2:] - 2.0 * m[1:-1] + m[:-2]))


def monotonicity_violation(s: StationParams, c: float, points: int = CONCAVITY_GRID) -> float:
    v = np.linspace(0.0, c, points)
    m = revenue_curve(s.gamma, s.probability_model, c, v)
    return float(max(0.0, -np.min(np.diff(m))))


def check_concavity(instance: Instance, tol: float = CONCAVITY_TOL) -> list[int]:
    """Return ids of stations whose revenue curve fails the grid test, warning once if any.

    Non-concave curves are still handled by the allocator (through their
    concave envelope), so this is advisory.
    """
    bad = []
    for s in instance.stations:
        c = instance.frame_time
        if concavity_violation(s, c) > tol or monotonicity_violation(s, c) > tol:
            bad.append(s.station_id)
    if bad:
        warnings.warn(
            f"revenue curve not concave/non-decreasing on [0, C] for stations {bad}; "
            "allocations use the concave envelope and may be only near-optimal",
            ConcavityWarning,
            stacklevel=2,
        )
    return bad


class RevenueObjective:
    """Separable objective ``sum_i M_i(v_i)`` for the allocator.

    Every method works elementwise: entry ``i`` of the input is the visit time
    of variable ``i``. Inputs of shape ``(n, m)`` evaluate ``m`` points per
    variable.
    """

    def __init__(self, gamma, models: Sequence[ProbabilityModel], c: float):
        self.gamma = np.asarray(gamma, dtype=float)
        self.c = float(c)
        self._models = list(models)
        if self._models and all(isinstance(m, ExponentialModel) for m in self._models):
            self._exp = ExponentialModel(
                np.array([m.retry_rate for m in self._models], dtype=float),
                np.array([m.drop_decay for m in self._models], dtype=float),
            )
        else:
            self._exp = None

    @property
    def models(self) -> list[ProbabilityModel]:
        if self._models is None:
            nu, mu = self._exp.retry_rate, self._exp.drop_decay
            self._models = [ExponentialModel(float(a), float(b)) for a, b in zip(nu, mu)]
        return self._models

    @classmethod
    def for_stations(cls, stations: Sequence[StationParams], c: float) -> "RevenueObjective":
        return cls([s.gamma for s in stations], [s.probability_model for s in stations], c)

    def __len__(self):
        return len(self.gamma)

    def take(self, idx) -> "RevenueObjective":
        idx = np.asarray(idx, dtype=int)
        out = RevenueObjective.__new__(RevenueObjective)
        out.gamma = self.gamma[idx]
        out.c = self.c
        if self._exp is not None:
            out._exp = self._exp.take(idx)
            out._models = None
        else:
            out._exp = None
            out._models = [self._models[i] for i in idx]
        return out

    def _broadcast(self, v, arr):
        return arr.reshape(arr.shape + (1,) * (np.ndim(v) - 1))

    def value(self, v):
        v = np.asarray(v, dtype=float)
        gamma = self._broadcast(v, self.gamma)
        if self._exp is not None:
            model = ExponentialModel(
                self._broadcast(v, self._exp.retry_rate), self._broadcast(v, self._exp.drop_decay)
            )
            return revenue_curve(gamma, model, self.c, v)
        out = np.empty_like(v)
        for i, m in enumerate(self.models):
            out[i] = revenue_curve(gamma[i], m, self.c, v[i])
        return out

    def slopes(self, v):
        """First and second derivative, analytic where available."""
        v = np.asarray(v, dtype=float)
        gamma = self._broadcast(v, self.gamma)
        if self._exp is not None:
            model = ExponentialModel(
                self._broadcast(v, self._exp.retry_rate), self._broadcast(v, self._exp.drop_decay)
            )
            return revenue_slopes(gamma, model, self.c, v)
        d1 = np.empty_like(v)
        d2 = np.empty_like(v)
        for i, m in enumerate(self.models):
            try:
                d1[i], d2[i] = revenue_slopes(gamma[i], m, self.c, v[i])
            except NotImplementedError:
                d1[i], d2[i] = _fd_slopes(lambda x: revenue_curve(gamma[i], m, self.c, x), v[i], self.c)
        return d1, d2

    def derivative(self, v):
        return self.slopes(v)[0]


def _fd_slopes(f, v, c):
    h = 1e-6 * c
    h2 = 1e-4 * c
    v = np.asarray(v, dtype=float)
    lo = np.maximum(v - h, 0.0)
    hi = np.minimum(v + h, c)
    d1 = (f(hi) - f(lo)) / (hi - lo)
    lo2 = np.maximum(v - h2, 0.0)
    hi2 = np.minimum(v + h2, c)
    mid = (lo2 + hi2) / 2
    d2 = (f(hi2) - 2 * f(mid) + f(lo2)) / ((hi2 - lo2) / 2) ** 2
    return d1, d2
