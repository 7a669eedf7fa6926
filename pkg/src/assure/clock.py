"""Timestamp assurance: local-clock deviation as a Wiener process.

A window of (local, reference) clock pairs gives a through-origin regression
slope ``m`` of reference elapsed time on local elapsed time; ``m * gap``
is the corrected elapsed local time and ``m - 1`` the deviation drift. The
per-interval residuals give a maximum-likelihood estimate of the
infinitesimal variance. From the variance the monitor works out how long it
can coast on the local clock before the deviation is likely to exceed its
limit, and reads the reference clock just before then.
"""
from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Iterable, Optional

import numpy as np

from .agents import (
    AgentKind,
    ClockTick,
    Distribution,
    EdgeKind,
    Feedback,
    Network,
    SensorReading,
    Signal,
)

CSV_HEADER = ["local_t", "event", "reference_T", "slope_est", "sigma2_est", "deadline", "budget"]

UNBOUNDED = math.inf


@dataclass(frozen=True)
class ClockSamplePair:
    local: float
    reference: float


class SampleWindow:
    """Sliding window of clock pairs with strictly increasing readings."""

    def __init__(self, pairs: Iterable[ClockSamplePair] = (), capacity: Optional[int] = None):
        if capacity is not None and capacity < 2:
            raise ValueError("window capacity must be at least 2")
        self.capacity = capacity
        self._pairs: deque[ClockSamplePair] = deque(maxlen=capacity)
        for p in pairs:
            self.append(p)

    def append(self, pair: ClockSamplePair) -> None:
        if self._pairs:
            last = self._pairs[-1]
            if pair.local <= last.local or pair.reference <= last.reference:
                raise ValueError(f"clock readings must strictly increase: {last} -> {pair}")
        self._pairs.append(pair)

    def __len__(self):
        return len(self._pairs)

    def __iter__(self):
        return iter(self._pairs)

    def __getitem__(self, i):
        return self._pairs[i]

    @property
    def local(self) -> np.ndarray:
        return np.array([p.local for p in self._pairs])

    @property
    def reference(self) -> np.ndarray:
        return np.array([p.reference for p in self._pairs])


@dataclass(frozen=True)
class WienerParams:
    mu: float
    sigma2: float

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")

    @property
    def slope(self) -> float:
        return 1.0 + self.mu


@dataclass(frozen=True)
class AssuranceSpec:
    limit: float
    p_max: float
    sync_cost: float = 1.0
    budget: float = math.inf

    def __post_init__(self):
        if not self.limit > 0:
            raise ValueError(f"limit must be > 0, got {self.limit}")
        if not 0.0 < self.p_max < 1.0:
            raise ValueError(f"p_max must lie in (0, 1), got {self.p_max}")
        if self.sync_cost < 0 or self.budget < 0:
            raise ValueError("sync_cost and budget must be >= 0")


def _require(window: SampleWindow) -> None:
    if len(window) < 2:
        raise ValueError(f"need at least 2 clock pairs, have {len(window)}")


def estimate_drift(window: SampleWindow) -> float:
    """Through-origin least-squares slope of reference elapsed time against
    local elapsed time, both measured from the first pair in the window."""
    _require(window)
    x = window.local - window[0].local
    y = window.reference - window[0].reference
    sxx = float(np.dot(x, x))
    if sxx == 0.0:
        raise ValueError("local elapsed times are all zero")
    return float(np.dot(x, y)) / sxx


def deviation_drift(slope: float) -> float:
    return slope - 1.0


def reference_intervals(window: SampleWindow) -> np.ndarray:
    return np.diff(window.reference)


def residuals(window: SampleWindow, slope: float) -> np.ndarray:
    _require(window)
    return np.diff(window.reference) - slope * np.diff(window.local)


def estimate_variance(res, intervals, unscaled: bool = False) -> float:
    """Maximum-likelihood infinitesimal variance from per-interval residuals.

    Each residual is modelled as N(0, sigma2 * interval). ``unscaled=True``
    returns the bare sum without the 1/M factor.
    """
    res = np.asarray(res, dtype=float)
    intervals = np.asarray(intervals, dtype=float)
    if res.shape != intervals.shape:
        raise ValueError("residuals and intervals must have the same length")
    if len(res) == 0:
        raise ValueError("need at least one interval")
    if np.any(intervals <= 0):
        raise ValueError("reference intervals must be positive")
    total = float(np.sum(res ** 2 / intervals))
    return total if unscaled else total / len(res)


def corrected_elapsed(local_gap: float, slope: float) -> float:
    if local_gap < 0:
        raise ValueError("local_gap must be >= 0")
    return slope * local_gap


def deviation_distribution(local_gap: float, sigma2: float) -> tuple[float, float]:
    """(mean, variance) of corrected-minus-true time ``local_gap`` seconds
    after the last sync."""
    if local_gap < 0:
        raise ValueError("local_gap must be >= 0")
    return 0.0, local_gap * sigma2


def local_elapsed_distribution(true_gap: float, params: WienerParams) -> tuple[float, float]:
    if true_gap < 0:
        raise ValueError("true_gap must be >= 0")
    return (1.0 + params.mu) * true_gap, params.sigma2 * true_gap


def exceedance_probability(local_gap: float, sigma2: float, limit: float) -> float:
    """P(|deviation| > limit) at ``local_gap`` seconds after the last sync."""
    _, var = deviation_distribution(local_gap, sigma2)
    if var == 0.0:
        return 0.0
    return 2.0 * (1.0 - NormalDist().cdf(limit / math.sqrt(var)))


def next_sync_deadline(spec: AssuranceSpec, sigma2: float, t_last_sync: float) -> float:
    """Latest local time at which the exceedance probability is still at most
    ``spec.p_max``; ``UNBOUNDED`` when the deviation cannot grow."""
    if not 0.0 < spec.p_max < 1.0:
        raise ValueError(f"p_max must lie in (0, 1), got {spec.p_max}")
    if sigma2 <= 0.0 or math.isinf(spec.limit):
        return UNBOUNDED
    z = NormalDist().inv_cdf(1.0 - spec.p_max / 2.0)
    return t_last_sync + (spec.limit / (math.sqrt(sigma2) * z)) ** 2


# -- simulation -----------------------------------------------------------------

def simulate_window(slope: float, sigma2: float, n: int, ref_gap: float,
                    rng: np.random.Generator, capacity: Optional[int] = None) -> SampleWindow:
    """``n`` clock pairs read at fixed reference spacing ``ref_gap`` from a
    clock whose corrected time ``slope * t`` wanders off true time as a
    driftless Wiener process with variance ``sigma2`` per second."""
    eps = rng.normal(0.0, math.sqrt(sigma2 * ref_gap), n - 1)
    local_gaps = (ref_gap - eps) / slope
    ref = np.concatenate([[0.0], np.cumsum(np.full(n - 1, ref_gap))])
    local = np.concatenate([[0.0], np.cumsum(local_gaps)])
    return SampleWindow((ClockSamplePair(float(t), float(T)) for t, T in zip(local, ref)),
                        capacity)


class WienerClock:
    """Simulated pair of clocks, stepped in local time."""

    def __init__(self, params: WienerParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng
        self.local = 0.0
        self.true = 0.0

    def advance(self, dt: float) -> None:
        slope, s2 = self.params.slope, self.params.sigma2
        noise = self.rng.normal(0.0, math.sqrt(s2 * slope * dt)) if s2 > 0 else 0.0
        self.local += dt
        self.true += slope * dt + noise


# -- the monitor ------------------------------------------------------------------

@dataclass(frozen=True)
class ClockEstimate:
    local_t: float
    slope: Optional[float] = None
    sigma2: Optional[float] = None
    last_sync: Optional[ClockSamplePair] = None
    reads: int = 0
    fresh: bool = False
    deviation: Optional[float] = None


@dataclass(frozen=True)
class SyncRow:
    local_t: float
    event: str               # warmup | sync | alert
    reference_T: Optional[float]
    slope_est: Optional[float]
    sigma2_est: Optional[float]
    deadline: Optional[float]
    budget: float
    deviation: Optional[float] = None   # corrected minus true time at the read


@dataclass
class SyncTrace:
    rows: list[SyncRow] = field(default_factory=list)
    outcome: str = "running"  # completed | alert

    def reads(self) -> list[SyncRow]:
        return [r for r in self.rows if r.event != "alert"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for r in self.rows:
            wr.writerow([_fmt(r.local_t), r.event, _fmt(r.reference_T), _fmt(r.slope_est),
                         _fmt(r.sigma2_est), _fmt(r.deadline), _fmt(r.budget)])
        return buf.getvalue()


def _fmt(v) -> str:
    return "" if v is None else format(float(v), ".12g")


class ClockMonitor:
    """Local clock and reference clock sources feeding a fusion agent; a
    combined prediction/check-violation agent requests reference reads."""

    def __init__(self, true_params: WienerParams, spec: AssuranceSpec, duration: float,
                 capacity: int = 50, tick: float = 1.0, warmup_reads: int = 3,
                 warmup_interval: float = 10.0, unscaled: bool = False):
        if warmup_reads < 2:
            raise ValueError("warmup_reads must be at least 2")
        self.true_params = true_params
        self.spec = spec
        self.duration = duration
        self.tick = tick
        self.warmup_reads = warmup_reads
        self.warmup_interval = warmup_interval
        self.unscaled = unscaled
        self.window = SampleWindow(capacity=capacity)
        self.budget = spec.budget
        self.trace = SyncTrace()
        self.done = False
        self._clock: Optional[WienerClock] = None
        self._estimate = ClockEstimate(0.0)
        self._deadline: Optional[float] = None
        self.network, self.ids = self._build()

    def local_clock(self, act):
        if isinstance(act.cause, ClockTick):
            if self._clock is None:
                self._clock = WienerClock(self.true_params, act.rng)
            else:
                self._clock.advance(self.tick)
            t = act.tick * self.tick
            if t > self.duration:
                self.trace.outcome = "completed"
                self.done = True
                act.halt()
                return
            act.emit(SensorReading(t))
        elif act.payload.signal is Signal.CHANGE:
            self.trace.outcome = "alert"
            self.done = True
            act.halt()

    def reference_clock(self, act):
        self.budget -= self.spec.sync_cost
        act.record("debit", self.spec.sync_cost)
        act.emit(SensorReading(ClockSamplePair(self._clock.local, self._clock.true)))

    def fusion(self, act):
        value = act.payload.value
        est = self._estimate
        if not isinstance(value, ClockSamplePair):
            act.emit(Distribution(ClockEstimate(value, est.slope, est.sigma2, est.last_sync,
                                                est.reads)))
            return
        deviation = None
        if est.slope is not None:
            predicted = est.last_sync.reference + corrected_elapsed(
                value.local - est.last_sync.local, est.slope)
            deviation = predicted - value.reference
        self.window.append(value)
        slope = sigma2 = None
        if len(self.window) >= 2:
            slope = estimate_drift(self.window)
            sigma2 = estimate_variance(residuals(self.window, slope),
                                       reference_intervals(self.window), self.unscaled)
        self._estimate = ClockEstimate(value.local, slope, sigma2, value, est.reads + 1,
                                       True, deviation)
        act.emit(Distribution(self._estimate))

    def check(self, act):
        est: ClockEstimate = act.payload.value
        cost = self.spec.sync_cost
        if est.fresh:
            if est.reads >= self.warmup_reads:
                self._deadline = next_sync_deadline(self.spec, est.sigma2, est.local_t)
            event = "warmup" if est.reads <= self.warmup_reads else "sync"
            self.trace.rows.append(SyncRow(
                est.local_t, event, est.last_sync.reference, est.slope, est.sigma2,
                self._deadline, self.budget, est.deviation,
            ))
            return
        t = est.local_t
        if est.reads < self.warmup_reads:
            need = est.last_sync is None or t - est.last_sync.local >= self.warmup_interval
        else:
            # predicted exceedance by the next tick is above p_max
            need = t + self.tick > self._deadline
        if not need:
            return
        if self.budget >= cost:
            act.emit(Feedback(Signal.MORE_DATA), to=self.ids["reference"])
        else:
            self.trace.rows.append(SyncRow(t, "alert", None, est.slope, est.sigma2,
                                           self._deadline, self.budget))
            act.emit(Feedback(Signal.CHANGE), to=self.ids["local"])

    def _build(self):
        net = Network()
        ids = {
            "local": net.register(AgentKind.SOURCE, self.local_clock, "LocalClock", clocked=True),
            "reference": net.register(AgentKind.SOURCE, self.reference_clock, "ReferenceClock"),
            "fusion": net.register(AgentKind.FUSION, self.fusion, "ClockFusion"),
            "check": net.register(AgentKind.CHECK_VIOLATION, self.check, "PredictCheck"),
        }
        net.connect(ids["local"], ids["fusion"], EdgeKind.TUPLE)
        net.connect(ids["reference"], ids["fusion"], EdgeKind.TUPLE)
        net.connect(ids["fusion"], ids["check"], EdgeKind.TUPLE)
        net.connect(ids["check"], ids["reference"], EdgeKind.FEEDBACK)
        net.connect(ids["check"], ids["local"], EdgeKind.FEEDBACK)
        net.seal()
        return net, ids

    def run(self, seed: int) -> SyncTrace:
        self.agent_trace = self.network.run_until(lambda s: self.done, seed)
        return self.trace


def run_clock_monitor(true_params: WienerParams, spec: AssuranceSpec, duration: float,
                      capacity: int, seed: int, **kw) -> SyncTrace:
    return ClockMonitor(true_params, spec, duration, capacity, **kw).run(seed)
