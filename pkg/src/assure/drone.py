"""Resource-constrained drone navigation over a probability grid.

The drone flies a straight line from ``start`` to ``target``. Cells more than
``nofly_margin`` tiles (Chebyshev) from that line are a no-fly zone. Each step
the belief is predicted forward with the planned velocity, fused with a
camera-based match distribution, and checked against the no-fly zone over a
short horizon. A risky forecast either buys a GPS fix (if resources allow) or
triggers a revised plan computed from the belief mean.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import grid
from .agents import (
    AgentKind,
    ClockTick,
    ControlPlan,
    DataRequest,
    DataRequested,
    Distribution,
    EdgeKind,
    Feedback,
    Network,
    SensorReading,
    Signal,
)
from .grid import DiffusionParams, Displacement, GridDistribution, MatchKernel

log = logging.getLogger(__name__)

CAPSULE = "CaPSuLe"
GPS = "GPS"

# synthetic matcher construction
CLEAR_CORE = 0.5       # mass on the true cell when the view is clear
CLEAR_RING = 0.35      # mass on its 8-neighbourhood
CLOUD_BUMP = 0.02      # weak local signal left under cloud cover
CLOUD_NOISE = 0.25     # multiplicative jitter on the ambiguity profile
CLOUD_TRUTH_CAP = 0.2

MAX_STEP = 1.5         # cells per step for revised plans

# seed of the shipped regression scenario (scenarios/drone_regression.json)
REGRESSION_SEED = 33

CSV_HEADER = ["t", "resources", "agent", "probability", "signal",
              "truth_x", "truth_y", "argmax_x", "argmax_y", "mean_x", "mean_y"]


class ConfigError(ValueError):
    pass


@dataclass
class WorldConfig:
    width: int = 20
    height: int = 24
    start: tuple[int, int] = (1, 12)
    target: tuple[int, int] = (18, 12)
    nofly_margin: int = 2
    cloud_mask: Optional[np.ndarray] = None
    horizon: int = 7
    threshold: float = 0.05
    p_gps: float = 0.92
    diffusion: DiffusionParams = field(default_factory=lambda: DiffusionParams(0.45))
    perturbation_scale: float = 0.6
    speed: float = 0.75
    resource_budget: int = 12
    resource_threshold: int = 10
    gps_cost: int = 1
    initial_truth: Optional[tuple[float, float]] = None

    def __post_init__(self):
        self.start = tuple(self.start)
        self.target = tuple(self.target)
        if self.initial_truth is not None:
            self.initial_truth = tuple(float(v) for v in self.initial_truth)
        if self.cloud_mask is None:
            self.cloud_mask = np.zeros((self.height, self.width), dtype=bool)
        else:
            self.cloud_mask = np.asarray(self.cloud_mask, dtype=bool)
        self.validate()

    def validate(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ConfigError("width and height must be positive")
        for name in ("start", "target"):
            x, y = getattr(self, name)
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise ConfigError(f"{name} {getattr(self, name)} lies outside the grid")
        if self.start == self.target:
            raise ConfigError("start and target must differ")
        if self.nofly_margin < 0:
            raise ConfigError("nofly_margin must be >= 0 (start and target would be masked)")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie in (0, 1)")
        if not 0.0 < self.p_gps <= 1.0:
            raise ConfigError("p_gps must lie in (0, 1]")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.perturbation_scale < 0 or self.speed <= 0:
            raise ConfigError("perturbation_scale must be >= 0 and speed > 0")
        if min(self.resource_budget, self.resource_threshold, self.gps_cost) < 0:
            raise ConfigError("resource quantities must be >= 0")
        if self.cloud_mask.shape != (self.height, self.width):
            raise ConfigError(
                f"cloud_mask shape {self.cloud_mask.shape} != ({self.height}, {self.width})"
            )
        if self.initial_truth is not None:
            x, y = self.initial_truth
            if not (0 <= x <= self.width - 1 and 0 <= y <= self.height - 1):
                raise ConfigError(f"initial_truth {self.initial_truth} lies outside the grid")
            if build_nofly_mask(self)[_cell((x, y), self)[::-1]]:
                raise ConfigError(f"initial_truth {self.initial_truth} lies in the no-fly zone")

    def __eq__(self, other):
        if not isinstance(other, WorldConfig):
            return NotImplemented
        a, b = vars(self).copy(), vars(other).copy()
        return (np.array_equal(a.pop("cloud_mask"), b.pop("cloud_mask")) and a == b)


# -- geometry -------------------------------------------------------------------

def chebyshev_to_segment(p, a, b) -> float:
    """Exact Chebyshev (L-infinity) distance from point ``p`` to segment ``ab``.

    Along the segment the distance is a convex piecewise-linear function of
    the segment parameter, so its minimum sits at an endpoint or at a
    breakpoint where one coordinate gap vanishes or both gaps are equal.
    """
    qx, qy = p[0] - a[0], p[1] - a[1]
    ux, uy = b[0] - a[0], b[1] - a[1]
    cands = [0.0, 1.0]
    if ux:
        cands.append(qx / ux)
    if uy:
        cands.append(qy / uy)
    if ux != uy:
        cands.append((qx - qy) / (ux - uy))
    if ux != -uy:
        cands.append((qx + qy) / (ux + uy))
    best = math.inf
    for s in cands:
        s = min(1.0, max(0.0, s))
        best = min(best, max(abs(qx - s * ux), abs(qy - s * uy)))
    return best


def build_nofly_mask(config: WorldConfig) -> np.ndarray:
    if config.nofly_margin < 0:
        raise ConfigError("negative nofly_margin would mask the route endpoints")
    mask = np.zeros((config.height, config.width), dtype=bool)
    for y in range(config.height):
        for x in range(config.width):
            d = chebyshev_to_segment((x, y), config.start, config.target)
            mask[y, x] = d > config.nofly_margin + 1e-9
    return mask


def _cell(point, config: WorldConfig) -> tuple[int, int]:
    x = min(config.width - 1, max(0, int(math.floor(point[0] + 0.5))))
    y = min(config.height - 1, max(0, int(math.floor(point[1] + 0.5))))
    return x, y


def nearest_masked_distance(point, nofly) -> float:
    """Euclidean distance from ``point`` to the no-fly region, each masked
    cell counted as the unit square around its centre."""
    ys, xs = np.nonzero(nofly)
    if len(xs) == 0:
        return math.inf
    gx = np.maximum(np.abs(xs - point[0]) - 0.5, 0.0)
    gy = np.maximum(np.abs(ys - point[1]) - 0.5, 0.0)
    return float(np.hypot(gx, gy).min())


# -- synthetic matcher ----------------------------------------------------------

def ambiguity_profile(height: int, width: int) -> np.ndarray:
    """Fixed per-cell weight for how strongly a featureless query matches each
    location; values lie in [0.5, 1.5] with scattered look-alike peaks."""
    ys, xs = np.indices((height, width))
    return 1.0 + 0.5 * np.sin(0.9 * xs + 0.3) * np.cos(0.7 * ys + 1.1)


def synthetic_match(truth, cloud_mask, rng: Optional[np.random.Generator] = None
                    ) -> GridDistribution:
    """Stand-in for the image matcher.

    With ``rng=None`` the noise-free (expected) output is returned, which is
    what the match kernel is estimated from.
    """
    cloud_mask = np.asarray(cloud_mask, dtype=bool)
    h, w = cloud_mask.shape
    x, y = truth
    d = np.zeros((h, w))
    near = [(x + dx, y + dy) for dx, dy in grid.NEIGHBOURS
            if 0 <= x + dx < w and 0 <= y + dy < h]
    if not cloud_mask[y, x]:
        d[y, x] = CLEAR_CORE
        if near:
            share = (rng.dirichlet(np.ones(len(near))) if rng is not None
                     else np.full(len(near), 1.0 / len(near)))
            for (nx, ny), s in zip(near, share):
                d[ny, nx] += CLEAR_RING * s
            rest = 1.0 - CLEAR_CORE - CLEAR_RING
        else:
            rest = 1.0 - CLEAR_CORE
        region = cloud_mask if cloud_mask.any() else np.ones_like(cloud_mask)
        prof = ambiguity_profile(h, w) * region
        d += rest * prof / prof.sum()
        return grid.normalize(d)

    prof = ambiguity_profile(h, w) * cloud_mask
    if rng is not None:
        prof = prof * rng.uniform(1.0 - CLOUD_NOISE, 1.0 + CLOUD_NOISE, prof.shape)
    d = (1.0 - CLOUD_BUMP) * prof / prof.sum()
    bump = [(cx, cy) for cx, cy in [(x, y)] + near if cloud_mask[cy, cx]]
    for cx, cy in bump:
        d[cy, cx] += CLOUD_BUMP / len(bump)
    if d[y, x] > CLOUD_TRUTH_CAP:
        excess = d[y, x] - CLOUD_TRUTH_CAP
        d[y, x] = CLOUD_TRUTH_CAP
        others = d.copy()
        others[y, x] = 0.0
        if others.sum() > 0:
            d += excess * others / others.sum()
        else:
            spread = np.ones_like(d)
            spread[y, x] = 0.0
            d += excess * spread / spread.sum()
    return grid.normalize(d)


def build_kernel(config: WorldConfig) -> MatchKernel:
    return grid.estimate_kernel(
        lambda cell: synthetic_match(cell, config.cloud_mask), config.width, config.height
    )


def gps_read(truth_cell, width: int, height: int, p_gps: float,
             rng: np.random.Generator) -> tuple[int, int]:
    """Sample a GPS fix: the true cell with probability ``p_gps``, otherwise a
    uniformly chosen in-bounds neighbour."""
    x, y = truth_cell
    near = [(x + dx, y + dy) for dx, dy in grid.NEIGHBOURS
            if 0 <= x + dx < width and 0 <= y + dy < height]
    if not near or rng.random() < p_gps:
        return truth_cell
    return near[int(rng.integers(len(near)))]


# -- mission state ----------------------------------------------------------------

@dataclass(frozen=True)
class MissionState:
    t: int
    truth: tuple[float, float]
    belief: GridDistribution
    plan: tuple[Displacement, ...]
    resources: int
    finished: bool = False

    def __post_init__(self):
        if self.resources < 0:
            raise ValueError("resources must be >= 0")


@dataclass(frozen=True)
class CheckSignal:
    signal: Signal
    probability: float
    agent: str


@dataclass(frozen=True)
class MissionRow:
    t: int
    resources: int
    agent: str
    probability: float
    signal: str
    truth: tuple[float, float]
    argmax: tuple[int, int]
    mean: tuple[float, float]


@dataclass
class StepRecord:
    t: int
    truth: tuple[float, float]
    raw_argmax: tuple[int, int]
    fused_argmax: tuple[int, int]
    belief: GridDistribution
    forecast: tuple = ()


@dataclass
class MissionTrace:
    rows: list[MissionRow]
    outcome: str = "running"        # reached | exhausted | aborted
    violated: bool = False          # truth entered a no-fly cell at some step
    steps: list[StepRecord] = field(default_factory=list)
    nofly: Optional[np.ndarray] = None
    final_truth: Optional[tuple[float, float]] = None

    def signals(self) -> list[tuple[int, str, str]]:
        return [(r.t, r.agent, r.signal) for r in self.rows]

    @property
    def success(self) -> bool:
        return self.outcome == "reached" and not self.violated

    def to_csv(self) -> str:
        return rows_to_csv(self.rows)


def _fmt(v: float) -> str:
    return format(float(v), ".10g")


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_HEADER)
    for r in rows:
        wr.writerow([r.t, r.resources, r.agent, _fmt(r.probability), r.signal,
                     _fmt(r.truth[0]), _fmt(r.truth[1]), r.argmax[0], r.argmax[1],
                     _fmt(r.mean[0]), _fmt(r.mean[1])])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[MissionRow]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_HEADER:
        raise ValueError(f"unexpected mission trace header: {reader.fieldnames}")
    return [
        MissionRow(int(r["t"]), int(r["resources"]), r["agent"], float(r["probability"]),
                   r["signal"], (float(r["truth_x"]), float(r["truth_y"])),
                   (int(r["argmax_x"]), int(r["argmax_y"])),
                   (float(r["mean_x"]), float(r["mean_y"])))
        for r in reader
    ]


# -- dynamics and decisions -----------------------------------------------------------

def straight_plan(origin, target, steps: int) -> tuple[Displacement, ...]:
    dx, dy = target[0] - origin[0], target[1] - origin[1]
    return tuple(Displacement(dx / steps, dy / steps) for _ in range(steps))


def initial_plan(config: WorldConfig) -> tuple[Displacement, ...]:
    dist = math.hypot(config.target[0] - config.start[0], config.target[1] - config.start[1])
    return straight_plan(config.start, config.target, max(1, math.ceil(dist / config.speed)))


def step_ground_truth(state: MissionState, config: WorldConfig,
                      rng: np.random.Generator) -> MissionState:
    if not state.plan:
        raise ValueError("cannot step the drone: plan is empty")
    move = state.plan[0]
    s = config.perturbation_scale
    ex, ey = (rng.uniform(-s, s, 2) if s > 0 else (0.0, 0.0))
    x = min(config.width - 1.0, max(0.0, state.truth[0] + move.dx + float(ex)))
    y = min(config.height - 1.0, max(0.0, state.truth[1] + move.dy + float(ey)))
    return replace(state, t=state.t + 1, truth=(x, y), plan=state.plan[1:])


def check_violation_policy(probability: float, resources: int, config: WorldConfig,
                           escalated: bool = False, agent: str = CAPSULE) -> CheckSignal:
    if probability <= config.threshold:
        sig = Signal.CONTINUE
    elif not escalated and resources >= config.resource_threshold + config.gps_cost:
        sig = Signal.MORE_DATA
    else:
        sig = Signal.CHANGE
    return CheckSignal(sig, probability, agent)


def _away_direction(mean, nofly) -> Optional[tuple[float, float]]:
    """Unit vector pointing away from the nearest masked cell(s), or towards
    the nearest safe cell when ``mean`` itself sits in a masked cell."""
    h, w = nofly.shape
    mx, my = mean
    cx = min(w - 1, max(0, int(math.floor(mx + 0.5))))
    cy = min(h - 1, max(0, int(math.floor(my + 0.5))))
    inside = bool(nofly[cy, cx])
    ys, xs = np.nonzero(~nofly if inside else nofly)
    if len(xs) == 0:
        return None
    dist = np.hypot(xs - mx, ys - my)
    near = dist <= dist.min() + 1e-9
    sign = 1.0 if inside else -1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        ux = np.where(dist[near] > 0, sign * (xs[near] - mx) / dist[near], 0.0).sum()
        uy = np.where(dist[near] > 0, sign * (ys[near] - my) / dist[near], 0.0).sum()
    norm = math.hypot(ux, uy)
    if norm < 1e-9:
        return None
    return ux / norm, uy / norm


def revise_plan(mean, target, nofly, remaining_steps: int,
                nofly_margin: int = 2) -> list[Displacement]:
    """Corrective plan: one lateral step of ``nofly_margin / 2`` cells away from
    the closest no-fly cell, then a straight line to ``target``."""
    if remaining_steps < 1:
        raise ValueError("remaining_steps must be >= 1")
    nofly = np.asarray(nofly, dtype=bool)
    if remaining_steps == 1:
        dx, dy = target[0] - mean[0], target[1] - mean[1]
        dist = math.hypot(dx, dy)
        scale = 1.0 if dist <= MAX_STEP else MAX_STEP / dist
        return [Displacement(dx * scale, dy * scale)]
    plan: list[Displacement] = []
    origin = mean
    away = _away_direction(mean, nofly)
    if away is not None:
        # step no further than the point of greatest clearance along ``away``,
        # so a mean near the corridor centre does not overshoot to the far wall
        sizes = np.linspace(0.0, min(nofly_margin / 2.0, MAX_STEP), 17)
        clearance = [nearest_masked_distance((mean[0] + away[0] * s, mean[1] + away[1] * s),
                                             nofly) for s in sizes]
        size = float(sizes[np.flatnonzero(np.array(clearance) >= max(clearance) - 1e-9)[-1]])
        if size > 0.0:
            lateral = Displacement(away[0] * size, away[1] * size)
            plan.append(lateral)
            origin = (mean[0] + lateral.dx, mean[1] + lateral.dy)
    dist = math.hypot(target[0] - origin[0], target[1] - origin[1])
    n = max(remaining_steps - len(plan), math.ceil(dist / MAX_STEP), 1)
    plan.extend(straight_plan(origin, target, n))
    return plan


def reached(belief: GridDistribution, target) -> bool:
    x, y = grid.argmax_location(belief)
    return max(abs(x - target[0]), abs(y - target[1])) <= 1


# -- the agent network ----------------------------------------------------------------

class Mission:
    """One seeded drone mission assembled as an agent network.

    Control -> Predict -> CaPSuLe fusion (pulls Camera) -> CaPSuLe check;
    the check either feeds back to Control or sends a data request to the GPS
    fusion agent, which pulls the GPS sensor and hands its posterior to the
    GPS check, which in turn feeds back to Control.
    """

    def __init__(self, config: WorldConfig, kernel: Optional[MatchKernel] = None):
        self.config = config
        self.nofly = build_nofly_mask(config)
        self.kernel = kernel if kernel is not None else build_kernel(config)
        truth = config.initial_truth or tuple(float(v) for v in config.start)
        belief = GridDistribution.delta(config.width, config.height, _cell(truth, config))
        self.state = MissionState(0, truth, belief, initial_plan(config), config.resource_budget)
        self.trace = MissionTrace(rows=[], nofly=self.nofly)
        self._raw_argmax = None
        self._fused_argmax = None
        self._forecast = ()
        self.network, self.ids = self._build()

    # helpers
    def _forecast_plan(self, plan) -> list[Displacement]:
        h = self.config.horizon
        return list(plan[:h]) + [grid.ZERO] * max(0, h - len(plan))

    def _evaluate(self, belief: GridDistribution, plan):
        h = self.config.horizon
        fc = grid.forecast(belief, self._forecast_plan(plan), [grid.ZERO] * h,
                           self.config.diffusion, h)
        return fc, grid.violation_probability(fc, self.nofly)

    def _row(self, agent: str, check: CheckSignal, belief: GridDistribution):
        self.trace.rows.append(MissionRow(
            self.state.t, self.state.resources, agent, check.probability,
            check.signal.value, self.state.truth, grid.argmax_location(belief),
            grid.mean_location(belief),
        ))

    def _abort(self, agent: str, belief: Optional[GridDistribution]):
        b = belief if belief is not None else self.state.belief
        self.trace.rows.append(MissionRow(
            self.state.t, self.state.resources, agent, float("nan"), "Abort",
            self.state.truth, grid.argmax_location(b), grid.mean_location(b),
        ))
        self.trace.outcome = "aborted"
        self.state = replace(self.state, finished=True)

    # agent handlers
    def control(self, act):
        cfg = self.config
        if isinstance(act.cause, ClockTick):
            if self.state.finished:
                return
            if not self.state.plan:
                self.trace.outcome = "exhausted"
                self.state = replace(self.state, finished=True)
                return
            move = self.state.plan[0]
            self.state = step_ground_truth(self.state, cfg, act.rng)
            if self.nofly[_cell(self.state.truth, cfg)[::-1]]:
                self.trace.violated = True
            act.emit(ControlPlan(move, self.state.plan, self.state.belief))
            return
        fb: Feedback = act.payload
        belief = fb.distribution
        plan = self.state.plan
        if fb.signal is Signal.CHANGE:
            mean = grid.mean_location(belief)
            plan = tuple(revise_plan(mean, cfg.target, self.nofly, max(1, len(plan)),
                                     cfg.nofly_margin))
            act.record("replan", len(plan))
        self.state = replace(self.state, belief=belief, plan=plan)
        self.trace.steps.append(StepRecord(
            self.state.t, self.state.truth, self._raw_argmax, self._fused_argmax,
            belief, self._forecast,
        ))
        if reached(belief, cfg.target):
            self.trace.outcome = "reached"
            self.state = replace(self.state, finished=True)
        elif not plan:
            self.trace.outcome = "exhausted"
            self.state = replace(self.state, finished=True)

    def predict(self, act):
        cp: ControlPlan = act.payload
        pred = grid.propagate(cp.belief, cp.move, self.config.diffusion)
        act.emit(Distribution(pred, cp.remaining))

    def camera(self, act):
        truth_cell = _cell(self.state.truth, self.config)
        act.reply(SensorReading(synthetic_match(truth_cell, self.config.cloud_mask, act.rng)))

    def capsule_fusion(self, act):
        pred: Distribution = act.payload
        raw = act.pull(self.ids["camera"]).payload.value
        self._raw_argmax = grid.argmax_location(raw)
        try:
            fused = grid.fuse_match(pred.value, raw, self.kernel)
        except grid.VanishedBelief:
            self._abort(CAPSULE, pred.value)
            return
        self._fused_argmax = grid.argmax_location(fused)
        act.emit(Distribution(fused, pred.plan))

    def capsule_check(self, act):
        d: Distribution = act.payload
        fc, p = self._evaluate(d.value, d.plan)
        self._forecast = fc
        check = check_violation_policy(p, self.state.resources, self.config, False, CAPSULE)
        self._row(CAPSULE, check, d.value)
        if check.signal is Signal.MORE_DATA:
            act.emit(DataRequest(self.ids["gps"], d))
        else:
            act.emit(Feedback(check.signal, p, d.value))

    def gps_sensor(self, act):
        assert isinstance(act.cause, DataRequested)
        cost = self.config.gps_cost
        self.state = replace(self.state, resources=self.state.resources - cost)
        act.record("debit", cost)
        reading = gps_read(_cell(self.state.truth, self.config), self.config.width,
                           self.config.height, self.config.p_gps, act.rng)
        act.reply(SensorReading(reading))

    def gps_fusion(self, act):
        req: DataRequest = act.payload
        prior: Distribution = req.context
        reading = act.pull(req.target).payload.value
        try:
            post = grid.fuse_gps(prior.value, reading, self.config.p_gps)
        except grid.VanishedBelief:
            self._abort(GPS, prior.value)
            return
        act.emit(Distribution(post, prior.plan))

    def gps_check(self, act):
        d: Distribution = act.payload
        fc, p = self._evaluate(d.value, d.plan)
        self._forecast = fc
        check = check_violation_policy(p, self.state.resources, self.config, True, GPS)
        self._row(GPS, check, d.value)
        act.emit(Feedback(check.signal, p, d.value))

    def _build(self):
        net = Network()
        ids = {
            "control": net.register(AgentKind.CONTROL, self.control, "Control", clocked=True),
            "predict": net.register(AgentKind.PREDICTION, self.predict, "Predict"),
            "camera": net.register(AgentKind.SOURCE, self.camera, "Camera"),
            "capsule": net.register(AgentKind.FUSION, self.capsule_fusion, "CaPSuLeFusion"),
            "capsule_check": net.register(AgentKind.CHECK_VIOLATION, self.capsule_check,
                                          "CaPSuLeCheck"),
            "gps": net.register(AgentKind.SOURCE, self.gps_sensor, "GPS"),
            "gps_fusion": net.register(AgentKind.FUSION, self.gps_fusion, "GPSFusion"),
            "gps_check": net.register(AgentKind.CHECK_VIOLATION, self.gps_check, "GPSCheck"),
        }
        net.connect(ids["control"], ids["predict"], EdgeKind.TUPLE)
        net.connect(ids["predict"], ids["capsule"], EdgeKind.TUPLE)
        net.connect(ids["capsule"], ids["camera"], EdgeKind.DATA)
        net.connect(ids["capsule"], ids["capsule_check"], EdgeKind.TUPLE)
        net.connect(ids["capsule_check"], ids["control"], EdgeKind.FEEDBACK)
        net.connect(ids["capsule_check"], ids["gps_fusion"], EdgeKind.DATA)
        net.connect(ids["gps_fusion"], ids["gps"], EdgeKind.DATA)
        net.connect(ids["gps_fusion"], ids["gps_check"], EdgeKind.TUPLE)
        net.connect(ids["gps_check"], ids["control"], EdgeKind.FEEDBACK)
        net.seal()
        return net, ids

    def run(self, seed: int, max_ticks: int = 1000) -> MissionTrace:
        self.agent_trace = self.network.run_until(
            lambda s: self.state.finished, seed, max_ticks=max_ticks
        )
        if not self.state.finished:
            self.trace.outcome = "exhausted"
        self.trace.final_truth = self.state.truth
        return self.trace


def run_mission(config: WorldConfig, seed: int,
                kernel: Optional[MatchKernel] = None) -> MissionTrace:
    return Mission(config, kernel).run(seed)
