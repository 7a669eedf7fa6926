"""Deterministic runtime for networks of agents connected by streams.

Agents sleep until woken by a clock tick, by a message arriving on one of
their input edges, or by a synchronous data request from another agent.
Pushed messages are queued and delivered in a later scheduler step; pulls
run the source handler immediately and hand its reply back to the caller.

A run is a single logical-time loop. At each tick every clocked agent is
woken in id order, then the wake queue is drained FIFO before the next tick
starts. All randomness comes from one seeded generator passed to handlers.
"""
from __future__ import annotations

import hashlib
import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

import numpy as np

log = logging.getLogger(__name__)

AgentId = int


class AgentKind(Enum):
    SOURCE = "Source"
    FUSION = "Fusion"
    PREDICTION = "Prediction"
    CHECK_VIOLATION = "CheckViolation"
    COMPUTATION = "Computation"
    CONTROL = "Control"


class EdgeKind(Enum):
    TUPLE = "Tuple"
    FEEDBACK = "Feedback"
    DATA = "Data"


class Signal(Enum):
    """The three outputs of a check-violation agent."""

    CONTINUE = "Continue"
    MORE_DATA = "MoreData"
    CHANGE = "Change"


class NetworkError(Exception):
    pass


class TopologyError(NetworkError):
    pass


class DeadlockError(NetworkError):
    def __init__(self, tick: int, quiescent: list[str]):
        self.tick = tick
        self.quiescent = quiescent
        super().__init__(
            f"no pending wake causes at tick {tick}; quiescent agents: {', '.join(quiescent)}"
        )


class PullError(NetworkError):
    pass


class ProtocolError(NetworkError):
    pass


# -- payloads ---------------------------------------------------------------

@dataclass(frozen=True)
class Distribution:
    """A state distribution (grid belief, forecast, estimated parameters)
    travelling together with the control plan it was computed under."""

    value: Any
    plan: tuple = ()


@dataclass(frozen=True)
class ControlPlan:
    move: Any
    remaining: tuple = ()
    belief: Any = None


@dataclass(frozen=True)
class Feedback:
    signal: Signal
    probability: Optional[float] = None
    distribution: Any = None


@dataclass(frozen=True)
class DataRequest:
    target: Optional[AgentId] = None
    context: Any = None


@dataclass(frozen=True)
class SensorReading:
    value: Any


EDGE_PAYLOADS: dict[EdgeKind, tuple[type, ...]] = {
    EdgeKind.TUPLE: (Distribution, ControlPlan, SensorReading),
    EdgeKind.FEEDBACK: (Feedback,),
    EdgeKind.DATA: (DataRequest,),
}


@dataclass(frozen=True)
class Edge:
    index: int
    src: AgentId
    dst: AgentId
    kind: EdgeKind


@dataclass(frozen=True)
class Message:
    payload: Any
    tick: int
    sender: AgentId
    edge: Optional[Edge] = None


# -- wake causes --------------------------------------------------------------

@dataclass(frozen=True)
class ClockTick:
    tick: int

    def describe(self) -> str:
        return f"ClockTick({self.tick})"


@dataclass(frozen=True)
class MessageArrival:
    sender: AgentId
    message: Message

    def describe(self) -> str:
        return f"MessageArrival(from={self.sender})"


@dataclass(frozen=True)
class DataRequested:
    requester: AgentId

    def describe(self) -> str:
        return f"DataRequest(from={self.requester})"


WakeCause = ClockTick | MessageArrival | DataRequested


def describe(value: Any) -> str:
    """Stable text rendering of a payload, used for byte-identical traces."""
    if hasattr(value, "digest"):
        return f"{type(value).__name__}<{value.digest()}>"
    if isinstance(value, np.ndarray):
        h = hashlib.sha1(np.ascontiguousarray(value).tobytes()).hexdigest()[:16]
        return f"ndarray{value.shape}<{h}>"
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return "(" + ",".join(describe(v) for v in value) + ")"
    if hasattr(value, "__dataclass_fields__"):
        inner = ",".join(
            f"{name}={describe(getattr(value, name))}" for name in value.__dataclass_fields__
        )
        return f"{type(value).__name__}({inner})"
    return repr(value)


@dataclass(frozen=True)
class TraceEntry:
    seq: int
    tick: int
    agent: AgentId
    cause: WakeCause
    emitted: tuple[Message, ...] = ()
    notes: tuple[tuple[str, Any], ...] = ()
    parent: Optional[int] = None

    def line(self, names: dict[AgentId, str]) -> str:
        out = ";".join(
            f"{m.edge.dst if m.edge else '-'}:{describe(m.payload)}" for m in self.emitted
        )
        notes = ";".join(f"{k}={describe(v)}" for k, v in self.notes)
        parent = "" if self.parent is None else str(self.parent)
        return "\t".join(
            [str(self.seq), str(self.tick), f"{names[self.agent]}#{self.agent}",
             self.cause.describe(), out, notes, parent]
        )


class Trace(list):
    """Ordered list of TraceEntry records produced by one run."""

    def __init__(self, entries=(), names=None):
        super().__init__(entries)
        self.names: dict[AgentId, str] = dict(names or {})

    def dumps(self) -> str:
        return "".join(e.line(self.names) + "\n" for e in self)

    def activations(self, agent: AgentId) -> list[TraceEntry]:
        return [e for e in self if e.agent == agent]


# -- network ----------------------------------------------------------------

@dataclass
class _Agent:
    id: AgentId
    kind: AgentKind
    handler: Callable[["Activation"], None]
    name: str
    clocked: bool
    halted: bool = False
    outgoing: list[Edge] = field(default_factory=list)


@dataclass
class RunState:
    """Scheduler state handed to stop predicates."""

    tick: int
    trace: Trace
    network: "Network"


class Activation:
    """Handle given to an agent's handler for one wake-up."""

    def __init__(self, runner: "_Runner", agent: _Agent, tick: int, cause: WakeCause):
        self._runner = runner
        self._agent = agent
        self.tick = tick
        self.cause = cause
        self.emitted: list[Message] = []
        self.notes: list[tuple[str, Any]] = []
        self.reply_payload: Any = None
        self.seq = -1
        self._outputs = 0

    @property
    def agent(self) -> AgentId:
        return self._agent.id

    @property
    def rng(self) -> np.random.Generator:
        return self._runner.rng

    @property
    def message(self) -> Optional[Message]:
        return self.cause.message if isinstance(self.cause, MessageArrival) else None

    @property
    def payload(self) -> Any:
        m = self.message
        return None if m is None else m.payload

    def emit(self, payload: Any, to: Optional[AgentId] = None) -> list[Message]:
        """Push ``payload`` on every outgoing edge that accepts its type
        (or only the edge to ``to``). Delivery happens in a later step."""
        if self._agent.kind is AgentKind.CHECK_VIOLATION:
            # one of Continue / MoreData / Change per activation
            if self._outputs:
                raise ProtocolError(
                    f"check-violation agent {self._agent.name} emitted twice in one activation"
                )
            self._outputs += 1
        edges = [
            e for e in self._agent.outgoing
            if isinstance(payload, EDGE_PAYLOADS[e.kind]) and (to is None or e.dst == to)
        ]
        if not edges:
            raise ProtocolError(
                f"{self._agent.name} has no outgoing edge accepting {type(payload).__name__}"
                + (f" to agent {to}" if to is not None else "")
            )
        msgs = [Message(payload, self.tick, self._agent.id, e) for e in edges]
        self.emitted.extend(msgs)
        for m in msgs:
            self._runner.queue.append((m.edge.dst, MessageArrival(self._agent.id, m)))
        return msgs

    def pull(self, source: AgentId) -> Message:
        """Synchronously request data from ``source`` over a Data edge."""
        return self._runner.pull(self, source)

    def reply(self, payload: Any) -> None:
        if not isinstance(self.cause, DataRequested):
            raise ProtocolError("reply() is only valid while serving a data request")
        self.reply_payload = payload

    def record(self, key: str, value: Any) -> None:
        self.notes.append((key, value))

    def halt(self) -> None:
        """Stop receiving clock ticks."""
        self._agent.halted = True


class Network:
    def __init__(self):
        self._agents: list[_Agent] = []
        self._edges: list[Edge] = []
        self._sealed = False

    # construction -----------------------------------------------------------
    def register(
        self,
        kind: AgentKind,
        handler: Callable[[Activation], None],
        name: Optional[str] = None,
        clocked: bool = False,
    ) -> AgentId:
        if self._sealed:
            raise TopologyError("network is sealed; cannot register agents")
        if any(a.handler is handler for a in self._agents):
            raise TopologyError(f"handler {handler!r} is already registered")
        aid = len(self._agents)
        self._agents.append(_Agent(aid, kind, handler, name or f"{kind.value}{aid}", clocked))
        return aid

    def connect(self, src: AgentId, dst: AgentId, kind: EdgeKind) -> Edge:
        if self._sealed:
            raise TopologyError("network is sealed; cannot add edges")
        for a in (src, dst):
            if not 0 <= a < len(self._agents):
                raise TopologyError(f"unknown agent id {a}")
        if src == dst:
            raise TopologyError(f"self-loop on agent {src}")
        edge = Edge(len(self._edges), src, dst, kind)
        self._edges.append(edge)
        self._agents[src].outgoing.append(edge)
        return edge

    def seal(self) -> None:
        for a in self._agents:
            if a.kind is AgentKind.CHECK_VIOLATION and not any(
                e.kind in (EdgeKind.FEEDBACK, EdgeKind.DATA) for e in a.outgoing
            ):
                raise TopologyError(
                    f"check-violation agent {a.name} needs an outgoing Feedback or Data edge"
                )
        self._sealed = True

    # inspection -------------------------------------------------------------
    @property
    def sealed(self) -> bool:
        return self._sealed

    @property
    def edges(self) -> list[Edge]:
        return list(self._edges)

    def kind(self, agent: AgentId) -> AgentKind:
        return self._agents[agent].kind

    def name(self, agent: AgentId) -> str:
        return self._agents[agent].name

    def agents(self) -> list[tuple[AgentId, AgentKind]]:
        return [(a.id, a.kind) for a in self._agents]

    def names(self) -> dict[AgentId, str]:
        return {a.id: a.name for a in self._agents}

    def kind_discipline_violations(self) -> list[Edge]:
        """Feedback edges that do not end at a Control or Source agent."""
        ok = (AgentKind.CONTROL, AgentKind.SOURCE)
        return [e for e in self._edges
                if e.kind is EdgeKind.FEEDBACK and self._agents[e.dst].kind not in ok]

    # execution ----------------------------------------------------------------
    def run_until(
        self,
        stop: Callable[[RunState], bool],
        seed: int,
        max_ticks: Optional[int] = None,
    ) -> Trace:
        if not self._sealed:
            raise TopologyError("seal() the network before running it")
        for a in self._agents:
            a.halted = False
        return _Runner(self, seed).run(stop, max_ticks)


class _Runner:
    def __init__(self, network: Network, seed: int):
        self.net = network
        self.rng = np.random.default_rng(seed)
        self.queue: deque[tuple[AgentId, WakeCause]] = deque()
        self.trace = Trace(names=network.names())
        self.tick = 0

    def _activate(self, agent: _Agent, cause: WakeCause, parent=None) -> Activation:
        act = Activation(self, agent, self.tick, cause)
        act.seq = seq = len(self.trace)
        # reserve the slot so nested pulls are logged after their caller
        self.trace.append(None)
        log.debug("tick %d: wake %s by %s", self.tick, agent.name, cause.describe())
        agent.handler(act)
        self.trace[seq] = TraceEntry(
            seq, self.tick, agent.id, cause, tuple(act.emitted), tuple(act.notes), parent
        )
        return act

    def pull(self, caller: Activation, source: AgentId) -> Message:
        req = caller.agent
        if not any(e.dst == source and e.kind is EdgeKind.DATA
                   for e in self.net._agents[req].outgoing):
            raise PullError(f"no Data edge from agent {req} to agent {source}")
        act = self._activate(self.net._agents[source], DataRequested(req), parent=caller.seq)
        if act.reply_payload is None:
            raise PullError(f"source agent {self.net.name(source)} returned nothing")
        return Message(act.reply_payload, self.tick, source)

    def run(self, stop, max_ticks) -> Trace:
        state = RunState(0, self.trace, self.net)
        while True:
            state.tick = self.tick
            if stop(state):
                return self.trace
            if max_ticks is not None and self.tick >= max_ticks:
                return self.trace
            clocked = [a for a in self.net._agents if a.clocked and not a.halted]
            if not clocked and not self.queue:
                raise DeadlockError(self.tick, [a.name for a in self.net._agents])
            for a in clocked:
                self.queue.append((a.id, ClockTick(self.tick)))
            while self.queue:
                aid, cause = self.queue.popleft()
                self._activate(self.net._agents[aid], cause)
                if stop(state):
                    return self.trace
            self.tick += 1


# -- example topology -----------------------------------------------------------

def example_network(bound: float = 3.0, p_max: float = 0.05):
    """Build the minimal monitor loop: Control -> Predict -> Fusion <- Sensor,
    Fusion -> Check, Check -feedback-> Control.

    The tracked state is a scalar lateral offset with Gaussian belief; the
    check agent asks Control to reverse course when the predicted offset is
    likely to leave ``[-bound, bound]``. Returns ``(network, ids)``.
    """
    from statistics import NormalDist

    world = {"truth": 0.0, "velocity": 0.4}
    state = {"belief": (0.0, 0.01), "reading": None, "prior": None}
    net = Network()

    def control(act: Activation):
        if isinstance(act.cause, ClockTick):
            world["truth"] += world["velocity"] + act.rng.normal(0.0, 0.1)
            act.emit(ControlPlan(world["velocity"], belief=state["belief"]))
        elif act.payload.signal is Signal.CHANGE:
            world["velocity"] = -world["velocity"]

    def predict(act: Activation):
        mean, var = act.payload.belief
        act.emit(Distribution((mean + act.payload.move, var + 0.01)))

    def sensor(act: Activation):
        act.emit(SensorReading(world["truth"] + act.rng.normal(0.0, 0.5)))

    def fusion(act: Activation):
        if isinstance(act.payload, SensorReading):
            state["reading"] = act.payload.value
        else:
            state["prior"] = act.payload.value
        if state["reading"] is None or state["prior"] is None:
            return
        mean, var = state["prior"]
        gain = var / (var + 0.25)
        post = (mean + gain * (state["reading"] - mean), (1 - gain) * var)
        state["belief"] = post
        state["reading"] = state["prior"] = None
        act.emit(Distribution(post))

    def check(act: Activation):
        mean, var = act.payload.value
        spread = NormalDist(mean + world["velocity"], (var + 0.01) ** 0.5)
        p = spread.cdf(-bound) + 1.0 - spread.cdf(bound)
        act.emit(Feedback(Signal.CHANGE if p > p_max else Signal.CONTINUE, p))

    ids = {
        "control": net.register(AgentKind.CONTROL, control, "Control", clocked=True),
        "sensor": net.register(AgentKind.SOURCE, sensor, "Sensor", clocked=True),
        "predict": net.register(AgentKind.PREDICTION, predict, "Predict"),
        "fusion": net.register(AgentKind.FUSION, fusion, "Fusion"),
        "check": net.register(AgentKind.CHECK_VIOLATION, check, "CheckViolation"),
    }
    net.connect(ids["control"], ids["predict"], EdgeKind.TUPLE)
    net.connect(ids["predict"], ids["fusion"], EdgeKind.TUPLE)
    net.connect(ids["sensor"], ids["fusion"], EdgeKind.TUPLE)
    net.connect(ids["fusion"], ids["check"], EdgeKind.TUPLE)
    net.connect(ids["check"], ids["control"], EdgeKind.FEEDBACK)
    net.seal()
    return net, ids
