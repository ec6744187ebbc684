"""Single-node execution engine.

Runs the actors of one graph (or of one node's subgraph) over bounded
token buffers: evaluates enablement, fires kernels, applies control-table
rate settings, and detects deadlock when progress stops short of the
frame budget.

Firing discipline
-----------------
An actor is enabled when every bound data in-port holds at least its
current rate in tokens and every bound out-port has room for what the
firing will produce (non-blocking firing: space is reserved up front, so
occupancy can never overrun capacity). Actors with a control-in port wait
for one control token per firing; the token's setting index fixes their
rates for exactly that firing. If a setting zeroes all data in-rates the
firing degrades to a no-op that consumes only the control token, which
keeps control and data streams aligned however long a branch stays off.

An actor that owns a control table (its control-out port feeds other
actors) picks the setting inside its kernel; enablement therefore reserves
output space for the largest rate any settings row could select, and the
engine trims the kernel's optimistic output down to the emitted setting.
"""

from __future__ import annotations

import random
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import yaml

from .buffers import Token, TokenBuffer
from .kernels import FiringContext, KernelError, KernelRegistry
from .metrics import MetricsCollector, now_us
from .model import CONTROL_IN, CONTROL_OUT, IN, OUT, GraphSpec, MappingSpec, PortRef

__all__ = [
    "EngineConfig",
    "EngineError",
    "PayloadSizeError",
    "ActorState",
    "FiringRecord",
    "ProgressReport",
    "BlockedActor",
    "DeadlockDiagnosis",
    "Engine",
]

DETERMINISTIC = "deterministic-sequential"
CONCURRENT = "concurrent"

IDLE = "idle"
FIRING = "firing"
FAILED = "failed"
DEAD_INPUT_DISABLED = "dead-input-disabled"


class EngineError(RuntimeError):
    pass


class PayloadSizeError(EngineError):
    """Kernel produced payloads inconsistent with port rate or token size."""


@dataclass
class EngineConfig:
    mode: str = DETERMINISTIC
    seed: int = 0
    fairness: str = "fire-all-enabled"
    frame_budget: int | None = None
    cost_mode: str = "sleep"  # sleep | busywait
    source_period_us: float = 0.0  # minimum spacing between source firings

    def __post_init__(self) -> None:
        if self.mode not in (DETERMINISTIC, CONCURRENT):
            raise EngineError(f"unknown scheduling mode {self.mode!r}")
        if self.cost_mode not in ("sleep", "busywait", "hybrid"):
            raise EngineError(f"unknown cost mode {self.cost_mode!r}")

    @classmethod
    def from_text(cls, text: str) -> "EngineConfig":
        doc = yaml.safe_load(text) or {}
        if not isinstance(doc, dict):
            raise EngineError("engine config must be a key/value mapping")
        known = {"mode", "seed", "fairness", "frames", "cost_mode", "source_period_us"}
        unknown = set(doc) - known
        if unknown:
            raise EngineError(f"engine config: unknown key(s) {sorted(unknown)}")
        return cls(
            mode=doc.get("mode", DETERMINISTIC),
            seed=int(doc.get("seed", 0)),
            fairness=doc.get("fairness", "fire-all-enabled"),
            frame_budget=None if doc.get("frames") is None else int(doc["frames"]),
            cost_mode=doc.get("cost_mode", "sleep"),
            source_period_us=float(doc.get("source_period_us", 0.0)),
        )


@dataclass
class ActorState:
    actor_id: str
    status: str = IDLE
    fire_count: int = 0
    emitted_frames: int = 0  # sources only
    last_emit_us: int = -1
    next_emit_due_us: int = -1


@dataclass
class FiringRecord:
    actor_id: str
    frame: int
    consumed: dict[str, int]
    produced: dict[str, int]
    t_start_us: int
    t_end_us: int
    noop: bool = False
    failed: bool = False

    @property
    def elapsed_us(self) -> int:
        return self.t_end_us - self.t_start_us


@dataclass
class ProgressReport:
    fired: list[str]

    @property
    def quiescent(self) -> bool:
        return not self.fired


@dataclass
class BlockedActor:
    actor_id: str
    reasons: list[str]
    dead_input: bool = False


@dataclass
class DeadlockDiagnosis:
    blocked: list[BlockedActor]
    buffer_census: dict[str, int]

    def render(self) -> str:
        lines = ["deadlock diagnosis:"]
        for b in self.blocked:
            tag = " (dead link)" if b.dead_input else ""
            lines.append(f"  {b.actor_id}{tag}: " + "; ".join(b.reasons))
        lines.append("  census: " + ", ".join(f"{k}={v}" for k, v in sorted(self.buffer_census.items())))
        return "\n".join(lines)


def _decode_control(payload: bytes) -> int:
    return int.from_bytes(payload, "big")


def _encode_control(index: int, size: int) -> bytes:
    return index.to_bytes(size, "big")


class Engine:
    """Executes the given actors of a graph over bounded token buffers.

    ``actor_ids`` restricts execution to one node's subgraph; buffers are
    created for every FIFO touching those actors, so FIFOs whose far side
    lives on another node surface here as plain buffers the transport
    fabric drains (egress) or fills (ingress).
    """

    def __init__(
        self,
        graph: GraphSpec,
        registry: KernelRegistry,
        config: EngineConfig | None = None,
        collector: MetricsCollector | None = None,
        node_id: str = "local",
        actor_ids: list[str] | None = None,
    ):
        self.graph = graph
        self.registry = registry
        self.config = config or EngineConfig()
        self.collector = collector or MetricsCollector()
        self.node_id = node_id
        self.actor_ids = list(actor_ids) if actor_ids is not None else [a.id for a in graph.actors]
        self._actor_set = set(self.actor_ids)

        for aid in self.actor_ids:
            actor = graph.actor(aid)
            if actor.kernel not in registry:
                raise EngineError(f"actor {aid!r}: kernel {actor.kernel!r} is not registered")

        self.buffers: dict[str, TokenBuffer] = {}
        for f in graph.fifos:
            if f.src[0] in self._actor_set or f.dst[0] in self._actor_set:
                self.buffers[f.id] = TokenBuffer(f.id, f.capacity, f.token_bytes)

        self.rates: dict[PortRef, int] = graph.initial_rates()
        self.states: dict[str, ActorState] = {aid: ActorState(aid) for aid in self.actor_ids}
        self.actor_streams, self.port_streams = graph.stream_map()
        self.dead_fifos: set[str] = set()
        self.dead_streams: set[str] = set()
        self.completed: dict[str, set[int]] = {}
        self.sink_log: dict[PortRef, list[tuple[int, bytes]]] = {}
        self.failures: list[tuple[str, str]] = []  # (actor, message)
        self._kernel_state: dict[str, dict] = {aid: {} for aid in self.actor_ids}
        self._pacing_rngs: dict[str, random.Random] = {}
        self._order = self._topological_order()
        self._own_table_max: dict[PortRef, int] = self._own_controlled_max_rates()
        self._pool: ThreadPoolExecutor | None = None
        self._fire_lock = threading.Lock()

        self.collector.labels.setdefault("mode", self.config.mode)
        self.collector.labels.setdefault("seed", self.config.seed)
        self.collector.labels.setdefault("fairness", self.config.fairness)
        self.collector.labels.setdefault("cost_mode", self.config.cost_mode)

    # -- construction helpers -------------------------------------------

    def _topological_order(self) -> list[str]:
        indeg = {aid: 0 for aid in self.actor_ids}
        succ: dict[str, list[str]] = {aid: [] for aid in self.actor_ids}
        for f in self.graph.fifos:
            if f.src[0] in self._actor_set and f.dst[0] in self._actor_set:
                indeg[f.dst[0]] += 1
                succ[f.src[0]].append(f.dst[0])
        order = []
        ready = sorted(aid for aid, d in indeg.items() if d == 0)
        while ready:
            aid = ready.pop(0)
            order.append(aid)
            for nxt in succ[aid]:
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    ready.append(nxt)
            ready.sort()
        for aid in sorted(indeg):  # cycle fallback: keep id order
            if aid not in order:
                order.append(aid)
        return order

    def _own_controlled_max_rates(self) -> dict[PortRef, int]:
        out: dict[PortRef, int] = {}
        for t in self.graph.control_tables:
            owner = t.control_port[0]
            for i, ref in enumerate(t.controlled):
                if ref[0] == owner:
                    out[ref] = max((s.rates[i] for s in t.settings if i < len(s.rates)), default=0)
        return out

    # -- port/buffer views ----------------------------------------------

    def _bound_in(self, aid: str):
        actor = self.graph.actor(aid)
        for p in actor.ports_by_direction(IN):
            f = self.graph.fifo_of_input.get((aid, p.id))
            if f is not None and f.id in self.buffers:
                yield p, self.buffers[f.id]

    def _bound_out(self, aid: str):
        actor = self.graph.actor(aid)
        for p in actor.ports_by_direction(OUT):
            for f in self.graph.fifos_of_output.get((aid, p.id), []):
                if f.id in self.buffers:
                    yield p, self.buffers[f.id]

    def _control_in(self, aid: str):
        actor = self.graph.actor(aid)
        for p in actor.ports_by_direction(CONTROL_IN):
            f = self.graph.fifo_of_input.get((aid, p.id))
            if f is not None and f.id in self.buffers:
                yield p, self.buffers[f.id]

    def _control_out(self, aid: str):
        actor = self.graph.actor(aid)
        for p in actor.ports_by_direction(CONTROL_OUT):
            fifos = [
                self.buffers[f.id]
                for f in self.graph.fifos_of_output.get((aid, p.id), [])
                if f.id in self.buffers
            ]
            if fifos:
                yield p, fifos

    def is_source(self, aid: str) -> bool:
        return not any(True for _ in self._bound_in(aid))

    def _pacing_rng(self, aid: str) -> random.Random:
        rng = self._pacing_rngs.get(aid)
        if rng is None:
            rng = random.Random(f"{self.config.seed}:{aid}")
            self._pacing_rngs[aid] = rng
        return rng

    def is_sink(self, aid: str) -> bool:
        return not any(True for _ in self._bound_out(aid))

    # -- enablement -------------------------------------------------------

    def effective_rates(self, aid: str) -> dict[str, int] | None:
        """Port rates this firing would run under, or None while a control
        token is still missing."""
        actor = self.graph.actor(aid)
        eff = {p.id: self.rates[(aid, p.id)] for p in actor.ports}
        for p, buf in self._control_in(aid):
            head = buf.peek()
            if head is None:
                return None
            table = self.graph.table_of_control_in.get((aid, p.id))
            if table is not None:
                try:
                    eff.update(table.rates_for_actor(aid, _decode_control(head.payload)))
                except ValueError:
                    return None  # unknown setting index: treat as not enabled
        return eff

    def enabled(self, aid: str) -> bool:
        state = self.states[aid]
        if state.status in (FAILED, DEAD_INPUT_DISABLED):
            return False
        eff = self.effective_rates(aid)
        if eff is None:
            return False

        actor = self.graph.actor(aid)
        bound_in = list(self._bound_in(aid))

        if self.is_source(aid):
            if self.config.frame_budget is not None and state.emitted_frames >= self.config.frame_budget:
                return False
            if state.next_emit_due_us >= 0 and now_us() < state.next_emit_due_us:
                return False  # paced source between frames
            if self.config.frame_budget is None and not actor.params.get("free_running", False):
                # Without a budget a source never self-triggers; run_until sets one.
                return False

        # Unbound data in-port that still demands tokens can never be satisfied.
        bound_ids = {p.id for p, _ in bound_in}
        for p in actor.ports_by_direction(IN):
            if p.id not in bound_ids and eff[p.id] > 0:
                return False

        if bound_in and all(eff[p.id] == 0 for p, _ in bound_in):
            return True  # no-op firing: only the control token is consumed

        for p, buf in bound_in:
            if buf.occupancy < eff[p.id]:
                return False
        for p, buf in self._bound_out(aid):
            needed = max(eff[p.id], self._own_table_max.get((aid, p.id), 0))
            if buf.free < needed:
                return False
        for p, bufs in self._control_out(aid):
            for buf in bufs:
                if buf.free < eff[p.id]:
                    return False
        return True

    def enabled_actors(self) -> list[str]:
        return [aid for aid in self._order if self.enabled(aid)]

    # -- firing -----------------------------------------------------------

    def fire(self, aid: str) -> FiringRecord:
        """Fire one enabled actor; callers must have checked enablement."""
        state = self.states[aid]
        actor = self.graph.actor(aid)
        eff = self.effective_rates(aid)
        if eff is None:
            raise EngineError(f"fire({aid!r}) while not enabled (missing control token)")
        t_start = now_us()
        state.status = FIRING

        control_frame = -1
        for p, buf in self._control_in(aid):
            token = buf.pop(1)[0]
            control_frame = max(control_frame, token.frame)
            table = self.graph.table_of_control_in.get((aid, p.id))
            if table is not None:
                for port_id, rate in table.rates_for_actor(
                    aid, _decode_control(token.payload)
                ).items():
                    self.rates[(aid, port_id)] = rate

        bound_in = list(self._bound_in(aid))
        if bound_in and all(eff[p.id] == 0 for p, _ in bound_in):
            state.fire_count += 1
            state.status = IDLE
            t_end = now_us()
            stream = self.actor_streams.get(aid) or ""
            self.collector.record(control_frame, stream, self.node_id, aid, "fire_start", t_start)
            self.collector.record(control_frame, stream, self.node_id, aid, "fire_end", t_end)
            return FiringRecord(aid, control_frame, {}, {}, t_start, t_end, noop=True)

        inputs: dict[str, list[bytes]] = {}
        consumed: dict[str, int] = {}
        consumed_tokens: dict[str, list[Token]] = {}
        frame = control_frame
        for p, buf in bound_in:
            toks = buf.pop(eff[p.id]) if eff[p.id] > 0 else []
            consumed_tokens[p.id] = toks
            inputs[p.id] = [t.payload for t in toks]
            consumed[p.id] = len(toks)
            for t in toks:
                frame = max(frame, t.frame)

        source = self.is_source(aid)
        if source:
            frame = state.emitted_frames
            state.emitted_frames += 1
            state.last_emit_us = t_start
            period = float(actor.params.get("period_us", self.config.source_period_us))
            if period > 0:
                jitter = float(actor.params.get("jitter_us", 0))
                if jitter > 0:
                    period += self._pacing_rng(aid).uniform(0, jitter)
                state.next_emit_due_us = t_start + int(period)

        out_ports = list(self._bound_out(aid))
        ctrl_ports = list(self._control_out(aid))
        ctx = FiringContext(
            actor_id=aid,
            params=actor.params,
            inputs=inputs,
            frame=frame,
            fire_index=state.fire_count,
            out_rates={
                p.id: max(eff[p.id], self._own_table_max.get((aid, p.id), 0))
                for p, _ in out_ports
            },
            out_token_bytes={p.id: p.token_bytes for p, _ in out_ports},
            control_out_ports=tuple(p.id for p, _ in ctrl_ports),
            cost_mode=self.config.cost_mode,
            state=self._kernel_state[aid],
        )
        try:
            result = self.registry.resolve(actor.kernel)(ctx)
        except Exception as exc:
            state.status = FAILED
            state.fire_count += 1
            self.failures.append((aid, str(exc)))
            t_end = now_us()
            stream = self.actor_streams.get(aid) or ""
            self.collector.record(frame, stream, self.node_id, aid, "fire_start", t_start)
            self.collector.record(frame, stream, self.node_id, aid, "fire_end", t_end)
            return FiringRecord(aid, frame, consumed, {}, t_start, t_end, failed=True)

        produced = self._emit_outputs(aid, actor, result, out_ports, ctrl_ports, frame)

        state.fire_count += 1
        state.status = IDLE
        t_end = now_us()
        stream = self.actor_streams.get(aid) or ""
        if source:
            self.collector.record(frame, self.graph.stream_of_source(aid), self.node_id,
                                  aid, "submit", t_start)
        self.collector.record(frame, stream, self.node_id, aid, "fire_start", t_start)
        self.collector.record(frame, stream, self.node_id, aid, "fire_end", t_end)

        if self.is_sink(aid):
            for p, _ in bound_in:
                port_stream = self.port_streams.get((aid, p.id)) or stream
                for tok in consumed_tokens[p.id]:
                    self.collector.record(tok.frame, port_stream, self.node_id, aid,
                                          "complete", t_end)
                    self.completed.setdefault(port_stream, set()).add(tok.frame)
                    self.sink_log.setdefault((aid, p.id), []).append((tok.frame, tok.payload))

        return FiringRecord(aid, frame, consumed, produced, t_start, t_end)

    def _emit_outputs(self, aid, actor, result, out_ports, ctrl_ports, frame) -> dict[str, int]:
        if result is None:
            result = {}
        if isinstance(result, list):
            result = {p.id: list(result) for p, _ in out_ports}
        if not isinstance(result, dict):
            raise PayloadSizeError(f"actor {aid!r}: kernel returned {type(result).__name__}")

        # Control first: the emitted setting fixes this actor's own out-rates.
        for p, bufs in ctrl_ports:
            values = result.get(p.id, [])
            rate = self.rates[(aid, p.id)]
            if len(values) != rate:
                raise PayloadSizeError(
                    f"actor {aid!r}: control port {p.id!r} needs {rate} setting(s), "
                    f"kernel returned {len(values)}"
                )
            table = self.graph.table_of_control_out.get((aid, p.id))
            for value in values:
                index = int(value)
                if table is not None:
                    table.setting(index)  # unknown index fails loudly
                    for port_id, port_rate in table.rates_for_actor(aid, index).items():
                        self.rates[(aid, port_id)] = port_rate
                token = Token(_encode_control(index, p.token_bytes), frame)
                for buf in bufs:
                    buf.push([token])

        produced: dict[str, int] = {}
        for p, buf in out_ports:
            rate = self.rates[(aid, p.id)]
            payloads = result.get(p.id, [])
            if len(payloads) < rate:
                raise PayloadSizeError(
                    f"actor {aid!r}: port {p.id!r} needs {rate} token(s), "
                    f"kernel returned {len(payloads)}"
                )
            payloads = payloads[:rate]  # trim optimistic own-controlled production
            for payload in payloads:
                if len(payload) != p.token_bytes:
                    raise PayloadSizeError(
                        f"actor {aid!r}: port {p.id!r} payload {len(payload)} B, "
                        f"expected {p.token_bytes} B"
                    )
            buf.push([Token(payload, frame) for payload in payloads])
            produced[p.id] = rate
        for p, _ in ctrl_ports:
            produced[p.id] = self.rates[(aid, p.id)]
        return produced

    # -- scheduling --------------------------------------------------------

    def step(self, select: Callable[[list[str]], str] | None = None) -> ProgressReport:
        """One scheduling step.

        Deterministic mode fires the first enabled actor in topological
        order (ties broken by id); concurrent mode dispatches every
        enabled actor of the snapshot. ``select`` overrides the choice for
        interleaving exploration in tests.
        """
        ready = self.enabled_actors()
        if not ready:
            return ProgressReport([])
        if select is not None:
            chosen = select(ready)
            self.fire(chosen)
            return ProgressReport([chosen])
        if self.config.mode == DETERMINISTIC:
            self.fire(ready[0])
            return ProgressReport([ready[0]])
        if len(ready) == 1:
            self.fire(ready[0])
            return ProgressReport(ready)
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=min(32, len(self.actor_ids)))
        futures = [self._pool.submit(self.fire, aid) for aid in ready]
        for fut in futures:
            fut.result()
        return ProgressReport(ready)

    def step_round(self) -> int:
        """Fire every currently enabled actor once; returns the count fired."""
        ready = self.enabled_actors()
        for aid in ready:
            if self.enabled(aid):
                self.fire(aid)
        return len(ready)

    @property
    def quiescent(self) -> bool:
        return not self.enabled_actors()

    def live_streams(self) -> list[str]:
        return [s for s in self.graph.stream_names() if s not in self.dead_streams]

    def _streams_done(self, frames: int) -> bool:
        for stream in self.live_streams():
            if len(self.completed.get(stream, ())) < frames:
                return False
        return True

    def run_until(self, frames: int, select=None) -> tuple["MetricsCollector", DeadlockDiagnosis | None]:
        """Run until every live stream completes ``frames`` frames.

        Returns the collector plus a deadlock diagnosis if progress stopped
        early; quiescence with only dead streams pending is not a deadlock.
        """
        self.config.frame_budget = frames
        diagnosis = None
        while not self._streams_done(frames):
            report = self.step(select=select)
            if report.quiescent:
                if not self._streams_done(frames):
                    diagnosis = self.detect_deadlock()
                break
        return self.collector, diagnosis

    # -- failure handling ---------------------------------------------------

    def mark_dead_input(self, fifo_id: str) -> None:
        """Record a permanently dead FIFO and disable actors stranded by it.

        An actor is stranded when every bound data in-port is fed by a dead
        FIFO (directly or through already-stranded producers); its output
        FIFOs die with it so the closure propagates downstream.
        """
        self.dead_fifos.add(fifo_id)
        changed = True
        while changed:
            changed = False
            for aid in self.actor_ids:
                state = self.states[aid]
                if state.status == DEAD_INPUT_DISABLED:
                    continue
                bound = list(self._bound_in(aid))
                if not bound:
                    continue
                if all(buf.fifo_id in self.dead_fifos and buf.occupancy == 0 for _, buf in bound):
                    state.status = DEAD_INPUT_DISABLED
                    for _, buf in self._bound_out(aid):
                        self.dead_fifos.add(buf.fifo_id)
                    changed = True
        self._refresh_dead_streams()

    def _refresh_dead_streams(self) -> None:
        for stream in self.graph.stream_names():
            sink_states = [
                self.states[a.id].status
                for a in self.graph.sinks()
                if a.id in self._actor_set and self.actor_streams.get(a.id) == stream
            ]
            if sink_states and all(s == DEAD_INPUT_DISABLED for s in sink_states):
                self.dead_streams.add(stream)

    def detect_deadlock(self) -> DeadlockDiagnosis | None:
        """Diagnose why nothing can fire; None while any actor is enabled.

        Exhausted sources and finished actors are not blocked; each blocked
        actor lists its unmet conditions and whether a dead link causes them.
        """
        if self.enabled_actors():
            return None
        blocked = []
        for aid in self._order:
            state = self.states[aid]
            if state.status == FAILED:
                blocked.append(BlockedActor(aid, ["kernel failed"], dead_input=False))
                continue
            if state.status == DEAD_INPUT_DISABLED:
                blocked.append(BlockedActor(aid, ["inputs dead"], dead_input=True))
                continue
            reasons = []
            dead = False
            eff = self.effective_rates(aid)
            if eff is None:
                for p, buf in self._control_in(aid):
                    if buf.occupancy == 0:
                        reasons.append(f"awaiting control token on {buf.fifo_id}")
                        dead = dead or buf.fifo_id in self.dead_fifos
            else:
                if self.is_source(aid):
                    if (
                        self.config.frame_budget is not None
                        and state.emitted_frames >= self.config.frame_budget
                    ):
                        continue  # exhausted, not blocked
                for p, buf in self._bound_in(aid):
                    if buf.occupancy < eff[p.id]:
                        reasons.append(
                            f"needs {eff[p.id]} token(s) on {buf.fifo_id}, has {buf.occupancy}"
                        )
                        dead = dead or buf.fifo_id in self.dead_fifos
                for p, buf in self._bound_out(aid):
                    needed = max(eff[p.id], self._own_table_max.get((aid, p.id), 0))
                    if buf.free < needed:
                        reasons.append(
                            f"needs {needed} free slot(s) on {buf.fifo_id}, has {buf.free}"
                        )
                        dead = dead or buf.fifo_id in self.dead_fifos
                for p, bufs in self._control_out(aid):
                    for buf in bufs:
                        if buf.free < eff[p.id]:
                            reasons.append(f"control fifo {buf.fifo_id} full")
            if reasons:
                blocked.append(BlockedActor(aid, reasons, dead_input=dead))
        if not blocked:
            return None
        census = {fid: buf.occupancy for fid, buf in self.buffers.items()}
        return DeadlockDiagnosis(blocked=blocked, buffer_census=census)

    # -- cloning (interleaving exploration in tests) -------------------------

    def clone(self) -> "Engine":
        twin = Engine.__new__(Engine)
        twin.graph = self.graph
        twin.registry = self.registry
        twin.config = EngineConfig(**vars(self.config))
        twin.collector = MetricsCollector()
        twin.node_id = self.node_id
        twin.actor_ids = list(self.actor_ids)
        twin._actor_set = set(self._actor_set)
        twin.buffers = {fid: buf.clone() for fid, buf in self.buffers.items()}
        twin.rates = dict(self.rates)
        twin.states = {
            aid: ActorState(aid, s.status, s.fire_count, s.emitted_frames,
                            s.last_emit_us, s.next_emit_due_us)
            for aid, s in self.states.items()
        }
        twin.actor_streams = self.actor_streams
        twin.port_streams = self.port_streams
        twin.dead_fifos = set(self.dead_fifos)
        twin.dead_streams = set(self.dead_streams)
        twin.completed = {k: set(v) for k, v in self.completed.items()}
        twin.sink_log = {k: list(v) for k, v in self.sink_log.items()}
        twin.failures = list(self.failures)
        twin._kernel_state = {aid: dict(st) for aid, st in self._kernel_state.items()}
        twin._pacing_rngs = {}
        twin._order = list(self._order)
        twin._own_table_max = self._own_table_max
        twin._pool = None
        twin._fire_lock = threading.Lock()
        return twin
