"""Dataflow graph IR: actors, ports, FIFOs, control tables, and node mappings.

All values here are immutable after construction and safe to share across
concurrently executing engines. Structural invariants beyond basic field
sanity are checked by :mod:`edgeflow.validate`, which reports violations
instead of raising.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

__all__ = [
    "GraphError",
    "PortRef",
    "PortSpec",
    "ActorSpec",
    "FifoSpec",
    "RateSetting",
    "ControlTable",
    "GraphSpec",
    "NodeDecl",
    "LinkBinding",
    "RedundancySpec",
    "MappingSpec",
    "apply_rate_setting",
    "graph_stats",
    "DEFAULT_FIFO_CAPACITY",
]

DEFAULT_FIFO_CAPACITY = 8

IN = "in"
OUT = "out"
CONTROL_IN = "control-in"
CONTROL_OUT = "control-out"
DIRECTIONS = (IN, OUT, CONTROL_IN, CONTROL_OUT)

STATIC = "static"
DYNAMIC = "dynamic"
DYNAMIC_PROCESSING = "dynamic-processing"
ACTOR_KINDS = (STATIC, DYNAMIC, DYNAMIC_PROCESSING)

ENDPOINT = "endpoint"
SERVER = "server"

PortRef = tuple[str, str]  # (actor id, port id)


class GraphError(ValueError):
    """Malformed graph or mapping construction/reference error."""


@dataclass(frozen=True)
class PortSpec:
    """One actor port. ``rate`` is tokens per firing; 0 is legal.

    A ``dynamic`` port's effective rate is set at run time through a
    control table; the declared ``rate`` then only serves as the initial
    value before the first control token arrives.
    """

    id: str
    direction: str
    rate: int
    token_bytes: int
    dynamic: bool = False

    def __post_init__(self) -> None:
        if self.direction not in DIRECTIONS:
            raise GraphError(f"port {self.id!r}: unknown direction {self.direction!r}")
        if not isinstance(self.rate, int) or isinstance(self.rate, bool):
            raise GraphError(f"port {self.id!r}: rate must be an integer")
        if not isinstance(self.token_bytes, int) or isinstance(self.token_bytes, bool):
            raise GraphError(f"port {self.id!r}: token_bytes must be an integer")

    @property
    def is_data(self) -> bool:
        return self.direction in (IN, OUT)

    @property
    def is_input(self) -> bool:
        return self.direction in (IN, CONTROL_IN)


@dataclass(frozen=True)
class ActorSpec:
    """Graph vertex: an opaque kernel plus its ports.

    ``kind`` is ``static`` (fixed rates, no control ports), ``dynamic``
    (participates in a control exchange), or ``dynamic-processing``
    (enabled/disabled entirely by an incoming control signal).
    """

    id: str
    kernel: str
    ports: tuple[PortSpec, ...]
    kind: str = STATIC
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ACTOR_KINDS:
            raise GraphError(f"actor {self.id!r}: unknown kind {self.kind!r}")
        object.__setattr__(self, "ports", tuple(self.ports))
        seen = set()
        for p in self.ports:
            if p.id in seen:
                raise GraphError(f"actor {self.id!r}: duplicate port id {p.id!r}")
            seen.add(p.id)

    def port(self, port_id: str) -> PortSpec:
        for p in self.ports:
            if p.id == port_id:
                return p
        raise GraphError(f"actor {self.id!r} has no port {port_id!r}")

    def ports_by_direction(self, direction: str) -> tuple[PortSpec, ...]:
        return tuple(p for p in self.ports if p.direction == direction)


@dataclass(frozen=True)
class FifoSpec:
    """Bounded single-producer single-consumer token buffer between two ports."""

    id: str
    src: PortRef
    dst: PortRef
    capacity: int = DEFAULT_FIFO_CAPACITY
    token_bytes: int = 0  # 0 = derive from the producing port

    def __post_init__(self) -> None:
        object.__setattr__(self, "src", tuple(self.src))
        object.__setattr__(self, "dst", tuple(self.dst))


@dataclass(frozen=True)
class RateSetting:
    """One control-table row: a setting index and a rate per controlled port."""

    index: int
    rates: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rates", tuple(self.rates))


@dataclass(frozen=True)
class ControlTable:
    """Maps setting indices carried by control tokens to rate assignments.

    ``control_port`` is the emitting control-out port; ``controlled`` is
    the ordered set of dynamic ports whose rates each settings row assigns.
    """

    control_port: PortRef
    controlled: tuple[PortRef, ...]
    settings: tuple[RateSetting, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "control_port", tuple(self.control_port))
        object.__setattr__(self, "controlled", tuple(tuple(c) for c in self.controlled))
        object.__setattr__(self, "settings", tuple(self.settings))

    def setting(self, index: int) -> RateSetting:
        for s in self.settings:
            if s.index == index:
                return s
        raise GraphError(f"control table on {self.control_port}: no setting index {index}")

    def rates_for_actor(self, actor_id: str, index: int) -> dict[str, int]:
        """Rates a single actor should apply from the given settings row."""
        row = self.setting(index)
        return {
            port: rate
            for (owner, port), rate in zip(self.controlled, row.rates)
            if owner == actor_id
        }


class GraphSpec:
    """The directed dataflow graph: actors connected by FIFOs.

    Exposes the lookup maps the runtime needs. Data ports bind to at most
    one FIFO; a control-out port may fan out to several control FIFOs
    (the emitted token is copied into each).
    """

    def __init__(
        self,
        name: str,
        actors: list[ActorSpec] | tuple[ActorSpec, ...],
        fifos: list[FifoSpec] | tuple[FifoSpec, ...] = (),
        control_tables: list[ControlTable] | tuple[ControlTable, ...] = (),
    ):
        self.name = name
        self.actors = tuple(actors)
        self.control_tables = tuple(control_tables)

        self._actors_by_id: dict[str, ActorSpec] = {}
        for a in self.actors:
            if a.id in self._actors_by_id:
                raise GraphError(f"duplicate actor id {a.id!r}")
            self._actors_by_id[a.id] = a

        resolved = []
        for f in fifos:
            resolved.append(self._resolve_fifo(f))
        self.fifos: tuple[FifoSpec, ...] = tuple(resolved)

        self._fifos_by_id: dict[str, FifoSpec] = {}
        self.fifo_of_input: dict[PortRef, FifoSpec] = {}
        self.fifos_of_output: dict[PortRef, list[FifoSpec]] = {}
        for f in self.fifos:
            if f.id in self._fifos_by_id:
                raise GraphError(f"duplicate fifo id {f.id!r}")
            self._fifos_by_id[f.id] = f
            self.fifos_of_output.setdefault(f.src, []).append(f)
            if f.dst in self.fifo_of_input:
                raise GraphError(f"port {f.dst} consumed by more than one fifo")
            self.fifo_of_input[f.dst] = f

        # Control-in port -> the table whose control_port feeds it.
        self.table_of_control_in: dict[PortRef, ControlTable] = {}
        self.table_of_control_out: dict[PortRef, ControlTable] = {}
        for t in self.control_tables:
            self.table_of_control_out[t.control_port] = t
            for f in self.fifos_of_output.get(t.control_port, []):
                self.table_of_control_in[f.dst] = t

    def _resolve_fifo(self, f: FifoSpec) -> FifoSpec:
        for ref, what in ((f.src, "from"), (f.dst, "to")):
            actor = self._actors_by_id.get(ref[0])
            if actor is None:
                raise GraphError(f"fifo {f.id!r}: {what} references unknown actor {ref[0]!r}")
            try:
                actor.port(ref[1])
            except GraphError:
                raise GraphError(
                    f"fifo {f.id!r}: {what} references undeclared port {ref[0]}.{ref[1]}"
                ) from None
        if f.token_bytes == 0:
            src_port = self._actors_by_id[f.src[0]].port(f.src[1])
            return FifoSpec(f.id, f.src, f.dst, f.capacity, src_port.token_bytes)
        return f

    # -- lookups -------------------------------------------------------

    def actor(self, actor_id: str) -> ActorSpec:
        a = self._actors_by_id.get(actor_id)
        if a is None:
            raise GraphError(f"unknown actor {actor_id!r}")
        return a

    def has_actor(self, actor_id: str) -> bool:
        return actor_id in self._actors_by_id

    def fifo(self, fifo_id: str) -> FifoSpec:
        f = self._fifos_by_id.get(fifo_id)
        if f is None:
            raise GraphError(f"unknown fifo {fifo_id!r}")
        return f

    def has_fifo(self, fifo_id: str) -> bool:
        return fifo_id in self._fifos_by_id

    def port(self, ref: PortRef) -> PortSpec:
        return self.actor(ref[0]).port(ref[1])

    def sources(self) -> list[ActorSpec]:
        """Actors with no bound data input ports (frame generators)."""
        out = []
        for a in self.actors:
            if not any(
                (a.id, p.id) in self.fifo_of_input for p in a.ports_by_direction(IN)
            ):
                out.append(a)
        return out

    def sinks(self) -> list[ActorSpec]:
        """Actors with no bound data output ports (frame consumers)."""
        out = []
        for a in self.actors:
            if not any(
                (a.id, p.id) in self.fifos_of_output for p in a.ports_by_direction(OUT)
            ):
                out.append(a)
        return out

    def initial_rates(self) -> dict[PortRef, int]:
        return {(a.id, p.id): p.rate for a in self.actors for p in a.ports}

    def stream_of_source(self, actor_id: str) -> str:
        a = self.actor(actor_id)
        return str(a.params.get("stream", a.id))

    def stream_map(self) -> tuple[dict[str, str | None], dict[PortRef, str | None]]:
        """Resolve which stream each actor / each bound input port carries.

        A stream is identified by its source actor. Actors reached by more
        than one stream map to None (ambiguous, e.g. a shared server actor),
        but their input ports still resolve individually.
        """
        actor_streams: dict[str, set[str]] = {a.id: set() for a in self.actors}
        port_streams: dict[PortRef, set[str]] = {}
        for src in self.sources():
            label = self.stream_of_source(src.id)
            stack = [src.id]
            seen = set()
            while stack:
                aid = stack.pop()
                if aid in seen:
                    continue
                seen.add(aid)
                actor_streams[aid].add(label)
                actor = self._actors_by_id[aid]
                for p in actor.ports_by_direction(OUT):
                    for f in self.fifos_of_output.get((aid, p.id), []):
                        port_streams.setdefault(f.dst, set()).add(label)
                        stack.append(f.dst[0])
        actor_map = {
            aid: next(iter(s)) if len(s) == 1 else None for aid, s in actor_streams.items()
        }
        port_map = {
            ref: next(iter(s)) if len(s) == 1 else None for ref, s in port_streams.items()
        }
        return actor_map, port_map

    def stream_names(self) -> list[str]:
        return sorted({self.stream_of_source(a.id) for a in self.sources()})

    # -- identity ------------------------------------------------------

    def canonical_bytes(self) -> bytes:
        """Stable byte serialization covering the full graph structure."""
        parts: list[str] = [self.name]
        for a in sorted(self.actors, key=lambda a: a.id):
            parts.append(f"A {a.id} {a.kernel} {a.kind} {sorted(a.params.items())!r}")
            for p in a.ports:
                parts.append(
                    f"P {p.id} {p.direction} {p.rate} {p.token_bytes} {int(p.dynamic)}"
                )
        for f in sorted(self.fifos, key=lambda f: f.id):
            parts.append(f"F {f.id} {f.src} {f.dst} {f.capacity} {f.token_bytes}")
        for t in sorted(self.control_tables, key=lambda t: t.control_port):
            rows = " ".join(f"{s.index}:{','.join(map(str, s.rates))}" for s in t.settings)
            parts.append(f"T {t.control_port} {t.controlled} {rows}")
        return "\n".join(parts).encode("utf-8")

    def graph_hash(self) -> int:
        """64-bit structural hash exchanged during link handshakes."""
        digest = hashlib.sha256(self.canonical_bytes()).digest()
        return int.from_bytes(digest[:8], "big")

    def wire_fifo_ids(self) -> dict[str, int]:
        """Deterministic fifo id -> 32-bit wire id mapping (sorted order)."""
        return {fid: i for i, fid in enumerate(sorted(self._fifos_by_id))}

    def __repr__(self) -> str:
        return (
            f"GraphSpec({self.name!r}, actors={len(self.actors)}, "
            f"fifos={len(self.fifos)}, tables={len(self.control_tables)})"
        )


def graph_stats(g: GraphSpec) -> tuple[int, int]:
    """(actor count, fifo count) of the graph."""
    return len(g.actors), len(g.fifos)


def apply_rate_setting(
    rates: dict[PortRef, int], table: ControlTable, setting_index: int
) -> dict[PortRef, int]:
    """Return a new rate state with the table's row applied.

    Pure: the input mapping is never mutated. Ports outside the table's
    controlled set keep their rates.
    """
    row = table.setting(setting_index)
    updated = dict(rates)
    for ref, rate in zip(table.controlled, row.rates):
        updated[ref] = rate
    return updated


# -- mapping ------------------------------------------------------------


@dataclass(frozen=True)
class NodeDecl:
    id: str
    role: str  # endpoint | server
    platform_class: str = "generic"

    def __post_init__(self) -> None:
        if self.role not in (ENDPOINT, SERVER):
            raise GraphError(f"node {self.id!r}: unknown role {self.role!r}")


@dataclass(frozen=True)
class LinkBinding:
    """Transport binding for one FIFO: local, or a dialable network address."""

    transport: str  # local | mem | tcp
    address: str | None = None

    def __post_init__(self) -> None:
        if self.transport not in ("local", "mem", "tcp"):
            raise GraphError(f"unknown transport {self.transport!r}")
        if self.transport == "tcp" and not self.address:
            raise GraphError("tcp link binding requires an address")


REPLICATE = "replicate"
FAILOVER = "failover"


@dataclass(frozen=True)
class RedundancySpec:
    """Server redundancy: stream to all group members, or to one with failover."""

    mode: str = REPLICATE
    groups: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self) -> None:
        if self.mode not in (REPLICATE, FAILOVER):
            raise GraphError(f"unknown redundancy mode {self.mode!r}")
        object.__setattr__(self, "groups", tuple(tuple(g) for g in self.groups))

    def group_of(self, server_id: str) -> tuple[str, ...] | None:
        for g in self.groups:
            if server_id in g:
                return g
        return None


class MappingSpec:
    """Actor-to-node assignment plus per-FIFO transport bindings."""

    def __init__(
        self,
        nodes: list[NodeDecl] | tuple[NodeDecl, ...],
        assignments: dict[str, tuple[str, str]],
        links: dict[str, LinkBinding] | None = None,
        redundancy: RedundancySpec | None = None,
    ):
        self.nodes = tuple(nodes)
        self.assignments = dict(assignments)  # actor id -> (node id, unit label)
        self.links = dict(links or {})  # fifo id -> LinkBinding
        self.redundancy = redundancy or RedundancySpec()
        self._nodes_by_id = {}
        for n in self.nodes:
            if n.id in self._nodes_by_id:
                raise GraphError(f"duplicate node id {n.id!r}")
            self._nodes_by_id[n.id] = n

    def node(self, node_id: str) -> NodeDecl:
        n = self._nodes_by_id.get(node_id)
        if n is None:
            raise GraphError(f"unknown node {node_id!r}")
        return n

    def has_node(self, node_id: str) -> bool:
        return node_id in self._nodes_by_id

    def node_of_actor(self, actor_id: str) -> str:
        try:
            return self.assignments[actor_id][0]
        except KeyError:
            raise GraphError(f"actor {actor_id!r} has no node assignment") from None

    def actors_on(self, node_id: str) -> list[str]:
        return [a for a, (n, _) in self.assignments.items() if n == node_id]

    def servers(self) -> list[NodeDecl]:
        return [n for n in self.nodes if n.role == SERVER]

    def endpoints(self) -> list[NodeDecl]:
        return [n for n in self.nodes if n.role == ENDPOINT]

    def __repr__(self) -> str:
        return f"MappingSpec(nodes={len(self.nodes)}, actors={len(self.assignments)})"


def cross_fifos(graph: GraphSpec, mapping: MappingSpec) -> list[FifoSpec]:
    """FIFOs whose producer and consumer live on different nodes."""
    out = []
    for f in graph.fifos:
        if mapping.node_of_actor(f.src[0]) != mapping.node_of_actor(f.dst[0]):
            out.append(f)
    return out
