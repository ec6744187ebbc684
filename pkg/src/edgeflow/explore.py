"""Partition-point exploration over chain graphs.

Sweeps the endpoint/server split across a chain actor by actor and ranks
each cut by endpoint-side time: compute of the actors kept on the
endpoint plus the time to push the boundary feature data over the link.
Cut k keeps the first k actors on the endpoint; k = 0 ships the raw
input, k = N keeps the whole chain local (transmitting only the declared
final-output bytes, which default to zero).

Estimates come from a declared cost model so results are exact and
hardware-independent; ``measure_cut`` replays the same cut on the virtual
harness with synthetic kernels to confirm an estimate end to end.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import yaml

from .bipartite import CROSS_FIFO_CAPACITY
from .model import (
    ENDPOINT,
    IN,
    OUT,
    SERVER,
    ActorSpec,
    FifoSpec,
    GraphSpec,
    GraphError,
    LinkBinding,
    MappingSpec,
    NodeDecl,
    PortSpec,
)

__all__ = [
    "CostModel",
    "CostModelError",
    "CutEvaluation",
    "ExploreResult",
    "chain_order",
    "enumerate_cuts",
    "estimate_endpoint_time",
    "explore",
    "measure_cut",
    "measure_all",
    "table_to_csv",
    "parse_cost_model",
    "serialize_cost_model",
]


class CostModelError(ValueError):
    pass


@dataclass
class CostModel:
    """Declared per-actor compute times and per-link transfer sizes.

    ``actor_us`` maps actor id -> {platform class -> microseconds};
    ``fifo_bytes`` maps fifo id -> bytes per frame crossing that link;
    ``input_bytes`` is the raw per-frame input (the k=0 boundary) and
    ``output_bytes`` the final result shipped when the whole chain stays
    on the endpoint (0 = nothing leaves the device).
    """

    actor_us: dict[str, dict[str, float]]
    fifo_bytes: dict[str, float]
    bandwidth_bps: float
    input_bytes: float
    output_bytes: float = 0.0

    def __post_init__(self) -> None:
        if self.bandwidth_bps <= 0:
            raise CostModelError(f"bandwidth must be positive, got {self.bandwidth_bps}")
        for aid, classes in self.actor_us.items():
            for cls, us in classes.items():
                if us < 0:
                    raise CostModelError(f"actor {aid!r}/{cls}: negative time {us}")
        for fid, nbytes in self.fifo_bytes.items():
            if nbytes < 0:
                raise CostModelError(f"fifo {fid!r}: negative size {nbytes}")

    def compute_us(self, actor_id: str, platform_class: str) -> float:
        try:
            return float(self.actor_us[actor_id][platform_class])
        except KeyError:
            raise CostModelError(
                f"cost model has no entry for actor {actor_id!r} on {platform_class!r}"
            ) from None

    def bytes_of(self, fifo_id: str) -> float:
        try:
            return float(self.fifo_bytes[fifo_id])
        except KeyError:
            raise CostModelError(f"cost model has no size for fifo {fifo_id!r}") from None


def parse_cost_model(text: str) -> CostModel:
    doc = yaml.safe_load(text) or {}
    if not isinstance(doc, dict):
        raise CostModelError("cost model must be a mapping")
    known = {"actors", "fifos", "bandwidth_bps", "input_bytes", "output_bytes"}
    unknown = set(doc) - known
    if unknown:
        raise CostModelError(f"cost model: unknown key(s) {sorted(unknown)}")
    for key in ("actors", "bandwidth_bps", "input_bytes"):
        if key not in doc:
            raise CostModelError(f"cost model: missing required key {key!r}")
    return CostModel(
        actor_us={str(a): {str(c): float(v) for c, v in (classes or {}).items()}
                  for a, classes in (doc["actors"] or {}).items()},
        fifo_bytes={str(f): float(v) for f, v in (doc.get("fifos") or {}).items()},
        bandwidth_bps=float(doc["bandwidth_bps"]),
        input_bytes=float(doc["input_bytes"]),
        output_bytes=float(doc.get("output_bytes", 0.0)),
    )


def serialize_cost_model(model: CostModel) -> str:
    doc = {
        "actors": {a: dict(c) for a, c in model.actor_us.items()},
        "fifos": dict(model.fifo_bytes),
        "bandwidth_bps": model.bandwidth_bps,
        "input_bytes": model.input_bytes,
    }
    if model.output_bytes:
        doc["output_bytes"] = model.output_bytes
    return yaml.safe_dump(doc, sort_keys=True)


@dataclass
class CutEvaluation:
    """One cut's endpoint-side cost. total = compute + boundary transfer."""

    cut: int
    endpoint_compute_us: float
    comm_us: float
    total_us: float
    mapping: MappingSpec | None = None
    server_compute_us: float = 0.0  # context only, not part of the objective
    measured: bool = False


@dataclass
class ExploreResult:
    best: CutEvaluation
    table: list[CutEvaluation] = field(default_factory=list)


def chain_order(graph: GraphSpec) -> list[str]:
    """Actor ids in chain order; rejects anything that is not a single chain.

    Parallel FIFOs between consecutive actors are chain-like (the boundary
    is the sum of the crossing links); branches and skips are not.
    """
    succ: dict[str, set[str]] = {a.id: set() for a in graph.actors}
    pred: dict[str, set[str]] = {a.id: set() for a in graph.actors}
    for f in graph.fifos:
        src_dir = graph.port(f.src).direction
        if src_dir != OUT:
            raise GraphError("not a chain: control links present")
        succ[f.src[0]].add(f.dst[0])
        pred[f.dst[0]].add(f.src[0])
    heads = [aid for aid, p in pred.items() if not p]
    if len(heads) != 1:
        raise GraphError(f"not a chain: {len(heads)} head actor(s)")
    order = [heads[0]]
    while True:
        nxt = succ[order[-1]]
        if not nxt:
            break
        if len(nxt) != 1:
            raise GraphError(f"not a chain: actor {order[-1]!r} branches to {sorted(nxt)}")
        (follower,) = nxt
        if pred[follower] != {order[-1]} or follower in order:
            raise GraphError(f"not a chain: actor {follower!r} merges or cycles")
        order.append(follower)
    if len(order) != len(graph.actors):
        raise GraphError("not a chain: disconnected actors present")
    return order


def _boundary_fifos(graph: GraphSpec, order: list[str], k: int) -> list[FifoSpec]:
    """FIFOs crossing the cut after the k-th actor (1-based cut index k)."""
    left = set(order[:k])
    return [f for f in graph.fifos if (f.src[0] in left) != (f.dst[0] in left)]


def _cut_mapping(graph: GraphSpec, order: list[str], k: int) -> MappingSpec:
    nodes = [NodeDecl("ep", ENDPOINT, "endpoint"), NodeDecl("srv", SERVER, "server")]
    assignments = {}
    for i, aid in enumerate(order):
        assignments[aid] = ("ep" if i < k else "srv", "cpu0")
    links = {f.id: LinkBinding("mem") for f in _boundary_fifos(graph, order, k)}
    return MappingSpec(nodes=nodes, assignments=assignments, links=links)


def enumerate_cuts(chain: GraphSpec, nodes: tuple[str, str] = ("ep", "srv")) -> list[MappingSpec]:
    """All N+1 endpoint/server mappings of an N-actor chain (k = 0..N)."""
    order = chain_order(chain)
    return [_cut_mapping(chain, order, k) for k in range(len(order) + 1)]


def _boundary_bytes(chain: GraphSpec, order: list[str], k: int, model: CostModel) -> float:
    if k == 0:
        return model.input_bytes
    if k == len(order):
        return model.output_bytes
    return sum(model.bytes_of(f.id) for f in _boundary_fifos(chain, order, k))


def estimate_endpoint_time(
    chain: GraphSpec,
    k: int,
    model: CostModel,
    endpoint_class: str = "endpoint",
    server_class: str = "server",
    with_mapping: bool = True,
) -> CutEvaluation:
    """Endpoint-side time of cut k: sum of kept actors plus boundary comm."""
    order = chain_order(chain)
    if not 0 <= k <= len(order):
        raise CostModelError(f"cut {k} outside 0..{len(order)}")
    compute = sum(model.compute_us(aid, endpoint_class) for aid in order[:k])
    comm = _boundary_bytes(chain, order, k, model) * 8.0 / model.bandwidth_bps * 1e6
    server = sum(model.compute_us(aid, server_class) for aid in order[k:])
    return CutEvaluation(
        cut=k,
        endpoint_compute_us=compute,
        comm_us=comm,
        total_us=compute + comm,
        mapping=_cut_mapping(chain, order, k) if with_mapping else None,
        server_compute_us=server,
    )


def explore(chain: GraphSpec, model: CostModel,
            endpoint_class: str = "endpoint", server_class: str = "server") -> ExploreResult:
    """Evaluate every cut; best is the argmin with ties resolved toward
    larger k (keep as many early layers on the endpoint as possible)."""
    order = chain_order(chain)
    table = [
        estimate_endpoint_time(chain, k, model, endpoint_class, server_class,
                               with_mapping=False)
        for k in range(len(order) + 1)
    ]
    best = table[0]
    for ev in table[1:]:
        if ev.total_us <= best.total_us:
            best = ev
    return ExploreResult(best=best, table=table)


def table_to_csv(result: ExploreResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["cut", "endpoint_us", "comm_us", "total_us", "is_best"])
    for ev in result.table:
        w.writerow([
            ev.cut,
            f"{ev.endpoint_compute_us:.3f}",
            f"{ev.comm_us:.3f}",
            f"{ev.total_us:.3f}",
            int(ev.cut == result.best.cut),
        ])
    return buf.getvalue()


# -- measured exploration ---------------------------------------------------


def _measurement_graph(chain: GraphSpec, order: list[str], k: int, model: CostModel):
    """Synthetic-kernel twin of the chain: source -> actors -> sink, token
    sizes and cost hints taken from the model, endpoint class for the
    first k actors and server class for the rest."""
    boundary_sizes = []
    for i in range(len(order) + 1):
        boundary_sizes.append(max(1, int(round(_boundary_bytes(chain, order, i, model)))))

    actors = [
        ActorSpec(
            id="src",
            kernel="source",
            ports=(PortSpec("out", OUT, 1, boundary_sizes[0]),),
            params={"stream": "probe", "payload": "constant"},
        )
    ]
    fifos = []
    prev = ("src", "out")
    for i, aid in enumerate(order):
        cls = "endpoint" if i < k else "server"
        cost = model.compute_us(aid, cls)
        in_bytes = boundary_sizes[i]
        out_bytes = boundary_sizes[i + 1]
        actors.append(
            ActorSpec(
                id=aid,
                kernel="synthetic_cost",
                ports=(
                    PortSpec("in", IN, 1, in_bytes),
                    PortSpec("out", OUT, 1, out_bytes),
                ),
                params={"cost_us": cost, "payload": "constant"},
            )
        )
        fifos.append(FifoSpec(f"f_{prev[0]}_{aid}", prev, (aid, "in"),
                              CROSS_FIFO_CAPACITY, in_bytes))
        prev = (aid, "out")
    actors.append(
        ActorSpec(id="snk", kernel="sink",
                  ports=(PortSpec("in", IN, 1, boundary_sizes[-1]),))
    )
    fifos.append(FifoSpec("f_last_snk", prev, ("snk", "in"),
                          CROSS_FIFO_CAPACITY, boundary_sizes[-1]))
    graph = GraphSpec(f"{chain.name}-cut{k}", actors, fifos)

    sink_node = "srv" if model.output_bytes > 0 or k < len(order) else "ep"
    assignments = {"src": ("ep", "cpu0"), "snk": (sink_node, "cpu0")}
    for i, aid in enumerate(order):
        assignments[aid] = ("ep" if i < k else "srv", "cpu0")
    nodes = [NodeDecl("ep", ENDPOINT, "endpoint"), NodeDecl("srv", SERVER, "server")]
    links = {}
    for f in graph.fifos:
        if assignments[f.src[0]][0] != assignments[f.dst[0]][0]:
            links[f.id] = LinkBinding("mem")
    return graph, MappingSpec(nodes=nodes, assignments=assignments, links=links)


def measure_cut(chain: GraphSpec, model: CostModel, k: int, frames: int,
                registry=None) -> CutEvaluation:
    """Run cut k on the virtual harness and report the mean per-frame
    endpoint-side time (submit until the frame first lands server-side).

    The source is paced one frame per estimated round trip so queueing
    does not pollute the per-frame figure; estimated and measured
    evaluations share one schema.
    """
    from .engine import EngineConfig
    from .harness.virtual import run_mapped
    from .kernels import builtin_registry

    if frames < 1:
        raise CostModelError("empty measurement: frames must be >= 1")
    order = chain_order(chain)
    est = estimate_endpoint_time(chain, k, model, with_mapping=False)
    graph, mapping = _measurement_graph(chain, order, k, model)
    period = (est.total_us + est.server_compute_us) * 1.2 + 2000.0
    config = EngineConfig(source_period_us=period, cost_mode="hybrid")
    result = run_mapped(
        graph,
        mapping,
        registry or builtin_registry(),
        frames=frames,
        engine_config=config,
        bandwidth_bps=model.bandwidth_bps,
    )
    metrics = result.metrics
    submits = metrics.submits().get("probe", {})
    server_actors = {aid for aid, (node, _) in mapping.assignments.items() if node == "srv"}
    ep_actors = {aid for aid, (node, _) in mapping.assignments.items() if node == "ep"}

    first_server: dict[int, int] = {}
    last_ep_end: dict[int, int] = {}
    for e in metrics.events:
        if e.event == "fire_start" and e.actor in server_actors:
            if e.frame not in first_server or e.t_us < first_server[e.frame]:
                first_server[e.frame] = e.t_us
        if e.event == "fire_end" and e.actor in ep_actors and e.actor != "src":
            if e.frame not in last_ep_end or e.t_us > last_ep_end[e.frame]:
                last_ep_end[e.frame] = e.t_us
    durations = []
    for frame, t_submit in sorted(submits.items()):
        if server_actors and frame in first_server:
            durations.append(first_server[frame] - t_submit)
        elif frame in last_ep_end:
            durations.append(last_ep_end[frame] - t_submit)
    if not durations:
        raise CostModelError(f"cut {k}: measurement produced no frames")
    if len(durations) > 2:
        durations = durations[1:]  # discard the cold first frame
    mean_total = sum(durations) / len(durations)
    return CutEvaluation(
        cut=k,
        endpoint_compute_us=est.endpoint_compute_us,
        comm_us=est.comm_us,
        total_us=mean_total,
        server_compute_us=est.server_compute_us,
        measured=True,
    )


def measure_all(chain: GraphSpec, model: CostModel, frames: int,
                registry=None) -> ExploreResult:
    """Measured twin of :func:`explore` (cuts run sequentially)."""
    order = chain_order(chain)
    table = [measure_cut(chain, model, k, frames, registry) for k in range(len(order) + 1)]
    best = table[0]
    for ev in table[1:]:
        if ev.total_us <= best.total_us:
            best = ev
    return ExploreResult(best=best, table=table)
