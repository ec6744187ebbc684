"""Virtual distributed environment: every node in one process.

Each node of the mapping runs its engine plus transport in a dedicated
thread; connections are in-memory channels carrying the same encoded
frames a physical deployment sends over sockets. The harness injects
faults at frame-indexed trigger points and collects all metrics centrally.
"""

from __future__ import annotations

import queue
import sys
import time
from dataclasses import dataclass, field

from ..bipartite import build_complete_bipartite
from ..channels import VirtualNetwork
from ..engine import DeadlockDiagnosis, EngineConfig
from ..fabric import NodeReport, NodeRuntime
from ..kernels import KernelRegistry, builtin_registry
from ..link import TransportConfig
from ..metrics import MetricsCollector, RunMetrics
from ..model import ENDPOINT, GraphSpec, MappingSpec
from ..validate import validate_graph, validate_mapping
from .faults import DROP_LINK, KILL, RESTORE_LINK, FaultScript, FaultSpecError

__all__ = ["RunResult", "run_mapped", "run_virtual", "VirtualConnector"]


class VirtualConnector:
    """Connector view of the in-memory network for one node."""

    def __init__(self, network: VirtualNetwork, node_id: str):
        import threading

        self.network = network
        self.node_id = node_id
        self.wake = threading.Event()  # set whenever traffic lands for this node
        self._accept = network.register(node_id, self.wake)

    def dial(self, peer: str):
        return self.network.connect(self.node_id, peer)

    def poll_accept(self):
        try:
            return self._accept.get_nowait()
        except queue.Empty:
            return None


@dataclass
class RunResult:
    metrics: RunMetrics
    reports: dict[str, NodeReport] = field(default_factory=dict)
    diagnoses: dict[str, DeadlockDiagnosis] = field(default_factory=dict)
    watchdog_fired: bool = False

    @property
    def deadlocked(self) -> bool:
        return bool(self.diagnoses)

    def completed(self, stream: str) -> int:
        return len(self.metrics.completions().get(stream, {}))


def _streams_by_node(graph: GraphSpec, mapping: MappingSpec) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for src in graph.sources():
        node = mapping.node_of_actor(src.id)
        out.setdefault(node, []).append(graph.stream_of_source(src.id))
    return out


def run_mapped(
    graph: GraphSpec,
    mapping: MappingSpec,
    registry: KernelRegistry | None = None,
    frames: int = 100,
    fault_script: FaultScript | None = None,
    engine_config: EngineConfig | None = None,
    transport: TransportConfig | None = None,
    bandwidth_bps: float | None = None,
    watchdog_s: float = 120.0,
) -> RunResult:
    """Run an arbitrary mapped graph virtually until every live stream
    finishes its frame budget (or the watchdog gives up)."""
    registry = registry or builtin_registry()
    base_config = engine_config or EngineConfig()
    fault_script = fault_script or FaultScript()

    wire_ids = graph.wire_fifo_ids()
    for event in fault_script:
        if event.action == KILL:
            if not mapping.has_node(event.target):
                raise FaultSpecError(f"kill target {event.target!r} is not a node")
        elif event.target not in wire_ids:
            raise FaultSpecError(f"link target {event.target!r} is not a fifo")

    network = VirtualNetwork(bandwidth_bps=bandwidth_bps)
    collector = MetricsCollector()
    collector.labels["frames_requested"] = frames

    # Many engine threads share one interpreter here; a short switch
    # interval keeps one node's Python stretch from stalling another's
    # timing the way a 5 ms default slice would.
    old_switch = sys.getswitchinterval()
    sys.setswitchinterval(0.0005)

    runtimes: dict[str, NodeRuntime] = {}
    for node in mapping.nodes:
        if not mapping.actors_on(node.id):
            continue
        config = EngineConfig(**{**vars(base_config), "frame_budget": frames})
        runtimes[node.id] = NodeRuntime(
            graph,
            mapping,
            node.id,
            registry,
            config,
            VirtualConnector(network, node.id),
            collector=collector,
            transport=transport,
        )
    for rt in runtimes.values():
        rt.start()

    node_streams = _streams_by_node(graph, mapping)
    pending = list(fault_script)
    deadline = time.monotonic() + watchdog_s
    watchdog_fired = False
    killed: set[str] = set()

    while any(rt.running for rt in runtimes.values()):
        now = time.monotonic()
        if now > deadline:
            watchdog_fired = True
            for rt in runtimes.values():
                rt.stop()
            break
        while pending and _due(pending[0], collector, node_streams):
            event = pending.pop(0)
            if event.action == KILL:
                killed.add(event.target)
                rt = runtimes.get(event.target)
                if rt is not None:
                    rt.kill()
                network.kill(event.target)
            elif event.action == DROP_LINK:
                network.drop_fifo(wire_ids[event.target])
            elif event.action == RESTORE_LINK:
                network.restore_fifo(wire_ids[event.target])
        time.sleep(0.0005)

    reports = {}
    try:
        for node_id, rt in runtimes.items():
            rt.join(timeout=5.0)
            reports[node_id] = rt.report
    finally:
        sys.setswitchinterval(old_switch)

    metrics = collector.finish()
    metrics.labels["topology"] = graph.name
    metrics.labels["redundancy"] = mapping.redundancy.mode

    # A live stream that fell short of its budget means something wedged;
    # ask each engine holding unfinished work to explain itself.
    diagnoses = {}
    completions = metrics.completions()
    dead_streams = set()
    for node_id in killed:
        dead_streams.update(node_streams.get(node_id, []))
    for report in reports.values():
        dead_streams.update(report.stalled_streams)
    for stream in graph.stream_names():
        if stream in dead_streams:
            continue
        if len(completions.get(stream, {})) < frames:
            for node_id, rt in runtimes.items():
                if node_id in killed:
                    continue
                diag = rt.engine.detect_deadlock()
                if diag is not None and any(not b.dead_input for b in diag.blocked):
                    diagnoses[node_id] = diag
            break

    return RunResult(metrics=metrics, reports=reports, diagnoses=diagnoses,
                     watchdog_fired=watchdog_fired)


def _due(event, collector: MetricsCollector, node_streams: dict[str, list[str]]) -> bool:
    if event.action == KILL and event.target in node_streams:
        counts = [collector.submitted_count(s) for s in node_streams[event.target]]
        return bool(counts) and max(counts) >= event.at_frame
    return collector.max_submitted_frame() + 1 >= event.at_frame


def run_virtual(
    m: int,
    n: int,
    endpoint_template: GraphSpec,
    server_template: GraphSpec,
    frames: int,
    fault_script: FaultScript | None = None,
    engine_config: EngineConfig | None = None,
    redundancy: str = "replicate",
    shared_server_actor: bool = False,
    registry: KernelRegistry | None = None,
    transport: TransportConfig | None = None,
    bandwidth_bps: float | None = None,
    watchdog_s: float = 120.0,
    cross_capacity: int = 8,
) -> RunResult:
    """Build a K_{m,n} topology from the templates and run it virtually."""
    graph, mapping = build_complete_bipartite(
        m, n, endpoint_template, server_template,
        redundancy=redundancy, shared_server_actor=shared_server_actor,
        cross_capacity=cross_capacity,
    )
    report = validate_graph(graph)
    if not report.ok:
        raise ValueError(f"built topology failed validation:\n{report.render()}")
    report = validate_mapping(graph, mapping)
    if not report.ok:
        raise ValueError(f"built mapping failed validation:\n{report.render()}")
    return run_mapped(
        graph,
        mapping,
        registry=registry,
        frames=frames,
        fault_script=fault_script,
        engine_config=engine_config,
        transport=transport,
        bandwidth_bps=bandwidth_bps,
        watchdog_s=watchdog_s,
    )
