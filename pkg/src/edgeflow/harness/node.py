"""Physically distributed node execution over TCP.

``run_node`` instantiates only the actors mapped to the given node id,
listens for inbound peers and dials outbound ones per the mapping's link
bindings, then services the node until its work is done. Endpoints dial
servers (ties broken by node id), so the mapping's per-link address names
the listening side.
"""

from __future__ import annotations

import time

from ..channels import ChannelClosed, TcpListener, dial_tcp
from ..engine import EngineConfig
from ..fabric import NodeReport, NodeRuntime, dialer_of_pair
from ..kernels import KernelRegistry, builtin_registry
from ..link import TransportConfig
from ..metrics import MetricsCollector, RunMetrics
from ..model import GraphError, GraphSpec, MappingSpec, cross_fifos

__all__ = ["TcpConnector", "run_node", "NodeRunOutcome"]


class TcpConnector:
    """Socket-backed connector: one listener, dial addresses per peer."""

    def __init__(self, node_id: str, listen_address: str | None,
                 peer_addresses: dict[str, str]):
        self.node_id = node_id
        self.peer_addresses = peer_addresses
        self.listener = None
        if listen_address is not None:
            host, _, port = listen_address.rpartition(":")
            self.listener = TcpListener(host or "127.0.0.1", int(port), node_id)

    def dial(self, peer: str):
        address = self.peer_addresses.get(peer)
        if address is None:
            raise ChannelClosed(f"no address known for peer {peer!r}")
        return dial_tcp(address, local=self.node_id)

    def poll_accept(self):
        if self.listener is None:
            return None
        return self.listener.accept(timeout=0.001)

    def close(self) -> None:
        if self.listener is not None:
            self.listener.close()


class NodeRunOutcome:
    def __init__(self, report: NodeReport, metrics: RunMetrics):
        self.report = report
        self.metrics = metrics

    @property
    def exit_code(self) -> int:
        return 0 if self.report.clean else 1


def plan_connector(graph: GraphSpec, mapping: MappingSpec, node_id: str) -> TcpConnector:
    """Derive listener/dial plan for a node from the mapping's tcp links."""
    listen_address = None
    peer_addresses: dict[str, str] = {}
    for f in cross_fifos(graph, mapping):
        src_node = mapping.node_of_actor(f.src[0])
        dst_node = mapping.node_of_actor(f.dst[0])
        if node_id not in (src_node, dst_node):
            continue
        binding = mapping.links.get(f.id)
        if binding is None or binding.transport != "tcp":
            raise GraphError(f"fifo {f.id!r}: no tcp binding for a distributed run")
        peer = dst_node if src_node == node_id else src_node
        dialer = dialer_of_pair(mapping, node_id, peer)
        if dialer == node_id:
            peer_addresses[peer] = binding.address
        else:
            if listen_address is not None and listen_address != binding.address:
                raise GraphError(
                    f"node {node_id!r} has conflicting listen addresses "
                    f"{listen_address!r} and {binding.address!r}"
                )
            listen_address = binding.address
    return TcpConnector(node_id, listen_address, peer_addresses)


def run_node(
    graph: GraphSpec,
    mapping: MappingSpec,
    node_id: str,
    frames: int | None = None,
    engine_config: EngineConfig | None = None,
    transport: TransportConfig | None = None,
    registry: KernelRegistry | None = None,
    settle_s: float = 0.2,
) -> NodeRunOutcome:
    """Run one node of a physically distributed deployment to completion."""
    if not mapping.has_node(node_id):
        raise GraphError(f"node {node_id!r} does not appear in the mapping")
    config = engine_config or EngineConfig()
    if frames is not None:
        config = EngineConfig(**{**vars(config), "frame_budget": frames})
    connector = plan_connector(graph, mapping, node_id)
    collector = MetricsCollector()
    runtime = NodeRuntime(
        graph,
        mapping,
        node_id,
        registry or builtin_registry(),
        config,
        connector,
        collector=collector,
        transport=transport,
    )
    try:
        report = runtime.run()
        # Peers may still be draining their final acks through our listener.
        time.sleep(settle_s)
    finally:
        connector.close()
    return NodeRunOutcome(report, collector.finish())
