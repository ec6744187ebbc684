"""edgeflow: fault-tolerant dataflow runtime for collaborative
endpoint/server pipeline inference.

Pipelines are dataflow graphs of actors linked by bounded token FIFOs;
control tables switch port rates at run time for conditional computation.
A mapping assigns actors to endpoint and server nodes; the transport
fabric moves tokens between nodes over a framed protocol with liveness
monitoring and redundancy, the explorer sweeps endpoint/server partition
points under a cost model, and the harness benchmarks K_{m,n} topologies
with scripted fault injection.
"""

from .bipartite import build_complete_bipartite
from .buffers import Token, TokenBuffer
from .engine import Engine, EngineConfig
from .explore import CostModel, explore, measure_cut
from .graphfile import load_graph, load_mapping, parse_graph, parse_mapping, serialize_graph, serialize_mapping
from .kernels import KernelRegistry, builtin_registry
from .metrics import MetricsCollector, RunMetrics
from .model import (
    ActorSpec,
    ControlTable,
    FifoSpec,
    GraphSpec,
    MappingSpec,
    PortSpec,
    RateSetting,
    apply_rate_setting,
    graph_stats,
)
from .validate import validate_graph, validate_mapping

__version__ = "0.1.0"

__all__ = [
    "ActorSpec",
    "ControlTable",
    "CostModel",
    "Engine",
    "EngineConfig",
    "FifoSpec",
    "GraphSpec",
    "KernelRegistry",
    "MappingSpec",
    "MetricsCollector",
    "PortSpec",
    "RateSetting",
    "RunMetrics",
    "Token",
    "TokenBuffer",
    "apply_rate_setting",
    "build_complete_bipartite",
    "builtin_registry",
    "explore",
    "graph_stats",
    "load_graph",
    "load_mapping",
    "measure_cut",
    "parse_graph",
    "parse_mapping",
    "serialize_graph",
    "serialize_mapping",
    "validate_graph",
    "validate_mapping",
]
