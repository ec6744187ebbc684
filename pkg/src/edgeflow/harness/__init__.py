"""Benchmark harness: virtual K_{m,n} runs, fault injection, scaling bench,
and physically distributed node execution."""

from .bench import ScalingCell, ScalingTable, bench_scaling, per_frame_times
from .faults import FaultEvent, FaultScript, FaultSpecError, parse_fault_spec
from .node import NodeRunOutcome, TcpConnector, plan_connector, run_node
from .virtual import RunResult, VirtualConnector, run_mapped, run_virtual

__all__ = [
    "ScalingCell",
    "ScalingTable",
    "bench_scaling",
    "per_frame_times",
    "FaultEvent",
    "FaultScript",
    "FaultSpecError",
    "parse_fault_spec",
    "NodeRunOutcome",
    "TcpConnector",
    "plan_connector",
    "run_node",
    "RunResult",
    "VirtualConnector",
    "run_mapped",
    "run_virtual",
]
