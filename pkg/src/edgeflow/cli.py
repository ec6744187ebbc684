"""Command-line front end.

Subcommands: validate, run-node, run-virtual, explore, bench. Exit codes:
0 on success, 1 on validation violations / stalled streams under
--strict, 2 on bad usage or unreadable inputs.
"""

from __future__ import annotations

import argparse
import re
import sys

from .engine import EngineConfig
from .explore import (
    explore,
    measure_all,
    parse_cost_model,
    table_to_csv,
)
from .graphfile import GraphParseError, load_graph, load_mapping
from .harness import (
    FaultScript,
    FaultSpecError,
    bench_scaling,
    parse_fault_spec,
    run_node,
    run_virtual,
)
from .model import GraphError, graph_stats
from .templates import vehicle_endpoint_template, vehicle_server_template
from .validate import validate_graph, validate_mapping

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgeflow",
        description="Fault-tolerant dataflow runtime for collaborative pipeline inference",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a graph file (and optional mapping)")
    p.add_argument("graph")
    p.add_argument("--mapping")

    p = sub.add_parser("run-node", help="run one node of a distributed deployment")
    p.add_argument("--graph", required=True)
    p.add_argument("--mapping", required=True)
    p.add_argument("--node", required=True)
    p.add_argument("--frames", type=int)
    p.add_argument("--engine-config")
    p.add_argument("--metrics-out")
    p.add_argument("--strict", action="store_true")

    p = sub.add_parser("run-virtual", help="run a K_{m,n} topology in one process")
    p.add_argument("--topology", required=True, metavar="K<m>,<n>")
    p.add_argument("--endpoint-template", help="endpoint template graph file")
    p.add_argument("--server-template", help="server template graph file")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--redundancy", choices=["replicate", "failover"], default="replicate")
    p.add_argument("--shared-server", action="store_true",
                   help="wrap per-stream server work into one actor per server")
    p.add_argument("--fault", action="append", default=[], metavar="SPEC",
                   help="kill:<node>@frame=<k> or drop-link:<fifo>@frame=<k>,restore=<j>")
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--engine-config")
    p.add_argument("--metrics-out")
    p.add_argument("--liveness-out")
    p.add_argument("--watchdog", type=float, default=120.0)
    p.add_argument("--strict", action="store_true")

    p = sub.add_parser("explore", help="sweep partition points over a chain")
    p.add_argument("--graph", required=True)
    p.add_argument("--costs", required=True)
    p.add_argument("--measure", action="store_true")
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--out", help="write the cut table CSV here")

    p = sub.add_parser("bench", help="K_{m,n} scaling bench")
    p.add_argument("--m-range", required=True, metavar="A..B")
    p.add_argument("--n-range", required=True, metavar="A..B")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--endpoint-cost-us", type=float, default=1200.0)
    p.add_argument("--server-cost-us", type=float, default=2500.0)
    p.add_argument("--out", help="write the scaling CSV here")
    return parser


def _parse_topology(text: str) -> tuple[int, int]:
    m = re.match(r"^[Kk](\d+),(\d+)$", text.strip())
    if not m:
        raise GraphError(f"bad topology {text!r}; expected K<m>,<n>")
    return int(m.group(1)), int(m.group(2))


def _parse_range(text: str) -> list[int]:
    m = re.match(r"^(\d+)\.\.(\d+)$", text.strip())
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        if hi < lo:
            raise GraphError(f"bad range {text!r}")
        return list(range(lo, hi + 1))
    if text.strip().isdigit():
        return [int(text)]
    raise GraphError(f"bad range {text!r}; expected A..B")


def _engine_config(args) -> EngineConfig:
    if getattr(args, "engine_config", None):
        with open(args.engine_config, encoding="utf-8") as fh:
            config = EngineConfig.from_text(fh.read())
    else:
        config = EngineConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config


def _write(path: str | None, text: str) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _cmd_validate(args) -> int:
    graph = load_graph(args.graph)
    report = validate_graph(graph)
    actors, fifos = graph_stats(graph)
    print(f"{graph.name}: {actors} actors, {fifos} fifos")
    if args.mapping:
        mapping = load_mapping(args.mapping)
        report.extend(validate_mapping(graph, mapping))
    print(report.render())
    return 0 if report.ok else 1


def _cmd_run_node(args) -> int:
    graph = load_graph(args.graph)
    mapping = load_mapping(args.mapping)
    outcome = run_node(graph, mapping, args.node, frames=args.frames,
                       engine_config=_engine_config(args))
    _write(args.metrics_out, outcome.metrics.to_csv())
    print(outcome.metrics.render_summary())
    for line in outcome.report.adaptations:
        print(f"# {line}")
    if outcome.report.stalled_streams:
        print(f"stalled streams: {', '.join(outcome.report.stalled_streams)}")
    return outcome.exit_code if args.strict else 0


def _cmd_run_virtual(args) -> int:
    m, n = _parse_topology(args.topology)
    endpoint_template = (
        load_graph(args.endpoint_template) if args.endpoint_template
        else vehicle_endpoint_template()
    )
    server_template = (
        load_graph(args.server_template) if args.server_template
        else vehicle_server_template()
    )
    events = []
    for spec in args.fault:
        events.extend(parse_fault_spec(spec))
    config = _engine_config(args)
    if args.deterministic:
        config.mode = "deterministic-sequential"
    result = run_virtual(
        m, n, endpoint_template, server_template,
        frames=args.frames,
        fault_script=FaultScript(events),
        engine_config=config,
        redundancy=args.redundancy,
        shared_server_actor=args.shared_server,
        watchdog_s=args.watchdog,
    )
    _write(args.metrics_out, result.metrics.to_csv())
    _write(args.liveness_out, result.metrics.liveness_csv())
    print(result.metrics.render_summary())
    for node_id, report in sorted(result.reports.items()):
        for line in report.adaptations:
            print(f"# {node_id}: {line}")
    stalled = sum(s.stalled for s in result.metrics.summaries())
    if result.deadlocked:
        for node_id, diag in result.diagnoses.items():
            print(f"# {node_id}: {diag.render()}")
        return 1
    if args.strict and stalled:
        return 1
    return 0


def _cmd_explore(args) -> int:
    graph = load_graph(args.graph)
    with open(args.costs, encoding="utf-8") as fh:
        model = parse_cost_model(fh.read())
    result = explore(graph, model)
    csv_text = table_to_csv(result)
    print(csv_text, end="")
    print(f"best cut: {result.best.cut} "
          f"({result.best.total_us / 1000:.3f} ms endpoint+comm)")
    if args.measure:
        measured = measure_all(graph, model, frames=args.frames)
        print("measured:")
        print(table_to_csv(measured), end="")
        print(f"measured best cut: {measured.best.cut} "
              f"({measured.best.total_us / 1000:.3f} ms)")
    _write(args.out, csv_text)
    return 0


def _cmd_bench(args) -> int:
    table = bench_scaling(
        _parse_range(args.m_range),
        _parse_range(args.n_range),
        vehicle_endpoint_template(args.endpoint_cost_us / 4.0),
        vehicle_server_template(args.server_cost_us),
        frames=args.frames,
    )
    csv_text = table.to_csv()
    print(csv_text, end="")
    _write(args.out, csv_text)
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "run-node": _cmd_run_node,
    "run-virtual": _cmd_run_virtual,
    "explore": _cmd_explore,
    "bench": _cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (GraphParseError, GraphError, FaultSpecError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
