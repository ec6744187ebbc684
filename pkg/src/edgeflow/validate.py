"""Structural validation of graphs and mappings.

Violations are data, not exceptions: ``validate_graph`` checks every
invariant it can see and returns the full list, so a fixture with three
mistakes surfaces all three in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    CONTROL_IN,
    CONTROL_OUT,
    IN,
    OUT,
    SERVER,
    STATIC,
    GraphSpec,
    MappingSpec,
    PortRef,
)

__all__ = ["Violation", "ValidationReport", "validate_graph", "validate_mapping"]


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.subject}: {self.message}"


class ValidationReport(list):
    """List of violations; empty means the graph satisfies every invariant."""

    @property
    def ok(self) -> bool:
        return not self

    def codes(self) -> set[str]:
        return {v.code for v in self}

    def render(self) -> str:
        if self.ok:
            return "valid"
        return "\n".join(str(v) for v in self)


def validate_graph(g: GraphSpec) -> ValidationReport:
    """Check every declared invariant of the graph; idempotent, no side effects."""
    report = ValidationReport()
    add = report.append

    controlled_by: dict[PortRef, int] = {}
    for t in g.control_tables:
        for ref in t.controlled:
            controlled_by[ref] = controlled_by.get(ref, 0) + 1

    # Ports.
    for a in g.actors:
        for p in a.ports:
            subject = f"{a.id}.{p.id}"
            if p.rate < 0:
                add(Violation("negative-token-rate", subject, f"negative token rate {p.rate}"))
            if p.token_bytes < 1:
                add(Violation("bad-token-bytes", subject, f"token_bytes {p.token_bytes} < 1"))
            count = controlled_by.get((a.id, p.id), 0)
            if p.dynamic and count == 0:
                add(Violation("uncontrolled-dynamic-port", subject,
                              "dynamic port not in any control table"))
            if p.dynamic and count > 1:
                add(Violation("multiply-controlled-port", subject,
                              f"dynamic port controlled by {count} tables"))
            if not p.dynamic and count > 0:
                add(Violation("controlled-static-port", subject,
                              "controlled port is not marked dynamic"))

    # Actor kinds vs control ports.
    for a in g.actors:
        n_control = len(a.ports_by_direction(CONTROL_IN)) + len(a.ports_by_direction(CONTROL_OUT))
        if a.kind == STATIC and n_control > 0:
            add(Violation("static-actor-with-control", a.id,
                          f"static actor has {n_control} control port(s)"))
        if a.kind != STATIC and n_control == 0:
            add(Violation("dynamic-actor-without-control", a.id,
                          f"{a.kind} actor has no control port"))

    # FIFOs.
    bound_inputs: dict[PortRef, int] = {}
    bound_outputs: dict[PortRef, int] = {}
    for f in g.fifos:
        try:
            src = g.port(f.src)
            dst = g.port(f.dst)
        except ValueError as exc:  # resolved at parse time; re-check built graphs
            add(Violation("dangling-fifo", f.id, str(exc)))
            continue
        bound_outputs[f.src] = bound_outputs.get(f.src, 0) + 1
        bound_inputs[f.dst] = bound_inputs.get(f.dst, 0) + 1
        if src.direction not in (OUT, CONTROL_OUT):
            add(Violation("bad-fifo-endpoint", f.id,
                          f"from-port {f.src[0]}.{f.src[1]} is {src.direction}, not an output"))
        if dst.direction not in (IN, CONTROL_IN):
            add(Violation("bad-fifo-endpoint", f.id,
                          f"to-port {f.dst[0]}.{f.dst[1]} is {dst.direction}, not an input"))
        if (src.direction == OUT) != (dst.direction == IN):
            add(Violation("mixed-fifo-kind", f.id, "data and control ports on one fifo"))
        if src.token_bytes != dst.token_bytes:
            add(Violation("token-bytes-mismatch", f.id,
                          f"producer {src.token_bytes} B vs consumer {dst.token_bytes} B"))
        elif f.token_bytes not in (0, src.token_bytes):
            add(Violation("token-bytes-mismatch", f.id,
                          f"fifo declares {f.token_bytes} B, ports carry {src.token_bytes} B"))
        if f.capacity < 1:
            add(Violation("bad-capacity", f.id, f"capacity {f.capacity} < 1"))

    # Single binding per data port (control-out may fan out).
    for ref, n in bound_outputs.items():
        if n > 1 and g.port(ref).direction == OUT:
            add(Violation("multiply-bound-port", f"{ref[0]}.{ref[1]}",
                          f"data out-port feeds {n} fifos"))
    # Input multiplicity is enforced at construction; GraphSpec refuses them.

    # Control tables.
    for t in g.control_tables:
        subject = f"{t.control_port[0]}.{t.control_port[1]}"
        try:
            cp = g.port(t.control_port)
            if cp.direction != CONTROL_OUT:
                add(Violation("bad-control-port", subject,
                              f"control_port direction is {cp.direction}"))
        except ValueError:
            add(Violation("bad-control-port", subject, "control_port does not exist"))
        for ref in t.controlled:
            try:
                g.port(ref)
            except ValueError:
                add(Violation("bad-controlled-port", f"{ref[0]}.{ref[1]}",
                              "controlled port does not exist"))
        indices = [s.index for s in t.settings]
        if len(set(indices)) != len(indices):
            add(Violation("duplicate-setting-index", subject, f"indices {indices}"))
        if not t.settings:
            add(Violation("empty-control-table", subject, "table has no settings"))
        for s in t.settings:
            if len(s.rates) != len(t.controlled):
                add(Violation("setting-arity-mismatch", subject,
                              f"setting {s.index} has {len(s.rates)} rates for "
                              f"{len(t.controlled)} controlled ports"))
            for r in s.rates:
                if r < 0:
                    add(Violation("negative-token-rate", subject,
                                  f"negative token rate {r} in setting {s.index}"))
        if t.settings and not any(
            all(r > 0 for r in s.rates) for s in t.settings if len(s.rates) == len(t.controlled)
        ):
            add(Violation("no-progress-setting", subject,
                          "no setting enables all controlled ports"))

    # Reachability: every actor with any binding must be fed from some source.
    if len(g.actors) > 1:
        reachable: set[str] = set()
        stack = [a.id for a in g.sources()]
        while stack:
            aid = stack.pop()
            if aid in reachable:
                continue
            reachable.add(aid)
            for ref, fifos in g.fifos_of_output.items():
                if ref[0] != aid:
                    continue
                for f in fifos:
                    stack.append(f.dst[0])
        for a in g.actors:
            if a.id not in reachable:
                add(Violation("unreachable-actor", a.id,
                              "actor is not reachable from any source"))

    return report


def validate_mapping(g: GraphSpec, m: MappingSpec) -> ValidationReport:
    """Check mapping invariants against its graph."""
    report = ValidationReport()
    add = report.append

    for a in g.actors:
        if a.id not in m.assignments:
            add(Violation("unassigned-actor", a.id, "actor has no node assignment"))
    for actor_id, (node_id, _unit) in m.assignments.items():
        if not g.has_actor(actor_id):
            add(Violation("unknown-actor", actor_id, "assignment references unknown actor"))
        if not m.has_node(node_id):
            add(Violation("unknown-node", node_id, f"assignment of {actor_id!r}"))

    for f in g.fifos:
        src_node = m.assignments.get(f.src[0], (None,))[0]
        dst_node = m.assignments.get(f.dst[0], (None,))[0]
        if src_node is None or dst_node is None:
            continue
        if src_node != dst_node and f.id not in m.links:
            add(Violation("unbound-cross-fifo", f.id,
                          f"crosses {src_node} -> {dst_node} without a transport binding"))

    for group in m.redundancy.groups:
        for node_id in group:
            if not m.has_node(node_id):
                add(Violation("unknown-node", node_id, "redundancy group member"))
            elif m.node(node_id).role != SERVER:
                add(Violation("bad-redundancy-member", node_id,
                              "redundancy group member is not a server"))

    return report
